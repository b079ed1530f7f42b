import init, { equilibrium_sweep, hyperbolicity_map, riemann_run } from "./pkg/triphase_demo.js";

const DEFAULT_CONFIG = `model = hrm-npt

eos.liquid.kind = stiffened
eos.liquid.cv = 1
eos.liquid.gamma = 2
eos.liquid.pi_inf = 1
eos.gas.kind = ideal
eos.gas.cv = 1
eos.gas.gamma = 1.4
eos.vapor.kind = ideal
eos.vapor.cv = 1.5
eos.vapor.gamma = 1.3
eos.vapor.s_ref = -1.2

grid.n = 200
grid.x_min = 0
grid.x_max = 1
grid.bc = transmissive

time.cfl = 0.45
time.t_end = 0.15

init.kind = riemann
init.x0 = 0.5
init.left.rho = 1
init.left.u = 0
init.left.p = 1
init.left.phi_l = 0.3
init.left.phi_g = 0.5
init.right.rho = 0.25
init.right.u = 0
init.right.p = 0.2
init.right.phi_l = 0.3
init.right.phi_g = 0.5

relax.kind = projection
`;

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const config = () => $("config").value;

function guarded(errorId, f) {
  return () => {
    $(errorId).textContent = "";
    try {
      f();
    } catch (err) {
      $(errorId).textContent = String(err);
    }
  };
}

// Each series is drawn in its own horizontal band, scaled to its own range.
function plotBands(canvas, x, series) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const band = height / series.length;
  const finite = (v) => v !== null && Number.isFinite(v);
  const xs = x.filter(finite);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const px = (v) => 50 + ((v - x0) / (x1 - x0 || 1)) * (width - 60);
  series.forEach(({ name, values }, k) => {
    const ys = values.filter(finite);
    const top = k * band;
    ctx.fillStyle = "#333";
    ctx.font = "12px sans-serif";
    ctx.fillText(name, 4, top + 14);
    if (ys.length === 0) return;
    let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
    if (y1 - y0 < 1e-12 * Math.max(1, Math.abs(y1))) {
      y0 -= 0.5;
      y1 += 0.5;
    }
    const py = (v) => top + band - 6 - ((v - y0) / (y1 - y0)) * (band - 24);
    ctx.fillText(y1.toPrecision(4), 4, top + 28);
    ctx.fillText(y0.toPrecision(4), 4, top + band - 6);
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    let pen = false;
    values.forEach((v, i) => {
      if (!finite(v) || !finite(x[i])) {
        pen = false;
        return;
      }
      if (pen) ctx.lineTo(px(x[i]), py(v));
      else ctx.moveTo(px(x[i]), py(v));
      pen = true;
    });
    ctx.stroke();
  });
}

function sweep() {
  const out = JSON.parse(
    equilibrium_sweep(config(), $("sw-mode").value, num("sw-tau"), num("sw-emin"), num("sw-emax"), 120, num("sw-phil"), num("sw-phig")),
  );
  const pts = out.points;
  const get = (key) => pts.map((p) => (key in p ? p[key] : null));
  plotBands($("sw-plot"), get("e"), [
    { name: "p", values: get("p") },
    { name: "T", values: get("T") },
    { name: "c", values: get("c") },
    { name: "phi_v", values: get("phi_v") },
  ]);
  const failed = pts.filter((p) => p.error);
  if (failed.length > 0) {
    $("sw-error").textContent = `${failed.length} points failed, first at e = ${failed[0].e}: ${failed[0].error}`;
  }
}

const STATUS_COLORS = { pass: "#4c9a2a", fail: "#c0392b", skipped: "#cccccc" };

function scan() {
  const n = Math.max(2, Math.min(80, Math.round(num("hm-n"))));
  const out = JSON.parse(
    hyperbolicity_map(config(), $("hm-mode").value, num("hm-tmin"), num("hm-tmax"), num("hm-emin"), num("hm-emax"), n, num("hm-phil"), num("hm-phig"), num("hm-u")),
  );
  const canvas = $("hm-plot");
  const ctx = canvas.getContext("2d");
  const w = canvas.width / out.taus.length;
  const h = canvas.height / out.es.length;
  const counts = { pass: 0, fail: 0, skipped: 0 };
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  out.cells.forEach((cell) => {
    const i = out.taus.indexOf(cell.tau);
    const j = out.es.indexOf(cell.e);
    counts[cell.status] += 1;
    ctx.fillStyle = STATUS_COLORS[cell.status];
    ctx.fillRect(i * w, canvas.height - (j + 1) * h, w - 1, h - 1);
  });
  $("hm-legend").textContent =
    `tau to the right, e upward. pass ${counts.pass}, fail ${counts.fail}, outside the domain ${counts.skipped}`;
}

function shockTube() {
  const out = JSON.parse(riemann_run(config()));
  plotBands($("rr-plot"), out.x, [
    { name: "rho", values: out.rho },
    { name: "u", values: out.u },
    { name: "p", values: out.p },
    { name: "phi_l", values: out.phi_l },
  ]);
  $("rr-summary").textContent = out.summary;
}

await init();
$("config").value = DEFAULT_CONFIG;
$("sw-run").addEventListener("click", guarded("sw-error", sweep));
$("hm-run").addEventListener("click", guarded("hm-error", scan));
$("rr-run").addEventListener("click", guarded("rr-error", shockTube));
