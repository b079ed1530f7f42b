//! First-order finite volumes on a uniform 1-D mesh: Rusanov fluxes,
//! CFL time steps, convection followed by relaxation.
//!
//! Totals and entropy are tracked net of what crossed the domain
//! boundaries, so drift and entropy production are meaningful for
//! transmissive boundaries as well as periodic ones.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::equilibrium;
use crate::error::{Error, Result};
use crate::hem::{self, HemState, Mode};
use crate::hrm::{self, HrmState, RelaxationConfig};
use crate::mixture::{self, Composition, EosTriple, FractionVector, MixtureInput, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Zero-gradient ghost cells.
    Transmissive,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Transmissive => "transmissive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub bc: Boundary,
}

impl Grid {
    pub fn new(n: usize, x_min: f64, x_max: f64, bc: Boundary) -> Result<Self> {
        let g = Grid {
            n,
            x_min,
            x_max,
            bc,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 4 cells, got {}",
                self.n
            )));
        }
        if !(self.x_max > self.x_min) || !(self.x_max - self.x_min).is_finite() {
            return Err(Error::InvalidParameter(
                "grid requires x_max > x_min".into(),
            ));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn centre(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }
}

/// `½(f_L + f_R) − ½a(U_R − U_L)`, written into `out`.
pub fn rusanov_flux(
    f_l: &[f64],
    f_r: &[f64],
    u_l: &[f64],
    u_r: &[f64],
    a_max: f64,
    out: &mut [f64],
) {
    for k in 0..out.len() {
        out[k] = 0.5 * (f_l[k] + f_r[k]) - 0.5 * a_max * (u_r[k] - u_l[k]);
    }
}

/// What the scheme needs from a cell besides its flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEval {
    /// Wave-speed bound `|u| + c`.
    pub speed: f64,
    /// `ρσ` (HRM) or `ρs` (HEM).
    pub entropy: f64,
    pub entropy_flux: f64,
    /// Smallest mass, volume or energy fraction among present phases.
    pub min_fraction: f64,
}

/// Point-wise output fields of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitives {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    pub t: f64,
    pub e: f64,
    pub comp: Composition,
    pub y: FractionVector,
    pub sigma: f64,
}

/// Indices of conserved components.
#[derive(Debug, Clone, PartialEq)]
pub struct Conserved {
    pub mass: usize,
    pub momentum: usize,
    pub energy: usize,
    pub partial: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleCheck {
    pub hyperbolic: bool,
    /// Frozen speed bounds the equilibrium speed; `None` where not applicable.
    pub subcharacteristic: Option<bool>,
}

pub trait System {
    fn ncomp(&self) -> usize;
    fn conserved(&self) -> Conserved;
    /// Writes the physical flux of `u` into `f`.
    fn evaluate(&self, u: &[f64], f: &mut [f64]) -> Result<CellEval>;
    /// Source step at frozen conserved totals; returns the number of clipped fractions.
    fn relax(&self, _u: &mut [f64], _dt: f64) -> Result<usize> {
        Ok(0)
    }
    fn primitives(&self, u: &[f64]) -> Result<Primitives>;
    fn sample_check(&self, u: &[f64]) -> Result<SampleCheck>;
    fn velocity(&self, u: &[f64]) -> f64 {
        let c = self.conserved();
        u[c.momentum] / u[c.mass]
    }
}

fn min_present(comp: &Composition, y: &FractionVector) -> f64 {
    let mut m = f64::INFINITY;
    for k in Phase::ALL {
        if comp.is_present(k) {
            m = m.min(comp.get(k)).min(y.alpha(k)).min(y.z(k));
        }
    }
    m
}

pub struct HemSystem {
    pub eos: EosTriple,
    pub mode: Mode,
}

impl System for HemSystem {
    fn ncomp(&self) -> usize {
        HemState::ncomp(self.mode)
    }

    fn conserved(&self) -> Conserved {
        match self.mode {
            Mode::Npt => Conserved {
                mass: 2,
                momentum: 3,
                energy: 4,
                partial: vec![0, 1],
            },
            Mode::Pt => Conserved {
                mass: 1,
                momentum: 2,
                energy: 3,
                partial: vec![0],
            },
        }
    }

    fn evaluate(&self, u: &[f64], f: &mut [f64]) -> Result<CellEval> {
        let st = HemState::from_conservative(self.mode, u);
        let eq = hem::equilibrium(&self.eos, &st, self.mode)?;
        let c = hem::sound_speed_of(&eq)?;
        f.copy_from_slice(&hem::flux_with_pressure(&st, self.mode, eq.pressure));
        let v = st.velocity();
        let entropy = st.rho * eq.entropy;
        Ok(CellEval {
            speed: v.abs() + c,
            entropy,
            entropy_flux: entropy * v,
            min_fraction: min_present(&eq.comp, &eq.y_eq),
        })
    }

    fn primitives(&self, u: &[f64]) -> Result<Primitives> {
        let st = HemState::from_conservative(self.mode, u);
        let eq = hem::equilibrium(&self.eos, &st, self.mode)?;
        Ok(Primitives {
            rho: st.rho,
            u: st.velocity(),
            p: eq.pressure,
            t: eq.temperature,
            e: st.internal_energy(),
            comp: eq.comp,
            y: eq.y_eq,
            sigma: eq.entropy,
        })
    }

    fn sample_check(&self, u: &[f64]) -> Result<SampleCheck> {
        let st = HemState::from_conservative(self.mode, u);
        let r = hem::eigen_check(&self.eos, &st, self.mode)?;
        Ok(SampleCheck {
            hyperbolic: r.pass,
            subcharacteristic: None,
        })
    }
}

pub struct HrmSystem {
    pub eos: EosTriple,
    pub mode: Mode,
    pub relax: RelaxationConfig,
}

impl System for HrmSystem {
    fn ncomp(&self) -> usize {
        hrm::NCOMP
    }

    fn conserved(&self) -> Conserved {
        Conserved {
            mass: 2,
            momentum: 3,
            energy: 4,
            partial: match self.mode {
                Mode::Npt => vec![0, 1],
                Mode::Pt => vec![1],
            },
        }
    }

    fn evaluate(&self, u: &[f64], f: &mut [f64]) -> Result<CellEval> {
        let st = HrmState::from_conservative(u);
        let m = st.input()?;
        let th = mixture::evaluate(&self.eos, &m)?;
        let (p, _) = mixture::closure_of(&th, &m.y);
        let c = mixture::frozen_sound_speed_of(&th, &m)?;
        let v = st.velocity();
        for (fk, uk) in f.iter_mut().zip(u) {
            *fk = uk * v;
        }
        f[3] += p;
        f[4] += p * v;
        let entropy = st.rho * mixture::sigma_of(&th, &m.comp);
        Ok(CellEval {
            speed: v.abs() + c,
            entropy,
            entropy_flux: entropy * v,
            min_fraction: min_present(&m.comp, &m.y),
        })
    }

    fn relax(&self, u: &mut [f64], dt: f64) -> Result<usize> {
        let st = HrmState::from_conservative(u);
        let out = hrm::relax_step(&self.eos, &st, dt, &self.relax, self.mode)?;
        u.copy_from_slice(&out.state.to_conservative());
        Ok(out.clips)
    }

    fn primitives(&self, u: &[f64]) -> Result<Primitives> {
        let st = HrmState::from_conservative(u);
        let m = st.input()?;
        let th = mixture::evaluate(&self.eos, &m)?;
        let (p, t) = mixture::closure_of(&th, &m.y);
        Ok(Primitives {
            rho: st.rho,
            u: st.velocity(),
            p,
            t,
            e: m.e,
            comp: m.comp,
            y: m.y,
            sigma: mixture::sigma_of(&th, &m.comp),
        })
    }

    fn sample_check(&self, u: &[f64]) -> Result<SampleCheck> {
        let st = HrmState::from_conservative(u);
        let m = st.input()?;
        let frozen = mixture::frozen_sound_speed(&self.eos, &m);
        let hyperbolic = frozen.is_ok();
        let subcharacteristic = match (&frozen, hrm::target(&self.eos, &st, self.mode)) {
            (Ok(cf), Ok(eq)) => Some(eq.sound_speed_squared().sqrt() <= cf * (1.0 + 1e-8)),
            _ => None,
        };
        Ok(SampleCheck {
            hyperbolic,
            subcharacteristic,
        })
    }
}

/// Per-step record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub mass_drift: f64,
    pub momentum_drift: f64,
    pub energy_drift: f64,
    pub partial_mass_drift: f64,
    pub total_entropy: f64,
    /// Entropy change over the step net of boundary entropy fluxes.
    pub entropy_production: f64,
    pub min_fraction: f64,
    pub clip_count: usize,
    pub hyperbolicity_ok: bool,
}

/// Tolerated entropy loss per step, relative to `Σ|ρσ|Δx`.
pub const ENTROPY_TOL: f64 = 1e-10;

pub struct Solver<S: System> {
    system: S,
    grid: Grid,
    cfl: f64,
    u: Vec<f64>,
    flux: Vec<f64>,
    evals: Vec<CellEval>,
    t: f64,
    steps: usize,
    initial: Vec<f64>,
    scale: Vec<f64>,
    inflow: Vec<f64>,
    clip_count: usize,
    hyperbolicity_ok: bool,
    subcharacteristic_ok: Option<bool>,
    entropy_monotone: bool,
    max_entropy_loss: f64,
}

impl<S: System> Solver<S> {
    pub fn new(system: S, grid: Grid, cfl: f64, u0: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl must lie in (0, 1], got {cfl}"
            )));
        }
        let nc = system.ncomp();
        assert_eq!(u0.len(), nc * grid.n);
        let mut s = Solver {
            system,
            grid,
            cfl,
            flux: vec![0.0; u0.len()],
            evals: Vec::new(),
            u: u0,
            t: 0.0,
            steps: 0,
            initial: Vec::new(),
            scale: Vec::new(),
            inflow: vec![0.0; nc],
            clip_count: 0,
            hyperbolicity_ok: true,
            subcharacteristic_ok: None,
            entropy_monotone: true,
            max_entropy_loss: 0.0,
        };
        s.refresh()?;
        s.initial = s.totals();
        let dx = grid.dx();
        s.scale = (0..nc)
            .map(|k| (0..grid.n).map(|i| s.u[i * nc + k].abs()).sum::<f64>() * dx)
            .map(|x| if x > 0.0 { x } else { 1.0 })
            .collect();
        Ok(s)
    }

    fn refresh(&mut self) -> Result<()> {
        let nc = self.system.ncomp();
        self.evals.clear();
        for i in 0..self.grid.n {
            let ev = self
                .system
                .evaluate(
                    &self.u[i * nc..(i + 1) * nc],
                    &mut self.flux[i * nc..(i + 1) * nc],
                )
                .map_err(|e| e.at_cell(i))?;
            self.evals.push(ev);
        }
        Ok(())
    }

    pub fn system(&self) -> &S {
        &self.system
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Conservative state, cell-major.
    pub fn state(&self) -> &[f64] {
        &self.u
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        let nc = self.system.ncomp();
        &self.u[i * nc..(i + 1) * nc]
    }

    /// `Σ U_i Δx` per component.
    pub fn totals(&self) -> Vec<f64> {
        let nc = self.system.ncomp();
        let dx = self.grid.dx();
        (0..nc)
            .map(|k| (0..self.grid.n).map(|i| self.u[i * nc + k]).sum::<f64>() * dx)
            .collect()
    }

    pub fn total_entropy(&self) -> f64 {
        self.evals.iter().map(|e| e.entropy).sum::<f64>() * self.grid.dx()
    }

    fn entropy_scale(&self) -> f64 {
        self.evals.iter().map(|e| e.entropy.abs()).sum::<f64>() * self.grid.dx()
    }

    /// Relative drift of each component's total, net of boundary fluxes.
    pub fn drifts(&self) -> Vec<f64> {
        self.totals()
            .iter()
            .enumerate()
            .map(|(k, tot)| (tot - self.initial[k] - self.inflow[k]).abs() / self.scale[k])
            .collect()
    }

    pub fn stable_dt(&self) -> f64 {
        let a = self.evals.iter().map(|e| e.speed).fold(0.0, f64::max);
        self.cfl * self.grid.dx() / a
    }

    pub fn entropy_monotone(&self) -> bool {
        self.entropy_monotone
    }

    pub fn max_entropy_loss(&self) -> f64 {
        self.max_entropy_loss
    }

    pub fn clip_count(&self) -> usize {
        self.clip_count
    }

    /// One convection step followed by relaxation; `dt ≤ dt_max`.
    pub fn step(&mut self, dt_max: f64) -> Result<Diagnostics> {
        let nc = self.system.ncomp();
        let n = self.grid.n;
        let dx = self.grid.dx();
        let stable = self.stable_dt();
        if !(stable.is_finite() && stable > 0.0) {
            return Err(Error::CflFailure { dt: stable });
        }
        let dt = stable.min(dt_max);
        if !(dt > 0.0) || self.t + dt == self.t {
            return Err(Error::CflFailure { dt });
        }

        // interface i sits between cells i − 1 and i
        let mut fluxes = vec![0.0; (n + 1) * nc];
        for i in 0..=n {
            let out = &mut fluxes[i * nc..(i + 1) * nc];
            let (l, r) = match self.grid.bc {
                Boundary::Periodic => ((i + n - 1) % n, i % n),
                Boundary::Transmissive => (i.saturating_sub(1), i.min(n - 1)),
            };
            let a = self.evals[l].speed.max(self.evals[r].speed);
            rusanov_flux(
                &self.flux[l * nc..(l + 1) * nc],
                &self.flux[r * nc..(r + 1) * nc],
                &self.u[l * nc..(l + 1) * nc],
                &self.u[r * nc..(r + 1) * nc],
                a,
                out,
            );
        }
        let s_before = self.total_entropy();
        let entropy_in = match self.grid.bc {
            Boundary::Periodic => 0.0,
            Boundary::Transmissive => {
                dt * (self.evals[0].entropy_flux - self.evals[n - 1].entropy_flux)
            }
        };
        let ratio = dt / dx;
        for i in 0..n {
            for k in 0..nc {
                self.u[i * nc + k] -= ratio * (fluxes[(i + 1) * nc + k] - fluxes[i * nc + k]);
            }
        }
        if self.grid.bc == Boundary::Transmissive {
            for k in 0..nc {
                self.inflow[k] += dt * (fluxes[k] - fluxes[n * nc + k]);
            }
        }

        let mut clips = 0;
        for i in 0..n {
            clips += self
                .system
                .relax(&mut self.u[i * nc..(i + 1) * nc], dt)
                .map_err(|e| e.at_cell(i))?;
        }
        self.clip_count += clips;
        self.refresh()?;
        self.t += dt;
        self.steps += 1;

        let total_entropy = self.total_entropy();
        let production = total_entropy - s_before - entropy_in;
        if production < -ENTROPY_TOL * self.entropy_scale() {
            self.entropy_monotone = false;
        }
        self.max_entropy_loss = self.max_entropy_loss.max(-production);
        Ok(self.diagnostics(dt, production))
    }

    fn diagnostics(&self, dt: f64, entropy_production: f64) -> Diagnostics {
        let c = self.system.conserved();
        let d = self.drifts();
        Diagnostics {
            step: self.steps,
            t: self.t,
            dt,
            mass_drift: d[c.mass],
            momentum_drift: d[c.momentum],
            energy_drift: d[c.energy],
            partial_mass_drift: c.partial.iter().map(|&k| d[k]).fold(0.0, f64::max),
            total_entropy: self.total_entropy(),
            entropy_production,
            min_fraction: self
                .evals
                .iter()
                .map(|e| e.min_fraction)
                .fold(f64::INFINITY, f64::min),
            clip_count: self.clip_count,
            hyperbolicity_ok: self.hyperbolicity_ok,
        }
    }

    /// Spectral checks on `count` evenly spaced cells; unevaluable cells are skipped.
    pub fn check_samples(&mut self, count: usize) -> SampleCheck {
        let n = self.grid.n;
        let mut out = SampleCheck {
            hyperbolic: true,
            subcharacteristic: None,
        };
        for j in 0..count.min(n) {
            let i = j * n / count.min(n);
            if let Ok(r) = self.system.sample_check(self.cell(i)) {
                out.hyperbolic &= r.hyperbolic;
                if let Some(s) = r.subcharacteristic {
                    out.subcharacteristic = Some(out.subcharacteristic.unwrap_or(true) && s);
                }
            }
        }
        self.hyperbolicity_ok &= out.hyperbolic;
        if let Some(s) = out.subcharacteristic {
            self.subcharacteristic_ok = Some(self.subcharacteristic_ok.unwrap_or(true) && s);
        }
        out
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        let rows = (0..self.grid.n)
            .map(|i| {
                self.system
                    .primitives(self.cell(i))
                    .map_err(|e| e.at_cell(i))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Snapshot {
            t: self.t,
            step: self.steps,
            x: (0..self.grid.n).map(|i| self.grid.centre(i)).collect(),
            rows,
        })
    }

    pub fn summary(&self, model: Model, t_end: f64) -> Summary {
        let d = self.diagnostics(0.0, 0.0);
        Summary {
            model,
            steps: self.steps,
            t_final: self.t,
            reached_t_end: self.t >= t_end * (1.0 - 1e-12),
            mass_drift: d.mass_drift,
            momentum_drift: d.momentum_drift,
            energy_drift: d.energy_drift,
            partial_mass_drift: d.partial_mass_drift,
            total_entropy: d.total_entropy,
            entropy_monotone: self.entropy_monotone,
            max_entropy_loss: self.max_entropy_loss,
            min_fraction: d.min_fraction,
            clip_count: self.clip_count,
            hyperbolicity_ok: self.hyperbolicity_ok,
            subcharacteristic_ok: self.subcharacteristic_ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub x: Vec<f64>,
    pub rows: Vec<Primitives>,
}

impl Snapshot {
    pub const COLUMNS: [&'static str; 14] = [
        "x", "rho", "u", "p", "T", "e", "phi_l", "phi_g", "phi_v", "alpha_l", "z_l", "z_g", "z_v",
        "sigma",
    ];

    pub fn to_csv(&self, model: Model) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# model = {}", model.as_str());
        let _ = writeln!(s, "# step = {}", self.step);
        let _ = writeln!(s, "# t = {:.16e}", self.t);
        s.push_str(&Self::COLUMNS.join(","));
        s.push('\n');
        for (x, r) in self.x.iter().zip(&self.rows) {
            let vals = [
                *x,
                r.rho,
                r.u,
                r.p,
                r.t,
                r.e,
                r.comp.phi_l,
                r.comp.phi_g,
                r.comp.phi_v,
                r.y.alpha_l,
                r.y.z_l,
                r.y.z_g,
                r.y.z_v(),
                r.sigma,
            ];
            let line: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn column(&self, f: impl Fn(&Primitives) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    HemNpt,
    HemPt,
    HrmNpt,
    HrmPt,
}

impl Model {
    pub fn mode(self) -> Mode {
        match self {
            Model::HemNpt | Model::HrmNpt => Mode::Npt,
            Model::HemPt | Model::HrmPt => Mode::Pt,
        }
    }

    pub fn is_relaxation(self) -> bool {
        matches!(self, Model::HrmNpt | Model::HrmPt)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Model::HemNpt => "hem-npt",
            Model::HemPt => "hem-pt",
            Model::HrmNpt => "hrm-npt",
            Model::HrmPt => "hrm-pt",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hem-npt" => Ok(Model::HemNpt),
            "hem-pt" => Ok(Model::HemPt),
            "hrm-npt" => Ok(Model::HrmNpt),
            "hrm-pt" => Ok(Model::HrmPt),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thermal {
    Energy(f64),
    Pressure(f64),
}

/// One initial state. Omitted fractions mean equilibrium; in PT mode the
/// liquid fraction is then the equilibrium one as well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitState {
    pub rho: f64,
    pub u: f64,
    pub thermal: Thermal,
    pub phi_l: f64,
    pub phi_g: f64,
    pub y: Option<FractionVector>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    Riemann {
        x0: f64,
        left: InitState,
        right: InitState,
    },
    /// `ρ = ρ₀(1 + a sin(2πk(x − x_min)/L))` at uniform velocity and pressure (or energy).
    Smooth {
        base: InitState,
        rho_amp: f64,
        wavenumber: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub eos: EosTriple,
    pub grid: Grid,
    pub cfl: f64,
    pub t_end: f64,
    pub max_steps: usize,
    pub initial: InitialData,
    pub relax: RelaxationConfig,
    /// Snapshot every this many steps; 0 keeps only the first and last.
    pub output_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub model: Model,
    pub steps: usize,
    pub t_final: f64,
    pub reached_t_end: bool,
    pub mass_drift: f64,
    pub momentum_drift: f64,
    pub energy_drift: f64,
    pub partial_mass_drift: f64,
    pub total_entropy: f64,
    pub entropy_monotone: bool,
    pub max_entropy_loss: f64,
    pub min_fraction: f64,
    pub clip_count: usize,
    pub hyperbolicity_ok: bool,
    pub subcharacteristic_ok: Option<bool>,
}

impl Summary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model = {}", self.model.as_str());
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "t_final = {:.16e}", self.t_final);
        let _ = writeln!(s, "reached_t_end = {}", self.reached_t_end);
        let _ = writeln!(s, "mass_drift = {:.16e}", self.mass_drift);
        let _ = writeln!(s, "momentum_drift = {:.16e}", self.momentum_drift);
        let _ = writeln!(s, "energy_drift = {:.16e}", self.energy_drift);
        let _ = writeln!(s, "partial_mass_drift = {:.16e}", self.partial_mass_drift);
        let _ = writeln!(s, "total_entropy = {:.16e}", self.total_entropy);
        let _ = writeln!(s, "entropy_monotone = {}", self.entropy_monotone);
        let _ = writeln!(s, "max_entropy_loss = {:.16e}", self.max_entropy_loss);
        let _ = writeln!(s, "min_fraction = {:.16e}", self.min_fraction);
        let _ = writeln!(s, "clip_count = {}", self.clip_count);
        let _ = writeln!(s, "hyperbolicity_ok = {}", self.hyperbolicity_ok);
        match self.subcharacteristic_ok {
            Some(b) => {
                let _ = writeln!(s, "subcharacteristic_ok = {b}");
            }
            None => s.push_str("subcharacteristic_ok = n/a\n"),
        }
        s
    }
}

impl Diagnostics {
    pub fn to_line(&self) -> String {
        format!(
            "step={} t={:.16e} dt={:.16e} mass_drift={:.16e} momentum_drift={:.16e} energy_drift={:.16e} \
             partial_mass_drift={:.16e} total_entropy={:.16e} entropy_production={:.16e} min_fraction={:.16e} \
             clip_count={} hyperbolicity_ok={}",
            self.step,
            self.t,
            self.dt,
            self.mass_drift,
            self.momentum_drift,
            self.energy_drift,
            self.partial_mass_drift,
            self.total_entropy,
            self.entropy_production,
            self.min_fraction,
            self.clip_count,
            self.hyperbolicity_ok
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub history: Vec<Diagnostics>,
    pub summary: Summary,
}

const SAMPLE_CELLS: usize = 8;

fn march<S: System>(mut solver: Solver<S>, cfg: &RunConfig) -> Result<RunOutput> {
    let mut snapshots = vec![solver.snapshot()?];
    solver.check_samples(SAMPLE_CELLS);
    let mut history = Vec::new();
    while solver.time() < cfg.t_end && solver.steps() < cfg.max_steps {
        let d = solver.step(cfg.t_end - solver.time())?;
        history.push(d);
        let done = solver.time() >= cfg.t_end || solver.steps() >= cfg.max_steps;
        if done || (cfg.output_every > 0 && solver.steps().is_multiple_of(cfg.output_every)) {
            solver.check_samples(SAMPLE_CELLS);
            if let Some(last) = history.last_mut() {
                last.hyperbolicity_ok = solver.hyperbolicity_ok;
            }
            snapshots.push(solver.snapshot()?);
        }
    }
    let summary = solver.summary(cfg.model, cfg.t_end);
    Ok(RunOutput {
        snapshots,
        history,
        summary,
    })
}

/// Time-marches `cfg` in memory.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let mode = cfg.model.mode();
    let u0 = initial_cells(cfg)?;
    if cfg.model.is_relaxation() {
        cfg.relax.validate()?;
        let sys = HrmSystem {
            eos: cfg.eos,
            mode,
            relax: cfg.relax,
        };
        march(Solver::new(sys, cfg.grid, cfg.cfl, u0)?, cfg)
    } else {
        let sys = HemSystem { eos: cfg.eos, mode };
        march(Solver::new(sys, cfg.grid, cfg.cfl, u0)?, cfg)
    }
}

/// Runs `cfg` and writes `snap_####.csv`, `diag.txt` and `summary.txt` into `dir`.
pub fn run_to_dir(cfg: &RunConfig, dir: &Path) -> Result<Summary> {
    let out = run(cfg)?;
    let io = |e: std::io::Error| Error::Config(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (k, snap) in out.snapshots.iter().enumerate() {
        fs::write(dir.join(format!("snap_{k:04}.csv")), snap.to_csv(cfg.model)).map_err(io)?;
    }
    let mut diag = String::from("# one line per time step\n");
    for d in &out.history {
        diag.push_str(&d.to_line());
        diag.push('\n');
    }
    fs::write(dir.join("diag.txt"), diag).map_err(io)?;
    fs::write(dir.join("summary.txt"), out.summary.to_text()).map_err(io)?;
    Ok(out.summary)
}

/// Conservative initial cells for `cfg`, cell-major.
pub fn initial_cells(cfg: &RunConfig) -> Result<Vec<f64>> {
    cfg.grid.validate()?;
    let mut u = Vec::new();
    for i in 0..cfg.grid.n {
        let x = cfg.grid.centre(i);
        let st = match cfg.initial {
            InitialData::Riemann { x0, left, right } => {
                if x < x0 {
                    left
                } else {
                    right
                }
            }
            InitialData::Smooth {
                base,
                rho_amp,
                wavenumber,
            } => {
                let l = cfg.grid.x_max - cfg.grid.x_min;
                let phase = 2.0 * std::f64::consts::PI * wavenumber * (x - cfg.grid.x_min) / l;
                InitState {
                    rho: base.rho * (1.0 + rho_amp * phase.sin()),
                    ..base
                }
            }
        };
        let cell = conservative_cell(&cfg.eos, cfg.model, &st).map_err(|e| e.at_cell(i))?;
        u.extend(cell);
    }
    Ok(u)
}

fn conservative_cell(eos: &EosTriple, model: Model, st: &InitState) -> Result<Vec<f64>> {
    let mode = model.mode();
    let tau = 1.0 / st.rho;
    if !(st.rho > 0.0) {
        return Err(Error::domain(format!(
            "initial density must be positive, got {}",
            st.rho
        )));
    }
    let fixed = match (model.is_relaxation(), st.y) {
        (true, Some(y)) => Some((
            Composition::new(st.phi_l, st.phi_g)?,
            FractionVector::new(y.alpha_l, y.z_l, y.z_g)?,
        )),
        _ => None,
    };
    let pressure_of = |e: f64| -> Result<f64> {
        match fixed {
            Some((comp, y)) => {
                mixture::pressure_out_of_equilibrium(eos, &MixtureInput::new(tau, e, comp, y)?)
                    .map(|r| r.0)
            }
            None => equilibrate(eos, mode, tau, e, st.phi_l, st.phi_g).map(|r| r.pressure),
        }
    };
    let e = match st.thermal {
        Thermal::Energy(e) => e,
        Thermal::Pressure(p) => invert_pressure(&pressure_of, p)?,
    };
    if model.is_relaxation() {
        let (comp, y) = match fixed {
            Some(f) => f,
            None => {
                let eq = equilibrate(eos, mode, tau, e, st.phi_l, st.phi_g)?;
                (eq.comp, eq.y_eq)
            }
        };
        let h = HrmState::from_primitive(st.rho, st.u, e, comp, y);
        h.input().and_then(|m| mixture::sigma(eos, &m))?;
        Ok(h.to_conservative().to_vec())
    } else {
        let h = HemState::from_primitive(st.rho, st.u, e, st.phi_l, st.phi_g);
        hem::equilibrium(eos, &h, mode)?;
        Ok(h.to_conservative(mode))
    }
}

fn equilibrate(
    eos: &EosTriple,
    mode: Mode,
    tau: f64,
    e: f64,
    phi_l: f64,
    phi_g: f64,
) -> Result<equilibrium::EquilibriumResult> {
    match mode {
        Mode::Npt => equilibrium::equilibrate_npt(eos, tau, e, phi_l, phi_g),
        Mode::Pt => equilibrium::equilibrate_pt(eos, tau, e, phi_g),
    }
}

/// Solves `p(e) = target` by bracketing and bisection; states where `p`
/// cannot be evaluated count as lying below the root.
fn invert_pressure(p: &dyn Fn(f64) -> Result<f64>, target: f64) -> Result<f64> {
    if !target.is_finite() {
        return Err(Error::domain(format!(
            "initial pressure must be finite, got {target}"
        )));
    }
    let below = |e: f64| p(e).map(|v| v < target).unwrap_or(true);
    let mut hi = 1.0;
    let mut tries = 0;
    while below(hi) {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::domain(format!(
                "no internal energy reaches pressure {target}"
            )));
        }
    }
    let mut lo = hi;
    tries = 0;
    while !below(lo) {
        lo *= 0.5;
        tries += 1;
        if tries > 1100 {
            return Err(Error::domain(format!(
                "no internal energy reaches pressure {target}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    p(hi)?;
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::EosParams;
    use approx::assert_relative_eq;

    const THIRD: f64 = 1.0 / 3.0;

    fn identical() -> EosTriple {
        EosTriple::uniform(EosParams::ideal_gas(1.0, 2.0, 0.0).unwrap())
    }

    fn base(rho: f64, u: f64, thermal: Thermal) -> InitState {
        InitState {
            rho,
            u,
            thermal,
            phi_l: THIRD,
            phi_g: THIRD,
            y: None,
        }
    }

    fn config(model: Model, initial: InitialData, bc: Boundary) -> RunConfig {
        RunConfig {
            model,
            eos: identical(),
            grid: Grid::new(32, 0.0, 1.0, bc).unwrap(),
            cfl: 0.45,
            t_end: 0.05,
            max_steps: 10_000,
            initial,
            relax: RelaxationConfig::projection(),
            output_every: 0,
        }
    }

    #[test]
    fn rusanov_properties() {
        let f = [2.0, 3.0];
        let u = [1.0, -1.0];
        let mut out = [0.0; 2];
        rusanov_flux(&f, &f, &u, &u, 7.0, &mut out);
        assert_eq!(out, f);
        // upwind for linear advection at speed a
        let a = 1.5;
        let (ul, ur) = ([2.0], [5.0]);
        let mut o = [0.0];
        rusanov_flux(&[a * ul[0]], &[a * ur[0]], &ul, &ur, a, &mut o);
        assert_eq!(o[0], a * ul[0]);
        let mut o2 = [0.0];
        rusanov_flux(&[a * ul[0]], &[a * ur[0]], &ul, &ur, 2.0 * a, &mut o2);
        assert_relative_eq!(
            o2[0] - o[0],
            -0.5 * a * (ur[0] - ul[0]),
            max_relative = 1e-15
        );
    }

    #[test]
    fn uniform_state_is_steady() {
        for model in [Model::HemNpt, Model::HemPt, Model::HrmNpt, Model::HrmPt] {
            let init = InitialData::Smooth {
                base: base(1.0, 0.5, Thermal::Energy(1.0)),
                rho_amp: 0.0,
                wavenumber: 1.0,
            };
            let cfg = config(model, init, Boundary::Periodic);
            let u0 = initial_cells(&cfg).unwrap();
            let sys_run = run(&RunConfig {
                t_end: 0.02,
                ..cfg.clone()
            })
            .unwrap();
            assert!(sys_run.history.len() >= 2);
            let last = sys_run.snapshots.last().unwrap();
            let first = &sys_run.snapshots[0];
            for (a, b) in first.rows.iter().zip(&last.rows) {
                assert!((a.rho - b.rho).abs() <= 1e-14);
                assert!((a.u - b.u).abs() <= 1e-14);
                assert!((a.p - b.p).abs() <= 1e-13);
            }
            assert!(!u0.is_empty());
        }
    }

    #[test]
    fn zero_end_time_echoes_initial_data() {
        let init = InitialData::Riemann {
            x0: 0.5,
            left: base(1.0, 0.0, Thermal::Pressure(1.0)),
            right: base(0.125, 0.0, Thermal::Pressure(0.1)),
        };
        let cfg = RunConfig {
            t_end: 0.0,
            ..config(Model::HrmNpt, init, Boundary::Transmissive)
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.snapshots.len(), 1);
        assert!(out.history.is_empty());
        let s = &out.snapshots[0];
        assert_relative_eq!(s.rows[0].p, 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.rows[31].p, 0.1, max_relative = 1e-12);
        assert_eq!(s.rows[0].rho, 1.0);
    }

    #[test]
    fn riemann_problem_conserves_and_produces_entropy() {
        for model in [Model::HemNpt, Model::HrmNpt, Model::HrmPt] {
            let init = InitialData::Riemann {
                x0: 0.5,
                left: base(1.0, 0.0, Thermal::Energy(1.0)),
                right: base(0.125, 0.0, Thermal::Energy(0.8)),
            };
            let out = run(&config(model, init, Boundary::Transmissive)).unwrap();
            let s = out.summary;
            assert!(s.reached_t_end);
            assert!(s.entropy_monotone, "{model:?}");
            assert!(
                s.mass_drift < 1e-13 && s.energy_drift < 1e-13 && s.momentum_drift < 1e-13,
                "{s:?}"
            );
            assert!(s.hyperbolicity_ok);
        }
    }

    #[test]
    fn pressure_inversion() {
        let p = |e: f64| -> Result<f64> {
            if e < 0.1 {
                Err(Error::domain("too cold"))
            } else {
                Ok(3.0 * (e - 0.1))
            }
        };
        let e = invert_pressure(&p, 1.5).unwrap();
        assert_relative_eq!(e, 0.6, max_relative = 1e-14);
    }

    #[test]
    fn csv_layout() {
        let init = InitialData::Smooth {
            base: base(1.0, 0.0, Thermal::Energy(1.0)),
            rho_amp: 0.1,
            wavenumber: 1.0,
        };
        let cfg = RunConfig {
            t_end: 0.0,
            ..config(Model::HemNpt, init, Boundary::Periodic)
        };
        let out = run(&cfg).unwrap();
        let csv = out.snapshots[0].to_csv(Model::HemNpt);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with('#'));
        assert_eq!(
            lines[3],
            "x,rho,u,p,T,e,phi_l,phi_g,phi_v,alpha_l,z_l,z_g,z_v,sigma"
        );
        assert_eq!(lines.len(), 4 + 32);
        assert_eq!(lines[4].split(',').count(), 14);
    }
}
