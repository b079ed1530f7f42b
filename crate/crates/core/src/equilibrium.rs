//! Thermodynamic equilibrium of the mixture by entropy maximization.
//!
//! Without phase transition (NPT) the mass fractions are fixed and `σ` is
//! maximized over `(α_l, z_l, z_g)`. With phase transition (PT) the liquid
//! mass fraction joins the unknowns, the gas fraction staying fixed.
//!
//! The solver works in per-unit-mass extensive coordinates
//! `(V_l, E_l, E_g, M_l)` next to `(τ, e)`. In these coordinates each phase's
//! `(mass, volume, energy)` is affine in all variables jointly, so the
//! Hessian of `σ` is an exact sum of congruences of the phase Hessians. This
//! gives a damped Newton ascent for the maximizer and, through a Schur
//! complement, the exact Hessian of the equilibrium entropy in `(τ, e)`.
//! Newton steps are taken in fraction units (`α_l = V_l/τ`, `z_k = E_k/e`).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::eos::PhaseState;
use crate::error::{Error, Result};
use crate::mixture::{
    self, Composition, EosTriple, FractionVector, MixtureInput, MixtureThermo, Phase, EPS_PHASE,
};

/// Relative tolerance on temperature equality, Dalton's law and chemical potential equality.
pub const TOL_EQ: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 100;

const TARGET_RESIDUAL: f64 = 1e-13;
/// Residual accepted when the line search can make no further progress,
/// raised to the roundoff floor of phases holding a tiny share of the
/// volume or energy (their states come from differences of totals).
const STALL_RESIDUAL: f64 = 1e-10;
const DEGENERACY_RATIO: f64 = 1e-10;
/// Free steps in a row without halving the best residual before the
/// iteration counts as stalled.
const STAGNATION_LIMIT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Every phase allowed by the composition is present.
    Interior,
    /// PT only: all the condensable mass is liquid, no vapor.
    BoundaryPureLiquid,
    /// PT only: all the condensable mass is vapor, no liquid.
    BoundaryNoLiquid,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Interior => "interior",
            Regime::BoundaryPureLiquid => "boundary-pure-liquid",
            Regime::BoundaryNoLiquid => "boundary-no-liquid",
        }
    }
}

/// Relative first-order residuals at a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `max |T_k − T_j| / T` over present phases.
    pub temperature: f64,
    /// `|p_l − p_g − p_v| / max(|p_l|, |p_g| + |p_v|)`, zero when not applicable.
    pub dalton: f64,
    /// `|μ_l − μ_v| / |μ_l|` in the PT interior regime, zero otherwise.
    pub chemical_potential: f64,
    /// The maximizer is not unique: the Hessian has a flat direction.
    pub degenerate: bool,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.temperature
            .max(self.dalton)
            .max(self.chemical_potential)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub tau: f64,
    pub e: f64,
    pub comp: Composition,
    pub y_eq: FractionVector,
    pub phi_l_eq: f64,
    pub temperature: f64,
    pub pressure: f64,
    /// Equilibrium specific entropy `s_NPT` or `s_PT`.
    pub entropy: f64,
    pub regime: Regime,
    pub residuals: Residuals,
    pub iterations: usize,
    pub thermo: MixtureThermo,
    /// Hessian of the equilibrium entropy in `(τ, e)`.
    pub entropy_hessian: [[f64; 2]; 2],
}

impl EquilibriumResult {
    pub fn input(&self) -> MixtureInput {
        MixtureInput {
            tau: self.tau,
            e: self.e,
            comp: self.comp,
            y: self.y_eq,
        }
    }

    /// `c² = τ²(p ∂ₑp − ∂_τp)` evaluated through the entropy Hessian.
    pub fn sound_speed_squared(&self) -> f64 {
        mixture::sound_speed_squared_from_hessian(
            self.tau,
            self.pressure,
            self.temperature,
            self.entropy_hessian,
        )
    }

    pub fn phase_state(&self, phase: Phase) -> Option<PhaseState> {
        self.thermo.states[phase.index()]
    }
}

// Variable slots: free unknowns first, then the mixture state. `VOL` is the
// volume of the liquid or of the gaseous phases, `E_1`/`E_2` the energies of
// the phases other than the reference one, `MASS` the liquid or vapor mass.
const VOL: usize = 0;
const E_1: usize = 1;
const E_2: usize = 2;
const MASS: usize = 3;
const TAU: usize = 4;
const ENERGY: usize = 5;
const NVAR: usize = 6;

#[derive(Debug, Clone, Copy, Default)]
struct Affine {
    c: f64,
    a: [f64; NVAR],
}

impl Affine {
    fn constant(c: f64) -> Self {
        Affine { c, a: [0.0; NVAR] }
    }
    fn var(i: usize) -> Self {
        let mut a = [0.0; NVAR];
        a[i] = 1.0;
        Affine { c: 0.0, a }
    }
    fn plus(mut self, i: usize, coef: f64) -> Self {
        self.a[i] += coef;
        self
    }
    fn eval(&self, z: &[f64; NVAR]) -> f64 {
        self.c + self.a.iter().zip(z).map(|(a, x)| a * x).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy)]
struct PhaseMap {
    phase: Phase,
    /// mass, volume, energy per unit mixture mass
    w: [Affine; 3],
}

/// Which phase owns each free slot. The owners are chosen so that phases with
/// a tiny share are primary unknowns rather than differences of totals.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Conditioning {
    /// Phase whose energy is the remainder.
    reference: Phase,
    /// Phase whose mass is `MASS` (PT only).
    mass_owner: Phase,
    /// `VOL` is the liquid volume, else the gaseous one.
    liquid_volume: bool,
}

/// One reduced maximization problem: which phases exist and which slots are free.
#[derive(Debug, Clone)]
struct Layout {
    maps: Vec<PhaseMap>,
    free: Vec<usize>,
    phi_g: f64,
    /// `None` when the liquid mass fraction is an unknown.
    phi_l: Option<f64>,
    present: [bool; 3],
    /// Free energy slot of each phase, `None` for the reference phase.
    energy_slot: [Option<usize>; 3],
    conditioning: Conditioning,
}

impl Layout {
    fn new(phi_l: Option<f64>, phi_g: f64) -> Self {
        let present = Self::presence(phi_l, phi_g);
        let reference = if present[2] {
            Phase::Vapor
        } else if present[1] {
            Phase::Gas
        } else {
            Phase::Liquid
        };
        let conditioning = Conditioning {
            reference,
            mass_owner: Phase::Liquid,
            liquid_volume: true,
        };
        Self::build(phi_l, phi_g, conditioning)
    }

    fn presence(phi_l: Option<f64>, phi_g: f64) -> [bool; 3] {
        let liquid = phi_l.is_none_or(|p| p >= EPS_PHASE);
        let gas = phi_g >= EPS_PHASE;
        let vapor = match phi_l {
            None => true,
            Some(p) => 1.0 - phi_g - p >= EPS_PHASE,
        };
        [liquid, gas, vapor]
    }

    fn build(phi_l: Option<f64>, phi_g: f64, conditioning: Conditioning) -> Self {
        let present = Self::presence(phi_l, phi_g);
        let [liquid, gas, vapor] = present;
        let gaseous = gas || vapor;
        let Conditioning {
            reference,
            mass_owner,
            liquid_volume,
        } = conditioning;

        let mut free = Vec::new();
        if liquid && gaseous {
            free.push(VOL);
        }
        let mut energy_slot = [None; 3];
        let mut slots = [E_1, E_2].into_iter();
        for k in Phase::ALL {
            if present[k.index()] && k != reference {
                let slot = slots.next().expect("at most two non-reference phases");
                energy_slot[k.index()] = Some(slot);
                free.push(slot);
            }
        }
        if phi_l.is_none() {
            free.push(MASS);
        }

        let (liquid_v, gaseous_v) = match (liquid && gaseous, liquid_volume) {
            (false, _) => (Affine::var(TAU), Affine::var(TAU)),
            (true, true) => (Affine::var(VOL), Affine::var(TAU).plus(VOL, -1.0)),
            (true, false) => (Affine::var(TAU).plus(VOL, -1.0), Affine::var(VOL)),
        };
        let condensable_mass = |owner: Phase| match phi_l {
            None if owner == mass_owner => Affine::var(MASS),
            None => Affine::constant(1.0 - phi_g).plus(MASS, -1.0),
            Some(p) if owner == Phase::Liquid => Affine::constant(p),
            Some(p) => Affine::constant(1.0 - phi_g - p),
        };
        let mut maps = Vec::new();
        for k in Phase::ALL {
            if !present[k.index()] {
                continue;
            }
            let (m, v) = match k {
                Phase::Liquid => (condensable_mass(Phase::Liquid), liquid_v),
                Phase::Gas => (Affine::constant(phi_g), gaseous_v),
                Phase::Vapor => (condensable_mass(Phase::Vapor), gaseous_v),
            };
            let energy = energy_slot[k.index()].map_or(Affine::var(ENERGY), Affine::var);
            maps.push(PhaseMap {
                phase: k,
                w: [m, v, energy],
            });
        }
        // the reference phase takes whatever energy the others leave
        let mut remainder = Affine::var(ENERGY);
        for pm in maps.iter().filter(|pm| pm.phase != reference) {
            for i in 0..NVAR {
                remainder.a[i] -= pm.w[2].a[i];
            }
        }
        for pm in maps.iter_mut().filter(|pm| pm.phase == reference) {
            pm.w[2] = remainder;
        }

        Layout {
            maps,
            free,
            phi_g,
            phi_l,
            present,
            energy_slot,
            conditioning,
        }
    }

    fn row(&self, phase: Phase, row: usize, z: &[f64; NVAR]) -> f64 {
        self.maps
            .iter()
            .find(|pm| pm.phase == phase)
            .map(|pm| pm.w[row].eval(z))
            .unwrap_or(0.0)
    }

    /// The same problem with the smallest shares as primary unknowns, and the
    /// point `z` expressed in it, or `None` when the current choice already fits.
    fn reconditioned(&self, z: &[f64; NVAR]) -> Option<(Layout, [f64; NVAR])> {
        let reference = self
            .maps
            .iter()
            .map(|pm| (pm.phase, pm.w[2].eval(z).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))?
            .0;
        let mass_owner = if self.phi_l.is_none()
            && self.row(Phase::Vapor, 0, z) < self.row(Phase::Liquid, 0, z)
        {
            Phase::Vapor
        } else {
            Phase::Liquid
        };
        let liquid_v = self.row(Phase::Liquid, 1, z);
        let liquid_volume = !self.free.contains(&VOL) || liquid_v <= z[TAU] - liquid_v;
        let conditioning = Conditioning {
            reference,
            mass_owner,
            liquid_volume,
        };
        if conditioning == self.conditioning {
            return None;
        }
        let layout = Self::build(self.phi_l, self.phi_g, conditioning);
        let mut nz = [0.0; NVAR];
        nz[TAU] = z[TAU];
        nz[ENERGY] = z[ENERGY];
        nz[VOL] = if liquid_volume {
            liquid_v
        } else {
            z[TAU] - liquid_v
        };
        nz[MASS] = self.row(mass_owner, 0, z);
        for k in Phase::ALL {
            if let Some(slot) = layout.energy_slot[k.index()] {
                nz[slot] = self.row(k, 2, z);
            }
        }
        Some((layout, nz))
    }

    fn scale(&self, slot: usize, z: &[f64; NVAR]) -> f64 {
        match slot {
            VOL => z[TAU],
            E_1 | E_2 => z[ENERGY],
            _ => 1.0,
        }
    }

    /// `σ`, its gradient and Hessian over all six slots.
    fn evaluate(&self, eos: &EosTriple, z: &[f64; NVAR]) -> Result<Eval> {
        let mut sigma = 0.0;
        let mut grad = [0.0; NVAR];
        let mut hess = [[0.0; NVAR]; NVAR];
        for pm in &self.maps {
            let w = [pm.w[0].eval(z), pm.w[1].eval(z), pm.w[2].eval(z)];
            let (s, g, h) = eos.get(pm.phase).extensive_derivatives(w[0], w[1], w[2])?;
            sigma += s;
            for i in 0..NVAR {
                let ai = [pm.w[0].a[i], pm.w[1].a[i], pm.w[2].a[i]];
                if ai == [0.0; 3] {
                    continue;
                }
                grad[i] += ai[0] * g[0] + ai[1] * g[1] + ai[2] * g[2];
                for (j, hij) in hess[i].iter_mut().enumerate() {
                    let aj = [pm.w[0].a[j], pm.w[1].a[j], pm.w[2].a[j]];
                    let mut acc = 0.0;
                    for r in 0..3 {
                        for c in 0..3 {
                            acc += ai[r] * h[r][c] * aj[c];
                        }
                    }
                    *hij += acc;
                }
            }
        }
        Ok(Eval { sigma, grad, hess })
    }

    fn feasible_masses(&self, z: &[f64; NVAR]) -> bool {
        if self.phi_l.is_some() {
            return true;
        }
        let m = z[MASS];
        m >= EPS_PHASE && 1.0 - self.phi_g - m >= EPS_PHASE
    }

    fn composition(&self, z: &[f64; NVAR]) -> Composition {
        let phi_g = self.phi_g;
        match self.phi_l {
            Some(phi_l) => Composition {
                phi_l,
                phi_g,
                phi_v: if self.present[2] {
                    1.0 - phi_g - phi_l
                } else {
                    0.0
                },
            },
            None => Composition {
                phi_l: self.row(Phase::Liquid, 0, z),
                phi_g,
                phi_v: self.row(Phase::Vapor, 0, z),
            },
        }
    }

    fn fractions(&self, z: &[f64; NVAR]) -> FractionVector {
        let alpha_l = (self.row(Phase::Liquid, 1, z) / z[TAU]).clamp(0.0, 1.0);
        let z_l = (self.row(Phase::Liquid, 2, z) / z[ENERGY]).max(0.0);
        let z_g = (self.row(Phase::Gas, 2, z) / z[ENERGY]).max(0.0);
        FractionVector { alpha_l, z_l, z_g }
    }
}

struct Eval {
    sigma: f64,
    grad: [f64; NVAR],
    hess: [[f64; NVAR]; NVAR],
}

/// Temperature-equalizing starting point for a given liquid volume.
fn initial_point(eos: &EosTriple, layout: &Layout, tau: f64, e: f64) -> Result<[f64; NVAR]> {
    let mut z = [0.0; NVAR];
    z[TAU] = tau;
    z[ENERGY] = e;
    if layout.phi_l.is_none() {
        z[MASS] = 0.5 * (1.0 - layout.phi_g);
    }
    let mass = |z: &[f64; NVAR], k: Phase| layout.row(k, 0, z);

    let r = |k: Phase| eos.get(k).gas_constant();
    let mut alpha = if layout.free.contains(&VOL) {
        let liquid = r(Phase::Liquid) * mass(&z, Phase::Liquid);
        let gaseous =
            r(Phase::Gas) * mass(&z, Phase::Gas) + r(Phase::Vapor) * mass(&z, Phase::Vapor);
        liquid / (liquid + gaseous)
    } else {
        0.0
    };

    for _ in 0..60 {
        z[VOL] = if layout.conditioning.liquid_volume {
            alpha
        } else {
            1.0 - alpha
        } * tau;
        let mut offset = 0.0;
        let mut heat = 0.0;
        for pm in &layout.maps {
            let p = eos.get(pm.phase);
            let m = pm.w[0].eval(&z);
            let v = pm.w[1].eval(&z);
            offset += m * p.q() + p.pi_inf() * v;
            heat += m * p.cv();
        }
        let t = (e - offset) / heat;
        if t > 0.0 {
            for pm in &layout.maps {
                let p = eos.get(pm.phase);
                let m = pm.w[0].eval(&z);
                let v = pm.w[1].eval(&z);
                let energy = m * p.q() + p.pi_inf() * v + m * p.cv() * t;
                if let Some(slot) = layout.energy_slot[pm.phase.index()] {
                    z[slot] = energy;
                }
            }
            if layout.evaluate(eos, &z).is_ok() {
                return Ok(z);
            }
        }
        if !layout.free.contains(&VOL) {
            break;
        }
        // a stiffened liquid may need less volume to leave thermal energy positive
        alpha *= 0.5;
    }
    Err(Error::domain(format!(
        "no feasible fractions at tau={tau}, e={e}"
    )))
}

enum Outcome {
    Converged {
        z: [f64; NVAR],
        iterations: usize,
    },
    /// The line search failed above the roundoff floor of this layout.
    Stalled {
        z: [f64; NVAR],
        iterations: usize,
        residual: f64,
    },
    /// PT only: the iterate is pinned against `φ_l = 0` or `φ_v = 0`.
    Boundary,
}

/// Dimensionless first-order residual of the free slots.
fn scaled_residual(layout: &Layout, th: &MixtureThermo, ev: &Eval) -> f64 {
    let mut t_inv = 0.0;
    let mut z_sum = 0.0;
    let mut p_scale: f64 = 0.0;
    let mut mu_scale: f64 = 0.0;
    for k in Phase::ALL {
        if let Some(p) = th.phase(k) {
            t_inv += 1.0 / p.temperature;
            z_sum += 1.0;
            p_scale = p_scale.max(p.pressure.abs());
            mu_scale = mu_scale.max(p.chemical_potential.abs());
        }
    }
    let t = z_sum / t_inv;
    let mut r: f64 = 0.0;
    for &slot in &layout.free {
        let g = ev.grad[slot];
        let v = match slot {
            VOL => g.abs() * t / p_scale.max(f64::MIN_POSITIVE),
            E_1 | E_2 => g.abs() * t,
            _ => g.abs() * t / mu_scale.max(f64::MIN_POSITIVE),
        };
        r = r.max(v);
    }
    r
}

/// Phase states taken from the extensive rows, not rebuilt from fractions.
fn thermo_at(eos: &EosTriple, layout: &Layout, z: &[f64; NVAR]) -> Result<MixtureThermo> {
    let mut states = [None; 3];
    let mut phases = [None; 3];
    for pm in &layout.maps {
        let m = pm.w[0].eval(z);
        let st = PhaseState::new(pm.w[1].eval(z) / m, pm.w[2].eval(z) / m);
        phases[pm.phase.index()] = Some(eos.get(pm.phase).evaluate(st)?);
        states[pm.phase.index()] = Some(st);
    }
    Ok(MixtureThermo { states, phases })
}

fn stall_tolerance(layout: &Layout, z: &[f64; NVAR]) -> f64 {
    let totals = [1.0, z[TAU], z[ENERGY]];
    let mut share: f64 = 1.0;
    for pm in &layout.maps {
        for (row, total) in pm.w.iter().zip(totals) {
            let terms = row.a.iter().filter(|&&a| a != 0.0).count() + usize::from(row.c != 0.0);
            if terms > 1 {
                share = share.min(row.eval(z).abs() / total);
            }
        }
    }
    (64.0 * f64::EPSILON / share).clamp(STALL_RESIDUAL, TOL_EQ)
}

fn newton(eos: &EosTriple, layout: &Layout, tau: f64, e: f64) -> Result<Outcome> {
    newton_from(eos, layout, initial_point(eos, layout, tau, e)?)
}

fn newton_from(eos: &EosTriple, layout: &Layout, mut z: [f64; NVAR]) -> Result<Outcome> {
    let n = layout.free.len();
    if n == 0 {
        return Ok(Outcome::Converged { z, iterations: 0 });
    }
    let mut ev = layout.evaluate(eos, &z)?;
    let mut res = scaled_residual(layout, &thermo_at(eos, layout, &z)?, &ev);
    let mut pinned = 0;
    let mut best = res;
    let mut stagnant = 0;

    for it in 0..MAX_ITERATIONS {
        if res <= TARGET_RESIDUAL {
            return Ok(Outcome::Converged { z, iterations: it });
        }
        let d_scale: Vec<f64> = layout.free.iter().map(|&s| layout.scale(s, &z)).collect();
        let g = DVector::from_fn(n, |i, _| d_scale[i] * ev.grad[layout.free[i]]);
        let neg_h = DMatrix::from_fn(n, n, |i, j| {
            -d_scale[i] * d_scale[j] * ev.hess[layout.free[i]][layout.free[j]]
        });
        let diag_max = (0..n).map(|i| neg_h[(i, i)].abs()).fold(0.0, f64::max);
        let mut shift = 1e-14 * diag_max;
        let mut dir = None;
        for _ in 0..12 {
            let m = &neg_h + DMatrix::identity(n, n) * shift;
            if let Some(ch) = m.cholesky() {
                dir = Some(ch.solve(&g));
                break;
            }
            shift = (shift * 100.0).max(1e-12 * diag_max);
        }
        let dir = dir.ok_or(Error::NonConvergence {
            iterations: it,
            residual: res,
        })?;
        let slope = g.dot(&dir);

        // ratio test on the liquid/vapor mass bounds: at most halfway to a bound
        let mut step_max = 1.0;
        let mut mass_limited = false;
        if let Some(pos) = layout.free.iter().position(|&s| s == MASS) {
            let d = dir[pos];
            let m = z[MASS];
            let rest = 1.0 - layout.phi_g - m;
            if d < 0.0 && m + d < 0.5 * (m + EPS_PHASE) {
                step_max = 0.5 * (m - EPS_PHASE) / -d;
                mass_limited = true;
            } else if d > 0.0 && rest - d < 0.5 * (rest + EPS_PHASE) {
                step_max = 0.5 * (rest - EPS_PHASE) / d;
                mass_limited = true;
            }
        }
        if mass_limited {
            pinned += 1;
            let m = z[MASS];
            let gap = m.min(1.0 - layout.phi_g - m);
            if pinned >= 3 && gap < 1e-8 {
                return Ok(Outcome::Boundary);
            }
        } else {
            pinned = 0;
        }

        let roundoff = 1e-14 * (1.0 + ev.sigma.abs());
        let mut alpha = step_max;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = z;
            for (i, &slot) in layout.free.iter().enumerate() {
                trial[slot] += alpha * d_scale[i] * dir[i];
            }
            if layout.feasible_masses(&trial) {
                if let Ok(tev) = layout.evaluate(eos, &trial) {
                    let gain = tev.sigma - ev.sigma;
                    if gain >= 1e-4 * alpha * slope {
                        accepted = Some((trial, tev));
                        break;
                    }
                    if gain >= -roundoff {
                        if let Ok(th) = thermo_at(eos, layout, &trial) {
                            let tres = scaled_residual(layout, &th, &tev);
                            if tres < res {
                                accepted = Some((trial, tev));
                                break;
                            }
                        }
                    }
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, tev)) => {
                z = trial;
                ev = tev;
                res = scaled_residual(layout, &thermo_at(eos, layout, &z)?, &ev);
                if res < 0.5 * best || mass_limited {
                    best = best.min(res);
                    stagnant = 0;
                } else {
                    stagnant += 1;
                }
                if stagnant >= STAGNATION_LIMIT && res > TARGET_RESIDUAL {
                    if res <= stall_tolerance(layout, &z) {
                        return Ok(Outcome::Converged {
                            z,
                            iterations: it + 1,
                        });
                    }
                    return Ok(Outcome::Stalled {
                        z,
                        iterations: it + 1,
                        residual: res,
                    });
                }
            }
            None if res <= stall_tolerance(layout, &z) => {
                // no further progress possible in floating point
                return Ok(Outcome::Converged { z, iterations: it });
            }
            None => {
                if mass_limited {
                    return Ok(Outcome::Boundary);
                }
                return Ok(Outcome::Stalled {
                    z,
                    iterations: it,
                    residual: res,
                });
            }
        }
    }
    if res <= stall_tolerance(layout, &z) {
        return Ok(Outcome::Converged {
            z,
            iterations: MAX_ITERATIONS,
        });
    }
    if pinned > 0 {
        return Ok(Outcome::Boundary);
    }
    Ok(Outcome::Stalled {
        z,
        iterations: MAX_ITERATIONS,
        residual: res,
    })
}

fn residuals_of(layout: &Layout, th: &MixtureThermo) -> Residuals {
    let present: Vec<_> = Phase::ALL.iter().filter_map(|&k| th.phase(k)).collect();
    let t_mix = present.len() as f64 / present.iter().map(|p| 1.0 / p.temperature).sum::<f64>();
    let t_max = present
        .iter()
        .map(|p| p.temperature)
        .fold(f64::MIN, f64::max);
    let t_min = present
        .iter()
        .map(|p| p.temperature)
        .fold(f64::MAX, f64::min);
    let temperature = (t_max - t_min) / t_mix;

    let dalton = match th.phase(Phase::Liquid) {
        Some(l) if layout.free.contains(&VOL) => {
            let gas: Vec<f64> = [Phase::Gas, Phase::Vapor]
                .iter()
                .filter_map(|&k| th.phase(k).map(|p| p.pressure))
                .collect();
            let sum: f64 = gas.iter().sum();
            let scale = l.pressure.abs().max(gas.iter().map(|p| p.abs()).sum());
            (l.pressure - sum).abs() / scale
        }
        _ => 0.0,
    };
    let chemical_potential = match (
        layout.phi_l,
        th.phase(Phase::Liquid),
        th.phase(Phase::Vapor),
    ) {
        (None, Some(l), Some(v)) => {
            (l.chemical_potential - v.chemical_potential).abs() / l.chemical_potential.abs()
        }
        _ => 0.0,
    };
    Residuals {
        temperature,
        dalton,
        chemical_potential,
        degenerate: false,
    }
}

/// Hessian of the maximized entropy in `(τ, e)` by the Schur complement
/// `H_θθ − H_θx H_xx⁺ H_xθ`, plus a flag for a singular `H_xx`.
fn equilibrium_hessian(layout: &Layout, ev: &Eval, z: &[f64; NVAR]) -> ([[f64; 2]; 2], bool) {
    let th_slots = [TAU, ENERGY];
    let mut h = [[0.0; 2]; 2];
    for (a, &i) in th_slots.iter().enumerate() {
        for (b, &j) in th_slots.iter().enumerate() {
            h[a][b] = ev.hess[i][j];
        }
    }
    let n = layout.free.len();
    if n == 0 {
        return (h, false);
    }
    let d: Vec<f64> = layout.free.iter().map(|&s| layout.scale(s, z)).collect();
    let hxx = DMatrix::from_fn(n, n, |i, j| {
        d[i] * d[j] * ev.hess[layout.free[i]][layout.free[j]]
    });
    let hxt = DMatrix::from_fn(n, 2, |i, b| d[i] * ev.hess[layout.free[i]][th_slots[b]]);
    let eig = SymmetricEigen::new(hxx);
    let lam_max = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let lam_min = eig
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .fold(f64::MAX, f64::min);
    let degenerate = lam_min <= DEGENERACY_RATIO * lam_max;
    let inv_eigs = eig.eigenvalues.map(|l| {
        if l.abs() > 1e-12 * lam_max {
            1.0 / l
        } else {
            0.0
        }
    });
    let pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_eigs) * eig.eigenvectors.transpose();
    let corr = hxt.transpose() * pinv * &hxt;
    for a in 0..2 {
        for b in 0..2 {
            h[a][b] -= corr[(a, b)];
        }
    }
    h[0][1] = 0.5 * (h[0][1] + h[1][0]);
    h[1][0] = h[0][1];
    (h, degenerate)
}

fn solve(
    eos: &EosTriple,
    layout: &Layout,
    tau: f64,
    e: f64,
    regime: Regime,
) -> Result<Option<EquilibriumResult>> {
    check_state(tau, e)?;
    let (mut z, mut iterations, stalled) = match newton(eos, layout, tau, e)? {
        Outcome::Converged { z, iterations } => (z, iterations, None),
        Outcome::Stalled {
            z,
            iterations,
            residual,
        } => (z, iterations, Some(residual)),
        Outcome::Boundary => return Ok(None),
    };
    // polish with tiny shares as primary unknowns
    let polished =
        layout
            .reconditioned(&z)
            .and_then(|(l, start)| match newton_from(eos, &l, start) {
                Ok(Outcome::Converged {
                    z: zp,
                    iterations: k,
                }) => Some((l, zp, k)),
                _ => None,
            });
    let layout = match &polished {
        Some((l, zp, k)) => {
            z = *zp;
            iterations += k;
            l
        }
        None => {
            if let Some(residual) = stalled {
                return Err(Error::NonConvergence {
                    iterations,
                    residual,
                });
            }
            layout
        }
    };
    let ev = layout.evaluate(eos, &z)?;
    let comp = layout.composition(&z);
    let y = layout.fractions(&z);
    let thermo = thermo_at(eos, layout, &z)?;
    let (pressure, temperature) = mixture::closure_of(&thermo, &y);
    let (entropy_hessian, degenerate) = equilibrium_hessian(layout, &ev, &z);
    let mut residuals = residuals_of(layout, &thermo);
    residuals.degenerate = degenerate;
    if residuals.temperature > TOL_EQ || residuals.dalton > TOL_EQ {
        return Err(Error::NonConvergence {
            iterations,
            residual: residuals.max(),
        });
    }
    Ok(Some(EquilibriumResult {
        tau,
        e,
        comp,
        y_eq: y,
        phi_l_eq: comp.phi_l,
        temperature,
        pressure,
        entropy: mixture::sigma_of(&thermo, &comp),
        regime,
        residuals,
        iterations,
        thermo,
        entropy_hessian,
    }))
}

fn check_state(tau: f64, e: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("tau must be positive, got {tau}")));
    }
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::domain(format!("e must be positive, got {e}")));
    }
    Ok(())
}

/// Maximizes `σ` over `(α_l, z_l, z_g)` at fixed mass fractions.
pub fn equilibrate_npt(
    eos: &EosTriple,
    tau: f64,
    e: f64,
    phi_l: f64,
    phi_g: f64,
) -> Result<EquilibriumResult> {
    check_state(tau, e)?;
    let comp = Composition::new(phi_l, phi_g)?;
    let layout = Layout::new(Some(comp.phi_l), comp.phi_g);
    solve(eos, &layout, tau, e, Regime::Interior)?.ok_or(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        residual: f64::NAN,
    })
}

/// Maximizes `σ` over `(φ_l, α_l, z_l, z_g)` at fixed gas fraction.
///
/// When the maximizer sits on a face of the constraint set (no vapor or no
/// liquid) the two face problems are solved and the one with the larger
/// entropy is returned.
pub fn equilibrate_pt(eos: &EosTriple, tau: f64, e: f64, phi_g: f64) -> Result<EquilibriumResult> {
    check_state(tau, e)?;
    if !(0.0..1.0).contains(&phi_g) {
        return Err(Error::domain(format!(
            "phi_g must lie in [0, 1), got {phi_g}"
        )));
    }
    let condensable = 1.0 - phi_g;
    if condensable < 2.0 * EPS_PHASE {
        let mut r = equilibrate_npt(eos, tau, e, 0.0, phi_g)?;
        r.regime = Regime::BoundaryNoLiquid;
        return Ok(r);
    }
    let interior_err = match solve(eos, &Layout::new(None, phi_g), tau, e, Regime::Interior) {
        Ok(Some(r)) => return Ok(r),
        Ok(None) => None,
        Err(err) => Some(err),
    };
    let faces = [
        (Some(condensable), Regime::BoundaryPureLiquid),
        (Some(0.0), Regime::BoundaryNoLiquid),
    ];
    let mut best: Option<EquilibriumResult> = None;
    let mut last_err = interior_err;
    for (phi_l, regime) in faces {
        match solve(eos, &Layout::new(phi_l, phi_g), tau, e, regime) {
            Ok(Some(r)) => {
                if best.as_ref().is_none_or(|b| r.entropy > b.entropy) {
                    best = Some(r);
                }
            }
            Ok(None) => {}
            Err(err) => last_err = Some(err),
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or(Error::NonConvergence {
            iterations: MAX_ITERATIONS,
            residual: f64::NAN,
        })
    })
}

/// Equilibrium `(p, T)` without phase transition.
pub fn equilibrium_pressure_npt(
    eos: &EosTriple,
    tau: f64,
    e: f64,
    phi_l: f64,
    phi_g: f64,
) -> Result<(f64, f64)> {
    let r = equilibrate_npt(eos, tau, e, phi_l, phi_g)?;
    Ok((r.pressure, r.temperature))
}

/// Equilibrium `(p, T)` with phase transition.
pub fn equilibrium_pressure_pt(
    eos: &EosTriple,
    tau: f64,
    e: f64,
    phi_g: f64,
) -> Result<(f64, f64)> {
    let r = equilibrate_pt(eos, tau, e, phi_g)?;
    Ok((r.pressure, r.temperature))
}

/// Constraint set searched by the grid oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleConstraints {
    Npt { phi_l: f64, phi_g: f64 },
    Pt { phi_g: f64 },
}

/// Best grid point: `(φ_l, α_l, z_l, z_g)` and its `σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePoint {
    pub phi_l: f64,
    pub y: FractionVector,
    pub sigma: f64,
}

/// Exhaustive search of `σ` over a uniform grid of the feasible set:
/// `(α_l, z_l, z_g)` in NPT, plus `φ_l ∈ [0, 1 − φ_g]` in PT.
/// Infeasible grid points are skipped. Returns `None` if no point is feasible.
pub fn oracle_grid_argmax(
    eos: &EosTriple,
    tau: f64,
    e: f64,
    constraints: OracleConstraints,
    resolution: usize,
) -> Option<OraclePoint> {
    let phi_range = match constraints {
        OracleConstraints::Npt { phi_l, .. } => (phi_l, phi_l),
        OracleConstraints::Pt { phi_g } => (0.0, 1.0 - phi_g),
    };
    oracle_grid_argmax_in(
        eos,
        tau,
        e,
        constraints,
        resolution,
        [phi_range, (0.0, 1.0), (0.0, 1.0), (0.0, 1.0)],
    )
}

/// Grid search restricted to a box `[(lo, hi); 4]` over `(φ_l, α_l, z_l, z_g)`;
/// the first range is ignored in NPT mode.
pub fn oracle_grid_argmax_in(
    eos: &EosTriple,
    tau: f64,
    e: f64,
    constraints: OracleConstraints,
    resolution: usize,
    bounds: [(f64, f64); 4],
) -> Option<OraclePoint> {
    assert!(resolution >= 1);
    let axis = |k: usize, i: usize| {
        let (lo, hi) = bounds[k];
        lo + (hi - lo) * i as f64 / resolution as f64
    };
    let (phi_g, phi_steps) = match constraints {
        OracleConstraints::Npt { phi_g, .. } => (phi_g, 0),
        OracleConstraints::Pt { phi_g } => (phi_g, resolution),
    };
    let mut best: Option<OraclePoint> = None;
    for ip in 0..=phi_steps {
        let phi_l = match constraints {
            OracleConstraints::Npt { phi_l, .. } => phi_l,
            OracleConstraints::Pt { .. } => axis(0, ip),
        };
        let Ok(comp) = Composition::new(phi_l, phi_g) else {
            continue;
        };
        for ia in 0..=resolution {
            let alpha_l = axis(1, ia);
            for il in 0..=resolution {
                let z_l = axis(2, il);
                for ig in 0..=resolution {
                    let z_g = axis(3, ig);
                    let y = FractionVector { alpha_l, z_l, z_g };
                    let m = MixtureInput { tau, e, comp, y };
                    if let Ok(s) = mixture::sigma(eos, &m) {
                        if best.is_none_or(|b| s > b.sigma) {
                            best = Some(OraclePoint { phi_l, y, sigma: s });
                        }
                    }
                }
            }
        }
    }
    best
}

/// Coarse-to-fine grid search: each level re-grids a box of four cells on
/// either side of the previous argmax, so the spacing halves per level once
/// `resolution ≥ 16`.
pub fn oracle_refined_argmax(
    eos: &EosTriple,
    tau: f64,
    e: f64,
    constraints: OracleConstraints,
    resolution: usize,
    levels: usize,
) -> Option<OraclePoint> {
    let phi_max = match constraints {
        OracleConstraints::Npt { phi_l, .. } => phi_l,
        OracleConstraints::Pt { phi_g } => 1.0 - phi_g,
    };
    let mut bounds = [(0.0, phi_max), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0)];
    if let OracleConstraints::Npt { phi_l, .. } = constraints {
        bounds[0] = (phi_l, phi_l);
    }
    let mut best = oracle_grid_argmax_in(eos, tau, e, constraints, resolution, bounds)?;
    for _ in 1..levels {
        let centre = [best.phi_l, best.y.alpha_l, best.y.z_l, best.y.z_g];
        let limits = [(0.0, phi_max), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0)];
        for k in 0..4 {
            let (lo, hi) = bounds[k];
            let h = (hi - lo) / resolution as f64;
            bounds[k] = (
                (centre[k] - 4.0 * h).max(limits[k].0),
                (centre[k] + 4.0 * h).min(limits[k].1),
            );
        }
        if let OracleConstraints::Npt { phi_l, .. } = constraints {
            bounds[0] = (phi_l, phi_l);
        }
        let next = oracle_grid_argmax_in(eos, tau, e, constraints, resolution, bounds)?;
        if next.sigma >= best.sigma {
            best = next;
        }
    }
    Some(best)
}
