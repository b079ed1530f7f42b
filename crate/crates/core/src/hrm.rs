//! Homogeneous relaxation Euler systems.
//!
//! The conservative vector is `(φ_lρ, φ_gρ, ρ, ρu, ρE, ρα_l, ρz_l, ρz_g)` in
//! both modes. In NPT mode the first two are transported only; in PT mode
//! `φ_l` belongs to the relaxed fraction vector `(φ_l, α_l, z_l, z_g)`.

use crate::equilibrium::{self, EquilibriumResult};
use crate::error::{Error, Result};
use crate::hem::Mode;
use crate::mixture::{
    self, Composition, EosTriple, FractionVector, MixtureInput, Phase, EPS_PHASE,
};

pub const NCOMP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrmState {
    pub m_l: f64,
    pub m_g: f64,
    pub rho: f64,
    pub mom: f64,
    pub etot: f64,
    pub rho_alpha_l: f64,
    pub rho_z_l: f64,
    pub rho_z_g: f64,
}

impl HrmState {
    pub fn from_primitive(rho: f64, u: f64, e: f64, comp: Composition, y: FractionVector) -> Self {
        HrmState {
            m_l: rho * comp.phi_l,
            m_g: rho * comp.phi_g,
            rho,
            mom: rho * u,
            etot: rho * (e + 0.5 * u * u),
            rho_alpha_l: rho * y.alpha_l,
            rho_z_l: rho * y.z_l,
            rho_z_g: rho * y.z_g,
        }
    }

    pub fn to_conservative(&self) -> [f64; NCOMP] {
        [
            self.m_l,
            self.m_g,
            self.rho,
            self.mom,
            self.etot,
            self.rho_alpha_l,
            self.rho_z_l,
            self.rho_z_g,
        ]
    }

    pub fn from_conservative(u: &[f64]) -> Self {
        HrmState {
            m_l: u[0],
            m_g: u[1],
            rho: u[2],
            mom: u[3],
            etot: u[4],
            rho_alpha_l: u[5],
            rho_z_l: u[6],
            rho_z_g: u[7],
        }
    }

    pub fn velocity(&self) -> f64 {
        self.mom / self.rho
    }

    pub fn internal_energy(&self) -> f64 {
        let u = self.velocity();
        self.etot / self.rho - 0.5 * u * u
    }

    /// Raw mass fractions; not validated.
    pub fn phi(&self) -> (f64, f64) {
        (self.m_l / self.rho, self.m_g / self.rho)
    }

    /// Raw fraction vector; not validated.
    pub fn fractions(&self) -> FractionVector {
        FractionVector {
            alpha_l: self.rho_alpha_l / self.rho,
            z_l: self.rho_z_l / self.rho,
            z_g: self.rho_z_g / self.rho,
        }
    }

    /// Validated mixture description of the cell.
    pub fn input(&self) -> Result<MixtureInput> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::domain(format!(
                "density must be positive, got {}",
                self.rho
            )));
        }
        let (phi_l, phi_g) = self.phi();
        let y = self.fractions();
        MixtureInput::new(
            1.0 / self.rho,
            self.internal_energy(),
            Composition::new(phi_l, phi_g)?,
            FractionVector::new(y.alpha_l, y.z_l, y.z_g)?,
        )
    }

    fn with_fractions(mut self, phi_l: f64, y: FractionVector) -> Self {
        self.m_l = self.rho * phi_l;
        self.rho_alpha_l = self.rho * y.alpha_l;
        self.rho_z_l = self.rho * y.z_l;
        self.rho_z_g = self.rho * y.z_g;
        self
    }
}

/// Physical flux with the out-of-equilibrium pressure, and `|u| + c_frozen`.
pub fn hrm_flux(eos: &EosTriple, st: &HrmState) -> Result<([f64; NCOMP], f64)> {
    let m = st.input()?;
    let th = mixture::evaluate(eos, &m)?;
    let (p, _) = mixture::closure_of(&th, &m.y);
    let c = mixture::frozen_sound_speed_of(&th, &m)?;
    let u = st.velocity();
    let mut f = st.to_conservative().map(|x| x * u);
    f[3] += p;
    f[4] += p * u;
    Ok((f, u.abs() + c))
}

/// Cell entropy density `ρσ`.
pub fn entropy_density(eos: &EosTriple, st: &HrmState) -> Result<f64> {
    Ok(st.rho * mixture::sigma(eos, &st.input()?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxKind {
    /// Instantaneous return to equilibrium.
    Projection,
    /// `λ(Y_eq − Y)`.
    Linear,
    /// `λ ∇σ` with `λ` a plain rate multiplier.
    Gradient,
}

impl RelaxKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelaxKind::Projection => "projection",
            RelaxKind::Linear => "linear",
            RelaxKind::Gradient => "gradient",
        }
    }
}

impl std::str::FromStr for RelaxKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projection" => Ok(RelaxKind::Projection),
            "linear" => Ok(RelaxKind::Linear),
            "gradient" => Ok(RelaxKind::Gradient),
            other => Err(Error::Config(format!("unknown relaxation kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationConfig {
    pub kind: RelaxKind,
    /// Rate `[1/s]` for the linear kind, multiplier for the gradient kind.
    /// Zero freezes the fractions.
    pub lambda: f64,
    /// Initial explicit sub-steps per time step (gradient kind).
    pub substeps: usize,
}

impl RelaxationConfig {
    pub fn projection() -> Self {
        RelaxationConfig {
            kind: RelaxKind::Projection,
            lambda: f64::INFINITY,
            substeps: 1,
        }
    }

    pub fn linear(lambda: f64) -> Self {
        RelaxationConfig {
            kind: RelaxKind::Linear,
            lambda,
            substeps: 1,
        }
    }

    pub fn gradient(lambda: f64, substeps: usize) -> Self {
        RelaxationConfig {
            kind: RelaxKind::Gradient,
            lambda,
            substeps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != RelaxKind::Projection && !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "relaxation rate must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidParameter(
                "substeps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Relaxed components: `(α_l, z_l, z_g)` in NPT, `(φ_l, α_l, z_l, z_g)` in PT.
fn relaxed(m: &MixtureInput, mode: Mode) -> Vec<f64> {
    let y = m.y;
    match mode {
        Mode::Npt => vec![y.alpha_l, y.z_l, y.z_g],
        Mode::Pt => vec![m.comp.phi_l, y.alpha_l, y.z_l, y.z_g],
    }
}

fn split(v: &[f64], mode: Mode, phi_l: f64) -> (f64, FractionVector) {
    let (phi_l, r) = match mode {
        Mode::Npt => (phi_l, v),
        Mode::Pt => (v[0], &v[1..]),
    };
    (
        phi_l,
        FractionVector {
            alpha_l: r[0],
            z_l: r[1],
            z_g: r[2],
        },
    )
}

/// Equilibrium at the cell's frozen `(τ, e, φ_g[, φ_l])`.
pub fn target(eos: &EosTriple, st: &HrmState, mode: Mode) -> Result<EquilibriumResult> {
    let m = st.input()?;
    match mode {
        Mode::Npt => equilibrium::equilibrate_npt(eos, m.tau, m.e, m.comp.phi_l, m.comp.phi_g),
        Mode::Pt => equilibrium::equilibrate_pt(eos, m.tau, m.e, m.comp.phi_g),
    }
}

fn target_vector(eq: &EquilibriumResult, mode: Mode) -> Vec<f64> {
    relaxed(&eq.input(), mode)
}

/// `∇σ` over the relaxed components, embedded so that implied fractions
/// of absent phases stay zero.
fn gradient(eos: &EosTriple, m: &MixtureInput, mode: Mode) -> Result<Vec<f64>> {
    let th = mixture::evaluate(eos, m)?;
    let g = mixture::grad_sigma_y_of(&th, m);
    let mut q = vec![g[0], g[1], g[2]];
    if mixture::energy_reference_phase(&m.comp) == Phase::Gas {
        q[2] = -q[1];
    }
    if mode == Mode::Pt {
        let g_phi = if th.phase(Phase::Liquid).is_some() && th.phase(Phase::Vapor).is_some() {
            mixture::grad_sigma_phi_l_of(&th)?
        } else {
            0.0
        };
        q.insert(0, g_phi);
    }
    Ok(q)
}

/// `dY/dt` for the relaxed components. For the projection kind this is the
/// jump `Y_eq − Y`.
pub fn relax_source(
    eos: &EosTriple,
    st: &HrmState,
    cfg: &RelaxationConfig,
    mode: Mode,
) -> Result<Vec<f64>> {
    let m = st.input()?;
    let y = relaxed(&m, mode);
    match cfg.kind {
        RelaxKind::Projection | RelaxKind::Linear => {
            let eq = target(eos, st, mode)?;
            let rate = if cfg.kind == RelaxKind::Linear {
                cfg.lambda
            } else {
                1.0
            };
            Ok(target_vector(&eq, mode)
                .iter()
                .zip(&y)
                .map(|(a, b)| rate * (a - b))
                .collect())
        }
        RelaxKind::Gradient => Ok(gradient(eos, &m, mode)?
            .iter()
            .map(|q| cfg.lambda * q)
            .collect()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOutcome {
    pub state: HrmState,
    pub sigma_before: f64,
    pub sigma_after: f64,
    pub clips: usize,
    pub substeps: usize,
}

/// Tolerated entropy decrease, relative to `max(1, |σ|)`.
pub const SIGMA_TOL: f64 = 1e-12;
const MAX_HALVINGS: usize = 30;

/// Integrates `dY/dt = Q` over `dt` at frozen `(ρ, u, E)` and transported mass fractions.
pub fn relax_step(
    eos: &EosTriple,
    st: &HrmState,
    dt: f64,
    cfg: &RelaxationConfig,
    mode: Mode,
) -> Result<RelaxOutcome> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt must be non-negative, got {dt}"
        )));
    }
    let (st, mut clips) = sanitize(st, mode);
    let m = st.input()?;
    let sigma_before = mixture::sigma(eos, &m)?;
    let tol = SIGMA_TOL * sigma_before.abs().max(1.0);
    let y0 = relaxed(&m, mode);
    let mut substeps = 1;

    let next = match cfg.kind {
        _ if dt == 0.0 => st,
        RelaxKind::Linear if cfg.lambda == 0.0 => st,
        RelaxKind::Projection => {
            let eq = target(eos, &st, mode)?;
            st.with_fractions(eq.phi_l_eq, eq.y_eq)
        }
        RelaxKind::Linear => {
            let eq = target(eos, &st, mode)?;
            let w = (-cfg.lambda * dt).exp();
            let v: Vec<f64> = target_vector(&eq, mode)
                .iter()
                .zip(&y0)
                .map(|(a, b)| a + (b - a) * w)
                .collect();
            let (phi_l, y) = split(&v, mode, m.comp.phi_l);
            st.with_fractions(phi_l, y)
        }
        RelaxKind::Gradient => {
            let (state, n, c) = gradient_flow(eos, st, dt, cfg, mode, sigma_before)?;
            substeps = n;
            clips += c;
            state
        }
    };
    let (state, c) = sanitize(&next, mode);
    clips += c;
    let sigma_after = mixture::sigma(eos, &state.input()?)?;
    if sigma_after < sigma_before - tol {
        return Err(Error::StepRejected {
            decrease: sigma_before - sigma_after,
        });
    }
    Ok(RelaxOutcome {
        state,
        sigma_before,
        sigma_after,
        clips,
        substeps,
    })
}

/// Explicit Euler on `λ∇σ`, halving the sub-step whenever it leaves the
/// domain or loses entropy.
fn gradient_flow(
    eos: &EosTriple,
    mut st: HrmState,
    dt: f64,
    cfg: &RelaxationConfig,
    mode: Mode,
    mut sigma: f64,
) -> Result<(HrmState, usize, usize)> {
    let mut h = dt / cfg.substeps as f64;
    let mut t = 0.0;
    let mut count = 0;
    let mut clips = 0;
    while t < dt * (1.0 - 1e-14) {
        h = h.min(dt - t);
        let m = st.input()?;
        let q = gradient(eos, &m, mode)?;
        let y = relaxed(&m, mode);
        let tol = SIGMA_TOL * sigma.abs().max(1.0);
        let mut halvings = 0;
        let mut worst = 0.0f64;
        loop {
            let v: Vec<f64> = y
                .iter()
                .zip(&q)
                .map(|(a, b)| a + h * cfg.lambda * b)
                .collect();
            let (phi_l, fr) = split(&v, mode, m.comp.phi_l);
            let (trial, c) = sanitize(&st.with_fractions(phi_l, fr), mode);
            let s = trial.input().and_then(|mi| mixture::sigma(eos, &mi));
            match s {
                Ok(s) if s >= sigma - tol => {
                    st = trial;
                    sigma = s;
                    clips += c;
                    break;
                }
                Ok(s) => worst = worst.max(sigma - s),
                Err(_) => {}
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::StepRejected { decrease: worst });
            }
            h *= 0.5;
        }
        t += h;
        count += 1;
    }
    Ok((st, count, clips))
}

/// Projects fractions onto the admissible set: present-phase fractions in
/// `[ε, 1 − ε]`, absent-phase fractions zero, energy fractions summing to 1.
/// In PT mode `φ_l` snaps to a face when within `ε` of it. Returns the
/// number of clamped values.
pub fn sanitize(st: &HrmState, mode: Mode) -> (HrmState, usize) {
    let mut clips = 0;
    let mut clamp = |x: f64, lo: f64, hi: f64| {
        if x < lo {
            clips += 1;
            lo
        } else if x > hi {
            clips += 1;
            hi
        } else {
            x
        }
    };
    let (raw_l, raw_g) = st.phi();
    let phi_g = clamp(raw_g, 0.0, 1.0);
    let mut phi_l = clamp(raw_l, 0.0, 1.0 - phi_g);
    if mode == Mode::Pt {
        if phi_l < EPS_PHASE {
            phi_l = 0.0;
        } else if 1.0 - phi_g - phi_l < EPS_PHASE {
            phi_l = 1.0 - phi_g;
        }
    }
    let comp = Composition {
        phi_l,
        phi_g,
        phi_v: (1.0 - phi_l - phi_g).max(0.0),
    };
    let present = Phase::ALL.map(|k| comp.is_present(k));
    let raw = st.fractions();

    let alpha_l = match (present[0], present[1] || present[2]) {
        (false, _) => 0.0,
        (true, false) => 1.0,
        (true, true) => clamp(raw.alpha_l, EPS_PHASE, 1.0 - EPS_PHASE),
    };
    let z_raw = [raw.z_l, raw.z_g, 1.0 - raw.z_l - raw.z_g];
    let mut z = [0.0; 3];
    for k in 0..3 {
        if present[k] {
            z[k] = clamp(z_raw[k], EPS_PHASE, 1.0);
        }
    }
    let total: f64 = z.iter().sum();
    let y = FractionVector {
        alpha_l,
        z_l: z[0] / total,
        z_g: z[1] / total,
    };
    let mut out = *st;
    out.m_g = st.rho * phi_g;
    out = out.with_fractions(phi_l, y);
    if mode == Mode::Npt && raw_l == phi_l {
        out.m_l = st.m_l;
    }
    if raw_g == phi_g {
        out.m_g = st.m_g;
    }
    (out, clips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::EosParams;
    use crate::hem::{self, HemState};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const THIRD: f64 = 1.0 / 3.0;

    fn identical() -> EosTriple {
        EosTriple::uniform(EosParams::ideal_gas(1.0, 2.0, 0.0).unwrap())
    }

    fn mixed() -> EosTriple {
        let gas = EosParams::ideal_gas(1.0, 1.4, 0.0).unwrap();
        EosTriple::new(
            EosParams::stiffened_gas(1.0, 2.0, 1.0, 0.0, 0.0).unwrap(),
            gas,
            gas.with_s_ref(-1.0),
        )
    }

    fn state(rho: f64, u: f64, e: f64, phi: (f64, f64), y: [f64; 3]) -> HrmState {
        HrmState::from_primitive(
            rho,
            u,
            e,
            Composition::new(phi.0, phi.1).unwrap(),
            FractionVector::new(y[0], y[1], y[2]).unwrap(),
        )
    }

    fn equilibrium_state(
        eos: &EosTriple,
        rho: f64,
        u: f64,
        e: f64,
        phi: (f64, f64),
        mode: Mode,
    ) -> HrmState {
        let eq = match mode {
            Mode::Npt => equilibrium::equilibrate_npt(eos, 1.0 / rho, e, phi.0, phi.1),
            Mode::Pt => equilibrium::equilibrate_pt(eos, 1.0 / rho, e, phi.1),
        }
        .unwrap();
        HrmState::from_primitive(rho, u, e, eq.comp, eq.y_eq)
    }

    #[test]
    fn flux_matches_hem_at_equilibrium() {
        let eos = mixed();
        for mode in [Mode::Npt, Mode::Pt] {
            let st = equilibrium_state(&eos, 1.0, 0.6, 2.0, (0.5, 0.2), mode);
            let (f, _) = hrm_flux(&eos, &st).unwrap();
            let h = HemState {
                rho: st.rho,
                mom: st.mom,
                etot: st.etot,
                m_l: st.m_l,
                m_g: st.m_g,
            };
            let fh = hem::hem_flux(&eos, &h, mode).unwrap();
            let (shared, hem_shared) = match mode {
                Mode::Npt => (&f[..5], &fh[..]),
                Mode::Pt => (&f[1..5], &fh[..]),
            };
            for (a, b) in shared.iter().zip(hem_shared) {
                assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn rest_state_fraction_fluxes_vanish() {
        let st = state(1.0, 0.0, 1.0, (0.4, 0.3), [0.5, 0.3, 0.3]);
        let (f, speed) = hrm_flux(&identical(), &st).unwrap();
        assert_eq!([f[0], f[1], f[2], f[4], f[5], f[6], f[7]], [0.0; 7]);
        assert!(speed > 0.0);
    }

    #[test]
    fn pressure_uniform_across_fraction_changes() {
        // identical ideal gases: p = (γ − 1)ρe whatever the split, once T is uniform
        let eos = identical();
        let base = equilibrium_state(&eos, 1.0, 0.0, 1.0, (THIRD, THIRD), Mode::Npt);
        let p0 = hrm_flux(&eos, &base).unwrap().0[3];
        for phi in [(0.1, 0.6), (0.7, 0.1), (0.2, 0.2)] {
            let st = equilibrium_state(&eos, 1.0, 0.0, 1.0, phi, Mode::Npt);
            assert_relative_eq!(hrm_flux(&eos, &st).unwrap().0[3], p0, max_relative = 1e-12);
        }
    }

    #[test]
    fn sources_vanish_at_equilibrium() {
        let eos = mixed();
        for mode in [Mode::Npt, Mode::Pt] {
            let st = equilibrium_state(&eos, 1.0, 0.0, 2.0, (0.5, 0.2), mode);
            for cfg in [
                RelaxationConfig::projection(),
                RelaxationConfig::linear(3.0),
                RelaxationConfig::gradient(1.0, 1),
            ] {
                let q = relax_source(&eos, &st, &cfg, mode).unwrap();
                assert!(q.iter().all(|x| x.abs() < 1e-8), "{mode:?} {cfg:?} {q:?}");
            }
        }
    }

    #[test]
    fn linear_source_is_minus_perturbation() {
        let eos = identical();
        let d = [0.01, -0.02, 0.005];
        let st = state(
            1.0,
            0.0,
            1.0,
            (THIRD, THIRD),
            [THIRD + d[0], THIRD + d[1], THIRD + d[2]],
        );
        let q = relax_source(&eos, &st, &RelaxationConfig::linear(1.0), Mode::Npt).unwrap();
        for (a, b) in q.iter().zip(d) {
            assert_relative_eq!(*a, -b, max_relative = 1e-9);
        }
    }

    #[test]
    fn gradient_source_is_entropy_gradient() {
        let eos = mixed();
        let st = state(1.0, 0.0, 2.0, (0.5, 0.2), [0.4, 0.5, 0.2]);
        let m = st.input().unwrap();
        let q = relax_source(&eos, &st, &RelaxationConfig::gradient(1.0, 1), Mode::Pt).unwrap();
        assert_eq!(q[0], mixture::grad_sigma_phi_l(&eos, &m).unwrap());
        assert_eq!(q[1..], mixture::grad_sigma_y(&eos, &m).unwrap());
    }

    #[test]
    fn projection_reaches_equilibrium() {
        let eos = mixed();
        let st = state(1.0, 0.2, 2.0, (0.3, 0.2), [0.4, 0.5, 0.2]);
        let out = relax_step(&eos, &st, 0.1, &RelaxationConfig::projection(), Mode::Pt).unwrap();
        let eq = equilibrium::equilibrate_pt(&eos, 1.0, 2.0, 0.2).unwrap();
        assert_relative_eq!(out.sigma_after, eq.entropy, max_relative = 1e-12);
        assert!(out.sigma_after > out.sigma_before);
        assert_relative_eq!(out.state.m_l, eq.phi_l_eq, max_relative = 1e-12);
        assert_eq!(out.state.mom, st.mom);
        assert_eq!(out.state.etot, st.etot);
        assert_eq!(out.state.m_g, st.m_g);
    }

    #[test]
    fn linear_matches_exponential_decay() {
        let eos = identical();
        let y0 = [0.5, 0.2, 0.45];
        let st = state(1.0, 0.0, 1.0, (THIRD, THIRD), y0);
        let (lambda, dt) = (2.0, 0.3);
        let out = relax_step(&eos, &st, dt, &RelaxationConfig::linear(lambda), Mode::Npt).unwrap();
        let y = out.state.fractions();
        let w = (-lambda * dt).exp();
        for (got, start) in [y.alpha_l, y.z_l, y.z_g].iter().zip(y0) {
            assert!((got - (THIRD + (start - THIRD) * w)).abs() <= 1e-8);
        }
        assert!(out.sigma_after >= out.sigma_before);
    }

    #[test]
    fn gradient_flow_increases_entropy() {
        let eos = mixed();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tried = 0;
        for mode in [Mode::Npt, Mode::Pt] {
            for _ in 0..50 {
                let y = [
                    rng.random_range(0.2..0.8),
                    rng.random_range(0.2..0.5),
                    rng.random_range(0.1..0.4),
                ];
                let st = state(1.0, 0.0, 2.0, (rng.random_range(0.3..0.6), 0.2), y);
                if st.input().and_then(|m| mixture::sigma(&eos, &m)).is_err() {
                    continue;
                }
                tried += 1;
                let out =
                    relax_step(&eos, &st, 0.05, &RelaxationConfig::gradient(1.0, 4), mode).unwrap();
                assert!(out.sigma_after > out.sigma_before);
            }
        }
        assert!(tried > 50);
    }

    #[test]
    fn gradient_rate_matches_squared_norm() {
        let eos = mixed();
        let st = state(1.0, 0.0, 2.0, (0.5, 0.2), [0.4, 0.5, 0.2]);
        for mode in [Mode::Npt, Mode::Pt] {
            let cfg = RelaxationConfig::gradient(1.0, 1);
            let q = relax_source(&eos, &st, &cfg, mode).unwrap();
            let norm2: f64 = q.iter().map(|x| x * x).sum();
            let dt = 1e-6;
            let out = relax_step(&eos, &st, dt, &cfg, mode).unwrap();
            let rate = (out.sigma_after - out.sigma_before) / dt;
            assert_relative_eq!(rate, norm2, max_relative = 0.05);
        }
    }

    #[test]
    fn sanitize_clips_and_renormalizes() {
        let mut st = state(2.0, 0.0, 1.0, (0.5, 0.2), [0.5, 0.3, 0.3]);
        st.rho_z_l = 2.0 * 0.8;
        st.rho_z_g = 2.0 * 0.3;
        let (out, clips) = sanitize(&st, Mode::Npt);
        assert_eq!(clips, 1);
        let y = out.fractions();
        assert!(y.z_v() >= 0.0 && (y.z_l + y.z_g + y.z_v() - 1.0).abs() < 1e-15);
        assert!(out.input().is_ok());

        let clean = state(2.0, 0.0, 1.0, (0.5, 0.2), [0.5, 0.3, 0.3]);
        assert_eq!(sanitize(&clean, Mode::Npt), (clean, 0));
    }

    #[test]
    fn pt_sanitize_snaps_to_faces() {
        let st = state(1.0, 0.0, 1.0, (0.8 - 1e-12, 0.2), [0.9, 0.7, 0.3 - 1e-12]);
        let (out, _) = sanitize(&st, Mode::Pt);
        let m = out.input().unwrap();
        assert_eq!(m.comp.phi_v, 0.0);
        assert_eq!(m.y.z_v(), 0.0);
    }
}
