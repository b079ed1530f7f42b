//! Out-of-equilibrium liquid/gas/vapor mixture.
//!
//! The liquid is immiscible with the two gaseous phases, which share one
//! volume: `α_l + α_v = 1`, `α_g = α_v`. Mass and energy fractions sum to
//! one. Only the reduced vector `(α_l, z_l, z_g)` is stored; `α_v` and `z_v`
//! are derived.
//!
//! A phase whose mass fraction is below [`EPS_PHASE`] is absent: it carries
//! no energy, contributes nothing to the mixture entropy and is skipped by
//! every closure. An absent liquid also carries no volume. The vapor and the
//! gas cannot both be absent while the liquid leaves volume free.

use crate::eos::{EosParams, PhaseState, PhaseThermo};
use crate::error::{Error, Result};

/// Mass fraction below which a phase is treated as absent.
pub const EPS_PHASE: f64 = 1e-10;

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Liquid,
    Gas,
    Vapor,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Liquid, Phase::Gas, Phase::Vapor];

    pub fn index(self) -> usize {
        match self {
            Phase::Liquid => 0,
            Phase::Gas => 1,
            Phase::Vapor => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Liquid => "liquid",
            Phase::Gas => "gas",
            Phase::Vapor => "vapor",
        }
    }
}

/// Equations of state of the liquid, the gas and the vapor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EosTriple {
    pub liquid: EosParams,
    pub gas: EosParams,
    pub vapor: EosParams,
}

impl EosTriple {
    pub fn new(liquid: EosParams, gas: EosParams, vapor: EosParams) -> Self {
        EosTriple { liquid, gas, vapor }
    }

    /// All three phases share one equation of state.
    pub fn uniform(eos: EosParams) -> Self {
        EosTriple::new(eos, eos, eos)
    }

    pub fn get(&self, phase: Phase) -> &EosParams {
        match phase {
            Phase::Liquid => &self.liquid,
            Phase::Gas => &self.gas,
            Phase::Vapor => &self.vapor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composition {
    pub phi_l: f64,
    pub phi_g: f64,
    pub phi_v: f64,
}

impl Composition {
    /// Builds the composition from the liquid and gas fractions; the vapor takes the rest.
    pub fn new(phi_l: f64, phi_g: f64) -> Result<Self> {
        let phi_v = 1.0 - phi_l - phi_g;
        let c = Composition {
            phi_l,
            phi_g,
            phi_v: if phi_v.abs() < SUM_TOL { 0.0 } else { phi_v },
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("phi_l", self.phi_l),
            ("phi_g", self.phi_g),
            ("phi_v", self.phi_v),
        ] {
            if !(-SUM_TOL..=1.0 + SUM_TOL).contains(&v) {
                return Err(Error::domain(format!(
                    "mass fraction {name} = {v} outside [0, 1]"
                )));
            }
        }
        let sum = self.phi_l + self.phi_g + self.phi_v;
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::domain(format!("mass fractions sum to {sum}")));
        }
        Ok(())
    }

    pub fn get(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Liquid => self.phi_l,
            Phase::Gas => self.phi_g,
            Phase::Vapor => self.phi_v,
        }
    }

    pub fn is_present(&self, phase: Phase) -> bool {
        self.get(phase) >= EPS_PHASE
    }
}

/// Reduced fraction vector `Y = (α_l, z_l, z_g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionVector {
    pub alpha_l: f64,
    pub z_l: f64,
    pub z_g: f64,
}

impl FractionVector {
    pub fn new(alpha_l: f64, z_l: f64, z_g: f64) -> Result<Self> {
        let y = FractionVector { alpha_l, z_l, z_g };
        y.validate()?;
        Ok(y)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha_l) {
            return Err(Error::domain(format!(
                "alpha_l = {} outside [0, 1]",
                self.alpha_l
            )));
        }
        if !(self.z_l >= 0.0 && self.z_g >= 0.0) {
            return Err(Error::domain(format!(
                "negative energy fraction ({}, {})",
                self.z_l, self.z_g
            )));
        }
        if self.z_l + self.z_g > 1.0 + SUM_TOL {
            return Err(Error::domain(format!(
                "z_l + z_g = {} exceeds 1",
                self.z_l + self.z_g
            )));
        }
        Ok(())
    }

    pub fn alpha_v(&self) -> f64 {
        1.0 - self.alpha_l
    }

    pub fn alpha(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Liquid => self.alpha_l,
            Phase::Gas | Phase::Vapor => 1.0 - self.alpha_l,
        }
    }

    pub fn z_v(&self) -> f64 {
        let z = 1.0 - self.z_l - self.z_g;
        if z.abs() < SUM_TOL {
            0.0
        } else {
            z
        }
    }

    pub fn z(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Liquid => self.z_l,
            Phase::Gas => self.z_g,
            Phase::Vapor => self.z_v(),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha_l, self.z_l, self.z_g]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureInput {
    pub tau: f64,
    pub e: f64,
    pub comp: Composition,
    pub y: FractionVector,
}

impl MixtureInput {
    pub fn new(tau: f64, e: f64, comp: Composition, y: FractionVector) -> Result<Self> {
        let m = MixtureInput { tau, e, comp, y };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::domain(format!(
                "mixture specific volume must be positive, got {}",
                self.tau
            )));
        }
        if !(self.e > 0.0) || !self.e.is_finite() {
            return Err(Error::domain(format!(
                "mixture internal energy must be positive, got {}",
                self.e
            )));
        }
        self.comp.validate()?;
        self.y.validate()
    }
}

/// Per-phase evaluation of a mixture state; `None` marks an absent phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureThermo {
    pub states: [Option<PhaseState>; 3],
    pub phases: [Option<PhaseThermo>; 3],
}

impl MixtureThermo {
    pub fn phase(&self, phase: Phase) -> Option<&PhaseThermo> {
        self.phases[phase.index()].as_ref()
    }

    fn require(&self, phase: Phase) -> Result<&PhaseThermo> {
        self.phase(phase).ok_or(Error::AbsentPhase(phase.name()))
    }
}

/// Per-phase specific volumes `τ_k = α_k τ / φ_k` and energies `e_k = z_k e / φ_k`.
pub fn phase_states(eos: &EosTriple, m: &MixtureInput) -> Result<[Option<PhaseState>; 3]> {
    m.validate()?;
    let mut out = [None; 3];
    let gaseous_present = m.comp.is_present(Phase::Gas) || m.comp.is_present(Phase::Vapor);
    if !gaseous_present && m.y.alpha_v() > EPS_PHASE {
        return Err(Error::AbsentPhase(
            "gas and vapor (free volume left by the liquid)",
        ));
    }
    for phase in Phase::ALL {
        let phi = m.comp.get(phase);
        let z = m.y.z(phase);
        if phi < EPS_PHASE {
            if z > EPS_PHASE || (phase == Phase::Liquid && m.y.alpha_l > EPS_PHASE) {
                return Err(Error::AbsentPhase(phase.name()));
            }
            continue;
        }
        let st = PhaseState::new(m.y.alpha(phase) * m.tau / phi, z * m.e / phi);
        eos.get(phase)
            .check(st)
            .map_err(|err| Error::domain(format!("{} phase: {err}", phase.name())))?;
        out[phase.index()] = Some(st);
    }
    Ok(out)
}

pub fn evaluate(eos: &EosTriple, m: &MixtureInput) -> Result<MixtureThermo> {
    let states = phase_states(eos, m)?;
    let mut phases = [None; 3];
    for phase in Phase::ALL {
        if let Some(st) = states[phase.index()] {
            phases[phase.index()] = Some(eos.get(phase).evaluate(st)?);
        }
    }
    Ok(MixtureThermo { states, phases })
}

/// Mixture entropy `σ = Σ_k φ_k s_k(τ_k, e_k)`.
pub fn sigma(eos: &EosTriple, m: &MixtureInput) -> Result<f64> {
    let th = evaluate(eos, m)?;
    Ok(sigma_of(&th, &m.comp))
}

pub(crate) fn sigma_of(th: &MixtureThermo, comp: &Composition) -> f64 {
    Phase::ALL
        .iter()
        .filter_map(|&k| th.phase(k).map(|p| comp.get(k) * p.s))
        .sum()
}

/// The phase whose energy fraction closes `Σ z_k = 1`: the vapor when present,
/// otherwise the gas, otherwise the liquid.
pub fn energy_reference_phase(comp: &Composition) -> Phase {
    if comp.is_present(Phase::Vapor) {
        Phase::Vapor
    } else if comp.is_present(Phase::Gas) {
        Phase::Gas
    } else {
        Phase::Liquid
    }
}

/// Gradient of `σ` in `(α_l, z_l, z_g)`:
/// `τ(p_l/T_l − p_g/T_g − p_v/T_v)`, `e(1/T_l − 1/T_v)`, `e(1/T_g − 1/T_v)`.
///
/// When a phase is absent only the free fractions of the reduced problem get
/// a derivative: components of fixed fractions are zero, and the energy
/// reference phase takes the vapor's role.
pub fn grad_sigma_y(eos: &EosTriple, m: &MixtureInput) -> Result<[f64; 3]> {
    let th = evaluate(eos, m)?;
    Ok(grad_sigma_y_of(&th, m))
}

pub(crate) fn grad_sigma_y_of(th: &MixtureThermo, m: &MixtureInput) -> [f64; 3] {
    let reference = energy_reference_phase(&m.comp);
    let inv_t_ref = th
        .phase(reference)
        .map(|p| 1.0 / p.temperature)
        .unwrap_or(0.0);
    let mut g = [0.0; 3];
    if let Some(l) = th.phase(Phase::Liquid) {
        let gaseous: f64 = [Phase::Gas, Phase::Vapor]
            .iter()
            .filter_map(|&k| th.phase(k).map(|p| p.pressure / p.temperature))
            .sum();
        let has_gaseous = th.phase(Phase::Gas).is_some() || th.phase(Phase::Vapor).is_some();
        if has_gaseous {
            g[0] = m.tau * (l.pressure / l.temperature - gaseous);
        }
        if reference != Phase::Liquid {
            g[1] = m.e * (1.0 / l.temperature - inv_t_ref);
        }
    }
    if let Some(gas) = th.phase(Phase::Gas) {
        if reference == Phase::Vapor {
            g[2] = m.e * (1.0 / gas.temperature - inv_t_ref);
        }
    }
    g
}

/// `∂σ/∂φ_l = −μ_l/T_l + μ_v/T_v` at fixed `φ_g` and fixed `Y`, the vapor
/// fraction compensating. Both liquid and vapor must be present.
pub fn grad_sigma_phi_l(eos: &EosTriple, m: &MixtureInput) -> Result<f64> {
    let th = evaluate(eos, m)?;
    grad_sigma_phi_l_of(&th)
}

pub(crate) fn grad_sigma_phi_l_of(th: &MixtureThermo) -> Result<f64> {
    let l = th.require(Phase::Liquid)?;
    let v = th.require(Phase::Vapor)?;
    Ok(-l.chemical_potential / l.temperature + v.chemical_potential / v.temperature)
}

/// `(∂_τ σ, ∂_e σ)` at fixed fractions.
pub(crate) fn grad_sigma_state_of(th: &MixtureThermo, y: &FractionVector) -> [f64; 2] {
    let mut d_tau = 0.0;
    let mut d_e = 0.0;
    for k in Phase::ALL {
        if let Some(p) = th.phase(k) {
            d_tau += y.alpha(k) * p.pressure / p.temperature;
            d_e += y.z(k) / p.temperature;
        }
    }
    [d_tau, d_e]
}

/// Out-of-equilibrium closure `T = 1/∂_e σ`, `p = T ∂_τ σ`, the unique
/// pressure for which `∂_τ σ − p ∂_e σ = 0`. Returns `(p, T)`.
pub fn pressure_out_of_equilibrium(eos: &EosTriple, m: &MixtureInput) -> Result<(f64, f64)> {
    let th = evaluate(eos, m)?;
    Ok(closure_of(&th, &m.y))
}

pub(crate) fn closure_of(th: &MixtureThermo, y: &FractionVector) -> (f64, f64) {
    let [d_tau, d_e] = grad_sigma_state_of(th, y);
    let t = 1.0 / d_e;
    (t * d_tau, t)
}

/// Hessian of `σ` in `(τ, e)` at fixed fractions:
/// `σ_ττ = Σ α_k²/φ_k s_k,ττ`, `σ_τe = Σ α_k z_k/φ_k s_k,τe`, `σ_ee = Σ z_k²/φ_k s_k,ee`.
pub(crate) fn hess_sigma_state_of(th: &MixtureThermo, m: &MixtureInput) -> [[f64; 2]; 2] {
    let mut h = [[0.0; 2]; 2];
    for k in Phase::ALL {
        if let Some(p) = th.phase(k) {
            let phi = m.comp.get(k);
            let a = m.y.alpha(k);
            let z = m.y.z(k);
            h[0][0] += a * a / phi * p.hess[0][0];
            h[0][1] += a * z / phi * p.hess[0][1];
            h[1][1] += z * z / phi * p.hess[1][1];
        }
    }
    h[1][0] = h[0][1];
    h
}

/// Squared sound speed of a system whose entropy has Hessian `h` in `(τ, e)`:
/// `c² = −T τ² (p² s_ee − 2 p s_τe + s_ττ)`.
pub fn sound_speed_squared_from_hessian(tau: f64, p: f64, t: f64, h: [[f64; 2]; 2]) -> f64 {
    -t * tau * tau * (p * p * h[1][1] - 2.0 * p * h[0][1] + h[0][0])
}

/// Sound speed of the mixture with all fractions frozen.
pub fn frozen_sound_speed(eos: &EosTriple, m: &MixtureInput) -> Result<f64> {
    let th = evaluate(eos, m)?;
    frozen_sound_speed_of(&th, m)
}

pub(crate) fn frozen_sound_speed_of(th: &MixtureThermo, m: &MixtureInput) -> Result<f64> {
    let (p, t) = closure_of(th, &m.y);
    let c2 = sound_speed_squared_from_hessian(m.tau, p, t, hess_sigma_state_of(th, m));
    if !(c2 > 0.0) || !c2.is_finite() {
        return Err(Error::NonHyperbolic { c2 });
    }
    Ok(c2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const THIRD: f64 = 1.0 / 3.0;

    fn identical() -> EosTriple {
        EosTriple::uniform(EosParams::ideal_gas(1.0, 2.0, 0.0).unwrap())
    }

    fn input(tau: f64, e: f64, phi_l: f64, phi_g: f64, y: [f64; 3]) -> MixtureInput {
        MixtureInput::new(
            tau,
            e,
            Composition::new(phi_l, phi_g).unwrap(),
            FractionVector::new(y[0], y[1], y[2]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn phase_states_arithmetic() {
        let eos = identical();
        let st = phase_states(&eos, &input(1.0, 1.0, THIRD, THIRD, [THIRD, THIRD, THIRD])).unwrap();
        let [l, g, v] = st.map(Option::unwrap);
        assert_relative_eq!(l.tau, 1.0, max_relative = 1e-15);
        assert_relative_eq!(g.tau, 2.0, max_relative = 1e-15);
        assert_relative_eq!(v.tau, 2.0, max_relative = 1e-15);
        for s in [l, g, v] {
            assert_relative_eq!(s.e, 1.0, max_relative = 1e-14);
        }

        let st = phase_states(
            &eos,
            &input(1.0, 1.0, 0.5, 0.25, [0.5, 2.0 / 3.0, 1.0 / 6.0]),
        )
        .unwrap();
        let [l, g, v] = st.map(Option::unwrap);
        assert_relative_eq!(l.tau, 1.0);
        assert_relative_eq!(g.tau, 2.0);
        assert_relative_eq!(v.tau, 2.0);
        assert_relative_eq!(l.e, 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(g.e, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(v.e, 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn absent_phase_guard() {
        let eos = identical();
        let m = input(1.0, 1.0, 0.5, 0.0, [0.5, 0.5, 0.2]);
        assert_eq!(phase_states(&eos, &m), Err(Error::AbsentPhase("gas")));
        // absent gas without energy is fine
        let m = input(1.0, 1.0, 0.5, 0.0, [0.5, 0.5, 0.0]);
        let st = phase_states(&eos, &m).unwrap();
        assert!(st[1].is_none());
        // absent liquid may not hold volume
        let m = input(1.0, 1.0, 0.0, 0.5, [0.3, 0.0, 0.5]);
        assert_eq!(phase_states(&eos, &m), Err(Error::AbsentPhase("liquid")));
        assert!(grad_sigma_phi_l(&eos, &input(1.0, 1.0, 0.0, 0.5, [0.0, 0.0, 0.5])).is_err());
    }

    #[test]
    fn sigma_reference_value() {
        let s = sigma(
            &identical(),
            &input(1.0, 1.0, THIRD, THIRD, [THIRD, THIRD, THIRD]),
        )
        .unwrap();
        assert_relative_eq!(s, 2.0 / 3.0 * 2f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn sigma_single_phase_limit() {
        let eos = EosTriple::new(
            EosParams::stiffened_gas(1.5, 2.5, 0.3, 0.0, 0.2).unwrap(),
            EosParams::ideal_gas(1.0, 1.4, 0.0).unwrap(),
            EosParams::ideal_gas(1.2, 1.3, 0.0).unwrap(),
        );
        let (tau, e) = (0.8, 2.0);
        let pure = eos.liquid.entropy(PhaseState::new(tau, e)).unwrap();
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
            let m = input(
                tau,
                e,
                1.0 - 2.0 * eps,
                eps,
                [1.0 - 2.0 * eps, 1.0 - 2.0 * eps, eps],
            );
            let diff = (sigma(&eos, &m).unwrap() - pure).abs();
            assert!(diff < last);
            last = diff;
        }
        assert!(last < 1e-5);
    }

    #[test]
    fn closure_at_equilibrium() {
        let eos = identical();
        let m = input(1.0, 1.0, THIRD, THIRD, [THIRD, THIRD, THIRD]);
        let (p, t) = pressure_out_of_equilibrium(&eos, &m).unwrap();
        assert_relative_eq!(p, 1.0, max_relative = 1e-14);
        assert_relative_eq!(t, 1.0, max_relative = 1e-14);
        let g = grad_sigma_y(&eos, &m).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn gradient_signs() {
        let eos = identical();
        // liquid hotter than vapor
        let m = input(1.0, 1.0, THIRD, THIRD, [THIRD, 0.45, 0.25]);
        let th = evaluate(&eos, &m).unwrap();
        assert!(
            th.phase(Phase::Liquid).unwrap().temperature
                > th.phase(Phase::Vapor).unwrap().temperature
        );
        assert!(grad_sigma_y(&eos, &m).unwrap()[1] < 0.0);

        // same temperature, liquid more compressed: larger chemical potential
        let tri = EosTriple::uniform(EosParams::ideal_gas(1.0, 1.4, 0.0).unwrap());
        let m = input(1.0, 1.0, 0.5, 0.0, [0.2, 0.5, 0.0]);
        let th = evaluate(&tri, &m).unwrap();
        let (l, v) = (
            th.phase(Phase::Liquid).unwrap(),
            th.phase(Phase::Vapor).unwrap(),
        );
        assert_relative_eq!(l.temperature, v.temperature, max_relative = 1e-14);
        assert!(l.chemical_potential > v.chemical_potential);
        assert!(grad_sigma_phi_l(&tri, &m).unwrap() < 0.0);
    }

    fn random_eos(rng: &mut ChaCha8Rng) -> EosTriple {
        let stiff_liquid = rng.random_bool(0.5);
        let mut draw = |stiff: bool| {
            let cv = rng.random_range(0.5..2.0);
            let gamma = rng.random_range(1.1..2.5);
            let s_ref = rng.random_range(-1.0..1.0);
            if stiff {
                EosParams::stiffened_gas(
                    cv,
                    gamma,
                    rng.random_range(0.0..1.0),
                    rng.random_range(-0.2..0.2),
                    s_ref,
                )
                .unwrap()
            } else {
                EosParams::ideal_gas(cv, gamma, s_ref).unwrap()
            }
        };
        EosTriple::new(draw(stiff_liquid), draw(false), draw(false))
    }

    /// Random valid input with all three phases present.
    fn random_input(rng: &mut ChaCha8Rng, eos: &EosTriple) -> MixtureInput {
        loop {
            let tau = rng.random_range(0.3..3.0);
            let e = rng.random_range(1.0..5.0);
            let phi_l = rng.random_range(0.1..0.8);
            let phi_g = rng.random_range(0.05..(0.95 - phi_l));
            let alpha = rng.random_range(0.1..0.9);
            let z_l = rng.random_range(0.05..0.9);
            let z_g = rng.random_range(0.02..(0.98 - z_l));
            let m = input(tau, e, phi_l, phi_g, [alpha, z_l, z_g]);
            if evaluate(eos, &m).is_ok() {
                return m;
            }
        }
    }

    /// Central difference of σ along a fraction; the oracle for the closed forms.
    fn fd_sigma(eos: &EosTriple, m: &MixtureInput, which: usize) -> f64 {
        let h = 1e-6;
        let shift = |d: f64| {
            let mut mm = *m;
            match which {
                0 => mm.y.alpha_l += d,
                1 => mm.y.z_l += d,
                2 => mm.y.z_g += d,
                _ => {
                    mm.comp.phi_l += d;
                    mm.comp.phi_v -= d;
                }
            }
            sigma(eos, &mm).unwrap()
        };
        (shift(h) - shift(-h)) / (2.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let eos = random_eos(&mut rng);
            let m = random_input(&mut rng, &eos);
            let g = grad_sigma_y(&eos, &m).unwrap();
            let gp = grad_sigma_phi_l(&eos, &m).unwrap();
            let th = evaluate(&eos, &m).unwrap();
            // entropy scale of each component for a relative comparison
            let scales = [
                m.tau
                    * Phase::ALL
                        .iter()
                        .filter_map(|&k| th.phase(k))
                        .map(|p| (p.pressure / p.temperature).abs())
                        .sum::<f64>(),
                m.e * Phase::ALL
                    .iter()
                    .filter_map(|&k| th.phase(k))
                    .map(|p| 1.0 / p.temperature)
                    .sum::<f64>(),
                m.e * Phase::ALL
                    .iter()
                    .filter_map(|&k| th.phase(k))
                    .map(|p| 1.0 / p.temperature)
                    .sum::<f64>(),
                Phase::ALL
                    .iter()
                    .filter_map(|&k| th.phase(k))
                    .map(|p| (p.chemical_potential / p.temperature).abs())
                    .sum::<f64>(),
            ];
            for i in 0..3 {
                let fd = fd_sigma(&eos, &m, i);
                assert!(
                    (fd - g[i]).abs() <= 1e-4 * scales[i],
                    "component {i}: {fd} vs {}",
                    g[i]
                );
            }
            let fd = fd_sigma(&eos, &m, 3);
            assert!((fd - gp).abs() <= 1e-4 * scales[3], "phi_l: {fd} vs {gp}");
        }
    }

    #[test]
    fn closure_satisfies_entropy_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let eos = random_eos(&mut rng);
            let m = random_input(&mut rng, &eos);
            let (p, t) = pressure_out_of_equilibrium(&eos, &m).unwrap();
            let th = evaluate(&eos, &m).unwrap();
            let [d_tau, d_e] = grad_sigma_state_of(&th, &m.y);
            assert!((d_tau - p * d_e).abs() <= 1e-10 * d_tau.abs().max(p.abs() * d_e));

            // finite-difference ratios of σ in (τ, e)
            let s = |tau: f64, e: f64| sigma(&eos, &MixtureInput { tau, e, ..m }).unwrap();
            let (ht, he) = (1e-6 * m.tau, 1e-6 * m.e);
            let fd_tau = (s(m.tau + ht, m.e) - s(m.tau - ht, m.e)) / (2.0 * ht);
            let fd_e = (s(m.tau, m.e + he) - s(m.tau, m.e - he)) / (2.0 * he);
            assert_relative_eq!(1.0 / fd_e, t, max_relative = 1e-6);
            assert!((fd_tau / fd_e - p).abs() <= 1e-6 * (p.abs() + d_tau.abs() * t));
        }
    }

    #[test]
    fn frozen_sound_speed_matches_pressure_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let eos = random_eos(&mut rng);
            let m = random_input(&mut rng, &eos);
            let c = frozen_sound_speed(&eos, &m).unwrap();
            let p = |tau: f64, e: f64| {
                pressure_out_of_equilibrium(&eos, &MixtureInput { tau, e, ..m })
                    .unwrap()
                    .0
            };
            let (ht, he) = (1e-6 * m.tau, 1e-6 * m.e);
            let p0 = p(m.tau, m.e);
            let dp_dtau = (p(m.tau + ht, m.e) - p(m.tau - ht, m.e)) / (2.0 * ht);
            let dp_de = (p(m.tau, m.e + he) - p(m.tau, m.e - he)) / (2.0 * he);
            let c2_fd = m.tau * m.tau * (p0 * dp_de - dp_dtau);
            assert_relative_eq!(c * c, c2_fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn sigma_concave_in_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let eos = random_eos(&mut rng);
            let a = random_input(&mut rng, &eos);
            let b = MixtureInput {
                tau: a.tau * rng.random_range(0.5..2.0),
                e: a.e * rng.random_range(1.0..2.0),
                ..a
            };
            let Ok(sb) = sigma(&eos, &b) else { continue };
            let mid = MixtureInput {
                tau: 0.5 * (a.tau + b.tau),
                e: 0.5 * (a.e + b.e),
                ..a
            };
            let sm = sigma(&eos, &mid).unwrap();
            assert!(sm >= 0.5 * (sigma(&eos, &a).unwrap() + sb) - 1e-12);
        }
    }

    #[test]
    fn sigma_matches_extensive_entropy() {
        // σ is intensive: M σ equals the sum of the extensive phase entropies for any M.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let eos = random_eos(&mut rng);
            let m = random_input(&mut rng, &eos);
            let s = sigma(&eos, &m).unwrap();
            for total in [0.5, 3.0, 40.0] {
                let ext: f64 = Phase::ALL
                    .iter()
                    .map(|&k| {
                        let mass = total * m.comp.get(k);
                        eos.get(k)
                            .extensive_entropy(
                                mass,
                                total * m.y.alpha(k) * m.tau,
                                total * m.y.z(k) * m.e,
                            )
                            .unwrap()
                    })
                    .sum();
                assert!((ext / total - s).abs() <= 1e-12 * s.abs().max(1.0));
            }
        }
    }
}
