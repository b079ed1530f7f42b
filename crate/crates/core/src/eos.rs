//! Single-phase thermodynamics described by a complete entropy function.
//!
//! Each phase is an ideal gas or a stiffened gas given through its specific
//! entropy `s(τ, e)`. Temperature, pressure and chemical potential follow from
//! the Gibbs relation `T ds = de + p dτ` and the Euler relation `μ = e + pτ − Ts`.
//!
//! The validity cone of a state is `τ > 0` and `e − q − π∞·τ > 0`; every
//! entry point checks it and returns [`Error::Domain`] outside.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EosKind {
    IdealGas,
    StiffenedGas,
}

/// Parameters of one phase's entropy function.
///
/// Ideal gas: `s = cv ln e + R ln τ + s_ref` with `R = (γ − 1) cv`.
/// Stiffened gas: `s = cv ln(e − q − π∞ τ) + R ln τ + s_ref`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EosParams {
    kind: EosKind,
    cv: f64,
    gamma: f64,
    pi_inf: f64,
    q: f64,
    s_ref: f64,
}

/// Specific volume and specific internal energy of one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub tau: f64,
    pub e: f64,
}

impl PhaseState {
    pub fn new(tau: f64, e: f64) -> Self {
        PhaseState { tau, e }
    }
}

/// Everything one evaluation of the entropy function yields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseThermo {
    pub s: f64,
    pub temperature: f64,
    pub pressure: f64,
    pub chemical_potential: f64,
    /// `(∂s/∂τ, ∂s/∂e) = (p/T, 1/T)`
    pub grad: [f64; 2],
    /// Second partials of `s` in `(τ, e)`.
    pub hess: [[f64; 2]; 2],
}

impl EosParams {
    pub fn ideal_gas(cv: f64, gamma: f64, s_ref: f64) -> Result<Self> {
        Self::new(EosKind::IdealGas, cv, gamma, 0.0, 0.0, s_ref)
    }

    pub fn stiffened_gas(cv: f64, gamma: f64, pi_inf: f64, q: f64, s_ref: f64) -> Result<Self> {
        Self::new(EosKind::StiffenedGas, cv, gamma, pi_inf, q, s_ref)
    }

    pub fn new(
        kind: EosKind,
        cv: f64,
        gamma: f64,
        pi_inf: f64,
        q: f64,
        s_ref: f64,
    ) -> Result<Self> {
        if !(cv > 0.0 && cv.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cv must be positive, got {cv}"
            )));
        }
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must exceed 1, got {gamma}"
            )));
        }
        if !(pi_inf >= 0.0 && pi_inf.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pi_inf must be non-negative, got {pi_inf}"
            )));
        }
        if !q.is_finite() || !s_ref.is_finite() {
            return Err(Error::InvalidParameter("q and s_ref must be finite".into()));
        }
        if kind == EosKind::IdealGas && (pi_inf != 0.0 || q != 0.0) {
            return Err(Error::InvalidParameter(
                "ideal gas requires pi_inf = 0 and q = 0".into(),
            ));
        }
        Ok(EosParams {
            kind,
            cv,
            gamma,
            pi_inf,
            q,
            s_ref,
        })
    }

    pub fn kind(&self) -> EosKind {
        self.kind
    }
    pub fn cv(&self) -> f64 {
        self.cv
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn pi_inf(&self) -> f64 {
        self.pi_inf
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn s_ref(&self) -> f64 {
        self.s_ref
    }

    /// Same parameters with a different entropy constant.
    pub fn with_s_ref(mut self, s_ref: f64) -> Self {
        self.s_ref = s_ref;
        self
    }

    /// Specific gas constant `R = (γ − 1) cv`.
    pub fn gas_constant(&self) -> f64 {
        (self.gamma - 1.0) * self.cv
    }

    /// `e − q − π∞ τ`, positive exactly on the validity cone (for `τ > 0`).
    pub fn thermal_energy(&self, st: PhaseState) -> f64 {
        st.e - self.q - self.pi_inf * st.tau
    }

    pub fn check(&self, st: PhaseState) -> Result<()> {
        if !(st.tau > 0.0) || !st.tau.is_finite() {
            return Err(Error::domain(format!(
                "specific volume must be positive, got {}",
                st.tau
            )));
        }
        let w = self.thermal_energy(st);
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::domain(format!(
                "state (tau={}, e={}) outside the validity cone (e - q - pi_inf*tau = {w})",
                st.tau, st.e
            )));
        }
        Ok(())
    }

    pub fn entropy(&self, st: PhaseState) -> Result<f64> {
        self.check(st)?;
        Ok(self.cv * self.thermal_energy(st).ln() + self.gas_constant() * st.tau.ln() + self.s_ref)
    }

    pub fn temperature(&self, st: PhaseState) -> Result<f64> {
        self.check(st)?;
        Ok(self.thermal_energy(st) / self.cv)
    }

    /// May be negative for a stiffened gas; that is allowed.
    pub fn pressure(&self, st: PhaseState) -> Result<f64> {
        self.check(st)?;
        Ok(self.pressure_unchecked(st))
    }

    fn pressure_unchecked(&self, st: PhaseState) -> f64 {
        (self.gamma - 1.0) * (st.e - self.q) / st.tau - self.gamma * self.pi_inf
    }

    pub fn chemical_potential(&self, st: PhaseState) -> Result<f64> {
        Ok(self.evaluate(st)?.chemical_potential)
    }

    pub fn entropy_hessian(&self, st: PhaseState) -> Result<[[f64; 2]; 2]> {
        Ok(self.evaluate(st)?.hess)
    }

    /// Single-phase sound speed from `c² = τ²(p ∂ₑp − ∂_τp) = γ(p + π∞)τ`.
    pub fn sound_speed(&self, st: PhaseState) -> Result<f64> {
        self.check(st)?;
        let p = self.pressure_unchecked(st);
        let dp_de = (self.gamma - 1.0) / st.tau;
        let dp_dtau = -(self.gamma - 1.0) * (st.e - self.q) / (st.tau * st.tau);
        let c2 = st.tau * st.tau * (p * dp_de - dp_dtau);
        if !(c2 > 0.0) {
            return Err(Error::NonHyperbolic { c2 });
        }
        Ok(c2.sqrt())
    }

    pub fn evaluate(&self, st: PhaseState) -> Result<PhaseThermo> {
        self.check(st)?;
        let w = self.thermal_energy(st);
        let r = self.gas_constant();
        let cv = self.cv;
        let pi = self.pi_inf;
        let s = cv * w.ln() + r * st.tau.ln() + self.s_ref;
        let temperature = w / cv;
        let pressure = self.pressure_unchecked(st);
        let ds_dtau = r / st.tau - cv * pi / w;
        let ds_de = cv / w;
        let w2 = w * w;
        let hess = [
            [-cv * pi * pi / w2 - r / (st.tau * st.tau), cv * pi / w2],
            [cv * pi / w2, -cv / w2],
        ];
        Ok(PhaseThermo {
            s,
            temperature,
            pressure,
            chemical_potential: -temperature * s + pressure * st.tau + st.e,
            grad: [ds_dtau, ds_de],
            hess,
        })
    }

    /// Extensive entropy `S(M, V, E) = M s(V/M, E/M)`.
    ///
    /// The empty phase `(0, 0, 0)` has zero entropy; `M = 0` with any volume
    /// or energy is a domain error.
    pub fn extensive_entropy(&self, m: f64, v: f64, e: f64) -> Result<f64> {
        if m == 0.0 {
            return if v == 0.0 && e == 0.0 {
                Ok(0.0)
            } else {
                Err(Error::domain("zero mass carrying volume or energy"))
            };
        }
        if !(m > 0.0) {
            return Err(Error::domain(format!("mass must be non-negative, got {m}")));
        }
        Ok(m * self.entropy(PhaseState::new(v / m, e / m))?)
    }

    /// Value, gradient and Hessian of the extensive entropy at `(M, V, E)`, `M > 0`.
    ///
    /// The gradient is `(−μ/T, p/T, 1/T)`. The Hessian is that of the
    /// perspective function: `(1/M) Bᵀ H B` with `B = [−y | I]`, `y = (V/M, E/M)`.
    pub fn extensive_derivatives(
        &self,
        m: f64,
        v: f64,
        e: f64,
    ) -> Result<(f64, [f64; 3], [[f64; 3]; 3])> {
        if !(m > 0.0) {
            return Err(Error::domain(format!("mass must be positive, got {m}")));
        }
        let y = PhaseState::new(v / m, e / m);
        let th = self.evaluate(y)?;
        let inv_t = 1.0 / th.temperature;
        let grad = [-th.chemical_potential * inv_t, th.grad[0], th.grad[1]];
        let h = th.hess;
        let yv = [y.tau, y.e];
        let hy = [
            h[0][0] * yv[0] + h[0][1] * yv[1],
            h[1][0] * yv[0] + h[1][1] * yv[1],
        ];
        let yhy = yv[0] * hy[0] + yv[1] * hy[1];
        let inv_m = 1.0 / m;
        let hess = [
            [yhy * inv_m, -hy[0] * inv_m, -hy[1] * inv_m],
            [-hy[0] * inv_m, h[0][0] * inv_m, h[0][1] * inv_m],
            [-hy[1] * inv_m, h[1][0] * inv_m, h[1][1] * inv_m],
        ];
        Ok((m * th.s, grad, hess))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use proptest::test_runner::RngSeed;

    fn unit_ideal() -> EosParams {
        EosParams::ideal_gas(1.0, 2.0, 0.0).unwrap()
    }

    #[test]
    fn ideal_gas_reference_values() {
        let eos = unit_ideal();
        let a = PhaseState::new(1.0, 1.0);
        let b = PhaseState::new(2.0, 1.0);
        assert_eq!(eos.entropy(a).unwrap(), 0.0);
        assert_relative_eq!(eos.entropy(b).unwrap(), 2f64.ln(), max_relative = 1e-15);
        assert_eq!(eos.temperature(a).unwrap(), 1.0);
        assert_eq!(
            EosParams::ideal_gas(2.0, 2.0, 0.0)
                .unwrap()
                .temperature(a)
                .unwrap(),
            0.5
        );
        assert_eq!(eos.pressure(a).unwrap(), 1.0);
        assert_eq!(eos.pressure(b).unwrap(), 0.5);
        assert_relative_eq!(
            eos.chemical_potential(a).unwrap(),
            2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            eos.chemical_potential(b).unwrap(),
            2.0 - 2f64.ln(),
            max_relative = 1e-15
        );
        let h = eos.entropy_hessian(a).unwrap();
        assert_eq!(h, [[-1.0, 0.0], [0.0, -1.0]]);
    }

    #[test]
    fn stiffened_gas_reference_values() {
        let eos = EosParams::stiffened_gas(1.0, 2.0, 1.0, 0.0, 0.0).unwrap();
        let st = PhaseState::new(0.5, 1.0);
        assert_relative_eq!(eos.temperature(st).unwrap(), 0.5, max_relative = 1e-15);
        assert_eq!(eos.pressure(st).unwrap(), 0.0);

        // cross-check against finite differences of the entropy
        let h = 1e-6;
        let s = |tau: f64, e: f64| eos.entropy(PhaseState::new(tau, e)).unwrap();
        let ds_de = (s(0.5, 1.0 + h) - s(0.5, 1.0 - h)) / (2.0 * h);
        let ds_dtau = (s(0.5 + h, 1.0) - s(0.5 - h, 1.0)) / (2.0 * h);
        assert_relative_eq!(1.0 / ds_de, 0.5, max_relative = 1e-8);
        assert!((0.5 * ds_dtau).abs() < 1e-8);
    }

    #[test]
    fn stiffened_reduces_to_ideal() {
        let ideal = EosParams::ideal_gas(1.3, 1.4, 0.7).unwrap();
        let stiff = EosParams::stiffened_gas(1.3, 1.4, 0.0, 0.0, 0.7).unwrap();
        for &(tau, e) in &[(0.1, 3.0), (1.0, 1.0), (7.0, 0.02)] {
            let st = PhaseState::new(tau, e);
            assert_eq!(ideal.evaluate(st).unwrap(), stiff.evaluate(st).unwrap());
        }
    }

    #[test]
    fn domain_errors() {
        let stiff = EosParams::stiffened_gas(1.0, 2.0, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            stiff.entropy(PhaseState::new(1.0, 1.0)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            stiff.entropy(PhaseState::new(-1.0, 5.0)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            unit_ideal().pressure(PhaseState::new(1.0, -1.0)),
            Err(Error::Domain(_))
        ));
        assert!(EosParams::new(EosKind::IdealGas, 1.0, 1.4, 1.0, 0.0, 0.0).is_err());
        assert!(EosParams::ideal_gas(0.0, 1.4, 0.0).is_err());
        assert!(EosParams::ideal_gas(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn extensive_wrapper() {
        let eos = unit_ideal();
        assert_eq!(eos.extensive_entropy(1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(eos.extensive_entropy(2.0, 2.0, 2.0).unwrap(), 0.0);
        assert_eq!(eos.extensive_entropy(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!(eos.extensive_entropy(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn chemical_potential_matches_mass_derivative() {
        let eos = EosParams::stiffened_gas(1.7, 1.9, 0.4, 0.3, -0.2).unwrap();
        let (m, v, e) = (0.8, 1.1, 2.9);
        let h = 1e-6;
        let ds_dm = (eos.extensive_entropy(m + h, v, e).unwrap()
            - eos.extensive_entropy(m - h, v, e).unwrap())
            / (2.0 * h);
        let st = PhaseState::new(v / m, e / m);
        let t = eos.temperature(st).unwrap();
        let mu = eos.chemical_potential(st).unwrap();
        assert_relative_eq!(mu, -t * ds_dm, max_relative = 1e-8);
    }

    #[test]
    fn sound_speed_single_phase() {
        let eos = unit_ideal();
        assert_relative_eq!(
            eos.sound_speed(PhaseState::new(1.0, 1.0)).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-15
        );
        let sg = EosParams::stiffened_gas(1.0, 3.0, 2.0, 0.1, 0.0).unwrap();
        let st = PhaseState::new(0.3, 1.4);
        let p = sg.pressure(st).unwrap();
        assert_relative_eq!(
            sg.sound_speed(st).unwrap(),
            (3.0 * (p + 2.0) * 0.3f64).sqrt(),
            max_relative = 1e-14
        );
    }

    fn arb_eos() -> impl Strategy<Value = EosParams> {
        prop_oneof![
            (0.5f64..3.0, 1.05f64..3.0, -2.0f64..2.0)
                .prop_map(|(cv, g, s)| EosParams::ideal_gas(cv, g, s).unwrap()),
            (
                0.5f64..3.0,
                1.05f64..5.0,
                0.0f64..3.0,
                -1.0f64..1.0,
                -2.0f64..2.0
            )
                .prop_map(|(cv, g, pi, q, s)| EosParams::stiffened_gas(cv, g, pi, q, s).unwrap()),
        ]
    }

    /// A valid state for `eos`: thermal energy and volume drawn positive.
    fn valid_state(eos: &EosParams, tau: f64, w: f64) -> PhaseState {
        PhaseState::new(tau, w + eos.q() + eos.pi_inf() * tau)
    }

    proptest! {
        #![proptest_config(ProptestConfig {
            cases: 1000,
            rng_seed: RngSeed::Fixed(7),
            failure_persistence: None,
            ..ProptestConfig::default()
        })]

        #[test]
        fn gibbs_relation(eos in arb_eos(), tau in 0.05f64..5.0, w in 0.05f64..5.0) {
            let st = valid_state(&eos, tau, w);
            let th = eos.evaluate(st).unwrap();
            let h_tau = 1e-5 * tau;
            let h_e = 1e-5 * w;
            let s = |t: f64, e: f64| eos.entropy(PhaseState::new(t, e)).unwrap();
            let fd_tau = (s(tau + h_tau, st.e) - s(tau - h_tau, st.e)) / (2.0 * h_tau);
            let fd_e = (s(tau, st.e + h_e) - s(tau, st.e - h_e)) / (2.0 * h_e);
            let scale = th.pressure.abs().max(eos.pi_inf() + w / tau);
            prop_assert!((th.temperature * fd_tau - th.pressure).abs() <= 1e-4 * scale);
            prop_assert!((th.temperature * fd_e - 1.0).abs() <= 1e-4);
            prop_assert!(fd_e > 0.0);
        }

        #[test]
        fn hessian_matches_finite_differences(eos in arb_eos(), tau in 0.05f64..5.0, w in 0.05f64..5.0) {
            let st = valid_state(&eos, tau, w);
            let hs = eos.entropy_hessian(st).unwrap();
            let s = |t: f64, e: f64| eos.entropy(PhaseState::new(t, e)).unwrap();
            let (ht, he) = (1e-3 * tau.min(w / eos.pi_inf().max(1e-12)), 1e-3 * w);
            let (t0, e0) = (st.tau, st.e);
            let f_tt = (s(t0 + ht, e0) - 2.0 * s(t0, e0) + s(t0 - ht, e0)) / (ht * ht);
            let f_ee = (s(t0, e0 + he) - 2.0 * s(t0, e0) + s(t0, e0 - he)) / (he * he);
            let f_te = (s(t0 + ht, e0 + he) - s(t0 + ht, e0 - he) - s(t0 - ht, e0 + he) + s(t0 - ht, e0 - he))
                / (4.0 * ht * he);
            // the cross term is compared on the Hessian's scale
            let scale_te = (hs[0][0] * hs[1][1]).abs().sqrt();
            prop_assert!((f_tt - hs[0][0]).abs() <= 1e-4 * hs[0][0].abs());
            prop_assert!((f_ee - hs[1][1]).abs() <= 1e-4 * hs[1][1].abs());
            prop_assert!((f_te - hs[0][1]).abs() <= 1e-4 * scale_te);
            // negative definite
            let det = hs[0][0] * hs[1][1] - hs[0][1] * hs[1][0];
            prop_assert!(hs[1][1] < 0.0 && det > 0.0);
        }

        #[test]
        fn strict_concavity(eos in arb_eos(), t1 in 0.05f64..5.0, w1 in 0.05f64..5.0,
                            t2 in 0.05f64..5.0, w2 in 0.05f64..5.0, lam in 0.01f64..0.99) {
            let a = valid_state(&eos, t1, w1);
            let b = valid_state(&eos, t2, w2);
            let mid = PhaseState::new(lam * a.tau + (1.0 - lam) * b.tau, lam * a.e + (1.0 - lam) * b.e);
            let lhs = eos.entropy(mid).unwrap();
            let rhs = lam * eos.entropy(a).unwrap() + (1.0 - lam) * eos.entropy(b).unwrap();
            prop_assert!(lhs > rhs - 1e-12);
        }

        #[test]
        fn extensive_homogeneity(eos in arb_eos(), m in 0.1f64..4.0, tau in 0.05f64..5.0, w in 0.05f64..5.0) {
            let st = valid_state(&eos, tau, w);
            let (v, e) = (m * st.tau, m * st.e);
            let base = eos.extensive_entropy(m, v, e).unwrap();
            for lam in [0.5, 2.0, 10.0] {
                let scaled = eos.extensive_entropy(lam * m, lam * v, lam * e).unwrap();
                prop_assert!((scaled - lam * base).abs() <= 1e-12 * (lam * base).abs().max(lam * m));
            }
        }

        #[test]
        fn chemical_potential_euler_identity(eos in arb_eos(), m in 0.1f64..4.0, tau in 0.05f64..5.0, w in 0.05f64..5.0) {
            let st = valid_state(&eos, tau, w);
            let th = eos.evaluate(st).unwrap();
            let (_, grad, _) = eos.extensive_derivatives(m, m * st.tau, m * st.e).unwrap();
            let mu_ext = -th.temperature * grad[0];
            prop_assert!((mu_ext - th.chemical_potential).abs()
                <= 1e-10 * th.chemical_potential.abs().max(st.e.abs() + (th.temperature * th.s).abs()));
        }
    }
}
