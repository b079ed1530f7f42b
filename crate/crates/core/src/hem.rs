//! Homogeneous equilibrium Euler systems.
//!
//! NPT unknowns are `(φ_lρ, φ_gρ, ρ, ρu, ρE)`; PT unknowns are
//! `(φ_gρ, ρ, ρu, ρE)` with `φ_l` delivered by the PT equilibrium.

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::equilibrium::{self, EquilibriumResult};
use crate::error::{Error, Result};
use crate::mixture::EosTriple;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// No phase transition: liquid and gas mass fractions are transported.
    Npt,
    /// Liquid/vapor mass exchange at equilibrium: only the gas fraction is transported.
    Pt,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Npt => "npt",
            Mode::Pt => "pt",
        }
    }
}

/// Conservative HEM state. `m_l` is ignored in PT mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HemState {
    pub rho: f64,
    pub mom: f64,
    pub etot: f64,
    pub m_l: f64,
    pub m_g: f64,
}

impl HemState {
    pub fn from_primitive(rho: f64, u: f64, e: f64, phi_l: f64, phi_g: f64) -> Self {
        HemState {
            rho,
            mom: rho * u,
            etot: rho * (e + 0.5 * u * u),
            m_l: rho * phi_l,
            m_g: rho * phi_g,
        }
    }

    pub fn ncomp(mode: Mode) -> usize {
        match mode {
            Mode::Npt => 5,
            Mode::Pt => 4,
        }
    }

    pub fn to_conservative(&self, mode: Mode) -> Vec<f64> {
        match mode {
            Mode::Npt => vec![self.m_l, self.m_g, self.rho, self.mom, self.etot],
            Mode::Pt => vec![self.m_g, self.rho, self.mom, self.etot],
        }
    }

    pub fn from_conservative(mode: Mode, u: &[f64]) -> Self {
        match mode {
            Mode::Npt => HemState {
                m_l: u[0],
                m_g: u[1],
                rho: u[2],
                mom: u[3],
                etot: u[4],
            },
            Mode::Pt => HemState {
                m_l: 0.0,
                m_g: u[0],
                rho: u[1],
                mom: u[2],
                etot: u[3],
            },
        }
    }

    pub fn velocity(&self) -> f64 {
        self.mom / self.rho
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.rho
    }

    /// Specific internal energy `E − u²/2`.
    pub fn internal_energy(&self) -> f64 {
        let u = self.velocity();
        self.etot / self.rho - 0.5 * u * u
    }

    pub fn phi_l(&self) -> f64 {
        self.m_l / self.rho
    }

    pub fn phi_g(&self) -> f64 {
        self.m_g / self.rho
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::domain(format!(
                "density must be positive, got {}",
                self.rho
            )));
        }
        let masses: &[f64] = match mode {
            Mode::Npt => &[self.m_l, self.m_g],
            Mode::Pt => &[self.m_g],
        };
        let slack = 1e-12 * self.rho;
        if masses
            .iter()
            .any(|&m| !(m >= -slack && m <= self.rho + slack))
            || masses.iter().sum::<f64>() > self.rho + slack
        {
            return Err(Error::domain("partial densities outside [0, rho]"));
        }
        let e = self.internal_energy();
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::domain(format!(
                "internal energy must be positive, got {e}"
            )));
        }
        Ok(())
    }
}

/// Equilibrium at the state's `(τ, e, φ)`.
pub fn equilibrium(eos: &EosTriple, st: &HemState, mode: Mode) -> Result<EquilibriumResult> {
    st.validate(mode)?;
    solve(
        eos,
        st.tau(),
        st.internal_energy(),
        st.phi_l(),
        st.phi_g(),
        mode,
    )
}

fn solve(
    eos: &EosTriple,
    tau: f64,
    e: f64,
    phi_l: f64,
    phi_g: f64,
    mode: Mode,
) -> Result<EquilibriumResult> {
    let phi_g = phi_g.clamp(0.0, 1.0);
    match mode {
        Mode::Npt => {
            equilibrium::equilibrate_npt(eos, tau, e, phi_l.clamp(0.0, 1.0 - phi_g), phi_g)
        }
        Mode::Pt => equilibrium::equilibrate_pt(eos, tau, e, phi_g),
    }
}

/// Physical flux `(φ_kρu…, ρu, ρu² + p, (ρE + p)u)` with the equilibrium pressure.
pub fn hem_flux(eos: &EosTriple, st: &HemState, mode: Mode) -> Result<Vec<f64>> {
    let eq = equilibrium(eos, st, mode)?;
    Ok(flux_with_pressure(st, mode, eq.pressure))
}

pub(crate) fn flux_with_pressure(st: &HemState, mode: Mode, p: f64) -> Vec<f64> {
    let u = st.velocity();
    let mut f: Vec<f64> = st.to_conservative(mode).iter().map(|c| c * u).collect();
    let n = f.len();
    f[n - 2] += p;
    f[n - 1] += p * u;
    f
}

/// Lagrangian flux `(0,…,0, −u, p, pu)` for the unknowns `(φ…, τ, u, E)`.
/// The fraction rows carry no flux.
pub fn lagrangian_flux(eos: &EosTriple, st: &HemState, mode: Mode) -> Result<Vec<f64>> {
    let eq = equilibrium(eos, st, mode)?;
    let u = st.velocity();
    let nfrac = HemState::ncomp(mode) - 3;
    let mut f = vec![0.0; nfrac];
    f.extend([-u, eq.pressure, eq.pressure * u]);
    Ok(f)
}

/// Equilibrium sound speed from the exact Hessian of the equilibrium entropy.
pub fn sound_speed(
    eos: &EosTriple,
    tau: f64,
    e: f64,
    phi_l: f64,
    phi_g: f64,
    mode: Mode,
) -> Result<f64> {
    let eq = solve(eos, tau, e, phi_l, phi_g, mode)?;
    sound_speed_of(&eq)
}

pub(crate) fn sound_speed_of(eq: &EquilibriumResult) -> Result<f64> {
    let c2 = eq.sound_speed_squared();
    if !(c2 > 0.0) {
        return Err(Error::NonHyperbolic { c2 });
    }
    Ok(c2.sqrt())
}

/// Sound speed from central differences of the re-solved equilibrium
/// pressure: `c² = τ²(p ∂ₑp − ∂_τp)`.
pub fn sound_speed_fd(
    eos: &EosTriple,
    tau: f64,
    e: f64,
    phi_l: f64,
    phi_g: f64,
    mode: Mode,
) -> Result<f64> {
    let p = |t: f64, en: f64| solve(eos, t, en, phi_l, phi_g, mode).map(|r| r.pressure);
    let (ht, he) = (1e-6 * tau, 1e-6 * e);
    let dp_tau = (p(tau + ht, e)? - p(tau - ht, e)?) / (2.0 * ht);
    let dp_e = (p(tau, e + he)? - p(tau, e - he)?) / (2.0 * he);
    let c2 = tau * tau * (p(tau, e)? * dp_e - dp_tau);
    if !(c2 > 0.0) {
        return Err(Error::NonHyperbolic { c2 });
    }
    Ok(c2.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenReport {
    pub velocity: f64,
    pub sound_speed: f64,
    /// `(re, im)` sorted by real part.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Largest `|im|`, in units of `|u| + c`.
    pub max_imag: f64,
    /// Largest deviation from `{u − c, u, …, u, u + c}`, in units of `|u| + c`.
    pub spectrum_error: f64,
    pub pass: bool,
}

pub const EIGEN_IMAG_TOL: f64 = 1e-7;
pub const EIGEN_SPECTRUM_TOL: f64 = 1e-6;

/// Assembles the quasilinear matrix in primitive variables `(φ…, ρ, u, e)`
/// with differenced equilibrium pressure and checks its spectrum.
///
/// `Err` means the state itself could not be evaluated; a non-hyperbolic
/// state is reported with `pass = false`.
/// Relative step of the pressure finite differences in `eigen_check`.
const FD_STEP: f64 = 1e-6;

pub fn eigen_check(eos: &EosTriple, st: &HemState, mode: Mode) -> Result<EigenReport> {
    let eq = equilibrium(eos, st, mode)?;
    let (rho, u, e) = (st.rho, st.velocity(), st.internal_energy());
    let p0 = eq.pressure;
    let c2 = eq.sound_speed_squared();
    let c = c2.max(0.0).sqrt();

    let phis: Vec<f64> = match mode {
        Mode::Npt => vec![st.phi_l(), st.phi_g()],
        Mode::Pt => vec![st.phi_g()],
    };
    let nf = phis.len();
    let n = nf + 3;
    let pressure = |phi: &[f64], r: f64, en: f64| -> Result<f64> {
        let (pl, pg) = match mode {
            Mode::Npt => (phi[0], phi[1]),
            Mode::Pt => (0.0, phi[0]),
        };
        solve(eos, 1.0 / r, en, pl, pg, mode).map(|x| x.pressure)
    };
    let diff = |f: &dyn Fn(f64) -> Result<f64>, x: f64, h: f64, lo: f64, hi: f64| -> Result<f64> {
        if x - h >= lo && x + h <= hi {
            Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
        } else if x + h <= hi {
            Ok((f(x + h)? - p0) / h)
        } else {
            Ok((p0 - f(x - h)?) / h)
        }
    };

    let mut dp_phi = vec![0.0; nf];
    for k in 0..nf {
        let shifted = |v: f64| {
            let mut ph = phis.clone();
            ph[k] = v;
            pressure(&ph, rho, e)
        };
        let hi = 1.0
            - phis
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, v)| v)
                .sum::<f64>();
        dp_phi[k] = diff(&shifted, phis[k], FD_STEP, 0.0, hi)?;
    }
    let dp_rho = diff(
        &|r| pressure(&phis, r, e),
        rho,
        FD_STEP * rho,
        0.0,
        f64::INFINITY,
    )?;
    let dp_e = diff(
        &|en| pressure(&phis, rho, en),
        e,
        FD_STEP * e,
        0.0,
        f64::INFINITY,
    )?;

    // similarity scaling (1, ρ, c, c²) and division by |u| + c
    let speed = u.abs() + c.max(f64::MIN_POSITIVE);
    let scale: Vec<f64> = (0..nf).map(|_| 1.0).chain([rho, c, c * c]).collect();
    let (ir, iu, ie) = (nf, nf + 1, nf + 2);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = u;
    }
    a[(ir, iu)] = rho;
    for k in 0..nf {
        a[(iu, k)] = dp_phi[k] / rho;
    }
    a[(iu, ir)] = dp_rho / rho;
    a[(iu, ie)] = dp_e / rho;
    a[(ie, iu)] = p0 / rho;
    let balanced = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * scale[j] / scale[i] / speed);

    let mut eig: Vec<(f64, f64)> = eigenvalues(balanced)?
        .iter()
        .map(|z| (z.re * speed, z.im * speed))
        .collect();
    eig.sort_by(|x, y| x.0.total_cmp(&y.0));
    let max_imag = eig.iter().map(|z| z.1.abs()).fold(0.0, f64::max) / speed;
    let mut expected = vec![u; n];
    expected[0] = u - c;
    expected[n - 1] = u + c;
    let spectrum_error = eig
        .iter()
        .zip(&expected)
        .map(|(z, x)| (z.0 - x).abs())
        .fold(0.0, f64::max)
        / speed;
    let imag_tol = EIGEN_IMAG_TOL * u.abs() / speed + 1e-12;
    let pass = c2 > 0.0 && max_imag <= imag_tol && spectrum_error <= EIGEN_SPECTRUM_TOL;
    Ok(EigenReport {
        velocity: u,
        sound_speed: c,
        eigenvalues: eig,
        max_imag,
        spectrum_error,
        pass,
    })
}

const SCHUR_MAX_ITERATIONS: usize = 1000;
/// Shifts applied to a matrix whose spectrum lies in `[-1, 1]`, keeping the
/// relative deflation test of the Schur iteration away from zero eigenvalues.
/// Later ones are tried when the iteration fails to deflate.
const SCHUR_SHIFTS: [f64; 3] = [2.0, 2.5, 3.0];

/// Eigenvalues of `m` (spectrum within the unit disk) by a capped Schur iteration.
fn eigenvalues(m: DMatrix<f64>) -> Result<DVector<Complex<f64>>> {
    let n = m.nrows();
    SCHUR_SHIFTS
        .iter()
        .find_map(|&shift| {
            let shifted = &m + DMatrix::identity(n, n) * shift;
            Schur::try_new(shifted, f64::EPSILON, SCHUR_MAX_ITERATIONS)
                .map(|s| s.complex_eigenvalues().map(|z| z - shift))
        })
        .ok_or(Error::NonConvergence {
            iterations: SCHUR_MAX_ITERATIONS * SCHUR_SHIFTS.len(),
            residual: f64::NAN,
        })
}

/// L¹ residual of `∂_t s + u ∂_x s` between two snapshots on a periodic
/// uniform mesh, with centred space differences at the first time level.
pub fn entropy_transport_residual(s0: &[f64], s1: &[f64], u: &[f64], dx: f64, dt: f64) -> f64 {
    let n = s0.len();
    assert!(n == s1.len() && n == u.len() && n >= 3);
    (0..n)
        .map(|i| {
            let (l, r) = ((i + n - 1) % n, (i + 1) % n);
            let dsdx = (s0[r] - s0[l]) / (2.0 * dx);
            ((s1[i] - s0[i]) / dt + u[i] * dsdx).abs() * dx
        })
        .sum()
}
