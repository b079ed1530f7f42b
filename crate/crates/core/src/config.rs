//! Flat `section.key = value` configuration files.
//!
//! ```text
//! # comment
//! model = hrm-npt
//! eos.liquid.kind = stiffened
//! eos.liquid.pi_inf = 1.0
//! grid.n = 200
//! init.left.p = 1.0
//! ```
//!
//! Every key must be known; later assignments (and `--set` overrides)
//! replace earlier ones.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::eos::{EosKind, EosParams};
use crate::error::{Error, Result};
use crate::fv1d::{Boundary, Grid, InitState, InitialData, Model, RunConfig, Thermal};
use crate::hrm::{RelaxKind, RelaxationConfig};
use crate::mixture::{EosTriple, FractionVector};

const PHASES: [&str; 3] = ["liquid", "gas", "vapor"];
const EOS_KEYS: [&str; 6] = ["kind", "cv", "gamma", "pi_inf", "q", "s_ref"];
const STATE_KEYS: [&str; 9] = [
    "rho", "u", "e", "p", "phi_l", "phi_g", "alpha_l", "z_l", "z_g",
];
const PLAIN_KEYS: [&str; 17] = [
    "model",
    "grid.n",
    "grid.x_min",
    "grid.x_max",
    "grid.bc",
    "time.cfl",
    "time.t_end",
    "time.max_steps",
    "init.kind",
    "init.x0",
    "init.rho_amp",
    "init.wavenumber",
    "relax.kind",
    "relax.lambda",
    "relax.substeps",
    "output.every",
    "init.rho0",
];

fn is_known(key: &str) -> bool {
    if PLAIN_KEYS.contains(&key) {
        return true;
    }
    let parts: Vec<&str> = key.split('.').collect();
    match parts.as_slice() {
        ["eos", phase, field] => PHASES.contains(phase) && EOS_KEYS.contains(field),
        ["init", side, field] => ["left", "right"].contains(side) && STATE_KEYS.contains(field),
        ["init", field] => STATE_KEYS.contains(field) && *field != "rho",
        _ => false,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            cfg.assign(line).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", n + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one `key = value` assignment.
    pub fn assign(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected `key = value`, got `{assignment}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !is_known(key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(Error::Config(format!("empty value for `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
            })
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    /// Equations of state; unspecified parameters default to an ideal gas
    /// with `c_v = 1`, `γ = 1.4`.
    pub fn eos(&self) -> Result<EosTriple> {
        let phase = |name: &str| -> Result<EosParams> {
            let key = |f: &str| format!("eos.{name}.{f}");
            let kind = match self.get(&key("kind")).unwrap_or("ideal") {
                "ideal" => EosKind::IdealGas,
                "stiffened" => EosKind::StiffenedGas,
                other => {
                    return Err(Error::Config(format!(
                        "unknown eos kind `{other}` for {name}"
                    )))
                }
            };
            let (pi_inf, q) = (self.or(&key("pi_inf"), 0.0)?, self.or(&key("q"), 0.0)?);
            if kind == EosKind::IdealGas && (pi_inf != 0.0 || q != 0.0) {
                return Err(Error::Config(format!(
                    "{name}: pi_inf and q require kind = stiffened"
                )));
            }
            EosParams::new(
                kind,
                self.or(&key("cv"), 1.0)?,
                self.or(&key("gamma"), 1.4)?,
                pi_inf,
                q,
                self.or(&key("s_ref"), 0.0)?,
            )
            .map_err(|e| Error::Config(format!("{name}: {e}")))
        };
        Ok(EosTriple::new(
            phase("liquid")?,
            phase("gas")?,
            phase("vapor")?,
        ))
    }

    fn state(&self, prefix: &str, rho: Option<f64>) -> Result<InitState> {
        let key = |f: &str| format!("{prefix}.{f}");
        let thermal = match (
            self.parsed::<f64>(&key("e"))?,
            self.parsed::<f64>(&key("p"))?,
        ) {
            (Some(e), None) => Thermal::Energy(e),
            (None, Some(p)) => Thermal::Pressure(p),
            (Some(_), Some(_)) => {
                return Err(Error::Config(format!(
                    "give only one of `{}` and `{}`",
                    key("e"),
                    key("p")
                )))
            }
            (None, None) => {
                return Err(Error::Config(format!(
                    "missing `{}` or `{}`",
                    key("e"),
                    key("p")
                )))
            }
        };
        let y = match (
            self.parsed::<f64>(&key("alpha_l"))?,
            self.parsed::<f64>(&key("z_l"))?,
            self.parsed::<f64>(&key("z_g"))?,
        ) {
            (None, None, None) => None,
            (Some(a), Some(l), Some(g)) => Some(
                FractionVector::new(a, l, g)
                    .map_err(|e| Error::Config(format!("{prefix}: {e}")))?,
            ),
            _ => {
                return Err(Error::Config(format!(
                    "{prefix}: give all of alpha_l, z_l, z_g or none"
                )))
            }
        };
        Ok(InitState {
            rho: match rho {
                Some(r) => r,
                None => self.required(&key("rho"))?,
            },
            u: self.or(&key("u"), 0.0)?,
            thermal,
            phi_l: self.or(&key("phi_l"), 0.0)?,
            phi_g: self.or(&key("phi_g"), 0.0)?,
            y,
        })
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let model: Model = self.required("model")?;
        let bc = match self.get("grid.bc").unwrap_or("transmissive") {
            "periodic" => Boundary::Periodic,
            "transmissive" => Boundary::Transmissive,
            other => return Err(Error::Config(format!("unknown boundary `{other}`"))),
        };
        let grid = Grid::new(
            self.or("grid.n", 100)?,
            self.or("grid.x_min", 0.0)?,
            self.or("grid.x_max", 1.0)?,
            bc,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let initial = match self.get("init.kind").unwrap_or("riemann") {
            "riemann" => InitialData::Riemann {
                x0: self.or("init.x0", 0.5 * (grid.x_min + grid.x_max))?,
                left: self.state("init.left", None)?,
                right: self.state("init.right", None)?,
            },
            "smooth" => InitialData::Smooth {
                base: self.state("init", Some(self.required("init.rho0")?))?,
                rho_amp: self.or("init.rho_amp", 0.0)?,
                wavenumber: self.or("init.wavenumber", 1.0)?,
            },
            other => return Err(Error::Config(format!("unknown init.kind `{other}`"))),
        };
        let kind: RelaxKind = self.or("relax.kind", RelaxKind::Projection)?;
        let relax = RelaxationConfig {
            kind,
            lambda: match kind {
                RelaxKind::Projection => f64::INFINITY,
                _ => self.or("relax.lambda", 1.0)?,
            },
            substeps: self.or("relax.substeps", 1)?,
        };
        relax.validate().map_err(|e| Error::Config(e.to_string()))?;
        let cfl: f64 = self.or("time.cfl", 0.45)?;
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config(format!(
                "time.cfl must lie in (0, 1], got {cfl}"
            )));
        }
        let t_end: f64 = self.required("time.t_end")?;
        if !(t_end >= 0.0) {
            return Err(Error::Config(format!(
                "time.t_end must be non-negative, got {t_end}"
            )));
        }
        Ok(RunConfig {
            model,
            eos: self.eos()?,
            grid,
            cfl,
            t_end,
            max_steps: self.or("time.max_steps", 100_000)?,
            initial,
            relax,
            output_every: self.or("output.every", 0)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# two-sided shock tube
model = hrm-npt
eos.liquid.kind = stiffened   # water-like
eos.liquid.gamma = 2
eos.liquid.pi_inf = 1
grid.n = 50
time.t_end = 0.1
init.left.rho = 1
init.left.p = 2
init.left.phi_l = 0.5
init.left.phi_g = 0.2
init.right.rho = 0.5
init.right.e = 1.5
init.right.phi_l = 0.5
init.right.phi_g = 0.2
init.right.alpha_l = 0.3
init.right.z_l = 0.4
init.right.z_g = 0.2
relax.kind = linear
relax.lambda = 100
";

    #[test]
    fn parses_sample() {
        let cfg = ConfigFile::parse(SAMPLE).unwrap();
        let run = cfg.run_config().unwrap();
        assert_eq!(run.model, Model::HrmNpt);
        assert_eq!(run.grid.n, 50);
        assert_eq!(run.eos.liquid.kind(), EosKind::StiffenedGas);
        assert_eq!(run.eos.gas.gamma(), 1.4);
        assert_eq!(run.relax.kind, RelaxKind::Linear);
        let InitialData::Riemann { left, right, .. } = run.initial else {
            panic!()
        };
        assert_eq!(left.thermal, Thermal::Pressure(2.0));
        assert!(left.y.is_none());
        assert_eq!(right.y.unwrap().z_l, 0.4);
    }

    #[test]
    fn overrides_replace_values() {
        let mut cfg = ConfigFile::parse(SAMPLE).unwrap();
        cfg.assign("grid.n=80").unwrap();
        assert_eq!(cfg.run_config().unwrap().grid.n, 80);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(
            matches!(ConfigFile::parse("grid.m = 3"), Err(Error::Config(m)) if m.contains("line 1"))
        );
        assert!(ConfigFile::parse("model hrm").is_err());
        let mut cfg = ConfigFile::parse(SAMPLE).unwrap();
        cfg.assign("init.left.e = 1").unwrap();
        assert!(cfg.run_config().is_err());
        let cfg = ConfigFile::parse("eos.gas.pi_inf = 1").unwrap();
        assert!(cfg.eos().is_err());
        let cfg = ConfigFile::parse("eos.gas.gamma = abc").unwrap();
        assert!(cfg.eos().is_err());
    }
}
