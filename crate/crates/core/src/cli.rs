//! Command-line front end. Exit codes: 0 success, 1 usage or
//! configuration error, 2 non-convergence, 3 domain error, 4 hyperbolicity
//! failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::ConfigFile;
use crate::equilibrium::{self, EquilibriumResult};
use crate::error::Error;
use crate::fv1d;
use crate::hem::{self, HemState, Mode};
use crate::mixture::{EosTriple, Phase};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NON_CONVERGENCE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_NON_HYPERBOLIC: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
        Error::NonHyperbolic { .. } => EXIT_NON_HYPERBOLIC,
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_DOMAIN,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "triphase",
    version,
    about = "Liquid/vapor/gas mixture equilibrium and 1-D relaxation solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the equilibrium at one (tau, e) state
    Eq(EqArgs),
    /// Check hyperbolicity over a grid of equilibrium states
    HypScan(ScanArgs),
    /// Run a 1-D simulation
    Run(RunArgs),
    /// Parse a configuration file and report problems
    ValidateConfig(ConfigArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Configuration file (`section.key = value` lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set grid.n=400`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ConfigFile, Error> {
        let mut cfg = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        for o in &self.overrides {
            cfg.assign(o)?;
        }
        Ok(cfg)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Npt,
    Pt,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Npt => Mode::Npt,
            ModeArg::Pt => Mode::Pt,
        }
    }
}

#[derive(Args, Debug)]
struct EqArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
    #[arg(long, allow_negative_numbers = true)]
    e: f64,
    #[arg(long, allow_negative_numbers = true)]
    phi_g: f64,
    /// Required in npt mode
    #[arg(long, allow_negative_numbers = true)]
    phi_l: Option<f64>,
    /// Also write the result as a one-row CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

/// `min:max:count` or a single value.
#[derive(Clone, Debug, PartialEq)]
struct Range {
    min: f64,
    max: f64,
    count: usize,
}

impl Range {
    fn values(&self) -> Vec<f64> {
        match self.count {
            0 => vec![],
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

fn parse_range(s: &str) -> Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("invalid number `{t}`"))
    };
    match parts.as_slice() {
        [v] => Ok(Range {
            min: num(v)?,
            max: num(v)?,
            count: 1,
        }),
        [a, b, n] => Ok(Range {
            min: num(a)?,
            max: num(b)?,
            count: n
                .trim()
                .parse()
                .map_err(|_| format!("invalid count `{n}`"))?,
        }),
        _ => Err(format!("expected `value` or `min:max:count`, got `{s}`")),
    }
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    tau: Range,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    e: Range,
    /// Ignored in pt mode
    #[arg(long, value_parser = parse_range, default_value = "0")]
    phi_l: Range,
    #[arg(long, value_parser = parse_range, default_value = "0")]
    phi_g: Range,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    u: f64,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

/// Runs the CLI with `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Eq(a) => cmd_eq(&a, out),
        Command::HypScan(a) => cmd_hyp_scan(&a, out, err),
        Command::Run(a) => cmd_run(&a, out),
        Command::ValidateConfig(a) => cmd_validate(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn cmd_eq(a: &EqArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let eos = a.config.load()?.eos()?;
    let mode = Mode::from(a.mode);
    let r = match mode {
        Mode::Npt => {
            let phi_l = a
                .phi_l
                .ok_or_else(|| Error::Config("--phi-l is required in npt mode".into()))?;
            equilibrium::equilibrate_npt(&eos, a.tau, a.e, phi_l, a.phi_g)?
        }
        Mode::Pt => equilibrium::equilibrate_pt(&eos, a.tau, a.e, a.phi_g)?,
    };
    let text = eq_report(mode, &r);
    out.write_all(text.as_bytes()).map_err(io_err)?;
    if let Some(path) = &a.csv {
        std::fs::write(path, eq_csv(&r)).map_err(io_err)?;
    }
    Ok(EXIT_OK)
}

fn io_err(e: std::io::Error) -> Error {
    Error::Config(format!("i/o: {e}"))
}

fn eq_report(mode: Mode, r: &EquilibriumResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mode = {}", mode.as_str());
    let _ = writeln!(s, "regime = {}", r.regime.as_str());
    let _ = writeln!(s, "tau = {}", num(r.tau));
    let _ = writeln!(s, "e = {}", num(r.e));
    let _ = writeln!(s, "phi_l = {}", num(r.comp.phi_l));
    let _ = writeln!(s, "phi_g = {}", num(r.comp.phi_g));
    let _ = writeln!(s, "phi_v = {}", num(r.comp.phi_v));
    let _ = writeln!(s, "alpha_l = {}", num(r.y_eq.alpha_l));
    let _ = writeln!(s, "z_l = {}", num(r.y_eq.z_l));
    let _ = writeln!(s, "z_g = {}", num(r.y_eq.z_g));
    let _ = writeln!(s, "z_v = {}", num(r.y_eq.z_v()));
    let _ = writeln!(s, "T = {}", num(r.temperature));
    let _ = writeln!(s, "p = {}", num(r.pressure));
    let _ = writeln!(s, "s = {}", num(r.entropy));
    let c2 = r.sound_speed_squared();
    let _ = writeln!(
        s,
        "c = {}",
        if c2 > 0.0 {
            num(c2.sqrt())
        } else {
            "nan".into()
        }
    );
    let _ = writeln!(s, "residual.temperature = {}", num(r.residuals.temperature));
    let _ = writeln!(s, "residual.dalton = {}", num(r.residuals.dalton));
    let _ = writeln!(
        s,
        "residual.chemical_potential = {}",
        num(r.residuals.chemical_potential)
    );
    let _ = writeln!(s, "degenerate = {}", r.residuals.degenerate);
    let _ = writeln!(s, "iterations = {}", r.iterations);
    for k in Phase::ALL {
        match (r.thermo.states[k.index()], r.thermo.phase(k)) {
            (Some(st), Some(th)) => {
                let _ = writeln!(
                    s,
                    "{name}.tau = {}\n{name}.e = {}\n{name}.T = {}\n{name}.p = {}\n{name}.mu = {}",
                    num(st.tau),
                    num(st.e),
                    num(th.temperature),
                    num(th.pressure),
                    num(th.chemical_potential),
                    name = k.name()
                );
            }
            _ => {
                let _ = writeln!(s, "{}.present = false", k.name());
            }
        }
    }
    s
}

fn eq_csv(r: &EquilibriumResult) -> String {
    let mut s = String::from("# equilibrium state\n");
    s.push_str("tau,e,phi_l,phi_g,alpha_l,z_l,z_g,T,p,s,regime\n");
    let vals = [
        r.tau,
        r.e,
        r.comp.phi_l,
        r.comp.phi_g,
        r.y_eq.alpha_l,
        r.y_eq.z_l,
        r.y_eq.z_g,
        r.temperature,
        r.pressure,
        r.entropy,
    ];
    let row: Vec<String> = vals.iter().map(|v| num(*v)).collect();
    let _ = writeln!(s, "{},{}", row.join(","), r.regime.as_str());
    s
}

/// One sampled state of a hyperbolicity scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub tau: f64,
    pub e: f64,
    pub phi_l: f64,
    pub phi_g: f64,
    pub u: f64,
    pub report: Option<hem::EigenReport>,
}

impl ScanRow {
    pub fn status(&self) -> &'static str {
        match &self.report {
            None => "skipped",
            Some(r) if r.pass => "pass",
            Some(_) => "fail",
        }
    }
}

/// `eigen_check` over the Cartesian product of the given values; states
/// that cannot be evaluated are kept as skipped rows.
pub fn hyperbolicity_scan(
    eos: &EosTriple,
    mode: Mode,
    taus: &[f64],
    es: &[f64],
    phi_ls: &[f64],
    phi_gs: &[f64],
    u: f64,
) -> Vec<ScanRow> {
    let phi_ls: &[f64] = match mode {
        Mode::Npt => phi_ls,
        Mode::Pt => &[0.0],
    };
    let mut rows = Vec::new();
    for &tau in taus {
        for &e in es {
            for &phi_l in phi_ls {
                for &phi_g in phi_gs {
                    let report = if tau > 0.0 {
                        let st = HemState::from_primitive(1.0 / tau, u, e, phi_l, phi_g);
                        hem::eigen_check(eos, &st, mode).ok()
                    } else {
                        None
                    };
                    rows.push(ScanRow {
                        tau,
                        e,
                        phi_l,
                        phi_g,
                        u,
                        report,
                    });
                }
            }
        }
    }
    rows
}

fn cmd_hyp_scan(a: &ScanArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    let eos = a.config.load()?.eos()?;
    let mode = Mode::from(a.mode);
    let rows = hyperbolicity_scan(
        &eos,
        mode,
        &a.tau.values(),
        &a.e.values(),
        &a.phi_l.values(),
        &a.phi_g.values(),
        a.u,
    );
    let mut csv = format!("# hyperbolicity scan, mode = {}\n", mode.as_str());
    csv.push_str("tau,e,phi_l,phi_g,u,c,max_imag,spectrum_error,status\n");
    for r in &rows {
        let (c, im, se) = match &r.report {
            Some(rep) => (
                num(rep.sound_speed),
                num(rep.max_imag),
                num(rep.spectrum_error),
            ),
            None => ("nan".into(), "nan".into(), "nan".into()),
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{c},{im},{se},{}",
            num(r.tau),
            num(r.e),
            num(r.phi_l),
            num(r.phi_g),
            num(r.u),
            r.status()
        );
    }
    match &a.out {
        Some(p) => std::fs::write(p, csv).map_err(io_err)?,
        None => out.write_all(csv.as_bytes()).map_err(io_err)?,
    }
    let failed = rows.iter().filter(|r| r.status() == "fail").count();
    if failed > 0 {
        let _ = writeln!(
            err,
            "{failed} of {} sampled states failed the hyperbolicity check",
            rows.len()
        );
        return Ok(EXIT_NON_HYPERBOLIC);
    }
    Ok(EXIT_OK)
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let cfg = a.config.load()?.run_config()?;
    let summary = fv1d::run_to_dir(&cfg, &a.out)?;
    out.write_all(summary.to_text().as_bytes())
        .map_err(io_err)?;
    Ok(EXIT_OK)
}

fn cmd_validate(a: &ConfigArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let cfg = a.load()?;
    let run = cfg.run_config()?;
    let _ = writeln!(
        out,
        "ok: model = {}, cells = {}, bc = {}, t_end = {}",
        run.model.as_str(),
        run.grid.n,
        run.grid.bc.as_str(),
        num(run.t_end)
    );
    fv1d::initial_cells(&run)?;
    Ok(EXIT_OK)
}
