//! Command-line front end: configuration, sweeps and CSV artifacts.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure. On a
//! numerical failure the rows computed before the failing point are still
//! written, with `complete=false` in the manifest.

mod config;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

pub use config::{GridSpec, RunConfig};
pub use output::{manifest, real, Table};

use crate::error::MaserError;
use crate::ldp::{rate_function_from, LdpOptions, ScgfSource, SpectralScgf};
use crate::model::{
    effective_potential, limit_potential, stationary, MaserParams, StationaryDistribution,
};
use crate::spectral::{cumulants, leading_spectrum, mgf_exact, spectral_bound};
use crate::trajectories::{dwell_times, ensemble, simulate, Initial, Phase};
use crate::validation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum Command {
    /// Stationary photon law over an alpha sweep
    Stationary,
    /// Rescaled effective potential and its limit
    Potential,
    /// Jump trajectories, dwell times and an MGF ensemble
    Trajectory,
    /// λ'(s) and the gap over an (alpha, s) grid
    Grid,
    /// Fine s window for several nex
    Zoom,
    /// Leading eigenvalues over an alpha sweep
    Spectrum,
    /// Mean and variance rates over alpha for several nex
    Cumulants,
    /// Rate-function table
    Ldp,
    /// Cross-check battery
    Validate,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self
            .to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default();
        f.write_str(&name)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("numerical failure at {point}: {message}")]
    Numerical { message: String, point: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numerical { .. } => 2,
        }
    }

    fn from_core(e: MaserError, point: String) -> Self {
        match e {
            MaserError::InvalidParameter { .. }
            | MaserError::DimensionTooSmall(_)
            | MaserError::LevelOutOfRange { .. } => CliError::Usage(format!("{point}: {e}")),
            other => CliError::Numerical {
                message: other.to_string(),
                point,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "maser-ldp",
    version,
    about = "Counting statistics of the atom maser"
)]
pub struct Cli {
    pub command: Command,
    /// Flat `key = value` configuration file
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Seed for Monte Carlo output; overrides `seed` in the configuration
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to MASER_LDP_THREADS
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_hint(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("MASER_LDP_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map(Some).map_err(|_| {
            CliError::Usage(format!("MASER_LDP_THREADS: `{v}` is not a thread count"))
        }),
        _ => Ok(None),
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let text = match &cli.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let mut cfg = RunConfig::load(cli.command, text.as_deref(), &cli.set)?;
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_hint(cli.threads)? {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cfg, &cli.out))
}

fn dispatch(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let run = Run {
        cfg,
        out,
        hash: cfg.hash(),
    };
    match cfg.command {
        Command::Stationary => run.stationary(),
        Command::Potential => run.potential(),
        Command::Trajectory => run.trajectory(),
        Command::Grid => run.grid(),
        Command::Zoom => run.zoom(),
        Command::Spectrum => run.spectrum(),
        Command::Cumulants => run.cumulants(),
        Command::Ldp => run.ldp(),
        Command::Validate => run.validate(),
    }
}

type Rows = Vec<Vec<String>>;

/// Rows of one sweep point, or the failure that ends the sweep there.
type PointResult = Result<Rows, CliError>;

fn bool_cell(b: bool) -> String {
    b.to_string()
}

fn opt_cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, real)
}

fn core<T>(r: crate::Result<T>, point: impl FnOnce() -> String) -> Result<T, CliError> {
    r.map_err(|e| CliError::from_core(e, point()))
}

struct Run<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    hash: String,
}

impl Run<'_> {
    fn params(&self, nex: f64, alpha: f64) -> Result<MaserParams, CliError> {
        let nu = self.cfg.real("nu")?;
        core(MaserParams::from_alpha(nex, alpha, nu), || {
            format!("nex={nex} alpha={alpha}")
        })
    }

    fn write(&self, table: &Table, complete: bool) -> Result<(), CliError> {
        let path = table.write(self.out, complete, &self.hash)?;
        eprintln!("wrote {} ({} rows)", path.display(), table.len());
        Ok(())
    }

    /// Appends the rows of each point in order up to the first failure, then
    /// writes the table.
    fn sweep(&self, mut table: Table, points: Vec<PointResult>) -> Result<(), CliError> {
        for p in points {
            match p {
                Ok(rows) => rows.into_iter().for_each(|r| table.push(r)),
                Err(e) => {
                    self.write(&table, false)?;
                    return Err(e);
                }
            }
        }
        self.write(&table, true)
    }

    fn stationary_at(&self, p: &MaserParams) -> Result<StationaryDistribution, CliError> {
        let tol = self.cfg.real("tail_tol")?;
        core(stationary(p, tol), || {
            format!("nex={} alpha={}", p.nex(), p.alpha())
        })
    }

    fn stationary(&self) -> Result<(), CliError> {
        let nex = self.cfg.real("nex")?;
        let alphas = self.cfg.grid("alpha")?.points();
        let laws = alphas
            .par_iter()
            .map(|&a| self.stationary_at(&self.params(nex, a)?))
            .collect::<Vec<_>>();
        let mut summary = Table::new(
            "stationary",
            &["alpha", "mean", "variance", "peaks", "dim", "tail_mass"],
        );
        let mut dist = Table::new("stationary_dist", &["alpha", "n", "prob"]);
        for (&a, law) in alphas.iter().zip(laws) {
            match law {
                Ok(ss) => {
                    summary.push(vec![
                        real(a),
                        real(ss.mean),
                        real(ss.variance),
                        ss.local_maxima().len().to_string(),
                        ss.dim.to_string(),
                        real(ss.tail_mass),
                    ]);
                    for (n, &pr) in ss.probs.iter().enumerate() {
                        dist.push(vec![real(a), n.to_string(), real(pr)]);
                    }
                }
                Err(e) => {
                    self.write(&summary, false)?;
                    self.write(&dist, false)?;
                    return Err(e);
                }
            }
        }
        self.write(&summary, true)?;
        self.write(&dist, true)
    }

    fn x_grid(&self) -> Result<GridSpec, CliError> {
        let x_min = self.cfg.real_or_auto("x_min")?.unwrap_or(0.0);
        let x_max = self.cfg.real_or_auto("x_max")?.unwrap_or(1.5);
        Ok(GridSpec {
            min: x_min,
            max: x_max,
            steps: self.cfg.count("x_steps")? as usize,
        })
    }

    fn potential(&self) -> Result<(), CliError> {
        let alpha = self.cfg.real("alpha")?;
        let xs = self.x_grid()?.points();
        let nexs = self.cfg.list("nex_list")?;
        let points = nexs
            .par_iter()
            .map(|&nex| -> PointResult {
                let p = self.params(nex, alpha)?;
                let ss = self.stationary_at(&p)?;
                let pot = core(effective_potential(&p, &ss), || {
                    format!("nex={nex} alpha={alpha}")
                })?;
                Ok(xs
                    .iter()
                    .filter_map(|&x| {
                        pot.rescaled_at(nex, x)
                            .map(|u| vec![real(nex), real(alpha), real(x), real(u)])
                    })
                    .collect())
            })
            .collect();
        self.sweep(
            Table::new("potential", &["nex", "alpha", "x", "u_rescaled"]),
            points,
        )?;
        let nu = self.cfg.real("nu")?;
        let limit = vec![
            core(limit_potential(alpha, nu, &xs), || format!("alpha={alpha}")).map(|v| {
                xs.iter()
                    .zip(v)
                    .map(|(&x, vx)| vec![real(alpha), real(x), real(vx)])
                    .collect()
            }),
        ];
        self.sweep(Table::new("potential_limit", &["alpha", "x", "v"]), limit)
    }

    fn trajectory(&self) -> Result<(), CliError> {
        let nex = self.cfg.real("nex")?;
        let alpha = self.cfg.real("alpha")?;
        let t_max = self.cfg.real("t_max")?;
        let initial = self.cfg.count("initial")? as usize;
        let seed = self.cfg.count("seed")?;
        let p = self.params(nex, alpha)?;
        let ss = self.stationary_at(&p)?;
        let threshold = match self.cfg.real_or_auto("threshold")? {
            Some(t) if t >= 0.0 => t.ceil() as usize,
            Some(t) => return Err(CliError::Usage(format!("threshold {t} is negative"))),
            None => auto_threshold(&ss),
        };
        let n_paths = self.cfg.count("n_paths")?;
        let paths = (0..n_paths)
            .into_par_iter()
            .map(|k| {
                core(simulate(&p, initial, t_max, seed.wrapping_add(k)), || {
                    format!("path={k} seed={}", seed.wrapping_add(k))
                })
            })
            .collect::<Vec<_>>();
        let mut jumps = Table::new(
            "trajectory",
            &["path", "time", "jump_type", "level", "count"],
        );
        let mut dwell = Table::new("dwell", &["path", "phase", "duration"]);
        for (k, path) in paths.into_iter().enumerate() {
            let traj = match path {
                Ok(t) => t,
                Err(e) => {
                    self.write(&jumps, false)?;
                    self.write(&dwell, false)?;
                    return Err(e);
                }
            };
            jumps.push(vec![
                k.to_string(),
                real(0.0),
                "0".into(),
                traj.initial.to_string(),
                "0".into(),
            ]);
            let mut count = 0u64;
            for e in &traj.events {
                if e.kind.code() == 1 {
                    count += 1;
                }
                jumps.push(vec![
                    k.to_string(),
                    real(e.time),
                    e.kind.code().to_string(),
                    e.level.to_string(),
                    count.to_string(),
                ]);
            }
            for d in dwell_times(&traj, threshold) {
                let phase = match d.phase {
                    Phase::Low => "low",
                    Phase::High => "high",
                };
                dwell.push(vec![k.to_string(), phase.into(), real(d.duration)]);
            }
        }
        self.write(&jumps, true)?;
        self.write(&dwell, true)?;
        eprintln!("dwell threshold: level {threshold}");

        let n_traj = self.cfg.count("n_traj")? as usize;
        if n_traj < 2 {
            return Ok(());
        }
        let t_ens = self.cfg.real("t_ensemble")?;
        let s_list = self.cfg.list("mgf_s")?;
        let mut table = Table::new("ensemble", &["s", "estimate", "standard_error", "exact"]);
        let point = || format!("ensemble nex={nex} alpha={alpha} t={t_ens}");
        let stats = match core(
            ensemble(&p, Initial::Level(initial), t_ens, n_traj, &s_list, seed),
            point,
        ) {
            Ok(s) => s,
            Err(e) => {
                self.write(&table, false)?;
                return Err(e);
            }
        };
        let dim = 2 * ss.dim.max(initial + 1);
        for est in &stats.mgf_estimates {
            let exact = match core(mgf_exact(&p, est.s, t_ens, initial, dim), || {
                format!("exact mgf s={}", est.s)
            }) {
                Ok(m) => m,
                Err(e) => {
                    self.write(&table, false)?;
                    return Err(e);
                }
            };
            if est.standard_error > 0.1 * est.estimate.abs() {
                eprintln!(
                    "warning: relative standard error {:.3} at s = {} exceeds 10%",
                    est.standard_error / est.estimate.abs(),
                    est.s
                );
            }
            table.push(vec![
                real(est.s),
                real(est.estimate),
                real(est.standard_error),
                real(exact.value),
            ]);
        }
        self.write(&table, true)
    }

    fn spectral_rows(&self, nex: f64, alpha: f64, s: f64, lead: bool) -> PointResult {
        let p = self.params(nex, alpha)?;
        let rel_tol = self.cfg.real("rel_tol")?;
        let point = || format!("nex={nex} alpha={alpha} s={s}");
        let r = core(spectral_bound(&p, s, rel_tol), point)?;
        if !r.converged {
            return Err(CliError::Numerical {
                message: format!("spectral bound not converged at dim {}", r.dim_used),
                point: point(),
            });
        }
        let mut row = vec![
            real(alpha),
            real(s),
            real(r.lambda_s),
            real(r.dlambda_ds),
            real(r.gap),
        ];
        row.push(r.dim_used.to_string());
        row.push(bool_cell(r.converged));
        if lead {
            row.insert(0, real(nex));
        }
        Ok(vec![row])
    }

    fn grid(&self) -> Result<(), CliError> {
        let nex = self.cfg.real("nex")?;
        let alphas = self.cfg.grid("alpha")?.points();
        let ss = self.cfg.grid("s")?.points();
        let pts: Vec<(f64, f64)> = alphas
            .iter()
            .flat_map(|&a| ss.iter().map(move |&s| (a, s)))
            .collect();
        let points = pts
            .par_iter()
            .map(|&(a, s)| self.spectral_rows(nex, a, s, false))
            .collect();
        let header = [
            "alpha",
            "s",
            "lambda",
            "dlambda_ds",
            "gap",
            "dim_used",
            "converged",
        ];
        self.sweep(Table::new("grid", &header), points)
    }

    fn zoom(&self) -> Result<(), CliError> {
        let alpha = self.cfg.real("alpha")?;
        let ss = self.cfg.grid("s")?.points();
        let nexs = self.cfg.list("nex_list")?;
        let pts: Vec<(f64, f64)> = nexs
            .iter()
            .flat_map(|&n| ss.iter().map(move |&s| (n, s)))
            .collect();
        let points = pts
            .par_iter()
            .map(|&(n, s)| self.spectral_rows(n, alpha, s, true))
            .collect();
        let header = [
            "nex",
            "alpha",
            "s",
            "lambda",
            "dlambda_ds",
            "gap",
            "dim_used",
            "converged",
        ];
        self.sweep(Table::new("zoom", &header), points)
    }

    fn spectrum(&self) -> Result<(), CliError> {
        let nex = self.cfg.real("nex")?;
        let s = self.cfg.real("s")?;
        let rel_tol = self.cfg.real("rel_tol")?;
        let count = self.cfg.count("n_eigs")? as usize;
        let alphas = self.cfg.grid("alpha")?.points();
        let points = alphas
            .par_iter()
            .map(|&a| -> PointResult {
                let p = self.params(nex, a)?;
                let point = || format!("nex={nex} alpha={a} s={s}");
                let dim = core(spectral_bound(&p, s, rel_tol), point)?.dim_used;
                let eigs = core(leading_spectrum(&p, s, dim, count), point)?;
                Ok(eigs
                    .iter()
                    .enumerate()
                    .map(|(k, &e)| vec![real(a), k.to_string(), real(e), dim.to_string()])
                    .collect())
            })
            .collect();
        self.sweep(
            Table::new("spectrum", &["alpha", "k", "eigenvalue", "dim_used"]),
            points,
        )
    }

    fn cumulants(&self) -> Result<(), CliError> {
        let k_max = self.cfg.count("k_max")? as usize;
        let alphas = self.cfg.grid("alpha")?.points();
        let nexs = self.cfg.list("nex_list")?;
        let pts: Vec<(f64, f64)> = nexs
            .iter()
            .flat_map(|&n| alphas.iter().map(move |&a| (n, a)))
            .collect();
        let points = pts
            .par_iter()
            .map(|&(nex, a)| -> PointResult {
                let p = self.params(nex, a)?;
                let ss = self.stationary_at(&p)?;
                let c = core(cumulants(&p, k_max), || format!("nex={nex} alpha={a}"))?;
                let lost = c.digits_lost.iter().copied().fold(0.0, f64::max);
                Ok(vec![vec![
                    real(nex),
                    real(a),
                    real(ss.mean),
                    real(ss.variance),
                    real(ss.variance / nex),
                    real(c.m),
                    real(c.v),
                    real(c.v / nex.powf(1.6)),
                    real(lost),
                ]])
            })
            .collect();
        let header = [
            "nex",
            "alpha",
            "photon_mean",
            "photon_variance",
            "photon_variance_rescaled",
            "m",
            "v",
            "v_rescaled",
            "digits_lost",
        ];
        self.sweep(Table::new("cumulants", &header), points)
    }

    fn ldp(&self) -> Result<(), CliError> {
        let nex = self.cfg.real("nex")?;
        let alpha = self.cfg.real("alpha")?;
        let s_max = self.cfg.real("s_window")?;
        let p = self.params(nex, alpha)?;
        let src = SpectralScgf::with_tolerance(p, self.cfg.real("rel_tol")?);
        let point = |what: &str| format!("nex={nex} alpha={alpha} {what}");
        let x_min = match self.cfg.real_or_auto("x_min")? {
            Some(x) => x,
            None => core(src.dlambda(-s_max), || point("s=-s_window"))?,
        };
        let x_max = match self.cfg.real_or_auto("x_max")? {
            Some(x) => x,
            None => core(src.dlambda(s_max), || point("s=s_window"))?,
        };
        if x_min > x_max {
            return Err(CliError::Usage(format!(
                "x range [{x_min}, {x_max}] is empty"
            )));
        }
        let xs = GridSpec {
            min: x_min,
            max: x_max,
            steps: self.cfg.count("x_steps")? as usize,
        }
        .points();
        let opts = LdpOptions {
            s_max,
            ..LdpOptions::default()
        };
        let mut rates = Table::new("ldp", &["x", "rate", "s_star", "residual", "attainable"]);
        let mut clt = Table::new("ldp_clt", &["m", "v", "s_max"]);
        let t = match core(rate_function_from(&src, &xs, opts), || {
            point("rate function")
        }) {
            Ok(t) => t,
            Err(e) => {
                self.write(&rates, false)?;
                self.write(&clt, false)?;
                return Err(e);
            }
        };
        for pt in &t.points {
            rates.push(vec![
                real(pt.x),
                opt_cell(pt.rate),
                opt_cell(pt.s_star),
                opt_cell(pt.residual),
                bool_cell(pt.attainable()),
            ]);
        }
        clt.push(vec![real(t.m), real(t.v), real(t.s_max)]);
        self.write(&rates, true)?;
        self.write(&clt, true)
    }

    fn validate(&self) -> Result<(), CliError> {
        let checks = validation::run_all(self.cfg.count("seed")?);
        let mut table = Table::new("validate", &["check", "passed", "detail"]);
        for c in &checks {
            println!(
                "{} {:>2} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                c.name,
                c.detail
            );
            table.push(vec![
                format!("{}_{}", c.id, c.name),
                bool_cell(c.passed),
                format!("\"{}\"", c.detail.replace('"', "'")),
            ]);
        }
        self.write(&table, true)?;
        match checks.iter().find(|c| !c.passed) {
            None => Ok(()),
            Some(c) => Err(CliError::Numerical {
                message: c.detail.clone(),
                point: format!("check {} ({})", c.id, c.name),
            }),
        }
    }
}

/// Least likely level between the outermost maxima of a bimodal law, else
/// the rounded mean.
fn auto_threshold(ss: &StationaryDistribution) -> usize {
    let peaks = ss.local_maxima();
    match (peaks.first(), peaks.last()) {
        (Some(&a), Some(&b)) if b > a => (a..=b)
            .min_by(|&i, &j| ss.probs[i].total_cmp(&ss.probs[j]))
            .unwrap_or(a),
        _ => ss.mean.round() as usize,
    }
}
