//! Experiment harness behind the `opsplit` binary.
//!
//! A run configuration is a TOML file:
//!
//! ```toml
//! solvers = ["alg1", "alg2", "alg3", "alg4"]
//! presets = ["type-I", "type-II"]      # or "imaging", or "custom" with a [custom] table
//! inner_iters = [1]
//! eps_list = [1e-4, 1e-8]
//! output_dir = "results/fused-lasso"
//! seed = 7                              # optional, overrides experiment.seed
//!
//! [experiment]
//! name = "fused-lasso"
//! m = 100
//! n = 200
//! ```
//!
//! Every `(preset, solver, J, eps)` cell writes
//! `<output_dir>/<preset>/<experiment>_<solver>_J<J>_eps<eps>.csv` with columns
//! `iter,objective,rel_change,snr,nmsd[,ssim]`, and `<output_dir>/summary.csv`
//! gets one row per cell. Cells that hit the iteration cap report `MAXITER` in
//! the `iterations` column. Floats are written with 17 significant digits and
//! every file is written to a temporary name and renamed into place.
//!
//! Exit statuses: 0 ok, 1 configuration error, 2 divergence, 3 verification
//! failure, 4 unwritable output, 5 unknown solver id, 6 preset incompatible
//! with a solver.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::problems::ExperimentSpec;
use crate::solvers::{solve, ParamPreset, SolveTrace, SolverConfig, SolverId, SplitProblem, StepFamily};
use crate::verify::{self, Check, Suite};

/// Overrides `output_dir` from the configuration file when set.
pub const OUTPUT_DIR_ENV: &str = "OPSPLIT_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Ok,
    Config,
    Divergence,
    Verification,
    Io,
    UnknownSolver,
    IncompatiblePreset,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            Self::Ok => 0,
            Self::Config => 1,
            Self::Divergence => 2,
            Self::Verification => 3,
            Self::Io => 4,
            Self::UnknownSolver => 5,
            Self::IncompatiblePreset => 6,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    fn new(status: ExitStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => ExitStatus::Io,
            Error::Divergence { .. } => ExitStatus::Divergence,
            _ => ExitStatus::Config,
        };
        Self::new(status, e.to_string())
    }
}

/// Explicit steps for the `custom` preset. Fields a solver needs but that are
/// missing make the pairing invalid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSteps {
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub solvers: Vec<String>,
    pub presets: Vec<String>,
    #[serde(default = "default_inner_iters")]
    pub inner_iters: Vec<usize>,
    pub eps_list: Vec<f64>,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Outer iteration cap; the experiment's own default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomSteps>,
    pub experiment: ExperimentSpec,
}

fn default_inner_iters() -> Vec<usize> {
    vec![1]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PresetChoice {
    Named(ParamPreset),
    Custom,
}

impl PresetChoice {
    pub fn name(self) -> &'static str {
        match self {
            Self::Named(p) => p.name(),
            Self::Custom => "custom",
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::new(ExitStatus::Config, format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::new(ExitStatus::Config, format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Paper-scale solver and tolerance sweeps on desk-scale instances.
    pub fn default_for(experiment: &str) -> Result<Self, CliError> {
        let spec = ExperimentSpec::default_for(experiment)?;
        let all = ["alg1", "alg2", "alg3", "alg4"].map(String::from).to_vec();
        let (presets, inner_iters, eps_list) = match spec {
            ExperimentSpec::FusedLasso(_) => (vec!["type-I", "type-II"], vec![1], vec![1e-4, 1e-8]),
            ExperimentSpec::ConstrainedTvCt(_) => (vec!["imaging"], vec![1, 2, 10], vec![1e-4, 1e-6, 1e-8]),
            ExperimentSpec::LrtvSr(_) => (vec!["imaging"], vec![1, 2, 10], vec![1e-6, 1e-8]),
        };
        Ok(Self {
            solvers: all,
            presets: presets.into_iter().map(String::from).collect(),
            inner_iters,
            eps_list,
            output_dir: PathBuf::from("results").join(spec.name()),
            seed: None,
            max_outer: None,
            custom: None,
            experiment: spec,
        })
    }

    fn parsed_solvers(&self) -> Result<Vec<SolverId>, CliError> {
        if self.solvers.is_empty() {
            return Err(CliError::new(ExitStatus::Config, "at least one solver is required"));
        }
        self.solvers
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|e: Error| CliError::new(ExitStatus::UnknownSolver, e.to_string()))
            })
            .collect()
    }

    fn parsed_presets(&self) -> Result<Vec<PresetChoice>, CliError> {
        if self.presets.is_empty() {
            return Err(CliError::new(ExitStatus::Config, "at least one preset is required"));
        }
        self.presets
            .iter()
            .map(|s| match s.as_str() {
                "custom" => match self.custom {
                    Some(_) => Ok(PresetChoice::Custom),
                    None => Err(CliError::new(ExitStatus::Config, "preset 'custom' needs a [custom] table")),
                },
                other => other.parse().map(PresetChoice::Named).map_err(CliError::from),
            })
            .collect()
    }

    fn check_sweeps(&self) -> Result<(), CliError> {
        if self.eps_list.is_empty() || self.eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(CliError::new(ExitStatus::Config, "eps_list must be non-empty with every eps > 0"));
        }
        if self.inner_iters.is_empty() || self.inner_iters.contains(&0) {
            return Err(CliError::new(ExitStatus::Config, "inner_iters must be non-empty with every J >= 1"));
        }
        if self.max_outer == Some(0) {
            return Err(CliError::new(ExitStatus::Config, "max_outer must be >= 1"));
        }
        Ok(())
    }
}

/// Output directory: the environment override when present, else the config's.
pub fn resolve_output_dir(config_dir: &Path, env_override: Option<std::ffi::OsString>) -> PathBuf {
    match env_override {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => config_dir.to_path_buf(),
    }
}

/// One `(preset, solver, J, eps)` combination.
#[derive(Clone, Debug)]
pub struct Cell {
    pub preset: PresetChoice,
    pub solver: SolverId,
    pub inner_iters: usize,
    pub eps: f64,
    pub config: SolverConfig,
}

impl Cell {
    pub fn trace_file_name(&self, experiment: &str) -> String {
        format!("{experiment}_{}_J{}_eps{:e}.csv", self.solver, self.inner_iters, self.eps)
    }
}

fn cell_config(
    p: &SplitProblem,
    preset: PresetChoice,
    custom: Option<&CustomSteps>,
    solver: SolverId,
) -> Result<SolverConfig, CliError> {
    match preset {
        PresetChoice::Named(named) => Ok(SolverConfig::from_preset(p, named)),
        PresetChoice::Custom => {
            let steps = custom.cloned().unwrap_or_default();
            let family = solver.family();
            let missing = match family {
                StepFamily::Dual if steps.lambda.is_none() => Some("lambda"),
                StepFamily::PrimalDual if steps.sigma.is_none() || steps.tau.is_none() => Some("sigma and tau"),
                _ => None,
            };
            if let Some(what) = missing {
                return Err(CliError::new(
                    ExitStatus::IncompatiblePreset,
                    format!("custom preset gives no {what}, which solver '{solver}' requires"),
                ));
            }
            let mut c = SolverConfig::from_preset(p, ParamPreset::TypeII);
            c.param_preset = None;
            c.gamma = steps.gamma.unwrap_or(c.gamma);
            c.lambda = steps.lambda.unwrap_or(f64::NAN);
            c.sigma = steps.sigma.unwrap_or(f64::NAN);
            c.tau = steps.tau.unwrap_or(f64::NAN);
            Ok(c)
        }
    }
}

fn validate_cell(p: &SplitProblem, cell: &Cell) -> Result<(), CliError> {
    let result = match cell.solver.family() {
        StepFamily::Dual => cell.config.validate_dual(p),
        StepFamily::PrimalDual => cell.config.validate_primal_dual(p),
        StepFamily::GammaOnly => Ok(()),
    };
    result.map_err(|e| {
        CliError::new(
            ExitStatus::IncompatiblePreset,
            format!("preset '{}' with solver '{}': {e}", cell.preset.name(), cell.solver),
        )
    })
}

/// Expands the sweep in a fixed order: preset, solver, J, eps.
pub fn plan_cells(config: &RunConfig, p: &SplitProblem) -> Result<Vec<Cell>, CliError> {
    config.check_sweeps()?;
    let solvers = config.parsed_solvers()?;
    let presets = config.parsed_presets()?;
    let mut cells = Vec::new();
    for &preset in &presets {
        for &solver in &solvers {
            let base = cell_config(p, preset, config.custom.as_ref(), solver)?;
            for &j in &config.inner_iters {
                for &eps in &config.eps_list {
                    let mut c = base.clone().with_inner_iters(j).with_eps(eps);
                    if let Some(cap) = config.max_outer {
                        c = c.with_max_outer(cap);
                    }
                    let cell = Cell {
                        preset,
                        solver,
                        inner_iters: j,
                        eps,
                        config: c,
                    };
                    validate_cell(p, &cell)?;
                    cells.push(cell);
                }
            }
        }
    }
    Ok(cells)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellStatus {
    Converged,
    MaxIter,
    Diverged,
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub cell: Cell,
    pub status: CellStatus,
    pub iterations: usize,
    pub final_objective: f64,
    pub nmsd: Option<f64>,
    pub snr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub trace_path: Option<PathBuf>,
    pub message: Option<String>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub summary_path: PathBuf,
    pub outcomes: Vec<CellOutcome>,
}

impl RunReport {
    pub fn status(&self) -> ExitStatus {
        if self.outcomes.iter().any(|o| o.status == CellStatus::Diverged) {
            ExitStatus::Divergence
        } else {
            ExitStatus::Ok
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::new(ExitStatus::Io, format!("cannot write {}: {e}", path.display()));
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn trace_csv(trace: &SolveTrace, with_ssim: bool) -> String {
    let mut out = String::from("iter,objective,rel_change,snr,nmsd");
    if with_ssim {
        out.push_str(",ssim");
    }
    out.push('\n');
    for r in &trace.records {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            r.k,
            num(r.objective),
            num(r.rel_change),
            opt_num(r.snr),
            opt_num(r.nmsd)
        );
        if with_ssim {
            let _ = write!(out, ",{}", opt_num(r.ssim));
        }
        out.push('\n');
    }
    out
}

pub const SUMMARY_HEADER: &str =
    "experiment,preset,solver,inner_iters,eps,iterations,final_objective,nmsd,snr_db,ssim,status";

pub fn summary_csv(experiment: &str, outcomes: &[CellOutcome]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for o in outcomes {
        let iterations = match o.status {
            CellStatus::MaxIter => "MAXITER".to_string(),
            _ => o.iterations.to_string(),
        };
        let status = match o.status {
            CellStatus::Converged => "converged",
            CellStatus::MaxIter => "maxiter",
            CellStatus::Diverged => "diverged",
        };
        let _ = writeln!(
            out,
            "{experiment},{},{},{},{:e},{iterations},{},{},{},{},{status}",
            o.cell.preset.name(),
            o.cell.solver,
            o.cell.inner_iters,
            o.cell.eps,
            num(o.final_objective),
            opt_num(o.nmsd),
            opt_num(o.snr_db),
            opt_num(o.ssim),
        );
    }
    out
}

fn run_cell(p: &SplitProblem, experiment: &str, dir: &Path, cell: Cell) -> Result<CellOutcome, CliError> {
    match solve(cell.solver, p, &cell.config) {
        Ok(trace) => {
            let metrics = p.metrics(&trace.final_x);
            let path = dir.join(cell.preset.name()).join(cell.trace_file_name(experiment));
            write_atomic(&path, &trace_csv(&trace, p.image_shape.is_some()))?;
            Ok(CellOutcome {
                status: if trace.converged {
                    CellStatus::Converged
                } else {
                    CellStatus::MaxIter
                },
                iterations: trace.total_outer,
                final_objective: trace.final_objective(),
                nmsd: metrics.map(|m| m.nmsd),
                snr_db: metrics.map(|m| m.snr_db),
                ssim: metrics.and_then(|m| m.ssim),
                trace_path: Some(path),
                message: None,
                cell,
            })
        }
        Err(Error::Divergence { iteration, reason }) => Ok(CellOutcome {
            status: CellStatus::Diverged,
            iterations: iteration,
            final_objective: f64::NAN,
            nmsd: None,
            snr_db: None,
            ssim: None,
            trace_path: None,
            message: Some(reason),
            cell,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Builds the instance, runs every cell (in parallel, each single-threaded)
/// and writes traces plus `summary.csv` under `output_dir`.
pub fn run(config: &RunConfig, output_dir: &Path) -> Result<RunReport, CliError> {
    let mut spec = config.experiment.clone();
    if let Some(seed) = config.seed {
        spec.set_seed(seed);
    }
    let p = spec.build()?;
    let cells = plan_cells(config, &p)?;
    let experiment = spec.name();

    let presets: std::collections::BTreeSet<&str> = cells.iter().map(|c| c.preset.name()).collect();
    for preset in presets {
        let dir = output_dir.join(preset);
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::new(ExitStatus::Io, format!("cannot create {}: {e}", dir.display())))?;
    }

    let outcomes: Vec<CellOutcome> = cells
        .into_par_iter()
        .map(|cell| run_cell(&p, experiment, output_dir, cell))
        .collect::<Result<_, _>>()?;

    let summary_path = output_dir.join("summary.csv");
    write_atomic(&summary_path, &summary_csv(experiment, &outcomes))?;
    Ok(RunReport {
        output_dir: output_dir.to_path_buf(),
        summary_path,
        outcomes,
    })
}

/// Runs a self-check suite; the status is `Verification` when any check fails.
pub fn run_verify(suite: &str, seed: u64) -> Result<(Vec<Check>, ExitStatus), CliError> {
    let suite: Suite = suite.parse()?;
    let checks = verify::run_suite(suite, seed);
    let status = if checks.iter().all(|c| c.passed) {
        ExitStatus::Ok
    } else {
        ExitStatus::Verification
    };
    Ok((checks, status))
}

pub fn print_default_config(experiment: &str) -> Result<String, CliError> {
    let config = RunConfig::default_for(experiment)?;
    Ok(format!(
        "# opsplit run configuration for '{experiment}'.\n\
         # presets: type-I, type-II, imaging, or custom with a [custom] table (gamma, lambda, sigma, tau).\n\
         # Noise levels are variances.\n\n{}",
        config.to_toml()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> RunConfig {
        let mut c = RunConfig::default_for("fused-lasso").unwrap();
        if let ExperimentSpec::FusedLasso(s) = &mut c.experiment {
            s.m = 20;
            s.n = 40;
        }
        c.eps_list = vec![1e-4];
        c.output_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn default_configs_round_trip() {
        for name in ["fused-lasso", "constrained-tv-ct", "lrtv-sr"] {
            let text = print_default_config(name).unwrap();
            let back = RunConfig::from_toml(&text).unwrap();
            assert_eq!(back, RunConfig::default_for(name).unwrap());
        }
        assert_eq!(print_default_config("mri").unwrap_err().status, ExitStatus::Config);
    }

    #[test]
    fn fused_lasso_default_has_sixteen_cells() {
        let c = RunConfig::default_for("fused-lasso").unwrap();
        let p = c.experiment.build().unwrap();
        assert_eq!(plan_cells(&c, &p).unwrap().len(), 16);
    }

    #[test]
    fn config_errors_have_distinct_statuses() {
        let dir = tempfile::tempdir().unwrap();
        let base = small_config(dir.path());
        let p = base.experiment.build().unwrap();

        let mut c = base.clone();
        c.solvers.clear();
        assert_eq!(plan_cells(&c, &p).unwrap_err().status, ExitStatus::Config);

        let mut c = base.clone();
        c.solvers = vec!["fista".into()];
        assert_eq!(plan_cells(&c, &p).unwrap_err().status, ExitStatus::UnknownSolver);

        let mut c = base.clone();
        c.presets = vec!["custom".into()];
        c.custom = Some(CustomSteps {
            lambda: Some(0.4),
            ..Default::default()
        });
        assert_eq!(plan_cells(&c, &p).unwrap_err().status, ExitStatus::IncompatiblePreset);

        let mut c = base;
        c.eps_list = vec![0.0];
        assert_eq!(plan_cells(&c, &p).unwrap_err().status, ExitStatus::Config);
    }

    #[test]
    fn env_override_wins() {
        let cfg = Path::new("from-config");
        assert_eq!(resolve_output_dir(cfg, None), cfg);
        assert_eq!(resolve_output_dir(cfg, Some("".into())), cfg);
        assert_eq!(resolve_output_dir(cfg, Some("elsewhere".into())), Path::new("elsewhere"));
    }

    #[test]
    fn run_writes_traces_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let c = small_config(dir.path());
        let report = run(&c, dir.path()).unwrap();
        assert_eq!(report.outcomes.len(), 8);
        let summary = fs::read_to_string(&report.summary_path).unwrap();
        assert_eq!(summary.lines().count(), 9);
        assert!(summary.starts_with(SUMMARY_HEADER));
        let trace = dir.path().join("type-II").join("fused-lasso_alg3_J1_eps1e-4.csv");
        let text = fs::read_to_string(trace).unwrap();
        assert!(text.starts_with("iter,objective,rel_change,snr,nmsd\n"));
        assert!(!dir.path().join("summary.csv.tmp").exists());
    }

    #[test]
    fn maxiter_marker() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path());
        c.max_outer = Some(3);
        c.solvers = vec!["alg1".into()];
        c.presets = vec!["type-I".into()];
        let report = run(&c, dir.path()).unwrap();
        let summary = fs::read_to_string(report.summary_path).unwrap();
        let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[5], "MAXITER");
        assert_eq!(row[10], "maxiter");
    }

    #[test]
    fn unwritable_output_is_io_status() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("occupied");
        fs::write(&file, "x").unwrap();
        let c = small_config(&file);
        assert_eq!(run(&c, &file).unwrap_err().status, ExitStatus::Io);
    }
}
