//! Command-line front end: configuration, the four subcommands and their
//! output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, BiaxialityStats, CircleLoop, DefectReport, RadialSample};
use crate::construct::{self, CompareReport};
use crate::dump::{self, Encoding};
use crate::error::{Error, Result};
use crate::grid::{build_grid, BoundarySpec, Domain, Field};
use crate::manifold;
use crate::potential::derive_params;
use crate::solver::{self, EnergyBreakdown, LevelSummary, SolveOptions, WarmStartKind};
use crate::vtk;

#[derive(Debug, Parser)]
#[command(name = "ldg2d", version, about = "2D Landau-de Gennes Q-tensor minimizers and defect diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the energy for one epsilon.
    Solve(CommonArgs),
    /// Solve over a decreasing list of epsilons and fit E against |log eps|.
    Sweep(CommonArgs),
    /// Diagnostics of a field dump.
    Analyze(AnalyzeArgs),
    /// Biaxial versus melting core energies.
    Compare(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overrides `solver.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defect threshold on the distance to N (overrides `output.delta`).
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub encoding: Encoding,
    pub vtk: bool,
    pub delta: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            encoding: Encoding::F64le,
            vtk: false,
            delta: analysis::DEFAULT_DELTA,
        }
    }
}

fn default_boundary() -> BoundarySpec {
    BoundarySpec::geodesic(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub domain: Domain,
    pub grid: GridConfig,
    pub material: MaterialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default = "default_boundary")]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Config::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain
            .validate()
            .map_err(|e| Error::config("domain", e.to_string()))?;
        if self.grid.n < 16 {
            return Err(Error::config("grid.n", "need at least 16 cells per axis"));
        }
        derive_params(self.material.a, self.material.b, self.material.c)
            .map_err(|e| Error::config("material", e.to_string()))?;
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::config("epsilon", "must be positive"));
            }
        }
        if let Some(list) = &self.epsilons {
            if list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(Error::config("epsilons", "entries must be positive"));
            }
        }
        self.boundary
            .validate(&self.domain)
            .map_err(|e| Error::config("boundary", e.to_string()))?;
        self.solver.validate()?;
        if !(self.output.delta > 0.0) {
            return Err(Error::config("output.delta", "must be positive"));
        }
        Ok(())
    }

    fn single_epsilon(&self) -> Result<f64> {
        self.epsilon
            .ok_or_else(|| Error::config("epsilon", "required for this command"))
    }

    fn sweep_epsilons(&self) -> Result<&[f64]> {
        let list = self
            .epsilons
            .as_deref()
            .ok_or_else(|| Error::config("epsilons", "required for sweep"))?;
        if list.len() < 3 {
            return Err(Error::config("epsilons", "a fit needs at least 3 values"));
        }
        if list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("epsilons", "values must be strictly decreasing"));
        }
        Ok(list)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub epsilon: f64,
    pub n: usize,
    pub material: MaterialConfig,
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub biaxiality: BiaxialityStats,
    pub defects: DefectReport,
    pub converged: bool,
    pub iterations: usize,
    pub final_grad_sup: f64,
    pub levels: Vec<LevelSummary>,
    pub warm_start: WarmStartKind,
    pub seed: u64,
    pub wall_time_s: f64,
}

/// Solves one epsilon and writes `<stem>.dump`, `<stem>_iterations.csv`,
/// `<stem>_summary.json` (and `<stem>.vtk` if enabled) into `out`.
pub fn solve_one(cfg: &Config, epsilon: f64, delta: f64, out: &Path, stem: &str) -> Result<SolveSummary> {
    let clock = Instant::now();
    let m = cfg.material;
    let params = derive_params(m.a, m.b, m.c)?;
    let grid = Arc::new(build_grid(cfg.domain, cfg.grid.n)?);
    let outcome = solver::solve(grid, epsilon, params, &cfg.boundary, &cfg.solver)?;
    if !outcome.log.converged {
        warn!(
            "eps = {epsilon}: not converged after {} iterations (grad sup {:e})",
            outcome.log.iterations, outcome.log.final_grad_sup
        );
    }
    let field = outcome.field;
    let summary = SolveSummary {
        epsilon,
        n: cfg.grid.n,
        material: m,
        t: params.t,
        energy: solver::energy(&field),
        biaxiality: analysis::biaxiality_stats(&field, analysis::DEFAULT_TOL_BETA),
        defects: analysis::detect_defects(&field, delta),
        converged: outcome.log.converged,
        iterations: outcome.log.iterations,
        final_grad_sup: outcome.log.final_grad_sup,
        levels: outcome.levels,
        warm_start: outcome.warm_start,
        seed: cfg.solver.seed,
        wall_time_s: clock.elapsed().as_secs_f64(),
    };
    dump::save_field(&field, cfg.output.encoding, &out.join(format!("{stem}.dump")))?;
    dump::write_atomic(&out.join(format!("{stem}_iterations.csv")), |w| outcome.log.write_csv(w))?;
    write_json(&out.join(format!("{stem}_summary.json")), &summary)?;
    if cfg.output.vtk {
        dump::write_atomic(&out.join(format!("{stem}.vtk")), |w| vtk::write_vtk(&field, w))?;
    }
    info!(
        "eps = {epsilon}: E = {:.8} ({} iterations, {:.1}s)",
        summary.energy.total, summary.iterations, summary.wall_time_s
    );
    Ok(summary)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    dump::write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

fn prepare(args: &CommonArgs) -> Result<(Config, PathBuf, f64)> {
    let mut cfg = Config::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.solver.seed = seed;
    }
    let delta = args.delta.unwrap_or(cfg.output.delta);
    if !(delta > 0.0) {
        return Err(Error::config("--delta", "must be positive"));
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    create_dir(&out)?;
    Ok((cfg, out, delta))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

pub fn cmd_solve(args: &CommonArgs) -> Result<SolveSummary> {
    let (cfg, out, delta) = prepare(args)?;
    let eps = cfg.single_epsilon()?;
    solve_one(&cfg, eps, delta, &out, "field")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub e_total: f64,
    pub e_dirichlet: f64,
    pub e_potential: f64,
    pub max_beta: f64,
    pub min_abs_q: f64,
    pub defect_count: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `E_total` against `|log ε|`.
    pub slope: f64,
    pub intercept: f64,
    pub kappa_star: f64,
    /// `slope / κ*`.
    pub slope_ratio: f64,
}

/// Least-squares line `y = slope x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn sweep_report(rows: Vec<SweepRow>) -> SweepReport {
    let x: Vec<f64> = rows.iter().map(|r| r.epsilon.ln().abs()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.e_total).collect();
    let (slope, intercept) = fit_line(&x, &y);
    let kappa_star = manifold::kappa_star();
    SweepReport {
        rows,
        slope,
        intercept,
        kappa_star,
        slope_ratio: slope / kappa_star,
    }
}

pub fn cmd_sweep(args: &CommonArgs) -> Result<SweepReport> {
    let (cfg, out, delta) = prepare(args)?;
    let eps_list = cfg.sweep_epsilons()?.to_vec();
    let jobs = args.jobs.unwrap_or(eps_list.len()).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config("--jobs", e.to_string()))?;
    let summaries: Vec<SolveSummary> = pool.install(|| {
        eps_list
            .par_iter()
            .enumerate()
            .map(|(k, &eps)| solve_one(&cfg, eps, delta, &out, &format!("eps{k}")))
            .collect::<Result<_>>()
    })?;
    let rows = summaries
        .iter()
        .map(|s| SweepRow {
            epsilon: s.epsilon,
            e_total: s.energy.total,
            e_dirichlet: s.energy.dirichlet,
            e_potential: s.energy.potential,
            max_beta: s.biaxiality.max_beta,
            min_abs_q: s.biaxiality.min_norm,
            defect_count: s.defects.count,
            converged: s.converged,
        })
        .collect();
    let report = sweep_report(rows);
    dump::write_atomic(&out.join("sweep.csv"), |w| {
        writeln!(w, "epsilon,E_total,E_dirichlet,E_potential,max_beta,min_absQ,defect_count")?;
        for r in &report.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.epsilon, r.e_total, r.e_dirichlet, r.e_potential, r.max_beta, r.min_abs_q, r.defect_count
            )?;
        }
        Ok(())
    })?;
    write_json(&out.join("sweep.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRadius {
    pub rho: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub epsilon: f64,
    pub n: usize,
    pub defects: DefectReport,
    pub biaxiality: BiaxialityStats,
    pub center: [f64; 2],
    pub kappa_star: f64,
    pub profile: Vec<RadialSample>,
    pub skipped: Vec<SkippedRadius>,
    pub pohozaev_radius: f64,
    pub pohozaev_residual: Option<f64>,
    pub loops: Vec<CircleLoop>,
}

/// Diagnostics of a loaded field: defects, biaxiality, the radial profile
/// on ρ log-spaced from 5ε to R/2, the Pohozaev balance on B(center, R/2)
/// and circle loops at the extreme admissible radii.
pub fn analyze_field(field: &Field, delta: f64) -> AnalysisReport {
    let defects = analysis::detect_defects(field, delta);
    let biaxiality = analysis::biaxiality_stats(field, analysis::DEFAULT_TOL_BETA);
    let center = analysis::dominant_center(field, &defects);
    let radius = field.grid.domain.radius;
    let (lo, hi) = (5.0 * field.epsilon, 0.5 * radius);
    let count = 12;
    let rhos: Vec<f64> = if lo < hi {
        (0..count)
            .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
            .collect()
    } else {
        vec![hi]
    };
    let mut profile = Vec::new();
    let mut skipped = Vec::new();
    for &rho in &rhos {
        match analysis::radial_profile(field, center, &[rho]) {
            Ok(p) => profile.extend(p.samples),
            Err(e) => skipped.push(SkippedRadius {
                rho,
                reason: e.to_string(),
            }),
        }
    }
    let pohozaev_residual = analysis::pohozaev_residual(field, center, hi).ok();
    let mut loops = Vec::new();
    let extremes = [profile.first().map(|s| s.rho), profile.last().map(|s| s.rho)];
    for rho in extremes.into_iter().flatten() {
        if loops.iter().any(|l: &CircleLoop| l.rho == rho) {
            continue;
        }
        if let Ok(l) = analysis::circle_loop_diagnostics(field, center, rho) {
            loops.push(l);
        }
    }
    AnalysisReport {
        epsilon: field.epsilon,
        n: field.grid.n,
        defects,
        biaxiality,
        center,
        kappa_star: manifold::kappa_star(),
        profile,
        skipped,
        pohozaev_radius: hi,
        pohozaev_residual,
        loops,
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<AnalysisReport> {
    let delta = args.delta.unwrap_or(analysis::DEFAULT_DELTA);
    if !(delta > 0.0) {
        return Err(Error::config("--delta", "must be positive"));
    }
    let field = dump::load_field(&args.dump)?;
    let report = analyze_field(&field, delta);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.dump.parent().map(Path::to_path_buf).unwrap_or_default());
    create_dir(&out)?;
    write_json(&out.join("analysis.json"), &report)?;
    dump::write_atomic(&out.join("profile.csv"), |w| {
        analysis::RadialProfile {
            center: report.center,
            kappa_star: report.kappa_star,
            samples: report.profile.clone(),
        }
        .write_csv(w)
    })?;
    Ok(report)
}

pub fn cmd_compare(args: &CommonArgs) -> Result<CompareReport> {
    let (cfg, out, _) = prepare(args)?;
    let eps = cfg.single_epsilon()?;
    let m = cfg.material;
    let params = derive_params(m.a, m.b, m.c)?;
    let grid = Arc::new(build_grid(cfg.domain, cfg.grid.n)?);
    let report = construct::compare_cores(grid, eps, params)?;
    if report.asserted && !report.within_tolerance {
        warn!(
            "core gap {:.4} differs from the predicted {:.4} by more than 35%",
            report.gap, report.predicted_gap
        );
    }
    write_json(&out.join("compare.json"), &report)?;
    Ok(report)
}

/// Runs a parsed command and prints its JSON result on stdout.
pub fn run(cli: &Cli) -> Result<()> {
    let json = match &cli.command {
        Command::Solve(a) => serde_json::to_string_pretty(&cmd_solve(a)?),
        Command::Sweep(a) => serde_json::to_string_pretty(&cmd_sweep(a)?),
        Command::Analyze(a) => serde_json::to_string_pretty(&cmd_analyze(a)?),
        Command::Compare(a) => serde_json::to_string_pretty(&cmd_compare(a)?),
    }
    .map_err(|e| Error::io("serializing result", e.into()))?;
    println!("{json}");
    Ok(())
}
