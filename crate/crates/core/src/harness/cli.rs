//! `rbsde` command line.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 solver failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::calibration::{calibrate, catalog_sweep, estimate_entries, SweepSettings};
use super::config::{read_config, OracleKind, RunConfig, SolveMode};
use super::convergence::convergence_study;
use super::oracles::{american_dp_oracle, exhaustive_stopping_oracle, AmericanPut};
use super::output::{write_csv, write_csv_to, ResultRow, RowSink};
use crate::analysis::{
    beta_metric, compare_solutions, d_norm, hp_norm, occupation_check, sp_norm, tanaka_check, EstimateId, Relation,
};
use crate::bsde::solve_bsde;
use crate::error::{Error, Result};
use crate::lattice::sample_paths;
use crate::picard::picard_solve;
use crate::problem::scenario::scenario_defaults;
use crate::problem::{scenario, validate_assumptions, ProbeConfig, ProbeStatus, Problem};
use crate::reflect::{skorokhod_report, solve_penalized, solve_projected, SolutionTriple};

#[derive(Debug, Parser)]
#[command(name = "rbsde", version, about = "Lattice laboratory for reflected BSDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem and report norms and diagnostics.
    Solve(SolveArgs),
    /// Penalty-level sweep and lattice refinement study.
    Sweep(SweepArgs),
    /// Block Picard iteration over z.
    Picard(PicardArgs),
    /// A priori estimate ratios.
    Estimates(EstimateArgs),
    /// Comparison of a problem with a perturbed copy.
    Compare(CompareArgs),
    /// Discrete Tanaka and occupation identities on sampled paths.
    Tanaka(TanakaArgs),
    /// Independent reference values.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Scenario parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Path sample size when enumeration is too large.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long = "beta-list", value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Penalty level for `--mode penalized`.
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    Projected,
    Penalized,
    Bsde,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Lattice sizes for a projected `Y₀` refinement study.
    #[arg(long, value_delimiter = ',')]
    pub refine: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct PicardArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub chat: Option<f64>,
    #[arg(long)]
    pub stop_tol: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Exponent of the H^p stopping distance.
    #[arg(long)]
    pub picard_p: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "estimate", value_delimiter = ',')]
    pub estimates: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Run the catalog sweep and print calibrated constants.
    #[arg(long)]
    pub calibrate: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    pub xi_offset: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub driver_offset: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub obstacle_offset: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TanakaArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub grid_levels: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub kind: Option<OracleArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum OracleArg {
    AmericanDp,
    Stopping,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value for `{k}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.scenario {
            cfg.scenario = s.clone();
        }
        if let Some(n) = self.steps {
            cfg.steps = n;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        for (k, v) in &self.params {
            cfg.params.insert(k.clone(), *v);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(c) = self.samples {
            cfg.sample_count = c;
        }
        if let Some(b) = &self.betas {
            cfg.betas = b.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        Ok(cfg)
    }

    fn run_id(&self, command: &str, cfg: &RunConfig) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("{command}-{}-{}-{}", cfg.scenario, cfg.steps, cfg.seed))
    }
}

fn problem_of(cfg: &RunConfig) -> Result<Problem> {
    scenario(&cfg.scenario, &cfg.params, cfg.steps, cfg.p)
}

fn triple_rows(sink: &mut RowSink, problem: &Problem, t: &SolutionTriple, cfg: &RunConfig) -> Result<()> {
    let l = problem.lattice();
    let mode = cfg.norm_mode();
    sink.exact("y0", t.y.get(0, 0));
    sink.entry("sp_norm_y", &sp_norm(l, &t.y, cfg.p, mode)?);
    sink.entry("hp_norm_z", &hp_norm(l, &t.z, cfg.p, mode)?);
    let k_mean: f64 = (0..t.dk.last_step() + 1).map(|i| l.expect_slice(t.dk.slice(i), i)).sum();
    sink.exact("mean_k_terminal", k_mean);
    sink.exact("d_norm_y", d_norm(l, &t.y)?);
    let sk = skorokhod_report(t, problem)?;
    sink.exact("skorokhod_residual", sk.residual);
    sink.exact("skorokhod_pairing", sk.pairing);
    sink.exact("max_obstacle_violation", sk.max_violation);
    for &b in &cfg.betas {
        sink.entry(&format!("beta_metric[{b}]"), &beta_metric(l, &t.y, b, mode)?);
    }
    Ok(())
}

fn assumption_rows(sink: &mut RowSink, problem: &Problem, cfg: &RunConfig) {
    let probe = ProbeConfig {
        seed: cfg.seed,
        ..ProbeConfig::default()
    };
    for e in validate_assumptions(problem, &probe).entries {
        let ok = !matches!(e.status, ProbeStatus::Fail);
        sink.push(&format!("assumption:{}", e.id), if ok { 1.0 } else { 0.0 }, None, "probe")
            .with_note(format!("{:?}", e.status).to_lowercase());
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<Vec<ResultRow>> {
    let mut cfg = a.common.config()?;
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Projected => SolveMode::Projected,
            ModeArg::Penalized => SolveMode::Penalized,
            ModeArg::Bsde => SolveMode::Bsde,
        };
    }
    if let Some(l) = a.level {
        cfg.level = l;
    }
    cfg.validate()?;
    let problem = problem_of(&cfg)?;
    let mut sink = RowSink::new(a.common.run_id("solve", &cfg), cfg.scenario.clone(), cfg.steps);
    assumption_rows(&mut sink, &problem, &cfg);
    match cfg.mode {
        SolveMode::Bsde => {
            let pair = solve_bsde(&problem, &cfg.step)?;
            let l = problem.lattice();
            sink.exact("y0", pair.y.get(0, 0));
            sink.entry("sp_norm_y", &sp_norm(l, &pair.y, cfg.p, cfg.norm_mode())?);
            sink.entry("hp_norm_z", &hp_norm(l, &pair.z, cfg.p, cfg.norm_mode())?);
            sink.exact("d_norm_y", d_norm(l, &pair.y)?);
        }
        SolveMode::Projected => {
            let t = solve_projected(&problem, &cfg.step)?;
            triple_rows(&mut sink, &problem, &t, &cfg)?;
        }
        SolveMode::Penalized => {
            let t = solve_penalized(&problem, cfg.level, &cfg.step)?;
            triple_rows(&mut sink, &problem, &t, &cfg)?;
            for r in sink.rows.iter_mut().filter(|r| !r.quantity.starts_with("assumption:")) {
                r.level = Some(cfg.level);
            }
        }
    }
    Ok(sink.rows)
}

fn cmd_sweep(a: &SweepArgs) -> Result<Vec<ResultRow>> {
    let mut cfg = a.common.config()?;
    if let Some(l) = &a.levels {
        cfg.levels = l.clone();
    }
    if let Some(r) = &a.refine {
        cfg.refine = r.clone();
        // `--refine` alone runs only the refinement study
        if a.levels.is_none() && a.common.config.is_none() {
            cfg.levels.clear();
        }
    }
    cfg.validate()?;
    Ok(convergence_study(&cfg, &a.common.run_id("sweep", &cfg))?.rows)
}

fn cmd_picard(a: &PicardArgs) -> Result<Vec<ResultRow>> {
    let mut cfg = a.common.config()?;
    if let Some(c) = a.chat {
        cfg.picard.chat = c;
    }
    if let Some(t) = a.stop_tol {
        cfg.picard.stop_tol = t;
    }
    if let Some(m) = a.max_sweeps {
        cfg.picard.max_sweeps = m;
    }
    if let Some(p) = a.picard_p {
        cfg.picard.p = p;
    }
    cfg.picard.norm_mode = cfg.norm_mode();
    cfg.picard.step = cfg.step;
    cfg.validate()?;
    let problem = problem_of(&cfg)?;
    let mut sink = RowSink::new(a.common.run_id("picard", &cfg), cfg.scenario.clone(), cfg.steps);
    let (t, trace) = picard_solve(&problem, &cfg.picard)?;
    for (k, b) in trace.schedule.iter().enumerate() {
        sink.exact("block_boundary", *b as f64).at_sweep(k);
    }
    for r in &trace.rows {
        let note = format!("block {} [{}, {}]", r.block, r.start, r.end);
        sink.entry("hp_diff", &r.hp_diff).at_sweep(r.sweep).with_note(note.clone());
        sink.entry("sp_diff", &r.sp_diff).at_sweep(r.sweep).with_note(note.clone());
        if let Some(ratio) = r.ratio {
            sink.exact("hp_ratio", ratio).at_sweep(r.sweep).with_note(note);
        }
    }
    let projected = solve_projected(&problem, &cfg.step)?;
    sink.exact("y0", t.y.get(0, 0));
    sink.exact("y0_projected", projected.y.get(0, 0));
    sink.exact("y0_gap", (t.y.get(0, 0) - projected.y.get(0, 0)).abs());
    for &b in &cfg.betas {
        sink.entry(&format!("beta_metric[{b}]"), &beta_metric(problem.lattice(), &t.y, b, cfg.norm_mode())?);
    }
    Ok(sink.rows)
}

fn estimate_rows(sink: &mut RowSink, entries: &[super::calibration::SweepEntry]) {
    for e in entries {
        let r = &e.report;
        let note = format!("{} tau={} exponent={}", r.scenario, r.tau, r.exponent);
        let method = r.method.to_string();
        for (q, v, se) in [
            ("lhs", r.lhs, r.lhs_stderr),
            ("rhs", r.rhs, r.rhs_stderr),
            ("ratio", r.ratio, None),
        ] {
            let row = sink.push(&format!("{}:{q}", r.id), v, se, &method);
            row.note = note.clone();
            row.level = e.level;
        }
    }
}

fn cmd_estimates(a: &EstimateArgs) -> Result<Vec<ResultRow>> {
    let cfg = a.common.config()?;
    cfg.validate()?;
    let mut settings = SweepSettings {
        steps: cfg.steps,
        p: cfg.p,
        ..SweepSettings::default()
    };
    if !cfg.betas.is_empty() {
        settings.betas = cfg.betas.clone();
    }
    if let Some(l) = &a.levels {
        settings.levels = l.clone();
    }
    let mut sink = RowSink::new(a.common.run_id("estimates", &cfg), cfg.scenario.clone(), cfg.steps);
    if a.calibrate {
        sink = RowSink::new(
            a.common.run_id.clone().unwrap_or_else(|| format!("calibrate-{}-{}", cfg.steps, cfg.seed)),
            "catalog",
            cfg.steps,
        );
        let entries = catalog_sweep(&settings, cfg.norm_mode())?;
        estimate_rows(&mut sink, &entries);
        for (id, c) in calibrate(&entries) {
            sink.exact(&format!("{id}:c_emp"), c);
        }
        return Ok(sink.rows);
    }
    let ids: Vec<EstimateId> = match &a.estimates {
        Some(list) => list.iter().map(|s| s.parse()).collect::<Result<_>>()?,
        None => cfg.estimates.clone(),
    };
    let problem = problem_of(&cfg)?;
    let entries = estimate_entries(&problem, &settings, &ids, cfg.norm_mode(), &cfg.step)?;
    estimate_rows(&mut sink, &entries);
    Ok(sink.rows)
}

fn cmd_compare(a: &CompareArgs) -> Result<Vec<ResultRow>> {
    let mut cfg = a.common.config()?;
    if let Some(v) = a.xi_offset {
        cfg.offsets.xi = v;
    }
    if let Some(v) = a.driver_offset {
        cfg.offsets.driver = v;
    }
    if let Some(v) = a.obstacle_offset {
        cfg.offsets.obstacle = v;
    }
    cfg.validate()?;
    let o = cfg.offsets;
    if o.xi < 0.0 || o.driver < 0.0 || o.obstacle < 0.0 {
        return Err(Error::Config("offsets must be nonnegative so the pair is ordered".into()));
    }
    let base = problem_of(&cfg)?;
    let raised = base.perturbed(o.xi, o.driver, o.obstacle)?;
    let a_t = solve_projected(&base, &cfg.step)?;
    let b_t = solve_projected(&raised, &cfg.step)?;
    let mut sink = RowSink::new(a.common.run_id("compare", &cfg), cfg.scenario.clone(), cfg.steps);
    let y = compare_solutions(&a_t, &b_t, Relation::YLe)?;
    sink.exact("y_order_violation", y.max_violation)
        .with_note(y.worst.map(|(i, j)| format!("worst node ({i}, {j})")).unwrap_or_default());
    if o.obstacle == 0.0 {
        let k = compare_solutions(&a_t, &b_t, Relation::DkGe)?;
        sink.exact("dk_order_violation", k.max_violation)
            .with_note(k.worst.map(|(i, j)| format!("worst node ({i}, {j})")).unwrap_or_default());
    }
    Ok(sink.rows)
}

fn cmd_tanaka(a: &TanakaArgs) -> Result<Vec<ResultRow>> {
    let mut cfg = a.common.config()?;
    if let Some(n) = a.paths {
        cfg.tanaka.paths = n;
    }
    if let Some(g) = &a.grid_levels {
        cfg.tanaka.grid_levels = g.clone();
    }
    cfg.validate()?;
    let lattice = crate::lattice::BinomialLattice::new(1.0, cfg.steps)?;
    let sample = sample_paths(&lattice, cfg.tanaka.paths.max(1), cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7a_6e61_6b61);
    let mut worst_identity = 0.0_f64;
    let mut worst_negativity = 0.0_f64;
    let mut occupation = vec![0.0_f64; cfg.tanaka.grid_levels.len()];
    for path in &sample.paths {
        let x = path.w_values(&lattice);
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let level = lo + (hi - lo) * rng.gen::<f64>();
        let r = tanaka_check(&x, level);
        worst_identity = worst_identity.max(r.identity_residual);
        worst_negativity = worst_negativity.min(r.max_negativity);
        for (slot, &g) in occupation.iter_mut().zip(&cfg.tanaka.grid_levels) {
            let o = occupation_check(&x, lattice.h(), g, |_| 2.0);
            *slot = slot.max(o.residual / o.occupation_side);
        }
    }
    let mut sink = RowSink::new(a.common.run_id("tanaka", &cfg), "lattice-paths", cfg.steps);
    sink.exact("tanaka_identity_residual", worst_identity);
    sink.exact("local_time_min_increment", worst_negativity);
    for (g, v) in cfg.tanaka.grid_levels.iter().zip(occupation) {
        sink.exact("occupation_relative_residual", v).with_note(format!("levels={g}"));
    }
    Ok(sink.rows)
}

fn cmd_oracle(a: &OracleArgs) -> Result<Vec<ResultRow>> {
    let mut cfg = a.common.config()?;
    if let Some(k) = a.kind {
        cfg.oracle = match k {
            OracleArg::AmericanDp => OracleKind::AmericanDp,
            OracleArg::Stopping => OracleKind::Stopping,
        };
    }
    cfg.validate()?;
    let mut sink = RowSink::new(a.common.run_id("oracle", &cfg), cfg.scenario.clone(), cfg.steps);
    match cfg.oracle {
        OracleKind::AmericanDp => {
            if cfg.scenario != "american-put" {
                return Err(Error::Config("american-dp oracle needs --scenario american-put".into()));
            }
            let mut v: std::collections::BTreeMap<&str, f64> = scenario_defaults(&cfg.scenario)?.into_iter().collect();
            for (k, x) in &cfg.params {
                match v.get_mut(k.as_str()) {
                    Some(slot) => *slot = *x,
                    None => return Err(Error::InvalidParameter(format!("american-put has no parameter `{k}`"))),
                }
            }
            let put = AmericanPut {
                r: v["r"],
                sigma: v["sigma"],
                x0: v["x0"],
                strike: v["strike"],
                horizon: v["T"],
                steps: cfg.steps,
            };
            sink.exact("american_dp_value", american_dp_oracle(&put)?);
        }
        OracleKind::Stopping => {
            let problem = problem_of(&cfg)?;
            sink.exact("stopping_value", exhaustive_stopping_oracle(&problem)?);
        }
    }
    Ok(sink.rows)
}

impl Cli {
    fn out_and_rows(&self) -> Result<(Option<PathBuf>, Vec<ResultRow>)> {
        let (common, rows) = match &self.command {
            Command::Solve(a) => (&a.common, cmd_solve(a)),
            Command::Sweep(a) => (&a.common, cmd_sweep(a)),
            Command::Picard(a) => (&a.common, cmd_picard(a)),
            Command::Estimates(a) => (&a.common, cmd_estimates(a)),
            Command::Compare(a) => (&a.common, cmd_compare(a)),
            Command::Tanaka(a) => (&a.common, cmd_tanaka(a)),
            Command::Oracle(a) => (&a.common, cmd_oracle(a)),
        };
        let rows = rows?;
        let out = match &common.out {
            Some(p) => Some(p.clone()),
            None => common.config()?.out,
        };
        Ok((out, rows))
    }

    /// Runs the parsed command and writes its CSV.
    pub fn execute(&self) -> Result<Vec<ResultRow>> {
        let (out, rows) = self.out_and_rows()?;
        match out {
            Some(path) => write_csv(&rows, &path)?,
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                write_csv_to(&rows, &mut lock)?;
                lock.flush()?;
            }
        }
        Ok(rows)
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.execute() {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("rbsde: {e}");
            e.exit_code()
        }
    }
}
