//! Subcommand implementations; each writes its report to `out`.

use crate::config::ToolkitConfig;
use clap::{Args, Subcommand, ValueEnum};
use dlaperf::cachemodel::{
    combined_estimates, export_estimates, measure_timings, Association, CacheModelConfig,
    TimingTable,
};
use dlaperf::kernels::{BufferStore, Call, Kernel, MachineSpec};
use dlaperf::modelgen::{
    default_config, grid_points, required_cases, sampleable_domain, Case, Domain, GridKind,
    KernelModel, ModelSet, Sampler,
};
use dlaperf::predictor::{
    self, block_sizes, call_sequence, export_predictions, optimize_blocksize, rank_algorithms,
    Estimator, FnEstimator, Invocation, Problem,
};
use dlaperf::sampler::{
    backend_from_spec, parse_call_list, run_plan, Backend, MeasurementPlan,
    Statistic, SummaryStats, WarmPolicy,
};
use dlaperf::table::write_rows;
use dlaperf::tensor::{
    describe, generate_algorithms, parse_spec, rank_contractions, render_code, TensorConfig,
};
use dlaperf::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

/// Resolved settings shared by all commands.
pub struct Env {
    pub cfg: ToolkitConfig,
    pub delimiter: u8,
}

impl Env {
    fn machine(&self) -> Result<MachineSpec> {
        MachineSpec::load(&self.cfg.machine)
    }

    fn backend(&self, machine: &MachineSpec) -> Result<Box<dyn Backend>> {
        backend_from_spec(&self.cfg.backend, machine, self.cfg.threads, self.cfg.seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    DoubleExecution,
    ExplicitWarm,
    Cold,
}

impl From<Policy> for WarmPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::DoubleExecution => WarmPolicy::DoubleExecution,
            Policy::ExplicitWarm => WarmPolicy::ExplicitWarm,
            Policy::Cold => WarmPolicy::Cold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Stat {
    Min,
    Median,
    Max,
    Mean,
    Std,
}

impl From<Stat> for Statistic {
    fn from(s: Stat) -> Self {
        match s {
            Stat::Min => Statistic::Min,
            Stat::Median => Statistic::Median,
            Stat::Max => Statistic::Max,
            Stat::Mean => Statistic::Mean,
            Stat::Std => Statistic::Std,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    Cartesian,
    Chebyshev,
}

#[derive(Args)]
pub struct MeasureArgs {
    /// Call list: buffer declarations, calls and `go` lines.
    pub file: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    #[arg(long, value_enum, default_value_t = Policy::DoubleExecution)]
    pub policy: Policy,
    /// Run repetitions in order instead of shuffled.
    #[arg(long)]
    pub no_shuffle: bool,
}

/// One line per call: the call, then min, median, max, mean and std in seconds.
pub fn measure(env: &Env, a: &MeasureArgs, out: &mut dyn Write) -> Result<()> {
    let script = parse_call_list(&std::fs::read_to_string(&a.file)?)?;
    for w in &script.warnings {
        eprintln!("warning: {w}");
    }
    let calls: Vec<Call> = script.batches.concat();
    if calls.is_empty() {
        return Ok(());
    }
    let machine = env.machine()?;
    let mut backend = env.backend(&machine)?;
    let mut store = BufferStore::new();
    if backend.needs_memory() {
        script.allocate(&mut store, env.cfg.seed);
    }
    let mut plan = MeasurementPlan::new(calls, a.repetitions);
    plan.shuffle = !a.no_shuffle;
    plan.warm_policy = a.policy.into();
    plan.seed = env.cfg.seed;
    let result = run_plan(&plan, backend.as_mut(), &mut store)?;
    let d = env.delimiter as char;
    for (call, s) in plan.calls.iter().zip(result.summaries()?) {
        writeln!(out, "{call}{d}{}{d}{}{d}{}{d}{}{d}{}", s.min, s.median, s.max, s.mean, s.std)?;
    }
    Ok(())
}

fn parse_interval(s: &str) -> std::result::Result<(usize, usize), String> {
    let (l, u) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let l = l.parse().map_err(|_| format!("bad lower bound in `{s}`"))?;
    let u = u.parse().map_err(|_| format!("bad upper bound in `{s}`"))?;
    Ok((l, u))
}

#[derive(Args)]
pub struct ProblemArgs {
    #[arg(long)]
    pub n: usize,
    /// Rows of rectangular problems; defaults to `n`.
    #[arg(long)]
    pub m: Option<usize>,
}

impl ProblemArgs {
    fn problem(&self) -> Problem {
        Problem {
            m: self.m.unwrap_or(self.n),
            n: self.n,
        }
    }
}

#[derive(Args)]
pub struct ModelGenArgs {
    /// Kernel to model; with `--flags`, `--scalars` and `--domain`.
    #[arg(long, required_unless_present = "algorithm", conflicts_with = "algorithm")]
    pub kernel: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub flags: Vec<String>,
    /// Scalar arguments; each defaults to 1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub scalars: Vec<f64>,
    /// One `lo:hi` size interval per kernel size argument.
    #[arg(long, value_delimiter = ',', value_parser = parse_interval)]
    pub domain: Vec<(usize, usize)>,
    /// Model every case called by this algorithm instead of one kernel.
    #[arg(long, requires_all = ["n", "b"])]
    pub algorithm: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub overfitting: Option<u32>,
    #[arg(long)]
    pub oversampling: Option<usize>,
    /// Target relative error of each leaf.
    #[arg(long)]
    pub error_bound: Option<f64>,
    #[arg(long)]
    pub min_width: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long, value_enum)]
    pub grid: Option<Grid>,
    /// Statistic whose error drives refinement.
    #[arg(long, value_enum)]
    pub statistic: Option<Stat>,
    #[arg(long, value_enum)]
    pub policy: Option<Policy>,
}

fn model_jobs(a: &ModelGenArgs) -> Result<BTreeMap<Kernel, Vec<(Case, Domain)>>> {
    let mut jobs: BTreeMap<Kernel, Vec<(Case, Domain)>> = BTreeMap::new();
    if let Some(name) = &a.algorithm {
        let problem = Problem {
            m: a.m.or(a.n).unwrap_or_default(),
            n: a.n.unwrap_or_default(),
        };
        let calls: Vec<Call> = call_sequence(name, problem, a.b.unwrap_or_default())?
            .into_iter()
            .filter_map(|i| match i {
                Invocation::Kernel(c) => Some(c),
                Invocation::Inline { .. } => None,
            })
            .collect();
        for ((k, case), dom) in required_cases(&calls) {
            jobs.entry(k).or_default().push((case, dom));
        }
        return Ok(jobs);
    }
    let kernel = Kernel::from_name(a.kernel.as_deref().unwrap_or_default())?;
    let flags: Vec<&str> = a.flags.iter().map(String::as_str).collect();
    let scalars = if a.scalars.is_empty() {
        vec![1.0; kernel.descriptor().scalar_positions().len()]
    } else {
        a.scalars.clone()
    };
    if a.domain.is_empty() {
        return Err(Error::Config("--domain is required with --kernel".into()));
    }
    let case = Case::new(kernel, &flags, &scalars)?;
    jobs.insert(kernel, vec![(case, Domain::new(a.domain.clone())?)]);
    Ok(jobs)
}

/// Writes one model file per kernel, merging cases into a compatible
/// existing file.
pub fn model_gen(env: &Env, a: &ModelGenArgs, out: &mut dyn Write) -> Result<()> {
    let jobs = model_jobs(a)?;
    let machine = env.machine()?;
    let mut backend = env.backend(&machine)?;
    std::fs::create_dir_all(&env.cfg.models_dir)?;
    for (kernel, cases) in jobs {
        let mut config = default_config(kernel, env.cfg.threads);
        if let Some(v) = a.overfitting {
            config.overfitting = v;
        }
        if let Some(v) = a.oversampling {
            config.oversampling = v;
        }
        if let Some(v) = a.error_bound {
            config.error_bound = v;
        }
        if let Some(v) = a.min_width {
            config.min_width = v;
        }
        if let Some(v) = a.repetitions {
            config.repetitions = v;
        }
        if let Some(g) = a.grid {
            config.grid = match g {
                Grid::Cartesian => GridKind::Cartesian,
                Grid::Chebyshev => GridKind::Chebyshev,
            };
        }
        if let Some(s) = a.statistic {
            config.reference_statistic = s.into();
        }
        if let Some(p) = a.policy {
            config.warm_policy = p.into();
        }
        // Bounding boxes of an algorithm's calls can be too narrow to sample.
        let cases = if a.algorithm.is_some() {
            cases
                .into_iter()
                .map(|(c, d)| Ok((c.clone(), sampleable_domain(&config, kernel, &c, &d)?)))
                .collect::<Result<Vec<_>>>()?
        } else {
            cases
        };
        let mut sampler = Sampler::new(backend.as_mut(), env.cfg.seed);
        let model = KernelModel::generate(
            &mut sampler,
            &machine.name,
            env.cfg.threads,
            kernel,
            &cases,
            &config,
            env.cfg.seed,
        )?;
        let path = env.cfg.models_dir.join(format!("{}.json", kernel.name()));
        let model = match KernelModel::load(&path) {
            Ok(mut old)
                if old.machine == model.machine
                    && old.backend == model.backend
                    && old.threads == model.threads
                    && old.config == model.config
                    && old.seed == model.seed =>
            {
                for pm in model.cases {
                    old.cases.retain(|c| c.case != pm.case);
                    old.cases.push(pm);
                }
                old.cases.sort_by(|x, y| x.case.cmp(&y.case));
                old
            }
            _ => model,
        };
        model.save(&path)?;
        let leaves: usize = model.cases.iter().map(|c| c.leaves.len()).sum();
        writeln!(
            out,
            "{}: {} cases, {} leaves",
            path.display(),
            model.cases.len(),
            leaves
        )?;
    }
    Ok(())
}

#[derive(Args)]
pub struct EstimatorArgs {
    /// Estimate each call as its flops divided by this rate (flops/s)
    /// instead of using stored models.
    #[arg(long)]
    pub flop_rate: Option<f64>,
}

fn estimator(env: &Env, a: &EstimatorArgs) -> Result<Box<dyn Estimator>> {
    match a.flop_rate {
        Some(r) if r > 0.0 && r.is_finite() => Ok(Box::new(FnEstimator(move |c: &Call| {
            SummaryStats::constant(c.flop_count().unwrap_or(0) as f64 / r)
        }))),
        Some(_) => Err(Error::Config("flop rate must be positive".into())),
        None => {
            let set = ModelSet::load_dir(&env.cfg.models_dir)?;
            if set.models.is_empty() {
                return Err(Error::ModelFile(format!(
                    "no kernel models in {}",
                    env.cfg.models_dir.display()
                )));
            }
            Ok(Box::new(set))
        }
    }
}

#[derive(Args)]
pub struct PredictArgs {
    pub algorithm: String,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Block size.
    #[arg(long)]
    pub b: usize,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

pub fn predict(env: &Env, a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let est = estimator(env, &a.estimator)?;
    let machine = env.machine()?;
    let p = predictor::predict(
        est.as_ref(),
        &a.algorithm,
        a.problem.problem(),
        a.b,
        Some((&machine, env.cfg.threads)),
    )?;
    if p.unmodeled > 0 {
        eprintln!("warning: {} invocations without a model were estimated as 0", p.unmodeled);
    }
    export_predictions(out, &[p], env.delimiter)
}

#[derive(Args)]
pub struct RankArgs {
    #[arg(required = true)]
    pub algorithms: Vec<String>,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub b: usize,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Serialize)]
struct RankRow {
    /// Equal runtimes share a rank.
    rank: usize,
    algorithm: String,
    runtime_s: f64,
    perf_flops_s: f64,
}

/// Runtimes this close count as a tie.
const TIE_TOLERANCE: f64 = 1e-9;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

pub fn rank(env: &Env, a: &RankArgs, out: &mut dyn Write) -> Result<()> {
    let est = estimator(env, &a.estimator)?;
    let names: Vec<&str> = a.algorithms.iter().map(String::as_str).collect();
    let preds = rank_algorithms(est.as_ref(), &names, a.problem.problem(), a.b)?;
    let mut rows: Vec<RankRow> = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        let rank = match rows.last() {
            Some(prev) if tied(prev.runtime_s, p.runtime.median) => prev.rank,
            _ => i + 1,
        };
        rows.push(RankRow {
            rank,
            algorithm: p.algorithm.clone(),
            runtime_s: p.runtime.median,
            perf_flops_s: p.performance.median,
        });
    }
    write_rows(out, &rows, env.delimiter)
}

/// Block size range `lo:hi:step` with `lo <= hi`.
fn parse_range(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<usize>().map_err(|_| format!("bad number `{t}` in `{s}`"));
    let (lo, hi, step) = match parts.as_slice() {
        [l, h] => (num(l)?, num(h)?, 1),
        [l, h, st] => (num(l)?, num(h)?, num(st)?),
        _ => return Err(format!("expected lo:hi[:step], got `{s}`")),
    };
    if lo == 0 || step == 0 || lo > hi {
        return Err(format!("empty block size range `{s}`"));
    }
    Ok((lo, hi, step))
}

#[derive(Args)]
pub struct BlocksizeArgs {
    pub algorithm: String,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Candidate block sizes `lo:hi[:step]`.
    #[arg(long, value_parser = parse_range)]
    pub range: (usize, usize, usize),
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Serialize)]
struct BlockRow {
    b: usize,
    runtime_s: f64,
    perf_flops_s: f64,
    optimal: bool,
}

pub fn blocksize(env: &Env, a: &BlocksizeArgs, out: &mut dyn Write) -> Result<()> {
    let est = estimator(env, &a.estimator)?;
    let (lo, hi, step) = a.range;
    let candidates = block_sizes(lo, hi, step)?;
    let (best, preds) = optimize_blocksize(est.as_ref(), &a.algorithm, a.problem.problem(), &candidates)?;
    let rows: Vec<BlockRow> = preds
        .iter()
        .map(|p| BlockRow {
            b: p.block_size,
            runtime_s: p.runtime.median,
            perf_flops_s: p.performance.median,
            optimal: p.block_size == best,
        })
        .collect();
    write_rows(out, &rows, env.delimiter)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TensorFormat {
    /// One row per algorithm.
    Table,
    /// Loops, kernel, slices and copies of each algorithm.
    Json,
    /// C-like loop nests.
    Code,
}

#[derive(Args)]
pub struct TensorGenArgs {
    /// Contraction such as `C[a,b,c]=A[a,i]*B[i,b,c] a=400 b=400 c=400 i=8`.
    pub contraction: String,
    #[arg(long, value_enum, default_value_t = TensorFormat::Table)]
    pub format: TensorFormat,
}

#[derive(Serialize)]
struct TensorRow {
    name: String,
    kernel: &'static str,
    loops: String,
    copies: usize,
    flops: u64,
}

/// Extents missing from the contraction text default to this value.
const DEFAULT_EXTENT: usize = 8;

fn contraction(text: &str) -> Result<dlaperf::tensor::ContractionSpec> {
    let bound = text.split_once('=').is_some_and(|(_, rest)| rest.contains('='));
    if bound {
        return parse_spec(text);
    }
    let mut full = text.to_string();
    for i in bracket_indices(text)? {
        full.push_str(&format!(" {i}={DEFAULT_EXTENT}"));
    }
    parse_spec(&full)
}

/// Index letters inside the brackets of a contraction.
fn bracket_indices(text: &str) -> Result<Vec<char>> {
    let mut out = Vec::new();
    let mut inside = false;
    for c in text.chars() {
        match c {
            '[' => inside = true,
            ']' => inside = false,
            c if inside && c.is_alphabetic() && !out.contains(&c) => out.push(c),
            _ => {}
        }
    }
    if out.is_empty() {
        return Err(Error::Contraction(format!("no indices in `{text}`")));
    }
    Ok(out)
}

pub fn tensor_gen(env: &Env, a: &TensorGenArgs, out: &mut dyn Write) -> Result<()> {
    let spec = contraction(&a.contraction)?;
    let algs = generate_algorithms(&spec);
    match a.format {
        TensorFormat::Table => {
            let rows = algs
                .iter()
                .map(|g| {
                    Ok(TensorRow {
                        name: g.name.clone(),
                        kernel: g.kernel.name(),
                        loops: g.loops.iter().collect(),
                        copies: g.copies.len(),
                        flops: g.flops(&spec)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_rows(out, &rows, env.delimiter)
        }
        TensorFormat::Json => {
            let list = algs.iter().map(|g| describe(g, &spec)).collect::<Result<Vec<_>>>()?;
            writeln!(out, "{}", serde_json::to_string_pretty(&list)?)?;
            Ok(())
        }
        TensorFormat::Code => {
            for g in &algs {
                writeln!(out, "{}", render_code(g, &spec))?;
            }
            Ok(())
        }
    }
}

#[derive(Args)]
pub struct TensorPredictArgs {
    pub contraction: String,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    /// Minimum share of executions for a first-iteration benchmark.
    #[arg(long, default_value_t = 0.01)]
    pub first_iteration_threshold: f64,
}

#[derive(Serialize)]
struct TensorPredictionRow {
    rank: usize,
    name: String,
    kernel: &'static str,
    runtime_s: f64,
    flops: u64,
    perf_flops_s: f64,
}

pub fn tensor_predict(env: &Env, a: &TensorPredictArgs, out: &mut dyn Write) -> Result<()> {
    let spec = contraction(&a.contraction)?;
    let machine = env.machine()?;
    let mut backend = env.backend(&machine)?;
    let config = TensorConfig {
        line_doubles: env.cfg.line_doubles,
        first_iteration_threshold: a.first_iteration_threshold,
        ..TensorConfig::default()
    };
    let ranked = rank_contractions(
        backend.as_mut(),
        &spec,
        &machine,
        &config,
        a.repetitions,
        env.cfg.seed,
    )?;
    let rows: Vec<TensorPredictionRow> = ranked
        .into_iter()
        .enumerate()
        .map(|(i, p)| TensorPredictionRow {
            rank: i + 1,
            name: p.name,
            kernel: p.kernel.name(),
            runtime_s: p.runtime,
            flops: p.flops,
            perf_flops_s: p.performance,
        })
        .collect();
    write_rows(out, &rows, env.delimiter)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AssociationKind {
    /// In cache exactly when the access distance is below the cache size.
    Hard,
    /// Gradual transition around the cache size.
    Smooth,
}

#[derive(Args)]
pub struct CacheEstimateArgs {
    pub algorithm: String,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub b: usize,
    /// In- and out-of-cache timings (JSON); measured when absent.
    #[arg(long)]
    pub timings: Option<PathBuf>,
    /// Store the measured timings here.
    #[arg(long)]
    pub save_timings: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AssociationKind::Smooth)]
    pub association: AssociationKind,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
}

pub fn cache_estimate(env: &Env, a: &CacheEstimateArgs, out: &mut dyn Write) -> Result<()> {
    let machine = env.machine()?;
    let problem = a.problem.problem();
    let timings = match &a.timings {
        Some(p) => TimingTable::from_json(&std::fs::read_to_string(p)?)?,
        None => {
            let calls: Vec<Call> = call_sequence(&a.algorithm, problem, a.b)?
                .into_iter()
                .filter_map(|i| i.call().cloned())
                .collect();
            let mut backend = env.backend(&machine)?;
            measure_timings(backend.as_mut(), &calls, a.repetitions, env.cfg.seed)?
        }
    };
    if let Some(p) = &a.save_timings {
        std::fs::write(p, timings.to_json()?)?;
    }
    let config = CacheModelConfig {
        association: match a.association {
            AssociationKind::Hard => Association::Hard,
            AssociationKind::Smooth => Association::Smooth(env.cfg.smoothing),
        },
        ..CacheModelConfig::default()
    };
    let est = combined_estimates(&a.algorithm, problem, a.b, &timings, &machine, &config)?;
    export_estimates(out, &est, env.delimiter)
}

#[derive(Args)]
pub struct ExportArgs {
    #[command(subcommand)]
    pub what: ExportKind,
}

#[derive(Subcommand)]
pub enum ExportKind {
    /// Model estimates on a Cartesian grid over each modeled case.
    Model {
        #[arg(long)]
        kernel: String,
        /// Grid points per size dimension.
        #[arg(long, default_value_t = 8)]
        points: usize,
    },
    /// The call sequence of a blocked algorithm with per-call flops.
    Calls {
        algorithm: String,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        b: usize,
    },
}

#[derive(Serialize)]
struct ModelRow {
    case: String,
    sizes: String,
    min: f64,
    median: f64,
    max: f64,
    mean: f64,
    std: f64,
}

#[derive(Serialize)]
struct CallRow {
    index: usize,
    kernel: String,
    call: String,
    flops: u64,
}

pub fn export(env: &Env, a: &ExportArgs, out: &mut dyn Write) -> Result<()> {
    match &a.what {
        ExportKind::Model { kernel, points } => {
            let kernel = Kernel::from_name(kernel)?;
            let set = ModelSet::load_dir(&env.cfg.models_dir)?;
            let model = set
                .get(kernel)
                .ok_or_else(|| Error::Unmodeled(kernel.name().into()))?;
            let mut rows = Vec::new();
            for pm in &model.cases {
                let counts = vec![*points; pm.root.dims()];
                for x in grid_points(&pm.root, &counts, GridKind::Cartesian)? {
                    let s = pm.eval(kernel, &x)?;
                    rows.push(ModelRow {
                        case: pm.case.label(),
                        sizes: x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
                        min: s.min,
                        median: s.median,
                        max: s.max,
                        mean: s.mean,
                        std: s.std,
                    });
                }
            }
            write_rows(out, &rows, env.delimiter)
        }
        ExportKind::Calls { algorithm, problem, b } => {
            let rows = call_sequence(algorithm, problem.problem(), *b)?
                .iter()
                .enumerate()
                .map(|(i, inv)| {
                    Ok(CallRow {
                        index: i,
                        kernel: match inv {
                            Invocation::Kernel(c) => c.kernel.name().to_string(),
                            Invocation::Inline { .. } => "inline".to_string(),
                        },
                        call: inv.to_string(),
                        flops: inv.flops()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_rows(out, &rows, env.delimiter)
        }
    }
}
