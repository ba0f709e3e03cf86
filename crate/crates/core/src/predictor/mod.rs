//! Runtime, performance and efficiency predictions for blocked algorithms.

mod algorithms;
mod emit;
mod report;
mod sylvester;

pub use algorithms::{Traversal, FACTORIZATIONS};
pub use emit::{Block, Emitter, Split, View};
pub use report::{export_predictions, PredictionRow};
pub use sylvester::{parse_plan, SylvPlan, SYLVESTER};

use crate::error::{Error, Result};
use crate::kernels::{flop_count, BufferStore, Call, Kernel, MachineSpec};
use crate::modelgen::{allocate_operands, ModelSet};
use crate::sampler::{summarize, Backend, Statistic, SummaryStats};
use std::fmt;

/// One element of an algorithm's call sequence.
#[derive(Clone, Debug, PartialEq)]
pub enum Invocation {
    Kernel(Call),
    /// Operation performed inline without a kernel; never modeled.
    Inline { label: String, rows: usize, cols: usize },
}

impl Invocation {
    pub fn call(&self) -> Option<&Call> {
        match self {
            Invocation::Kernel(c) => Some(c),
            Invocation::Inline { .. } => None,
        }
    }

    /// Flops of the invocation; an inline update costs one flop per element.
    pub fn flops(&self) -> Result<u64> {
        match self {
            Invocation::Kernel(c) => c.flop_count(),
            Invocation::Inline { rows, cols, .. } => Ok((rows * cols) as u64),
        }
    }
}

impl fmt::Display for Invocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Invocation::Kernel(c) => write!(f, "{c}"),
            Invocation::Inline { label, rows, cols } => write!(f, "inline {label} {rows} {cols}"),
        }
    }
}

/// Problem dimensions; square operations use `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Problem {
    pub m: usize,
    pub n: usize,
}

impl Problem {
    pub fn square(n: usize) -> Self {
        Problem { m: n, n }
    }
}

/// Names of all shipped algorithms.
pub fn algorithm_names() -> Vec<&'static str> {
    FACTORIZATIONS.iter().chain(SYLVESTER).copied().collect()
}

/// Whether the algorithm is known.
pub fn is_algorithm(name: &str) -> bool {
    algorithms::factorization(name).is_some() || parse_plan(name).is_some()
}

/// Traversal of an algorithm.
pub fn traversal(name: &str) -> Result<Traversal> {
    if let Some(f) = algorithms::factorization(name) {
        return Ok(f.traversal);
    }
    match parse_plan(name) {
        Some(SylvPlan::M1(_) | SylvPlan::M2(_)) => Ok(Traversal::Vertical),
        Some(SylvPlan::N1(_) | SylvPlan::N2(_)) => Ok(Traversal::Horizontal),
        Some(_) => Ok(Traversal::Diagonal2D),
        None => Err(Error::UnknownAlgorithm(name.into())),
    }
}

/// Exact sequence of invocations for a problem and block size.
pub fn call_sequence(name: &str, problem: Problem, b: usize) -> Result<Vec<Invocation>> {
    Ok(emit(name, problem, b)?.out)
}

/// Call sequence grouped by outermost blocked step.
pub fn call_steps(name: &str, problem: Problem, b: usize) -> Result<Vec<Vec<Invocation>>> {
    Ok(emit(name, problem, b)?.into_steps())
}

fn emit(name: &str, problem: Problem, b: usize) -> Result<Emitter> {
    if b == 0 {
        return Err(Error::Config("block size must be positive".into()));
    }
    let e = if let Some(f) = algorithms::factorization(name) {
        algorithms::expand(&f, problem.m, problem.n, b)?
    } else if let Some(plan) = parse_plan(name) {
        sylvester::expand(&plan, problem.m, problem.n, b)?
    } else {
        return Err(Error::UnknownAlgorithm(name.into()));
    };
    Ok(e)
}

/// Minimal flop count of the operation an algorithm computes.
pub fn operation_cost(name: &str, problem: Problem) -> Result<u64> {
    if let Some(f) = algorithms::factorization(name) {
        let (kernel, flags) = f.operation;
        let sizes: Vec<usize> = if f.rectangular {
            vec![problem.m, problem.n]
        } else {
            vec![problem.n]
        };
        return flop_count(kernel, &sizes, flags);
    }
    if parse_plan(name).is_some() {
        return flop_count(Kernel::Dtrsyl, &[problem.m, problem.n], &["N", "N", "1"]);
    }
    Err(Error::UnknownAlgorithm(name.into()))
}

/// Source of per-call runtime estimates.
pub trait Estimator {
    fn estimate(&self, call: &Call) -> Result<SummaryStats>;

    fn has_model(&self, _kernel: Kernel) -> bool {
        true
    }
}

impl Estimator for ModelSet {
    fn estimate(&self, call: &Call) -> Result<SummaryStats> {
        self.evaluate(call)
    }

    fn has_model(&self, kernel: Kernel) -> bool {
        self.get(kernel).is_some()
    }
}

/// Estimator backed by a closure.
pub struct FnEstimator<F>(pub F);

impl<F: Fn(&Call) -> SummaryStats> Estimator for FnEstimator<F> {
    fn estimate(&self, call: &Call) -> Result<SummaryStats> {
        Ok((self.0)(call))
    }
}

/// Summed runtime statistics and the number of invocations estimated as 0
/// for lack of a model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuntimeSum {
    pub stats: SummaryStats,
    pub unmodeled: usize,
}

/// Sums min, median, max and mean; the standard deviation is combined
/// assuming uncorrelated estimates.
pub fn predict_runtime(est: &dyn Estimator, seq: &[Invocation]) -> Result<RuntimeSum> {
    let mut total = SummaryStats::default();
    let mut var = 0.0;
    let mut unmodeled = 0;
    for inv in seq {
        let s = match inv {
            Invocation::Inline { .. } => {
                unmodeled += 1;
                continue;
            }
            Invocation::Kernel(c) if c.is_empty() || c.sizes().contains(&0) => continue,
            Invocation::Kernel(c) if c.kernel == Kernel::Dlaswp && !est.has_model(c.kernel) => {
                unmodeled += 1;
                continue;
            }
            Invocation::Kernel(c) => est.estimate(c)?,
        };
        total.min += s.min;
        total.median += s.median;
        total.max += s.max;
        total.mean += s.mean;
        var += s.std * s.std;
    }
    total.std = var.sqrt();
    Ok(RuntimeSum {
        stats: total,
        unmodeled,
    })
}

/// Performance statistics from runtime statistics and the operation's cost;
/// mean and spread use second- and first-order expansions.
pub fn predict_performance(t: &SummaryStats, cost: f64) -> Result<SummaryStats> {
    if cost == 0.0 {
        return Ok(SummaryStats::default());
    }
    if [t.min, t.median, t.max, t.mean].iter().any(|v| !(*v > 0.0)) {
        return Err(Error::ZeroRuntime);
    }
    let mu2 = t.mean * t.mean;
    Ok(SummaryStats {
        min: cost / t.max,
        median: cost / t.median,
        max: cost / t.min,
        mean: cost / t.mean * (1.0 + t.std * t.std / mu2),
        std: cost * t.std / mu2,
    })
}

/// Performance divided by the peak of `threads` cores.
pub fn predict_efficiency(p: &SummaryStats, machine: &MachineSpec, threads: u32) -> SummaryStats {
    efficiency(p, machine.peak_flops(threads))
}

pub fn efficiency(p: &SummaryStats, peak: f64) -> SummaryStats {
    p.scale(1.0 / peak)
}

/// Full prediction of one algorithm execution.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub algorithm: String,
    pub problem: Problem,
    pub block_size: usize,
    pub runtime: SummaryStats,
    pub performance: SummaryStats,
    /// Present when a machine description is supplied.
    pub efficiency: Option<SummaryStats>,
    pub cost: u64,
    pub calls: usize,
    pub unmodeled: usize,
}

pub fn predict(
    est: &dyn Estimator,
    name: &str,
    problem: Problem,
    b: usize,
    machine: Option<(&MachineSpec, u32)>,
) -> Result<Prediction> {
    let seq = call_sequence(name, problem, b)?;
    let rt = predict_runtime(est, &seq)?;
    let cost = operation_cost(name, problem)?;
    let performance = predict_performance(&rt.stats, cost as f64)?;
    Ok(Prediction {
        algorithm: name.to_string(),
        problem,
        block_size: b,
        runtime: rt.stats,
        efficiency: machine.map(|(m, t)| predict_efficiency(&performance, m, t)),
        performance,
        cost,
        calls: seq.iter().filter(|i| i.call().is_some()).count(),
        unmodeled: rt.unmodeled,
    })
}

/// Prediction errors per statistic: absolute, relative and absolute relative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccuracyReport {
    pub err: SummaryStats,
    pub re: SummaryStats,
    pub are: SummaryStats,
}

/// Compares predicted to measured statistics. A zero measured runtime is an
/// error; a zero measured spread yields an undefined (NaN) relative error.
pub fn accuracy(pred: &SummaryStats, meas: &SummaryStats) -> Result<AccuracyReport> {
    for s in [Statistic::Min, Statistic::Median, Statistic::Max, Statistic::Mean] {
        if meas.get(s) == 0.0 {
            return Err(Error::ZeroMeasurement);
        }
    }
    let err = SummaryStats::from_fn(|s| pred.get(s) - meas.get(s));
    let re = SummaryStats::from_fn(|s| {
        let m = meas.get(s);
        if m == 0.0 {
            f64::NAN
        } else {
            err.get(s) / m
        }
    });
    Ok(AccuracyReport {
        err,
        are: re.map(f64::abs),
        re,
    })
}

/// Algorithms ordered by ascending predicted median runtime; ties keep the
/// input order.
pub fn rank_algorithms(est: &dyn Estimator, names: &[&str], problem: Problem, b: usize) -> Result<Vec<Prediction>> {
    let mut out = names
        .iter()
        .map(|n| predict(est, n, problem, b, None))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|x, y| x.runtime.median.total_cmp(&y.runtime.median));
    Ok(out)
}

/// Candidate block sizes `lo, lo + step, ...` up to `hi`.
pub fn block_sizes(lo: usize, hi: usize, step: usize) -> Result<Vec<usize>> {
    if lo == 0 || step == 0 || lo > hi {
        return Err(Error::Config(format!("invalid block size range {lo}:{hi}:{step}")));
    }
    Ok((lo..=hi).step_by(step).collect())
}

/// Block size with the smallest predicted median runtime (first on ties)
/// and the prediction for every candidate.
pub fn optimize_blocksize(
    est: &dyn Estimator,
    name: &str,
    problem: Problem,
    candidates: &[usize],
) -> Result<(usize, Vec<Prediction>)> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate block sizes".into()));
    }
    let preds = candidates
        .iter()
        .map(|&b| predict(est, name, problem, b, None))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, p) in preds.iter().enumerate() {
        if p.runtime.median < preds[best].runtime.median {
            best = i;
        }
    }
    Ok((candidates[best], preds))
}

/// Measured median performance at the predicted optimum relative to the
/// best measured median performance.
pub fn performance_yield(meas_at_pred: f64, meas_at_opt: f64) -> Result<f64> {
    if meas_at_opt == 0.0 {
        return Err(Error::ZeroMeasurement);
    }
    Ok(meas_at_pred / meas_at_opt)
}

/// Times `repetitions` executions of a call sequence; inline updates are
/// not executed.
pub fn measure_algorithm(
    backend: &mut dyn Backend,
    seq: &[Invocation],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let calls: Vec<Call> = seq.iter().filter_map(|i| i.call().cloned()).collect();
    let mut store = BufferStore::new();
    if backend.needs_memory() {
        allocate_operands(&calls, &mut store, seed)?;
    }
    let mut out = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let mut t = 0.0;
        for c in &calls {
            t += backend.run(c, &mut store)?;
        }
        out.push(t);
    }
    Ok(out)
}

/// Statistics of per-repetition performance, as opposed to performance of
/// the runtime statistics.
pub fn measured_performance(times: &[f64], cost: f64) -> Result<SummaryStats> {
    if times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::ZeroRuntime);
    }
    let p: Vec<f64> = times.iter().map(|t| cost / t).collect();
    summarize(&p)
}
