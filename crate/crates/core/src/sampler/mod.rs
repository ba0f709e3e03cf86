//! Timing of kernel calls under controlled cache preconditions.

mod backend;
mod precondition;
mod script;

pub use backend::{
    backend_from_spec, read_cycle_counter, Backend, DylibBackend, ReferenceBackend,
    SyntheticBackend, TimerKind,
};
pub use precondition::{Access, CachePrecondition, Region, TouchEvent, Toucher};
pub use script::{parse_call_list, Script};

use crate::error::{Error, Result};
use crate::kernels::{BufferStore, Call};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Order statistics, mean and population standard deviation, in seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

/// Selects one of the five summary statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Min,
    Median,
    Max,
    Mean,
    Std,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [
        Statistic::Min,
        Statistic::Median,
        Statistic::Max,
        Statistic::Mean,
        Statistic::Std,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Min => "min",
            Statistic::Median => "median",
            Statistic::Max => "max",
            Statistic::Mean => "mean",
            Statistic::Std => "std",
        }
    }

    pub fn from_name(s: &str) -> Result<Statistic> {
        Statistic::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "med" && *k == Statistic::Median))
            .ok_or_else(|| Error::Config(format!("unknown statistic `{s}`")))
    }
}

impl SummaryStats {
    pub fn constant(v: f64) -> Self {
        SummaryStats {
            min: v,
            median: v,
            max: v,
            mean: v,
            std: 0.0,
        }
    }

    pub fn get(&self, s: Statistic) -> f64 {
        match s {
            Statistic::Min => self.min,
            Statistic::Median => self.median,
            Statistic::Max => self.max,
            Statistic::Mean => self.mean,
            Statistic::Std => self.std,
        }
    }

    pub fn set(&mut self, s: Statistic, v: f64) {
        match s {
            Statistic::Min => self.min = v,
            Statistic::Median => self.median = v,
            Statistic::Max => self.max = v,
            Statistic::Mean => self.mean = v,
            Statistic::Std => self.std = v,
        }
    }

    pub fn from_fn(mut f: impl FnMut(Statistic) -> f64) -> Self {
        let mut s = SummaryStats::default();
        for k in Statistic::ALL {
            s.set(k, f(k));
        }
        s
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_fn(|k| f(self.get(k)))
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }
}

/// Reduces a sample to summary statistics.
pub fn summarize(timings: &[f64]) -> Result<SummaryStats> {
    if timings.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut v = timings.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    // Rounding can push the mean a hair outside [min, max] for constant samples.
    let mean = mean.clamp(v[0], v[n - 1]);
    Ok(SummaryStats {
        min: v[0],
        median,
        max: v[n - 1],
        mean,
        std: var.sqrt(),
    })
}

/// How operands are brought into a defined cache state before each timed run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmPolicy {
    /// An untimed identical run immediately precedes each timed run.
    DoubleExecution,
    /// Operands are touched before each timed run.
    ExplicitWarm,
    /// A remote region larger than the caches is touched before each timed run.
    Cold,
}

/// Calls to time, each with an optional setup applied before its runs.
#[derive(Clone, Debug)]
pub struct MeasurementPlan {
    pub calls: Vec<Call>,
    /// Per-call setups; a missing or empty entry uses the policy default.
    pub setups: Vec<CachePrecondition>,
    pub repetitions: usize,
    pub shuffle: bool,
    pub warm_policy: WarmPolicy,
    pub seed: u64,
}

impl MeasurementPlan {
    pub fn new(calls: Vec<Call>, repetitions: usize) -> Self {
        MeasurementPlan {
            calls,
            setups: Vec::new(),
            repetitions,
            shuffle: true,
            warm_policy: WarmPolicy::DoubleExecution,
            seed: 0,
        }
    }
}

/// Raw timings per call plus the executed order of (call, repetition).
#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub timings: Vec<Vec<f64>>,
    pub order: Vec<(usize, usize)>,
    pub seed: u64,
}

impl PlanResult {
    pub fn summaries(&self) -> Result<Vec<SummaryStats>> {
        self.timings.iter().map(|t| summarize(t)).collect()
    }
}

/// Execution order of all (call, repetition) pairs.
pub fn execution_order(calls: usize, repetitions: usize, shuffle: bool, seed: u64) -> Vec<(usize, usize)> {
    let mut order: Vec<(usize, usize)> = (0..repetitions)
        .flat_map(|r| (0..calls).map(move |c| (c, r)))
        .collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    order
}

/// Times every call `repetitions` times.
pub fn run_plan(
    plan: &MeasurementPlan,
    backend: &mut dyn Backend,
    store: &mut BufferStore,
) -> Result<PlanResult> {
    if plan.repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    for call in &plan.calls {
        call.validate()?;
    }
    let order = execution_order(plan.calls.len(), plan.repetitions, plan.shuffle, plan.seed);
    let mut timings = vec![Vec::with_capacity(plan.repetitions); plan.calls.len()];
    let empty = CachePrecondition::default();
    for &(c, _) in &order {
        let call = &plan.calls[c];
        let setup = plan.setups.get(c).unwrap_or(&empty);
        if !setup.is_empty() {
            backend.apply(setup, store)?;
        }
        match plan.warm_policy {
            WarmPolicy::DoubleExecution => {
                backend.run(call, store)?;
            }
            WarmPolicy::ExplicitWarm => {
                if setup.is_empty() {
                    backend.apply(&CachePrecondition::operands_of(call)?, store)?;
                }
            }
            WarmPolicy::Cold => {
                if setup.is_empty() {
                    let flush = CachePrecondition::remote(backend.flush_bytes());
                    backend.apply(&flush, store)?;
                }
            }
        }
        timings[c].push(backend.run(call, store)?);
    }
    Ok(PlanResult {
        timings,
        order,
        seed: plan.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_examples() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let s = summarize(&[4.5]).unwrap();
        assert_eq!(s, SummaryStats::constant(4.5));
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert!(matches!(summarize(&[]), Err(Error::EmptySample)));
    }

    #[test]
    fn order_covers_all_pairs() {
        let mut o = execution_order(3, 4, true, 7);
        assert_eq!(o.len(), 12);
        o.sort();
        let expect: Vec<_> = (0..3).flat_map(|c| (0..4).map(move |r| (c, r))).collect();
        assert_eq!(o, expect);
        assert_eq!(execution_order(3, 4, true, 7), execution_order(3, 4, true, 7));
    }
}
