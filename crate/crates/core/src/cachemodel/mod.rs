//! In-algorithm runtime estimates from in-cache and out-of-cache kernel timings.
//!
//! Each call's operands are classified by access distance: the number of
//! distinct bytes touched since the operand's previous use. A smoothed sign
//! function of the distance relative to the cache size splits the operand
//! bytes into an in-cache and an out-of-cache share, which weight the two
//! timings of the call.

use crate::error::{Error, Result};
use crate::kernels::{BufferStore, Call, Kernel, MachineSpec};
use crate::modelgen::allocate_operands;
use crate::predictor::{call_steps, Problem};
use crate::sampler::{run_plan, Backend, MeasurementPlan, Statistic, WarmPolicy};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

const DOUBLE: u64 = 8;

/// Whether a region is only read or also written by its call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessRole {
    InputOnly,
    OutputSide,
}

/// One memory region touched by a call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessRecord {
    /// Identifies the region: buffer, offset and logical shape.
    pub operand: String,
    pub bytes: u64,
    pub role: AccessRole,
}

/// Regions touched together; a call yields one or two batches in access order.
pub type RecordBatch = Vec<AccessRecord>;

/// Steepness of the membership function above and below the cache size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        SmoothingParams {
            alpha: 4.0,
            beta: 2.0,
        }
    }
}

impl SmoothingParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.beta > 0.0 {
            Ok(())
        } else {
            Err(Error::Config("smoothing parameters must be positive".into()))
        }
    }
}

/// How relative distances map to cache membership.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Association {
    /// Sign of the relative distance: fully in or fully out of cache.
    Hard,
    Smooth(SmoothingParams),
}

impl Association {
    /// Membership in [-1, 1]; positive means in cache.
    pub fn membership(&self, r: f64) -> f64 {
        match self {
            Association::Hard => {
                if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Association::Smooth(p) => smoothing(r, p),
        }
    }
}

/// Cache model settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheModelConfig {
    pub association: Association,
    /// A call's output is tracked separately if at most this fraction of its inputs.
    pub split_threshold: f64,
}

impl Default for CacheModelConfig {
    fn default() -> Self {
        CacheModelConfig {
            association: Association::Smooth(SmoothingParams::default()),
            split_threshold: 0.25,
        }
    }
}

/// tanh(alpha r) for r >= 0 and tanh(beta r) below; odd-signed, increasing, |f| < 1.
pub fn smoothing(r: f64, p: &SmoothingParams) -> f64 {
    if r >= 0.0 {
        (p.alpha * r).tanh()
    } else {
        (p.beta * r).tanh()
    }
}

/// Distance relative to the cache: 1 at distance 0, negative beyond the cache.
pub fn relative_distance(distance: u64, cache: u64) -> f64 {
    (cache as f64 - distance as f64) / cache as f64
}

/// In-cache and out-of-cache bytes of operands given as (bytes, relative distance).
pub fn weights(operands: &[(u64, f64)], association: &Association) -> (f64, f64) {
    let mut s_ic = 0.0;
    let mut s_oc = 0.0;
    for &(bytes, r) in operands {
        let s = bytes as f64;
        let ic = (1.0 + association.membership(r)) / 2.0 * s;
        s_ic += ic;
        // Complement keeps the sum equal to the operand bytes.
        s_oc += s - ic;
    }
    (s_ic, s_oc)
}

/// Smoothed weights of operands given as (bytes, relative distance).
pub fn smooth_weights(operands: &[(u64, f64)], params: &SmoothingParams) -> (f64, f64) {
    weights(operands, &Association::Smooth(*params))
}

/// Sign-rule weights of operands given as (bytes, relative distance).
pub fn hard_weights(operands: &[(u64, f64)]) -> (f64, f64) {
    weights(operands, &Association::Hard)
}

/// Byte-weighted mean of the in-cache and out-of-cache timings.
pub fn initial_estimate(s_ic: f64, s_oc: f64, t_ic: f64, t_oc: f64) -> Result<f64> {
    let total = s_ic + s_oc;
    if total <= 0.0 {
        return Err(Error::Config("operand weights sum to zero".into()));
    }
    let t = (s_ic * t_ic + s_oc * t_oc) / total;
    Ok(t.clamp(t_ic.min(t_oc), t_ic.max(t_oc)))
}

fn region_id(l: &crate::kernels::Layout) -> String {
    format!(
        "{}+{}:{}x{}:{:?}",
        l.operand.buffer, l.operand.offset, l.shape.rows, l.shape.cols, l.shape.structure
    )
}

/// Access records of a call in access order.
///
/// The output is a separate trailing batch when it is at most `threshold`
/// times the input-only bytes and those exceed the cache; otherwise all
/// regions form one batch.
pub fn split_records(call: &Call, cache: u64, threshold: f64) -> Result<Vec<RecordBatch>> {
    let mut inputs: RecordBatch = Vec::new();
    let mut outputs: RecordBatch = Vec::new();
    for l in call.layouts()? {
        let role = if l.role.writes() {
            AccessRole::OutputSide
        } else {
            AccessRole::InputOnly
        };
        let rec = AccessRecord {
            operand: region_id(&l),
            bytes: l.shape.elements() as u64 * DOUBLE,
            role,
        };
        match role {
            AccessRole::InputOnly => inputs.push(rec),
            AccessRole::OutputSide => outputs.push(rec),
        }
    }
    let in_bytes: u64 = inputs.iter().map(|r| r.bytes).sum();
    let out_bytes: u64 = outputs.iter().map(|r| r.bytes).sum();
    let split = !inputs.is_empty()
        && !outputs.is_empty()
        && out_bytes as f64 <= threshold * in_bytes as f64
        && in_bytes > cache;
    if split {
        Ok(vec![inputs, outputs])
    } else {
        inputs.extend(outputs);
        Ok(vec![inputs])
    }
}

/// Access history of a call sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    /// Record batches per call.
    pub calls: Vec<Vec<RecordBatch>>,
    /// Number of preceding calls visible to each call.
    pub history: Vec<usize>,
    /// Distance assigned to operands without a visible previous use.
    pub total_bytes: u64,
}

/// Distinct bytes touched between the operand's previous use and call `index`.
///
/// The scan covers at most `history[index]` preceding calls. Regions sharing
/// the operand's batch at its previous use count; the operand itself does not.
pub fn access_distance(trace: &Trace, index: usize, operand: &str) -> Result<u64> {
    let own = trace
        .calls
        .get(index)
        .ok_or_else(|| Error::Config(format!("call index {index} out of range")))?;
    if !own.iter().flatten().any(|r| r.operand == operand) {
        return Err(Error::Config(format!(
            "operand `{operand}` is not accessed by call {index}"
        )));
    }
    let depth = trace.history.get(index).copied().unwrap_or(index).min(index);
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut distance = 0;
    for call in trace.calls[index - depth..index].iter().rev() {
        for batch in call.iter().rev() {
            let found = batch.iter().any(|r| r.operand == operand);
            for r in batch {
                if r.operand != operand && seen.insert(&r.operand) {
                    distance += r.bytes;
                }
            }
            if found {
                return Ok(distance);
            }
        }
    }
    Ok(trace.total_bytes)
}

/// Timings of one call with operands in and out of cache.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub in_cache: f64,
    pub out_of_cache: f64,
}

/// Identity of a call for timing lookup.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CallKey {
    pub kernel: Kernel,
    pub flags: Vec<String>,
    pub sizes: Vec<usize>,
}

impl CallKey {
    pub fn of(call: &Call) -> Self {
        CallKey {
            kernel: call.kernel,
            flags: call.flags().iter().map(|s| s.to_string()).collect(),
            sizes: call.sizes(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TimingEntry {
    #[serde(flatten)]
    key: CallKey,
    #[serde(flatten)]
    timing: Timing,
}

/// In-cache and out-of-cache timings keyed by call identity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimingTable {
    pub entries: BTreeMap<CallKey, Timing>,
}

impl TimingTable {
    pub fn insert(&mut self, call: &Call, timing: Timing) {
        self.entries.insert(CallKey::of(call), timing);
    }

    pub fn get(&self, call: &Call) -> Result<Timing> {
        self.entries
            .get(&CallKey::of(call))
            .copied()
            .ok_or_else(|| Error::MissingTiming(call.to_string()))
    }

    /// Table built from a timing function over the distinct calls given.
    pub fn from_fn<'a>(
        calls: impl IntoIterator<Item = &'a Call>,
        mut f: impl FnMut(&Call) -> Timing,
    ) -> Self {
        let mut t = TimingTable::default();
        for c in calls {
            if !t.entries.contains_key(&CallKey::of(c)) {
                let timing = f(c);
                t.insert(c, timing);
            }
        }
        t
    }

    pub fn to_json(&self) -> Result<String> {
        let list: Vec<TimingEntry> = self
            .entries
            .iter()
            .map(|(k, v)| TimingEntry {
                key: k.clone(),
                timing: *v,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&list)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let list: Vec<TimingEntry> = serde_json::from_str(text)?;
        Ok(TimingTable {
            entries: list.into_iter().map(|e| (e.key, e.timing)).collect(),
        })
    }
}

/// Measures the median in-cache and out-of-cache time of every distinct call.
pub fn measure_timings(
    backend: &mut dyn Backend,
    calls: &[Call],
    repetitions: usize,
    seed: u64,
) -> Result<TimingTable> {
    let mut distinct: Vec<Call> = Vec::new();
    let mut keys: BTreeSet<CallKey> = BTreeSet::new();
    for c in calls {
        if !c.is_empty() && keys.insert(CallKey::of(c)) {
            distinct.push(c.clone());
        }
    }
    let mut store = BufferStore::default();
    allocate_operands(&distinct, &mut store, seed)?;
    let mut medians = HashMap::new();
    for policy in [WarmPolicy::ExplicitWarm, WarmPolicy::Cold] {
        let mut plan = MeasurementPlan::new(distinct.clone(), repetitions);
        plan.warm_policy = policy;
        plan.seed = seed;
        let result = run_plan(&plan, backend, &mut store)?;
        let stats = result.summaries()?;
        medians.insert(
            policy == WarmPolicy::Cold,
            stats.iter().map(|s| s.get(Statistic::Median)).collect::<Vec<_>>(),
        );
    }
    let mut table = TimingTable::default();
    for (i, c) in distinct.iter().enumerate() {
        table.insert(
            c,
            Timing {
                in_cache: medians[&false][i],
                out_of_cache: medians[&true][i],
            },
        );
    }
    Ok(table)
}

/// Trace of a call list grouped into blocked steps.
///
/// A call sees at most as many preceding calls as its step contains.
pub fn trace_of_steps(steps: &[Vec<Call>], cache: u64, threshold: f64) -> Result<Trace> {
    let mut calls = Vec::new();
    let mut history = Vec::new();
    let mut extent: BTreeMap<String, u64> = BTreeMap::new();
    for step in steps {
        for call in step {
            for l in call.layouts()? {
                let end = (l.operand.offset + l.span()) as u64 * DOUBLE;
                let e = extent.entry(l.operand.buffer.to_string()).or_default();
                *e = (*e).max(end);
            }
            calls.push(split_records(call, cache, threshold)?);
            history.push(step.len());
        }
    }
    Ok(Trace {
        calls,
        history,
        total_bytes: extent.values().sum(),
    })
}

/// Estimate of one call within its algorithm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CallEstimate {
    pub index: usize,
    pub kernel: String,
    pub flags: String,
    pub sizes: String,
    pub s_ic: f64,
    pub s_oc: f64,
    pub t_est: f64,
}

/// Per-call estimates and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmEstimate {
    pub calls: Vec<CallEstimate>,
    pub total: f64,
}

/// Estimates for every call of a trace; empty calls cost nothing.
pub fn estimate_trace(
    calls: &[Call],
    trace: &Trace,
    timings: &TimingTable,
    cache: u64,
    association: &Association,
) -> Result<AlgorithmEstimate> {
    if cache == 0 {
        return Err(Error::Config("cache size must be positive".into()));
    }
    if let Association::Smooth(p) = association {
        p.validate()?;
    }
    let mut out = Vec::with_capacity(calls.len());
    let mut total = 0.0;
    for (i, call) in calls.iter().enumerate() {
        let mut ops = Vec::new();
        for r in trace.calls[i].iter().flatten() {
            let d = access_distance(trace, i, &r.operand)?;
            ops.push((r.bytes, relative_distance(d, cache)));
        }
        let (s_ic, s_oc) = weights(&ops, association);
        let t_est = if call.is_empty() || s_ic + s_oc == 0.0 {
            0.0
        } else {
            let t = timings.get(call)?;
            initial_estimate(s_ic, s_oc, t.in_cache, t.out_of_cache)?
        };
        total += t_est;
        out.push(CallEstimate {
            index: i,
            kernel: call.kernel.name().to_string(),
            flags: call.flags().join(""),
            sizes: call
                .sizes()
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" "),
            s_ic,
            s_oc,
            t_est,
        });
    }
    Ok(AlgorithmEstimate { calls: out, total })
}

/// Per-call estimates of an algorithm using the machine's last-level cache.
///
/// Inline updates are skipped; indices count kernel calls only.
pub fn combined_estimates(
    algorithm: &str,
    problem: Problem,
    block_size: usize,
    timings: &TimingTable,
    machine: &MachineSpec,
    config: &CacheModelConfig,
) -> Result<AlgorithmEstimate> {
    let cache = machine
        .last_level_cache()
        .ok_or_else(|| Error::Config(format!("machine `{}` has no cache", machine.name)))?
        .capacity;
    let steps: Vec<Vec<Call>> = call_steps(algorithm, problem, block_size)?
        .into_iter()
        .map(|s| s.iter().filter_map(|i| i.call().cloned()).collect())
        .collect();
    let trace = trace_of_steps(&steps, cache, config.split_threshold)?;
    let calls: Vec<Call> = steps.into_iter().flatten().collect();
    estimate_trace(&calls, &trace, timings, cache, &config.association)
}

/// Writes per-call rows (index, kernel, flags, sizes, s_ic, s_oc, t_est).
pub fn export_estimates(out: impl Write, est: &AlgorithmEstimate, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
    for row in &est.calls {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
