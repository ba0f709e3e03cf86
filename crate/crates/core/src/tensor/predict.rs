//! Runtime prediction and ranking of contraction algorithms.

use super::algorithm::{generate_algorithms, ContractionAlgorithm, TensorKernel};
use super::analysis::{build_benchmarks, MicroBenchmark, TensorConfig};
use super::{ContractionSpec, TensorId};
use crate::error::{Error, Result};
use crate::kernels::{BufferStore, Call, MachineSpec};
use crate::modelgen::allocate_operands;
use crate::sampler::{run_plan, Backend, MeasurementPlan, Statistic, WarmPolicy};
use serde::Serialize;

/// Median time of one execution of each benchmark's statement.
pub fn measure_benchmarks(
    backend: &mut dyn Backend,
    benchmarks: &[MicroBenchmark],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if benchmarks.is_empty() {
        return Ok(Vec::new());
    }
    let calls: Vec<Call> = benchmarks
        .iter()
        .map(|b| {
            b.calls
                .first()
                .cloned()
                .ok_or_else(|| Error::Config("benchmark without calls".into()))
        })
        .collect::<Result<_>>()?;
    let mut store = BufferStore::new();
    if backend.needs_memory() {
        allocate_operands(&calls, &mut store, seed)?;
    }
    let mut plan = MeasurementPlan::new(calls, repetitions);
    plan.setups = benchmarks
        .iter()
        .map(|b| b.setup.to_precondition())
        .collect::<Result<_>>()?;
    plan.warm_policy = WarmPolicy::ExplicitWarm;
    plan.seed = seed;
    let result = run_plan(&plan, backend, &mut store)?;
    Ok(result
        .summaries()?
        .iter()
        .zip(benchmarks)
        .map(|(s, b)| s.get(Statistic::Median) * b.calls.len() as f64)
        .collect())
}

/// Predicted runtime: benchmark timings weighted by their share of executions.
pub fn predict_contraction(benchmarks: &[MicroBenchmark], timings: &[f64]) -> Result<f64> {
    if benchmarks.len() != timings.len() {
        return Err(Error::MissingTiming(format!(
            "{} benchmarks but {} timings",
            benchmarks.len(),
            timings.len()
        )));
    }
    Ok(benchmarks
        .iter()
        .zip(timings)
        .map(|(b, t)| b.weight * b.invocations as f64 * t)
        .sum())
}

/// Runtime of a full execution, timing every call through the backend.
pub fn algorithm_timing(backend: &mut dyn Backend, alg: &ContractionAlgorithm, spec: &ContractionSpec, seed: u64) -> Result<f64> {
    let mut store = BufferStore::new();
    if backend.needs_memory() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for t in TensorId::ALL {
            store.insert(t.buffer(), (0..spec.size(t)).map(|_| rng.random::<f64>()).collect());
        }
        for c in &alg.copies {
            let v = alg.operand_view(spec, c.tensor);
            store.alloc(v.buffer.clone(), v.elements());
        }
    }
    let views = alg.operand_views(spec);
    let mut total = 0.0;
    alg.for_each_execution(spec, |stmt, point| {
        for call in alg.calls_in(spec, &views, stmt, point, 1.0)? {
            total += backend.run(&call, &mut store)?;
        }
        Ok(())
    })?;
    Ok(total)
}

/// Predicted runtime and performance of one algorithm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionPrediction {
    pub name: String,
    pub kernel: TensorKernel,
    /// Seconds.
    pub runtime: f64,
    /// Flops of the kernel calls.
    pub flops: u64,
    /// Flops per second.
    pub performance: f64,
}

/// Every algorithm of a contraction, fastest predicted first; ties keep
/// generation order.
pub fn rank_contractions(
    backend: &mut dyn Backend,
    spec: &ContractionSpec,
    machine: &MachineSpec,
    config: &TensorConfig,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<ContractionPrediction>> {
    let cache = machine
        .last_level_cache()
        .map(|c| c.capacity)
        .ok_or_else(|| Error::Config(format!("machine {} has no cache levels", machine.name)))?;
    let mut out = Vec::new();
    for alg in generate_algorithms(spec) {
        let benches = build_benchmarks(&alg, spec, cache, config)?;
        let timings = measure_benchmarks(backend, &benches, repetitions, seed)?;
        let runtime = predict_contraction(&benches, &timings)?;
        let flops = alg.flops(spec)?;
        out.push(ContractionPrediction {
            name: alg.name.clone(),
            kernel: alg.kernel,
            runtime,
            flops,
            performance: if runtime > 0.0 { flops as f64 / runtime } else { 0.0 },
        });
    }
    out.sort_by(|a, b| a.runtime.total_cmp(&b.runtime));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;
    use crate::sampler::SyntheticBackend;
    use crate::tensor::parse_spec;

    fn rate_backend(gemm_speedup: f64) -> SyntheticBackend {
        SyntheticBackend::new(move |c: &Call| {
            let f = c.flop_count().unwrap_or(0) as f64;
            let moved = c.data_movement().unwrap_or(0) as f64;
            let per_flop = if c.kernel == Kernel::Dgemm { 1e-9 / gemm_speedup } else { 1e-9 };
            f * per_flop + moved * 1e-11 + 1e-8
        })
    }

    #[test]
    fn prediction_matches_direct_timing_without_cache_effects() {
        let s = parse_spec("C[a,b,c] = A[a,i] * B[i,b,c] a=64 b=64 c=64 i=8").unwrap();
        let cfg = TensorConfig::default();
        for alg in generate_algorithms(&s) {
            let mut be = rate_backend(1.0);
            let benches = build_benchmarks(&alg, &s, 1 << 20, &cfg).unwrap();
            let t = measure_benchmarks(&mut be, &benches, 3, 1).unwrap();
            let pred = predict_contraction(&benches, &t).unwrap();
            let direct = algorithm_timing(&mut be, &alg, &s, 1).unwrap();
            assert!((pred - direct).abs() <= 0.01 * direct, "{}: {pred} vs {direct}", alg.name);
        }
    }

    #[test]
    fn fast_gemm_ranks_first() {
        let s = parse_spec("C[a,b,c] = A[a,i] * B[i,b,c] a=16 b=16 c=16 i=8").unwrap();
        let m = MachineSpec::builtin("sandybridge-e5-2670").unwrap();
        let mut be = rate_backend(10.0);
        let r = rank_contractions(&mut be, &s, &m, &TensorConfig::default(), 1, 0).unwrap();
        assert_eq!(r.len(), 36);
        assert!(r[..2].iter().all(|p| p.kernel == TensorKernel::Gemm));
        assert!(r.windows(2).all(|w| w[0].runtime <= w[1].runtime));
    }

    #[test]
    fn mismatched_timings_are_rejected() {
        let s = parse_spec("C[a,b] = A[a,i] * B[i,b] a=4 b=4 i=4").unwrap();
        let alg = generate_algorithms(&s).into_iter().find(|a| a.name == "gemm").unwrap();
        let benches = build_benchmarks(&alg, &s, 1 << 20, &TensorConfig::default()).unwrap();
        assert!(matches!(predict_contraction(&benches, &[]), Err(Error::MissingTiming(_))));
    }
}
