//! Property tests of invariants that hold for every valid input.

use dlaperf::cachemodel::{hard_weights, initial_estimate, smooth_weights, smoothing, SmoothingParams};
use dlaperf::kernels::{
    data_volume, execute, flop_count, min_data_movement, ArgKind, BufferStore, Call, Kernel, MachineSpec, Operand,
};
use dlaperf::modelgen::{
    adaptive_refine, allocate_operands, default_config, grid_points_1d, measurement_call, Case, Domain, GridKind,
    KernelModel, PiecewiseModel, Sampler,
};
use dlaperf::predictor::{
    call_sequence, call_steps, operation_cost, predict_runtime, rank_algorithms, FnEstimator, Invocation, Problem,
};
use dlaperf::sampler::{
    run_plan, summarize, Backend, CachePrecondition, MeasurementPlan, SummaryStats, SyntheticBackend, WarmPolicy,
};
use dlaperf::tensor::{
    build_benchmarks, build_setup, execute_algorithm, generate_algorithms, parse_spec, ContractionSpec, SetupItem,
    TensorConfig, TensorId,
};
use dlaperf::sampler::Region;
use proptest::prelude::*;
use std::collections::BTreeMap;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

/// Flags drawn from each flag argument's allowed values.
fn flags_of(kernel: Kernel, picks: &[usize]) -> Vec<&'static str> {
    let desc = kernel.descriptor();
    desc.flag_positions()
        .into_iter()
        .zip(picks.iter().cycle())
        .map(|(p, &i)| match desc.args[p].kind {
            ArgKind::Flag(allowed) => allowed[i % allowed.len()],
            _ => unreachable!("flag position"),
        })
        .collect()
}

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop::sample::select(Kernel::ALL.to_vec())
}

fn naive_gemm(ta: bool, tb: bool, m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    let lda = if ta { k } else { m };
    let ldb = if tb { n } else { k };
    let mut out = c.to_vec();
    for j in 0..n {
        for i in 0..m {
            let mut s = 0.0;
            for p in 0..k {
                let x = if ta { a[p + i * lda] } else { a[i + p * lda] };
                let y = if tb { b[j + p * ldb] } else { b[p + j * ldb] };
                s += x * y;
            }
            out[i + j * m] += s;
        }
    }
    out
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn movement_bounds_volume(kernel in kernel_strategy(), sizes in prop::collection::vec(0usize..200, 3), picks in prop::collection::vec(0usize..4, 5)) {
        let flags = flags_of(kernel, &picks);
        let n = kernel.descriptor().size_positions().len();
        let sizes = &sizes[..n.min(3)];
        if let (Ok(vol), Ok(mov)) = (data_volume(kernel, sizes, &flags), min_data_movement(kernel, sizes, &flags)) {
            prop_assert!(mov >= vol, "{kernel} {sizes:?} {flags:?}: {mov} < {vol}");
        }
    }

    #[test]
    fn trsm_cost_is_side_symmetric(m in 0usize..300, n in 0usize..300, uplo in 0usize..2, trans in 0usize..2) {
        let u = ["L", "U"][uplo];
        let t = ["N", "T"][trans];
        let left = flop_count(Kernel::Dtrsm, &[m, n], &["L", u, t, "N"]).unwrap();
        let right = flop_count(Kernel::Dtrsm, &[n, m], &["R", u, t, "N"]).unwrap();
        prop_assert_eq!(left, right);
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn empty_calls_leave_buffers_untouched(kernel in kernel_strategy(), sizes in prop::collection::vec(1usize..12, 3), zero in 0usize..3, picks in prop::collection::vec(0usize..4, 5), seed in any::<u64>()) {
        let flags = flags_of(kernel, &picks);
        let n = kernel.descriptor().size_positions().len();
        let mut sizes = sizes[..n].to_vec();
        sizes[zero % n] = 0;
        let scalars = vec![1.0; kernel.descriptor().scalar_positions().len()];
        let case = Case::new(kernel, &flags, &scalars).unwrap();
        let Ok(call) = measurement_call(kernel, &case, &sizes) else { return Ok(()) };
        prop_assume!(call.validate().is_ok() && call.is_empty());
        let mut store = BufferStore::new();
        allocate_operands(std::slice::from_ref(&call), &mut store, seed).unwrap();
        let before = store.clone();
        execute(&call, &mut store).unwrap();
        for name in before.names() {
            let (x, y) = (before.get(name).unwrap(), store.get(name).unwrap());
            prop_assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()), "{call}: {name} changed");
        }
    }

    #[test]
    fn gemm_matches_triple_loop(ta in any::<bool>(), tb in any::<bool>(), m in 0usize..=16, n in 0usize..=16, k in 0usize..=16, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let (a, b, c) = (fill(m * k), fill(k * n), fill(m * n));
        let lda = if ta { k } else { m }.max(1);
        let ldb = if tb { n } else { k }.max(1);
        let call = Call::from_parts(
            Kernel::Dgemm,
            &[if ta { "T" } else { "N" }, if tb { "T" } else { "N" }],
            &[m, n, k],
            &[1.0, 1.0],
            vec![Operand::new("A", 0), Operand::new("B", 0), Operand::new("C", 0)],
            &[lda, ldb, m.max(1)],
            &[],
        ).unwrap();
        let mut store = BufferStore::new();
        store.insert("A", a.clone());
        store.insert("B", b.clone());
        store.insert("C", c.clone());
        execute(&call, &mut store).unwrap();
        let want = naive_gemm(ta, tb, m, n, k, &a, &b, &c);
        for (g, w) in store.get("C").unwrap().iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0));
        }
    }
}

/// Logs the operand bindings of every run.
struct Recorder {
    inner: SyntheticBackend,
    runs: Vec<Call>,
}

impl Backend for Recorder {
    fn id(&self) -> String {
        "recorder".into()
    }
    fn run(&mut self, call: &Call, store: &mut BufferStore) -> dlaperf::Result<f64> {
        self.runs.push(call.clone());
        self.inner.run(call, store)
    }
    fn apply(&mut self, pre: &CachePrecondition, store: &mut BufferStore) -> dlaperf::Result<()> {
        self.inner.apply(pre, store)
    }
    fn flush_bytes(&self) -> u64 {
        self.inner.flush_bytes()
    }
    fn needs_memory(&self) -> bool {
        false
    }
}

fn gemm_calls(sizes: &[usize]) -> Vec<Call> {
    let case = Case::new(Kernel::Dgemm, &["N", "N"], &[1.0, 1.0]).unwrap();
    sizes.iter().map(|&s| measurement_call(Kernel::Dgemm, &case, &[s, s, s]).unwrap()).collect()
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn summaries_are_ordered(sample in prop::collection::vec(1e-9f64..1.0, 1..40)) {
        let s = summarize(&sample).unwrap();
        prop_assert!(s.min <= s.median && s.median <= s.max);
        prop_assert!(s.min <= s.mean * (1.0 + 1e-12) && s.mean <= s.max * (1.0 + 1e-12));
        prop_assert!(s.std >= 0.0);
    }

    #[test]
    fn plans_are_reproducible(sizes in prop::collection::vec(8usize..200, 1..5), reps in 1usize..6, seed in any::<u64>()) {
        let machine = MachineSpec::builtin("sandybridge-e5-2670").unwrap();
        let run = || {
            let mut be = SyntheticBackend::roofline(&machine, 1).with_noise(0.05, seed);
            let mut plan = MeasurementPlan::new(gemm_calls(&sizes), reps);
            plan.seed = seed;
            run_plan(&plan, &mut be, &mut BufferStore::new()).unwrap()
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(&a.order, &b.order);
        let bits = |r: &dlaperf::sampler::PlanResult| -> Vec<Vec<u64>> {
            r.timings.iter().map(|t| t.iter().map(|v| v.to_bits()).collect()).collect()
        };
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn warm_and_timed_runs_share_bindings(sizes in prop::collection::vec(8usize..200, 1..5), reps in 1usize..6, seed in any::<u64>()) {
        let machine = MachineSpec::builtin("sandybridge-e5-2670").unwrap();
        let mut be = Recorder { inner: SyntheticBackend::roofline(&machine, 1), runs: Vec::new() };
        let mut plan = MeasurementPlan::new(gemm_calls(&sizes), reps);
        plan.seed = seed;
        plan.warm_policy = WarmPolicy::DoubleExecution;
        run_plan(&plan, &mut be, &mut BufferStore::new()).unwrap();
        prop_assert_eq!(be.runs.len(), 2 * sizes.len() * reps);
        for pair in be.runs.chunks(2) {
            prop_assert_eq!(&pair[0], &pair[1]);
        }
    }
}

/// Leaves inside the root, summing to its volume, overlapping only on boundaries.
fn is_partition(m: &PiecewiseModel) -> bool {
    let volume = |b: &[(usize, usize)]| b.iter().map(|(l, u)| (u - l) as u128).product::<u128>();
    let inside = m
        .leaves
        .iter()
        .all(|l| l.bounds.iter().zip(&m.root.bounds).all(|((a, b), (lo, hi))| lo <= a && a < b && b <= hi));
    let disjoint = m.leaves.iter().enumerate().all(|(i, x)| {
        m.leaves[i + 1..]
            .iter()
            .all(|y| x.bounds.iter().zip(&y.bounds).any(|(p, q)| p.1 <= q.0 || q.1 <= p.0))
    });
    let total: u128 = m.leaves.iter().map(|l| volume(&l.bounds)).sum();
    inside && disjoint && total == volume(&m.root.bounds)
}

fn domain_strategy(dims: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((1usize..40, 12usize..80), dims)
        .prop_map(|v| v.into_iter().map(|(l, w)| (8 * l, 8 * (l + w))).collect())
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn refinement_partitions_the_domain(bounds in domain_strategy(2), kink in (50.0f64..600.0, 50.0f64..600.0), width in 4usize..9, seed in any::<u64>()) {
        let mut be = SyntheticBackend::new(move |c: &Call| {
            let s = c.sizes();
            let (x, y) = (s[0] as f64, s[1] as f64);
            1e-6 + 1e-9 * x * y + 1e-12 * ((x - kink.0).max(0.0) * (y - kink.1).max(0.0)).powi(2)
        });
        let mut sampler = Sampler::new(&mut be, seed);
        let mut cfg = default_config(Kernel::Dtrsm, 1);
        cfg.repetitions = 1;
        cfg.min_width = 8 * width;
        let case = Case::new(Kernel::Dtrsm, &["L", "L", "N", "N"], &[1.0]).unwrap();
        let dom = Domain::new(bounds).unwrap();
        let m = adaptive_refine(&mut sampler, &cfg, Kernel::Dtrsm, &case, &dom).unwrap();
        prop_assert!(is_partition(&m));
    }

    #[test]
    fn polynomials_within_the_basis_need_no_split(bounds in domain_strategy(1), c in prop::collection::vec(0.0f64..1.0, 4), overfitting in 0u32..3) {
        let mut be = SyntheticBackend::new(move |call: &Call| {
            let n = call.sizes()[0] as f64;
            1e-6 * (1.0 + c[0] + c[1] * n + c[2] * n * n * 1e-3 + c[3] * n.powi(3) * 1e-6)
        });
        let mut sampler = Sampler::new(&mut be, 0);
        let mut cfg = default_config(Kernel::Dpotf2, 1);
        cfg.repetitions = 1;
        cfg.overfitting = overfitting;
        let case = Case::new(Kernel::Dpotf2, &["L"], &[]).unwrap();
        let dom = Domain::new(bounds).unwrap();
        let m = adaptive_refine(&mut sampler, &cfg, Kernel::Dpotf2, &case, &dom).unwrap();
        prop_assert_eq!(m.leaves.len(), 1);
    }

    #[test]
    fn evaluation_is_pure(bounds in domain_strategy(1), probes in prop::collection::vec(0.0f64..1.0, 1..10)) {
        let mut be = SyntheticBackend::new(|call: &Call| 1e-7 * (1.0 + call.sizes()[0] as f64));
        let mut sampler = Sampler::new(&mut be, 3);
        let mut cfg = default_config(Kernel::Dpotf2, 1);
        cfg.repetitions = 1;
        let case = Case::new(Kernel::Dpotf2, &["L"], &[]).unwrap();
        let dom = Domain::new(bounds.clone()).unwrap();
        let model = KernelModel::generate(&mut sampler, "m", 1, Kernel::Dpotf2, &[(case, dom)], &cfg, 3).unwrap();
        let copy = KernelModel::from_json(&model.to_json().unwrap()).unwrap();
        let (lo, hi) = bounds[0];
        for p in probes {
            let n = lo + ((hi - lo) as f64 * p) as usize;
            let call = Call::from_parts(Kernel::Dpotf2, &["L"], &[n], &[], vec![Operand::new("A", 0)], &[n], &[]).unwrap();
            let first = model.evaluate(&call).unwrap();
            prop_assert_eq!(first, model.evaluate(&call).unwrap());
            prop_assert_eq!(first, copy.evaluate(&call).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn grids_have_the_requested_points_or_fail(lo in 1usize..200, w in 0usize..200, degree in 0u32..6, oversampling in 1usize..6, cheb in any::<bool>()) {
        let (lo, hi) = (8 * lo, 8 * (lo + w));
        let count = degree as usize + 1 + oversampling;
        let kind = if cheb { GridKind::Chebyshev } else { GridKind::Cartesian };
        match grid_points_1d(lo, hi, count, kind) {
            Ok(p) => {
                prop_assert!(p.len() <= count && p.len() >= 2);
                prop_assert!(p.iter().all(|v| v % 8 == 0 && lo <= *v && *v <= hi));
                prop_assert!(p.windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!((p[0], p[p.len() - 1]), (lo, hi));
            }
            Err(_) => prop_assert!(count > (hi - lo) / 8 + 1),
        }
    }
}

fn flops_of(seq: &[Invocation]) -> u64 {
    seq.iter().map(|i| i.flops().unwrap()).sum()
}

fn call_multiset(seq: &[Invocation]) -> BTreeMap<(Kernel, Vec<usize>), usize> {
    let mut m = BTreeMap::new();
    for c in seq.iter().filter_map(Invocation::call).filter(|c| !c.is_empty()) {
        // Mirrored steps apply operators from the other side, transposing shapes.
        let mut sizes = c.sizes();
        sizes.sort_unstable();
        *m.entry((c.kernel, sizes)).or_default() += 1;
    }
    m
}

/// Per-kernel rate estimator with a fixed spread.
fn rate_estimator(rates: Vec<f64>, scale: f64) -> FnEstimator<impl Fn(&Call) -> SummaryStats> {
    FnEstimator(move |c: &Call| {
        let t = c.flop_count().unwrap() as f64 / rates[c.kernel as usize % rates.len()] * scale;
        SummaryStats { min: 0.9 * t, median: t, max: 1.2 * t, mean: 1.05 * t, std: 0.1 * t }
    })
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn blocked_algorithms_conserve_flops(alg in prop::sample::select(vec!["chol1", "chol2", "chol3", "dlauum", "dpotrf"]), n in 1usize..=512, b in 1usize..=512) {
        let b = b.min(n);
        let p = Problem::square(n);
        prop_assert_eq!(flops_of(&call_sequence(alg, p, b).unwrap()), operation_cost(alg, p).unwrap());
    }

    #[test]
    fn redundant_inversions_do_extra_work(pair in prop::sample::select(vec![("trinv4", "trinv1"), ("trinv8", "trinv5")]), n in 1usize..=256, b in 1usize..=256) {
        let b = b.min(n);
        let p = Problem::square(n);
        let (extra, lean) = (flops_of(&call_sequence(pair.0, p, b).unwrap()), flops_of(&call_sequence(pair.1, p, b).unwrap()));
        // The redundant update is nonempty once a step has blocks on both sides.
        if n > 2 * b {
            prop_assert!(extra > lean);
        } else {
            prop_assert!(extra >= lean);
        }
    }

    #[test]
    fn mirrored_inversions_issue_the_same_calls(k in 1usize..=4, n in 1usize..=200, b in 1usize..=200) {
        let b = b.min(n);
        let p = Problem::square(n);
        let fwd = call_steps(&format!("trinv{k}"), p, b).unwrap();
        let bwd = call_steps(&format!("trinv{}", k + 4), p, b).unwrap();
        prop_assert_eq!(fwd.len(), bwd.len());
        prop_assert_eq!(call_multiset(&fwd.concat()), call_multiset(&bwd.concat()));
    }

    #[test]
    fn runtime_prediction_is_additive(alg in prop::sample::select(vec!["chol3", "trinv1", "dsygst", "dgeqrf"]), n in 16usize..300, b in 8usize..64, cut in 0.0f64..1.0, rates in prop::collection::vec(1e9f64..1e10, 1..6)) {
        let seq = call_sequence(alg, Problem::square(n), b).unwrap();
        let at = (seq.len() as f64 * cut) as usize;
        let est = rate_estimator(rates, 1.0);
        let whole = predict_runtime(&est, &seq).unwrap().stats;
        let (x, y) = (predict_runtime(&est, &seq[..at]).unwrap().stats, predict_runtime(&est, &seq[at..]).unwrap().stats);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1e-300);
        prop_assert!(close(whole.min, x.min + y.min) && close(whole.median, x.median + y.median));
        prop_assert!(close(whole.max, x.max + y.max) && close(whole.mean, x.mean + y.mean));
        prop_assert!(close(whole.std, (x.std * x.std + y.std * y.std).sqrt()));
    }

    #[test]
    fn ranking_ignores_uniform_scaling(n in 64usize..600, b in 8usize..128, rates in prop::collection::vec(1e9f64..1e10, 1..6), scale in 1e-3f64..1e3) {
        let names = ["chol1", "chol2", "chol3", "trinv1", "trinv2", "trinv3"];
        let base: BTreeMap<String, f64> = rank_algorithms(&rate_estimator(rates.clone(), 1.0), &names, Problem::square(n), b)
            .unwrap()
            .into_iter()
            .map(|p| (p.algorithm, p.runtime.median))
            .collect();
        let scaled = rank_algorithms(&rate_estimator(rates, scale), &names, Problem::square(n), b).unwrap();
        // Ties may reorder under rounding; strict orderings may not.
        for w in scaled.windows(2) {
            let (x, y) = (base[&w[0].algorithm], base[&w[1].algorithm]);
            prop_assert!(x <= y * (1.0 + 1e-12), "{} before {}", w[0].algorithm, w[1].algorithm);
        }
    }
}

proptest! {
    #![proptest_config(config(512))]

    #[test]
    fn smoothing_is_signed_bounded_and_increasing(r in -5.0f64..1.0, dr in 1e-6f64..1.0, alpha in 0.1f64..8.0, beta in 0.1f64..8.0) {
        // Beyond a slope of about 18, tanh rounds to exactly one in f64.
        prop_assume!(alpha.max(beta) * (r.abs() + dr) < 18.0);
        let p = SmoothingParams { alpha, beta };
        let (f, g) = (smoothing(r, &p), smoothing(r + dr, &p));
        prop_assert_eq!(smoothing(0.0, &p), 0.0);
        prop_assert!(f.abs() < 1.0);
        prop_assert!(r == 0.0 || f.signum() == r.signum());
        prop_assert!(f < g);
    }

    #[test]
    fn smoothing_conserves_bytes(ops in prop::collection::vec((1u64..1 << 32, -4.0f64..1.0), 1..6), t in (1e-7f64..1e-2, 1e-7f64..1e-2)) {
        let p = SmoothingParams::default();
        let total: f64 = ops.iter().map(|o| o.0 as f64).sum();
        let (ic, oc) = smooth_weights(&ops, &p);
        prop_assert!(((ic + oc) - total).abs() <= 1e-12 * total);
        let e = initial_estimate(ic, oc, t.0, t.1).unwrap();
        prop_assert!(t.0.min(t.1) <= e && e <= t.0.max(t.1));
    }

    #[test]
    fn steep_smoothing_approaches_the_sign_rule(r in prop_oneof![-1.0f64..-1e-3, 1e-3f64..1.0], bytes in 1u64..1000) {
        let steep = SmoothingParams { alpha: 1e6, beta: 1e6 };
        let (a, b) = smooth_weights(&[(bytes, r)], &steep);
        let (c, d) = hard_weights(&[(bytes, r)]);
        prop_assert!((a - c).abs() <= 1e-6 * bytes as f64 && (b - d).abs() <= 1e-6 * bytes as f64);
    }
}

/// Direct evaluation of C += A * B over every index combination.
fn naive_contraction(spec: &ContractionSpec, a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    let all = spec.all_indices();
    let offset = |t: TensorId, point: &BTreeMap<char, usize>| -> usize {
        spec.indices(t).iter().zip(spec.strides(t)).map(|(i, s)| point[i] * s).sum()
    };
    let mut out = c.to_vec();
    let mut point: BTreeMap<char, usize> = all.iter().map(|&i| (i, 0)).collect();
    loop {
        out[offset(TensorId::C, &point)] += a[offset(TensorId::A, &point)] * b[offset(TensorId::B, &point)];
        let mut d = 0;
        loop {
            if d == all.len() {
                return out;
            }
            let e = point.get_mut(&all[d]).unwrap();
            *e += 1;
            if *e < spec.extent(all[d]) {
                break;
            }
            *e = 0;
            d += 1;
        }
    }
}

const CONTRACTIONS: [&str; 3] = [
    "C[a,b,c] = A[a,i] * B[i,b,c] a=1 b=1 c=1 i=1",
    "C[a] = A[i,a,j] * B[j,i] a=1 i=1 j=1",
    "C[a,b,c] = A[i,j,a] * B[j,b,i,c] a=1 b=1 c=1 i=1 j=1",
];

fn contraction(which: usize, extents: &[usize]) -> ContractionSpec {
    let base = parse_spec(CONTRACTIONS[which]).unwrap();
    let ext: Vec<(char, usize)> = base.all_indices().into_iter().zip(extents.iter().copied()).collect();
    base.with_extents(&ext).unwrap()
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn every_algorithm_matches_the_oracle(which in 0usize..2, extents in prop::collection::vec(1usize..=6, 5), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let spec = contraction(which, &extents);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |t: TensorId| -> Vec<f64> { (0..spec.size(t)).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let (a, b, c) = (fill(TensorId::A), fill(TensorId::B), fill(TensorId::C));
        let want = naive_contraction(&spec, &a, &b, &c);
        let scale = want.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for alg in generate_algorithms(&spec) {
            let got = execute_algorithm(&alg, &spec, &a, &b, &c).unwrap();
            let err = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max) / scale;
            prop_assert!(err <= 1e-12, "{} on {}: {:e}", alg.name, spec, err);
        }
    }

    #[test]
    fn benchmark_weights_sum_to_one(which in 0usize..3, extents in prop::collection::vec(1usize..=24, 5), cache_kib in 1u64..4096) {
        let spec = contraction(which, &extents);
        for alg in generate_algorithms(&spec) {
            let benches = build_benchmarks(&alg, &spec, cache_kib << 10, &TensorConfig::default()).unwrap();
            for st in 0..alg.statements(&spec).len() {
                let w: f64 = benches.iter().filter(|b| b.statement == st).map(|b| b.weight).sum();
                prop_assert!((w - 1.0).abs() <= 1e-12, "{} statement {}: {}", alg.name, st, w);
            }
        }
    }

    #[test]
    fn algorithm_names_are_unique_and_stable(which in 0usize..3, extents in prop::collection::vec(1usize..=9, 5)) {
        let spec = contraction(which, &extents);
        let names: Vec<String> = generate_algorithms(&spec).into_iter().map(|a| a.name).collect();
        let again: Vec<String> = generate_algorithms(&spec).into_iter().map(|a| a.name).collect();
        let unique: std::collections::BTreeSet<&String> = names.iter().collect();
        prop_assert_eq!(unique.len(), names.len());
        prop_assert_eq!(names, again);
    }
}

proptest! {
    #![proptest_config(config(256))]

    /// Regions laid out as one access history: each region's distance is
    /// everything accessed after it.
    #[test]
    fn setups_reproduce_access_distances(parts in prop::collection::vec((1usize..5000, 0usize..20000), 1..6), cache_kib in 1u64..512, budget in 0.5f64..2.0) {
        let mut entries = Vec::new();
        let mut after = 0;
        for (i, &(size, gap)) in parts.iter().enumerate().rev() {
            entries.push((Region::new(format!("R{i}"), 0, vec![(size, 1)]), after));
            after += size + gap;
        }
        let setup = build_setup(&entries, cache_kib << 10, budget);
        let limit = (budget * (cache_kib << 10) as f64 / 8.0).floor() as usize;
        prop_assert!(setup.total_elements() <= limit);
        let distance: BTreeMap<&Region, usize> = entries.iter().map(|(r, d)| (r, *d)).collect();
        let mut right = 0;
        for item in setup.items.iter().rev() {
            if let SetupItem::Operand(r) = item {
                prop_assert_eq!(right, distance[r].min(limit - r.elements()));
            }
            right += item.elements();
        }
    }
}
