//! Piecewise polynomial performance models built by adaptive refinement.

mod fit;
mod store;

pub use fit::{fit_relative_lsq, leaf_error, ErrorMeasure};
pub use store::{required_cases, KernelModel, ModelSet, FORMAT_VERSION};

use crate::error::{Error, Result};
use crate::kernels::{size_degrees, Arg, ArgKind, BufferStore, Call, Kernel, Operand, Structure};
use crate::sampler::{
    run_plan, Backend, MeasurementPlan, Statistic, SummaryStats, WarmPolicy,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Fixed leading dimension and large increment of measurement calls.
pub const LARGE_DIMENSION: usize = 5000;

/// Representative value of the scalar class `other`.
pub const OTHER_SCALAR: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Cartesian,
    Chebyshev,
}

/// Parameters of the adaptive refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Degree increase over the kernel's cost degree in every dimension.
    pub overfitting: u32,
    /// Extra points per dimension beyond degree + 1.
    pub oversampling: usize,
    pub grid: GridKind,
    pub repetitions: usize,
    pub reference_statistic: Statistic,
    pub error_measure: ErrorMeasure,
    /// Target error as a fraction.
    pub error_bound: f64,
    /// Multiple of 8, at least 8.
    pub min_width: usize,
    pub warm_policy: WarmPolicy,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.error_bound <= 0.0 {
            return Err(Error::Config("error bound must be positive".into()));
        }
        if self.min_width < 8 || self.min_width % 8 != 0 {
            return Err(Error::Config("minimum width must be a multiple of 8".into()));
        }
        if self.oversampling < 1 || self.repetitions < 1 {
            return Err(Error::Config(
                "oversampling and repetitions must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Default configuration with the dgemm and multi-threaded adjustments.
pub fn default_config(kernel: Kernel, threads: u32) -> ModelConfig {
    let gemm = kernel == Kernel::Dgemm;
    let min_width = match (gemm, threads > 1) {
        (true, true) => 256,
        (true, false) | (false, true) => 64,
        (false, false) => 32,
    };
    ModelConfig {
        overfitting: if gemm { 0 } else { 2 },
        oversampling: 4,
        grid: GridKind::Chebyshev,
        repetitions: 10,
        reference_statistic: Statistic::Min,
        error_measure: ErrorMeasure::Maximum,
        error_bound: 0.01,
        min_width,
        warm_policy: WarmPolicy::DoubleExecution,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarClass {
    #[serde(rename = "-1")]
    MinusOne,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    Other,
}

impl ScalarClass {
    pub fn of(v: f64) -> Self {
        if v == -1.0 {
            ScalarClass::MinusOne
        } else if v == 0.0 {
            ScalarClass::Zero
        } else if v == 1.0 {
            ScalarClass::One
        } else {
            ScalarClass::Other
        }
    }

    pub fn representative(self) -> f64 {
        match self {
            ScalarClass::MinusOne => -1.0,
            ScalarClass::Zero => 0.0,
            ScalarClass::One => 1.0,
            ScalarClass::Other => OTHER_SCALAR,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncClass {
    One,
    Large,
}

impl IncClass {
    pub fn of(inc: isize) -> Self {
        if inc.unsigned_abs() == 1 {
            IncClass::One
        } else {
            IncClass::Large
        }
    }

    pub fn representative(self) -> isize {
        match self {
            IncClass::One => 1,
            IncClass::Large => LARGE_DIMENSION as isize,
        }
    }
}

/// Flag values plus scalar and increment classes of a call family.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Case {
    pub flags: Vec<String>,
    pub scalars: Vec<ScalarClass>,
    pub increments: Vec<IncClass>,
}

impl Case {
    pub fn of_call(call: &Call) -> Self {
        Case {
            flags: call.flags().iter().map(|s| s.to_string()).collect(),
            scalars: call.scalars().into_iter().map(ScalarClass::of).collect(),
            increments: call.incs().into_iter().map(IncClass::of).collect(),
        }
    }

    /// Case from flags and scalar values with unit increments.
    pub fn new(kernel: Kernel, flags: &[&str], scalars: &[f64]) -> Result<Self> {
        let desc = kernel.descriptor();
        desc.check_flags(flags)?;
        if scalars.len() != desc.scalar_positions().len() {
            return Err(Error::Config(format!(
                "{kernel} takes {} scalars",
                desc.scalar_positions().len()
            )));
        }
        Ok(Case {
            flags: flags.iter().map(|s| s.to_string()).collect(),
            scalars: scalars.iter().copied().map(ScalarClass::of).collect(),
            increments: vec![IncClass::One; desc.inc_positions().len()],
        })
    }

    pub fn flag_refs(&self) -> Vec<&str> {
        self.flags.iter().map(|s| s.as_str()).collect()
    }

    pub fn label(&self) -> String {
        let mut parts: Vec<String> = self.flags.clone();
        parts.extend(self.scalars.iter().map(|s| match s {
            ScalarClass::MinusOne => "-1".to_string(),
            ScalarClass::Zero => "0".to_string(),
            ScalarClass::One => "1".to_string(),
            ScalarClass::Other => "x".to_string(),
        }));
        parts.join(",")
    }
}

/// Hyper-rectangle of sizes; bounds are multiples of 8 and at least 8.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Domain {
    pub bounds: Vec<(usize, usize)>,
}

impl Domain {
    pub fn new(bounds: Vec<(usize, usize)>) -> Result<Self> {
        for &(l, u) in &bounds {
            if l < 8 || l > u || l % 8 != 0 || u % 8 != 0 {
                return Err(Error::Domain(format!(
                    "invalid interval [{l}, {u}]: bounds must be multiples of 8, at least 8"
                )));
            }
        }
        Ok(Domain { bounds })
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn width(&self, d: usize) -> usize {
        self.bounds[d].1 - self.bounds[d].0
    }

    /// Whether a point lies in the closed domain.
    pub fn contains(&self, x: &[usize]) -> bool {
        x.len() == self.dims() && x.iter().zip(&self.bounds).all(|(v, (l, u))| l <= v && v <= u)
    }
}

/// Exponent vectors with `a_i <= degrees_i`, by total degree and then
/// descending lexicographic order.
pub fn monomial_basis(degrees: &[u32]) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![vec![]];
    for &d in degrees {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=d).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out.sort_by(|a, b| {
        let (sa, sb): (u32, u32) = (a.iter().sum(), b.iter().sum());
        sa.cmp(&sb).then_with(|| b.cmp(a))
    });
    out
}

/// Basis degrees of a case: cost degree plus overfitting per size argument.
pub fn basis_degrees(kernel: Kernel, case: &Case, overfitting: u32) -> Result<Vec<u32>> {
    Ok(size_degrees(kernel, &case.flag_refs())?
        .into_iter()
        .map(|d| d + overfitting)
        .collect())
}

fn round8(v: f64) -> usize {
    (8.0 * (v / 8.0 + 0.5).floor()).max(0.0) as usize
}

/// Points of one dimension, rounded to multiples of 8, duplicates removed.
pub fn grid_points_1d(lo: usize, hi: usize, count: usize, kind: GridKind) -> Result<Vec<usize>> {
    if count < 2 {
        return Err(Error::Grid("at least two points per dimension".into()));
    }
    let available = (hi - lo) / 8 + 1;
    if count > available {
        return Err(Error::Grid(format!(
            "{count} points requested in [{lo}, {hi}] with only {available} multiples of 8"
        )));
    }
    let (l, u) = (lo as f64, hi as f64);
    let mut pts: Vec<usize> = (0..count)
        .map(|i| {
            let t = match kind {
                GridKind::Cartesian => i as f64 / (count - 1) as f64,
                GridKind::Chebyshev => {
                    (1.0 - (i as f64 * std::f64::consts::PI / (count - 1) as f64).cos()) / 2.0
                }
            };
            round8(l + t * (u - l)).clamp(lo, hi)
        })
        .collect();
    pts.dedup();
    Ok(pts)
}

/// Cartesian product of per-dimension points.
pub fn grid_points(domain: &Domain, counts: &[usize], kind: GridKind) -> Result<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    for (d, &(l, u)) in domain.bounds.iter().enumerate() {
        let pts = grid_points_1d(l, u, counts[d], kind)?;
        out = out
            .into_iter()
            .flat_map(|p| {
                pts.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Ok(out)
}

/// Split of a domain at the rounded midpoint of one dimension.
pub fn split_at(domain: &Domain, dim: usize) -> (Domain, Domain) {
    let (l, u) = domain.bounds[dim];
    let m = 8 * ((l + u + 8) / 16);
    let mut left = domain.clone();
    let mut right = domain.clone();
    left.bounds[dim].1 = m;
    right.bounds[dim].0 = m;
    (left, right)
}

/// Splits the relatively largest dimension wider than `min_width`.
pub fn split_domain(domain: &Domain, min_width: usize) -> Result<(Domain, Domain)> {
    let dims: Vec<usize> = (0..domain.dims()).filter(|&d| domain.width(d) > min_width).collect();
    let dim = relatively_largest(domain, &dims)
        .ok_or_else(|| Error::Domain("no splittable dimension".into()))?;
    Ok(split_at(domain, dim))
}

/// Dimension with the largest `u / l`; ties go to the lowest index.
fn relatively_largest(domain: &Domain, candidates: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &d in candidates {
        let (l, u) = domain.bounds[d];
        match best {
            None => best = Some(d),
            Some(b) => {
                let (bl, bu) = domain.bounds[b];
                // u/l > bu/bl without rounding.
                if (u as u128) * (bl as u128) > (bu as u128) * (l as u128) {
                    best = Some(d);
                }
            }
        }
    }
    best
}

/// Polynomial coefficients of the five statistics over a shared basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub min: Vec<f64>,
    pub median: Vec<f64>,
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Coefficients {
    pub fn get(&self, s: Statistic) -> &[f64] {
        match s {
            Statistic::Min => &self.min,
            Statistic::Median => &self.median,
            Statistic::Max => &self.max,
            Statistic::Mean => &self.mean,
            Statistic::Std => &self.std,
        }
    }

    pub fn uniform(c: Vec<f64>) -> Self {
        Coefficients {
            min: c.clone(),
            median: c.clone(),
            max: c.clone(),
            mean: c,
            std: Vec::new(),
        }
    }
}

/// One polynomial piece. Monomials are evaluated in the local coordinates
/// `(x_i - origin_i) / scale_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub bounds: Vec<(usize, usize)>,
    pub origin: Vec<f64>,
    pub scale: Vec<f64>,
    pub basis: Vec<Vec<u32>>,
    pub coefficients: Coefficients,
    pub achieved_error: f64,
    pub samples: usize,
}

impl Leaf {
    pub fn local(&self, x: &[usize]) -> Vec<f64> {
        x.iter()
            .zip(self.origin.iter().zip(&self.scale))
            .map(|(&v, (o, s))| (v as f64 - o) / s)
            .collect()
    }

    pub fn eval_stat(&self, s: Statistic, x: &[usize]) -> f64 {
        eval_poly(&self.basis, self.coefficients.get(s), &self.local(x))
    }

    pub fn eval(&self, x: &[usize]) -> SummaryStats {
        SummaryStats::from_fn(|s| self.eval_stat(s, x).max(0.0))
    }
}

pub fn eval_monomial(exps: &[u32], t: &[f64]) -> f64 {
    exps.iter().zip(t).map(|(&a, &v)| v.powi(a as i32)).product()
}

pub fn eval_poly(basis: &[Vec<u32>], coef: &[f64], t: &[f64]) -> f64 {
    if coef.is_empty() {
        return 0.0;
    }
    basis.iter().zip(coef).map(|(e, c)| c * eval_monomial(e, t)).sum()
}

/// Piecewise model of one kernel case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseModel {
    pub case: Case,
    pub root: Domain,
    pub leaves: Vec<Leaf>,
}

impl PiecewiseModel {
    /// Leaf containing a point: lower bounds inclusive, upper bounds
    /// exclusive except at the root's upper bound.
    pub fn locate(&self, x: &[usize]) -> Option<&Leaf> {
        if !self.root.contains(x) {
            return None;
        }
        self.leaves.iter().find(|leaf| {
            leaf.bounds
                .iter()
                .zip(x)
                .zip(&self.root.bounds)
                .all(|((&(l, u), &v), &(_, ru))| l <= v && (v < u || (v == u && u == ru)))
        })
    }

    pub fn eval(&self, kernel: Kernel, sizes: &[usize]) -> Result<SummaryStats> {
        self.locate(sizes)
            .map(|l| l.eval(sizes))
            .ok_or_else(|| Error::OutOfDomain {
                kernel: kernel.name().into(),
                sizes: sizes.to_vec(),
            })
    }
}

/// Builds the measurement call for a case at the given sizes: leading
/// dimensions `max(5000, rows)`, one buffer per data argument named after it.
pub fn measurement_call(kernel: Kernel, case: &Case, sizes: &[usize]) -> Result<Call> {
    let desc = kernel.descriptor();
    let scalars: Vec<f64> = case.scalars.iter().map(|c| c.representative()).collect();
    let incs: Vec<isize> = case.increments.iter().map(|c| c.representative()).collect();
    let operands: Vec<Operand> = desc
        .data_positions()
        .into_iter()
        .map(|p| Operand::new(desc.args[p].name, 0))
        .collect();
    let nld = desc
        .args
        .iter()
        .filter(|a| matches!(a.kind, ArgKind::Ld(_)))
        .count();
    let mut call = Call::from_parts(
        kernel,
        &case.flag_refs(),
        sizes,
        &scalars,
        operands,
        &vec![LARGE_DIMENSION; nld],
        &incs,
    )?;
    let layouts = call.layouts()?;
    for (spec, arg) in desc.args.iter().zip(call.args.iter_mut()) {
        if let (ArgKind::Ld(pos), Arg::Ld(v)) = (spec.kind, arg) {
            let target = desc.args[pos].name;
            if let Some(l) = layouts.iter().find(|l| l.arg == target) {
                *v = LARGE_DIMENSION.max(l.shape.rows);
            }
        }
    }
    Ok(call)
}

/// Allocates buffers for a batch of calls: seeded values in `[0, 1)` plus a
/// dominant diagonal so factorizations and solves stay well defined.
pub fn allocate_operands(calls: &[Call], store: &mut BufferStore, seed: u64) -> Result<()> {
    use rand::{Rng, SeedableRng};
    let mut need: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for call in calls {
        for l in call.layouts()? {
            let e = need.entry(l.operand.buffer.to_string()).or_insert((0, 0, 0));
            e.0 = e.0.max(l.operand.offset + l.span());
            if l.shape.rows == l.shape.cols && l.shape.structure != Structure::Vector {
                e.1 = e.1.max(l.shape.rows);
                e.2 = l.stride.max(1) as usize;
            }
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for (name, (len, diag, ld)) in need {
        let mut v: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        for i in 0..diag {
            if i + i * ld < len {
                v[i + i * ld] += diag as f64;
            }
        }
        store.insert(name, v);
    }
    Ok(())
}

/// Measurement front end used by the refinement: caches statistics by point.
pub struct Sampler<'a> {
    backend: &'a mut dyn Backend,
    store: BufferStore,
    seed: u64,
    plans: u64,
    /// Number of distinct points measured.
    pub measured: usize,
}

impl<'a> Sampler<'a> {
    pub fn new(backend: &'a mut dyn Backend, seed: u64) -> Self {
        Sampler {
            backend,
            store: BufferStore::new(),
            seed,
            plans: 0,
            measured: 0,
        }
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    /// Times a batch of calls and returns their statistics.
    pub fn measure(&mut self, calls: Vec<Call>, config: &ModelConfig) -> Result<Vec<SummaryStats>> {
        if calls.is_empty() {
            return Ok(Vec::new());
        }
        let seed = self.seed.wrapping_add(self.plans);
        self.plans += 1;
        if self.backend.needs_memory() {
            allocate_operands(&calls, &mut self.store, seed)?;
        }
        let mut plan = MeasurementPlan::new(calls, config.repetitions);
        plan.warm_policy = config.warm_policy;
        plan.seed = seed;
        let res = run_plan(&plan, self.backend, &mut self.store)?;
        self.measured += plan.calls.len();
        res.summaries()
    }
}

type Samples = BTreeMap<Vec<usize>, SummaryStats>;

fn local_frame(domain: &Domain) -> (Vec<f64>, Vec<f64>) {
    let origin = domain
        .bounds
        .iter()
        .map(|&(l, u)| (l + u) as f64 / 2.0)
        .collect();
    let scale = domain
        .bounds
        .iter()
        .map(|&(l, u)| (((u - l) as f64) / 2.0).max(1.0))
        .collect();
    (origin, scale)
}

struct Refiner<'s, 'a> {
    sampler: &'s mut Sampler<'a>,
    config: &'s ModelConfig,
    kernel: Kernel,
    case: &'s Case,
    basis: Vec<Vec<u32>>,
    counts: Vec<usize>,
    degrees: Vec<u32>,
    cache: Samples,
}

impl Refiner<'_, '_> {
    /// Grid of a domain if every dimension keeps at least degree + 2 points.
    fn grid(&self, domain: &Domain) -> Result<Vec<Vec<usize>>> {
        for (d, &(l, u)) in domain.bounds.iter().enumerate() {
            let pts = grid_points_1d(l, u, self.counts[d], self.config.grid)?;
            if pts.len() < self.degrees[d] as usize + 2 {
                return Err(Error::Grid(format!(
                    "only {} distinct points in [{l}, {u}] for degree {}",
                    pts.len(),
                    self.degrees[d]
                )));
            }
        }
        grid_points(domain, &self.counts, self.config.grid)
    }

    fn sample(&mut self, points: &[Vec<usize>]) -> Result<Vec<SummaryStats>> {
        let missing: Vec<Vec<usize>> = points
            .iter()
            .filter(|p| !self.cache.contains_key(*p))
            .cloned()
            .collect();
        let calls = missing
            .iter()
            .map(|p| measurement_call(self.kernel, self.case, p))
            .collect::<Result<Vec<_>>>()?;
        let stats = self.sampler.measure(calls, self.config)?;
        for (p, s) in missing.into_iter().zip(stats) {
            self.cache.insert(p, s);
        }
        Ok(points.iter().map(|p| self.cache[p]).collect())
    }

    fn fit_leaf(&self, domain: &Domain, points: &[Vec<usize>], stats: &[SummaryStats]) -> Result<(Leaf, f64)> {
        let (origin, scale) = local_frame(domain);
        let local: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                p.iter()
                    .zip(origin.iter().zip(&scale))
                    .map(|(&v, (o, s))| (v as f64 - o) / s)
                    .collect()
            })
            .collect();
        let fit_stat = |s: Statistic| -> Result<Vec<f64>> {
            let values: Vec<f64> = stats.iter().map(|x| x.get(s)).collect();
            if s == Statistic::Std {
                // Spread can vanish; weight it by the mean instead.
                let means: Vec<f64> = stats.iter().map(|x| x.mean).collect();
                fit::fit_weighted_lsq(&local, &values, &means, &self.basis)
            } else {
                fit_relative_lsq(&local, &values, &self.basis)
            }
        };
        let reference = self.config.reference_statistic;
        let coefficients = Coefficients {
            min: fit_stat(Statistic::Min)?,
            median: fit_stat(Statistic::Median)?,
            max: fit_stat(Statistic::Max)?,
            mean: fit_stat(Statistic::Mean)?,
            std: fit_stat(Statistic::Std)?,
        };
        let values: Vec<f64> = stats.iter().map(|x| x.get(reference)).collect();
        let err = leaf_error(
            &local,
            &values,
            coefficients.get(reference),
            &self.basis,
            self.config.error_measure,
        );
        Ok((
            Leaf {
                bounds: domain.bounds.clone(),
                origin,
                scale,
                basis: self.basis.clone(),
                coefficients,
                achieved_error: err,
                samples: points.len(),
            },
            err,
        ))
    }

    fn splittable(&self, domain: &Domain) -> Vec<usize> {
        (0..domain.dims())
            .filter(|&d| domain.width(d) > self.config.min_width)
            .filter(|&d| {
                let (a, b) = split_at(domain, d);
                self.grid(&a).is_ok() && self.grid(&b).is_ok()
            })
            .collect()
    }

    fn refine(&mut self, domain: Domain, leaves: &mut Vec<Leaf>) -> Result<()> {
        let points = self.grid(&domain)?;
        let stats = self.sample(&points)?;
        let (leaf, err) = self.fit_leaf(&domain, &points, &stats)?;
        if err <= self.config.error_bound {
            leaves.push(leaf);
            return Ok(());
        }
        let dims = self.splittable(&domain);
        match relatively_largest(&domain, &dims) {
            None => {
                leaves.push(leaf);
                Ok(())
            }
            Some(d) => {
                let (left, right) = split_at(&domain, d);
                self.refine(left, leaves)?;
                self.refine(right, leaves)
            }
        }
    }
}

/// Raises upper bounds in steps of 8 until every dimension yields at least
/// degree + 2 distinct grid points. Bounds that already do are unchanged.
pub fn sampleable_domain(config: &ModelConfig, kernel: Kernel, case: &Case, domain: &Domain) -> Result<Domain> {
    let degrees = basis_degrees(kernel, case, config.overfitting)?;
    if degrees.len() != domain.dims() {
        return Err(Error::Domain(format!(
            "{kernel} has {} size arguments, domain has {}",
            degrees.len(),
            domain.dims()
        )));
    }
    let mut bounds = domain.bounds.clone();
    for ((lo, hi), &deg) in bounds.iter_mut().zip(&degrees) {
        let count = deg as usize + 1 + config.oversampling;
        // Chebyshev spacing near the ends exceeds 8 well before this width.
        let limit = *lo + 8 * count * count * 8;
        while grid_points_1d(*lo, *hi, count, config.grid).map_or(true, |p| p.len() < deg as usize + 2) {
            if *hi >= limit {
                return Err(Error::Grid(format!("no sampleable domain above [{lo}, {hi}]")));
            }
            *hi += 8;
        }
    }
    Domain::new(bounds)
}

/// Samples, fits and recursively splits `domain` until every leaf meets the
/// error bound or cannot be split further.
pub fn adaptive_refine(
    sampler: &mut Sampler<'_>,
    config: &ModelConfig,
    kernel: Kernel,
    case: &Case,
    domain: &Domain,
) -> Result<PiecewiseModel> {
    config.validate()?;
    let degrees = basis_degrees(kernel, case, config.overfitting)?;
    if degrees.len() != domain.dims() {
        return Err(Error::Domain(format!(
            "{kernel} has {} size arguments, domain has {}",
            degrees.len(),
            domain.dims()
        )));
    }
    let counts = degrees
        .iter()
        .map(|&d| d as usize + 1 + config.oversampling)
        .collect();
    let mut refiner = Refiner {
        sampler,
        config,
        kernel,
        case,
        basis: monomial_basis(&degrees),
        counts,
        degrees,
        cache: BTreeMap::new(),
    };
    let mut leaves = Vec::new();
    refiner.refine(domain.clone(), &mut leaves)?;
    Ok(PiecewiseModel {
        case: case.clone(),
        root: domain.clone(),
        leaves,
    })
}
