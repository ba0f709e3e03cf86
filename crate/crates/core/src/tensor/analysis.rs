//! Cache analysis of loop nests: access distances, prefetching and the
//! weighted micro-benchmarks that stand in for a whole algorithm.

use super::algorithm::{ContractionAlgorithm, Phase, SliceView, Statement, StmtKind};
use super::{ContractionSpec, TensorId};
use crate::error::{Error, Result};
use crate::kernels::Call;
use crate::sampler::{Access, CachePrecondition, Region};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Knobs of the cache analysis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorConfig {
    /// Doubles per cache line; one in this many line-shared accesses misses.
    pub line_doubles: usize,
    /// Minimum fraction of executions for a first-iteration benchmark.
    pub first_iteration_threshold: f64,
    /// Setups cover at most this multiple of the cache size.
    pub setup_budget: f64,
}

impl Default for TensorConfig {
    fn default() -> Self {
        TensorConfig {
            line_doubles: 8,
            first_iteration_threshold: 0.01,
            setup_budget: 1.25,
        }
    }
}

/// One access of a setup; remote sizes are in doubles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetupItem {
    Operand(Region),
    Remote(usize),
}

impl SetupItem {
    pub fn elements(&self) -> usize {
        match self {
            SetupItem::Operand(r) => r.elements(),
            SetupItem::Remote(n) => *n,
        }
    }
}

/// Accesses that recreate the cache state seen by a statement.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TensorSetup {
    pub items: Vec<SetupItem>,
}

impl TensorSetup {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total_elements(&self) -> usize {
        self.items.iter().map(SetupItem::elements).sum()
    }

    pub fn to_precondition(&self) -> Result<CachePrecondition> {
        CachePrecondition::new(
            self.items
                .iter()
                .map(|i| match i {
                    SetupItem::Operand(r) => Access::Operand(r.clone()),
                    SetupItem::Remote(n) => Access::Remote(*n as u64 * 8),
                })
                .collect(),
        )
    }
}

/// Operands touched between the previous and the current use of some data,
/// each joined over the loops it has been released from.
#[derive(Clone, Debug, Default)]
struct Footprint(BTreeMap<String, (SliceView, BTreeSet<char>)>);

impl Footprint {
    /// A union keeps only the indices fixed in both parts.
    fn add(&mut self, view: &SliceView, fixed: BTreeSet<char>) {
        match self.0.get_mut(&view.buffer) {
            Some(e) => e.1 = e.1.intersection(&fixed).copied().collect(),
            None => {
                self.0.insert(view.buffer.clone(), (view.clone(), fixed));
            }
        }
    }

    fn merge(&mut self, other: &Footprint) {
        for (v, f) in other.0.values() {
            self.add(v, f.clone());
        }
    }

    fn release(&mut self, index: char) {
        for e in self.0.values_mut() {
            e.1.remove(&index);
        }
    }

    fn without(mut self, buffer: &str) -> Self {
        self.0.remove(buffer);
        self
    }

    fn elements(&self) -> usize {
        self.0.values().map(|(v, f)| v.joined_elements(f)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Node {
    Stmt(usize),
    /// The loop at this depth with everything inside it.
    Loop(usize),
}

/// The loop nest as a tree of statements.
struct Nest<'a> {
    alg: &'a ContractionAlgorithm,
    stmts: Vec<Statement>,
}

impl<'a> Nest<'a> {
    fn new(alg: &'a ContractionAlgorithm, spec: &ContractionSpec) -> Self {
        Nest {
            alg,
            stmts: alg.statements(spec),
        }
    }

    fn kernel(&self) -> usize {
        self.stmts
            .iter()
            .position(|s| s.kind == StmtKind::Kernel)
            .expect("kernel statement")
    }

    /// Children of the body at `level` loops deep, in program order.
    fn body(&self, level: usize) -> Vec<Node> {
        let at = |phase| {
            self.stmts
                .iter()
                .enumerate()
                .filter(move |(_, s)| s.depth == level && s.phase == phase)
                .map(|(i, _)| Node::Stmt(i))
        };
        let mut out: Vec<Node> = at(Phase::Before).collect();
        if level < self.alg.loops.len() {
            out.push(Node::Loop(level));
        } else {
            out.extend(at(Phase::Core));
        }
        out.extend(at(Phase::After));
        out
    }

    /// Sliced indices of a view whose loops enclose `level`.
    fn fixed_at(&self, view: &SliceView, level: usize) -> BTreeSet<char> {
        view.sliced
            .iter()
            .map(|s| s.0)
            .filter(|i| self.alg.loops[..level].contains(i))
            .collect()
    }

    fn members(&self, node: Node) -> Vec<&Statement> {
        match node {
            Node::Stmt(i) => vec![&self.stmts[i]],
            Node::Loop(l) => self.stmts.iter().filter(|s| s.depth > l).collect(),
        }
    }

    /// Footprint of a node as seen from the body at `level`.
    fn footprint(&self, node: Node, level: usize) -> Footprint {
        let mut f = Footprint::default();
        for s in self.members(node) {
            for v in &s.operands {
                f.add(v, self.fixed_at(v, level));
            }
        }
        f
    }

    fn touches(&self, node: Node, buffer: &str) -> bool {
        self.members(node)
            .iter()
            .any(|s| s.operands.iter().any(|v| v.buffer == buffer))
    }

    /// Elements touched since the last use of `buffer`, searching backwards
    /// from `node` in the body at `level`. `seed` is the footprint of the
    /// start node itself when it ran before; `prefetch` treats the enclosing
    /// loop as if the data stayed the same across its iterations.
    fn distance(
        &self,
        mut level: usize,
        mut node: Node,
        buffer: &str,
        mut fixed: BTreeSet<char>,
        seed: Option<Footprint>,
        prefetch: bool,
    ) -> usize {
        let mut acc = Footprint::default();
        let mut seed = seed;
        let mut first = true;
        loop {
            let body = self.body(level);
            let idx = body.iter().position(|n| *n == node).expect("node in body");
            for &sib in body[..idx].iter().rev() {
                let fp = self.footprint(sib, level);
                if self.touches(sib, buffer) {
                    acc.merge(&fp.without(buffer));
                    return acc.elements();
                }
                acc.merge(&fp);
            }
            if let Some(s) = seed.take() {
                acc.merge(&s);
            }
            if level == 0 {
                return acc.elements();
            }
            let x = self.alg.loops[level - 1];
            if !fixed.contains(&x) || (prefetch && first) {
                // The previous iteration of `x` touched the same data.
                for &sib in body[idx + 1..].iter().rev() {
                    let fp = self.footprint(sib, level);
                    if self.touches(sib, buffer) {
                        acc.merge(&fp.without(buffer));
                        return acc.elements();
                    }
                    acc.merge(&fp);
                }
                return acc.elements();
            }
            // Each iteration of `x` touches other data: the whole loop ran since.
            for &n in &body {
                acc.merge(&self.footprint(n, level - 1));
            }
            acc.release(x);
            fixed.remove(&x);
            node = Node::Loop(level - 1);
            level -= 1;
            first = false;
        }
    }

    fn statement_distance(&self, stmt: usize, view: &SliceView, prefetch: bool) -> usize {
        let s = &self.stmts[stmt];
        self.distance(
            s.depth,
            Node::Stmt(stmt),
            &view.buffer,
            self.fixed_at(view, s.depth),
            None,
            prefetch,
        )
    }

    /// Distance at the first iteration of the loop at `level`.
    fn first_iteration(&self, level: usize, view: &SliceView) -> usize {
        let seed = self.footprint(Node::Loop(level), level);
        self.distance(
            level,
            Node::Loop(level),
            &view.buffer,
            self.fixed_at(view, level),
            Some(seed),
            false,
        )
    }
}

fn kernel_view(alg: &ContractionAlgorithm, spec: &ContractionSpec, t: TensorId) -> Result<SliceView> {
    let v = alg.operand_view(spec, t);
    if v.kept.is_empty() {
        return Err(Error::Contraction(format!(
            "tensor {} is a scalar of the {} kernel in {}",
            t.buffer(),
            alg.kernel.name(),
            alg.name
        )));
    }
    Ok(v)
}

/// Doubles accessed between two consecutive uses of a kernel operand.
pub fn access_distance_ast(alg: &ContractionAlgorithm, spec: &ContractionSpec, t: TensorId) -> Result<usize> {
    let view = kernel_view(alg, spec, t)?;
    let nest = Nest::new(alg, spec);
    Ok(nest.statement_distance(nest.kernel(), &view, false))
}

/// Access distance of a kernel operand in the first iteration of the loop
/// at `level` (0 is outermost).
pub fn first_iteration_distance(
    alg: &ContractionAlgorithm,
    spec: &ContractionSpec,
    t: TensorId,
    level: usize,
) -> Result<usize> {
    let view = kernel_view(alg, spec, t)?;
    if level >= alg.loops.len() {
        return Err(Error::Contraction(format!("{} has no loop at level {level}", alg.name)));
    }
    Ok(Nest::new(alg, spec).first_iteration(level, &view))
}

/// Hardware prefetching of a kernel operand across the innermost loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prefetch {
    pub tensor: TensorId,
    /// Consecutive iterations share cache lines; the first access of each
    /// line still misses.
    pub line_sharing: bool,
    /// Part of the operand brought in by the prefetcher.
    pub region: Region,
    /// The region covers less than the operand.
    pub partial: bool,
    /// Access distance of the prefetched region.
    pub distance: usize,
}

/// Prefetch of a kernel operand, if the innermost loop walks it with a short stride.
pub fn detect_prefetch(
    alg: &ContractionAlgorithm,
    spec: &ContractionSpec,
    t: TensorId,
    config: &TensorConfig,
) -> Result<Option<Prefetch>> {
    let view = kernel_view(alg, spec, t)?;
    let Some(&x) = alg.loops.last() else {
        return Ok(None);
    };
    if !view.varies_with(x) {
        return Ok(None);
    }
    let idx = spec.indices(t);
    let first = idx[0];
    let first_kept = view.kept.first().is_some_and(|k| k.0 == first);
    let line_sharing = x == first;
    let strided = idx.get(1) == Some(&x) && (first_kept || spec.extent(first) <= config.line_doubles);
    if !line_sharing && !strided {
        return Ok(None);
    }
    let mut region = view.region(&[]);
    let mut partial = false;
    if !line_sharing && first_kept && region.dims[0].0 > config.line_doubles {
        region.dims[0].0 = config.line_doubles;
        partial = true;
    }
    let nest = Nest::new(alg, spec);
    Ok(Some(Prefetch {
        tensor: t,
        line_sharing,
        region,
        partial,
        distance: nest.statement_distance(nest.kernel(), &view, true),
    }))
}

/// Setup that leaves each region at its access distance (in doubles).
/// Entries are ordered by decreasing distance, stable for ties; the setup is
/// truncated to the last `setup_budget` cache sizes of accesses.
pub fn build_setup(entries: &[(Region, usize)], cache_bytes: u64, setup_budget: f64) -> TensorSetup {
    if entries.iter().all(|e| e.1 == 0) {
        return TensorSetup::default();
    }
    let mut sorted: Vec<&(Region, usize)> = entries.iter().collect();
    sorted.sort_by(|a, b| b.1.cmp(&a.1));
    let mut items = Vec::new();
    for (j, (r, d)) in sorted.iter().enumerate() {
        items.push(SetupItem::Operand(r.clone()));
        // Accesses between this region and the next must fill the gap.
        let gap = match sorted.get(j + 1) {
            Some((next, dn)) => d.saturating_sub(dn + next.elements()),
            None => *d,
        };
        if gap > 0 {
            items.push(SetupItem::Remote(gap));
        }
    }
    let budget = (setup_budget * cache_bytes as f64 / 8.0).floor() as usize;
    let mut kept = Vec::new();
    let mut acc = 0;
    for item in items.into_iter().rev() {
        if acc >= budget {
            break;
        }
        let room = budget - acc;
        match item {
            SetupItem::Remote(n) => {
                kept.push(SetupItem::Remote(n.min(room)));
                acc += n.min(room);
            }
            SetupItem::Operand(r) if r.elements() <= room => {
                acc += r.elements();
                kept.push(SetupItem::Operand(r));
            }
            SetupItem::Operand(_) => {
                kept.push(SetupItem::Remote(room));
                acc = budget;
            }
        }
    }
    kept.reverse();
    TensorSetup { items: kept }
}

/// Which execution of a statement a benchmark represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Steady state with prefetching.
    Base,
    /// Steady state where line-shared accesses miss.
    PrefetchFailure,
    /// First iteration of the loop at this level.
    FirstIteration(usize),
}

/// A timed stand-in for a fraction of one statement's executions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MicroBenchmark {
    pub statement: usize,
    pub kind: StmtKind,
    pub variant: Variant,
    /// Fraction of the statement's executions; sums to one per statement.
    pub weight: f64,
    /// Executions of the statement per run of the algorithm.
    pub invocations: u64,
    /// Calls of one execution, all of the same shape.
    pub calls: Vec<Call>,
    pub setup: TensorSetup,
}

fn ordered_setup(mut entries: Vec<(Region, usize, usize)>, cache_bytes: u64, config: &TensorConfig) -> TensorSetup {
    entries.sort_by(|a, b| b.2.cmp(&a.2));
    let pairs: Vec<(Region, usize)> = entries.into_iter().map(|e| (e.0, e.1)).collect();
    build_setup(&pairs, cache_bytes, config.setup_budget)
}

/// Micro-benchmarks of every statement of an algorithm.
pub fn build_benchmarks(
    alg: &ContractionAlgorithm,
    spec: &ContractionSpec,
    cache_bytes: u64,
    config: &TensorConfig,
) -> Result<Vec<MicroBenchmark>> {
    if config.line_doubles == 0 || !(0.0..1.0).contains(&config.first_iteration_threshold) {
        return Err(Error::Config("invalid tensor analysis configuration".into()));
    }
    let nest = Nest::new(alg, spec);
    let mut out = Vec::new();
    for (si, stmt) in nest.stmts.iter().enumerate() {
        let invocations = alg.invocations(spec, stmt);
        let calls = alg.calls(spec, stmt, &[])?;
        let bench = |variant, weight, setup| MicroBenchmark {
            statement: si,
            kind: stmt.kind,
            variant,
            weight,
            invocations,
            calls: calls.clone(),
            setup,
        };
        if stmt.kind != StmtKind::Kernel {
            let entries = stmt
                .operands
                .iter()
                .map(|v| {
                    let d = nest.statement_distance(si, v, false);
                    (v.region(&[]), d, d)
                })
                .collect();
            out.push(bench(Variant::Base, 1.0, ordered_setup(entries, cache_bytes, config)));
            continue;
        }
        let mut base = Vec::new();
        let mut failure = Vec::new();
        let mut sharing = false;
        for t in TensorId::ALL {
            let view = alg.operand_view(spec, t);
            if view.kept.is_empty() {
                continue;
            }
            let access = nest.statement_distance(si, &view, false);
            let full = (view.region(&[]), access, access);
            match detect_prefetch(alg, spec, t, config)? {
                Some(p) => {
                    base.push((p.region.clone(), p.distance, access));
                    if p.partial {
                        base.push(full.clone());
                    }
                    if p.line_sharing {
                        sharing = true;
                        failure.push(full);
                    } else {
                        failure.push((p.region, p.distance, access));
                        if p.partial {
                            failure.push(full);
                        }
                    }
                }
                None => {
                    base.push(full.clone());
                    failure.push(full);
                }
            }
        }
        // Fraction of executions that are the first iteration of each loop.
        let extents = alg.loop_extents(spec);
        let mut levels = Vec::new();
        for l in (0..extents.len()).rev() {
            if extents[l] == 1 {
                continue;
            }
            let p = 1.0 / extents[l..].iter().map(|&e| e as f64).product::<f64>();
            if p <= config.first_iteration_threshold {
                break;
            }
            levels.push((l, p));
        }
        let steady = 1.0 - levels.first().map_or(0.0, |l| l.1);
        if sharing {
            let miss = 1.0 / config.line_doubles as f64;
            out.push(bench(Variant::Base, steady * (1.0 - miss), ordered_setup(base, cache_bytes, config)));
            out.push(bench(Variant::PrefetchFailure, steady * miss, ordered_setup(failure, cache_bytes, config)));
        } else {
            out.push(bench(Variant::Base, steady, ordered_setup(base, cache_bytes, config)));
        }
        for (k, &(l, p)) in levels.iter().enumerate() {
            let outer = levels.get(k + 1).map_or(0.0, |o| o.1);
            let entries = stmt
                .operands
                .iter()
                .map(|v| {
                    let d = nest.first_iteration(l, v);
                    (v.region(&[]), d, d)
                })
                .collect();
            out.push(bench(
                Variant::FirstIteration(l),
                p - outer,
                ordered_setup(entries, cache_bytes, config),
            ));
        }
    }
    Ok(out)
}
