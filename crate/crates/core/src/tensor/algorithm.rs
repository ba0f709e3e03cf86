//! Generation, lowering and execution of loop-nest contraction algorithms.

use super::{ContractionSpec, TensorId};
use crate::error::{Error, Result};
use crate::kernels::{execute, BufferStore, Call, Kernel, Operand};
use crate::sampler::Region;
use itertools::Itertools;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// The BLAS kernel at the core of a loop nest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKernel {
    Dot,
    Axpy,
    Gemv,
    Ger,
    Gemm,
}

impl TensorKernel {
    pub const ALL: [TensorKernel; 5] = [
        TensorKernel::Dot,
        TensorKernel::Axpy,
        TensorKernel::Gemv,
        TensorKernel::Ger,
        TensorKernel::Gemm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TensorKernel::Dot => "dot",
            TensorKernel::Axpy => "axpy",
            TensorKernel::Gemv => "gemv",
            TensorKernel::Ger => "ger",
            TensorKernel::Gemm => "gemm",
        }
    }

    pub fn blas(self) -> Kernel {
        match self {
            TensorKernel::Dot => Kernel::Ddot,
            TensorKernel::Axpy => Kernel::Daxpy,
            TensorKernel::Gemv => Kernel::Dgemv,
            TensorKernel::Ger => Kernel::Dger,
            TensorKernel::Gemm => Kernel::Dgemm,
        }
    }
}

/// Tensor indices mapped to the kernel's index slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelIndices {
    pub contracted: Option<char>,
    pub free_left: Option<char>,
    pub free_right: Option<char>,
}

impl KernelIndices {
    pub fn set(&self) -> Vec<char> {
        [self.contracted, self.free_left, self.free_right]
            .into_iter()
            .flatten()
            .collect()
    }
}

/// Contiguous copy of a tensor slice, placed after `depth` loops; output
/// copies are written back after the enclosed loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopySpec {
    pub tensor: TensorId,
    pub depth: usize,
}

/// Nested loops over the sliced indices around one BLAS kernel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionAlgorithm {
    /// Loop letters outermost first, a `'` after the loop holding each copy,
    /// then the kernel.
    pub name: String,
    pub kernel: TensorKernel,
    pub indices: KernelIndices,
    /// Sliced indices, outermost first.
    pub loops: Vec<char>,
    pub copies: Vec<CopySpec>,
}

/// Strided view of a tensor slice: kept dimensions span the kernel operand,
/// sliced dimensions are fixed by loop iterators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceView {
    pub buffer: String,
    /// `(index, extent, stride)` in storage order.
    pub kept: Vec<(char, usize, usize)>,
    /// `(index, extent, stride)` in storage order.
    pub sliced: Vec<(char, usize, usize)>,
}

impl SliceView {
    pub fn elements(&self) -> usize {
        self.kept.iter().map(|k| k.1).product()
    }

    /// Elements covered when only the `fixed` sliced indices stay fixed.
    pub fn joined_elements(&self, fixed: &BTreeSet<char>) -> usize {
        self.elements()
            * self
                .sliced
                .iter()
                .filter(|s| !fixed.contains(&s.0))
                .map(|s| s.1)
                .product::<usize>()
    }

    pub fn offset(&self, point: &[(char, usize)]) -> usize {
        self.sliced.iter().map(|&(i, _, s)| value(point, i) * s).sum()
    }

    pub fn region(&self, point: &[(char, usize)]) -> Region {
        Region::new(
            self.buffer.clone(),
            self.offset(point),
            self.kept.iter().map(|&(_, e, s)| (e, s)).collect(),
        )
    }

    pub fn varies_with(&self, index: char) -> bool {
        self.sliced.iter().any(|s| s.0 == index)
    }
}

fn value(point: &[(char, usize)], index: char) -> usize {
    point.iter().find(|p| p.0 == index).map_or(0, |p| p.1)
}

/// Position of a statement relative to the loop at its depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Before,
    Core,
    After,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StmtKind {
    Kernel,
    CopyIn(TensorId),
    CopyOut(TensorId),
}

/// One node of the loop nest that touches memory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Statement {
    pub kind: StmtKind,
    /// Number of enclosing loops.
    pub depth: usize,
    pub phase: Phase,
    /// Memory operands; scalars passed by value are excluded.
    pub operands: Vec<SliceView>,
}

/// All algorithms for a contraction: every admissible kernel index mapping
/// times every loop order, grouped by kernel.
pub fn generate_algorithms(spec: &ContractionSpec) -> Vec<ContractionAlgorithm> {
    let con = spec.contracted();
    let fa = spec.free(TensorId::A);
    let fb = spec.free(TensorId::B);
    let ki = |c: Option<char>, a: Option<char>, b: Option<char>| KernelIndices {
        contracted: c,
        free_left: a,
        free_right: b,
    };
    let mut mappings = Vec::new();
    for &k in &con {
        mappings.push((TensorKernel::Dot, ki(Some(k), None, None)));
    }
    for &f in &fa {
        mappings.push((TensorKernel::Axpy, ki(None, Some(f), None)));
    }
    for &f in &fb {
        mappings.push((TensorKernel::Axpy, ki(None, None, Some(f))));
    }
    for &k in &con {
        for &f in &fa {
            mappings.push((TensorKernel::Gemv, ki(Some(k), Some(f), None)));
        }
        for &f in &fb {
            mappings.push((TensorKernel::Gemv, ki(Some(k), None, Some(f))));
        }
    }
    for &a in &fa {
        for &b in &fb {
            mappings.push((TensorKernel::Ger, ki(None, Some(a), Some(b))));
        }
    }
    for &k in &con {
        for &a in &fa {
            for &b in &fb {
                mappings.push((TensorKernel::Gemm, ki(Some(k), Some(a), Some(b))));
            }
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (kernel, indices) in mappings {
        let set = indices.set();
        let sliced: Vec<char> = spec
            .all_indices()
            .into_iter()
            .filter(|i| !set.contains(i))
            .collect();
        for loops in sliced.iter().copied().permutations(sliced.len()) {
            let alg = ContractionAlgorithm::new(spec, kernel, indices, loops);
            if seen.insert(alg.name.clone()) {
                out.push(alg);
            }
        }
    }
    out
}

impl ContractionAlgorithm {
    /// Algorithm with copies wherever a matrix operand lacks a contiguous dimension.
    pub fn new(
        spec: &ContractionSpec,
        kernel: TensorKernel,
        indices: KernelIndices,
        loops: Vec<char>,
    ) -> Self {
        let set = indices.set();
        let mut copies = Vec::new();
        for t in TensorId::ALL {
            let idx = spec.indices(t);
            let kept = idx.iter().filter(|i| set.contains(i)).count();
            if kept == 2 && !set.contains(&idx[0]) {
                let depth = idx
                    .iter()
                    .filter_map(|i| loops.iter().position(|l| l == i))
                    .max()
                    .map_or(0, |p| p + 1);
                copies.push(CopySpec { tensor: t, depth });
            }
        }
        let mut name = String::new();
        for c in copies.iter().filter(|c| c.depth == 0) {
            let _ = c;
            name.push('\'');
        }
        for (p, l) in loops.iter().enumerate() {
            name.push(*l);
            for _ in copies.iter().filter(|c| c.depth == p + 1) {
                name.push('\'');
            }
        }
        let name = if name.is_empty() {
            kernel.name().to_string()
        } else {
            format!("{name}-{}", kernel.name())
        };
        ContractionAlgorithm {
            name,
            kernel,
            indices,
            loops,
            copies,
        }
    }

    pub fn copy_of(&self, t: TensorId) -> Option<&CopySpec> {
        self.copies.iter().find(|c| c.tensor == t)
    }

    /// Extent of each loop, outermost first.
    pub fn loop_extents(&self, spec: &ContractionSpec) -> Vec<usize> {
        self.loops.iter().map(|&l| spec.extent(l)).collect()
    }

    /// Slice of a tensor in its own storage.
    pub fn source_view(&self, spec: &ContractionSpec, t: TensorId) -> SliceView {
        let set = self.indices.set();
        let mut view = SliceView {
            buffer: t.buffer().to_string(),
            kept: Vec::new(),
            sliced: Vec::new(),
        };
        for (&i, s) in spec.indices(t).iter().zip(spec.strides(t)) {
            let dim = (i, spec.extent(i), s);
            if set.contains(&i) {
                view.kept.push(dim);
            } else {
                view.sliced.push(dim);
            }
        }
        view
    }

    /// Slice as seen by the kernel: a contiguous temporary if copied.
    pub fn operand_view(&self, spec: &ContractionSpec, t: TensorId) -> SliceView {
        let src = self.source_view(spec, t);
        if self.copy_of(t).is_none() {
            return src;
        }
        let mut stride = 1;
        let kept = src
            .kept
            .iter()
            .map(|&(i, e, _)| {
                let s = stride;
                stride *= e;
                (i, e, s)
            })
            .collect();
        SliceView {
            buffer: t.temp_buffer().to_string(),
            kept,
            sliced: Vec::new(),
        }
    }

    /// Statements in program order: copies in by increasing depth, the
    /// kernel, copies out by decreasing depth.
    pub fn statements(&self, spec: &ContractionSpec) -> Vec<Statement> {
        let mut before = Vec::new();
        let mut after = Vec::new();
        for c in &self.copies {
            let (src, tmp) = (self.source_view(spec, c.tensor), self.operand_view(spec, c.tensor));
            before.push(Statement {
                kind: StmtKind::CopyIn(c.tensor),
                depth: c.depth,
                phase: Phase::Before,
                operands: vec![src.clone(), tmp.clone()],
            });
            if c.tensor == TensorId::C {
                after.push(Statement {
                    kind: StmtKind::CopyOut(c.tensor),
                    depth: c.depth,
                    phase: Phase::After,
                    operands: vec![tmp, src],
                });
            }
        }
        before.sort_by_key(|s| s.depth);
        after.sort_by_key(|s| std::cmp::Reverse(s.depth));
        let operands = TensorId::ALL
            .into_iter()
            .map(|t| self.operand_view(spec, t))
            .filter(|v| !v.kept.is_empty())
            .collect();
        let mut out = before;
        out.push(Statement {
            kind: StmtKind::Kernel,
            depth: self.loops.len(),
            phase: Phase::Core,
            operands,
        });
        out.extend(after);
        out
    }

    /// Executions of a statement per run of the algorithm.
    pub fn invocations(&self, spec: &ContractionSpec, stmt: &Statement) -> u64 {
        self.loops[..stmt.depth]
            .iter()
            .map(|&l| spec.extent(l) as u64)
            .product()
    }

    /// BLAS calls of one execution of a statement at a loop point.
    pub fn calls(&self, spec: &ContractionSpec, stmt: &Statement, point: &[(char, usize)]) -> Result<Vec<Call>> {
        self.calls_in(spec, &self.operand_views(spec), stmt, point, 1.0)
    }

    /// As `calls`, with precomputed kernel operand views.
    pub fn calls_in(
        &self,
        spec: &ContractionSpec,
        views: &[SliceView; 3],
        stmt: &Statement,
        point: &[(char, usize)],
        alpha: f64,
    ) -> Result<Vec<Call>> {
        match stmt.kind {
            StmtKind::Kernel => Ok(vec![self.kernel_call_in(spec, views, point, alpha)?]),
            StmtKind::CopyIn(_) => copy_calls(&stmt.operands[0], &stmt.operands[1], point),
            StmtKind::CopyOut(_) => copy_calls(&stmt.operands[0], &stmt.operands[1], point),
        }
    }

    /// Kernel call at a loop point; `alpha` scales the axpy update.
    pub fn kernel_call(&self, spec: &ContractionSpec, point: &[(char, usize)], alpha: f64) -> Result<Call> {
        self.kernel_call_in(spec, &self.operand_views(spec), point, alpha)
    }

    /// Kernel operand views of `A`, `B` and `C`.
    pub fn operand_views(&self, spec: &ContractionSpec) -> [SliceView; 3] {
        TensorId::ALL.map(|t| self.operand_view(spec, t))
    }

    fn kernel_call_in(
        &self,
        spec: &ContractionSpec,
        views: &[SliceView; 3],
        point: &[(char, usize)],
        alpha: f64,
    ) -> Result<Call> {
        let [a, b, c] = views;
        let vec_arg = |s: &SliceView| {
            let (_, n, inc) = s.kept[0];
            (n, Operand::new(s.buffer.clone(), s.offset(point)), inc as isize)
        };
        let mat_arg = |s: &SliceView| {
            let (rows, cols) = (s.kept[0].1, s.kept[1].1);
            (rows, cols, Operand::new(s.buffer.clone(), s.offset(point)), s.kept[1].2.max(rows).max(1))
        };
        let ix = self.indices;
        match self.kernel {
            TensorKernel::Dot => {
                let (n, x, incx) = vec_arg(a);
                let (_, y, incy) = vec_arg(b);
                Call::from_parts(Kernel::Ddot, &[], &[n], &[], vec![x, y], &[], &[incx, incy])
            }
            TensorKernel::Axpy => {
                let src = if ix.free_left.is_some() { a } else { b };
                let (n, x, incx) = vec_arg(src);
                let (_, y, incy) = vec_arg(c);
                Call::from_parts(Kernel::Daxpy, &[], &[n], &[alpha], vec![x, y], &[], &[incx, incy])
            }
            TensorKernel::Gemv => {
                let (mat, vecv) = if ix.free_left.is_some() { (a, b) } else { (b, a) };
                let free = ix.free_left.or(ix.free_right).unwrap_or_default();
                let trans = if mat.kept[0].0 == free { "N" } else { "T" };
                let (m, n, ma, ld) = mat_arg(mat);
                let (_, x, incx) = vec_arg(vecv);
                let (_, y, incy) = vec_arg(c);
                Call::from_parts(
                    Kernel::Dgemv,
                    &[trans],
                    &[m, n],
                    &[1.0, 1.0],
                    vec![ma, x, y],
                    &[ld],
                    &[incx, incy],
                )
            }
            TensorKernel::Ger => {
                let (mut xv, mut yv) = (a, b);
                if Some(c.kept[0].0) != ix.free_left {
                    std::mem::swap(&mut xv, &mut yv);
                }
                let (m, n, ca, ld) = mat_arg(c);
                let (_, x, incx) = vec_arg(xv);
                let (_, y, incy) = vec_arg(yv);
                Call::from_parts(Kernel::Dger, &[], &[m, n], &[1.0], vec![x, y, ca], &[ld], &[incx, incy])
            }
            TensorKernel::Gemm => {
                let ta = if Some(a.kept[0].0) == ix.free_left { "N" } else { "T" };
                let tb = if Some(b.kept[0].0) == ix.contracted { "N" } else { "T" };
                let k = spec.extent(ix.contracted.unwrap_or_default());
                let (_, _, aa, lda) = mat_arg(a);
                let (_, _, ba, ldb) = mat_arg(b);
                let (m, n, ca, ldc) = mat_arg(c);
                let flip = |t: &str| if t == "N" { "T" } else { "N" };
                if Some(c.kept[0].0) == ix.free_left {
                    Call::from_parts(
                        Kernel::Dgemm,
                        &[ta, tb],
                        &[m, n, k],
                        &[1.0, 1.0],
                        vec![aa, ba, ca],
                        &[lda, ldb, ldc],
                        &[],
                    )
                } else {
                    // C^T = op(B)^T op(A)^T.
                    Call::from_parts(
                        Kernel::Dgemm,
                        &[flip(tb), flip(ta)],
                        &[m, n, k],
                        &[1.0, 1.0],
                        vec![ba, aa, ca],
                        &[ldb, lda, ldc],
                        &[],
                    )
                }
            }
        }
    }

    /// Visits every statement execution in program order with its loop point.
    pub fn for_each_execution(
        &self,
        spec: &ContractionSpec,
        mut f: impl FnMut(&Statement, &[(char, usize)]) -> Result<()>,
    ) -> Result<()> {
        let stmts = self.statements(spec);
        let mut point = Vec::with_capacity(self.loops.len());
        self.walk(spec, &stmts, 0, &mut point, &mut f)
    }

    fn walk(
        &self,
        spec: &ContractionSpec,
        stmts: &[Statement],
        depth: usize,
        point: &mut Vec<(char, usize)>,
        f: &mut impl FnMut(&Statement, &[(char, usize)]) -> Result<()>,
    ) -> Result<()> {
        let at = |phase| stmts.iter().filter(move |s| s.depth == depth && s.phase == phase);
        for s in at(Phase::Before) {
            f(s, point)?;
        }
        if depth == self.loops.len() {
            for s in at(Phase::Core) {
                f(s, point)?;
            }
        } else {
            let l = self.loops[depth];
            for v in 0..spec.extent(l) {
                point.push((l, v));
                self.walk(spec, stmts, depth + 1, point, f)?;
                point.pop();
            }
        }
        for s in at(Phase::After) {
            f(s, point)?;
        }
        Ok(())
    }

    /// Flops of one run: kernel flops times invocations.
    pub fn flops(&self, spec: &ContractionSpec) -> Result<u64> {
        let stmts = self.statements(spec);
        let kernel = stmts.iter().find(|s| s.kind == StmtKind::Kernel).expect("kernel statement");
        let call = self.kernel_call(spec, &[], 1.0)?;
        Ok(call.flop_count()? * self.invocations(spec, kernel))
    }
}

/// dcopy calls moving a kept-dimension slice from `src` to `dst`; one call
/// if the slice has a single stride, else one per column.
fn copy_calls(src: &SliceView, dst: &SliceView, point: &[(char, usize)]) -> Result<Vec<Call>> {
    let (so, d_o) = (src.offset(point), dst.offset(point));
    let single = |v: &SliceView| v.kept.len() < 2 || v.kept[1].2 == v.kept[0].2 * v.kept[0].1;
    let call = |n: usize, xo: usize, incx: usize, yo: usize, incy: usize| {
        Call::from_parts(
            Kernel::Dcopy,
            &[],
            &[n],
            &[],
            vec![Operand::new(src.buffer.clone(), xo), Operand::new(dst.buffer.clone(), yo)],
            &[],
            &[incx as isize, incy as isize],
        )
    };
    if single(src) && single(dst) {
        let n = src.elements();
        return Ok(vec![call(n, so, src.kept[0].2, d_o, dst.kept[0].2)?]);
    }
    let (rows, cols) = (src.kept[0].1, src.kept[1].1);
    (0..cols)
        .map(|j| {
            call(
                rows,
                so + j * src.kept[1].2,
                src.kept[0].2,
                d_o + j * dst.kept[1].2,
                dst.kept[0].2,
            )
        })
        .collect()
}

/// Runs an algorithm on column-major inputs; returns `c` plus the contraction.
pub fn execute_algorithm(
    alg: &ContractionAlgorithm,
    spec: &ContractionSpec,
    a: &[f64],
    b: &[f64],
    c: &[f64],
) -> Result<Vec<f64>> {
    for (t, data) in [(TensorId::A, a), (TensorId::B, b), (TensorId::C, c)] {
        if data.len() != spec.size(t) {
            return Err(Error::Shape(format!(
                "tensor {} has {} elements, expected {}",
                t.buffer(),
                data.len(),
                spec.size(t)
            )));
        }
    }
    let mut store = BufferStore::new();
    store.insert("A", a.to_vec());
    store.insert("B", b.to_vec());
    store.insert("C", c.to_vec());
    for cp in &alg.copies {
        let v = alg.operand_view(spec, cp.tensor);
        store.alloc(v.buffer.clone(), v.elements());
    }
    let views = alg.operand_views(spec);
    let c_view = &views[2];
    let scalar = match alg.kernel {
        TensorKernel::Axpy if alg.indices.free_left.is_some() => Some(alg.source_view(spec, TensorId::B)),
        TensorKernel::Axpy => Some(alg.source_view(spec, TensorId::A)),
        _ => None,
    };
    alg.for_each_execution(spec, |stmt, point| {
        match stmt.kind {
            StmtKind::Kernel => {
                let alpha = match &scalar {
                    Some(v) => store.get(&v.buffer)?[v.offset(point)],
                    None => 1.0,
                };
                let call = alg.kernel_call_in(spec, &views, point, alpha)?;
                let out = execute(&call, &mut store)?;
                if alg.kernel == TensorKernel::Dot {
                    let off = c_view.offset(point);
                    store.get_mut(&c_view.buffer)?[off] += out.value.unwrap_or(0.0);
                }
            }
            _ => {
                for call in alg.calls_in(spec, &views, stmt, point, 1.0)? {
                    execute(&call, &mut store)?;
                }
            }
        }
        Ok(())
    })?;
    Ok(store.get("C")?.to_vec())
}

/// Slice notation such as `A[a,:]`; copied operands appear as `~A`.
fn slice_text(spec: &ContractionSpec, alg: &ContractionAlgorithm, t: TensorId) -> String {
    let set = alg.indices.set();
    let name = &spec.names[match t {
        TensorId::C => 0,
        TensorId::A => 1,
        TensorId::B => 2,
    }];
    let idx: Vec<String> = spec
        .indices(t)
        .iter()
        .map(|i| if set.contains(i) { ":".into() } else { i.to_string() })
        .collect();
    format!("{name}[{}]", idx.join(","))
}

/// C-like listing of the loop nest.
pub fn render_code(alg: &ContractionAlgorithm, spec: &ContractionSpec) -> String {
    let mut out = String::new();
    let stmts = alg.statements(spec);
    let text = |s: &Statement| -> String {
        let tmp = |t: TensorId| format!("~{}", t.buffer());
        match s.kind {
            StmtKind::CopyIn(t) => format!("{} = {};", tmp(t), slice_text(spec, alg, t)),
            StmtKind::CopyOut(t) => format!("{} = {};", slice_text(spec, alg, t), tmp(t)),
            StmtKind::Kernel => {
                let op = |t: TensorId| {
                    if alg.copy_of(t).is_some() {
                        tmp(t)
                    } else {
                        slice_text(spec, alg, t)
                    }
                };
                let flags = alg
                    .kernel_call(spec, &[], 1.0)
                    .map(|c| c.flags().join(""))
                    .unwrap_or_default();
                let flags = if flags.is_empty() { String::new() } else { format!("[{flags}]") };
                format!(
                    "d{}{flags}: {} += {} * {};",
                    alg.kernel.name(),
                    op(TensorId::C),
                    op(TensorId::A),
                    op(TensorId::B)
                )
            }
        }
    };
    let indent = |d: usize| "  ".repeat(d);
    let _ = writeln!(out, "// {}", alg.name);
    for d in 0..=alg.loops.len() {
        for s in stmts.iter().filter(|s| s.depth == d && s.phase == Phase::Before) {
            let _ = writeln!(out, "{}{}", indent(d), text(s));
        }
        if d < alg.loops.len() {
            let l = alg.loops[d];
            let _ = writeln!(out, "{}for ({l} = 0; {l} < {}; {l}++)", indent(d), spec.extent(l));
        }
    }
    for s in stmts.iter().filter(|s| s.phase == Phase::Core) {
        let _ = writeln!(out, "{}{}", indent(alg.loops.len()), text(s));
    }
    for d in (0..=alg.loops.len()).rev() {
        for s in stmts.iter().filter(|s| s.depth == d && s.phase == Phase::After) {
            let _ = writeln!(out, "{}{}", indent(d), text(s));
        }
    }
    out
}

/// Structured description of an algorithm for inspection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgorithmExport {
    pub name: String,
    pub kernel: TensorKernel,
    /// `(index, extent)`, outermost first.
    pub loops: Vec<(char, usize)>,
    /// Slice notation of the `A`, `B` and `C` kernel operands.
    pub slices: Vec<String>,
    pub copies: Vec<CopySpec>,
    /// Kernel call at the first loop point.
    pub call: String,
}

pub fn describe(alg: &ContractionAlgorithm, spec: &ContractionSpec) -> Result<AlgorithmExport> {
    Ok(AlgorithmExport {
        name: alg.name.clone(),
        kernel: alg.kernel,
        loops: alg.loops.iter().map(|&l| (l, spec.extent(l))).collect(),
        slices: TensorId::ALL.iter().map(|&t| slice_text(spec, alg, t)).collect(),
        copies: alg.copies.clone(),
        call: alg.kernel_call(spec, &[], 1.0)?.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::parse_spec;

    fn counts(spec: &ContractionSpec) -> Vec<usize> {
        let algs = generate_algorithms(spec);
        TensorKernel::ALL
            .iter()
            .map(|k| algs.iter().filter(|a| a.kernel == *k).count())
            .collect()
    }

    #[test]
    fn algorithm_counts() {
        let s = parse_spec("C[a,b,c] = A[a,i] * B[i,b,c] a=4 b=4 c=4 i=3").unwrap();
        assert_eq!(counts(&s), vec![6, 18, 6, 4, 2]);
        let s = parse_spec("C[a] = A[i,a,j] * B[j,i] a=4 i=3 j=2").unwrap();
        assert_eq!(counts(&s), vec![4, 2, 2, 0, 0]);
        let s = parse_spec("C[a,b,c] = A[i,j,a] * B[j,b,i,c] a=2 b=2 c=2 i=2 j=2").unwrap();
        assert_eq!(counts(&s), vec![48, 72, 36, 12, 8]);
    }

    #[test]
    fn names_follow_loops_and_copies() {
        let s = parse_spec("C[a] = A[i,a,j] * B[j,i] a=4 i=3 j=2").unwrap();
        let names: BTreeSet<String> = generate_algorithms(&s).into_iter().map(|a| a.name).collect();
        let expect = ["aj-dot", "ja-dot", "ai-dot", "ia-dot", "ij-axpy", "ji-axpy", "j-gemv", "i'-gemv"];
        assert_eq!(names, expect.iter().map(|s| s.to_string()).collect());

        let s = parse_spec("C[a,b,c] = A[i,j,a] * B[j,b,i,c] a=2 b=2 c=2 i=2 j=2").unwrap();
        let gemm: BTreeSet<String> = generate_algorithms(&s)
            .into_iter()
            .filter(|a| a.kernel == TensorKernel::Gemm)
            .map(|a| a.name)
            .collect();
        let expect = ["cj'-gemm", "jc'-gemm", "ci'-gemm", "i'c-gemm", "bj'-gemm", "jb'-gemm", "bi'-gemm", "i'b-gemm"];
        assert_eq!(gemm, expect.iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn gemm_per_slice() {
        let s = parse_spec("C[a,b,c] = A[a,i] * B[i,b,c] a=3 b=4 c=5 i=2").unwrap();
        let alg = generate_algorithms(&s).into_iter().find(|a| a.name == "b-gemm").unwrap();
        let call = alg.kernel_call(&s, &[('b', 2)], 1.0).unwrap();
        assert_eq!(call.flags(), vec!["N", "N"]);
        assert_eq!(call.sizes(), vec![3, 5, 2]);
        let ops = call.operands();
        // B[:,2,:] starts at column 2 of the i x b planes; C[:,2,:] likewise.
        assert_eq!(ops[1].offset, 2 * 2);
        assert_eq!(ops[2].offset, 2 * 3);
        let code = render_code(&alg, &s);
        assert!(code.contains("for (b = 0; b < 4; b++)"));
        assert!(code.contains("dgemm[NN]: C[:,b,:] += A[:,:] * B[:,b,:];"));
    }

    #[test]
    fn copies_hoisted_to_innermost_dependency() {
        let s = parse_spec("C[a,b,c] = A[i,j,a] * B[j,b,i,c] a=2 b=3 c=2 i=2 j=3").unwrap();
        let algs = generate_algorithms(&s);
        let ic = algs.iter().find(|a| a.name == "i'c-gemm").unwrap();
        assert_eq!(ic.copies, vec![CopySpec { tensor: TensorId::A, depth: 1 }]);
        let code = render_code(ic, &s);
        assert!(code.contains("  ~A = A[i,:,:];\n  for (c"));
    }
}
