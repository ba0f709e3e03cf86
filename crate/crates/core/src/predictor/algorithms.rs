//! Library of blocked algorithms for square and rectangular factorizations.

use super::emit::{Block, Emitter, Split, View};
use crate::error::Result;
use crate::kernels::Kernel;

/// Direction in which an algorithm moves through its operands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Traversal {
    /// Top-left to bottom-right along the diagonal.
    DiagSE,
    /// Bottom-right to top-left along the diagonal.
    DiagNW,
    Vertical,
    Horizontal,
    /// Rows and columns at once, on a 3x3 partitioning.
    Diagonal2D,
}

/// Partitioned operands of one traversal step.
pub struct StepCtx {
    pub a: View,
    /// Second square operand (the factor of dsygst).
    pub l: View,
    /// Workspace with `n` rows and `b` columns.
    pub w: Block,
    /// Extent processed before this step.
    pub p: usize,
    /// Width of the current block.
    pub bk: usize,
}

pub type StepFn = fn(&mut Emitter, &StepCtx) -> Result<()>;

const RLTN: [&str; 4] = ["R", "L", "T", "N"];

fn chol1(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.trsm(RLTN, 1.0, a.blk(0, 0), a.blk(1, 0))?;
    e.syrk("L", "N", -1.0, a.blk(1, 0), 1.0, a.blk(1, 1))?;
    e.unary(Kernel::Dpotf2, &["L"], a.blk(1, 1))
}

fn chol2(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.syrk("L", "N", -1.0, a.blk(1, 0), 1.0, a.blk(1, 1))?;
    e.unary(Kernel::Dpotf2, &["L"], a.blk(1, 1))?;
    e.gemm("N", "T", -1.0, a.blk(2, 0), a.blk(1, 0), 1.0, a.blk(2, 1))?;
    e.trsm(RLTN, 1.0, a.blk(1, 1), a.blk(2, 1))
}

fn chol3(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.unary(Kernel::Dpotf2, &["L"], a.blk(1, 1))?;
    e.trsm(RLTN, 1.0, a.blk(1, 1), a.blk(2, 1))?;
    e.syrk("L", "N", -1.0, a.blk(2, 1), 1.0, a.blk(2, 2))
}

const RLNN: [&str; 4] = ["R", "L", "N", "N"];
const LLNN: [&str; 4] = ["L", "L", "N", "N"];

fn trti2(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    e.unary(Kernel::Dtrti2, &["L", "N"], c.a.blk(1, 1))
}

fn trinv1(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.trmm(RLNN, 1.0, a.blk(0, 0), a.blk(1, 0))?;
    e.trsm(LLNN, -1.0, a.blk(1, 1), a.blk(1, 0))?;
    trti2(e, c)
}

fn trinv2(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.trsm(LLNN, 1.0, a.blk(2, 2), a.blk(2, 1))?;
    e.trsm(RLNN, -1.0, a.blk(1, 1), a.blk(2, 1))?;
    trti2(e, c)
}

fn trinv3(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.trsm(RLNN, -1.0, a.blk(1, 1), a.blk(2, 1))?;
    e.gemm("N", "N", 1.0, a.blk(2, 1), a.blk(1, 0), 1.0, a.blk(2, 0))?;
    e.trsm(LLNN, 1.0, a.blk(1, 1), a.blk(1, 0))?;
    trti2(e, c)
}

fn trinv4(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.trsm(LLNN, -1.0, a.blk(2, 2), a.blk(2, 1))?;
    e.gemm("N", "N", -1.0, a.blk(2, 1), a.blk(1, 0), 1.0, a.blk(2, 0))?;
    e.trmm(RLNN, 1.0, a.blk(0, 0), a.blk(1, 0))?;
    trti2(e, c)
}

fn trinv5(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.trmm(LLNN, 1.0, a.blk(2, 2), a.blk(2, 1))?;
    e.trsm(RLNN, -1.0, a.blk(1, 1), a.blk(2, 1))?;
    trti2(e, c)
}

fn trinv6(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.trsm(RLNN, 1.0, a.blk(0, 0), a.blk(1, 0))?;
    e.trsm(LLNN, -1.0, a.blk(1, 1), a.blk(1, 0))?;
    trti2(e, c)
}

fn trinv7(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.trsm(LLNN, -1.0, a.blk(1, 1), a.blk(1, 0))?;
    e.gemm("N", "N", 1.0, a.blk(2, 1), a.blk(1, 0), 1.0, a.blk(2, 0))?;
    e.trsm(RLNN, 1.0, a.blk(1, 1), a.blk(2, 1))?;
    trti2(e, c)
}

fn trinv8(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.trsm(RLNN, -1.0, a.blk(0, 0), a.blk(1, 0))?;
    e.gemm("N", "N", -1.0, a.blk(2, 1), a.blk(1, 0), 1.0, a.blk(2, 0))?;
    e.trmm(LLNN, 1.0, a.blk(2, 2), a.blk(2, 1))?;
    trti2(e, c)
}

fn lauum(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.trmm(["L", "L", "T", "N"], 1.0, a.blk(1, 1), a.blk(1, 0))?;
    e.unary(Kernel::Dlauu2, &["L"], a.blk(1, 1))?;
    e.gemm("T", "N", 1.0, a.blk(2, 1), a.blk(2, 0), 1.0, a.blk(1, 0))?;
    e.syrk("L", "T", 1.0, a.blk(2, 1), 1.0, a.blk(1, 1))
}

fn sygst(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let (a, l) = (&c.a, &c.l);
    e.sygs2("1", "L", a.blk(1, 1), l.blk(1, 1))?;
    e.trsm(RLTN, 1.0, l.blk(1, 1), a.blk(2, 1))?;
    e.symm("R", "L", -0.5, a.blk(1, 1), l.blk(2, 1), 1.0, a.blk(2, 1))?;
    e.syr2k("L", "N", -1.0, a.blk(2, 1), l.blk(2, 1), 1.0, a.blk(2, 2))?;
    e.symm("R", "L", -0.5, a.blk(1, 1), l.blk(2, 1), 1.0, a.blk(2, 1))?;
    e.trsm(LLNN, 1.0, l.blk(2, 2), a.blk(2, 1))
}

fn getrf(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    e.getf2(a.span(1, 2, 1, 1), c.p)?;
    let (k1, k2) = (c.p + 1, c.p + c.bk);
    e.laswp(a.span(0, 2, 0, 0), k1, k2)?;
    e.laswp(a.span(0, 2, 2, 2), k1, k2)?;
    e.trsm(["L", "L", "N", "U"], 1.0, a.blk(1, 1), a.blk(1, 2))?;
    e.gemm("N", "N", -1.0, a.blk(2, 1), a.blk(1, 2), 1.0, a.blk(2, 2))
}

fn geqrf(e: &mut Emitter, c: &StepCtx) -> Result<()> {
    let a = &c.a;
    let panel = a.span(1, 2, 1, 1);
    e.geqr2(panel, c.p)?;
    let rest = a.cols.0[2].1;
    if rest == 0 {
        return Ok(());
    }
    let t = c.w.at(0, 0, c.bk, c.bk);
    let w2 = c.w.at(c.bk, 0, rest, c.bk);
    e.larft(panel, c.p, t)?;
    let a12 = a.blk(1, 2);
    for j in 0..c.bk {
        let row = a12.at(a12.row + j, a12.col, 1, rest);
        let col = w2.at(w2.row, j, rest, 1);
        e.copy_row_to_col(row, col)?;
    }
    e.trmm(["R", "L", "N", "U"], 1.0, a.blk(1, 1), w2)?;
    e.gemm("T", "N", 1.0, a.blk(2, 2), a.blk(2, 1), 1.0, w2)?;
    e.trmm(["R", "U", "N", "N"], 1.0, t, w2)?;
    e.gemm("N", "T", -1.0, a.blk(2, 1), w2, 1.0, a.blk(2, 2))?;
    e.trmm(["R", "L", "T", "U"], 1.0, a.blk(1, 1), w2)?;
    e.inline("A12 -= W2^T", a12);
    Ok(())
}

/// Square or rectangular single-operand algorithm.
pub struct Factorization {
    pub traversal: Traversal,
    /// Operation whose minimal cost rates the algorithm.
    pub operation: (Kernel, &'static [&'static str]),
    pub rectangular: bool,
    pub step: StepFn,
}

pub fn factorization(name: &str) -> Option<Factorization> {
    use Traversal::{DiagNW, DiagSE};
    const POTRF: (Kernel, &[&str]) = (Kernel::Dpotrf, &["L"]);
    const TRTRI: (Kernel, &[&str]) = (Kernel::Dtrtri, &["L", "N"]);
    let (traversal, operation, rectangular, step): (_, _, _, StepFn) = match name {
        "chol1" => (DiagSE, POTRF, false, chol1),
        "chol2" | "dpotrf" => (DiagSE, POTRF, false, chol2),
        "chol3" => (DiagSE, POTRF, false, chol3),
        "trinv1" => (DiagSE, TRTRI, false, trinv1),
        "trinv2" => (DiagSE, TRTRI, false, trinv2),
        "trinv3" => (DiagSE, TRTRI, false, trinv3),
        "trinv4" => (DiagSE, TRTRI, false, trinv4),
        "trinv5" | "dtrtri" => (DiagNW, TRTRI, false, trinv5),
        "trinv6" => (DiagNW, TRTRI, false, trinv6),
        "trinv7" => (DiagNW, TRTRI, false, trinv7),
        "trinv8" => (DiagNW, TRTRI, false, trinv8),
        "dlauum" => (DiagSE, (Kernel::Dlauum, &["L"]), false, lauum),
        "dsygst" => (DiagSE, (Kernel::Dsygst, &["1", "L"]), false, sygst),
        "dgetrf" => (DiagSE, (Kernel::Dgetrf, &[]), true, getrf),
        "dgeqrf" => (DiagSE, (Kernel::Dgeqrf, &[]), true, geqrf),
        _ => return None,
    };
    Some(Factorization {
        traversal,
        operation,
        rectangular,
        step,
    })
}

pub const FACTORIZATIONS: &[&str] = &[
    "chol1", "chol2", "chol3", "trinv1", "trinv2", "trinv3", "trinv4", "trinv5", "trinv6",
    "trinv7", "trinv8", "dlauum", "dsygst", "dtrtri", "dpotrf", "dgetrf", "dgeqrf",
];

/// Calls of a factorization on an `m x n` operand (`m = n` if square).
pub fn expand(f: &Factorization, m: usize, n: usize, b: usize) -> Result<Emitter> {
    let m = if f.rectangular { m } else { n };
    let k = m.min(n);
    let mut e = Emitter::default();
    let a = Block::new("A", m);
    let l = Block::new("B", m);
    let w = Block::new("W", n);
    for s in 0..k.div_ceil(b) {
        let p = s * b;
        let bk = b.min(k - p);
        e.mark_step();
        let (rows, cols) = match f.traversal {
            Traversal::DiagNW => (Split::backward(m, p, bk), Split::backward(n, p, bk)),
            _ => (Split::forward(m, p, bk), Split::forward(n, p, bk)),
        };
        let ctx = StepCtx {
            a: View { base: a, rows, cols },
            l: View { base: l, rows, cols },
            w,
            p,
            bk,
        };
        (f.step)(&mut e, &ctx)?;
    }
    Ok(e)
}
