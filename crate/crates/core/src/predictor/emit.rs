//! Construction of kernel calls on sub-blocks of column-major buffers.

use super::Invocation;
use crate::error::Result;
use crate::kernels::{ArgKind, Call, Kernel, Operand};

/// Rectangular sub-block of a column-major buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub buffer: &'static str,
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
    pub ld: usize,
}

impl Block {
    pub fn new(buffer: &'static str, ld: usize) -> Self {
        Block {
            buffer,
            row: 0,
            col: 0,
            rows: 0,
            cols: 0,
            ld: ld.max(1),
        }
    }

    pub fn at(self, row: usize, col: usize, rows: usize, cols: usize) -> Self {
        Block {
            row,
            col,
            rows,
            cols,
            ..self
        }
    }

    pub fn offset(&self) -> usize {
        self.row + self.col * self.ld
    }

    fn operand(&self) -> (Operand, usize) {
        (Operand::new(self.buffer, self.offset()), self.ld)
    }
}

/// Three consecutive ranges `(start, len)` of one matrix dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Split(pub [(usize, usize); 3]);

impl Split {
    /// Processed part first: `[0, p)`, `[p, p + b)`, rest.
    pub fn forward(dim: usize, p: usize, b: usize) -> Self {
        Split([(0, p), (p, b), (p + b, dim - p - b)])
    }

    /// Processed part last: the current block ends where the processed part
    /// of extent `p` begins.
    pub fn backward(dim: usize, p: usize, b: usize) -> Self {
        let r = dim - p - b;
        Split([(0, r), (r, b), (r + b, p)])
    }

    pub fn whole(dim: usize) -> Self {
        Split([(0, 0), (0, dim), (dim, 0)])
    }

    /// Union of parts `first..=last`.
    pub fn span(&self, first: usize, last: usize) -> (usize, usize) {
        let start = self.0[first].0;
        let end = self.0[last].0 + self.0[last].1;
        (start, end - start)
    }

    /// Shifts all parts by `origin`.
    pub fn offset(mut self, origin: usize) -> Self {
        for p in &mut self.0 {
            p.0 += origin;
        }
        self
    }
}

/// Partitioned view of a matrix buffer.
#[derive(Clone, Copy, Debug)]
pub struct View {
    pub base: Block,
    pub rows: Split,
    pub cols: Split,
}

impl View {
    pub fn blk(&self, i: usize, j: usize) -> Block {
        self.span(i, i, j, j)
    }

    /// Block of row parts `i0..=i1` and column parts `j0..=j1`.
    pub fn span(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> Block {
        let (r, nr) = self.rows.span(i0, i1);
        let (c, nc) = self.cols.span(j0, j1);
        self.base.at(r, c, nr, nc)
    }
}

/// Accumulates the invocations of an algorithm.
#[derive(Default)]
pub struct Emitter {
    pub out: Vec<Invocation>,
    /// Start index in `out` of each blocked step.
    pub steps: Vec<usize>,
}

impl Emitter {
    pub fn mark_step(&mut self) {
        self.steps.push(self.out.len());
    }

    /// Invocations grouped by blocked step; one group if no step was marked.
    pub fn into_steps(self) -> Vec<Vec<Invocation>> {
        let mut bounds: Vec<usize> = self.steps.iter().skip(1).copied().collect();
        bounds.push(self.out.len());
        let mut out = self.out.into_iter();
        let mut start = 0;
        bounds
            .into_iter()
            .map(|end| {
                let group = out.by_ref().take(end - start).collect();
                start = end;
                group
            })
            .collect()
    }
    fn push(
        &mut self,
        kernel: Kernel,
        flags: &[&str],
        sizes: &[usize],
        scalars: &[f64],
        data: Vec<(Operand, usize)>,
        incs: &[isize],
    ) -> Result<()> {
        let desc = kernel.descriptor();
        let data_pos = desc.data_positions();
        let lds: Vec<usize> = desc
            .args
            .iter()
            .filter_map(|a| match a.kind {
                ArgKind::Ld(p) => data_pos.iter().position(|&d| d == p).map(|i| data[i].1),
                _ => None,
            })
            .collect();
        let ops = data.into_iter().map(|(o, _)| o).collect();
        let call = Call::from_parts(kernel, flags, sizes, scalars, ops, &lds, incs)?;
        self.out.push(Invocation::Kernel(call));
        Ok(())
    }

    pub fn inline(&mut self, label: &str, target: Block) {
        self.out.push(Invocation::Inline {
            label: label.to_string(),
            rows: target.rows,
            cols: target.cols,
        });
    }

    pub fn gemm(&mut self, ta: &str, tb: &str, alpha: f64, a: Block, b: Block, beta: f64, c: Block) -> Result<()> {
        let k = if ta == "N" { a.cols } else { a.rows };
        self.push(
            Kernel::Dgemm,
            &[ta, tb],
            &[c.rows, c.cols, k],
            &[alpha, beta],
            vec![a.operand(), b.operand(), c.operand()],
            &[],
        )
    }

    /// dtrmm or dtrsm with `b` overwritten.
    pub fn trxm(&mut self, kernel: Kernel, flags: [&str; 4], alpha: f64, a: Block, b: Block) -> Result<()> {
        self.push(
            kernel,
            &flags,
            &[b.rows, b.cols],
            &[alpha],
            vec![a.operand(), b.operand()],
            &[],
        )
    }

    pub fn trmm(&mut self, flags: [&str; 4], alpha: f64, a: Block, b: Block) -> Result<()> {
        self.trxm(Kernel::Dtrmm, flags, alpha, a, b)
    }

    pub fn trsm(&mut self, flags: [&str; 4], alpha: f64, a: Block, b: Block) -> Result<()> {
        self.trxm(Kernel::Dtrsm, flags, alpha, a, b)
    }

    pub fn syrk(&mut self, uplo: &str, trans: &str, alpha: f64, a: Block, beta: f64, c: Block) -> Result<()> {
        let k = if trans == "N" { a.cols } else { a.rows };
        self.push(
            Kernel::Dsyrk,
            &[uplo, trans],
            &[c.rows, k],
            &[alpha, beta],
            vec![a.operand(), c.operand()],
            &[],
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn syr2k(&mut self, uplo: &str, trans: &str, alpha: f64, a: Block, b: Block, beta: f64, c: Block) -> Result<()> {
        let k = if trans == "N" { a.cols } else { a.rows };
        self.push(
            Kernel::Dsyr2k,
            &[uplo, trans],
            &[c.rows, k],
            &[alpha, beta],
            vec![a.operand(), b.operand(), c.operand()],
            &[],
        )
    }

    /// `c := alpha a b + beta c` (side L) or `alpha b a + beta c` (side R)
    /// with `a` symmetric.
    #[allow(clippy::too_many_arguments)]
    pub fn symm(&mut self, side: &str, uplo: &str, alpha: f64, a: Block, b: Block, beta: f64, c: Block) -> Result<()> {
        self.push(
            Kernel::Dsymm,
            &[side, uplo],
            &[c.rows, c.cols],
            &[alpha, beta],
            vec![a.operand(), b.operand(), c.operand()],
            &[],
        )
    }

    /// Single-matrix kernels such as dpotf2, dlauu2 and dtrti2.
    pub fn unary(&mut self, kernel: Kernel, flags: &[&str], a: Block) -> Result<()> {
        self.push(kernel, flags, &[a.rows], &[], vec![a.operand()], &[])
    }

    pub fn sygs2(&mut self, itype: &str, uplo: &str, a: Block, b: Block) -> Result<()> {
        self.push(
            Kernel::Dsygs2,
            &[itype, uplo],
            &[a.rows],
            &[],
            vec![a.operand(), b.operand()],
            &[],
        )
    }

    pub fn getf2(&mut self, a: Block, ipiv: usize) -> Result<()> {
        self.push(
            Kernel::Dgetf2,
            &[],
            &[a.rows, a.cols],
            &[],
            vec![a.operand(), (Operand::new("ipiv", ipiv), 1)],
            &[],
        )
    }

    /// Row interchanges `k1..=k2` (1-based) on the columns of `a`.
    pub fn laswp(&mut self, a: Block, k1: usize, k2: usize) -> Result<()> {
        self.push(
            Kernel::Dlaswp,
            &[],
            &[a.cols, k1, k2],
            &[],
            vec![a.operand(), (Operand::new("ipiv", 0), 1)],
            &[1],
        )
    }

    pub fn geqr2(&mut self, a: Block, tau: usize) -> Result<()> {
        self.push(
            Kernel::Dgeqr2,
            &[],
            &[a.rows, a.cols],
            &[],
            vec![
                a.operand(),
                (Operand::new("tau", tau), 1),
                (Operand::new("work", 0), 1),
            ],
            &[],
        )
    }

    pub fn larft(&mut self, v: Block, tau: usize, t: Block) -> Result<()> {
        self.push(
            Kernel::Dlarft,
            &["F", "C"],
            &[v.rows, v.cols],
            &[],
            vec![v.operand(), (Operand::new("tau", tau), 1), t.operand()],
            &[],
        )
    }

    /// Copies row `x` (length `x.cols`) into column `y`.
    pub fn copy_row_to_col(&mut self, x: Block, y: Block) -> Result<()> {
        self.push(
            Kernel::Dcopy,
            &[],
            &[x.cols],
            &[],
            vec![x.operand(), y.operand()],
            &[x.ld as isize, 1],
        )
    }

    pub fn trsyl(&mut self, a: Block, b: Block, c: Block) -> Result<()> {
        self.push(
            Kernel::Dtrsyl,
            &["N", "N", "1"],
            &[c.rows, c.cols],
            &[],
            vec![
                a.operand(),
                b.operand(),
                c.operand(),
                (Operand::new("scale", 0), 1),
            ],
            &[],
        )
    }
}
