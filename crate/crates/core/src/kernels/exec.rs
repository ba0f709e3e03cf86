//! Execution of calls against named buffers.
//!
//! Each operand's footprint is gathered into a compact local array, the
//! reference routine runs on the local arrays, and only written operands
//! are scattered back (triangular outputs write only their triangle).

use super::{blas, lapack, Call, Kernel, Layout, Structure};
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Named flat `f64` buffers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BufferStore {
    buffers: BTreeMap<String, Vec<f64>>,
}

impl BufferStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Allocates a zero-filled buffer, replacing any previous one.
    pub fn alloc(&mut self, name: impl Into<String>, len: usize) {
        self.buffers.insert(name.into(), vec![0.0; len]);
    }

    pub fn insert(&mut self, name: impl Into<String>, data: Vec<f64>) {
        self.buffers.insert(name.into(), data);
    }

    pub fn get(&self, name: &str) -> Result<&[f64]> {
        self.buffers
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownBuffer(name.into()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Vec<f64>> {
        self.buffers
            .get_mut(name)
            .ok_or_else(|| Error::UnknownBuffer(name.into()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.buffers.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.buffers.keys().map(|k| k.as_str())
    }

    /// Total number of stored elements.
    pub fn total_len(&self) -> usize {
        self.buffers.values().map(|v| v.len()).sum()
    }
}

/// Result of executing one call.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExecOutcome {
    /// LAPACK-style status code; 0 on success.
    pub info: i32,
    /// Scalar result of reductions such as `ddot`.
    pub value: Option<f64>,
}

fn element_index(l: &Layout, i: usize, j: usize) -> usize {
    match l.shape.structure {
        Structure::Vector => {
            let n = l.shape.rows;
            let step = l.stride.unsigned_abs();
            if l.stride >= 0 {
                l.operand.offset + i * step
            } else {
                l.operand.offset + (n - 1 - i) * step
            }
        }
        _ => l.operand.offset + i + j * l.stride as usize,
    }
}

fn in_footprint(l: &Layout, i: usize, j: usize) -> bool {
    match l.shape.structure {
        Structure::Lower => i >= j,
        Structure::Upper => i <= j,
        _ => true,
    }
}

fn gather(store: &BufferStore, l: &Layout) -> Result<Vec<f64>> {
    let buf = store.get(&l.operand.buffer)?;
    let needed = l.operand.offset + l.span();
    if l.span() > 0 && needed > buf.len() {
        return Err(Error::OutOfBounds {
            arg: l.arg.into(),
            buffer: l.operand.buffer.to_string(),
            needed,
            len: buf.len(),
        });
    }
    let (rows, cols) = (l.shape.rows, l.shape.cols);
    let mut out = vec![0.0; rows * cols];
    for j in 0..cols {
        for i in 0..rows {
            out[i + j * rows] = buf[element_index(l, i, j)];
        }
    }
    Ok(out)
}

fn scatter(store: &mut BufferStore, l: &Layout, local: &[f64]) -> Result<()> {
    let buf = store.get_mut(&l.operand.buffer)?;
    let (rows, cols) = (l.shape.rows, l.shape.cols);
    for j in 0..cols {
        for i in 0..rows {
            if in_footprint(l, i, j) {
                buf[element_index(l, i, j)] = local[i + j * rows];
            }
        }
    }
    Ok(())
}

/// Executes a call with the reference kernels.
///
/// Calls with a zero size leave every buffer untouched.
pub fn execute(call: &Call, store: &mut BufferStore) -> Result<ExecOutcome> {
    call.validate()?;
    if call.is_empty() {
        return Ok(ExecOutcome::default());
    }
    let mut layouts = call.layouts()?;
    if call.kernel == Kernel::Dlaswp {
        // Pivot entries are read in storage order; the sign of the increment
        // only selects the order of interchanges.
        layouts[1].stride = layouts[1].stride.abs();
        let piv = gather(store, &layouts[1])?;
        let s = call.sizes();
        let mut rows = layouts[0].shape.rows;
        for &p in &piv[s[1] - 1..s[2]] {
            if p < 1.0 || p.fract() != 0.0 {
                return Err(Error::InvalidCall(format!("dlaswp: invalid pivot {p}")));
            }
            rows = rows.max(p as usize);
        }
        if layouts[0].stride < rows as isize {
            return Err(Error::LeadingDimension {
                arg: "ldA".into(),
                ld: layouts[0].stride as usize,
                rows,
            });
        }
        layouts[0].shape.rows = rows;
    }
    let mut local: Vec<Vec<f64>> = layouts
        .iter()
        .map(|l| gather(store, l))
        .collect::<Result<_>>()?;
    let outcome = dispatch(call, &layouts, &mut local)?;
    for (l, data) in layouts.iter().zip(&local) {
        if l.role.writes() {
            scatter(store, l, data)?;
        }
    }
    Ok(outcome)
}

fn ld(l: &Layout) -> usize {
    l.shape.rows.max(1)
}

fn split2(v: &mut [Vec<f64>], i: usize, j: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
    assert!(i < j);
    let (a, b) = v.split_at_mut(j);
    (&mut a[i], &mut b[0])
}

fn dispatch(call: &Call, ls: &[Layout], x: &mut [Vec<f64>]) -> Result<ExecOutcome> {
    let f = call.flags();
    let s = call.sizes();
    let c = call.scalars();
    let mut out = ExecOutcome::default();
    match call.kernel {
        Kernel::Dcopy => {
            let (a, b) = split2(x, 0, 1);
            blas::dcopy(s[0], a, b);
        }
        Kernel::Dswap => {
            let (a, b) = split2(x, 0, 1);
            blas::dswap(s[0], a, b);
        }
        Kernel::Daxpy => {
            let (a, b) = split2(x, 0, 1);
            blas::daxpy(s[0], c[0], a, b);
        }
        Kernel::Ddot => out.value = Some(blas::ddot(s[0], &x[0], &x[1])),
        Kernel::Dgemv => {
            let (ab, y) = x.split_at_mut(2);
            blas::dgemv(f[0], s[0], s[1], c[0], &ab[0], ld(&ls[0]), &ab[1], c[1], &mut y[0]);
        }
        Kernel::Dger => {
            let (xy, a) = x.split_at_mut(2);
            blas::dger(s[0], s[1], c[0], &xy[0], &xy[1], &mut a[0], ld(&ls[2]));
        }
        Kernel::Dtrsv => {
            let (a, b) = split2(x, 0, 1);
            blas::dtrsv(f[0], f[1], f[2], s[0], a, ld(&ls[0]), b)?;
        }
        Kernel::Dgemm => {
            let (ab, cc) = x.split_at_mut(2);
            blas::dgemm(
                f[0],
                f[1],
                s[0],
                s[1],
                s[2],
                c[0],
                &ab[0],
                ld(&ls[0]),
                &ab[1],
                ld(&ls[1]),
                c[1],
                &mut cc[0],
                ld(&ls[2]),
            );
        }
        Kernel::Dsymm => {
            let (ab, cc) = x.split_at_mut(2);
            blas::dsymm(
                f[0],
                f[1],
                s[0],
                s[1],
                c[0],
                &ab[0],
                ld(&ls[0]),
                &ab[1],
                ld(&ls[1]),
                c[1],
                &mut cc[0],
                ld(&ls[2]),
            );
        }
        Kernel::Dtrmm => {
            let (a, b) = split2(x, 0, 1);
            blas::dtrmm(f[0], f[1], f[2], f[3], s[0], s[1], c[0], a, ld(&ls[0]), b, ld(&ls[1]));
        }
        Kernel::Dtrsm => {
            let (a, b) = split2(x, 0, 1);
            blas::dtrsm(f[0], f[1], f[2], f[3], s[0], s[1], c[0], a, ld(&ls[0]), b, ld(&ls[1]))?;
        }
        Kernel::Dsyrk => {
            let (a, cc) = split2(x, 0, 1);
            blas::dsyrk(f[0], f[1], s[0], s[1], c[0], a, ld(&ls[0]), c[1], cc, ld(&ls[1]));
        }
        Kernel::Dsyr2k => {
            let (ab, cc) = x.split_at_mut(2);
            blas::dsyr2k(
                f[0],
                f[1],
                s[0],
                s[1],
                c[0],
                &ab[0],
                ld(&ls[0]),
                &ab[1],
                ld(&ls[1]),
                c[1],
                &mut cc[0],
                ld(&ls[2]),
            );
        }
        Kernel::Dlauu2 | Kernel::Dlauum => {
            out.info = lapack::dlauu2(f[0], s[0], &mut x[0], ld(&ls[0]));
        }
        Kernel::Dpotf2 | Kernel::Dpotrf => {
            out.info = lapack::dpotf2(f[0], s[0], &mut x[0], ld(&ls[0]));
        }
        Kernel::Dtrti2 | Kernel::Dtrtri => {
            out.info = lapack::dtrti2(f[0], f[1], s[0], &mut x[0], ld(&ls[0]));
        }
        Kernel::Dsygs2 | Kernel::Dsygst => {
            let (a, b) = split2(x, 0, 1);
            out.info = lapack::dsygs2(f[0], f[1], s[0], a, ld(&ls[0]), b, ld(&ls[1]));
        }
        Kernel::Dgetf2 | Kernel::Dgetrf => {
            let (a, p) = split2(x, 0, 1);
            out.info = lapack::dgetf2(s[0], s[1], a, ld(&ls[0]), p);
        }
        Kernel::Dgeqr2 | Kernel::Dgeqrf => {
            let (a, rest) = x.split_at_mut(1);
            let (tau, work) = rest.split_at_mut(1);
            out.info = lapack::dgeqr2(s[0], s[1], &mut a[0], ld(&ls[0]), &mut tau[0], &mut work[0]);
        }
        Kernel::Dlarft => {
            let (vt, t) = x.split_at_mut(2);
            lapack::dlarft(s[0], s[1], &vt[0], ld(&ls[0]), &vt[1], &mut t[0], ld(&ls[2]));
        }
        Kernel::Dlarfb => {
            let (vt, cw) = x.split_at_mut(2);
            let (cc, w) = cw.split_at_mut(1);
            lapack::dlarfb(
                f[0],
                f[1],
                s[0],
                s[1],
                s[2],
                &vt[0],
                ld(&ls[0]),
                &vt[1],
                ld(&ls[1]),
                &mut cc[0],
                ld(&ls[2]),
                &mut w[0],
                ld(&ls[3]),
            );
        }
        Kernel::Dlaswp => {
            let (a, p) = split2(x, 0, 1);
            let inc = call.incs()[0];
            lapack::dlaswp(s[0], a, ld(&ls[0]), s[1], s[2], p, inc);
        }
        Kernel::Dtrsyl => {
            let (ab, cs) = x.split_at_mut(2);
            let (cc, scale) = cs.split_at_mut(1);
            let (info, sc) = lapack::dtrsyl(
                f[0],
                f[1],
                f[2],
                s[0],
                s[1],
                &ab[0],
                ld(&ls[0]),
                &ab[1],
                ld(&ls[1]),
                &mut cc[0],
                ld(&ls[2]),
            );
            scale[0][0] = sc;
            out.info = info;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::Operand;
    use super::*;

    fn store_with(entries: &[(&str, Vec<f64>)]) -> BufferStore {
        let mut s = BufferStore::new();
        for (n, v) in entries {
            s.insert(*n, v.clone());
        }
        s
    }

    #[test]
    fn strided_gemm_respects_ld() {
        // A is 2x2 identity stored with ld 3; the padding row must not change.
        let mut st = store_with(&[
            ("A", vec![1.0, 0.0, 99.0, 0.0, 1.0, 99.0]),
            ("B", vec![1.0, 2.0, 3.0, 4.0]),
            ("C", vec![0.0, 0.0, -7.0, 0.0, 0.0, -7.0]),
        ]);
        let call = Call::from_parts(
            Kernel::Dgemm,
            &["N", "N"],
            &[2, 2, 2],
            &[1.0, 0.0],
            vec![Operand::new("A", 0), Operand::new("B", 0), Operand::new("C", 0)],
            &[3, 2, 3],
            &[],
        )
        .unwrap();
        execute(&call, &mut st).unwrap();
        assert_eq!(st.get("C").unwrap(), &[1.0, 2.0, -7.0, 3.0, 4.0, -7.0]);
    }

    #[test]
    fn negative_increment_reverses() {
        let mut st = store_with(&[("x", vec![1.0, 2.0, 3.0]), ("y", vec![0.0; 3])]);
        let call = Call::from_parts(
            Kernel::Dcopy,
            &[],
            &[3],
            &[],
            vec![Operand::new("x", 0), Operand::new("y", 0)],
            &[],
            &[-1, 1],
        )
        .unwrap();
        execute(&call, &mut st).unwrap();
        assert_eq!(st.get("y").unwrap(), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn errors_reported() {
        let mut st = store_with(&[("A", vec![0.0; 3]), ("B", vec![1.0; 4])]);
        let call = Call::from_parts(
            Kernel::Dtrsm,
            &["L", "L", "N", "N"],
            &[2, 2],
            &[1.0],
            vec![Operand::new("A", 0), Operand::new("B", 0)],
            &[2, 2],
            &[],
        )
        .unwrap();
        assert!(matches!(execute(&call, &mut st), Err(Error::OutOfBounds { .. })));
        let call = Call::from_parts(
            Kernel::Dtrsm,
            &["L", "L", "N", "N"],
            &[2, 2],
            &[1.0],
            vec![Operand::new("A", 0), Operand::new("B", 0)],
            &[1, 2],
            &[],
        )
        .unwrap();
        assert!(matches!(execute(&call, &mut st), Err(Error::LeadingDimension { .. })));
        st.insert("A", vec![0.0; 4]);
        let call = Call::from_parts(
            Kernel::Dtrsm,
            &["L", "L", "N", "N"],
            &[2, 2],
            &[1.0],
            vec![Operand::new("A", 0), Operand::new("B", 0)],
            &[2, 2],
            &[],
        )
        .unwrap();
        assert!(matches!(execute(&call, &mut st), Err(Error::Singular(_))));
    }

    #[test]
    fn triangular_output_keeps_other_triangle() {
        let mut st = store_with(&[("A", vec![4.0, 2.0, 42.0, 5.0])]);
        let call = Call::from_parts(
            Kernel::Dpotf2,
            &["L"],
            &[2],
            &[],
            vec![Operand::new("A", 0)],
            &[2],
            &[],
        )
        .unwrap();
        let out = execute(&call, &mut st).unwrap();
        assert_eq!(out.info, 0);
        assert_eq!(st.get("A").unwrap(), &[2.0, 1.0, 42.0, 2.0]);
    }
}
