//! Kernel descriptors, calls, cost accounting and reference execution.
//!
//! Storage is column-major: element `(i, j)` of a matrix bound at offset `o`
//! with leading dimension `ld` lives at `o + i + j * ld`. Element `i` of a
//! vector with increment `inc > 0` lives at `o + i * inc`; for `inc < 0` it
//! lives at `o + (n - 1 - i) * |inc|`.

mod blas;
mod exec;
mod lapack;
mod machine;

pub use blas::*;
pub use exec::{execute, BufferStore, ExecOutcome};
pub use lapack::*;
pub use machine::{roofline_limit, CacheLevel, MachineSpec};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::fmt;

/// Every kernel known to the toolkit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Dcopy,
    Dswap,
    Daxpy,
    Ddot,
    Dgemv,
    Dger,
    Dtrsv,
    Dgemm,
    Dsymm,
    Dtrmm,
    Dsyrk,
    Dsyr2k,
    Dtrsm,
    Dlauu2,
    Dsygs2,
    Dtrti2,
    Dpotf2,
    Dgetf2,
    Dgeqr2,
    Dlarft,
    Dlarfb,
    Dlaswp,
    Dtrsyl,
    Dlauum,
    Dsygst,
    Dtrtri,
    Dpotrf,
    Dgetrf,
    Dgeqrf,
}

impl Kernel {
    pub const ALL: [Kernel; 29] = [
        Kernel::Dcopy,
        Kernel::Dswap,
        Kernel::Daxpy,
        Kernel::Ddot,
        Kernel::Dgemv,
        Kernel::Dger,
        Kernel::Dtrsv,
        Kernel::Dgemm,
        Kernel::Dsymm,
        Kernel::Dtrmm,
        Kernel::Dsyrk,
        Kernel::Dsyr2k,
        Kernel::Dtrsm,
        Kernel::Dlauu2,
        Kernel::Dsygs2,
        Kernel::Dtrti2,
        Kernel::Dpotf2,
        Kernel::Dgetf2,
        Kernel::Dgeqr2,
        Kernel::Dlarft,
        Kernel::Dlarfb,
        Kernel::Dlaswp,
        Kernel::Dtrsyl,
        Kernel::Dlauum,
        Kernel::Dsygst,
        Kernel::Dtrtri,
        Kernel::Dpotrf,
        Kernel::Dgetrf,
        Kernel::Dgeqrf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Dcopy => "dcopy",
            Kernel::Dswap => "dswap",
            Kernel::Daxpy => "daxpy",
            Kernel::Ddot => "ddot",
            Kernel::Dgemv => "dgemv",
            Kernel::Dger => "dger",
            Kernel::Dtrsv => "dtrsv",
            Kernel::Dgemm => "dgemm",
            Kernel::Dsymm => "dsymm",
            Kernel::Dtrmm => "dtrmm",
            Kernel::Dsyrk => "dsyrk",
            Kernel::Dsyr2k => "dsyr2k",
            Kernel::Dtrsm => "dtrsm",
            Kernel::Dlauu2 => "dlauu2",
            Kernel::Dsygs2 => "dsygs2",
            Kernel::Dtrti2 => "dtrti2",
            Kernel::Dpotf2 => "dpotf2",
            Kernel::Dgetf2 => "dgetf2",
            Kernel::Dgeqr2 => "dgeqr2",
            Kernel::Dlarft => "dlarft",
            Kernel::Dlarfb => "dlarfb",
            Kernel::Dlaswp => "dlaswp",
            Kernel::Dtrsyl => "dtrsyl",
            Kernel::Dlauum => "dlauum",
            Kernel::Dsygst => "dsygst",
            Kernel::Dtrtri => "dtrtri",
            Kernel::Dpotrf => "dpotrf",
            Kernel::Dgetrf => "dgetrf",
            Kernel::Dgeqrf => "dgeqrf",
        }
    }

    pub fn from_name(name: &str) -> Result<Kernel> {
        let lower = name.to_ascii_lowercase();
        Kernel::ALL
            .iter()
            .copied()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::UnknownKernel(name.to_string()))
    }

    pub fn descriptor(self) -> KernelDescriptor {
        KernelDescriptor {
            kernel: self,
            args: args_of(self),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Access role of a data argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Output,
    InOut,
}

impl Role {
    pub fn reads(self) -> bool {
        matches!(self, Role::Input | Role::InOut)
    }

    pub fn writes(self) -> bool {
        matches!(self, Role::Output | Role::InOut)
    }
}

/// Argument type of a kernel parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArgKind {
    Flag(&'static [&'static str]),
    Size,
    Scalar,
    Data(Role),
    /// Leading dimension of the data argument at the given position.
    Ld(usize),
    /// Increment of the data argument at the given position.
    Inc(usize),
    Info,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArgSpec {
    pub name: &'static str,
    pub kind: ArgKind,
}

/// Signature of a kernel.
#[derive(Clone, Copy, Debug)]
pub struct KernelDescriptor {
    pub kernel: Kernel,
    pub args: &'static [ArgSpec],
}

impl KernelDescriptor {
    pub fn name(&self) -> &'static str {
        self.kernel.name()
    }

    fn positions(&self, pred: impl Fn(&ArgKind) -> bool) -> Vec<usize> {
        self.args
            .iter()
            .enumerate()
            .filter(|(_, a)| pred(&a.kind))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn flag_positions(&self) -> Vec<usize> {
        self.positions(|k| matches!(k, ArgKind::Flag(_)))
    }

    pub fn size_positions(&self) -> Vec<usize> {
        self.positions(|k| matches!(k, ArgKind::Size))
    }

    pub fn scalar_positions(&self) -> Vec<usize> {
        self.positions(|k| matches!(k, ArgKind::Scalar))
    }

    pub fn data_positions(&self) -> Vec<usize> {
        self.positions(|k| matches!(k, ArgKind::Data(_)))
    }

    pub fn inc_positions(&self) -> Vec<usize> {
        self.positions(|k| matches!(k, ArgKind::Inc(_)))
    }

    pub fn size_names(&self) -> Vec<&'static str> {
        self.size_positions()
            .into_iter()
            .map(|i| self.args[i].name)
            .collect()
    }

    /// Checks flag values against the allowed sets.
    pub fn check_flags(&self, flags: &[&str]) -> Result<()> {
        let mut given = flags.iter();
        for spec in self.args {
            if let ArgKind::Flag(allowed) = spec.kind {
                match given.next() {
                    Some(v) if !allowed.contains(v) => {
                        return Err(Error::InvalidFlag {
                            kernel: self.name().into(),
                            arg: spec.name.into(),
                            value: (*v).into(),
                        })
                    }
                    Some(_) => {}
                    None => return Err(self.flag_count_error(flags.len())),
                }
            }
        }
        match given.next() {
            Some(_) => Err(self.flag_count_error(flags.len())),
            None => Ok(()),
        }
    }

    fn flag_count_error(&self, got: usize) -> Error {
        let want = self.args.iter().filter(|a| matches!(a.kind, ArgKind::Flag(_))).count();
        Error::InvalidCall(format!("{} expects {want} flags, got {got}", self.name()))
    }
}

const SIDE: &[&str] = &["L", "R"];
const UPLO: &[&str] = &["L", "U"];
const TRANS: &[&str] = &["N", "T"];
const DIAG: &[&str] = &["N", "U"];
const ITYPE: &[&str] = &["1", "2", "3"];
const DIRECT: &[&str] = &["F"];
const STOREV: &[&str] = &["C"];
const ISGN: &[&str] = &["1", "-1"];

const fn a(name: &'static str, kind: ArgKind) -> ArgSpec {
    ArgSpec { name, kind }
}

use ArgKind::{Data, Flag, Inc, Info, Ld, Scalar, Size};
use Role::{InOut, Input, Output};

const COPY: &[ArgSpec] = &[
    a("n", Size),
    a("x", Data(Input)),
    a("incx", Inc(1)),
    a("y", Data(Output)),
    a("incy", Inc(3)),
];
const SWAP: &[ArgSpec] = &[
    a("n", Size),
    a("x", Data(InOut)),
    a("incx", Inc(1)),
    a("y", Data(InOut)),
    a("incy", Inc(3)),
];
const AXPY: &[ArgSpec] = &[
    a("n", Size),
    a("alpha", Scalar),
    a("x", Data(Input)),
    a("incx", Inc(2)),
    a("y", Data(InOut)),
    a("incy", Inc(4)),
];
const DOT: &[ArgSpec] = &[
    a("n", Size),
    a("x", Data(Input)),
    a("incx", Inc(1)),
    a("y", Data(Input)),
    a("incy", Inc(3)),
];
const GEMV: &[ArgSpec] = &[
    a("trans", Flag(TRANS)),
    a("m", Size),
    a("n", Size),
    a("alpha", Scalar),
    a("A", Data(Input)),
    a("ldA", Ld(4)),
    a("x", Data(Input)),
    a("incx", Inc(6)),
    a("beta", Scalar),
    a("y", Data(InOut)),
    a("incy", Inc(9)),
];
const GER: &[ArgSpec] = &[
    a("m", Size),
    a("n", Size),
    a("alpha", Scalar),
    a("x", Data(Input)),
    a("incx", Inc(3)),
    a("y", Data(Input)),
    a("incy", Inc(5)),
    a("A", Data(InOut)),
    a("ldA", Ld(7)),
];
const TRSV: &[ArgSpec] = &[
    a("uplo", Flag(UPLO)),
    a("trans", Flag(TRANS)),
    a("diag", Flag(DIAG)),
    a("n", Size),
    a("A", Data(Input)),
    a("ldA", Ld(4)),
    a("x", Data(InOut)),
    a("incx", Inc(6)),
];
const GEMM: &[ArgSpec] = &[
    a("transA", Flag(TRANS)),
    a("transB", Flag(TRANS)),
    a("m", Size),
    a("n", Size),
    a("k", Size),
    a("alpha", Scalar),
    a("A", Data(Input)),
    a("ldA", Ld(6)),
    a("B", Data(Input)),
    a("ldB", Ld(8)),
    a("beta", Scalar),
    a("C", Data(InOut)),
    a("ldC", Ld(11)),
];
const SYMM: &[ArgSpec] = &[
    a("side", Flag(SIDE)),
    a("uplo", Flag(UPLO)),
    a("m", Size),
    a("n", Size),
    a("alpha", Scalar),
    a("A", Data(Input)),
    a("ldA", Ld(5)),
    a("B", Data(Input)),
    a("ldB", Ld(7)),
    a("beta", Scalar),
    a("C", Data(InOut)),
    a("ldC", Ld(10)),
];
const TRXM: &[ArgSpec] = &[
    a("side", Flag(SIDE)),
    a("uplo", Flag(UPLO)),
    a("transA", Flag(TRANS)),
    a("diag", Flag(DIAG)),
    a("m", Size),
    a("n", Size),
    a("alpha", Scalar),
    a("A", Data(Input)),
    a("ldA", Ld(7)),
    a("B", Data(InOut)),
    a("ldB", Ld(9)),
];
const SYRK: &[ArgSpec] = &[
    a("uplo", Flag(UPLO)),
    a("trans", Flag(TRANS)),
    a("n", Size),
    a("k", Size),
    a("alpha", Scalar),
    a("A", Data(Input)),
    a("ldA", Ld(5)),
    a("beta", Scalar),
    a("C", Data(InOut)),
    a("ldC", Ld(8)),
];
const SYR2K: &[ArgSpec] = &[
    a("uplo", Flag(UPLO)),
    a("trans", Flag(TRANS)),
    a("n", Size),
    a("k", Size),
    a("alpha", Scalar),
    a("A", Data(Input)),
    a("ldA", Ld(5)),
    a("B", Data(Input)),
    a("ldB", Ld(7)),
    a("beta", Scalar),
    a("C", Data(InOut)),
    a("ldC", Ld(10)),
];
const UPLO_N_A: &[ArgSpec] = &[
    a("uplo", Flag(UPLO)),
    a("n", Size),
    a("A", Data(InOut)),
    a("ldA", Ld(2)),
    a("info", Info),
];
const SYGST: &[ArgSpec] = &[
    a("itype", Flag(ITYPE)),
    a("uplo", Flag(UPLO)),
    a("n", Size),
    a("A", Data(InOut)),
    a("ldA", Ld(3)),
    a("B", Data(Input)),
    a("ldB", Ld(5)),
    a("info", Info),
];
const TRTRI: &[ArgSpec] = &[
    a("uplo", Flag(UPLO)),
    a("diag", Flag(DIAG)),
    a("n", Size),
    a("A", Data(InOut)),
    a("ldA", Ld(3)),
    a("info", Info),
];
const GETRF: &[ArgSpec] = &[
    a("m", Size),
    a("n", Size),
    a("A", Data(InOut)),
    a("ldA", Ld(2)),
    a("ipiv", Data(Output)),
    a("info", Info),
];
const GEQRF: &[ArgSpec] = &[
    a("m", Size),
    a("n", Size),
    a("A", Data(InOut)),
    a("ldA", Ld(2)),
    a("tau", Data(Output)),
    a("work", Data(Output)),
    a("info", Info),
];
const LARFT: &[ArgSpec] = &[
    a("direct", Flag(DIRECT)),
    a("storev", Flag(STOREV)),
    a("n", Size),
    a("k", Size),
    a("V", Data(Input)),
    a("ldV", Ld(4)),
    a("tau", Data(Input)),
    a("T", Data(Output)),
    a("ldT", Ld(7)),
];
const LARFB: &[ArgSpec] = &[
    a("side", Flag(SIDE)),
    a("trans", Flag(TRANS)),
    a("direct", Flag(DIRECT)),
    a("storev", Flag(STOREV)),
    a("m", Size),
    a("n", Size),
    a("k", Size),
    a("V", Data(Input)),
    a("ldV", Ld(7)),
    a("T", Data(Input)),
    a("ldT", Ld(9)),
    a("C", Data(InOut)),
    a("ldC", Ld(11)),
    a("work", Data(Output)),
    a("ldwork", Ld(13)),
];
const LASWP: &[ArgSpec] = &[
    a("n", Size),
    a("A", Data(InOut)),
    a("ldA", Ld(1)),
    a("k1", Size),
    a("k2", Size),
    a("ipiv", Data(Input)),
    a("incx", Inc(5)),
];
const TRSYL: &[ArgSpec] = &[
    a("tranA", Flag(TRANS)),
    a("tranB", Flag(TRANS)),
    a("isgn", Flag(ISGN)),
    a("m", Size),
    a("n", Size),
    a("A", Data(Input)),
    a("ldA", Ld(5)),
    a("B", Data(Input)),
    a("ldB", Ld(7)),
    a("C", Data(InOut)),
    a("ldC", Ld(9)),
    a("scale", Data(Output)),
    a("info", Info),
];

fn args_of(kernel: Kernel) -> &'static [ArgSpec] {
    match kernel {
        Kernel::Dcopy => COPY,
        Kernel::Dswap => SWAP,
        Kernel::Daxpy => AXPY,
        Kernel::Ddot => DOT,
        Kernel::Dgemv => GEMV,
        Kernel::Dger => GER,
        Kernel::Dtrsv => TRSV,
        Kernel::Dgemm => GEMM,
        Kernel::Dsymm => SYMM,
        Kernel::Dtrmm | Kernel::Dtrsm => TRXM,
        Kernel::Dsyrk => SYRK,
        Kernel::Dsyr2k => SYR2K,
        Kernel::Dlauu2 | Kernel::Dpotf2 | Kernel::Dlauum | Kernel::Dpotrf => UPLO_N_A,
        Kernel::Dsygs2 | Kernel::Dsygst => SYGST,
        Kernel::Dtrti2 | Kernel::Dtrtri => TRTRI,
        Kernel::Dgetf2 | Kernel::Dgetrf => GETRF,
        Kernel::Dgeqr2 | Kernel::Dgeqrf => GEQRF,
        Kernel::Dlarft => LARFT,
        Kernel::Dlarfb => LARFB,
        Kernel::Dlaswp => LASWP,
        Kernel::Dtrsyl => TRSYL,
    }
}

/// Binding of a data argument to a buffer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Operand {
    pub buffer: Cow<'static, str>,
    pub offset: usize,
}

impl Operand {
    pub fn new(buffer: impl Into<Cow<'static, str>>, offset: usize) -> Self {
        Operand {
            buffer: buffer.into(),
            offset,
        }
    }
}

/// Flag argument value, sharing the static spelling when `v` is allowed.
pub fn flag_value(kind: ArgKind, v: &str) -> Cow<'static, str> {
    match kind {
        ArgKind::Flag(allowed) => match allowed.iter().find(|a| **a == v) {
            Some(a) => Cow::Borrowed(a),
            None => Cow::Owned(v.to_owned()),
        },
        _ => Cow::Owned(v.to_owned()),
    }
}

/// Value of one kernel argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arg {
    /// Borrowed from the descriptor's allowed values when it matches one.
    Flag(Cow<'static, str>),
    Size(usize),
    Scalar(f64),
    Data(Operand),
    Ld(usize),
    Inc(isize),
    Info,
}

/// A kernel invocation with all arguments bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub kernel: Kernel,
    pub args: Vec<Arg>,
}

impl Call {
    /// Assembles a call by filling each argument kind from its own list in
    /// signature order.
    pub fn from_parts(
        kernel: Kernel,
        flags: &[&str],
        sizes: &[usize],
        scalars: &[f64],
        operands: Vec<Operand>,
        lds: &[usize],
        incs: &[isize],
    ) -> Result<Call> {
        let desc = kernel.descriptor();
        let (mut fi, mut si, mut ci, mut li, mut ii) = (0, 0, 0, 0, 0);
        let mut ops = operands.into_iter();
        let mut args = Vec::with_capacity(desc.args.len());
        let short = |what: &str| Error::InvalidCall(format!("{kernel}: too few {what}"));
        for spec in desc.args {
            let arg = match spec.kind {
                ArgKind::Flag(_) => {
                    let v = flags.get(fi).ok_or_else(|| short("flags"))?;
                    fi += 1;
                    Arg::Flag(flag_value(spec.kind, v))
                }
                ArgKind::Size => {
                    let v = sizes.get(si).ok_or_else(|| short("sizes"))?;
                    si += 1;
                    Arg::Size(*v)
                }
                ArgKind::Scalar => {
                    let v = scalars.get(ci).ok_or_else(|| short("scalars"))?;
                    ci += 1;
                    Arg::Scalar(*v)
                }
                ArgKind::Data(_) => Arg::Data(ops.next().ok_or_else(|| short("operands"))?),
                ArgKind::Ld(_) => {
                    let v = lds.get(li).ok_or_else(|| short("leading dimensions"))?;
                    li += 1;
                    Arg::Ld(*v)
                }
                ArgKind::Inc(_) => {
                    let v = incs.get(ii).ok_or_else(|| short("increments"))?;
                    ii += 1;
                    Arg::Inc(*v)
                }
                ArgKind::Info => Arg::Info,
            };
            args.push(arg);
        }
        // Kinds follow the descriptor by construction; only flag values need checking.
        desc.check_flags(flags)?;
        Ok(Call { kernel, args })
    }

    pub fn descriptor(&self) -> KernelDescriptor {
        self.kernel.descriptor()
    }

    /// Verifies that each argument matches its declared kind.
    pub fn check_kinds(&self) -> Result<()> {
        let desc = self.descriptor();
        if desc.args.len() != self.args.len() {
            return Err(Error::InvalidCall(format!(
                "{} expects {} arguments, got {}",
                self.kernel,
                desc.args.len(),
                self.args.len()
            )));
        }
        for (spec, arg) in desc.args.iter().zip(&self.args) {
            let ok = matches!(
                (spec.kind, arg),
                (ArgKind::Flag(_), Arg::Flag(_))
                    | (ArgKind::Size, Arg::Size(_))
                    | (ArgKind::Scalar, Arg::Scalar(_))
                    | (ArgKind::Data(_), Arg::Data(_))
                    | (ArgKind::Ld(_), Arg::Ld(_))
                    | (ArgKind::Inc(_), Arg::Inc(_))
                    | (ArgKind::Info, Arg::Info)
            );
            if !ok {
                return Err(Error::InvalidCall(format!(
                    "{}: argument `{}` has the wrong kind",
                    self.kernel, spec.name
                )));
            }
        }
        desc.check_flags(&self.flags())
    }

    pub fn flags(&self) -> Vec<&str> {
        self.args
            .iter()
            .filter_map(|a| match a {
                Arg::Flag(f) => Some(f.as_ref()),
                _ => None,
            })
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.args
            .iter()
            .filter_map(|a| match a {
                Arg::Size(s) => Some(*s),
                _ => None,
            })
            .collect()
    }

    pub fn scalars(&self) -> Vec<f64> {
        self.args
            .iter()
            .filter_map(|a| match a {
                Arg::Scalar(s) => Some(*s),
                _ => None,
            })
            .collect()
    }

    pub fn incs(&self) -> Vec<isize> {
        self.args
            .iter()
            .filter_map(|a| match a {
                Arg::Inc(s) => Some(*s),
                _ => None,
            })
            .collect()
    }

    pub fn operands(&self) -> Vec<&Operand> {
        self.args
            .iter()
            .filter_map(|a| match a {
                Arg::Data(o) => Some(o),
                _ => None,
            })
            .collect()
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Operand> {
        self.args
            .iter_mut()
            .filter_map(|a| match a {
                Arg::Data(o) => Some(o),
                _ => None,
            })
            .collect()
    }

    fn arg_named(&self, name: &str) -> Option<&Arg> {
        let desc = self.descriptor();
        desc.args
            .iter()
            .position(|s| s.name == name)
            .map(|i| &self.args[i])
    }

    pub fn flag(&self, name: &str) -> Option<&str> {
        match self.arg_named(name) {
            Some(Arg::Flag(f)) => Some(f.as_ref()),
            _ => None,
        }
    }

    pub fn size(&self, name: &str) -> Option<usize> {
        match self.arg_named(name) {
            Some(Arg::Size(s)) => Some(*s),
            _ => None,
        }
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        match self.arg_named(name) {
            Some(Arg::Scalar(s)) => Some(*s),
            _ => None,
        }
    }

    pub fn flop_count(&self) -> Result<u64> {
        flop_count(self.kernel, &self.sizes(), &self.flags())
    }

    pub fn data_movement(&self) -> Result<u64> {
        min_data_movement(self.kernel, &self.sizes(), &self.flags())
    }

    /// True when some size argument is zero, which makes the call a no-op.
    pub fn is_empty(&self) -> bool {
        match self.kernel {
            Kernel::Dlaswp => {
                let s = self.sizes();
                s[0] == 0 || s[2] < s[1]
            }
            _ => self.sizes().contains(&0),
        }
    }

    /// Element layout of every data argument, in signature order.
    pub fn layouts(&self) -> Result<Vec<Layout>> {
        let shapes = operand_shapes(self.kernel, &self.sizes(), &self.flags())?;
        let desc = self.descriptor();
        let mut out = Vec::with_capacity(shapes.len());
        for (slot, (pos, shape)) in desc.data_positions().into_iter().zip(shapes).enumerate() {
            let mut stride = 1isize;
            for (spec, arg) in desc.args.iter().zip(&self.args) {
                match (spec.kind, arg) {
                    (ArgKind::Ld(p), Arg::Ld(ld)) if p == pos => stride = *ld as isize,
                    (ArgKind::Inc(p), Arg::Inc(inc)) if p == pos => stride = *inc,
                    _ => {}
                }
            }
            let operand = match &self.args[pos] {
                Arg::Data(o) => o.clone(),
                _ => unreachable!("data position holds data"),
            };
            out.push(Layout {
                slot,
                arg: desc.args[pos].name,
                role: match desc.args[pos].kind {
                    ArgKind::Data(r) => r,
                    _ => unreachable!(),
                },
                operand,
                shape,
                stride,
            });
        }
        Ok(out)
    }

    /// Validates leading dimensions, increments and sizes.
    pub fn validate(&self) -> Result<()> {
        self.check_kinds()?;
        for l in self.layouts()? {
            match l.shape.structure {
                Structure::Vector => {
                    if l.stride == 0 {
                        return Err(Error::InvalidCall(format!(
                            "{}: increment of `{}` is zero",
                            self.kernel, l.arg
                        )));
                    }
                }
                _ => {
                    let ld = l.stride.max(0) as usize;
                    if ld < l.shape.rows.max(1) {
                        return Err(Error::LeadingDimension {
                            arg: l.arg.into(),
                            ld,
                            rows: l.shape.rows,
                        });
                    }
                }
            }
        }
        if self.kernel == Kernel::Dlaswp {
            let s = self.sizes();
            if s[1] == 0 && s[2] > 0 {
                return Err(Error::InvalidCall("dlaswp: k1 is 1-based".into()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kernel)?;
        for arg in &self.args {
            match arg {
                Arg::Flag(v) => write!(f, " {v}")?,
                Arg::Size(v) | Arg::Ld(v) => write!(f, " {v}")?,
                Arg::Scalar(v) => write!(f, " {v}")?,
                Arg::Inc(v) => write!(f, " {v}")?,
                Arg::Data(o) if o.offset == 0 => write!(f, " {}", o.buffer)?,
                Arg::Data(o) => write!(f, " {}+{}", o.buffer, o.offset)?,
                Arg::Info => {}
            }
        }
        Ok(())
    }
}

/// Referenced part of a stored operand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    General,
    Lower,
    Upper,
    Vector,
}

/// Logical extent of a data argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
    pub structure: Structure,
}

impl Shape {
    pub fn general(rows: usize, cols: usize) -> Self {
        Shape {
            rows,
            cols,
            structure: Structure::General,
        }
    }

    pub fn vector(n: usize) -> Self {
        Shape {
            rows: n,
            cols: 1,
            structure: Structure::Vector,
        }
    }

    pub fn triangle(n: usize, uplo: &str) -> Self {
        Shape {
            rows: n,
            cols: n,
            structure: if uplo == "U" {
                Structure::Upper
            } else {
                Structure::Lower
            },
        }
    }

    /// Number of referenced elements.
    pub fn elements(&self) -> usize {
        match self.structure {
            Structure::Lower | Structure::Upper => self.rows * (self.rows + 1) / 2,
            _ => self.rows * self.cols,
        }
    }
}

/// Position of a data argument in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    /// Index among the call's data arguments.
    pub slot: usize,
    pub arg: &'static str,
    pub role: Role,
    pub operand: Operand,
    pub shape: Shape,
    /// Leading dimension for matrices, increment for vectors.
    pub stride: isize,
}

impl Layout {
    /// Number of buffer elements spanned from the operand offset.
    pub fn span(&self) -> usize {
        let s = self.shape;
        if s.rows == 0 || s.cols == 0 {
            return 0;
        }
        match s.structure {
            Structure::Vector => (s.rows - 1) * self.stride.unsigned_abs() + 1,
            _ => (s.cols - 1) * self.stride as usize + s.rows,
        }
    }
}

fn flag<'a>(flags: &[&'a str], i: usize) -> &'a str {
    flags.get(i).copied().unwrap_or("")
}

/// Logical shape of each data argument given sizes and flags.
pub fn operand_shapes(kernel: Kernel, sizes: &[usize], flags: &[&str]) -> Result<Vec<Shape>> {
    let desc = kernel.descriptor();
    desc.check_flags(flags)?;
    let ns = desc.args.iter().filter(|a| matches!(a.kind, ArgKind::Size)).count();
    if sizes.len() != ns {
        return Err(Error::InvalidCall(format!(
            "{kernel} expects {ns} sizes, got {}",
            sizes.len()
        )));
    }
    let s = sizes;
    let v = Shape::vector;
    let g = Shape::general;
    let t = Shape::triangle;
    let shapes = match kernel {
        Kernel::Dcopy | Kernel::Dswap | Kernel::Daxpy | Kernel::Ddot => vec![v(s[0]), v(s[0])],
        Kernel::Dgemv => {
            let (m, n) = (s[0], s[1]);
            if flag(flags, 0) == "N" {
                vec![g(m, n), v(n), v(m)]
            } else {
                vec![g(m, n), v(m), v(n)]
            }
        }
        Kernel::Dger => vec![v(s[0]), v(s[1]), g(s[0], s[1])],
        Kernel::Dtrsv => vec![t(s[0], flag(flags, 0)), v(s[0])],
        Kernel::Dgemm => {
            let (m, n, k) = (s[0], s[1], s[2]);
            let a = if flag(flags, 0) == "N" { g(m, k) } else { g(k, m) };
            let b = if flag(flags, 1) == "N" { g(k, n) } else { g(n, k) };
            vec![a, b, g(m, n)]
        }
        Kernel::Dsymm => {
            let (m, n) = (s[0], s[1]);
            let na = if flag(flags, 0) == "L" { m } else { n };
            vec![t(na, flag(flags, 1)), g(m, n), g(m, n)]
        }
        Kernel::Dtrmm | Kernel::Dtrsm => {
            let (m, n) = (s[0], s[1]);
            let na = if flag(flags, 0) == "L" { m } else { n };
            vec![t(na, flag(flags, 1)), g(m, n)]
        }
        Kernel::Dsyrk => {
            let (n, k) = (s[0], s[1]);
            let a = if flag(flags, 1) == "N" { g(n, k) } else { g(k, n) };
            vec![a, t(n, flag(flags, 0))]
        }
        Kernel::Dsyr2k => {
            let (n, k) = (s[0], s[1]);
            let a = if flag(flags, 1) == "N" { g(n, k) } else { g(k, n) };
            vec![a, a, t(n, flag(flags, 0))]
        }
        Kernel::Dlauu2 | Kernel::Dpotf2 | Kernel::Dlauum | Kernel::Dpotrf => {
            vec![t(s[0], flag(flags, 0))]
        }
        Kernel::Dsygs2 | Kernel::Dsygst => {
            vec![t(s[0], flag(flags, 1)), t(s[0], flag(flags, 1))]
        }
        Kernel::Dtrti2 | Kernel::Dtrtri => vec![t(s[0], flag(flags, 0))],
        Kernel::Dgetf2 | Kernel::Dgetrf => vec![g(s[0], s[1]), v(s[0].min(s[1]))],
        Kernel::Dgeqr2 | Kernel::Dgeqrf => {
            vec![g(s[0], s[1]), v(s[0].min(s[1])), v(s[1])]
        }
        Kernel::Dlarft => {
            let (n, k) = (s[0], s[1]);
            vec![g(n, k), v(k), t(k, "U")]
        }
        Kernel::Dlarfb => {
            let (m, n, k) = (s[0], s[1], s[2]);
            if flag(flags, 0) == "L" {
                vec![g(m, k), t(k, "U"), g(m, n), g(n, k)]
            } else {
                vec![g(n, k), t(k, "U"), g(m, n), g(m, k)]
            }
        }
        Kernel::Dlaswp => {
            let (n, k2) = (s[0], s[2]);
            vec![g(k2, n), v(k2)]
        }
        Kernel::Dtrsyl => {
            let (m, n) = (s[0], s[1]);
            vec![t(m, "U"), t(n, "U"), g(m, n), v(1)]
        }
    };
    Ok(shapes)
}

fn tri(n: u128) -> u128 {
    n * (n + 1) / 2
}

fn round_div(num: u128, den: u128) -> u128 {
    (2 * num + den) / (2 * den)
}

fn to_u64(v: u128) -> u64 {
    u64::try_from(v).unwrap_or(u64::MAX)
}

fn prepare(kernel: Kernel, sizes: &[usize], flags: &[&str]) -> Result<Vec<u128>> {
    let desc = kernel.descriptor();
    desc.check_flags(flags)?;
    let ns = desc.args.iter().filter(|a| matches!(a.kind, ArgKind::Size)).count();
    if sizes.len() != ns {
        return Err(Error::InvalidCall(format!(
            "{kernel} expects {ns} sizes, got {}",
            sizes.len()
        )));
    }
    Ok(sizes.iter().map(|&s| s as u128).collect())
}

fn qr_flops(m: u128, n: u128) -> u128 {
    if m < n {
        round_div(6 * m * m * n - 2 * m * m * m, 3)
    } else {
        round_div(6 * n * n * m - 2 * n * n * n, 3)
    }
}

/// Minimal floating-point operation count.
pub fn flop_count(kernel: Kernel, sizes: &[usize], flags: &[&str]) -> Result<u64> {
    let s = prepare(kernel, sizes, flags)?;
    let left = flag(flags, 0) == "L";
    let f = match kernel {
        Kernel::Dcopy | Kernel::Dswap | Kernel::Dlaswp => 0,
        Kernel::Daxpy | Kernel::Ddot => 2 * s[0],
        Kernel::Dgemv | Kernel::Dger => 2 * s[0] * s[1],
        Kernel::Dtrsv => s[0] * s[0],
        Kernel::Dgemm => 2 * s[0] * s[1] * s[2],
        Kernel::Dsymm => {
            if left {
                2 * s[0] * s[0] * s[1]
            } else {
                2 * s[0] * s[1] * s[1]
            }
        }
        Kernel::Dtrmm | Kernel::Dtrsm => {
            if left {
                s[0] * s[0] * s[1]
            } else {
                s[0] * s[1] * s[1]
            }
        }
        Kernel::Dsyrk => s[0] * (s[0] + 1) * s[1],
        Kernel::Dsyr2k => 2 * s[0] * (s[0] + 1) * s[1],
        Kernel::Dlauu2
        | Kernel::Dlauum
        | Kernel::Dtrti2
        | Kernel::Dtrtri
        | Kernel::Dpotf2
        | Kernel::Dpotrf => s[0] * (s[0] + 1) * (2 * s[0] + 1) / 6,
        Kernel::Dsygs2 | Kernel::Dsygst => s[0] * (s[0] + 1) * (s[0] + 1),
        Kernel::Dgetf2 | Kernel::Dgetrf => round_div(2 * s[0] * s[1] * s[0].min(s[1]), 3),
        Kernel::Dgeqr2 | Kernel::Dgeqrf => qr_flops(s[0], s[1]),
        Kernel::Dlarft => {
            let (n, k) = (s[0], s[1]);
            let k1 = k.saturating_sub(1);
            (n * k * k1).saturating_sub(k1 * k * (2 * k).saturating_sub(1) / 6)
        }
        Kernel::Dlarfb => {
            let (m, n, k) = (s[0], s[1], s[2]);
            let (rows, cols) = if left { (m, n) } else { (n, m) };
            3 * cols * k * k + 4 * cols * k * rows.saturating_sub(k) + cols * k
        }
        Kernel::Dtrsyl => s[0] * s[1] * (s[0] + s[1] + 4),
    };
    Ok(to_u64(f))
}

/// Minimal number of distinct elements touched.
pub fn data_volume(kernel: Kernel, sizes: &[usize], flags: &[&str]) -> Result<u64> {
    let s = prepare(kernel, sizes, flags)?;
    let left = flag(flags, 0) == "L";
    let v = match kernel {
        Kernel::Dcopy | Kernel::Dswap | Kernel::Daxpy | Kernel::Ddot => 2 * s[0],
        Kernel::Dgemv => {
            if flag(flags, 0) == "N" {
                s[0] * s[1] + s[0]
            } else {
                s[0] * s[1] + s[1]
            }
        }
        Kernel::Dger => s[0] * s[1] + s[0] + s[1],
        Kernel::Dtrsv => tri(s[0]) + s[0],
        Kernel::Dgemm => s[0] * s[2] + s[2] * s[1] + s[0] * s[1],
        Kernel::Dsymm => {
            let na = if left { s[0] } else { s[1] };
            tri(na) + 2 * s[0] * s[1]
        }
        Kernel::Dtrmm | Kernel::Dtrsm => {
            let na = if left { s[0] } else { s[1] };
            tri(na) + s[0] * s[1]
        }
        Kernel::Dsyrk => tri(s[0]) + s[0] * s[1],
        Kernel::Dsyr2k => tri(s[0]) + 2 * s[0] * s[1],
        Kernel::Dlauu2
        | Kernel::Dlauum
        | Kernel::Dtrti2
        | Kernel::Dtrtri
        | Kernel::Dpotf2
        | Kernel::Dpotrf => tri(s[0]),
        Kernel::Dsygs2 | Kernel::Dsygst => s[0] * (s[0] + 1),
        Kernel::Dgetf2 | Kernel::Dgetrf => s[0] * s[1],
        Kernel::Dgeqr2 | Kernel::Dgeqrf => s[0] * s[1] + s[0].min(s[1]),
        Kernel::Dlarft => s[0] * s[1] + s[1] + tri(s[1]),
        Kernel::Dlarfb => {
            let (m, n, k) = (s[0], s[1], s[2]);
            let (rows, cols) = if left { (m, n) } else { (n, m) };
            rows * k + tri(k) + m * n + cols * k
        }
        Kernel::Dlaswp => 2 * s[0] * (s[2] + 1).saturating_sub(s[1]),
        Kernel::Dtrsyl => tri(s[0]) + tri(s[1]) + s[0] * s[1],
    };
    Ok(to_u64(v))
}

/// Minimal data movement: output-side operands count twice.
pub fn min_data_movement(kernel: Kernel, sizes: &[usize], flags: &[&str]) -> Result<u64> {
    let s = prepare(kernel, sizes, flags)?;
    let left = flag(flags, 0) == "L";
    let v = match kernel {
        Kernel::Dcopy | Kernel::Ddot => 2 * s[0],
        Kernel::Daxpy => 3 * s[0],
        Kernel::Dswap => 4 * s[0],
        Kernel::Dgemv => {
            if flag(flags, 0) == "N" {
                s[0] * s[1] + 2 * s[0]
            } else {
                s[0] * s[1] + 2 * s[1]
            }
        }
        Kernel::Dger => 2 * s[0] * s[1] + s[0] + s[1],
        Kernel::Dtrsv => tri(s[0]) + 2 * s[0],
        Kernel::Dgemm => s[0] * s[2] + s[2] * s[1] + 2 * s[0] * s[1],
        Kernel::Dsymm => {
            let na = if left { s[0] } else { s[1] };
            tri(na) + 3 * s[0] * s[1]
        }
        Kernel::Dtrmm | Kernel::Dtrsm => {
            let na = if left { s[0] } else { s[1] };
            tri(na) + 2 * s[0] * s[1]
        }
        Kernel::Dsyrk => s[0] * (s[0] + 1) + s[0] * s[1],
        Kernel::Dsyr2k => s[0] * (s[0] + 1) + 2 * s[0] * s[1],
        Kernel::Dlauu2
        | Kernel::Dlauum
        | Kernel::Dtrti2
        | Kernel::Dtrtri
        | Kernel::Dpotf2
        | Kernel::Dpotrf => s[0] * (s[0] + 1),
        Kernel::Dsygs2 | Kernel::Dsygst => 3 * s[0] * (s[0] + 1) / 2,
        Kernel::Dgetf2 | Kernel::Dgetrf => 2 * s[0] * s[1],
        Kernel::Dgeqr2 | Kernel::Dgeqrf => 2 * s[0] * s[1] + s[0].min(s[1]),
        Kernel::Dlarft => s[0] * s[1] + s[1] + tri(s[1]),
        Kernel::Dlarfb => {
            let (m, n, k) = (s[0], s[1], s[2]);
            let (rows, cols) = if left { (m, n) } else { (n, m) };
            rows * k + tri(k) + 2 * m * n + 2 * cols * k
        }
        Kernel::Dlaswp => 4 * s[0] * (s[2] + 1).saturating_sub(s[1]),
        Kernel::Dtrsyl => tri(s[0]) + tri(s[1]) + 2 * s[0] * s[1],
    };
    Ok(to_u64(v))
}

/// Flops per byte of minimal data movement (double precision).
pub fn arithmetic_intensity(kernel: Kernel, sizes: &[usize], flags: &[&str]) -> Result<f64> {
    let mov = min_data_movement(kernel, sizes, flags)?;
    if mov == 0 {
        return Err(Error::UndefinedIntensity);
    }
    Ok(flop_count(kernel, sizes, flags)? as f64 / (8.0 * mov as f64))
}

/// Polynomial degree of the cost in each size argument.
///
/// The flop formula determines the degree; kernels without flops use their
/// data movement instead.
pub fn size_degrees(kernel: Kernel, flags: &[&str]) -> Result<Vec<u32>> {
    kernel.descriptor().check_flags(flags)?;
    let left = flag(flags, 0) == "L";
    let d = match kernel {
        Kernel::Dcopy | Kernel::Dswap | Kernel::Daxpy | Kernel::Ddot => vec![1],
        Kernel::Dgemv | Kernel::Dger => vec![1, 1],
        Kernel::Dtrsv => vec![2],
        Kernel::Dgemm => vec![1, 1, 1],
        Kernel::Dsymm | Kernel::Dtrmm | Kernel::Dtrsm => {
            if left {
                vec![2, 1]
            } else {
                vec![1, 2]
            }
        }
        Kernel::Dsyrk | Kernel::Dsyr2k => vec![2, 1],
        Kernel::Dlauu2
        | Kernel::Dlauum
        | Kernel::Dtrti2
        | Kernel::Dtrtri
        | Kernel::Dpotf2
        | Kernel::Dpotrf
        | Kernel::Dsygs2
        | Kernel::Dsygst => vec![3],
        Kernel::Dgetf2 | Kernel::Dgetrf => vec![2, 2],
        Kernel::Dgeqr2 | Kernel::Dgeqrf => vec![3, 3],
        Kernel::Dlarft => vec![1, 3],
        Kernel::Dlarfb => vec![1, 1, 2],
        Kernel::Dlaswp => vec![1, 1, 1],
        Kernel::Dtrsyl => vec![2, 2],
    };
    Ok(d)
}
