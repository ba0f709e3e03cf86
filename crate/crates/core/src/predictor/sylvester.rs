//! Blocked algorithms for the triangular Sylvester equation `A X + X B = C`
//! with `A` (m x m) and `B` (n x n) upper triangular.

use super::emit::{Block, Emitter, Split};
use crate::error::{Error, Result};

/// How a (sub-)problem is solved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SylvPlan {
    /// Unblocked solve of the whole (sub-)problem.
    Trsyl,
    /// Rows bottom-up, update before the solve.
    M1(Box<SylvPlan>),
    /// Rows bottom-up, update after the solve.
    M2(Box<SylvPlan>),
    /// Columns left to right, update before the solve.
    N1(Box<SylvPlan>),
    /// Columns left to right, update after the solve.
    N2(Box<SylvPlan>),
    /// 3x3 partitioning, horizontal panel then vertical panel per step.
    D1 { horizontal: Box<SylvPlan>, vertical: Box<SylvPlan> },
    /// 3x3 partitioning, whole column block per step.
    D10 { lower: Box<SylvPlan>, upper: Box<SylvPlan> },
}

fn one_d(tok: &str, inner: SylvPlan) -> Option<SylvPlan> {
    let inner = Box::new(inner);
    Some(match tok {
        "m1" => SylvPlan::M1(inner),
        "m2" => SylvPlan::M2(inner),
        "n1" => SylvPlan::N1(inner),
        "n2" => SylvPlan::N2(inner),
        _ => return None,
    })
}

fn vertical(tok: &str) -> Option<SylvPlan> {
    tok.starts_with('m').then(|| one_d(tok, SylvPlan::Trsyl)).flatten()
}

fn horizontal(tok: &str) -> Option<SylvPlan> {
    tok.starts_with('n').then(|| one_d(tok, SylvPlan::Trsyl)).flatten()
}

/// Parses names such as `sylv_m1`, `sylv_m1n2`, `sylv_d1_n1m2`, `sylv_d10_m1m1`.
pub fn parse_plan(name: &str) -> Option<SylvPlan> {
    let spec = name.strip_prefix("sylv_")?;
    let pair = |s: &str| (s.len() == 4).then(|| (s[..2].to_string(), s[2..].to_string()));
    if let Some(rest) = spec.strip_prefix("d10") {
        let (a, b) = match rest.strip_prefix('_') {
            Some(r) => pair(r)?,
            None if rest.is_empty() => ("m1".into(), "m1".into()),
            None => return None,
        };
        return Some(SylvPlan::D10 {
            lower: Box::new(vertical(&a)?),
            upper: Box::new(vertical(&b)?),
        });
    }
    if let Some(rest) = spec.strip_prefix("d1") {
        let (h, v) = match rest.strip_prefix('_') {
            Some(r) => pair(r)?,
            None if rest.is_empty() => ("n1".into(), "m1".into()),
            None => return None,
        };
        return Some(SylvPlan::D1 {
            horizontal: Box::new(horizontal(&h)?),
            vertical: Box::new(vertical(&v)?),
        });
    }
    match spec.len() {
        2 => one_d(spec, SylvPlan::Trsyl),
        4 => {
            let (outer, inner) = (&spec[..2], &spec[2..]);
            if outer.as_bytes()[0] == inner.as_bytes()[0] {
                return None;
            }
            one_d(outer, one_d(inner, SylvPlan::Trsyl)?)
        }
        _ => None,
    }
}

pub const SYLVESTER: &[&str] = &[
    "sylv_m1", "sylv_m2", "sylv_n1", "sylv_n2",
    "sylv_m1n1", "sylv_m1n2", "sylv_m2n1", "sylv_m2n2",
    "sylv_n1m1", "sylv_n1m2", "sylv_n2m1", "sylv_n2m2",
    "sylv_d1_n1m1", "sylv_d1_n1m2", "sylv_d1_n2m1", "sylv_d1_n2m2",
    "sylv_d10_m1m1", "sylv_d10_m1m2", "sylv_d10_m2m1", "sylv_d10_m2m2",
];

/// Operands of one Sylvester (sub-)problem: rows and columns of `C`.
#[derive(Clone, Copy)]
struct Sub {
    r: (usize, usize),
    c: (usize, usize),
}

struct Ops {
    a: Block,
    b: Block,
    x: Block,
    bs: usize,
}

impl Ops {
    fn a(&self, r: (usize, usize), c: (usize, usize)) -> Block {
        self.a.at(r.0, c.0, r.1, c.1)
    }
    fn b(&self, r: (usize, usize), c: (usize, usize)) -> Block {
        self.b.at(r.0, c.0, r.1, c.1)
    }
    fn x(&self, r: (usize, usize), c: (usize, usize)) -> Block {
        self.x.at(r.0, c.0, r.1, c.1)
    }

    /// `x -= a * y` on the left.
    fn left(&self, e: &mut Emitter, a: Block, y: Block, x: Block) -> Result<()> {
        e.gemm("N", "N", -1.0, a, y, 1.0, x)
    }

    fn solve(&self, e: &mut Emitter, plan: &SylvPlan, s: Sub, top: bool) -> Result<()> {
        let bs = self.bs;
        match plan {
            SylvPlan::Trsyl => e.trsyl(self.a(s.r, s.r), self.b(s.c, s.c), self.x(s.r, s.c)),
            SylvPlan::M1(inner) | SylvPlan::M2(inner) => {
                for st in 0..s.r.1.div_ceil(bs) {
                    if top {
                        e.mark_step();
                    }
                    let p = st * bs;
                    let rows = Split::backward(s.r.1, p, bs.min(s.r.1 - p)).offset(s.r.0);
                    let [r0, r1, r2] = rows.0;
                    if matches!(plan, SylvPlan::M1(_)) {
                        self.left(e, self.a(r1, r2), self.x(r2, s.c), self.x(r1, s.c))?;
                        self.solve(e, inner, Sub { r: r1, c: s.c }, false)?;
                    } else {
                        self.solve(e, inner, Sub { r: r1, c: s.c }, false)?;
                        self.left(e, self.a(r0, r1), self.x(r1, s.c), self.x(r0, s.c))?;
                    }
                }
                Ok(())
            }
            SylvPlan::N1(inner) | SylvPlan::N2(inner) => {
                for st in 0..s.c.1.div_ceil(bs) {
                    if top {
                        e.mark_step();
                    }
                    let p = st * bs;
                    let cols = Split::forward(s.c.1, p, bs.min(s.c.1 - p)).offset(s.c.0);
                    let [c0, c1, c2] = cols.0;
                    if matches!(plan, SylvPlan::N1(_)) {
                        self.left(e, self.x(s.r, c0), self.b(c0, c1), self.x(s.r, c1))?;
                        self.solve(e, inner, Sub { r: s.r, c: c1 }, false)?;
                    } else {
                        self.solve(e, inner, Sub { r: s.r, c: c1 }, false)?;
                        self.left(e, self.x(s.r, c1), self.b(c1, c2), self.x(s.r, c2))?;
                    }
                }
                Ok(())
            }
            SylvPlan::D1 { .. } | SylvPlan::D10 { .. } => {
                let steps = s.r.1.div_ceil(bs).max(s.c.1.div_ceil(bs));
                for st in 0..steps {
                    if top {
                        e.mark_step();
                    }
                    let pm = (st * bs).min(s.r.1);
                    let pn = (st * bs).min(s.c.1);
                    let [r0, r1, r2] =
                        Split::backward(s.r.1, pm, bs.min(s.r.1 - pm)).offset(s.r.0).0;
                    let [c0, c1, c2] =
                        Split::forward(s.c.1, pn, bs.min(s.c.1 - pn)).offset(s.c.0).0;
                    match plan {
                        SylvPlan::D1 { horizontal, vertical } => {
                            self.left(e, self.a(r1, r2), self.x(r2, c0), self.x(r1, c0))?;
                            self.solve(e, horizontal, Sub { r: r1, c: c0 }, false)?;
                            self.left(e, self.x(r2, c0), self.b(c0, c1), self.x(r2, c1))?;
                            self.solve(e, vertical, Sub { r: r2, c: c1 }, false)?;
                            self.left(e, self.x(r1, c0), self.b(c0, c1), self.x(r1, c1))?;
                            self.left(e, self.a(r1, r2), self.x(r2, c1), self.x(r1, c1))?;
                            e.trsyl(self.a(r1, r1), self.b(c1, c1), self.x(r1, c1))?;
                        }
                        SylvPlan::D10 { lower, upper } => {
                            self.solve(e, lower, Sub { r: r2, c: c1 }, false)?;
                            self.left(e, self.a(r1, r2), self.x(r2, c1), self.x(r1, c1))?;
                            e.trsyl(self.a(r1, r1), self.b(c1, c1), self.x(r1, c1))?;
                            self.left(e, self.a(r0, r2), self.x(r2, c1), self.x(r0, c1))?;
                            self.left(e, self.a(r0, r1), self.x(r1, c1), self.x(r0, c1))?;
                            self.solve(e, upper, Sub { r: r0, c: c1 }, false)?;
                            self.left(e, self.x(r0, c1), self.b(c1, c2), self.x(r0, c2))?;
                            self.left(e, self.x(r1, c1), self.b(c1, c2), self.x(r1, c2))?;
                            self.left(e, self.x(r2, c1), self.b(c1, c2), self.x(r2, c2))?;
                        }
                        _ => unreachable!(),
                    }
                }
                Ok(())
            }
        }
    }
}

/// Calls of a Sylvester plan for `C` of size `m x n` with block size `b`.
pub fn expand(plan: &SylvPlan, m: usize, n: usize, b: usize) -> Result<Emitter> {
    if b == 0 {
        return Err(Error::Config("block size must be positive".into()));
    }
    let ops = Ops {
        a: Block::new("A", m),
        b: Block::new("B", n),
        x: Block::new("C", m),
        bs: b,
    };
    let mut e = Emitter::default();
    ops.solve(&mut e, plan, Sub { r: (0, m), c: (0, n) }, true)?;
    Ok(e)
}
