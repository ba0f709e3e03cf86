//! Cache preconditions: ordered operand and remote accesses.

use crate::error::{Error, Result};
use crate::kernels::{BufferStore, Call, Structure};
use serde::{Deserialize, Serialize};
use std::hint::black_box;

/// Strided view of a buffer: element `(i_0, i_1, ..)` lives at
/// `offset + sum_k i_k * stride_k`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Region {
    pub buffer: String,
    pub offset: usize,
    /// `(extent, stride)` per dimension, strides in elements.
    pub dims: Vec<(usize, usize)>,
}

impl Region {
    pub fn new(buffer: impl Into<String>, offset: usize, dims: Vec<(usize, usize)>) -> Self {
        Region {
            buffer: buffer.into(),
            offset,
            dims,
        }
    }

    /// Number of addressed elements.
    pub fn elements(&self) -> usize {
        self.dims.iter().map(|d| d.0).product()
    }

    pub fn bytes(&self) -> u64 {
        8 * self.elements() as u64
    }

    /// One past the largest addressed element, relative to the buffer start.
    pub fn end(&self) -> usize {
        if self.elements() == 0 {
            return self.offset;
        }
        self.offset + self.dims.iter().map(|(e, s)| (e - 1) * s).sum::<usize>() + 1
    }

    /// Visits every addressed element index in column-major order.
    pub fn for_each_index(&self, mut f: impl FnMut(usize)) {
        if self.elements() == 0 {
            return;
        }
        let mut idx = vec![0usize; self.dims.len()];
        loop {
            let pos = self.offset
                + idx
                    .iter()
                    .zip(&self.dims)
                    .map(|(i, (_, s))| i * s)
                    .sum::<usize>();
            f(pos);
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return;
                }
                idx[k] += 1;
                if idx[k] < self.dims[k].0 {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

/// One entry of a precondition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Access {
    /// Loads every cache line of the region.
    Operand(Region),
    /// Writes this many distinct bytes of scratch memory.
    Remote(u64),
}

impl Access {
    pub fn bytes(&self) -> u64 {
        match self {
            Access::Operand(r) => r.bytes(),
            Access::Remote(b) => *b,
        }
    }
}

/// Ordered list of accesses that establishes a cache state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CachePrecondition {
    pub accesses: Vec<Access>,
}

impl CachePrecondition {
    pub fn new(accesses: Vec<Access>) -> Result<Self> {
        if accesses.iter().any(|a| matches!(a, Access::Remote(0))) {
            return Err(Error::Config("remote accesses must be positive".into()));
        }
        Ok(CachePrecondition { accesses })
    }

    pub fn remote(bytes: u64) -> Self {
        CachePrecondition {
            accesses: vec![Access::Remote(bytes)],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.accesses.is_empty()
    }

    /// Touches all operands of a call in signature order.
    pub fn operands_of(call: &Call) -> Result<Self> {
        Ok(CachePrecondition {
            accesses: operand_regions(call)?
                .into_iter()
                .map(Access::Operand)
                .collect(),
        })
    }

    pub fn total_bytes(&self) -> u64 {
        self.accesses.iter().map(|a| a.bytes()).sum()
    }
}

/// Memory footprint of each data argument of a call, in signature order.
pub fn operand_regions(call: &Call) -> Result<Vec<Region>> {
    Ok(call
        .layouts()?
        .into_iter()
        .map(|l| {
            let dims = match l.shape.structure {
                Structure::Vector => vec![(l.shape.rows, l.stride.unsigned_abs())],
                _ => vec![(l.shape.rows, 1), (l.shape.cols, l.stride.max(1) as usize)],
            };
            Region::new(l.operand.buffer, l.operand.offset, dims)
        })
        .collect())
}

/// Recorded precondition activity.
#[derive(Clone, Debug, PartialEq)]
pub enum TouchEvent {
    Operand(String),
    Remote(u64),
}

/// Applies preconditions to real memory.
#[derive(Debug)]
pub struct Toucher {
    scratch: Vec<u8>,
    line_size: usize,
    /// Remote bytes written so far.
    pub remote_bytes: u64,
    /// Operand bytes read so far.
    pub operand_bytes: u64,
    /// Order log, when enabled.
    pub log: Option<Vec<TouchEvent>>,
}

impl Toucher {
    pub fn new(scratch_bytes: usize, line_size: usize) -> Self {
        Toucher {
            scratch: vec![0; scratch_bytes],
            line_size: line_size.max(1),
            remote_bytes: 0,
            operand_bytes: 0,
            log: None,
        }
    }

    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn scratch_len(&self) -> usize {
        self.scratch.len()
    }

    pub fn apply(&mut self, pre: &CachePrecondition, store: &BufferStore) -> Result<()> {
        let need = pre
            .accesses
            .iter()
            .filter_map(|a| match a {
                Access::Remote(b) => Some(*b),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        if need as usize > self.scratch.len() {
            return Err(Error::ScratchTooSmall {
                have: self.scratch.len(),
                need: need as usize,
            });
        }
        for access in &pre.accesses {
            match access {
                Access::Operand(r) => {
                    let buf = store.get(&r.buffer)?;
                    if r.end() > buf.len() {
                        return Err(Error::OutOfBounds {
                            arg: "precondition".into(),
                            buffer: r.buffer.clone(),
                            needed: r.end(),
                            len: buf.len(),
                        });
                    }
                    let mut acc = 0.0;
                    r.for_each_index(|i| acc += buf[i]);
                    black_box(acc);
                    self.operand_bytes += r.bytes();
                    if let Some(log) = &mut self.log {
                        log.push(TouchEvent::Operand(r.buffer.clone()));
                    }
                }
                Access::Remote(bytes) => {
                    let n = *bytes as usize;
                    let mut i = 0;
                    while i < n {
                        self.scratch[i] = self.scratch[i].wrapping_add(1);
                        i += self.line_size;
                    }
                    black_box(&self.scratch);
                    self.remote_bytes += bytes;
                    if let Some(log) = &mut self.log {
                        log.push(TouchEvent::Remote(*bytes));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_noop() {
        let mut t = Toucher::new(1024, 64).with_log();
        t.apply(&CachePrecondition::default(), &BufferStore::new()).unwrap();
        assert_eq!(t.remote_bytes + t.operand_bytes, 0);
        assert_eq!(t.log.unwrap().len(), 0);
    }

    #[test]
    fn remote_counts_bytes() {
        let cache = 20 * 1024 * 1024;
        let mut t = Toucher::new(2 * cache, 64);
        t.apply(&CachePrecondition::remote(cache as u64 * 5 / 4), &BufferStore::new())
            .unwrap();
        assert_eq!(t.remote_bytes, cache as u64 * 5 / 4);
        let mut small = Toucher::new(16, 64);
        assert!(matches!(
            small.apply(&CachePrecondition::remote(32), &BufferStore::new()),
            Err(Error::ScratchTooSmall { .. })
        ));
    }

    #[test]
    fn order_preserved() {
        let mut st = BufferStore::new();
        st.alloc("A", 16);
        st.alloc("C", 16);
        let pre = CachePrecondition::new(vec![
            Access::Operand(Region::new("C", 0, vec![(4, 1), (4, 4)])),
            Access::Remote(128),
            Access::Operand(Region::new("A", 0, vec![(16, 1)])),
        ])
        .unwrap();
        let mut t = Toucher::new(256, 64).with_log();
        t.apply(&pre, &st).unwrap();
        assert_eq!(
            t.log.unwrap(),
            vec![
                TouchEvent::Operand("C".into()),
                TouchEvent::Remote(128),
                TouchEvent::Operand("A".into())
            ]
        );
    }

    #[test]
    fn region_indices() {
        let r = Region::new("A", 2, vec![(2, 1), (2, 5)]);
        let mut v = Vec::new();
        r.for_each_index(|i| v.push(i));
        assert_eq!(v, vec![2, 3, 7, 8]);
        assert_eq!(r.end(), 9);
    }
}
