//! BLAS-based algorithms for tensor contractions and their cache-aware
//! micro-benchmark predictions.
//!
//! Tensors are dense column-major arrays of doubles: the first index is
//! contiguous. A contraction `C[..] = A[..] * B[..]` sums over every index
//! shared by `A` and `B`; every other index is free and appears in `C`.

mod algorithm;
mod analysis;
mod predict;

pub use algorithm::{
    describe, execute_algorithm, generate_algorithms, render_code, AlgorithmExport, CopySpec,
    ContractionAlgorithm,
    KernelIndices, Phase, SliceView, Statement, StmtKind, TensorKernel,
};
pub use analysis::{
    access_distance_ast, build_benchmarks, build_setup, detect_prefetch, first_iteration_distance,
    MicroBenchmark, Prefetch, SetupItem, TensorConfig, TensorSetup, Variant,
};
pub use predict::{
    algorithm_timing, measure_benchmarks, predict_contraction, rank_contractions,
    ContractionPrediction,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// The three tensors of a contraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TensorId {
    /// Output.
    C,
    /// Left input.
    A,
    /// Right input.
    B,
}

impl TensorId {
    pub const ALL: [TensorId; 3] = [TensorId::A, TensorId::B, TensorId::C];

    /// Buffer holding the tensor.
    pub fn buffer(self) -> &'static str {
        match self {
            TensorId::A => "A",
            TensorId::B => "B",
            TensorId::C => "C",
        }
    }

    /// Buffer holding a contiguous copy of a slice of the tensor.
    pub fn temp_buffer(self) -> &'static str {
        match self {
            TensorId::A => "TA",
            TensorId::B => "TB",
            TensorId::C => "TC",
        }
    }
}

/// A contraction with index extents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionSpec {
    /// Display names of the output, left and right tensor.
    pub names: [String; 3],
    pub output: Vec<char>,
    pub left: Vec<char>,
    pub right: Vec<char>,
    pub extents: BTreeMap<char, usize>,
}

impl ContractionSpec {
    pub fn new(
        output: &[char],
        left: &[char],
        right: &[char],
        extents: &[(char, usize)],
    ) -> Result<Self> {
        let spec = ContractionSpec {
            names: ["C".into(), "A".into(), "B".into()],
            output: output.to_vec(),
            left: left.to_vec(),
            right: right.to_vec(),
            extents: extents.iter().copied().collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn indices(&self, t: TensorId) -> &[char] {
        match t {
            TensorId::A => &self.left,
            TensorId::B => &self.right,
            TensorId::C => &self.output,
        }
    }

    pub fn extent(&self, index: char) -> usize {
        self.extents[&index]
    }

    /// Element strides of each dimension of a tensor.
    pub fn strides(&self, t: TensorId) -> Vec<usize> {
        let mut s = 1;
        self.indices(t)
            .iter()
            .map(|&i| {
                let cur = s;
                s *= self.extent(i);
                cur
            })
            .collect()
    }

    pub fn size(&self, t: TensorId) -> usize {
        self.indices(t).iter().map(|&i| self.extent(i)).product()
    }

    /// Indices shared by both inputs, in order of the left input.
    pub fn contracted(&self) -> Vec<char> {
        self.left
            .iter()
            .copied()
            .filter(|i| self.right.contains(i))
            .collect()
    }

    /// Free indices of an input, in its order.
    pub fn free(&self, t: TensorId) -> Vec<char> {
        self.indices(t)
            .iter()
            .copied()
            .filter(|i| self.output.contains(i))
            .collect()
    }

    /// Every index once: output order, then contracted indices.
    pub fn all_indices(&self) -> Vec<char> {
        let mut v = self.output.clone();
        v.extend(self.contracted());
        v
    }

    /// Multiply-add count of the contraction, two flops each.
    pub fn flops(&self) -> u64 {
        2 * self
            .all_indices()
            .iter()
            .map(|&i| self.extent(i) as u64)
            .product::<u64>()
    }

    /// Copy with different extents for the given indices.
    pub fn with_extents(&self, extents: &[(char, usize)]) -> Result<Self> {
        let mut s = self.clone();
        for &(i, e) in extents {
            s.extents.insert(i, e);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Contraction(m));
        for t in TensorId::ALL {
            let idx = self.indices(t);
            for (k, i) in idx.iter().enumerate() {
                if idx[..k].contains(i) {
                    return bad(format!("index `{i}` repeated in one tensor"));
                }
            }
        }
        for &i in self.output.iter().chain(&self.left).chain(&self.right) {
            let (c, a, b) = (
                self.output.contains(&i),
                self.left.contains(&i),
                self.right.contains(&i),
            );
            match (c, a, b) {
                (true, true, true) => return bad(format!("index `{i}` appears in all tensors")),
                (true, false, false) => return bad(format!("index `{i}` appears only in the output")),
                (false, true, false) | (false, false, true) => {
                    return bad(format!("index `{i}` is neither free nor contracted"))
                }
                _ => {}
            }
            match self.extents.get(&i) {
                None => return bad(format!("no extent for index `{i}`")),
                Some(0) => return bad(format!("extent of `{i}` must be positive")),
                _ => {}
            }
        }
        if let Some(i) = self.extents.keys().find(|i| !self.all_indices().contains(i)) {
            return bad(format!("extent given for unused index `{i}`"));
        }
        Ok(())
    }
}

impl fmt::Display for ContractionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[char]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        write!(
            f,
            "{}[{}] = {}[{}] * {}[{}]",
            self.names[0],
            list(&self.output),
            self.names[1],
            list(&self.left),
            self.names[2],
            list(&self.right)
        )?;
        for (i, e) in &self.extents {
            write!(f, " {i}={e}")?;
        }
        Ok(())
    }
}

/// Parses `C[a,b,c] = A[a,i] * B[i,b,c]` followed by bindings such as
/// `a=400 b=400 c=400 i=8` (separated by spaces, commas or semicolons,
/// optionally introduced by `with`).
pub fn parse_spec(text: &str) -> Result<ContractionSpec> {
    let bad = |m: &str| Error::Contraction(format!("{m} in `{text}`"));
    let eq = text.find('=').ok_or_else(|| bad("missing `=`"))?;
    let (lhs, rest) = (&text[..eq], &text[eq + 1..]);
    let (c_name, c_idx) = parse_tensor(lhs).ok_or_else(|| bad("malformed output tensor"))?;
    let star = rest.find('*').ok_or_else(|| bad("missing `*`"))?;
    let (a_text, rest) = (&rest[..star], &rest[star + 1..]);
    let (a_name, a_idx) = parse_tensor(a_text).ok_or_else(|| bad("malformed left tensor"))?;
    let close = rest.find(']').ok_or_else(|| bad("malformed right tensor"))?;
    let (b_name, b_idx) =
        parse_tensor(&rest[..=close]).ok_or_else(|| bad("malformed right tensor"))?;
    let mut extents = BTreeMap::new();
    let bindings = rest[close + 1..].trim();
    let bindings = bindings.strip_prefix("with").unwrap_or(bindings);
    for tok in bindings
        .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
    {
        let (k, v) = tok.split_once('=').ok_or_else(|| bad("malformed size binding"))?;
        let mut chars = k.trim().chars();
        let (Some(idx), None) = (chars.next(), chars.next()) else {
            return Err(bad("size binding must name one index"));
        };
        let v: usize = v.trim().parse().map_err(|_| bad("malformed extent"))?;
        extents.insert(idx, v);
    }
    let spec = ContractionSpec {
        names: [c_name, a_name, b_name],
        output: c_idx,
        left: a_idx,
        right: b_idx,
        extents,
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_tensor(text: &str) -> Option<(String, Vec<char>)> {
    let text = text.trim();
    let open = text.find('[')?;
    let inner = text[open + 1..].strip_suffix(']')?;
    let name = text[..open].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return None;
    }
    let mut idx = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let mut chars = part.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_alphabetic() => idx.push(c),
            _ => return None,
        }
    }
    Some((name.to_string(), idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let s = parse_spec("C[a,b,c] = A[a,i] * B[i,b,c] a=4 b=5 c=6 i=3").unwrap();
        assert_eq!(s.free(TensorId::A), vec!['a']);
        assert_eq!(s.free(TensorId::B), vec!['b', 'c']);
        assert_eq!(s.contracted(), vec!['i']);
        assert_eq!(s.strides(TensorId::B), vec![1, 3, 15]);
        assert_eq!(s.flops(), 2 * 4 * 5 * 6 * 3);

        let s = parse_spec("C[a] = A[i,a,j] * B[j,i] with a=8, i=2, j=3").unwrap();
        assert_eq!(s.free(TensorId::A), vec!['a']);
        assert!(s.free(TensorId::B).is_empty());
        assert_eq!(s.contracted(), vec!['i', 'j']);

        let again = parse_spec(&s.to_string()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "C[a] = A[a] * B[b] a=2 b=2",
            "C[a,i] = A[a,i] * B[i] a=2 i=2",
            "C[a,b] = A[a] * B[i] a=2 b=2 i=2",
            "C[a] = A[a,a] * B[a] a=2",
            "C[a] = A[a,i] * B[i] a=2",
            "C[a] = A[a,i] * B[i] a=2 i=0",
            "C[a] = A[a,i] B[i] a=2 i=2",
            "C[a] = A[a,ij] * B[ij] a=2",
            "C[a] = A[a,i] * B[i] a=2 i=2 z=3",
        ] {
            assert!(parse_spec(bad).is_err(), "{bad}");
        }
    }
}
