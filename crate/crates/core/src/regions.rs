//! Text regions and their sparse vector representations.
//!
//! A region is a window of `p` consecutive positions. Positions outside the
//! document are virtual pads and contribute nothing to any vector.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::corpus::{TokenSeq, Vocabulary};
use crate::error::{Error, Result};
use crate::sparse::SparseVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionMode {
    /// Concatenated one-hot vectors, dim `p * |V|`.
    Seq,
    /// Word counts, dim `|V|`.
    Bow,
    /// Counts of all contiguous 1..=n-grams found in an n-gram vocabulary.
    Bonv(usize),
}

impl fmt::Display for RegionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionMode::Seq => f.write_str("seq"),
            RegionMode::Bow => f.write_str("bow"),
            RegionMode::Bonv(n) => write!(f, "bonv{n}"),
        }
    }
}

impl FromStr for RegionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seq" => Ok(RegionMode::Seq),
            "bow" => Ok(RegionMode::Bow),
            _ => s
                .strip_prefix("bonv")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .map(RegionMode::Bonv)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown region mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionSpec {
    pub size: usize,
    pub stride: usize,
    pub mode: RegionMode,
    pub pad: bool,
}

impl RegionSpec {
    pub fn new(size: usize, stride: usize, mode: RegionMode, pad: bool) -> Result<Self> {
        let spec = RegionSpec {
            size,
            stride,
            mode,
            pad,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.stride == 0 {
            return Err(Error::InvalidArgument("region size and stride must be >= 1".into()));
        }
        if let RegionMode::Bonv(n) = self.mode {
            if n == 0 || n > self.size {
                return Err(Error::InvalidArgument(format!(
                    "bonv order {n} must lie in 1..={}",
                    self.size
                )));
            }
        }
        Ok(())
    }

    /// Dimension of the region vectors this spec produces over `vocab_len` entries.
    pub fn input_dim(&self, vocab_len: usize) -> usize {
        match self.mode {
            RegionMode::Seq => self.size * vocab_len,
            RegionMode::Bow | RegionMode::Bonv(_) => vocab_len,
        }
    }

    /// Two specs place regions at the same offsets.
    pub fn same_layout(&self, other: &RegionSpec) -> bool {
        self.size == other.size && self.stride == other.stride && self.pad == other.pad
    }
}

/// Window `[start, start + len)` over a document; may extend past either end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub start: isize,
    pub len: usize,
}

impl Region {
    pub fn positions(&self) -> Range<isize> {
        self.start..self.start + self.len as isize
    }

    /// The in-document positions covered by the region.
    pub fn covered(&self, doc_len: usize) -> Range<usize> {
        let lo = self.start.clamp(0, doc_len as isize) as usize;
        let hi = (self.start + self.len as isize).clamp(0, doc_len as isize) as usize;
        lo..hi
    }
}

/// Regions at offsets `0, stride, 2*stride, ...` of the (optionally padded) document.
///
/// Padding adds `p - 1` virtual positions on each side so every word is
/// covered. An empty document has no regions.
pub fn extract_regions(doc: &TokenSeq, spec: &RegionSpec) -> Vec<Region> {
    let n = doc.len() as isize;
    let p = spec.size as isize;
    if n == 0 {
        return Vec::new();
    }
    let (first, last) = if spec.pad { (1 - p, n - 1) } else { (0, n - p) };
    if last < first {
        return Vec::new();
    }
    (first..=last)
        .step_by(spec.stride)
        .map(|start| Region { start, len: spec.size })
        .collect()
}

/// Sparse vector of one region. Pad and out-of-vocabulary positions contribute nothing.
pub fn vectorize(doc: &TokenSeq, region: &Region, vocab: &Vocabulary, spec: &RegionSpec) -> SparseVec {
    let v = vocab.len();
    let dim = spec.input_dim(v);
    let ids: Vec<Option<u32>> = region.positions().map(|pos| doc.get(pos)).collect();
    let mut pairs = Vec::with_capacity(ids.len());
    match spec.mode {
        RegionMode::Seq => {
            debug_assert!(region.len <= spec.size);
            for (i, id) in ids.iter().enumerate() {
                if let Some(id) = id {
                    pairs.push(((i * v) as u32 + id, 1.0));
                }
            }
        }
        RegionMode::Bow => {
            pairs.extend(ids.iter().flatten().map(|&id| (id, 1.0)));
        }
        RegionMode::Bonv(n) => {
            for k in 1..=n {
                for window in ids.windows(k) {
                    let words: Option<Vec<u32>> = window.iter().copied().collect();
                    if let Some(id) = words.and_then(|w| vocab.ngram_id(&w)) {
                        pairs.push((id, 1.0));
                    }
                }
            }
        }
    }
    SparseVec::accumulate(dim, pairs)
}

/// The `width`-position windows immediately left and right of `region`.
/// Parts falling outside the document are pads, so contexts at a boundary
/// are truncated (possibly to nothing).
pub fn context_regions(region: &Region, width: usize) -> (Region, Region) {
    let left = Region {
        start: region.start - width as isize,
        len: width,
    };
    let right = Region {
        start: region.start + region.len as isize,
        len: width,
    };
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, encode, tokenize};
    use proptest::prelude::*;

    fn seq(n: usize) -> TokenSeq {
        TokenSeq {
            ids: (0..n as u32).map(Some).collect(),
        }
    }

    fn spec(p: usize, stride: usize, mode: RegionMode, pad: bool) -> RegionSpec {
        RegionSpec::new(p, stride, mode, pad).unwrap()
    }

    #[test]
    fn extract_unpadded_and_padded() {
        let r = extract_regions(&seq(3), &spec(2, 1, RegionMode::Bow, false));
        assert_eq!(r.iter().map(|r| r.start).collect::<Vec<_>>(), vec![0, 1]);
        let r = extract_regions(&seq(3), &spec(2, 1, RegionMode::Bow, true));
        assert_eq!(r.iter().map(|r| r.start).collect::<Vec<_>>(), vec![-1, 0, 1, 2]);
        assert!(extract_regions(&seq(1), &spec(3, 1, RegionMode::Bow, false)).is_empty());
        assert!(extract_regions(&seq(0), &spec(3, 1, RegionMode::Bow, true)).is_empty());
        let r = extract_regions(&seq(7), &spec(3, 2, RegionMode::Bow, false));
        assert_eq!(r.iter().map(|r| r.start).collect::<Vec<_>>(), vec![0, 2, 4]);
    }

    #[test]
    fn spec_validation() {
        assert!(RegionSpec::new(0, 1, RegionMode::Seq, true).is_err());
        assert!(RegionSpec::new(2, 0, RegionMode::Seq, true).is_err());
        assert!(RegionSpec::new(2, 1, RegionMode::Bonv(3), true).is_err());
        assert_eq!("bonv3".parse::<RegionMode>().unwrap(), RegionMode::Bonv(3));
        assert!("bonv0".parse::<RegionMode>().is_err());
    }

    #[test]
    fn love_it_vectors() {
        let vocab = Vocabulary::from_tokens(&["i", "it", "love"]).unwrap();
        let doc = encode(&tokenize("love it"), &vocab);
        let region = Region { start: 0, len: 2 };
        let s = vectorize(&doc, &region, &vocab, &spec(2, 1, RegionMode::Seq, false));
        assert_eq!(s.to_dense(), vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let b = vectorize(&doc, &region, &vocab, &spec(2, 1, RegionMode::Bow, false));
        assert_eq!(b.to_dense(), vec![0.0, 1.0, 1.0]);

        let doc = encode(&["it", "it"], &vocab);
        let b = vectorize(&doc, &region, &vocab, &spec(2, 1, RegionMode::Bow, false));
        assert_eq!(b.to_dense(), vec![0.0, 2.0, 0.0]);
    }

    #[test]
    fn pads_and_oov_contribute_nothing() {
        let vocab = Vocabulary::from_tokens(&["a", "b"]).unwrap();
        let doc = encode(&["a", "zzz"], &vocab);
        let region = Region { start: -1, len: 3 };
        let s = vectorize(&doc, &region, &vocab, &spec(3, 1, RegionMode::Seq, true));
        assert_eq!(s.dim(), 6);
        assert_eq!(s.indices(), &[2]); // position 1 holds `a`
    }

    #[test]
    fn bonv_counts_contiguous_ngrams() {
        let docs = vec![tokenize("a b c a b")];
        let vocab = build_vocab(&docs, 100, 1, 2).unwrap();
        let doc = encode(&docs[0], &vocab);
        let region = Region { start: 0, len: 3 };
        let v = vectorize(&doc, &region, &vocab, &spec(3, 1, RegionMode::Bonv(2), false));
        let get = |t: &str| v.get(vocab.id(t).unwrap() as usize);
        assert_eq!(get("a"), 1.0);
        assert_eq!(get("b"), 1.0);
        assert_eq!(get("c"), 1.0);
        assert_eq!(get("a b"), 1.0);
        assert_eq!(get("b c"), 1.0);
        assert_eq!(get("c a"), 0.0);
        assert_eq!(v.dim(), vocab.len());
    }

    #[test]
    fn context_of_fun_plot() {
        let toks = tokenize("good acting, fun plot :)");
        let vocab = build_vocab(&[toks.clone()], 100, 1, 1).unwrap();
        let doc = encode(&toks, &vocab);
        let region = Region { start: 2, len: 3 };
        let (l, r) = context_regions(&region, 3);
        let words = |reg: Region| -> Vec<&str> { reg.covered(doc.len()).map(|i| toks[i].as_str()).collect() };
        assert_eq!(words(l), vec!["good", "acting"]);
        assert_eq!(words(r), vec![":)"]);

        let (l, _) = context_regions(&Region { start: 0, len: 3 }, 3);
        assert!(words(l).is_empty());
        let exact = TokenSeq { ids: vec![Some(0); 3] };
        let (l, r) = context_regions(&Region { start: 0, len: 3 }, 3);
        assert!(l.covered(exact.len()).is_empty() && r.covered(exact.len()).is_empty());
    }

    proptest! {
        #[test]
        fn bow_is_block_sum_of_seq(
            ids in prop::collection::vec(prop::option::of(0u32..6), 1..12),
            p in 1usize..5,
            start in -4isize..12,
        ) {
            let vocab = Vocabulary::from_tokens(&["a", "b", "c", "d", "e", "f"]).unwrap();
            let doc = TokenSeq { ids };
            let region = Region { start, len: p };
            let s = vectorize(&doc, &region, &vocab, &spec(p, 1, RegionMode::Seq, true));
            let b = vectorize(&doc, &region, &vocab, &spec(p, 1, RegionMode::Bow, true));
            prop_assert!(s.nnz() <= p && b.nnz() <= p);
            let mut collapsed = vec![0.0; 6];
            for (i, v) in s.iter() {
                collapsed[i % 6] += v;
            }
            prop_assert_eq!(collapsed, b.to_dense());
        }

        #[test]
        fn padded_regions_cover_every_word(n in 1usize..20, p in 1usize..6, stride in 1usize..4) {
            let doc = seq(n);
            let regions = extract_regions(&doc, &spec(p, stride, RegionMode::Bow, true));
            prop_assert!(!regions.is_empty());
            if stride <= p {
                for pos in 0..n {
                    prop_assert!(regions.iter().any(|r| r.covered(n).contains(&pos)));
                }
            }
        }
    }
}
