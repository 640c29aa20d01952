use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::corpus::{TokenSeq, Vocabulary};
use crate::error::{Error, Result};
use crate::regions::{vectorize, Region, RegionSpec};
use crate::sparse::SparseVec;

/// Component-wise rectifier with subgradient 0 at 0. Always returns `+0.0`
/// for non-positive inputs.
#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Rectifier,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Rectifier => relu(x),
        }
    }

    #[inline]
    pub fn derivative(self, preact: f64) -> f64 {
        match self {
            Activation::Rectifier => {
                if preact > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `W · r` for sparse `r`, touching only the stored columns of `W`.
pub(crate) fn sparse_matvec(w: &Array2<f64>, r: &SparseVec) -> Vec<f64> {
    let mut out = vec![0.0; w.nrows()];
    for (j, x) in r.iter() {
        for (o, wij) in out.iter_mut().zip(w.column(j)) {
            *o += wij * x;
        }
    }
    out
}

pub(crate) fn dense_matvec_add(acc: &mut [f64], m: &Array2<f64>, x: &[f64]) {
    for (a, row) in acc.iter_mut().zip(m.rows()) {
        let mut dot = 0.0;
        for (w, xi) in row.iter().zip(x) {
            dot += w * xi;
        }
        *a += dot;
    }
}

/// One convolution unit shared by every region: `σ(W·r + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

impl ConvLayer {
    pub fn new(w: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        if w.nrows() != b.len() {
            return Err(Error::dim("conv bias", w.nrows(), b.len()));
        }
        if w.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "a convolution layer needs at least one neuron".into(),
            ));
        }
        Ok(ConvLayer {
            w,
            b,
            activation: Activation::Rectifier,
        })
    }

    pub fn neurons(&self) -> usize {
        self.w.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    /// `W·r + b`.
    pub fn preactivation(&self, r: &SparseVec) -> Result<Vec<f64>> {
        if r.dim() != self.input_dim() {
            return Err(Error::dim("conv input", self.input_dim(), r.dim()));
        }
        let mut a = sparse_matvec(&self.w, r);
        for (ai, bi) in a.iter_mut().zip(&self.b) {
            *ai += bi;
        }
        Ok(a)
    }

    pub fn forward(&self, r: &SparseVec) -> Result<Vec<f64>> {
        let mut a = self.preactivation(r)?;
        for x in &mut a {
            *x = self.activation.apply(*x);
        }
        Ok(a)
    }
}

/// A frozen region embedding learned from unlabeled data, with the view it
/// was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TvEmbedding {
    layer: ConvLayer,
    spec: RegionSpec,
    vocab: Vocabulary,
}

impl TvEmbedding {
    pub fn new(layer: ConvLayer, spec: RegionSpec, vocab: Vocabulary) -> Result<Self> {
        let d = spec.input_dim(vocab.len());
        if layer.input_dim() != d {
            return Err(Error::dim("tv-embedding input", d, layer.input_dim()));
        }
        Ok(TvEmbedding { layer, spec, vocab })
    }

    pub fn layer(&self) -> &ConvLayer {
        &self.layer
    }

    pub fn spec(&self) -> &RegionSpec {
        &self.spec
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn neurons(&self) -> usize {
        self.layer.neurons()
    }

    pub fn forward(&self, r: &SparseVec) -> Result<Vec<f64>> {
        self.layer.forward(r)
    }

    /// Embeds one region of a document encoded with this embedding's vocabulary.
    pub fn embed_region(&self, doc: &TokenSeq, region: &Region) -> Result<Vec<f64>> {
        self.forward(&vectorize(doc, region, &self.vocab, &self.spec))
    }
}

/// Convolution layer with additional tv-embedded inputs:
/// `σ(W·r + Σᵢ V⁽ⁱ⁾·u⁽ⁱ⁾ + b)`. With no embeddings this is a plain [`ConvLayer`].
#[derive(Debug, Clone, PartialEq)]
pub struct SemiConvLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub v: Vec<Array2<f64>>,
    embeddings: Vec<TvEmbedding>,
}

impl SemiConvLayer {
    pub fn new(w: Array2<f64>, b: Array1<f64>, v: Vec<Array2<f64>>, embeddings: Vec<TvEmbedding>) -> Result<Self> {
        let m = w.nrows();
        if m == 0 {
            return Err(Error::InvalidArgument(
                "a convolution layer needs at least one neuron".into(),
            ));
        }
        if b.len() != m {
            return Err(Error::dim("conv bias", m, b.len()));
        }
        if v.len() != embeddings.len() {
            return Err(Error::dim("coupling matrices", embeddings.len(), v.len()));
        }
        for (vi, emb) in v.iter().zip(&embeddings) {
            if vi.nrows() != m {
                return Err(Error::dim("coupling rows", m, vi.nrows()));
            }
            if vi.ncols() != emb.neurons() {
                return Err(Error::dim("coupling columns", emb.neurons(), vi.ncols()));
            }
        }
        Ok(SemiConvLayer { w, b, v, embeddings })
    }

    pub fn neurons(&self) -> usize {
        self.w.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn embeddings(&self) -> &[TvEmbedding] {
        &self.embeddings
    }

    /// `W·r + Σᵢ V⁽ⁱ⁾·u⁽ⁱ⁾ + b`, summed in that order.
    pub fn preactivation(&self, r: &SparseVec, u: &[Vec<f64>]) -> Result<Vec<f64>> {
        if r.dim() != self.input_dim() {
            return Err(Error::dim("conv input", self.input_dim(), r.dim()));
        }
        if u.len() != self.v.len() {
            return Err(Error::dim("tv inputs", self.v.len(), u.len()));
        }
        let mut a = sparse_matvec(&self.w, r);
        for (vi, ui) in self.v.iter().zip(u) {
            if ui.len() != vi.ncols() {
                return Err(Error::dim("tv input", vi.ncols(), ui.len()));
            }
            dense_matvec_add(&mut a, vi, ui);
        }
        for (ai, bi) in a.iter_mut().zip(&self.b) {
            *ai += bi;
        }
        Ok(a)
    }

    pub fn forward(&self, r: &SparseVec, u: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut a = self.preactivation(r, u)?;
        for x in &mut a {
            *x = relu(*x);
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolMode {
    #[default]
    Max,
    Average,
}

impl fmt::Display for PoolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolMode::Max => "max",
            PoolMode::Average => "avg",
        })
    }
}

impl FromStr for PoolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(PoolMode::Max),
            "avg" | "average" => Ok(PoolMode::Average),
            _ => Err(Error::InvalidArgument(format!("unknown pooling `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pooling {
    pub mode: PoolMode,
    pub segments: usize,
}

impl Default for Pooling {
    fn default() -> Self {
        Pooling {
            mode: PoolMode::Max,
            segments: 1,
        }
    }
}

/// Bounds of segment `j` when `n` items are split into `s` contiguous spans.
pub(crate) fn segment_bounds(n: usize, s: usize, j: usize) -> (usize, usize) {
    ((j * n).div_ceil(s), ((j + 1) * n).div_ceil(s))
}

/// Pools a region sequence into `segments` spans and concatenates the
/// results. Also returns, per output component, the source region index
/// under max pooling (lowest index on ties). Empty spans pool to zero.
pub(crate) fn pool_with_argmax(vectors: &[Vec<f64>], pooling: Pooling) -> Result<(Vec<f64>, Vec<usize>)> {
    if vectors.is_empty() {
        return Err(Error::Empty("no regions to pool"));
    }
    if pooling.segments == 0 {
        return Err(Error::InvalidArgument("pooling needs at least one segment".into()));
    }
    let m = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != m) {
        return Err(Error::dim("pool input", m, bad.len()));
    }
    let n = vectors.len();
    let mut out = vec![0.0; m * pooling.segments];
    let mut arg = vec![usize::MAX; m * pooling.segments];
    for seg in 0..pooling.segments {
        let (lo, hi) = segment_bounds(n, pooling.segments, seg);
        if lo == hi {
            continue;
        }
        let block = &mut out[seg * m..(seg + 1) * m];
        let arg_block = &mut arg[seg * m..(seg + 1) * m];
        match pooling.mode {
            PoolMode::Max => {
                block.copy_from_slice(&vectors[lo]);
                arg_block.iter_mut().for_each(|a| *a = lo);
                for (l, v) in vectors.iter().enumerate().take(hi).skip(lo + 1) {
                    for c in 0..m {
                        if v[c] > block[c] {
                            block[c] = v[c];
                            arg_block[c] = l;
                        }
                    }
                }
            }
            PoolMode::Average => {
                for v in &vectors[lo..hi] {
                    for (o, x) in block.iter_mut().zip(v) {
                        *o += x;
                    }
                }
                let len = (hi - lo) as f64;
                block.iter_mut().for_each(|o| *o /= len);
            }
        }
    }
    Ok((out, arg))
}

pub fn pool(vectors: &[Vec<f64>], pooling: Pooling) -> Result<Vec<f64>> {
    pool_with_argmax(vectors, pooling).map(|(out, _)| out)
}

/// `v / sqrt(1 + ‖v‖²)`.
pub fn response_normalize(v: &[f64]) -> Vec<f64> {
    let scale = response_scale(v);
    v.iter().map(|x| x * scale).collect()
}

pub(crate) fn response_scale(v: &[f64]) -> f64 {
    let sq: f64 = v.iter().map(|x| x * x).sum();
    1.0 / (1.0 + sq).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn sv(d: &[f64]) -> SparseVec {
        SparseVec::from_dense(d)
    }

    #[test]
    fn conv_forward_examples() {
        let layer = ConvLayer::new(Array2::eye(3), Array1::zeros(3)).unwrap();
        assert_eq!(layer.forward(&sv(&[0.0, 1.0, 1.0])).unwrap(), vec![0.0, 1.0, 1.0]);

        // negative weight on a penalized word cancels the positive one
        let layer = ConvLayer::new(array![[-1.0, 1.0, 1.0]], array![0.0]).unwrap();
        assert_eq!(layer.forward(&sv(&[1.0, 0.0, 1.0])).unwrap(), vec![0.0]);

        let layer = ConvLayer::new(array![[3.0, 1.0], [2.0, 2.0]], array![-0.5, 0.7]).unwrap();
        assert_eq!(layer.forward(&SparseVec::zeros(2)).unwrap(), vec![0.0, 0.7]);

        assert!(matches!(
            layer.forward(&SparseVec::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tv_forward_constant_bias() {
        let vocab = Vocabulary::from_tokens(&["a", "b"]).unwrap();
        let spec = RegionSpec::new(1, 1, crate::regions::RegionMode::Bow, true).unwrap();
        let layer = ConvLayer::new(Array2::zeros((3, 2)), Array1::ones(3)).unwrap();
        let emb = TvEmbedding::new(layer, spec, vocab).unwrap();
        let r = sv(&[1.0, 1.0]);
        let first = emb.forward(&r).unwrap();
        assert_eq!(first, vec![1.0; 3]);
        let second = emb.forward(&r).unwrap();
        assert!(first.iter().zip(&second).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn semi_conv_two_identity_couplings() {
        let vocab = Vocabulary::from_tokens(&["a", "b"]).unwrap();
        let spec = RegionSpec::new(1, 1, crate::regions::RegionMode::Bow, true).unwrap();
        let emb = TvEmbedding::new(
            ConvLayer::new(Array2::zeros((2, 2)), Array1::zeros(2)).unwrap(),
            spec,
            vocab,
        )
        .unwrap();
        let layer = SemiConvLayer::new(
            Array2::zeros((2, 2)),
            Array1::zeros(2),
            vec![Array2::eye(2), Array2::eye(2)],
            vec![emb.clone(), emb],
        )
        .unwrap();
        let out = layer
            .forward(&SparseVec::zeros(2), &[vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        assert_eq!(out, vec![1.0, 1.0]);
        assert!(layer.forward(&SparseVec::zeros(2), &[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn pool_examples() {
        let v = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
        let max = Pooling {
            mode: PoolMode::Max,
            segments: 1,
        };
        let avg = Pooling {
            mode: PoolMode::Average,
            segments: 1,
        };
        assert_eq!(pool(&v, max).unwrap(), vec![1.0, 2.0]);
        assert_eq!(pool(&v, avg).unwrap(), vec![0.5, 1.0]);
        assert!(matches!(pool(&[], max), Err(Error::Empty(_))));

        let four: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let two = Pooling {
            mode: PoolMode::Average,
            segments: 2,
        };
        assert_eq!(pool(&four, two).unwrap(), vec![0.5, 2.5]);
        assert_eq!(
            (0..2).map(|j| segment_bounds(4, 2, j)).collect::<Vec<_>>(),
            vec![(0, 2), (2, 4)]
        );
        assert_eq!(
            (0..2).map(|j| segment_bounds(5, 2, j)).collect::<Vec<_>>(),
            vec![(0, 3), (3, 5)]
        );
    }

    #[test]
    fn max_pool_ties_go_to_lowest_index() {
        let v = vec![vec![1.0], vec![3.0], vec![3.0]];
        let (_, arg) = pool_with_argmax(&v, Pooling::default()).unwrap();
        assert_eq!(arg, vec![1]);
    }

    #[test]
    fn response_normalize_examples() {
        assert_eq!(response_normalize(&[0.0, 0.0]), vec![0.0, 0.0]);
        let n = response_normalize(&[3.0, 4.0]);
        let s = 26f64.sqrt();
        assert!((n[0] - 3.0 / s).abs() < 1e-15 && (n[1] - 4.0 / s).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn normalized_norm_bound(v in prop::collection::vec(-1e3f64..1e3, 1..10), alpha in 0.01f64..100.0) {
            let n = response_normalize(&v);
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let out: f64 = n.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(out < 1.0);
            prop_assert!((out - norm / (1.0 + norm * norm).sqrt()).abs() < 1e-12);
            let argmax = |x: &[f64]| x.iter().enumerate().fold(0, |b, (i, y)| if *y > x[b] { i } else { b });
            let scaled: Vec<f64> = v.iter().map(|x| alpha * x).collect();
            prop_assert_eq!(argmax(&response_normalize(&scaled)), argmax(&v));
        }

        #[test]
        fn max_dominates_average(vs in prop::collection::vec(prop::collection::vec(0f64..5.0, 3), 1..8), segs in 1usize..4) {
            let max = pool(&vs, Pooling { mode: PoolMode::Max, segments: segs }).unwrap();
            let avg = pool(&vs, Pooling { mode: PoolMode::Average, segments: segs }).unwrap();
            for (m, a) in max.iter().zip(&avg) {
                prop_assert!(m + 1e-12 >= *a);
            }
        }

        #[test]
        fn preactivation_is_linear(
            w in prop::collection::vec(-2f64..2.0, 12),
            b in prop::collection::vec(-1f64..1.0, 3),
            r1 in prop::collection::vec(0u8..3, 4),
            r2 in prop::collection::vec(0u8..3, 4),
        ) {
            let layer = ConvLayer::new(Array2::from_shape_vec((3, 4), w).unwrap(), Array1::from(b.clone())).unwrap();
            let d1: Vec<f64> = r1.iter().map(|&x| x as f64).collect();
            let d2: Vec<f64> = r2.iter().map(|&x| x as f64).collect();
            let sum: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
            let p1 = layer.preactivation(&sv(&d1)).unwrap();
            let p2 = layer.preactivation(&sv(&d2)).unwrap();
            let ps = layer.preactivation(&sv(&sum)).unwrap();
            for i in 0..3 {
                prop_assert!((ps[i] - (p1[i] + p2[i] - b[i])).abs() < 1e-12);
            }
        }
    }
}
