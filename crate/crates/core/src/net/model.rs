use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::Rng;

use super::layers::{
    pool_with_argmax, relu, response_scale, segment_bounds, PoolMode, Pooling, SemiConvLayer, TvEmbedding,
};
use crate::corpus::{encode, TokenSeq, Vocabulary};
use crate::error::{Error, Result};
use crate::regions::{extract_regions, vectorize, Region, RegionSpec};
use crate::sparse::SparseVec;

/// Multi-label decision threshold on label scores.
pub const MULTI_LABEL_THRESHOLD: f64 = 0.5;

/// Shape of a supervised model, independent of its weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Architecture {
    pub spec: RegionSpec,
    pub neurons: usize,
    pub pooling: Pooling,
    pub response_norm: bool,
    pub multi_label: bool,
}

/// Linear classifier over pooled features.
#[derive(Debug, Clone, PartialEq)]
pub struct TopLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// A document encoded once per vocabulary the model needs: its own and one
/// per attached embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDoc {
    pub base: TokenSeq,
    pub tv: Vec<TokenSeq>,
}

/// Inputs of the convolution layer for one region: the region vector and
/// the outputs of every frozen embedding on the same region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionInput {
    pub r: SparseVec,
    pub u: Vec<Vec<f64>>,
}

/// All region inputs of one document. Embedding outputs never change during
/// training, so they are computed once here.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub regions: Vec<RegionInput>,
}

/// Intermediate values of a forward pass, consumed by [`Model::backward`].
#[derive(Debug, Clone)]
pub struct Cache {
    generation: u64,
    preact: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
    argmax: Vec<usize>,
    mask: Option<Vec<f64>>,
    features: Vec<f64>,
    scores: Vec<f64>,
}

impl Cache {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Classifier input after pooling (and dropout, when training).
    pub fn features(&self) -> &[f64] {
        &self.features
    }
}

/// Gradients of every trainable parameter. The first-layer weight gradient
/// is stored by column since only columns touched by some region are nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: BTreeMap<usize, Vec<f64>>,
    pub b: Vec<f64>,
    pub v: Vec<Array2<f64>>,
    pub top_w: Array2<f64>,
    pub top_b: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Gradients {
            w: BTreeMap::new(),
            b: vec![0.0; model.conv.neurons()],
            v: model.conv.v.iter().map(|v| Array2::zeros(v.raw_dim())).collect(),
            top_w: Array2::zeros(model.top.w.raw_dim()),
            top_b: vec![0.0; model.top.b.len()],
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (j, col) in &other.w {
            let dst = self.w.entry(*j).or_insert_with(|| vec![0.0; col.len()]);
            dst.iter_mut().zip(col).for_each(|(a, b)| *a += b);
        }
        self.b.iter_mut().zip(&other.b).for_each(|(a, b)| *a += b);
        for (a, b) in self.v.iter_mut().zip(&other.v) {
            *a += b;
        }
        self.top_w += &other.top_w;
        self.top_b.iter_mut().zip(&other.top_b).for_each(|(a, b)| *a += b);
    }

    pub fn scale(&mut self, factor: f64) {
        self.w.values_mut().flatten().for_each(|x| *x *= factor);
        self.b.iter_mut().for_each(|x| *x *= factor);
        self.v.iter_mut().for_each(|v| v.mapv_inplace(|x| x * factor));
        self.top_w.mapv_inplace(|x| x * factor);
        self.top_b.iter_mut().for_each(|x| *x *= factor);
    }

    /// Dense gradient blocks in the same order as [`Model::param_blocks_mut`].
    pub fn dense_blocks(&self, model: &Model) -> Vec<(String, Vec<f64>)> {
        let (m, d) = model.conv.w.dim();
        let mut w = vec![0.0; m * d];
        for (&j, col) in &self.w {
            for (i, g) in col.iter().enumerate() {
                w[i * d + j] = *g;
            }
        }
        let mut out = vec![("conv.w".to_string(), w), ("conv.b".to_string(), self.b.clone())];
        for (k, v) in self.v.iter().enumerate() {
            out.push((format!("conv.v{k}"), v.iter().copied().collect()));
        }
        out.push(("top.w".to_string(), self.top_w.iter().copied().collect()));
        out.push(("top.b".to_string(), self.top_b.clone()));
        out
    }
}

/// One-hot CNN: a (semi-)convolution layer over text regions, pooling, optional
/// response normalization and a linear top layer.
#[derive(Debug, Clone)]
pub struct Model {
    vocab: Vocabulary,
    spec: RegionSpec,
    conv: SemiConvLayer,
    pooling: Pooling,
    response_norm: bool,
    top: TopLayer,
    labels: Vec<String>,
    multi_label: bool,
    generation: u64,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab
            && self.spec == other.spec
            && self.conv == other.conv
            && self.pooling == other.pooling
            && self.response_norm == other.response_norm
            && self.top == other.top
            && self.labels == other.labels
            && self.multi_label == other.multi_label
    }
}

fn uniform_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-scale..=scale))
}

impl Model {
    /// Fresh model: weights uniform in `[-scale, scale]` drawn in the order
    /// W, V⁽¹⁾..V⁽ᵏ⁾, top; biases zero.
    pub fn init<R: Rng>(
        vocab: Vocabulary,
        arch: Architecture,
        labels: Vec<String>,
        embeddings: Vec<TvEmbedding>,
        scale: f64,
        rng: &mut R,
    ) -> Result<Model> {
        arch.spec.validate()?;
        if arch.neurons == 0 {
            return Err(Error::InvalidArgument("neurons must be >= 1".into()));
        }
        let m = arch.neurons;
        let d = arch.spec.input_dim(vocab.len());
        let w = uniform_matrix(m, d, scale, rng);
        let v = embeddings
            .iter()
            .map(|e| uniform_matrix(m, e.neurons(), scale, rng))
            .collect();
        let conv = SemiConvLayer::new(w, Array1::zeros(m), v, embeddings)?;
        let top = TopLayer {
            w: uniform_matrix(labels.len(), m * arch.pooling.segments, scale, rng),
            b: Array1::zeros(labels.len()),
        };
        Model::from_parts(vocab, arch, conv, top, labels)
    }

    pub fn from_parts(
        vocab: Vocabulary,
        arch: Architecture,
        conv: SemiConvLayer,
        top: TopLayer,
        labels: Vec<String>,
    ) -> Result<Model> {
        arch.spec.validate()?;
        if arch.pooling.segments == 0 {
            return Err(Error::InvalidArgument("pooling segments must be >= 1".into()));
        }
        let d = arch.spec.input_dim(vocab.len());
        if conv.input_dim() != d {
            return Err(Error::dim("conv input", d, conv.input_dim()));
        }
        if conv.neurons() != arch.neurons {
            return Err(Error::dim("conv neurons", arch.neurons, conv.neurons()));
        }
        for emb in conv.embeddings() {
            if !emb.spec().same_layout(&arch.spec) {
                return Err(Error::Contract(format!(
                    "tv-embedding regions (size {}, stride {}, pad {}) do not align with the model's (size {}, stride {}, pad {})",
                    emb.spec().size,
                    emb.spec().stride,
                    emb.spec().pad,
                    arch.spec.size,
                    arch.spec.stride,
                    arch.spec.pad
                )));
            }
        }
        let feat = arch.neurons * arch.pooling.segments;
        if top.w.ncols() != feat {
            return Err(Error::dim("top layer input", feat, top.w.ncols()));
        }
        if top.w.nrows() != labels.len() || top.b.len() != labels.len() {
            return Err(Error::dim("top layer rows", labels.len(), top.w.nrows()));
        }
        Ok(Model {
            vocab,
            spec: arch.spec,
            conv,
            pooling: arch.pooling,
            response_norm: arch.response_norm,
            top,
            labels,
            multi_label: arch.multi_label,
            generation: 0,
        })
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            spec: self.spec,
            neurons: self.conv.neurons(),
            pooling: self.pooling,
            response_norm: self.response_norm,
            multi_label: self.multi_label,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn spec(&self) -> &RegionSpec {
        &self.spec
    }

    pub fn conv(&self) -> &SemiConvLayer {
        &self.conv
    }

    pub fn embeddings(&self) -> &[TvEmbedding] {
        self.conv.embeddings()
    }

    pub fn top(&self) -> &TopLayer {
        &self.top
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn multi_label(&self) -> bool {
        self.multi_label
    }

    pub fn neurons(&self) -> usize {
        self.conv.neurons()
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> EncodedDoc {
        EncodedDoc {
            base: encode(tokens, &self.vocab),
            tv: self.embeddings().iter().map(|e| encode(tokens, e.vocab())).collect(),
        }
    }

    fn check_doc(&self, doc: &EncodedDoc) -> Result<()> {
        if doc.tv.len() != self.embeddings().len() {
            return Err(Error::Contract(format!(
                "document encoded for {} embeddings, model has {}",
                doc.tv.len(),
                self.embeddings().len()
            )));
        }
        let fits = |seq: &TokenSeq, v: &Vocabulary| seq.max_id().is_none_or(|id| (id as usize) < v.len());
        let ok = fits(&doc.base, &self.vocab) && doc.tv.iter().zip(self.embeddings()).all(|(s, e)| fits(s, e.vocab()));
        if !ok || doc.tv.iter().any(|s| s.len() != doc.base.len()) {
            return Err(Error::Contract(
                "document was encoded with a different vocabulary".into(),
            ));
        }
        Ok(())
    }

    /// Convolution-layer inputs for an arbitrary region of an encoded document.
    pub fn region_input(&self, doc: &EncodedDoc, region: &Region) -> Result<RegionInput> {
        self.check_doc(doc)?;
        let r = vectorize(&doc.base, region, &self.vocab, &self.spec);
        let u = self
            .embeddings()
            .iter()
            .zip(&doc.tv)
            .map(|(e, seq)| e.embed_region(seq, region))
            .collect::<Result<_>>()?;
        Ok(RegionInput { r, u })
    }

    /// Rectified convolution output (before normalization) on one region.
    pub fn conv_output(&self, doc: &EncodedDoc, region: &Region) -> Result<Vec<f64>> {
        let input = self.region_input(doc, region)?;
        self.conv.forward(&input.r, &input.u)
    }

    pub fn featurize_encoded(&self, doc: &EncodedDoc) -> Result<Features> {
        self.check_doc(doc)?;
        let regions = extract_regions(&doc.base, &self.spec);
        if regions.is_empty() {
            return Err(Error::Empty("document yields no regions"));
        }
        let regions = regions
            .iter()
            .map(|reg| self.region_input(doc, reg))
            .collect::<Result<_>>()?;
        Ok(Features { regions })
    }

    pub fn featurize<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Features> {
        self.featurize_encoded(&self.encode(tokens))
    }

    pub fn forward(&self, features: &Features) -> Result<(Vec<f64>, Cache)> {
        self.forward_with_mask(features, None)
    }

    /// Forward pass; `mask` multiplies the pooled features (dropout).
    pub fn forward_with_mask(&self, features: &Features, mask: Option<Vec<f64>>) -> Result<(Vec<f64>, Cache)> {
        if features.regions.is_empty() {
            return Err(Error::Empty("document yields no regions"));
        }
        let mut preact = Vec::with_capacity(features.regions.len());
        let mut hidden = Vec::with_capacity(features.regions.len());
        let mut normed = Vec::with_capacity(features.regions.len());
        for input in &features.regions {
            let a = self.conv.preactivation(&input.r, &input.u)?;
            let h: Vec<f64> = a.iter().map(|&x| relu(x)).collect();
            let n = if self.response_norm {
                let s = response_scale(&h);
                h.iter().map(|x| x * s).collect()
            } else {
                h.clone()
            };
            preact.push(a);
            hidden.push(h);
            normed.push(n);
        }
        let (pooled, argmax) = pool_with_argmax(&normed, self.pooling)?;
        let features_out = match &mask {
            Some(mask) => {
                if mask.len() != pooled.len() {
                    return Err(Error::dim("dropout mask", pooled.len(), mask.len()));
                }
                pooled.iter().zip(mask).map(|(x, m)| x * m).collect()
            }
            None => pooled,
        };
        let mut scores = self.top.b.to_vec();
        for (s, row) in scores.iter_mut().zip(self.top.w.rows()) {
            let mut dot = 0.0;
            for (w, x) in row.iter().zip(&features_out) {
                dot += w * x;
            }
            *s += dot;
        }
        let cache = Cache {
            generation: self.generation,
            preact,
            hidden,
            argmax,
            mask,
            features: features_out,
            scores: scores.clone(),
        };
        Ok((scores, cache))
    }

    /// Squared loss `Σ (score - target)²` without dropout.
    pub fn loss(&self, features: &Features, target: &[f64]) -> Result<f64> {
        let (scores, _) = self.forward(features)?;
        if target.len() != scores.len() {
            return Err(Error::dim("target", scores.len(), target.len()));
        }
        Ok(scores.iter().zip(target).map(|(s, z)| (s - z) * (s - z)).sum())
    }

    /// Exact gradients of the squared loss for the forward pass in `cache`.
    /// Embedding parameters are frozen and receive nothing.
    pub fn backward(&self, features: &Features, target: &[f64], cache: &Cache) -> Result<Gradients> {
        if cache.generation != self.generation || cache.preact.len() != features.regions.len() {
            return Err(Error::Contract("stale forward cache".into()));
        }
        if target.len() != cache.scores.len() {
            return Err(Error::dim("target", cache.scores.len(), target.len()));
        }
        let m = self.conv.neurons();
        let n_regions = features.regions.len();
        let mut grads = Gradients::zeros_like(self);

        let g_scores: Vec<f64> = cache.scores.iter().zip(target).map(|(s, z)| 2.0 * (s - z)).collect();
        for (c, &g) in g_scores.iter().enumerate() {
            grads.top_b[c] = g;
            for (dst, x) in grads.top_w.row_mut(c).iter_mut().zip(&cache.features) {
                *dst = g * x;
            }
        }
        let mut g_pooled = vec![0.0; cache.features.len()];
        for (c, &g) in g_scores.iter().enumerate() {
            for (dst, w) in g_pooled.iter_mut().zip(self.top.w.row(c)) {
                *dst += g * w;
            }
        }
        if let Some(mask) = &cache.mask {
            g_pooled.iter_mut().zip(mask).for_each(|(g, k)| *g *= k);
        }

        // route pooled gradient back to per-region normalized outputs
        let mut g_norm = vec![vec![0.0; m]; n_regions];
        let mut touched = vec![false; n_regions];
        for seg in 0..self.pooling.segments {
            let (lo, hi) = segment_bounds(n_regions, self.pooling.segments, seg);
            if lo == hi {
                continue;
            }
            for c in 0..m {
                let k = seg * m + c;
                let g = g_pooled[k];
                match self.pooling.mode {
                    PoolMode::Max => {
                        let l = cache.argmax[k];
                        g_norm[l][c] += g;
                        touched[l] = true;
                    }
                    PoolMode::Average => {
                        let share = g / (hi - lo) as f64;
                        for l in lo..hi {
                            g_norm[l][c] += share;
                            touched[l] = true;
                        }
                    }
                }
            }
        }

        for l in 0..n_regions {
            if !touched[l] {
                continue;
            }
            let h = &cache.hidden[l];
            let gn = &g_norm[l];
            let g_h: Vec<f64> = if self.response_norm {
                let s = response_scale(h);
                let hg: f64 = h.iter().zip(gn).map(|(a, b)| a * b).sum();
                let s3 = s * s * s;
                h.iter().zip(gn).map(|(hi, gi)| s * gi - s3 * hi * hg).collect()
            } else {
                gn.clone()
            };
            let g_a: Vec<f64> = g_h
                .iter()
                .zip(&cache.preact[l])
                .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
                .collect();
            if g_a.iter().all(|&g| g == 0.0) {
                continue;
            }
            let input = &features.regions[l];
            for (j, x) in input.r.iter() {
                let col = grads.w.entry(j).or_insert_with(|| vec![0.0; m]);
                col.iter_mut().zip(&g_a).for_each(|(dst, g)| *dst += g * x);
            }
            grads.b.iter_mut().zip(&g_a).for_each(|(dst, g)| *dst += g);
            for (gv, u) in grads.v.iter_mut().zip(&input.u) {
                for (i, g) in g_a.iter().enumerate() {
                    if *g == 0.0 {
                        continue;
                    }
                    for (dst, x) in gv.row_mut(i).iter_mut().zip(u) {
                        *dst += g * x;
                    }
                }
            }
        }
        Ok(grads)
    }

    /// One SGD step with the proximal L2 update `θ ← (θ − lr·g) / (1 + 2·lr·λ)`
    /// on weight matrices; biases take a plain gradient step.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64, l2: f64) {
        let shrink = 1.0 / (1.0 + 2.0 * lr * l2);
        for (&j, col) in &grads.w {
            for (w, g) in self.conv.w.column_mut(j).iter_mut().zip(col) {
                *w -= lr * g;
            }
        }
        self.conv.b.iter_mut().zip(&grads.b).for_each(|(b, g)| *b -= lr * g);
        for (v, g) in self.conv.v.iter_mut().zip(&grads.v) {
            v.zip_mut_with(g, |w, g| *w -= lr * g);
        }
        self.top.w.zip_mut_with(&grads.top_w, |w, g| *w -= lr * g);
        self.top.b.iter_mut().zip(&grads.top_b).for_each(|(b, g)| *b -= lr * g);
        if l2 > 0.0 {
            self.conv.w.mapv_inplace(|w| w * shrink);
            self.conv.v.iter_mut().for_each(|v| v.mapv_inplace(|w| w * shrink));
            self.top.w.mapv_inplace(|w| w * shrink);
        }
        self.generation += 1;
    }

    /// Mutable views of every trainable parameter, in a fixed order. Any
    /// outstanding forward cache becomes stale.
    pub fn param_blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        self.generation += 1;
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("conv.w".into(), self.conv.w.as_slice_mut().expect("standard layout")),
            ("conv.b".into(), self.conv.b.as_slice_mut().expect("standard layout")),
        ];
        for (k, v) in self.conv.v.iter_mut().enumerate() {
            out.push((format!("conv.v{k}"), v.as_slice_mut().expect("standard layout")));
        }
        out.push(("top.w".into(), self.top.w.as_slice_mut().expect("standard layout")));
        out.push(("top.b".into(), self.top.b.as_slice_mut().expect("standard layout")));
        out
    }

    /// Sum of squared trainable weights (biases excluded).
    pub fn weight_sq_norm(&self) -> f64 {
        let sq = |a: &Array2<f64>| a.iter().map(|x| x * x).sum::<f64>();
        sq(&self.conv.w) + self.conv.v.iter().map(sq).sum::<f64>() + sq(&self.top.w)
    }

    pub fn scores<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<f64>> {
        Ok(self.forward(&self.featurize(tokens)?)?.0)
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>> {
        Ok(decide(&self.scores(tokens)?, self.multi_label))
    }
}

/// Single-label: argmax, lowest id on ties. Multi-label: every score above 0.5.
pub fn decide(scores: &[f64], multi_label: bool) -> Vec<usize> {
    if multi_label {
        scores
            .iter()
            .enumerate()
            .filter(|(_, s)| **s > MULTI_LABEL_THRESHOLD)
            .map(|(i, _)| i)
            .collect()
    } else {
        let mut best = None::<(usize, f64)>;
        for (i, &s) in scores.iter().enumerate() {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| vec![i]).unwrap_or_default()
    }
}
