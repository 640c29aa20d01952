//! Training of tv-embeddings: a convolution layer plus a linear top layer
//! predicting the context target, fitted by SGD on the negative-sampled
//! weighted square loss. Only the convolution layer is kept.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{NegSampleCfg, TrainConfig};
use super::loss::{sample_weights, weighted_square_loss};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::net::{relu, ConvLayer, TvEmbedding};
use crate::sparse::SparseVec;
use crate::tv::{build_tv_dataset, TargetSpec, TvTrainExample};

/// The network U: `p = T·σ(W·r + b) + c`.
///
/// `W` and `T` are stored divided by a shared scale so the L2 shrinkage of a
/// step costs O(1) instead of touching every entry.
#[derive(Debug, Clone)]
pub struct TvNetwork {
    w: Array2<f64>,
    b: Array1<f64>,
    top_w: Array2<f64>,
    top_b: Array1<f64>,
    scale: f64,
}

#[derive(Debug, Default)]
struct TvGrad {
    /// input column -> gradient over neurons
    w: BTreeMap<usize, Vec<f64>>,
    b: Vec<f64>,
    /// target row -> gradient over neurons
    top_w: BTreeMap<usize, Vec<f64>>,
    top_b: BTreeMap<usize, f64>,
}

impl TvGrad {
    fn add_assign(&mut self, other: TvGrad) {
        fn add_rows(dst: &mut BTreeMap<usize, Vec<f64>>, src: BTreeMap<usize, Vec<f64>>) {
            for (k, v) in src {
                match dst.get_mut(&k) {
                    Some(d) => d.iter_mut().zip(&v).for_each(|(a, b)| *a += b),
                    None => {
                        dst.insert(k, v);
                    }
                }
            }
        }
        if self.b.is_empty() {
            self.b = other.b;
        } else {
            self.b.iter_mut().zip(&other.b).for_each(|(a, b)| *a += b);
        }
        add_rows(&mut self.w, other.w);
        add_rows(&mut self.top_w, other.top_w);
        for (k, v) in other.top_b {
            *self.top_b.entry(k).or_insert(0.0) += v;
        }
    }
}

impl TvNetwork {
    fn init<R: Rng>(input_dim: usize, neurons: usize, target_dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut draw = |r, c| Array2::from_shape_simple_fn((r, c), || rng.gen_range(-scale..=scale));
        let w = draw(neurons, input_dim);
        let top_w = draw(target_dim, neurons);
        TvNetwork {
            w,
            b: Array1::zeros(neurons),
            top_w,
            top_b: Array1::zeros(target_dim),
            scale: 1.0,
        }
    }

    pub fn neurons(&self) -> usize {
        self.b.len()
    }

    pub fn target_dim(&self) -> usize {
        self.top_b.len()
    }

    fn hidden(&self, r: &SparseVec) -> Result<(Vec<f64>, Vec<f64>)> {
        if r.dim() != self.w.ncols() {
            return Err(Error::dim("tv network input", self.w.ncols(), r.dim()));
        }
        let mut a = vec![0.0; self.neurons()];
        for (j, x) in r.iter() {
            for (ai, wij) in a.iter_mut().zip(self.w.column(j)) {
                *ai += wij * x;
            }
        }
        for (ai, bi) in a.iter_mut().zip(&self.b) {
            *ai = *ai * self.scale + bi;
        }
        let h = a.iter().map(|&x| relu(x)).collect();
        Ok((a, h))
    }

    fn output_at(&self, h: &[f64], j: usize) -> f64 {
        let dot: f64 = self.top_w.row(j).iter().zip(h).map(|(w, x)| w * x).sum();
        dot * self.scale + self.top_b[j]
    }

    /// Full prediction over the target space.
    pub fn predict(&self, r: &SparseVec) -> Result<Vec<f64>> {
        let (_, h) = self.hidden(r)?;
        Ok((0..self.target_dim()).map(|j| self.output_at(&h, j)).collect())
    }

    /// Weighted square loss of one example, evaluated only on `alpha`'s support.
    pub fn weighted_loss(&self, ex: &TvTrainExample, alpha: &SparseVec) -> Result<f64> {
        let (_, h) = self.hidden(&ex.view1)?;
        let mut p = vec![0.0; self.target_dim()];
        for &j in alpha.indices() {
            p[j as usize] = self.output_at(&h, j as usize);
        }
        weighted_square_loss(&p, &ex.target, alpha)
    }

    fn gradient(&self, ex: &TvTrainExample, alpha: &SparseVec) -> Result<TvGrad> {
        let m = self.neurons();
        let (a, h) = self.hidden(&ex.view1)?;
        let mut g = TvGrad {
            b: vec![0.0; m],
            ..Default::default()
        };
        let mut g_h = vec![0.0; m];
        for (j, weight) in alpha.iter() {
            let gp = 2.0 * weight * (self.output_at(&h, j) - ex.target.get(j));
            g.top_b.insert(j, gp);
            g.top_w.insert(j, h.iter().map(|x| gp * x).collect());
            for (gh, t) in g_h.iter_mut().zip(self.top_w.row(j)) {
                *gh += gp * t * self.scale;
            }
        }
        for k in 0..m {
            g.b[k] = if a[k] > 0.0 { g_h[k] } else { 0.0 };
        }
        for (col, x) in ex.view1.iter() {
            g.w.insert(col, g.b.iter().map(|ga| ga * x).collect());
        }
        Ok(g)
    }

    /// Proximal L2 step on `W` and `T`, plain step on the biases.
    fn apply(&mut self, g: &TvGrad, lr: f64, l2: f64) {
        let step = lr / self.scale;
        for (&col, grad) in &g.w {
            for (w, d) in self.w.column_mut(col).iter_mut().zip(grad) {
                *w -= step * d;
            }
        }
        for (&row, grad) in &g.top_w {
            for (w, d) in self.top_w.row_mut(row).iter_mut().zip(grad) {
                *w -= step * d;
            }
        }
        for (b, d) in self.b.iter_mut().zip(&g.b) {
            *b -= lr * d;
        }
        for (&j, d) in &g.top_b {
            self.top_b[j] -= lr * d;
        }
        self.scale /= 1.0 + 2.0 * lr * l2;
        if self.scale < 1e-8 {
            self.fold_scale();
        }
    }

    fn fold_scale(&mut self) {
        let s = self.scale;
        self.w.mapv_inplace(|x| x * s);
        self.top_w.mapv_inplace(|x| x * s);
        self.scale = 1.0;
    }

    /// The trained convolution layer (the top layer is discarded).
    pub fn conv_layer(&self) -> Result<ConvLayer> {
        let s = self.scale;
        ConvLayer::new(self.w.mapv(|x| x * s), self.b.clone())
    }
}

/// Trains U on prepared examples. `input_dim` is the region-vector dimension.
pub fn train_tv_network(
    examples: &[TvTrainExample],
    input_dim: usize,
    target_dim: usize,
    cfg: &TrainConfig,
    neg: &NegSampleCfg,
) -> Result<TvNetwork> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::Empty("tv-embedding training examples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = TvNetwork::init(input_dim, cfg.neurons, target_dim, cfg.init_scale, &mut rng);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.rate_at(epoch);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch) {
            let alphas: Vec<SparseVec> = batch
                .iter()
                .map(|&i| sample_weights(&examples[i].target, neg, &mut rng))
                .collect();
            let grads: Vec<TvGrad> = batch
                .par_iter()
                .zip(&alphas)
                .map(|(&i, alpha)| net.gradient(&examples[i], alpha))
                .collect::<Result<_>>()?;
            let mut total = TvGrad::default();
            for g in grads {
                total.add_assign(g);
            }
            let inv = 1.0 / batch.len() as f64;
            total.b.iter_mut().for_each(|x| *x *= inv);
            total.w.values_mut().flatten().for_each(|x| *x *= inv);
            total.top_w.values_mut().flatten().for_each(|x| *x *= inv);
            total.top_b.values_mut().for_each(|x| *x *= inv);
            net.apply(&total, lr, cfg.l2);
        }
    }
    Ok(net)
}

/// Trains a tv-embedding on unlabeled documents over `view_vocab` and returns
/// its convolution layer, frozen.
pub fn train_tv<D: AsRef<[String]>>(
    docs: &[D],
    view_vocab: &Vocabulary,
    target: &TargetSpec,
    cfg: &TrainConfig,
    neg: &NegSampleCfg,
) -> Result<TvEmbedding> {
    if docs.is_empty() {
        return Err(Error::Empty("unlabeled training data"));
    }
    let examples = build_tv_dataset(docs, view_vocab, &cfg.spec, target)?;
    let input_dim = cfg.spec.input_dim(view_vocab.len());
    let net = train_tv_network(&examples, input_dim, target.dim(), cfg, neg)?;
    TvEmbedding::new(net.conv_layer()?, cfg.spec, view_vocab.clone())
}
