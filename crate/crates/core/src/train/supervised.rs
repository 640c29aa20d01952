//! SGD training of the supervised (and tv-augmented) classifier.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::TrainConfig;
use crate::corpus::build_vocab;
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::net::{Architecture, Features, Gradients, Model, TvEmbedding};

/// 0/1 indicator target over `classes` labels.
pub fn label_target(labels: &[usize], classes: usize) -> Vec<f64> {
    let mut t = vec![0.0; classes];
    for &l in labels {
        t[l] = 1.0;
    }
    t
}

/// Inverted-dropout mask: each unit kept with probability `1 - rate` and
/// scaled by `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn train_supervised(data: &LabeledSet, cfg: &TrainConfig) -> Result<Model> {
    train_semi(data, &[], cfg)
}

/// Trains W, every V⁽ⁱ⁾, b and the top layer on labeled data. The attached
/// embeddings stay frozen. With no embeddings this is plain supervised training.
pub fn train_semi(data: &LabeledSet, embeddings: &[TvEmbedding], cfg: &TrainConfig) -> Result<Model> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("labeled training data"));
    }
    for emb in embeddings {
        if !emb.spec().same_layout(&cfg.spec) {
            return Err(Error::Contract(format!(
                "tv-embedding region size/stride/pad ({}, {}, {}) incompatible with training regions ({}, {}, {})",
                emb.spec().size,
                emb.spec().stride,
                emb.spec().pad,
                cfg.spec.size,
                cfg.spec.stride,
                cfg.spec.pad
            )));
        }
    }
    let vocab = build_vocab(&data.docs, cfg.vocab_size, cfg.min_count, cfg.vocab_ngram())?;
    let arch = Architecture {
        spec: cfg.spec,
        neurons: cfg.neurons,
        pooling: cfg.pooling,
        response_norm: cfg.response_norm,
        multi_label: cfg.multi_label || data.has_multi_labels(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::init(
        vocab,
        arch,
        data.label_names.clone(),
        embeddings.to_vec(),
        cfg.init_scale,
        &mut rng,
    )?;

    let classes = data.num_classes();
    // documents without any region carry no training signal
    let examples: Vec<(Features, Vec<f64>)> = data
        .docs
        .par_iter()
        .zip(&data.labels)
        .map(|(doc, labels)| match model.featurize(doc) {
            Ok(f) => Ok(Some((f, label_target(labels, classes)))),
            Err(Error::Empty(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if examples.is_empty() {
        return Err(Error::Empty("no labeled document yields a region"));
    }

    let feat_dim = model.neurons() * cfg.pooling.segments;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.rate_at(epoch);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch) {
            let masks: Vec<Option<Vec<f64>>> = batch
                .iter()
                .map(|_| (cfg.dropout > 0.0).then(|| dropout_mask(feat_dim, cfg.dropout, &mut rng)))
                .collect();
            let grads: Vec<Gradients> = batch
                .par_iter()
                .zip(masks)
                .map(|(&i, mask)| {
                    let (features, target) = &examples[i];
                    let (_, cache) = model.forward_with_mask(features, mask)?;
                    model.backward(features, target, &cache)
                })
                .collect::<Result<_>>()?;
            // fixed-order reduction keeps results independent of worker count
            let mut total = Gradients::zeros_like(&model);
            for g in &grads {
                total.add_assign(g);
            }
            total.scale(1.0 / batch.len() as f64);
            model.apply_gradients(&total, lr, cfg.l2);
        }
    }
    Ok(model)
}
