use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::metrics::{evaluate, Metrics};
use super::supervised::train_semi;
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::net::{Model, TvEmbedding};

#[derive(Debug, Clone)]
pub struct Selection {
    pub best_index: usize,
    pub config: TrainConfig,
    /// The winning configuration retrained on all labeled data.
    pub model: Model,
    /// Held-out metrics of every grid entry, in grid order.
    pub holdout: Vec<Metrics>,
}

impl Selection {
    pub fn best_holdout(&self) -> &Metrics {
        &self.holdout[self.best_index]
    }
}

/// Seeded shuffle split into (train, held-out) indices.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction {fraction} must lie in (0, 1)"
        )));
    }
    let n_hold = ((n as f64) * fraction).round() as usize;
    if n_hold == 0 || n_hold >= n {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction {fraction} of {n} documents leaves one side empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held = idx.split_off(n - n_hold);
    Ok((idx, held))
}

/// Lower is better: error rate, or 1 − micro-F for multi-label models.
fn selection_score(m: &Metrics, multi_label: bool) -> f64 {
    if multi_label {
        1.0 - m.micro_f
    } else {
        m.error_rate
    }
}

/// Trains every grid entry on the retained part, scores it on the held-out
/// part, and retrains the best (earliest on ties) on the full set.
pub fn model_select(
    grid: &[TrainConfig],
    data: &LabeledSet,
    holdout: f64,
    seed: u64,
    embeddings: &[TvEmbedding],
) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::Empty("configuration grid"));
    }
    if data.is_empty() {
        return Err(Error::Empty("labeled training data"));
    }
    let (train_idx, held_idx) = holdout_split(data.len(), holdout, seed)?;
    let train = data.subset(&train_idx);
    let held = data.subset(&held_idx);
    let mut seen = vec![false; data.num_classes()];
    train.labels.iter().flatten().for_each(|&l| seen[l] = true);
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidArgument(format!(
            "holdout split leaves class `{}` without training documents",
            data.label_names[missing]
        )));
    }

    let mut scores = Vec::with_capacity(grid.len());
    let mut best = 0;
    for (i, cfg) in grid.iter().enumerate() {
        let model = train_semi(&train, embeddings, cfg)?;
        let m = evaluate(&model, &held)?;
        let s = selection_score(&m, model.multi_label());
        // NaN-free: scores are ratios of counts
        if i == 0 || s < selection_score(&scores[best], model.multi_label()) {
            best = i;
        }
        scores.push(m);
    }
    let config = grid[best].clone();
    let model = train_semi(data, embeddings, &config)?;
    Ok(Selection {
        best_index: best,
        config,
        model,
        holdout: scores,
    })
}
