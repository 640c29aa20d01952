use rand::seq::index;
use rand::Rng;

use super::config::NegSampleCfg;
use crate::error::{Error, Result};
use crate::sparse::SparseVec;

/// `Σⱼ αⱼ (zⱼ − pⱼ)²` over the support of `alpha`.
pub fn weighted_square_loss(p: &[f64], z: &SparseVec, alpha: &SparseVec) -> Result<f64> {
    if z.dim() != p.len() {
        return Err(Error::dim("loss target", p.len(), z.dim()));
    }
    if alpha.dim() != p.len() {
        return Err(Error::dim("loss weights", p.len(), alpha.dim()));
    }
    Ok(alpha
        .iter()
        .map(|(j, a)| {
            let diff = z.get(j) - p[j];
            a * diff * diff
        })
        .sum())
}

/// Loss weights for one target: `positive_weight` on the target's support
/// plus weight 1 on `min(η·max(|support|, 1), D − |support|)` absent
/// components drawn uniformly without replacement.
pub fn sample_weights<R: Rng + ?Sized>(z: &SparseVec, cfg: &NegSampleCfg, rng: &mut R) -> SparseVec {
    let dim = z.dim();
    let support = z.indices();
    let free = dim - support.len();
    let wanted = cfg.eta * support.len().max(1);
    let n_neg = wanted.min(free);

    let mut ranks = index::sample(rng, free, n_neg).into_vec();
    ranks.sort_unstable();
    // the r-th index not in `support`
    let mut negatives = Vec::with_capacity(n_neg);
    let mut k = 0;
    for r in ranks {
        while k < support.len() && (support[k] as usize) <= r + k {
            k += 1;
        }
        negatives.push((r + k) as u32);
    }

    let mut pairs: Vec<(u32, f64)> = support
        .iter()
        .map(|&i| (i, cfg.positive_weight))
        .chain(negatives.into_iter().map(|i| (i, 1.0)))
        .collect();
    pairs.sort_unstable_by_key(|p| p.0);
    SparseVec::from_sorted(dim, pairs).expect("positives and negatives are disjoint")
}
