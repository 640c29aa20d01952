//! Explicit region embeddings `vᵀ(Wx + b)₊` over seq-represented regions of a
//! finite vocabulary: exact tables, simple concepts and their unions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Upper bound on regions enumerated exhaustively.
pub const MAX_ENUMERATED: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RetexNet {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub v: DVector<f64>,
}

impl RetexNet {
    pub fn new(w: DMatrix<f64>, b: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        if w.nrows() != b.len() || w.nrows() != v.len() {
            return Err(Error::dim("retex rows", w.nrows(), b.len().min(v.len())));
        }
        Ok(RetexNet { w, b, v })
    }

    /// `(Wx + b)₊`.
    pub fn embed(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.w.ncols() {
            return Err(Error::dim("retex input", self.w.ncols(), x.len()));
        }
        Ok((&self.w * x + &self.b).map(|a| a.max(0.0)))
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.v.dot(&self.embed(x)?))
    }

    pub fn eval_region(&self, region: &[usize], vocab_size: usize) -> Result<f64> {
        self.eval(&seq_vector(region, vocab_size)?)
    }
}

/// Concatenated one-hot vectors of the region's word ids.
pub fn seq_vector(region: &[usize], vocab_size: usize) -> Result<DVector<f64>> {
    let mut x = DVector::zeros(region.len() * vocab_size);
    for (pos, &w) in region.iter().enumerate() {
        if w >= vocab_size {
            return Err(Error::InvalidArgument(format!(
                "word id {w} outside vocabulary of {vocab_size}"
            )));
        }
        x[pos * vocab_size + w] = 1.0;
    }
    Ok(x)
}

/// Number of regions of size `m`, if it is within the enumeration bound.
pub fn region_count(vocab_size: usize, m: usize) -> Result<usize> {
    let too_many = || Error::InvalidArgument(format!("{vocab_size}^{m} regions exceed {MAX_ENUMERATED}"));
    let n = vocab_size.checked_pow(m as u32).ok_or_else(too_many)?;
    if n > MAX_ENUMERATED {
        return Err(too_many());
    }
    Ok(n)
}

/// The region with lexicographic index `index` (first position most significant).
pub fn region_at(index: usize, vocab_size: usize, m: usize) -> Vec<usize> {
    let mut r = vec![0; m];
    let mut rest = index;
    for slot in r.iter_mut().rev() {
        *slot = rest % vocab_size;
        rest /= vocab_size;
    }
    r
}

/// All `|V|^m` regions in lexicographic order.
pub fn enumerate_regions(vocab_size: usize, m: usize) -> Result<Vec<Vec<usize>>> {
    let n = region_count(vocab_size, m)?;
    Ok((0..n).map(|i| region_at(i, vocab_size, m)).collect())
}

/// One row per region: row `i` fires (with value 1) exactly on region `i` and
/// carries output weight `table[i]`. `table` is indexed lexicographically.
pub fn retex_universal(table: &[f64], vocab_size: usize, m: usize) -> Result<RetexNet> {
    let n = region_count(vocab_size, m)?;
    if table.len() != n {
        return Err(Error::dim("function table", n, table.len()));
    }
    let d = m * vocab_size;
    let mut w = DMatrix::from_element(n, d, -1.0);
    for i in 0..n {
        for (pos, word) in region_at(i, vocab_size, m).into_iter().enumerate() {
            w[(i, pos * vocab_size + word)] = 1.0;
        }
    }
    // every seq region has exactly m ones
    let b = DVector::from_element(n, 1.0 - m as f64);
    RetexNet::new(w, b, DVector::from_column_slice(table))
}

/// Regions whose i-th word is in `groups[i]` (sign +1) or outside it (sign −1).
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleConcept {
    pub groups: Vec<Vec<usize>>,
    pub signs: Vec<i8>,
}

impl SimpleConcept {
    pub fn new(groups: Vec<Vec<usize>>, signs: Vec<i8>, vocab_size: usize) -> Result<Self> {
        if groups.len() != signs.len() || groups.is_empty() {
            return Err(Error::InvalidArgument(
                "one sign per word group, at least one group".into(),
            ));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument("signs must be +1 or -1".into()));
        }
        if groups.iter().flatten().any(|&w| w >= vocab_size) {
            return Err(Error::InvalidArgument("word group outside the vocabulary".into()));
        }
        Ok(SimpleConcept { groups, signs })
    }

    pub fn size(&self) -> usize {
        self.groups.len()
    }

    pub fn contains(&self, region: &[usize]) -> bool {
        region
            .iter()
            .zip(&self.groups)
            .zip(&self.signs)
            .all(|((w, g), &s)| g.contains(w) == (s == 1))
    }
}

/// A single unit `(wᵀx + b)₊` equal to the concept's indicator on every region.
pub fn retex_simple_concept(c: &SimpleConcept, vocab_size: usize) -> (DVector<f64>, f64) {
    let mut w = DVector::zeros(c.size() * vocab_size);
    for (pos, (group, &s)) in c.groups.iter().zip(&c.signs).enumerate() {
        for &word in group {
            w[pos * vocab_size + word] = f64::from(s);
        }
    }
    let b = 1.0 - c.signs.iter().map(|&s| (f64::from(s) + 1.0) / 2.0).sum::<f64>();
    (w, b)
}

/// One row per concept and all-ones output weights: the output counts the
/// concepts a region satisfies.
pub fn retex_union(concepts: &[SimpleConcept], vocab_size: usize) -> Result<RetexNet> {
    let first = concepts.first().ok_or(Error::Empty("concept list"))?;
    let m = first.size();
    if concepts.iter().any(|c| c.size() != m) {
        return Err(Error::InvalidArgument("concepts must share the region size".into()));
    }
    let q = concepts.len();
    let mut w = DMatrix::zeros(q, m * vocab_size);
    let mut b = DVector::zeros(q);
    for (i, c) in concepts.iter().enumerate() {
        let (wi, bi) = retex_simple_concept(c, vocab_size);
        w.row_mut(i).copy_from(&wi.transpose());
        b[i] = bi;
    }
    RetexNet::new(w, b, DVector::from_element(q, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(w: &DVector<f64>, b: f64, region: &[usize], v: usize) -> f64 {
        (w.dot(&seq_vector(region, v).unwrap()) + b).max(0.0)
    }

    #[test]
    fn universal_table_is_exact() {
        let table: Vec<f64> = (0..9).map(|i| (i as f64).sin() * 3.0 - 0.5).collect();
        let net = retex_universal(&table, 3, 2).unwrap();
        assert_eq!(net.w.nrows(), 9);
        for (i, r) in enumerate_regions(3, 2).unwrap().iter().enumerate() {
            assert_eq!(net.eval_region(r, 3).unwrap(), table[i]);
        }
    }

    #[test]
    fn universal_degenerate_cases() {
        let zero = retex_universal(&[0.0; 4], 2, 2).unwrap();
        assert!(zero.v.iter().all(|&x| x == 0.0));
        let one = retex_universal(&[2.5], 1, 1).unwrap();
        assert_eq!((one.w.nrows(), one.w.ncols()), (1, 1));
        assert_eq!(one.eval_region(&[0], 1).unwrap(), 2.5);
        assert!(retex_universal(&[1.0; 5], 3, 2).is_err());
    }

    #[test]
    fn use_not_concept_by_hand() {
        // vocab: use=0 it=1 not=2
        let c = SimpleConcept::new(vec![vec![0], vec![2]], vec![1, -1], 3).unwrap();
        let (w, b) = retex_simple_concept(&c, 3);
        assert_eq!(b, 0.0);
        assert_eq!(unit(&w, b, &[0, 1], 3), 1.0);
        assert_eq!(unit(&w, b, &[0, 2], 3), 0.0);
    }

    #[test]
    fn vacuous_concept_covers_everything() {
        let all = vec![0, 1, 2];
        let c = SimpleConcept::new(vec![all.clone(), all], vec![1, 1], 3).unwrap();
        let (w, b) = retex_simple_concept(&c, 3);
        for r in enumerate_regions(3, 2).unwrap() {
            assert_eq!(unit(&w, b, &r, 3), 1.0);
        }
    }

    #[test]
    fn overlapping_union_counts() {
        let a = SimpleConcept::new(vec![vec![0], vec![0, 1]], vec![1, 1], 2).unwrap();
        let b = SimpleConcept::new(vec![vec![0], vec![1]], vec![1, 1], 2).unwrap();
        let net = retex_union(&[a, b], 2).unwrap();
        assert_eq!(net.eval_region(&[0, 1], 2).unwrap(), 2.0);
        assert_eq!(net.eval_region(&[0, 0], 2).unwrap(), 1.0);
        assert_eq!(net.eval_region(&[1, 1], 2).unwrap(), 0.0);
    }

    #[test]
    fn enumeration_guard() {
        assert!(region_count(10, 6).is_ok());
        assert!(region_count(10, 7).is_err());
        assert!(region_count(usize::MAX, 3).is_err());
        assert_eq!(region_at(5, 3, 2), vec![1, 2]);
    }

    #[test]
    fn concept_validation() {
        assert!(SimpleConcept::new(vec![vec![0]], vec![2], 3).is_err());
        assert!(SimpleConcept::new(vec![vec![5]], vec![1], 3).is_err());
        assert!(SimpleConcept::new(vec![vec![0]], vec![1, 1], 3).is_err());
        assert!(retex_union(&[], 3).is_err());
    }
}
