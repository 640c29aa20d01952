use crate::error::{Error, Result};

/// Sparse real vector: strictly increasing indices, no stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    dim: usize,
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> Self {
        SparseVec {
            dim,
            idx: Vec::new(),
            val: Vec::new(),
        }
    }

    /// Validating constructor; pairs must already be sorted and nonzero.
    pub fn from_sorted(dim: usize, pairs: Vec<(u32, f64)>) -> Result<Self> {
        let mut out = SparseVec::zeros(dim);
        for (i, v) in pairs {
            if i as usize >= dim {
                return Err(Error::InvalidArgument(format!("index {i} out of range for dim {dim}")));
            }
            if out.idx.last().is_some_and(|&last| last >= i) {
                return Err(Error::InvalidArgument(
                    "sparse indices must be strictly increasing".into(),
                ));
            }
            if v == 0.0 {
                return Err(Error::InvalidArgument("sparse vectors store no zeros".into()));
            }
            out.idx.push(i);
            out.val.push(v);
        }
        Ok(out)
    }

    /// Sums duplicate indices and drops zeros. Panics on out-of-range indices.
    pub fn accumulate(dim: usize, mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut out = SparseVec::zeros(dim);
        for (i, v) in pairs {
            assert!((i as usize) < dim, "index {i} out of range for dim {dim}");
            if out.idx.last() == Some(&i) {
                *out.val.last_mut().unwrap() += v;
            } else {
                out.idx.push(i);
                out.val.push(v);
            }
        }
        out.prune_zeros();
        out
    }

    fn prune_zeros(&mut self) {
        let mut k = 0;
        for j in 0..self.idx.len() {
            if self.val[j] != 0.0 {
                self.idx[k] = self.idx[j];
                self.val[k] = self.val[j];
                k += 1;
            }
        }
        self.idx.truncate(k);
        self.val.truncate(k);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn is_zero(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.idx
    }

    pub fn values(&self) -> &[f64] {
        &self.val
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().map(|&i| i as usize).zip(self.val.iter().copied())
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.idx.binary_search(&(i as u32)) {
            Ok(pos) => self.val[pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let pairs = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .collect();
        SparseVec::from_sorted(dense.len(), pairs).expect("dense scan is sorted")
    }

    pub fn add(&self, other: &SparseVec) -> Result<SparseVec> {
        if self.dim != other.dim {
            return Err(Error::dim("sparse add", self.dim, other.dim));
        }
        let pairs = self.iter().chain(other.iter()).map(|(i, v)| (i as u32, v)).collect();
        Ok(SparseVec::accumulate(self.dim, pairs))
    }
}
