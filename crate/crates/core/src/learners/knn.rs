use serde::{Deserialize, Serialize};

use crate::dataset::ClassId;
use crate::matrix::Matrix;
use crate::neighbors;
use crate::scalar::Scalar;

/// Lazy k-NN classifier; probability is the neighbor class frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KnnModel<T> {
    pub x: Matrix<T>,
    pub y: Vec<ClassId>,
    pub k: usize,
}

/// Neighborhood size actually used: `k` when enough points exist, otherwise
/// the largest odd number not exceeding the training size.
pub fn effective_k(k: usize, n: usize) -> usize {
    if n >= k {
        k
    } else if n % 2 == 1 {
        n
    } else {
        n.saturating_sub(1).max(1)
    }
}

impl<T: Scalar> KnnModel<T> {
    pub fn fit(x: &Matrix<T>, y: &[ClassId], k: usize) -> Self {
        Self {
            x: x.clone(),
            y: y.to_vec(),
            k: effective_k(k.max(1), y.len()),
        }
    }

    pub fn proba(&self, q: &[T]) -> [T; 2] {
        let nb = neighbors::knn(q, &self.x, self.k).expect("k never exceeds the training size");
        let ones = nb.indices.iter().filter(|&&i| self.y[i] == 1).count();
        let p1 = T::from_count(ones) / T::from_count(nb.len());
        [T::one() - p1, p1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_k_rules() {
        assert_eq!(effective_k(7, 100), 7);
        assert_eq!(effective_k(7, 6), 5);
        assert_eq!(effective_k(7, 5), 5);
        assert_eq!(effective_k(7, 2), 1);
        assert_eq!(effective_k(7, 1), 1);
    }
}
