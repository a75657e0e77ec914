//! Exact Euclidean neighbor queries and KDN instance hardness.

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{self, Scalar};

/// Neighbors of a query, nearest first. Ties are ordered by lower index.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborSet<T> {
    pub indices: Vec<usize>,
    pub distances: Vec<T>,
}

impl<T: Scalar> NeighborSet<T> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// All reference points ordered by (squared distance, index), optionally
/// skipping one index.
fn ranked<T: Scalar>(query: &[T], refset: &Matrix<T>, skip: Option<usize>) -> Vec<(T, usize)> {
    let mut all: Vec<(T, usize)> = (0..refset.n_rows())
        .filter(|&i| Some(i) != skip)
        .map(|i| (scalar::sq_dist(query, refset.row(i)), i))
        .collect();
    all.sort_by(|a, b| scalar::cmp(a.0, b.0).then(a.1.cmp(&b.1)));
    all
}

fn check_dim<T: Scalar>(query: &[T], refset: &Matrix<T>) -> Result<()> {
    if query.len() != refset.n_cols() {
        return Err(Error::Shape {
            expected: refset.n_cols(),
            got: query.len(),
        });
    }
    Ok(())
}

fn to_set<T: Scalar>(pairs: impl IntoIterator<Item = (T, usize)>) -> NeighborSet<T> {
    let (distances, indices) = pairs.into_iter().map(|(d, i)| (d.sqrt(), i)).unzip();
    NeighborSet { indices, distances }
}

/// The `k` nearest reference rows.
pub fn knn<T: Scalar>(query: &[T], refset: &Matrix<T>, k: usize) -> Result<NeighborSet<T>> {
    knn_excluding(query, refset, k, None)
}

/// Like [`knn`] but never returns `exclude`.
pub fn knn_excluding<T: Scalar>(
    query: &[T],
    refset: &Matrix<T>,
    k: usize,
    exclude: Option<usize>,
) -> Result<NeighborSet<T>> {
    check_dim(query, refset)?;
    let available = refset.n_rows() - usize::from(exclude.is_some_and(|e| e < refset.n_rows()));
    if k > available {
        return Err(Error::InsufficientNeighbors {
            requested: k,
            available,
        });
    }
    let mut all = ranked(query, refset, exclude);
    all.truncate(k);
    Ok(to_set(all))
}

/// K-Nearest Neighbors Equality: the `ceil(k/2)` nearest points of each class.
///
/// A class with fewer members contributes all of them; the shortfall is not
/// filled from the other class. The result is ordered by distance.
pub fn knne<T: Scalar>(
    query: &[T],
    refset: &Matrix<T>,
    ref_labels: &[ClassId],
    k: usize,
) -> Result<NeighborSet<T>> {
    check_dim(query, refset)?;
    if ref_labels.len() != refset.n_rows() {
        return Err(Error::Shape {
            expected: refset.n_rows(),
            got: ref_labels.len(),
        });
    }
    if !ref_labels.contains(&0) || !ref_labels.contains(&1) {
        return Err(Error::SingleClassRegion);
    }
    let per_class = k.div_ceil(2);
    let mut taken = [0usize; 2];
    let picked = ranked(query, refset, None).into_iter().filter(|&(_, i)| {
        let c = ref_labels[i] as usize;
        if taken[c] < per_class {
            taken[c] += 1;
            true
        } else {
            false
        }
    });
    Ok(to_set(picked.collect::<Vec<_>>()))
}

/// Per-sample K-Disagreeing Neighbors scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KdnTable<T> {
    pub scores: Vec<T>,
    pub k_h: usize,
}

impl<T: Scalar> KdnTable<T> {
    pub fn is_hard(&self, i: usize) -> bool {
        self.scores[i] > T::zero()
    }
}

/// Fraction of each sample's `k_h` nearest other samples carrying a
/// different label. The sample itself is excluded from its neighborhood.
pub fn kdn<T: Scalar>(ds: &Dataset<T>, k_h: usize) -> Result<KdnTable<T>> {
    kdn_raw(&ds.features, &ds.labels, k_h)
}

pub fn kdn_raw<T: Scalar>(x: &Matrix<T>, y: &[ClassId], k_h: usize) -> Result<KdnTable<T>> {
    if k_h == 0 || k_h >= x.n_rows() {
        return Err(Error::InsufficientNeighbors {
            requested: k_h,
            available: x.n_rows().saturating_sub(1),
        });
    }
    let k = T::from_count(k_h);
    let scores = (0..x.n_rows())
        .map(|i| {
            let nb = knn_excluding(x.row(i), x, k_h, Some(i))?;
            let disagree = nb.indices.iter().filter(|&&j| y[j] != y[i]).count();
            Ok(T::from_count(disagree) / k)
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(KdnTable { scores, k_h })
}
