//! Self-generating hyperplanes: a deterministic generator of two-class linear
//! classifiers such that every input sample is classified correctly by at
//! least one member of the generated subpool.

use serde::{Deserialize, Serialize};

use crate::dataset::{class_counts, ClassId};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{self, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Hyperplane<T> {
    pub w: Vec<T>,
    pub b: T,
    /// Class assigned where `w.x + b > 0`; the boundary and the other side
    /// get the opposite class.
    pub positive_class: ClassId,
}

impl<T: Scalar> Hyperplane<T> {
    /// Perpendicular bisector of `a` and `b`, with `a`'s side labelled `a_class`.
    pub fn bisector(a: &[T], b: &[T], a_class: ClassId) -> Self {
        let w: Vec<T> = a.iter().zip(b).map(|(&p, &q)| p - q).collect();
        let half = T::lit(0.5);
        let mid: Vec<T> = a.iter().zip(b).map(|(&p, &q)| (p + q) * half).collect();
        let b = -scalar::dot(&w, &mid);
        Self {
            w,
            b,
            positive_class: a_class,
        }
    }

    #[inline]
    pub fn raw_margin(&self, x: &[T]) -> T {
        scalar::dot(&self.w, x) + self.b
    }

    /// Signed distance to the plane, positive on the class-1 side.
    pub fn margin(&self, x: &[T]) -> T {
        let m = self.raw_margin(x) / scalar::norm(&self.w);
        if self.positive_class == 1 {
            m
        } else {
            -m
        }
    }

    pub fn predict(&self, x: &[T]) -> ClassId {
        if self.raw_margin(x) > T::zero() {
            self.positive_class
        } else {
            1 - self.positive_class
        }
    }

    /// Logistic of the normalized margin; ties fall to the opposite class,
    /// consistent with [`Hyperplane::predict`].
    pub fn proba(&self, x: &[T]) -> [T; 2] {
        let p1 = self.margin(x).logistic();
        [T::one() - p1, p1]
    }
}

/// Ordered list of generated hyperplanes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Subpool<T> {
    pub classifiers: Vec<Hyperplane<T>>,
}

impl<T: Scalar> Subpool<T> {
    pub fn len(&self) -> usize {
        self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classifiers.is_empty()
    }

    /// True when every row is classified correctly by some member.
    pub fn covers(&self, x: &Matrix<T>, y: &[ClassId]) -> bool {
        x.rows()
            .zip(y)
            .all(|(r, &c)| self.classifiers.iter().any(|h| h.predict(r) == c))
    }
}

fn centroid<T: Scalar>(x: &Matrix<T>, idx: impl Iterator<Item = usize>) -> Option<Vec<T>> {
    let mut sum = vec![T::zero(); x.n_cols()];
    let mut n = 0usize;
    for i in idx {
        sum.iter_mut().zip(x.row(i)).for_each(|(s, &v)| *s = *s + v);
        n += 1;
    }
    (n > 0).then(|| {
        let n = T::from_count(n);
        sum.into_iter().map(|s| s / n).collect()
    })
}

/// Rejects inputs where the same point carries both labels.
fn check_contradictions<T: Scalar>(x: &Matrix<T>, y: &[ClassId]) -> Result<()> {
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            if y[i] != y[j] && x.row(i) == x.row(j) {
                return Err(Error::ContradictoryData(format!("rows {i} and {j}")));
            }
        }
    }
    Ok(())
}

/// Generates the subpool.
///
/// Each round bisects the centroids of the still-uncovered samples of each
/// class (a class with nothing left uses its full centroid) and drops the
/// samples the new plane gets right. A round that covers nothing is replaced
/// by the bisector between the uncovered sample closest to its class
/// centroid and that sample's nearest enemy, which always covers at least
/// that sample.
pub fn generate<T: Scalar>(x: &Matrix<T>, y: &[ClassId]) -> Result<Subpool<T>> {
    if y.len() != x.n_rows() {
        return Err(Error::Shape {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    let counts = class_counts(y);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClassRegion);
    }
    check_contradictions(x, y)?;

    let full: [Vec<T>; 2] = [0u8, 1].map(|c| {
        centroid(x, (0..y.len()).filter(|&i| y[i] == c)).expect("class is present")
    });
    let mut remaining: Vec<usize> = (0..y.len()).collect();
    let mut classifiers = Vec::new();

    while !remaining.is_empty() {
        let cents: [Vec<T>; 2] = [0u8, 1].map(|c| {
            centroid(x, remaining.iter().copied().filter(|&i| y[i] == c))
                .unwrap_or_else(|| full[c as usize].clone())
        });
        let mut removed = false;
        if cents[0] != cents[1] {
            let h = Hyperplane::bisector(&cents[1], &cents[0], 1);
            let before = remaining.len();
            remaining.retain(|&i| h.predict(x.row(i)) != y[i]);
            if remaining.len() < before {
                classifiers.push(h);
                removed = true;
            }
        }
        if removed {
            continue;
        }

        let &anchor = remaining
            .iter()
            .min_by(|&&a, &&b| {
                let da = scalar::sq_dist(x.row(a), &cents[y[a] as usize]);
                let db = scalar::sq_dist(x.row(b), &cents[y[b] as usize]);
                scalar::cmp(da, db).then(a.cmp(&b))
            })
            .expect("remaining is non-empty");
        let enemy = (0..y.len())
            .filter(|&j| y[j] != y[anchor])
            .min_by(|&a, &b| {
                scalar::cmp(
                    scalar::sq_dist(x.row(anchor), x.row(a)),
                    scalar::sq_dist(x.row(anchor), x.row(b)),
                )
                .then(a.cmp(&b))
            })
            .expect("both classes present");
        let h = Hyperplane::bisector(x.row(anchor), x.row(enemy), y[anchor]);
        let before = remaining.len();
        remaining.retain(|&i| h.predict(x.row(i)) != y[i]);
        if remaining.len() == before {
            return Err(Error::ContradictoryData(format!(
                "rows {anchor} and {enemy} are numerically indistinguishable"
            )));
        }
        classifiers.push(h);
    }
    Ok(Subpool { classifiers })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_blobs_need_one_plane() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.1, 0.1], [0.0, 0.2], [1.0, 1.0], [0.9, 1.0], [1.0, 0.8]]).unwrap();
        let y = vec![0, 0, 0, 1, 1, 1];
        let pool = generate(&x, &y).unwrap();
        assert_eq!(pool.len(), 1);
        assert!(pool.covers(&x, &y));
    }

    #[test]
    fn xor_needs_several_planes() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        let y = vec![0, 0, 1, 1];
        let pool = generate(&x, &y).unwrap();
        assert!(pool.len() >= 2);
        for (r, &c) in x.rows().zip(&y) {
            assert!(pool.classifiers.iter().any(|h| h.predict(r) == c));
        }
    }

    #[test]
    fn contradictions_rejected() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(generate(&x, &[0, 1, 1]), Err(Error::ContradictoryData(_))));
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(generate(&x, &[1, 1]), Err(Error::SingleClassRegion)));
    }

    #[test]
    fn boundary_goes_to_other_class() {
        let h = Hyperplane::bisector(&[1.0, 0.0], &[0.0, 0.0], 0);
        assert_eq!(h.predict(&[0.5, 3.0]), 1);
        assert_eq!(h.predict(&[0.9, 0.0]), 0);
        assert_eq!(h.proba(&[0.5, 3.0]), [0.5, 0.5]);
    }
}
