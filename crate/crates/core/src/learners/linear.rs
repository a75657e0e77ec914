//! Perceptron and hinge-loss SVMs (linear and RBF kernel).
//!
//! Both SVMs minimize `lambda/2 * ||f||^2 + mean_i s_i * max(0, 1 - y_i f(x_i))`
//! with full-batch subgradient steps of size `1 / (lambda * t)`. A step that
//! would raise the objective is halved until it does not, so the objective
//! is non-increasing from epoch to epoch.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SvmParams;
use crate::dataset::ClassId;
use crate::matrix::Matrix;
use crate::scalar::{self, Scalar};

const PERCEPTRON_EPOCHS: usize = 100;
const PERCEPTRON_RATE: f64 = 1.0;
const MAX_HALVINGS: usize = 40;

/// How a signed margin becomes a class-1 probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MarginLink {
    /// `logistic(margin / (||w|| + eps))`
    Normalized,
    /// `logistic(factor * margin)`
    Scaled(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearModel<T> {
    pub w: Vec<T>,
    pub b: T,
    /// Inputs are shifted by `center` before the dot product.
    pub center: Vec<T>,
    pub link: MarginLink,
}

impl<T: Scalar> LinearModel<T> {
    pub fn margin(&self, x: &[T]) -> T {
        let mut m = self.b;
        for ((&wi, &xi), &ci) in self.w.iter().zip(x).zip(&self.center) {
            m = m + wi * (xi - ci);
        }
        m
    }

    pub fn proba(&self, x: &[T]) -> [T; 2] {
        let m = self.margin(x);
        let z = match self.link {
            MarginLink::Normalized => m / (scalar::norm(&self.w) + T::lit(1e-12)),
            MarginLink::Scaled(f) => m * T::lit(f),
        };
        let p1 = z.logistic();
        [T::one() - p1, p1]
    }
}

#[inline]
fn sign<T: Scalar>(c: ClassId) -> T {
    if c == 1 {
        T::one()
    } else {
        -T::one()
    }
}

/// Classical online perceptron with bias on inputs centered at the class
/// midpoint; stops after a mistake-free epoch.
pub(crate) fn fit_perceptron<T: Scalar>(x: &Matrix<T>, y: &[ClassId], s: &[T], seed: u64) -> LinearModel<T> {
    let d = x.n_cols();
    let center = class_midpoint(x, y, s);
    let mut w = vec![T::zero(); d];
    let mut b = T::zero();
    let rate = T::lit(PERCEPTRON_RATE);
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..PERCEPTRON_EPOCHS {
        order.shuffle(&mut rng);
        let mut mistakes = 0;
        for &i in &order {
            let yi: T = sign(y[i]);
            let row: Vec<T> = x.row(i).iter().zip(&center).map(|(&v, &c)| v - c).collect();
            if yi * (scalar::dot(&w, &row) + b) <= T::zero() {
                let step = rate * s[i] * yi;
                w.iter_mut().zip(&row).for_each(|(wj, &xj)| *wj = *wj + step * xj);
                b = b + step;
                mistakes += 1;
            }
        }
        if mistakes == 0 {
            break;
        }
    }
    LinearModel {
        w,
        b,
        center,
        link: MarginLink::Normalized,
    }
}

/// Mean-one sample weights.
fn normalized<T: Scalar>(s: &[T]) -> Vec<T> {
    let total: T = s.iter().copied().sum();
    let n = T::from_count(s.len());
    s.iter().map(|&v| v * n / total).collect()
}

/// Midpoint of the two weighted class centroids. Centering there makes the
/// unregularized bias start between the classes.
fn class_midpoint<T: Scalar>(x: &Matrix<T>, y: &[ClassId], s: &[T]) -> Vec<T> {
    let d = x.n_cols();
    let mut sums = [vec![T::zero(); d], vec![T::zero(); d]];
    let mut tot = [T::zero(); 2];
    for (i, row) in x.rows().enumerate() {
        let c = y[i] as usize;
        tot[c] = tot[c] + s[i];
        sums[c].iter_mut().zip(row).for_each(|(a, &v)| *a = *a + s[i] * v);
    }
    (0..d)
        .map(|j| (sums[0][j] / tot[0] + sums[1][j] / tot[1]) / T::lit(2.0))
        .collect()
}

/// Shared descent loop. `objective(params)` and `subgradient(params)` act on a
/// flat parameter vector whose last entry is the bias.
fn descend<T: Scalar>(
    mut params: Vec<T>,
    lambda: T,
    epochs: usize,
    objective: impl Fn(&[T]) -> T,
    subgradient: impl Fn(&[T]) -> Vec<T>,
) -> (Vec<T>, Vec<T>) {
    let mut current = objective(&params);
    let mut trace = Vec::with_capacity(epochs);
    let mut candidate = params.clone();
    for t in 1..=epochs {
        let g = subgradient(&params);
        if g.iter().all(|v| v.is_zero()) {
            trace.push(current);
            continue;
        }
        let mut eta = T::one() / (lambda * T::from_count(t));
        for _ in 0..MAX_HALVINGS {
            candidate
                .iter_mut()
                .zip(params.iter().zip(&g))
                .for_each(|(c, (&p, &gi))| *c = p - eta * gi);
            let value = objective(&candidate);
            if value <= current {
                std::mem::swap(&mut params, &mut candidate);
                current = value;
                break;
            }
            eta = eta / T::lit(2.0);
        }
        trace.push(current);
    }
    (params, trace)
}

pub(crate) fn fit_linear_svm<T: Scalar>(
    x: &Matrix<T>,
    y: &[ClassId],
    s: &[T],
    p: &SvmParams,
) -> (LinearModel<T>, Vec<T>) {
    let n = y.len();
    let d = x.n_cols();
    let s = normalized(s);
    let center = class_midpoint(x, y, &s);
    let z: Vec<Vec<T>> = x
        .rows()
        .map(|r| r.iter().zip(&center).map(|(&a, &c)| a - c).collect())
        .collect();
    let ys: Vec<T> = y.iter().map(|&c| sign(c)).collect();
    let lambda = T::lit(p.lambda);
    let inv_n = T::one() / T::from_count(n);
    let half = T::lit(0.5);

    let margin = |params: &[T], i: usize| scalar::dot(&params[..d], &z[i]) + params[d];
    let objective = |params: &[T]| {
        let reg = half * lambda * scalar::dot(&params[..d], &params[..d]);
        let loss: T = (0..n)
            .map(|i| s[i] * (T::one() - ys[i] * margin(params, i)).max(T::zero()))
            .sum();
        reg + loss * inv_n
    };
    let subgradient = |params: &[T]| {
        let mut g: Vec<T> = params[..d].iter().map(|&w| lambda * w).collect();
        g.push(T::zero());
        for i in 0..n {
            if ys[i] * margin(params, i) < T::one() {
                let c = s[i] * ys[i] * inv_n;
                g[..d].iter_mut().zip(&z[i]).for_each(|(gj, &zj)| *gj = *gj - c * zj);
                g[d] = g[d] - c;
            }
        }
        g
    };
    let (params, trace) = descend(vec![T::zero(); d + 1], lambda, p.epochs, objective, subgradient);
    let model = LinearModel {
        w: params[..d].to_vec(),
        b: params[d],
        center,
        link: MarginLink::Scaled(2.0),
    };
    (model, trace)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KernelModel<T> {
    pub support: Matrix<T>,
    pub coef: Vec<T>,
    pub b: T,
    pub gamma: T,
}

#[inline]
fn rbf<T: Scalar>(gamma: T, a: &[T], b: &[T]) -> T {
    (-gamma * scalar::sq_dist(a, b)).exp()
}

impl<T: Scalar> KernelModel<T> {
    pub fn decision(&self, x: &[T]) -> T {
        self.support
            .rows()
            .zip(&self.coef)
            .fold(self.b, |acc, (r, &a)| acc + a * rbf(self.gamma, r, x))
    }

    pub fn proba(&self, x: &[T]) -> [T; 2] {
        let p1 = (T::lit(2.0) * self.decision(x)).logistic();
        [T::one() - p1, p1]
    }
}

/// `1 / (d * mean per-feature variance)`, or 1 when the data has no spread.
pub(crate) fn default_gamma<T: Scalar>(x: &Matrix<T>) -> T {
    let n = T::from_count(x.n_rows());
    let d = x.n_cols();
    let mean_var = (0..d)
        .map(|j| {
            let mean = x.column(j).sum::<T>() / n;
            x.column(j).map(|v| (v - mean) * (v - mean)).sum::<T>() / n
        })
        .sum::<T>()
        / T::from_count(d.max(1));
    if mean_var > T::zero() {
        T::one() / (T::from_count(d) * mean_var)
    } else {
        T::one()
    }
}

pub(crate) fn fit_gaussian_svm<T: Scalar>(
    x: &Matrix<T>,
    y: &[ClassId],
    s: &[T],
    p: &SvmParams,
) -> (KernelModel<T>, Vec<T>) {
    let n = y.len();
    let s = normalized(s);
    let gamma = p.gamma.map_or_else(|| default_gamma(x), T::lit);
    let k: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| rbf(gamma, x.row(i), x.row(j))).collect())
        .collect();
    let ys: Vec<T> = y.iter().map(|&c| sign(c)).collect();
    let lambda = T::lit(p.lambda);
    let inv_n = T::one() / T::from_count(n);
    let half = T::lit(0.5);

    let f = |params: &[T], i: usize| scalar::dot(&params[..n], &k[i]) + params[n];
    let objective = |params: &[T]| {
        let a = &params[..n];
        let reg: T = (0..n).map(|i| a[i] * scalar::dot(a, &k[i])).sum();
        let loss: T = (0..n)
            .map(|i| s[i] * (T::one() - ys[i] * f(params, i)).max(T::zero()))
            .sum();
        half * lambda * reg + loss * inv_n
    };
    let subgradient = |params: &[T]| {
        let mut g: Vec<T> = params[..n].iter().map(|&a| lambda * a).collect();
        g.push(T::zero());
        for i in 0..n {
            if ys[i] * f(params, i) < T::one() {
                let c = s[i] * ys[i] * inv_n;
                g[i] = g[i] - c;
                g[n] = g[n] - c;
            }
        }
        g
    };
    let (params, trace) = descend(vec![T::zero(); n + 1], lambda, p.epochs, objective, subgradient);
    let model = KernelModel {
        support: x.clone(),
        coef: params[..n].to_vec(),
        b: params[n],
        gamma,
    };
    (model, trace)
}
