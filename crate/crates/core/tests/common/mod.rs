//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use olprec::complexity::Neighborhood;
use olprec::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random labelled points on a coarse grid so that distance ties are common.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(0..8) as f64 / 8.0).collect())
        .collect();
    let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect();
    y[0] = 0;
    y[1] = 1;
    (x, y)
}

pub fn sqd(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

pub fn kruskal(x: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = x.len();
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((sqd(&x[i], &x[j]), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut tree = Vec::new();
    for (_, i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            tree.push((i, j));
        }
    }
    tree
}

pub fn n1_oracle(x: &[Vec<f64>], y: &[u8]) -> f64 {
    let tree = kruskal(x);
    let flagged = (0..y.len())
        .filter(|&v| tree.iter().any(|&(i, j)| (i == v || j == v) && y[i] != y[j]))
        .count();
    flagged as f64 / y.len() as f64
}

pub fn n3_oracle(x: &[Vec<f64>], y: &[u8]) -> f64 {
    let n = y.len();
    let mut errors = 0;
    for i in 0..n {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = sqd(&x[i], &x[j]);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        if y[best.unwrap().1] != y[i] {
            errors += 1;
        }
    }
    errors as f64 / n as f64
}

pub fn f3_oracle(x: &[Vec<f64>], y: &[u8]) -> f64 {
    let n = y.len();
    let d = x[0].len();
    let mut best = n;
    for f in 0..d {
        // A value is in the overlap iff each class has a value at or below it
        // and a value at or above it.
        let count = (0..n)
            .filter(|&i| {
                let v = x[i][f];
                [0u8, 1].iter().all(|&c| {
                    (0..n).any(|j| y[j] == c && x[j][f] <= v) && (0..n).any(|j| y[j] == c && x[j][f] >= v)
                })
            })
            .count();
        best = best.min(count);
    }
    best as f64 / n as f64
}

pub fn kdn_oracle(x: &[Vec<f64>], y: &[u8], k: usize) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let mut order: Vec<usize> = (0..y.len()).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| sqd(&x[i], &x[a]).total_cmp(&sqd(&x[i], &x[b])).then(a.cmp(&b)));
            order[..k].iter().filter(|&&j| y[j] != y[i]).count() as f64 / k as f64
        })
        .collect()
}

pub fn neighborhood(x: &[Vec<f64>], y: &[u8]) -> Neighborhood<f64> {
    Neighborhood::new(Matrix::from_rows(x).unwrap(), y.to_vec(), (0..y.len()).collect()).unwrap()
}

pub fn has_contradiction(x: &[Vec<f64>], y: &[u8]) -> bool {
    (0..y.len()).any(|i| (i + 1..y.len()).any(|j| x[i] == x[j] && y[i] != y[j]))
}
