#![allow(dead_code)]

use certiverify::dataset::Graph;
use certiverify::lipschitz::tour_length;
use certiverify::lp::StandardLp;
use certiverify::numeric::Rational;
use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::Rng;

pub fn q(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn qs(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&x| q(x)).collect()
}

/// Small random rational with numerator in `lo..=hi` and denominator 1..=4.
pub fn rand_q<R: Rng>(rng: &mut R, lo: i64, hi: i64) -> Rational {
    Rational::new(BigInt::from(rng.gen_range(lo..=hi)), BigInt::from(rng.gen_range(1..=4)))
}

/// Solves a square system by Gaussian elimination; `None` if singular.
pub fn solve_square(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for k in col..n {
                    let delta = &f * &a[col][k];
                    a[r][k] -= delta;
                }
                let delta = &f * &b[col];
                b[r] -= delta;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum BruteResult {
    Optimal(Rational),
    Infeasible,
    Unbounded,
}

/// Every feasible vertex of `{y >= 0 : A y <= b}`, found by making each
/// `n`-subset of the `m + n` inequalities tight.
pub fn feasible_vertices(lp: &StandardLp) -> Vec<Vec<Rational>> {
    let n = lp.c.len();
    let m = lp.b.len();
    // constraint k < m is row k of A; k >= m is -y_{k-m} <= 0
    let row = |k: usize| -> (Vec<Rational>, Rational) {
        if k < m {
            (lp.a[k].clone(), lp.b[k].clone())
        } else {
            let mut r = vec![Rational::zero(); n];
            r[k - m] = q(-1);
            (r, Rational::zero())
        }
    };
    let mut out: Vec<Vec<Rational>> = Vec::new();
    for subset in (0..m + n).combinations(n) {
        let (a, b): (Vec<_>, Vec<_>) = subset.iter().map(|&k| row(k)).unzip();
        let Some(y) = solve_square(a, b) else { continue };
        let feasible = y.iter().all(|v| !v.is_negative())
            && (0..m).all(|k| lp.a[k].iter().zip(&y).map(|(a, y)| a * y).sum::<Rational>() <= lp.b[k]);
        if feasible && !out.contains(&y) {
            out.push(y);
        }
    }
    out
}

/// Max of `c.y` over the vertices; unboundedness is decided by the dual
/// having no vertex while the primal has one.
pub fn brute_force(lp: &StandardLp) -> BruteResult {
    let verts = feasible_vertices(lp);
    if verts.is_empty() {
        return BruteResult::Infeasible;
    }
    if feasible_vertices(&standard_dual(lp)).is_empty() {
        return BruteResult::Unbounded;
    }
    let best = verts
        .iter()
        .map(|y| lp.c.iter().zip(y).map(|(c, y)| c * y).sum::<Rational>())
        .max()
        .expect("nonempty");
    BruteResult::Optimal(best)
}

/// `min b.u  s.t.  A^T u >= c, u >= 0` written as a max problem.
pub fn standard_dual(lp: &StandardLp) -> StandardLp {
    let n = lp.c.len();
    let m = lp.b.len();
    StandardLp {
        c: lp.b.iter().map(|x| -x).collect(),
        a: (0..n).map(|j| (0..m).map(|i| -lp.a[i][j].clone()).collect()).collect(),
        b: lp.c.iter().map(|x| -x).collect(),
    }
}

pub fn brute_tsp(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    (1..n)
        .permutations(n - 1)
        .map(|rest| {
            let tour: Vec<usize> = std::iter::once(0).chain(rest).collect();
            tour_length(points, &tour)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Cheapest spanning tree over any vertex subset containing the terminals.
pub fn brute_steiner(graph: &Graph, terminals: &[usize]) -> f64 {
    let terms: Vec<usize> = terminals.iter().copied().unique().collect();
    if terms.len() <= 1 {
        return 0.0;
    }
    let n = graph.vertices;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if terms.iter().any(|&t| mask >> t & 1 == 0) {
            continue;
        }
        let mut edges: Vec<_> = graph
            .edges
            .iter()
            .filter(|e| mask >> e.0 & 1 == 1 && mask >> e.1 & 1 == 1)
            .copied()
            .collect();
        edges.sort_by(|a, b| a.2.total_cmp(&b.2));
        let mut comp: Vec<usize> = (0..n).collect();
        let mut cost = 0.0;
        let mut joined = 0;
        for (u, v, w) in edges {
            let (cu, cv) = (comp[u], comp[v]);
            if cu != cv {
                for c in comp.iter_mut() {
                    if *c == cv {
                        *c = cu;
                    }
                }
                cost += w;
                joined += 1;
            }
        }
        if joined + 1 == mask.count_ones() as usize {
            best = best.min(cost);
        }
    }
    best
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)]).collect()
}

/// Connected random graph: a random spanning tree plus extra edges.
pub fn random_graph<R: Rng>(rng: &mut R, vertices: usize, extra: usize) -> Graph {
    let mut edges = Vec::new();
    for v in 1..vertices {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(1..=9) as f64));
    }
    for _ in 0..extra {
        let u = rng.gen_range(0..vertices);
        let v = rng.gen_range(0..vertices);
        if u != v {
            edges.push((u, v, rng.gen_range(1..=9) as f64));
        }
    }
    Graph::new(vertices, edges).unwrap()
}

/// First subset `S` with `|f(N) - f(N \\ S)| > sum_S w`, as a message.
pub fn lipschitz_violation(n: usize, value: f64, weights: &[f64], f_without: impl Fn(&[usize]) -> f64) -> Option<String> {
    for mask in 0u32..(1 << n) {
        let kept: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
        let removed_weight: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| weights[i]).sum();
        let diff = (value - f_without(&kept)).abs();
        if diff > removed_weight * (1.0 + 1e-9) + 1e-9 {
            return Some(format!("mask {mask:b}: |f(N) - f(N\\S)| = {diff} > {removed_weight}"));
        }
    }
    None
}

pub fn subsets_lipschitz(n: usize, value: f64, weights: &[f64], f_without: impl Fn(&[usize]) -> f64) {
    if let Some(msg) = lipschitz_violation(n, value, weights, f_without) {
        panic!("{msg}");
    }
}
