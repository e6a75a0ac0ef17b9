//! Exact Euclidean TSP by Held-Karp dynamic programming.

use crate::dataset::{Dataset, Payload};
use crate::error::{Error, Result};

/// Largest instance [`tsp_solve`] accepts.
pub const MAX_TSP_POINTS: usize = 14;

const REL_TOL: f64 = 1e-9;

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_points(points: &[Vec<f64>]) -> Result<()> {
    if let Some(first) = points.first() {
        let dim = first.len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::input("points have mixed dimensions"));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::input("point coordinates must be finite"));
        }
    }
    Ok(())
}

/// Optimal tour as positions into `points`, starting at 0, together with its
/// length. Among optimal tours the lexicographically least sequence wins.
pub fn tsp_solve(points: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    if n < 3 {
        return Err(Error::input(format!("a tour needs at least 3 points, got {n}")));
    }
    if n > MAX_TSP_POINTS {
        return Err(Error::input(format!("TSP capped at {MAX_TSP_POINTS} points, got {n}")));
    }
    check_points(points)?;
    let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| distance(&points[i], &points[j])).collect()).collect();

    // h[S][v]: cheapest way to visit every point outside S starting at v and
    // return to 0, where S (containing 0 and v) is already visited
    let full = (1usize << n) - 1;
    let mut h = vec![vec![f64::INFINITY; n]; 1 << n];
    for v in 1..n {
        h[full][v] = d[v][0];
    }
    for s in (1..full).rev() {
        if s & 1 == 0 {
            continue;
        }
        for v in 0..n {
            if s >> v & 1 == 0 || (v == 0 && s != 1) {
                continue;
            }
            let mut best = f64::INFINITY;
            for u in 1..n {
                if s >> u & 1 == 0 {
                    best = best.min(d[v][u] + h[s | 1 << u][u]);
                }
            }
            h[s][v] = best;
        }
    }
    let opt = h[1][0];

    let mut tour = vec![0usize];
    let (mut s, mut v, mut spent) = (1usize, 0usize, 0.0f64);
    while s != full {
        let next = (1..n)
            .filter(|&u| s >> u & 1 == 0)
            .find(|&u| spent + d[v][u] + h[s | 1 << u][u] <= opt * (1.0 + REL_TOL))
            .expect("some continuation attains the optimum");
        spent += d[v][next];
        s |= 1 << next;
        v = next;
        tour.push(next);
    }
    Ok((tour.clone(), tour_length(points, &tour)))
}

pub fn tour_length(points: &[Vec<f64>], tour: &[usize]) -> f64 {
    (0..tour.len())
        .map(|k| distance(&points[tour[k]], &points[tour[(k + 1) % tour.len()]]))
        .sum()
}

/// Tour cost extended to every subset: 0 for fewer than two points, twice
/// the distance for two.
pub fn tsp_cost(points: &[Vec<f64>]) -> Result<f64> {
    match points.len() {
        0 | 1 => Ok(0.0),
        2 => Ok(2.0 * distance(&points[0], &points[1])),
        _ => Ok(tsp_solve(points)?.1),
    }
}

pub(crate) fn dataset_points(dataset: &Dataset) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let mut ids = Vec::with_capacity(dataset.len());
    let mut points = Vec::with_capacity(dataset.len());
    for r in dataset.records() {
        match &r.payload {
            Payload::Point(p) => {
                ids.push(r.id);
                points.push(p.clone());
            }
            _ => return Err(Error::input(format!("record {} is not a point", r.id))),
        }
    }
    Ok((ids, points))
}

/// `f` for a points dataset.
pub fn tsp_value(dataset: &Dataset) -> Result<f64> {
    tsp_cost(&dataset_points(dataset)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Vec<f64>> {
        v.iter().map(|&(x, y)| vec![x, y]).collect()
    }

    #[test]
    fn unit_square() {
        let (tour, len) = tsp_solve(&pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(tour, vec![0, 1, 2, 3]);
        assert!((len - 4.0).abs() < 1e-12);
    }

    #[test]
    fn lexicographic_choice_among_optima() {
        // listing order scrambles the boundary; both orientations are optimal
        let (tour, _) = tsp_solve(&pts(&[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)])).unwrap();
        assert_eq!(tour, vec![0, 2, 1, 3]);
    }

    #[test]
    fn collinear() {
        let (_, len) = tsp_solve(&pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)])).unwrap();
        assert!((len - 4.0).abs() < 1e-12);
    }

    #[test]
    fn small_and_large_inputs() {
        assert!(tsp_solve(&pts(&[(0.0, 0.0), (1.0, 0.0)])).is_err());
        assert_eq!(tsp_cost(&pts(&[(0.0, 0.0), (3.0, 4.0)])).unwrap(), 10.0);
        assert_eq!(tsp_cost(&pts(&[(0.0, 0.0)])).unwrap(), 0.0);
        let many: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64, 0.0]).collect();
        assert!(tsp_solve(&many).is_err());
    }
}
