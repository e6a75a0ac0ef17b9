//! Certification for functions that are Lipschitz in a weighted sense:
//! removing a set `S` of records moves `f` by at most `sum_{i in S} w_i`.
//!
//! The scheme verifies each record independently with a probability
//! proportional to its weight, repeated to amplify the success probability.

pub mod steiner;
pub mod tsp;

use rand::{Rng, RngCore};

use crate::dataset::{Dataset, Graph};
use crate::error::{Error, Result};
use crate::numeric::{amplification_repetitions, check_unit_open, compensated_sum};
use crate::oracle::{VerificationCache, VerificationOracle};
use crate::outcome::CertifyOutcome;
use crate::scheme::{charged_since, Certifier, PreparedCertifier};

pub use steiner::{steiner_cost, steiner_solve, steiner_value, ShortestPaths};
pub use tsp::{distance, tour_length, tsp_cost, tsp_solve, tsp_value};

/// Per-record Lipschitz weights together with `f` on all records.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub ids: Vec<usize>,
    pub weights: Vec<f64>,
    pub value: f64,
}

impl WeightVector {
    pub fn new(ids: Vec<usize>, weights: Vec<f64>, value: f64) -> Result<Self> {
        if ids.len() != weights.len() {
            return Err(Error::input("ids and weights differ in length"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::input("weights must be finite and nonnegative"));
        }
        Ok(WeightVector { ids, weights, value })
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn weight_of(&self, id: usize) -> Option<f64> {
        self.ids.iter().position(|&i| i == id).map(|p| self.weights[p])
    }
}

/// Independent verification plan: each round verifies record `i` with
/// probability `base[i]`, for `repetitions` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentPlan {
    pub ids: Vec<usize>,
    pub base: Vec<f64>,
    pub repetitions: u32,
}

impl IndependentPlan {
    /// Probability that record `i` is verified in at least one round.
    pub fn inclusion_probabilities(&self) -> Vec<f64> {
        self.base
            .iter()
            .map(|&q| 1.0 - (1.0 - q).powi(self.repetitions as i32))
            .collect()
    }

    /// Expected distinct verifications per run with no invalid record found.
    pub fn expected_verifications(&self) -> f64 {
        compensated_sum(self.inclusion_probabilities())
    }
}

/// `p_i = 2 w_i / (3 f eps)`.
pub fn fractional_probabilities(weights: &WeightVector, eps: f64) -> Result<Vec<f64>> {
    check_unit_open("epsilon", eps)?;
    if !(weights.value > 0.0 && weights.value.is_finite()) {
        return Err(Error::input(format!("Lipschitz plan needs f > 0, got {}", weights.value)));
    }
    Ok(weights
        .weights
        .iter()
        .map(|w| 2.0 * w / (3.0 * weights.value * eps))
        .collect())
}

/// Base round `q_i = min(2 p_i, 1)`, repeated `r` times with `3^-r <= delta`.
pub fn lipschitz_plan(weights: &WeightVector, eps: f64, delta: f64) -> Result<IndependentPlan> {
    let p = fractional_probabilities(weights, eps)?;
    Ok(IndependentPlan {
        ids: weights.ids.clone(),
        base: p.iter().map(|p| (2.0 * p).min(1.0)).collect(),
        repetitions: amplification_repetitions(delta)?,
    })
}

/// Runs the plan; verifications are memoized within the run and the first
/// invalid record ends it. `value` is reported on success.
pub fn run_plan<R: Rng + ?Sized>(
    plan: &IndependentPlan,
    value: f64,
    oracle: &mut VerificationOracle,
    rng: &mut R,
) -> Result<CertifyOutcome> {
    let before = oracle.ledger().verifications_charged;
    let mut cache = VerificationCache::new();
    for _ in 0..plan.repetitions {
        for (&id, &q) in plan.ids.iter().zip(&plan.base) {
            if q > 0.0 && rng.gen::<f64>() < q && !cache.verify(oracle, id)? {
                return Ok(CertifyOutcome::invalid(vec![id], charged_since(oracle, before)));
            }
        }
    }
    Ok(CertifyOutcome::certified(value, charged_since(oracle, before)))
}

/// Plan from the weights and run it. `f = 0` certifies vacuously.
pub fn certify_lipschitz<R: Rng + ?Sized>(
    weights: &WeightVector,
    oracle: &mut VerificationOracle,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<CertifyOutcome> {
    check_unit_open("epsilon", eps)?;
    check_unit_open("delta", delta)?;
    if weights.value == 0.0 {
        return Ok(CertifyOutcome::vacuous(0.0));
    }
    let plan = lipschitz_plan(weights, eps, delta)?;
    run_plan(&plan, weights.value, oracle, rng)
}

/// `w_i = d(prev, i) + d(i, next)` along the optimal tour; `sum w = 2 f`.
/// Fewer than three points fall back to the subset cost conventions.
pub fn tsp_weights(dataset: &Dataset) -> Result<WeightVector> {
    let (ids, points) = tsp::dataset_points(dataset)?;
    let n = points.len();
    match n {
        0 => WeightVector::new(ids, vec![], 0.0),
        1 => WeightVector::new(ids, vec![0.0], 0.0),
        2 => {
            let d = distance(&points[0], &points[1]);
            WeightVector::new(ids, vec![2.0 * d, 2.0 * d], 2.0 * d)
        }
        _ => {
            let (tour, len) = tsp_solve(&points)?;
            let mut w = vec![0.0; n];
            for k in 0..n {
                let (prev, cur, next) = (tour[(k + n - 1) % n], tour[k], tour[(k + 1) % n]);
                w[cur] = distance(&points[prev], &points[cur]) + distance(&points[cur], &points[next]);
            }
            WeightVector::new(ids, w, len)
        }
    }
}

/// Euler tour of the doubled tree: vertex sequence and cumulative distance at
/// each step, children visited in ascending vertex order.
fn euler_tour(tree: &[(usize, usize, f64)], root: usize, vertices: usize) -> (Vec<usize>, Vec<f64>) {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); vertices];
    for &(u, v, w) in tree {
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    for list in &mut adj {
        list.sort_by_key(|e| e.0);
    }
    let mut seq = vec![root];
    let mut at = vec![0.0];
    fn dfs(v: usize, parent: usize, adj: &[Vec<(usize, f64)>], seq: &mut Vec<usize>, at: &mut Vec<f64>) {
        for &(u, w) in &adj[v] {
            if u == parent {
                continue;
            }
            let base = *at.last().expect("nonempty");
            seq.push(u);
            at.push(base + w);
            dfs(u, v, adj, seq, at);
            let back = *at.last().expect("nonempty");
            seq.push(v);
            at.push(back + w);
        }
    }
    dfs(root, usize::MAX, &adj, &mut seq, &mut at);
    (seq, at)
}

/// Halved span weights from an Euler tour of the optimal Steiner tree.
///
/// Records are ordered by the first tour visit of their vertex; `w'_i` is
/// half the tour distance from the predecessor's visit to the successor's
/// visit, cyclically. `sum w' = 2 f`.
pub fn steiner_weights(dataset: &Dataset) -> Result<WeightVector> {
    let graph = dataset.graph().ok_or_else(|| Error::input("terminal dataset has no graph"))?;
    let (ids, vertices) = steiner::dataset_terminals(dataset)?;
    let (tree, cost) = steiner_solve(graph, &vertices)?;
    let n = ids.len();
    if n == 0 {
        return WeightVector::new(ids, vec![], 0.0);
    }
    let (seq, at) = euler_tour(&tree, vertices[0], graph.vertices);
    let tour_len = *at.last().expect("nonempty");
    let position = |v: usize| -> f64 {
        let k = seq.iter().position(|&x| x == v).expect("terminal lies on the tree");
        at[k]
    };
    let mut order: Vec<(f64, usize)> = (0..n).map(|k| (position(vertices[k]), k)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let gap = |from: f64, to: f64| if to >= from { to - from } else { tour_len - from + to };
    let mut w = vec![0.0; n];
    if n > 1 {
        for k in 0..n {
            let prev = order[(k + n - 1) % n].0;
            let next = order[(k + 1) % n].0;
            let cur = order[k].0;
            w[order[k].1] = (gap(prev, cur) + gap(cur, next)) / 2.0;
        }
    }
    WeightVector::new(ids, w, cost)
}

/// Lipschitz certifier for tour length over a points dataset.
#[derive(Debug, Clone, Copy)]
pub struct TspCertifier {
    pub eps: f64,
    pub delta: f64,
}

/// Lipschitz certifier for Steiner tree cost over a terminals dataset.
#[derive(Debug, Clone, Copy)]
pub struct SteinerCertifier {
    pub eps: f64,
    pub delta: f64,
}

struct PreparedPlan {
    plan: Option<IndependentPlan>,
    value: f64,
}

impl PreparedPlan {
    fn new(weights: WeightVector, eps: f64, delta: f64) -> Result<Self> {
        check_unit_open("delta", delta)?;
        let plan = if weights.value > 0.0 {
            Some(lipschitz_plan(&weights, eps, delta)?)
        } else {
            check_unit_open("epsilon", eps)?;
            None
        };
        Ok(PreparedPlan {
            plan,
            value: weights.value,
        })
    }
}

impl PreparedCertifier for PreparedPlan {
    fn run(&self, oracle: &mut VerificationOracle, rng: &mut dyn RngCore) -> Result<CertifyOutcome> {
        match &self.plan {
            Some(plan) => run_plan(plan, self.value, oracle, rng),
            None => Ok(CertifyOutcome::vacuous(self.value)),
        }
    }
}

impl Certifier for TspCertifier {
    fn name(&self) -> String {
        "tsp".into()
    }

    fn evaluate(&self, dataset: &Dataset) -> Result<f64> {
        tsp_value(dataset)
    }

    fn prepare<'a>(&'a self, dataset: &'a Dataset) -> Result<Box<dyn PreparedCertifier + 'a>> {
        Ok(Box::new(PreparedPlan::new(tsp_weights(dataset)?, self.eps, self.delta)?))
    }

    fn round_cap(&self, dataset: &Dataset) -> Result<u64> {
        Ok(dataset.len() as u64)
    }
}

impl Certifier for SteinerCertifier {
    fn name(&self) -> String {
        "steiner".into()
    }

    fn evaluate(&self, dataset: &Dataset) -> Result<f64> {
        steiner_value(dataset)
    }

    fn prepare<'a>(&'a self, dataset: &'a Dataset) -> Result<Box<dyn PreparedCertifier + 'a>> {
        Ok(Box::new(PreparedPlan::new(steiner_weights(dataset)?, self.eps, self.delta)?))
    }

    fn round_cap(&self, dataset: &Dataset) -> Result<u64> {
        Ok(dataset.len() as u64)
    }
}

/// Terminals dataset over `graph` with ids `0..terminals.len()`.
pub fn terminal_dataset(graph: Graph, terminals: &[usize]) -> Result<Dataset> {
    Dataset::from_terminals(graph, terminals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::GroundTruth;
    use crate::oracle::BudgetMode;
    use crate::outcome::Verdict;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plan_formula() {
        let w = WeightVector::new(vec![0, 1, 2, 3], vec![2.0; 4], 4.0).unwrap();
        // p_i = 4 / 6 = 2/3, so the doubled base probability saturates
        let p = fractional_probabilities(&w, 0.5).unwrap();
        assert!(p.iter().all(|p| (p - 2.0 / 3.0).abs() < 1e-15));
        let plan = lipschitz_plan(&w, 0.5, 1.0 / 3.0).unwrap();
        assert_eq!(plan.repetitions, 1);
        assert_eq!(plan.base, vec![1.0; 4]);
        assert!((plan.expected_verifications() - 4.0).abs() < 1e-12);

        // eps = 0.8 gives p = 5/12, q = 5/6
        let plan = lipschitz_plan(&w, 0.8, 1.0 / 3.0).unwrap();
        assert!(plan.base.iter().all(|q| (q - 5.0 / 6.0).abs() < 1e-15));
        let plan = lipschitz_plan(&w, 0.8, 0.1).unwrap();
        assert_eq!(plan.repetitions, 3);
    }

    #[test]
    fn zero_weights_verify_nothing() {
        let w = WeightVector::new(vec![0, 1], vec![0.0, 0.0], 1.0).unwrap();
        let plan = lipschitz_plan(&w, 0.5, 0.1).unwrap();
        let mut o = VerificationOracle::new(GroundTruth::new(vec![false, false]), BudgetMode::Weak);
        let out = run_plan(&plan, 1.0, &mut o, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.verdict, Verdict::Certified(1.0));
        assert_eq!(out.verifications_used, 0);
    }

    #[test]
    fn nonpositive_value_is_rejected() {
        let w = WeightVector::new(vec![0], vec![1.0], 0.0).unwrap();
        assert!(lipschitz_plan(&w, 0.5, 0.1).is_err());
    }

    #[test]
    fn square_weights() {
        let ds = Dataset::from_points(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let w = tsp_weights(&ds).unwrap();
        assert_eq!(w.weights, vec![2.0; 4]);
        assert_eq!(w.value, 4.0);
    }

    #[test]
    fn collinear_weights() {
        let ds = Dataset::from_points(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let w = tsp_weights(&ds).unwrap();
        assert_eq!(w.weights, vec![3.0, 2.0, 3.0]);
    }

    #[test]
    fn path_steiner_weights() {
        // a-b-c with terminals {a, c}
        let g = Graph::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let ds = terminal_dataset(g, &[0, 2]).unwrap();
        let w = steiner_weights(&ds).unwrap();
        assert_eq!(w.value, 2.0);
        assert!(w.weights[1] >= 2.0);
        assert!((w.total() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn single_terminal_has_zero_weight() {
        let g = Graph::new(2, vec![(0, 1, 1.0)]).unwrap();
        let w = steiner_weights(&terminal_dataset(g, &[1]).unwrap()).unwrap();
        assert_eq!(w.weights, vec![0.0]);
        assert_eq!(w.value, 0.0);
    }
}
