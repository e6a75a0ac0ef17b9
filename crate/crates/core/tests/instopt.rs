mod common;

use certiverify::certify::sum_value;
use certiverify::dataset::Dataset;
use certiverify::instopt::{
    catch_probabilities, check_feasibility, check_feasibility_exact, empirical_catch_rates, enumerate_violations,
    round_plan, solve_cert_lp, ViolationFamily,
};
use certiverify::lipschitz::{fractional_probabilities, lipschitz_plan, tsp_cost, tsp_weights, WeightVector};
use certiverify::lp::StandardLp;
use certiverify::numeric::{amplification_repetitions, Rational};
use common::{brute_force, q, BruteResult};
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_thirds() -> Rational {
    Rational::new(BigInt::from(2), BigInt::from(3))
}

/// Certification LP written directly in primal form for the vertex oracle:
/// `max -sum p  s.t.  -sum_{i in S} p_i <= -2/3, p_i <= 1`.
fn primal_lp(family: &ViolationFamily) -> StandardLp {
    let n = family.ids.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for m in family.masks() {
        a.push((0..n).map(|i| if m >> i & 1 == 1 { q(-1) } else { q(0) }).collect());
        b.push(-two_thirds());
    }
    for i in 0..n {
        a.push((0..n).map(|j| if i == j { q(1) } else { q(0) }).collect());
        b.push(q(1));
    }
    StandardLp { c: vec![q(-1); n], a, b }
}

fn antichain(n: usize, raw: &[u32]) -> ViolationFamily {
    let masks: Vec<u32> = raw.iter().map(|m| m % ((1 << n) - 1) + 1).collect();
    let sets = masks
        .iter()
        .map(|&m| (0..n).filter(|i| m >> i & 1 == 1).collect::<Vec<usize>>())
        .collect::<Vec<_>>();
    let mut fam = ViolationFamily {
        ids: (0..n).collect(),
        sets,
        minimal: false,
        vacuous: false,
    };
    fam.sets.sort();
    fam.sets.dedup();
    fam.minimized()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(80))]

    #[test]
    fn cert_lp_matches_vertex_enumeration(n in 1usize..=4, raw in prop::collection::vec(any::<u32>(), 1..5)) {
        let fam = antichain(n, &raw);
        let plan = solve_cert_lp(&fam).unwrap();
        prop_assert!(check_feasibility_exact(&plan.p, &fam));
        prop_assert!(plan.p.iter().all(|p| *p <= q(1)));
        prop_assert_eq!(brute_force(&primal_lp(&fam)), BruteResult::Optimal(-plan.objective.clone()));
    }

    #[test]
    fn sandwich_on_sum_instances(values in prop::collection::vec(1u32..20, 1..=7), eps_idx in 0usize..3) {
        let eps = [0.1, 0.2, 0.5][eps_idx];
        let xs: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let ds = Dataset::from_scalars(&xs).unwrap();
        let fam = enumerate_violations(&sum_value, &ds, eps, 10, true).unwrap();
        let plan = solve_cert_lp(&fam).unwrap();
        let rounded = round_plan(&plan);
        let total_q: f64 = rounded.base.iter().sum();
        let obj = plan.objective_f64();
        prop_assert!(obj <= total_q + 1e-12);
        prop_assert!(total_q <= 2.0 * obj + 1e-12);
        for c in catch_probabilities(&rounded, &fam) {
            prop_assert!(c >= 1.0 - (-4.0f64 / 3.0).exp() - 1e-12);
        }
    }

    #[test]
    fn minimizing_keeps_the_lp_optimum(n in 1usize..=5, raw in prop::collection::vec(any::<u32>(), 1..8)) {
        let masks: Vec<u32> = raw.iter().map(|m| m % ((1 << n) - 1) + 1).collect();
        let mut sets: Vec<Vec<usize>> = masks.iter().map(|&m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect();
        sets.sort();
        sets.dedup();
        let full = ViolationFamily { ids: (0..n).collect(), sets, minimal: false, vacuous: false };
        let a = solve_cert_lp(&full).unwrap();
        let b = solve_cert_lp(&full.minimized()).unwrap();
        prop_assert_eq!(a.objective, b.objective);
    }
}

#[test]
fn every_listed_set_is_violating() {
    let xs = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0];
    let ds = Dataset::from_scalars(&xs).unwrap();
    let total: f64 = xs.iter().sum();
    let fam = enumerate_violations(&sum_value, &ds, 0.2, 10, false).unwrap();
    let mut count = 0;
    for mask in 1u32..64 {
        let rest: f64 = (0..6).filter(|i| mask >> i & 1 == 0).map(|i| xs[i]).sum();
        let violating = rest == 0.0 || total / rest > 1.0 / (1.0 - 0.2);
        let set: Vec<usize> = (0..6).filter(|i| mask >> i & 1 == 1).collect();
        assert_eq!(fam.sets.contains(&set), violating, "set {set:?}");
        count += violating as usize;
    }
    assert_eq!(fam.sets.len(), count);
}

#[test]
fn lipschitz_vector_is_feasible_for_the_square() {
    let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
    let ds = Dataset::from_points(&pts).unwrap();
    let w = tsp_weights(&ds).unwrap();
    let f = |d: &Dataset| -> certiverify::Result<f64> {
        let pts: Vec<Vec<f64>> = d
            .records()
            .iter()
            .map(|r| match &r.payload {
                certiverify::Payload::Point(p) => p.clone(),
                _ => unreachable!(),
            })
            .collect();
        tsp_cost(&pts)
    };
    let fam = enumerate_violations(&f, &ds, 0.5, 10, false).unwrap();
    assert!(!fam.sets.is_empty());
    let p = fractional_probabilities(&w, 0.5).unwrap();
    assert!(check_feasibility(&p, &fam));
    assert!(!check_feasibility(&[0.0; 4], &fam));
}

#[test]
fn sum_is_lipschitz_in_its_values() {
    // w_i = x_i; the bridge then holds for every eps
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.gen_range(1..=8);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..10) as f64).collect();
        let ds = Dataset::from_scalars(&xs).unwrap();
        let total: f64 = xs.iter().sum();
        if total == 0.0 {
            continue;
        }
        let w = WeightVector::new((0..n).collect(), xs.clone(), total).unwrap();
        for eps in [0.1, 0.3, 0.7] {
            let fam = enumerate_violations(&sum_value, &ds, eps, 10, true).unwrap();
            assert!(check_feasibility(&fractional_probabilities(&w, eps).unwrap(), &fam));
        }
    }
}

#[test]
fn rounded_plan_catches_each_violating_set() {
    let ds = Dataset::from_scalars(&[5.0, 3.0, 1.0, 1.0, 0.5]).unwrap();
    let fam = enumerate_violations(&sum_value, &ds, 0.2, 10, false).unwrap();
    let rounded = round_plan(&solve_cert_lp(&fam).unwrap());
    let trials = 10_000;
    let rates = empirical_catch_rates(&rounded, &fam, trials, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    let sigma = (2.0f64 / 9.0 / trials as f64).sqrt();
    for (rate, set) in rates.iter().zip(&fam.sets) {
        assert!(*rate >= 2.0 / 3.0 - 3.0 * sigma, "set {set:?} caught at {rate}");
    }
}

#[test]
fn amplified_plan_misses_at_most_delta() {
    for delta in [0.5, 1.0 / 3.0, 0.1, 0.01, 1e-6] {
        let r = amplification_repetitions(delta).unwrap();
        assert!(3f64.powi(-(r as i32)) <= delta * (1.0 + 1e-12));
        assert!(r == 1 || 3f64.powi(-(r as i32 - 1)) > delta);
    }
    // spot check: three repetitions of a 2/3 base on a singleton
    let w = WeightVector::new(vec![0], vec![1.0], 4.0).unwrap();
    let plan = lipschitz_plan(&w, 0.5, 1.0 / 27.0).unwrap();
    assert_eq!(plan.repetitions, 3);
    assert!((plan.base[0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((plan.inclusion_probabilities()[0] - 26.0 / 27.0).abs() < 1e-12);
}
