mod common;

use certiverify::dataset::{GroundTruth, LpForm};
use certiverify::lp::{
    certify_covering, certify_general, certify_packing, general_verification_set, is_feasible, solve_lp,
    solve_standard, LpInstance, StandardLp,
};
use certiverify::numeric::Rational;
use certiverify::oracle::{BudgetMode, VerificationOracle};
use certiverify::outcome::Verdict;
use certiverify::Error;
use common::{brute_force, q, qs, BruteResult};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

fn standard_lp(n: usize, m: usize, lo: i64) -> impl Strategy<Value = StandardLp> {
    let entry = (lo..=4i64, 1..=3i64).prop_map(|(a, d)| ratio(a, d));
    (
        prop::collection::vec(entry.clone(), n),
        prop::collection::vec(prop::collection::vec(entry.clone(), n), m),
        prop::collection::vec(entry, m),
    )
        .prop_map(|(c, a, b)| StandardLp { c, a, b })
}

fn any_standard_lp() -> impl Strategy<Value = StandardLp> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| standard_lp(n, m, -3))
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn instance_from(c: Vec<Rational>, rows: Vec<Vec<Rational>>, b: Vec<Rational>, form: LpForm) -> LpInstance {
    LpInstance::general(c, rows, b, form).unwrap()
}

fn oracle(mask: Vec<bool>) -> VerificationOracle {
    VerificationOracle::new(GroundTruth::new(mask), BudgetMode::Weak)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn simplex_matches_vertex_enumeration(lp in any_standard_lp()) {
        let brute = brute_force(&lp);
        match solve_standard(&lp) {
            Ok(sol) => {
                prop_assert_eq!(&brute, &BruteResult::Optimal(sol.value.clone()));
                // primal feasibility
                prop_assert!(sol.y.iter().all(|v| !v.is_negative()));
                for (row, b) in lp.a.iter().zip(&lp.b) {
                    prop_assert!(dot(row, &sol.y) <= *b);
                }
                // dual feasibility and strong duality
                prop_assert!(sol.duals.iter().all(|u| !u.is_negative()));
                for j in 0..lp.c.len() {
                    let col: Rational = (0..lp.b.len()).map(|i| &lp.a[i][j] * &sol.duals[i]).sum();
                    prop_assert!(col >= lp.c[j]);
                }
                prop_assert_eq!(dot(&lp.b, &sol.duals), sol.value);
            }
            Err(Error::Infeasible) => prop_assert_eq!(brute, BruteResult::Infeasible),
            Err(Error::Unbounded) => prop_assert_eq!(brute, BruteResult::Unbounded),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn covering_primal_equals_dual_packing(lp in (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| standard_lp(n, m, 0))) {
        // records own (c_i, a_i*) with n records and m shared rows
        let rows: Vec<Vec<Rational>> = (0..lp.c.len()).map(|i| (0..lp.b.len()).map(|j| lp.a[j][i].clone()).collect()).collect();
        let cover = LpInstance::covering(lp.c.clone(), rows, lp.b.clone()).unwrap();
        match solve_lp(&cover) {
            Ok(sol) => {
                let dual = solve_lp(&cover.dual()).unwrap();
                prop_assert_eq!(&sol.value, &dual.value);
                prop_assert!(is_feasible(&cover, &sol.primal));
                prop_assert!(is_feasible(&cover.dual(), &dual.primal));
            }
            Err(Error::Infeasible) => {
                // some demand c_i > 0 has an all-zero row
                let hopeless = (0..cover.n()).any(|i| cover.c[i].is_positive() && cover.rows[i].iter().all(Zero::is_zero));
                prop_assert!(hopeless);
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn packing_value_is_monotone_under_removal(
        lp in (1usize..=5, 1usize..=3).prop_flat_map(|(n, m)| standard_lp(n, m, 0)),
        drop_mask in prop::collection::vec(any::<bool>(), 5),
    ) {
        let n = lp.c.len();
        let rows: Vec<Vec<Rational>> = (0..n).map(|i| (0..lp.b.len()).map(|j| lp.a[j][i].clone()).collect()).collect();
        let pack = LpInstance::packing(lp.c.clone(), rows, lp.b.clone()).unwrap();
        let Ok(full) = solve_lp(&pack) else { return Ok(()) };
        let kept: Vec<usize> = (0..n).filter(|&i| !drop_mask[i]).collect();
        let sub = solve_lp(&pack.select_positions(&kept)).unwrap();
        let restricted: Rational = kept.iter().map(|&i| &full.primal[i] * &pack.c[i]).sum();
        prop_assert!(full.value >= sub.value);
        prop_assert!(sub.value >= restricted);
    }

    #[test]
    fn general_optimum_survives_removal_of_unverified_records(
        lp in (1usize..=3, 2usize..=6).prop_flat_map(|(m, n)| standard_lp(n, m, -3)),
        mask in any::<u64>(),
        covering in any::<bool>(),
    ) {
        let n = lp.c.len();
        let rows: Vec<Vec<Rational>> = (0..n).map(|i| (0..lp.b.len()).map(|j| lp.a[j][i].clone()).collect()).collect();
        let form = if covering { LpForm::Covering } else { LpForm::Packing };
        let inst = instance_from(lp.c.clone(), rows, lp.b.clone(), form);
        let Ok(sol) = solve_lp(&inst) else { return Ok(()) };
        let verified = general_verification_set(&inst, &sol);
        prop_assert!(verified.len() <= inst.m());
        let kept: Vec<usize> = (0..n).filter(|i| verified.contains(i) || (mask >> i) & 1 == 1).collect();
        let sub = solve_lp(&inst.select_positions(&kept)).unwrap();
        prop_assert_eq!(sub.value, sol.value);
    }
}

#[test]
fn packing_example_value() {
    // vertex enumeration over {y1+y2 <= 1}: (0,0)->0, (1,0)->2, (0,1)->1
    let inst = LpInstance::packing(qs(&[2, 1]), vec![qs(&[1]), qs(&[1])], qs(&[1])).unwrap();
    let sol = solve_lp(&inst).unwrap();
    assert_eq!(brute_force(&inst.standard_form()), BruteResult::Optimal(q(2)));
    assert_eq!(sol.value, q(2));
    assert_eq!(sol.primal, qs(&[1, 0]));
}

#[test]
fn covering_example_value() {
    let inst = LpInstance::covering(qs(&[1, 1]), vec![qs(&[1]), qs(&[1])], qs(&[1])).unwrap();
    assert_eq!(brute_force(&inst.standard_form()), BruteResult::Optimal(q(-1)));
    assert_eq!(solve_lp(&inst).unwrap().value, q(1));
}

#[test]
fn covering_with_invalid_duplicate_stays_sound() {
    let inst = LpInstance::covering(qs(&[1, 1]), vec![qs(&[1]), qs(&[1])], qs(&[1])).unwrap();
    let without = solve_lp(&inst.select_positions(&[0])).unwrap();
    assert_eq!(without.value, q(1));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let mut o = oracle(vec![true, false]);
        let out = certify_covering(&inst, &mut o, 0.5, 0.1, &mut rng).unwrap();
        match out.verdict {
            Verdict::Certified(v) => assert_eq!(v, 1.0),
            Verdict::InvalidFound(ids) => assert_eq!(ids, vec![1]),
            Verdict::Failed => panic!("failed"),
        }
    }
}

#[test]
fn covering_sole_binding_invalid_demand_is_caught() {
    // record 1 demands x >= 5; record 0 only x >= 1
    let inst = LpInstance::covering(qs(&[1, 5]), vec![qs(&[1]), qs(&[1])], qs(&[1])).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let caught = (0..1000)
        .filter(|_| {
            let mut o = oracle(vec![true, false]);
            !certify_covering(&inst, &mut o, 0.2, 0.05, &mut rng).unwrap().is_certified()
        })
        .count();
    assert_eq!(caught, 1000);
}

#[test]
fn packing_miss_rate_respects_the_analytic_bound() {
    // ten unit records under y_i <= 1 each; three invalid carry 30% of the mass
    let n = 10;
    let rows: Vec<Vec<Rational>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { q(1) } else { q(0) }).collect())
        .collect();
    let inst = LpInstance::packing(vec![q(1); n], rows, vec![q(1); n]).unwrap();
    let mask: Vec<bool> = (0..n).map(|i| i >= 3).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trials = 20_000;
    let misses = (0..trials)
        .filter(|_| {
            let mut o = oracle(mask.clone());
            certify_packing(&inst, &mut o, 0.1, 0.1, &mut rng).unwrap().is_certified()
        })
        .count();
    // 0.7^24 ≈ 1.9e-4, about 4 expected misses
    assert!(misses <= 15, "misses {misses}");
}

#[test]
fn all_valid_packing_always_certifies() {
    let inst = LpInstance::packing(qs(&[3, 2, 1]), vec![qs(&[1, 2]), qs(&[2, 1]), qs(&[1, 1])], qs(&[4, 5])).unwrap();
    let value = solve_lp(&inst).unwrap().value;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let mut o = oracle(vec![true; 3]);
        let out = certify_packing(&inst, &mut o, 0.3, 0.1, &mut rng).unwrap();
        assert_eq!(out.verdict, Verdict::Certified(certiverify::numeric::rational_to_f64(&value)));
    }
}

#[test]
fn general_certifier_reports_every_invalid_in_the_verified_set() {
    let inst = instance_from(qs(&[1, 1, 1]), vec![qs(&[1, 0]), qs(&[0, 1]), qs(&[1, 1])], qs(&[1, 1]), LpForm::Covering);
    let mut o = oracle(vec![false, false, true]);
    let out = certify_general(&inst, &mut o).unwrap();
    assert_eq!(out.verdict, Verdict::InvalidFound(vec![0, 1]));
    assert_eq!(out.verifications_used, 2);
}

#[test]
fn general_degenerate_vertex_verifies_at_most_m() {
    // x >= 1 written three times plus x + 0 >= 1: four tight constraints, m = 1
    let inst = instance_from(qs(&[1, 1, 1, 1]), vec![qs(&[1]); 4], qs(&[1]), LpForm::Covering);
    let sol = solve_lp(&inst).unwrap();
    assert_eq!(sol.tight.len(), 4);
    let verified = general_verification_set(&inst, &sol);
    assert_eq!(verified.len(), 1);
    let kept = verified.clone();
    assert_eq!(solve_lp(&inst.select_positions(&kept)).unwrap().value, sol.value);
}

#[test]
fn lp_dataset_roundtrip_through_instance() {
    let inst = LpInstance::packing(vec![ratio(7, 2), q(1)], vec![qs(&[1, 0]), qs(&[0, 1])], vec![q(1), ratio(1, 3)]).unwrap();
    let ds = inst.to_dataset().unwrap();
    assert_eq!(LpInstance::from_dataset(&ds).unwrap(), inst);
    assert_eq!(solve_lp(&inst).unwrap().value, ratio(7, 2) + ratio(1, 3));
}
