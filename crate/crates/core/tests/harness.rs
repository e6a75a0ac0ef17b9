use std::fs;

use certiverify::certify::SumSamplingPlan;
use certiverify::harness::{
    emit_report, format_sig6, gen_adversary, run_trials, worst_subset, AdversaryModel, CorrectionMode, ExperimentConfig,
    PlanContext, SchemeId, Task, TrialStats, REPORT_HEADER,
};
use certiverify::{Dataset, Error, GroundTruth};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(task: Task, adversary: AdversaryModel, xs: &[f64], invalid: &[usize], eps: f64, trials: u64) -> ExperimentConfig {
    ExperimentConfig {
        task,
        adversary,
        eps,
        delta: 0.1,
        trials,
        seed: 42,
        base: Some((Dataset::from_scalars(xs).unwrap(), GroundTruth::with_invalid(xs.len(), invalid))),
    }
}

fn without_time(mut s: TrialStats) -> TrialStats {
    s.wall_time = Default::default();
    s
}

#[test]
fn all_valid_never_fails() {
    for scheme in [SchemeId::Sum, SchemeId::Max, SchemeId::Average] {
        let stats = run_trials(&config(Task::Certify(scheme), AdversaryModel::None, &[3.0, 1.0, 4.0], &[], 0.3, 500)).unwrap();
        assert_eq!(stats.failure_rate, 0.0);
        assert_eq!(stats.mean_invalid_found, 0.0);
    }
}

#[test]
fn missed_invalid_record_is_scored_as_a_failure() {
    // [1, 1] with record 0 invalid at eps 0.4: the ratio 2 is outside
    // [0.6, 1/0.6], and k = 6 draws all miss with probability 2^-6
    let trials = 64_000;
    let stats = run_trials(&config(Task::Certify(SchemeId::Sum), AdversaryModel::AsLoaded, &[1.0, 1.0], &[0], 0.4, trials)).unwrap();
    let p = 0.5f64.powi(6);
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    assert!((stats.failure_rate - p).abs() <= 4.0 * sigma, "{} vs {p}", stats.failure_rate);
    // the endpoint ratio 2 = 1/(1-0.5) is inside, so never a failure
    let stats = run_trials(&config(Task::Certify(SchemeId::Sum), AdversaryModel::AsLoaded, &[1.0, 1.0], &[0], 0.5, 20_000)).unwrap();
    assert_eq!(stats.failures, 0);
}

#[test]
fn worst_subset_rate_matches_its_miss_probability() {
    let xs = [5.0, 4.0, 1.0, 1.0, 1.0, 1.0];
    let ds = Dataset::from_scalars(&xs).unwrap();
    let ctx = PlanContext { scheme: SchemeId::Sum, eps: 0.2, delta: 0.1 };
    let set = worst_subset(&ds, &ctx).unwrap();
    // brute force: among violating sets, the one with least sampled mass
    let total: f64 = xs.iter().sum();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 1u32..64 {
        let s: Vec<usize> = (0..6).filter(|i| mask >> i & 1 == 1).collect();
        let removed: f64 = s.iter().map(|&i| xs[i]).sum();
        let rest = total - removed;
        let violating = rest == 0.0 || total / rest > 1.0 / 0.8;
        if violating && best.as_ref().is_none_or(|(m, _)| removed < *m) {
            best = Some((removed, s));
        }
    }
    let (mass, brute) = best.unwrap();
    assert_eq!(set.iter().map(|&i| xs[i]).sum::<f64>(), mass);
    assert_eq!(set.len(), brute.len());

    let plan = SumSamplingPlan::new(&ds, 0.2, 0.1).unwrap();
    let miss = (1.0 - mass / total).powf(plan.sample_count as f64);
    let trials = 200_000;
    let stats = run_trials(&ExperimentConfig {
        trials,
        ..config(Task::Certify(SchemeId::Sum), AdversaryModel::WorstSubset, &xs, &[], 0.2, 1)
    })
    .unwrap();
    let sigma = (miss * (1.0 - miss) / trials as f64).sqrt();
    assert!((stats.failure_rate - miss).abs() <= 4.0 * sigma, "{} vs {miss}", stats.failure_rate);
    assert!(stats.failure_rate <= 0.1);
}

#[test]
fn replay_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let cfg = config(
            Task::Correct(CorrectionMode::Weak, SchemeId::Sum),
            AdversaryModel::UniformInvalid { fraction: 0.2 },
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0],
            &[],
            0.3,
            300,
        );
        let stats = run_trials(&cfg).unwrap();
        let path = dir.path().join(name);
        emit_report(std::slice::from_ref(&stats), &path, false).unwrap();
        (without_time(stats), fs::read(path).unwrap())
    };
    let (a, ra) = run("a.csv");
    let (b, rb) = run("b.csv");
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

#[test]
fn report_header_append_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let stats = run_trials(&config(Task::Certify(SchemeId::Sum), AdversaryModel::None, &[1.0, 2.0], &[], 0.5, 10)).unwrap();
    emit_report(std::slice::from_ref(&stats), &path, false).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], REPORT_HEADER.join(","));
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[..6], ["sum", "none", "0.5", "0.1", "10", "0"]);
    // k = 5 memoized draws over two records: at most 2 distinct verifications
    assert_eq!(fields[7], "2");
    assert_eq!(fields[8..], ["0", "42"]);

    emit_report(std::slice::from_ref(&stats), &path, true).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("scheme,")).count(), 1);

    let other = dir.path().join("other.csv");
    fs::write(&other, "a,b,c\n1,2,3\n").unwrap();
    let err = emit_report(&[stats], &other, true).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert_eq!(fs::read_to_string(&other).unwrap(), "a,b,c\n1,2,3\n");
}

#[test]
fn generative_adversaries_run_without_input() {
    let stats = run_trials(&ExperimentConfig {
        task: Task::Correct(CorrectionMode::Weak, SchemeId::MaxOfSums),
        adversary: AdversaryModel::parse("max-of-sums-hard", &[("c".into(), "2".into()), ("n".into(), "16".into())].into()).unwrap(),
        eps: 0.3,
        delta: 0.1,
        trials: 200,
        seed: 3,
        base: None,
    })
    .unwrap();
    assert!(stats.failure_rate <= 0.1);
    assert_eq!(stats.budget_violations, 0);
}

#[test]
fn tsp_outlier_is_caught() {
    let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
    let stats = run_trials(&ExperimentConfig {
        task: Task::Certify(SchemeId::LipschitzTsp),
        adversary: AdversaryModel::TspOutlier { multiplier: 20.0 },
        eps: 0.2,
        delta: 0.1,
        trials: 2_000,
        seed: 9,
        base: Some((Dataset::from_points(&pts).unwrap(), GroundTruth::all_valid(4))),
    })
    .unwrap();
    assert_eq!(stats.failures, 0);
    assert_eq!(stats.mean_invalid_found, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uniform_invalid_plants_the_rounded_count(n in 1usize..40, fraction in 0.0f64..=1.0, seed in any::<u64>()) {
        let ds = Dataset::from_scalars(&vec![1.0; n]).unwrap();
        let model = AdversaryModel::UniformInvalid { fraction };
        let ctx = PlanContext { scheme: SchemeId::Sum, eps: 0.5, delta: 0.1 };
        let (_, t) = gen_adversary(&model, Some((&ds, &GroundTruth::all_valid(n))), &ctx, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(t.invalid_ids().len(), (fraction * n as f64).round() as usize);
    }

    #[test]
    fn mass_concentrated_reaches_its_fraction(xs in prop::collection::vec(1u32..50, 1..20), fraction in 0.0f64..=1.0) {
        let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
        let ds = Dataset::from_scalars(&xs).unwrap();
        let model = AdversaryModel::MassConcentrated { fraction };
        let ctx = PlanContext { scheme: SchemeId::Sum, eps: 0.5, delta: 0.1 };
        let (_, t) = gen_adversary(&model, Some((&ds, &GroundTruth::all_valid(xs.len()))), &ctx, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let total: f64 = xs.iter().sum();
        let invalid = t.invalid_ids();
        let mass: f64 = invalid.iter().map(|&i| xs[i]).sum();
        prop_assert!(mass >= fraction * total);
        // every invalid record is at least as large as every valid one
        let min_bad = invalid.iter().map(|&i| xs[i]).fold(f64::INFINITY, f64::min);
        let max_good = (0..xs.len()).filter(|i| !invalid.contains(i)).map(|i| xs[i]).fold(0.0, f64::max);
        prop_assert!(invalid.is_empty() || min_bad >= max_good);
    }

    #[test]
    fn sig6_keeps_six_significant_digits(x in 1e-6f64..1e9) {
        let s = format_sig6(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x, "{s} vs {x}");
    }
}
