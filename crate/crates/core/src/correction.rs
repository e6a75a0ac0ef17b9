//! Correction schemes: recover an accurate value despite invalid records.
//!
//! Weak correction drives a random walk with a certifier: a caught invalid
//! record is removed and the walk steps right, a clean round steps left.
//! Strong correction works when invalid verifications are free.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::certify::SumSamplingPlan;
use crate::dataset::{Dataset, Record};
use crate::error::{Error, Result};
use crate::numeric::{check_unit_open, walk_start};
use crate::oracle::{BudgetMode, VerificationOracle};
use crate::outcome::Verdict;
use crate::scheme::Certifier;

/// Acceptance threshold of [`test_subset`]: the midpoint of 1/3 and 2/5.
pub const TEST_THRESHOLD: (u64, u64) = (11, 30);

/// State of the weak-correction random walk.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    pub start: u32,
    pub position: u32,
    pub removed_ids: BTreeSet<usize>,
    /// Removed ids at the start of each round, one entry per round.
    pub snapshots: Vec<Vec<usize>>,
    pub rounds: u64,
    pub catches: u64,
}

impl WalkState {
    pub fn new(start: u32, removed: BTreeSet<usize>) -> Self {
        WalkState {
            start,
            position: start,
            removed_ids: removed,
            snapshots: Vec::new(),
            rounds: 0,
            catches: 0,
        }
    }

    /// Distinct states visited, in order of first visit.
    pub fn distinct_snapshots(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for s in &self.snapshots {
            if out.last() != Some(s) {
                out.push(s.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionOutcome {
    pub value: f64,
    /// Ids removed as invalid, all verified.
    pub removed: Vec<usize>,
    pub rounds: u64,
    pub catches: u64,
    pub verifications: u64,
    /// Per-attempt verification cap for the weak budget law
    /// `verifications <= (catches + 1) * attempt_cost`.
    pub attempt_cost: u64,
}

fn require_mode(oracle: &VerificationOracle, mode: BudgetMode) -> Result<()> {
    if oracle.mode() != mode {
        return Err(Error::Config(format!("this scheme needs a {mode:?} budget oracle")));
    }
    Ok(())
}

/// Runs the walk from `start` until it reaches 0. The certifier should be
/// configured with failure probability 1/3 per round.
pub fn random_walk<R: Rng>(
    certifier: &dyn Certifier,
    dataset: &Dataset,
    oracle: &mut VerificationOracle,
    start: u32,
    removed: BTreeSet<usize>,
    rng: &mut R,
) -> Result<WalkState> {
    let mut state = WalkState::new(start, removed);
    let limit = start as u64 + 2 * dataset.len() as u64;
    while state.position > 0 {
        if state.rounds >= limit {
            return Err(Error::CorrectionFailure(format!("random walk exceeded {limit} rounds")));
        }
        let current = dataset.restrict(state.removed_ids.iter().copied());
        state.snapshots.push(state.removed_ids.iter().copied().collect());
        oracle.begin_round();
        let outcome = certifier.prepare(&current)?.run(oracle, rng)?;
        state.rounds += 1;
        match outcome.verdict {
            Verdict::InvalidFound(ids) => {
                state.removed_ids.extend(ids);
                state.catches += 1;
                state.position += 1;
            }
            _ => state.position -= 1,
        }
    }
    Ok(state)
}

/// `max(C, 2) * round_cap`: with `c` catches the walk runs `C + 2c` rounds,
/// and `C + 2c <= (c + 1) * max(C, 2)`.
fn attempt_cost(certifier: &dyn Certifier, dataset: &Dataset, start: u32) -> Result<u64> {
    Ok(u64::from(start.max(2)) * certifier.round_cap(dataset)?)
}

/// Weak correction for `f` that never increases when records are removed.
/// Returns `f` on the records that survive the walk.
pub fn weak_correct_monotone<R: Rng>(
    certifier: &dyn Certifier,
    dataset: &Dataset,
    oracle: &mut VerificationOracle,
    delta: f64,
    rng: &mut R,
) -> Result<CorrectionOutcome> {
    require_mode(oracle, BudgetMode::Weak)?;
    let start = walk_start(delta)?;
    let before = oracle.ledger().verifications_charged;
    let state = random_walk(certifier, dataset, oracle, start, BTreeSet::new(), rng)?;
    let survivors = dataset.restrict(state.removed_ids.iter().copied());
    Ok(CorrectionOutcome {
        value: certifier.evaluate(&survivors)?,
        removed: state.removed_ids.into_iter().collect(),
        rounds: state.rounds,
        catches: state.catches,
        verifications: oracle.ledger().verifications_charged - before,
        attempt_cost: attempt_cost(certifier, dataset, start)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub accepted: bool,
    pub runs: u64,
    pub clean: u64,
    /// Invalid ids the certifier exhibited during the test.
    pub caught: BTreeSet<usize>,
}

/// Number of certifier runs used by [`test_subset`] at error `gamma`.
pub fn test_runs(gamma: f64) -> Result<u64> {
    check_unit_open("gamma", gamma)?;
    Ok((450.0 * (2.0 / gamma).ln()).ceil() as u64)
}

/// Accepts iff at least 11/30 of `m = ceil(450 ln(2/gamma))` certifier runs
/// find no invalid record. Runs stop once the outcome is decided.
pub fn test_subset<R: Rng>(
    certifier: &dyn Certifier,
    snapshot: &Dataset,
    gamma: f64,
    oracle: &mut VerificationOracle,
    rng: &mut R,
) -> Result<TestResult> {
    let m = test_runs(gamma)?;
    let (num, den) = TEST_THRESHOLD;
    let needed = (num * m).div_ceil(den);
    let prepared = certifier.prepare(snapshot)?;
    let mut result = TestResult {
        accepted: false,
        runs: 0,
        clean: 0,
        caught: BTreeSet::new(),
    };
    while result.runs < m {
        if result.clean >= needed {
            break;
        }
        if result.clean + (m - result.runs) < needed {
            break;
        }
        oracle.begin_round();
        let outcome = prepared.run(oracle, rng)?;
        result.runs += 1;
        match outcome.verdict {
            Verdict::InvalidFound(ids) => result.caught.extend(ids),
            _ => result.clean += 1,
        }
    }
    result.accepted = result.clean >= needed;
    Ok(result)
}

/// Outer repetitions of the general scheme: `ceil(9 ln(1/delta))`.
pub fn general_repetitions(delta: f64) -> Result<u64> {
    check_unit_open("delta", delta)?;
    Ok(((9.0 * (1.0 / delta).ln()).ceil() as u64).max(1))
}

/// One pass of candidate elimination. `None` when no candidate survives.
fn select_candidate<R: Rng>(
    certifier: &dyn Certifier,
    dataset: &Dataset,
    candidates: Vec<Vec<usize>>,
    oracle: &mut VerificationOracle,
    caught: &mut BTreeSet<usize>,
    rng: &mut R,
) -> Result<Option<Vec<usize>>> {
    let k = candidates.len();
    if k == 1 {
        return Ok(candidates.into_iter().next());
    }
    let mut test = |removed: &Vec<usize>, gamma: f64, rng: &mut R, oracle: &mut VerificationOracle| -> Result<bool> {
        let snapshot = dataset.restrict(removed.iter().copied());
        let r = test_subset(certifier, &snapshot, gamma, oracle, rng)?;
        caught.extend(r.caught);
        Ok(r.accepted)
    };
    let rounds = (k as f64).log2().log2().ceil().max(0.0) as i32;
    let mut survivors = candidates;
    for t in 1..=rounds {
        let before = survivors.len();
        let mut next = Vec::new();
        for c in survivors {
            if test(&c, 10f64.powi(-t), rng, oracle)? {
                next.push(c);
            }
        }
        survivors = next;
        if survivors.is_empty() {
            return Ok(None);
        }
        if survivors.len() * 2 > before {
            let pick = rng.gen_range(0..survivors.len());
            return Ok(Some(survivors.swap_remove(pick)));
        }
    }
    let gamma = (1.0 / (k * k) as f64).min(0.1);
    let mut passers = Vec::new();
    for c in survivors {
        if test(&c, gamma, rng, oracle)? {
            passers.push(c);
        }
    }
    if passers.is_empty() {
        return Ok(None);
    }
    let pick = rng.gen_range(0..passers.len());
    Ok(Some(passers.swap_remove(pick)))
}

/// Weak correction for arbitrary `f`. Each repetition walks, then tests the
/// states it visited and keeps one that the certifier accepts often; the
/// answer is the lower median over repetitions. Invalid ids exhibited at any
/// point stay removed for later repetitions.
pub fn weak_correct_general<R: Rng>(
    certifier: &dyn Certifier,
    dataset: &Dataset,
    oracle: &mut VerificationOracle,
    delta: f64,
    rng: &mut R,
) -> Result<CorrectionOutcome> {
    require_mode(oracle, BudgetMode::Weak)?;
    let start = walk_start(delta)?;
    let reps = general_repetitions(delta)?;
    let before = oracle.ledger().verifications_charged;
    let mut caught: BTreeSet<usize> = BTreeSet::new();
    let mut values = Vec::new();
    let (mut rounds, mut catches) = (0u64, 0u64);
    for _ in 0..reps {
        let state = random_walk(certifier, dataset, oracle, start, caught.clone(), rng)?;
        rounds += state.rounds;
        catches += state.catches;
        caught.extend(state.removed_ids.iter().copied());
        let candidates = state.distinct_snapshots();
        if let Some(choice) = select_candidate(certifier, dataset, candidates, oracle, &mut caught, rng)? {
            values.push(certifier.evaluate(&dataset.restrict(choice))?);
        }
    }
    if values.is_empty() {
        return Err(Error::CorrectionFailure("no candidate subset passed its test".into()));
    }
    values.sort_by(f64::total_cmp);
    Ok(CorrectionOutcome {
        value: values[(values.len() - 1) / 2],
        removed: caught.into_iter().collect(),
        rounds,
        catches,
        verifications: oracle.ledger().verifications_charged - before,
        attempt_cost: attempt_cost(certifier, dataset, start)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongSumOutcome {
    pub estimate: f64,
    /// Draws made, valid or not.
    pub samples: u64,
    pub valid_hits: u64,
    pub vacuous: bool,
}

/// `ceil(ln(2/delta) / eps^2)` valid hits for the strong sum estimator.
pub fn strong_sum_target(eps: f64, delta: f64) -> Result<u64> {
    check_unit_open("epsilon", eps)?;
    check_unit_open("delta", delta)?;
    Ok(((2.0 / delta).ln() / (eps * eps)).ceil() as u64)
}

/// Samples ids in proportion to value, verifying each draw, until `k` valid
/// draws are seen after `M` draws; returns `(k / M) * sum_N x`. Every valid
/// draw is charged, so exactly `k` verifications are charged.
pub fn strong_correct_sum<R: Rng>(
    dataset: &Dataset,
    oracle: &mut VerificationOracle,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<StrongSumOutcome> {
    require_mode(oracle, BudgetMode::Strong)?;
    let k = strong_sum_target(eps, delta)?;
    let plan = SumSamplingPlan::new(dataset, eps, delta)?;
    if plan.ids.is_empty() {
        return Ok(StrongSumOutcome {
            estimate: 0.0,
            samples: 0,
            valid_hits: 0,
            vacuous: true,
        });
    }
    let cap = 100 * k;
    let (mut samples, mut hits) = (0u64, 0u64);
    while hits < k {
        if samples >= cap {
            return Err(Error::CorrectionFailure(format!(
                "only {hits} of {k} valid records after {cap} draws"
            )));
        }
        let id = plan.draw(rng).expect("nonempty plan");
        samples += 1;
        if oracle.verify(id)? {
            hits += 1;
        }
    }
    Ok(StrongSumOutcome {
        estimate: k as f64 / samples as f64 * plan.total,
        samples,
        valid_hits: hits,
        vacuous: false,
    })
}

/// Uniform valid record among those matching `predicate`, or `None`.
/// Records are scanned in a uniformly shuffled order and only matches are
/// verified, so at most one verification is charged in strong mode.
pub fn cond_sample<R: Rng>(
    dataset: &Dataset,
    oracle: &mut VerificationOracle,
    predicate: &dyn Fn(&Record) -> bool,
    rng: &mut R,
) -> Result<Option<Record>> {
    require_mode(oracle, BudgetMode::Strong)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(rng);
    for pos in order {
        let record = &dataset.records()[pos];
        if predicate(record) && oracle.verify(record.id)? {
            return Ok(Some(record.clone()));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongMaxOutcome {
    pub value: f64,
    pub id: usize,
    /// Conditional samples that returned a record.
    pub iterations: u64,
}

/// Exact maximum over the valid records, via repeated conditional samples
/// of records above the current best.
pub fn strong_correct_max<R: Rng>(
    dataset: &Dataset,
    oracle: &mut VerificationOracle,
    rng: &mut R,
) -> Result<StrongMaxOutcome> {
    require_mode(oracle, BudgetMode::Strong)?;
    dataset.scalars()?;
    let mut best: Option<(usize, f64)> = None;
    let mut iterations = 0;
    loop {
        let floor = best.map_or(f64::NEG_INFINITY, |b| b.1);
        let above = |r: &Record| r.payload.as_scalar().is_some_and(|x| x > floor);
        match cond_sample(dataset, oracle, &above, rng)? {
            Some(r) => {
                iterations += 1;
                best = Some((r.id, r.payload.as_scalar().expect("scalar record")));
            }
            None => {
                return best
                    .map(|(id, value)| StrongMaxOutcome { value, id, iterations })
                    .ok_or_else(|| Error::CorrectionFailure("no valid record".into()));
            }
        }
    }
}
