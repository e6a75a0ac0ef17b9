//! Certifiers for sum, max, max-of-sums and average over scalar records.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore};

use crate::dataset::{scalar_total, Dataset};
use crate::error::{Error, Result};
use crate::numeric::{certification_sample_count, check_unit_open, compensated_sum};
use crate::oracle::{VerificationCache, VerificationOracle};
use crate::outcome::CertifyOutcome;
use crate::scheme::{charged_since, Certifier, PreparedCertifier};

/// `p_i = x_i / Σ x_j` over the nonzero records, and the draw count `k`.
#[derive(Debug, Clone)]
pub struct SumSamplingPlan {
    pub ids: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub sample_count: u64,
    pub total: f64,
    sampler: Option<WeightedIndex<f64>>,
}

impl SumSamplingPlan {
    pub fn new(dataset: &Dataset, eps: f64, delta: f64) -> Result<Self> {
        let (ids, weights) = dataset.scalars()?.into_iter().unzip();
        Self::from_weights(ids, weights, eps, delta)
    }

    /// Plan over explicit nonnegative weights; zero weights are dropped.
    pub fn from_weights(ids: Vec<usize>, weights: Vec<f64>, eps: f64, delta: f64) -> Result<Self> {
        let sample_count = certification_sample_count(eps, delta)?;
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::input("sampling weights must be finite and nonnegative"));
        }
        let (ids, weights): (Vec<usize>, Vec<f64>) = ids.into_iter().zip(weights).filter(|&(_, x)| x > 0.0).unzip();
        let total = compensated_sum(weights.iter().copied());
        let probabilities = weights.iter().map(|w| w / total).collect();
        let sampler = if ids.is_empty() {
            None
        } else {
            Some(WeightedIndex::new(&weights).map_err(|e| Error::input(e.to_string()))?)
        };
        Ok(SumSamplingPlan {
            ids,
            probabilities,
            sample_count,
            total,
            sampler,
        })
    }

    pub fn probability_of(&self, id: usize) -> f64 {
        self.ids
            .iter()
            .position(|&i| i == id)
            .map_or(0.0, |pos| self.probabilities[pos])
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        self.sampler.as_ref().map(|s| self.ids[s.sample(rng)])
    }

    /// Draws `k` ids i.i.d. from `p`, verifying each (memoized) and stopping
    /// at the first invalid one. `value` is reported on success.
    pub(crate) fn run<R: Rng + ?Sized>(&self, value: f64, oracle: &mut VerificationOracle, rng: &mut R) -> Result<CertifyOutcome> {
        if self.sampler.is_none() {
            return Ok(CertifyOutcome::vacuous(value));
        }
        let before = oracle.ledger().verifications_charged;
        let mut cache = VerificationCache::new();
        for _ in 0..self.sample_count {
            let id = self.draw(rng).expect("nonempty plan");
            if !cache.verify(oracle, id)? {
                return Ok(CertifyOutcome::invalid(vec![id], charged_since(oracle, before)));
            }
        }
        Ok(CertifyOutcome::certified(value, charged_since(oracle, before)))
    }
}

/// Σ_{i∈N} x_i, compensated.
pub fn sum_value(dataset: &Dataset) -> Result<f64> {
    scalar_total(dataset)
}

/// Importance-sampling certifier for the sum.
pub fn certify_sum<R: Rng + ?Sized>(
    dataset: &Dataset,
    oracle: &mut VerificationOracle,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<CertifyOutcome> {
    let plan = SumSamplingPlan::new(dataset, eps, delta)?;
    plan.run(plan.total, oracle, rng)
}

/// Lowest id among the largest values.
fn argmax(dataset: &Dataset) -> Result<Option<(usize, f64)>> {
    Ok(dataset
        .scalars()?
        .into_iter()
        .fold(None, |best: Option<(usize, f64)>, (id, x)| match best {
            Some((_, bx)) if bx >= x => best,
            _ => Some((id, x)),
        }))
}

/// Verifies the argmax record; exactly one verification.
pub fn certify_max(dataset: &Dataset, oracle: &mut VerificationOracle) -> Result<CertifyOutcome> {
    let (id, x) = argmax(dataset)?.ok_or_else(|| Error::input("max of an empty dataset"))?;
    let before = oracle.ledger().verifications_charged;
    if oracle.verify(id)? {
        Ok(CertifyOutcome::certified(x, charged_since(oracle, before)))
    } else {
        Ok(CertifyOutcome::invalid(vec![id], charged_since(oracle, before)))
    }
}

/// Group sums keyed by label; every record must carry a label.
pub fn group_sums(dataset: &Dataset) -> Result<BTreeMap<String, (f64, Vec<usize>)>> {
    let mut members: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for r in dataset.records() {
        let label = r
            .group
            .as_ref()
            .ok_or_else(|| Error::input(format!("record {} has no group label", r.id)))?;
        let x = r
            .payload
            .as_scalar()
            .ok_or_else(|| Error::input("max-of-sums needs scalar records"))?;
        members.entry(label.clone()).or_default().push((r.id, x));
    }
    Ok(members
        .into_iter()
        .map(|(label, rs)| {
            let total = compensated_sum(rs.iter().map(|&(_, x)| x));
            (label, (total, rs.into_iter().map(|(id, _)| id).collect()))
        })
        .collect())
}

/// The heaviest group (least label on ties), or `None` for an empty dataset.
pub fn heaviest_group(dataset: &Dataset) -> Result<Option<(String, f64, Vec<usize>)>> {
    let mut best: Option<(String, f64, Vec<usize>)> = None;
    for (label, (total, ids)) in group_sums(dataset)? {
        if best.as_ref().is_none_or(|(_, t, _)| total > *t) {
            best = Some((label, total, ids));
        }
    }
    Ok(best)
}

pub fn max_of_sums_value(dataset: &Dataset) -> Result<f64> {
    Ok(heaviest_group(dataset)?.map_or(0.0, |(_, total, _)| total))
}

/// Certifies the sum of the heaviest group.
pub fn certify_max_of_sums<R: Rng + ?Sized>(
    dataset: &Dataset,
    oracle: &mut VerificationOracle,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<CertifyOutcome> {
    check_unit_open("epsilon", eps)?;
    check_unit_open("delta", delta)?;
    match heaviest_group(dataset)? {
        None => Err(Error::input("max-of-sums needs at least one group")),
        Some((_, total, ids)) => {
            let plan = SumSamplingPlan::new(&dataset.select(ids), eps, delta)?;
            plan.run(total, oracle, rng)
        }
    }
}

pub fn average_value(dataset: &Dataset) -> Result<f64> {
    let n = dataset.len();
    Ok(if n == 0 { 0.0 } else { sum_value(dataset)? / n as f64 })
}

/// Average as a ratio of two certified sums (values, then counts), each run
/// at `delta / 2`.
pub fn certify_average<R: Rng + ?Sized>(
    dataset: &Dataset,
    oracle: &mut VerificationOracle,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<CertifyOutcome> {
    let prepared = AverageCertifier { eps, delta };
    let p = prepared.prepare_plans(dataset)?;
    p.run_inner(oracle, rng)
}

// ---------------------------------------------------------------------------
// Certifier implementations used by the correction schemes.

#[derive(Debug, Clone, Copy)]
pub struct SumCertifier {
    pub eps: f64,
    pub delta: f64,
}

struct PreparedSum(SumSamplingPlan);

impl PreparedCertifier for PreparedSum {
    fn run(&self, oracle: &mut VerificationOracle, rng: &mut dyn RngCore) -> Result<CertifyOutcome> {
        self.0.run(self.0.total, oracle, rng)
    }
}

impl Certifier for SumCertifier {
    fn name(&self) -> String {
        "sum".into()
    }

    fn evaluate(&self, dataset: &Dataset) -> Result<f64> {
        sum_value(dataset)
    }

    fn prepare<'a>(&'a self, dataset: &'a Dataset) -> Result<Box<dyn PreparedCertifier + 'a>> {
        Ok(Box::new(PreparedSum(SumSamplingPlan::new(dataset, self.eps, self.delta)?)))
    }

    fn round_cap(&self, _dataset: &Dataset) -> Result<u64> {
        certification_sample_count(self.eps, self.delta)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MaxCertifier;

struct PreparedMax<'a>(&'a Dataset);

impl PreparedCertifier for PreparedMax<'_> {
    fn run(&self, oracle: &mut VerificationOracle, _rng: &mut dyn RngCore) -> Result<CertifyOutcome> {
        if self.0.is_empty() {
            return Ok(CertifyOutcome::vacuous(0.0));
        }
        certify_max(self.0, oracle)
    }
}

impl Certifier for MaxCertifier {
    fn name(&self) -> String {
        "max".into()
    }

    fn evaluate(&self, dataset: &Dataset) -> Result<f64> {
        Ok(argmax(dataset)?.map_or(0.0, |(_, x)| x))
    }

    fn prepare<'a>(&'a self, dataset: &'a Dataset) -> Result<Box<dyn PreparedCertifier + 'a>> {
        Ok(Box::new(PreparedMax(dataset)))
    }

    fn round_cap(&self, _dataset: &Dataset) -> Result<u64> {
        Ok(1)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MaxOfSumsCertifier {
    pub eps: f64,
    pub delta: f64,
}

impl Certifier for MaxOfSumsCertifier {
    fn name(&self) -> String {
        "max-of-sums".into()
    }

    fn evaluate(&self, dataset: &Dataset) -> Result<f64> {
        max_of_sums_value(dataset)
    }

    fn prepare<'a>(&'a self, dataset: &'a Dataset) -> Result<Box<dyn PreparedCertifier + 'a>> {
        let plan = match heaviest_group(dataset)? {
            None => SumSamplingPlan::new(dataset, self.eps, self.delta)?,
            Some((_, _, ids)) => SumSamplingPlan::new(&dataset.select(ids), self.eps, self.delta)?,
        };
        Ok(Box::new(PreparedSum(plan)))
    }

    fn round_cap(&self, _dataset: &Dataset) -> Result<u64> {
        certification_sample_count(self.eps, self.delta)
    }
}

/// Certifier for the mean. Not monotone under record removal.
#[derive(Debug, Clone, Copy)]
pub struct AverageCertifier {
    pub eps: f64,
    pub delta: f64,
}

struct PreparedAverage {
    values: SumSamplingPlan,
    counts: SumSamplingPlan,
    mean: f64,
}

impl AverageCertifier {
    fn prepare_plans(&self, dataset: &Dataset) -> Result<PreparedAverage> {
        let half = self.delta / 2.0;
        let values = SumSamplingPlan::new(dataset, self.eps, half)?;
        let ones: Vec<f64> = vec![1.0; dataset.len()];
        let unit = Dataset::from_scalars(&ones)?;
        let mut counts = SumSamplingPlan::new(&unit, self.eps, half)?;
        // the unit dataset is indexed 0..n; map back to real ids
        counts.ids = dataset.ids().collect();
        Ok(PreparedAverage {
            mean: average_value(dataset)?,
            values,
            counts,
        })
    }
}

impl PreparedAverage {
    fn run_inner<R: Rng + ?Sized>(&self, oracle: &mut VerificationOracle, rng: &mut R) -> Result<CertifyOutcome> {
        let before = oracle.ledger().verifications_charged;
        let by_value = self.values.run(self.mean, oracle, rng)?;
        if !by_value.is_certified() {
            return Ok(CertifyOutcome::invalid(by_value.invalid_ids().to_vec(), charged_since(oracle, before)));
        }
        let by_count = self.counts.run(self.mean, oracle, rng)?;
        let used = charged_since(oracle, before);
        Ok(match by_count.is_certified() {
            true if by_value.vacuous && by_count.vacuous => CertifyOutcome::vacuous(self.mean),
            true => CertifyOutcome::certified(self.mean, used),
            false => CertifyOutcome::invalid(by_count.invalid_ids().to_vec(), used),
        })
    }
}

impl PreparedCertifier for PreparedAverage {
    fn run(&self, oracle: &mut VerificationOracle, rng: &mut dyn RngCore) -> Result<CertifyOutcome> {
        self.run_inner(oracle, rng)
    }
}

impl Certifier for AverageCertifier {
    fn name(&self) -> String {
        "average".into()
    }

    fn evaluate(&self, dataset: &Dataset) -> Result<f64> {
        average_value(dataset)
    }

    fn prepare<'a>(&'a self, dataset: &'a Dataset) -> Result<Box<dyn PreparedCertifier + 'a>> {
        Ok(Box::new(self.prepare_plans(dataset)?))
    }

    fn round_cap(&self, _dataset: &Dataset) -> Result<u64> {
        Ok(2 * certification_sample_count(self.eps, self.delta / 2.0)?)
    }
}
