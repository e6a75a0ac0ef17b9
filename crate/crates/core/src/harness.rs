//! Monte Carlo experiments: planted adversaries, seeded trials, CSV reports.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::certify::{AverageCertifier, MaxCertifier, MaxOfSumsCertifier, SumCertifier, SumSamplingPlan};
use crate::correction::{strong_correct_max, strong_correct_sum, weak_correct_general, weak_correct_monotone};
use crate::dataset::{Dataset, DatasetKind, GroundTruth, LpSense, Payload};
use crate::error::{Error, Result};
use crate::instopt::{enumerate_violations, MAX_ENUMERATION};
use crate::lipschitz::{lipschitz_plan, steiner_weights, tsp_weights, SteinerCertifier, TspCertifier};
use crate::lp::LpCertifier;
use crate::numeric::{check_unit_open, ratio_check_f64_exact, ratio_check_guarded};
use crate::oracle::{BudgetMode, VerificationOracle};
use crate::outcome::Verdict;
use crate::scheme::Certifier;

/// Largest dataset the worst-subset adversary will enumerate.
pub const MAX_WORST_SUBSET: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    Sum,
    Max,
    MaxOfSums,
    Average,
    Packing,
    Covering,
    GeneralLp,
    LipschitzTsp,
    LipschitzSteiner,
}

impl SchemeId {
    pub const ALL: [SchemeId; 9] = [
        SchemeId::Sum,
        SchemeId::Max,
        SchemeId::MaxOfSums,
        SchemeId::Average,
        SchemeId::Packing,
        SchemeId::Covering,
        SchemeId::GeneralLp,
        SchemeId::LipschitzTsp,
        SchemeId::LipschitzSteiner,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            SchemeId::Sum => "sum",
            SchemeId::Max => "max",
            SchemeId::MaxOfSums => "max-of-sums",
            SchemeId::Average => "average",
            SchemeId::Packing => "packing",
            SchemeId::Covering => "covering",
            SchemeId::GeneralLp => "general-lp",
            SchemeId::LipschitzTsp => "lipschitz-tsp",
            SchemeId::LipschitzSteiner => "lipschitz-steiner",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.tag() == text)
            .ok_or_else(|| Error::Config(format!("unknown scheme {text:?}")))
    }

    pub fn dataset_kind(self) -> DatasetKind {
        match self {
            SchemeId::Sum | SchemeId::Max | SchemeId::MaxOfSums | SchemeId::Average => DatasetKind::Scalar,
            SchemeId::Packing | SchemeId::Covering | SchemeId::GeneralLp => DatasetKind::Lp,
            SchemeId::LipschitzTsp => DatasetKind::Points,
            SchemeId::LipschitzSteiner => DatasetKind::GraphTerminals,
        }
    }

    fn lp_sense(self) -> Option<LpSense> {
        match self {
            SchemeId::Packing => Some(LpSense::Packing),
            SchemeId::Covering => Some(LpSense::Covering),
            SchemeId::GeneralLp => Some(LpSense::General),
            _ => None,
        }
    }

    /// Whether `f` never increases when records are removed, so the
    /// monotone weak correction applies.
    pub fn is_monotone(self) -> bool {
        !matches!(self, SchemeId::Average | SchemeId::GeneralLp)
    }

    pub fn certifier(self, eps: f64, delta: f64) -> Box<dyn Certifier> {
        match self {
            SchemeId::Sum => Box::new(SumCertifier { eps, delta }),
            SchemeId::Max => Box::new(MaxCertifier),
            SchemeId::MaxOfSums => Box::new(MaxOfSumsCertifier { eps, delta }),
            SchemeId::Average => Box::new(AverageCertifier { eps, delta }),
            SchemeId::Packing | SchemeId::Covering | SchemeId::GeneralLp => Box::new(LpCertifier { eps, delta }),
            SchemeId::LipschitzTsp => Box::new(TspCertifier { eps, delta }),
            SchemeId::LipschitzSteiner => Box::new(SteinerCertifier { eps, delta }),
        }
    }

    /// Rejects datasets this scheme cannot run on.
    pub fn check_dataset(self, dataset: &Dataset) -> Result<()> {
        if dataset.kind() != self.dataset_kind() {
            return Err(Error::Config(format!(
                "scheme {} needs a {} dataset, got {}",
                self.tag(),
                self.dataset_kind(),
                dataset.kind()
            )));
        }
        if let Some(sense) = self.lp_sense() {
            let got = dataset.lp().map(|lp| lp.sense);
            if got != Some(sense) {
                return Err(Error::Config(format!("scheme {} needs a {} LP", self.tag(), sense.tag())));
            }
        }
        if self == SchemeId::MaxOfSums && dataset.records().iter().any(|r| r.group.is_none()) {
            return Err(Error::Config("max-of-sums needs a group label on every record".into()));
        }
        Ok(())
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorrectionMode {
    Weak,
    WeakGeneral,
    StrongSum,
    StrongMax,
}

impl CorrectionMode {
    pub const ALL: [CorrectionMode; 4] = [
        CorrectionMode::Weak,
        CorrectionMode::WeakGeneral,
        CorrectionMode::StrongSum,
        CorrectionMode::StrongMax,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CorrectionMode::Weak => "weak",
            CorrectionMode::WeakGeneral => "weak-general",
            CorrectionMode::StrongSum => "strong-sum",
            CorrectionMode::StrongMax => "strong-max",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.tag() == text)
            .ok_or_else(|| Error::Config(format!("unknown correction mode {text:?}")))
    }

    pub fn budget(self) -> BudgetMode {
        match self {
            CorrectionMode::Weak | CorrectionMode::WeakGeneral => BudgetMode::Weak,
            CorrectionMode::StrongSum | CorrectionMode::StrongMax => BudgetMode::Strong,
        }
    }
}

/// What one trial runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Certify(SchemeId),
    /// The scheme is the certifier driven by weak modes, and names `f` for
    /// strong modes (sum or max).
    Correct(CorrectionMode, SchemeId),
}

impl Task {
    pub fn scheme(self) -> SchemeId {
        match self {
            Task::Certify(s) | Task::Correct(_, s) => s,
        }
    }

    pub fn label(self) -> String {
        match self {
            Task::Certify(s) => s.tag().to_string(),
            Task::Correct(m, s) => format!("{}:{}", m.tag(), s.tag()),
        }
    }

    pub fn budget(self) -> BudgetMode {
        match self {
            Task::Certify(_) => BudgetMode::Weak,
            Task::Correct(m, _) => m.budget(),
        }
    }

    /// Config errors for incompatible scheme/mode pairs.
    pub fn validate(self) -> Result<()> {
        match self {
            Task::Certify(_) => Ok(()),
            Task::Correct(CorrectionMode::Weak, s) if !s.is_monotone() => Err(Error::Config(format!(
                "{} is not monotone; use weak-general",
                s.tag()
            ))),
            Task::Correct(CorrectionMode::StrongSum, s) if s != SchemeId::Sum => {
                Err(Error::Config("strong-sum corrects the sum only".into()))
            }
            Task::Correct(CorrectionMode::StrongMax, s) if s != SchemeId::Max => {
                Err(Error::Config("strong-max corrects the max only".into()))
            }
            Task::Correct(..) => Ok(()),
        }
    }
}

/// Which truth set the max-of-sums hard instance plants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardTruth {
    /// One record per group: the max group sum over `T` is 1.
    T0,
    /// `T0` plus one whole group: the max group sum over `T` is `c^2`.
    T1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdversaryModel {
    /// `round(fraction * n)` records chosen uniformly are invalid.
    UniformInvalid { fraction: f64 },
    /// Largest scalars (ties by id) invalid until their mass reaches
    /// `fraction` of the total.
    MassConcentrated { fraction: f64 },
    /// The violating subset the scheme's sampling plan is least likely to
    /// touch.
    WorstSubset,
    /// `n` unit records in groups of `c^2`.
    MaxOfSumsHard { c: usize, n: usize, truth: HardTruth },
    /// One invalid point appended at `multiplier` times the diameter from
    /// the centroid.
    TspOutlier { multiplier: f64 },
    None,
    /// The ground truth shipped with the dataset.
    AsLoaded,
}

impl AdversaryModel {
    pub const KINDS: [&'static str; 7] = [
        "uniform-invalid",
        "mass-concentrated",
        "worst-subset",
        "max-of-sums-hard",
        "tsp-outlier",
        "none",
        "as-loaded",
    ];

    /// Builds a model from its kind and `key=value` parameters.
    pub fn parse(kind: &str, params: &BTreeMap<String, String>) -> Result<Self> {
        let allowed: &[&str] = match kind {
            "uniform-invalid" | "mass-concentrated" => &["fraction"],
            "max-of-sums-hard" => &["c", "n", "truth"],
            "tsp-outlier" => &["multiplier"],
            _ => &[],
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("adversary {kind} takes no parameter {k:?}")));
        }
        let num = |key: &str, default: f64| -> Result<f64> {
            params.get(key).map_or(Ok(default), |v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("parameter {key}={v} is not a number")))
            })
        };
        let int = |key: &str, default: usize| -> Result<usize> {
            params.get(key).map_or(Ok(default), |v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("parameter {key}={v} is not a count")))
            })
        };
        let model = match kind {
            "uniform-invalid" => AdversaryModel::UniformInvalid { fraction: num("fraction", 0.1)? },
            "mass-concentrated" => AdversaryModel::MassConcentrated { fraction: num("fraction", 0.5)? },
            "worst-subset" => AdversaryModel::WorstSubset,
            "max-of-sums-hard" => AdversaryModel::MaxOfSumsHard {
                c: int("c", 2)?,
                n: int("n", 16)?,
                truth: match params.get("truth").map(String::as_str) {
                    None | Some("t0") => HardTruth::T0,
                    Some("t1") => HardTruth::T1,
                    Some(other) => return Err(Error::Config(format!("truth must be t0 or t1, got {other}"))),
                },
            },
            "tsp-outlier" => AdversaryModel::TspOutlier { multiplier: num("multiplier", 10.0)? },
            "none" => AdversaryModel::None,
            "as-loaded" => AdversaryModel::AsLoaded,
            other => return Err(Error::Config(format!("unknown adversary {other:?}"))),
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            AdversaryModel::UniformInvalid { fraction } | AdversaryModel::MassConcentrated { fraction }
                if !(0.0..=1.0).contains(&fraction) =>
            {
                Err(Error::Config(format!("fraction must lie in [0, 1], got {fraction}")))
            }
            AdversaryModel::MaxOfSumsHard { c, n, .. } if c == 0 || n == 0 || n % (c * c) != 0 => {
                Err(Error::Input(format!("hard instance needs c >= 1 and c^2 | n, got c = {c}, n = {n}")))
            }
            AdversaryModel::TspOutlier { multiplier } if !(multiplier.is_finite() && multiplier > 0.0) => {
                Err(Error::Config(format!("multiplier must be positive, got {multiplier}")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            AdversaryModel::UniformInvalid { fraction } => format!("uniform-invalid({fraction})"),
            AdversaryModel::MassConcentrated { fraction } => format!("mass-concentrated({fraction})"),
            AdversaryModel::WorstSubset => "worst-subset".into(),
            AdversaryModel::MaxOfSumsHard { c, n, truth } => {
                format!("max-of-sums-hard(c={c},n={n},{})", if truth == HardTruth::T0 { "t0" } else { "t1" })
            }
            AdversaryModel::TspOutlier { multiplier } => format!("tsp-outlier({multiplier})"),
            AdversaryModel::None => "none".into(),
            AdversaryModel::AsLoaded => "as-loaded".into(),
        }
    }

    /// Whether planting consumes randomness.
    pub fn is_random(&self) -> bool {
        matches!(
            self,
            AdversaryModel::UniformInvalid { .. } | AdversaryModel::MaxOfSumsHard { .. }
        )
    }

    fn needs_base(&self) -> bool {
        !matches!(self, AdversaryModel::MaxOfSumsHard { .. })
    }
}

/// Parses `KEY=VALUE` items, each possibly a comma-separated list.
pub fn parse_params<I, S>(items: I) -> Result<BTreeMap<String, String>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = BTreeMap::new();
    for item in items {
        for kv in item.as_ref().split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("parameter {kv:?} is not KEY=VALUE")))?;
            out.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(out)
}

/// Scheme parameters the worst-subset adversary plays against.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext {
    pub scheme: SchemeId,
    pub eps: f64,
    pub delta: f64,
}

/// Plants an invalid mask (and for generative models, the dataset).
pub fn gen_adversary<R: Rng + ?Sized>(
    model: &AdversaryModel,
    base: Option<(&Dataset, &GroundTruth)>,
    ctx: &PlanContext,
    rng: &mut R,
) -> Result<(Dataset, GroundTruth)> {
    model.validate()?;
    if let AdversaryModel::MaxOfSumsHard { c, n, truth } = *model {
        return max_of_sums_hard(c, n, truth, rng);
    }
    let (dataset, loaded) = base.ok_or_else(|| Error::Config(format!("adversary {} needs an input dataset", model.label())))?;
    let n = dataset.len();
    let slots = dataset.ids().max().map_or(0, |m| m + 1);
    let mask_of = |invalid: &[usize]| GroundTruth::with_invalid(slots, invalid);
    let ids: Vec<usize> = dataset.ids().collect();
    match *model {
        AdversaryModel::None => Ok((dataset.clone(), mask_of(&[]))),
        AdversaryModel::AsLoaded => Ok((dataset.clone(), loaded.clone())),
        AdversaryModel::UniformInvalid { fraction } => {
            let count = (fraction * n as f64).round() as usize;
            let chosen: Vec<usize> = index::sample(rng, n, count).into_iter().map(|p| ids[p]).collect();
            Ok((dataset.clone(), mask_of(&chosen)))
        }
        AdversaryModel::MassConcentrated { fraction } => {
            let mut xs = dataset.scalars()?;
            let total: f64 = xs.iter().map(|(_, x)| x).sum();
            xs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut mass = 0.0;
            let mut chosen = Vec::new();
            for (id, x) in xs {
                if mass >= fraction * total {
                    break;
                }
                mass += x;
                chosen.push(id);
            }
            Ok((dataset.clone(), mask_of(&chosen)))
        }
        AdversaryModel::WorstSubset => {
            let set = worst_subset(dataset, ctx)?;
            Ok((dataset.clone(), mask_of(&set)))
        }
        AdversaryModel::TspOutlier { multiplier } => tsp_outlier(dataset, multiplier),
        AdversaryModel::MaxOfSumsHard { .. } => unreachable!(),
    }
}

/// `n / c^2` groups of `c^2` unit records. `T0` keeps one random record per
/// group; `T1` adds one random whole group.
pub fn max_of_sums_hard<R: Rng + ?Sized>(c: usize, n: usize, truth: HardTruth, rng: &mut R) -> Result<(Dataset, GroundTruth)> {
    AdversaryModel::MaxOfSumsHard { c, n, truth }.validate()?;
    let size = c * c;
    let groups = n / size;
    let labels: BTreeMap<usize, String> = (0..n).map(|i| (i, format!("g{}", i / size))).collect();
    let dataset = Dataset::from_scalars(&vec![1.0; n])?.with_groups(&labels)?;
    let mut valid = vec![false; n];
    for g in 0..groups {
        valid[g * size + rng.gen_range(0..size)] = true;
    }
    if truth == HardTruth::T1 {
        let g = rng.gen_range(0..groups);
        valid[g * size..(g + 1) * size].fill(true);
    }
    Ok((dataset, GroundTruth::new(valid)))
}

fn tsp_outlier(dataset: &Dataset, multiplier: f64) -> Result<(Dataset, GroundTruth)> {
    let points: Vec<Vec<f64>> = dataset
        .records()
        .iter()
        .map(|r| match &r.payload {
            Payload::Point(p) => Ok(p.clone()),
            _ => Err(Error::Config("tsp-outlier needs a point dataset".into())),
        })
        .collect::<Result<_>>()?;
    if points.is_empty() {
        return Err(Error::Input("tsp-outlier needs at least one point".into()));
    }
    let dim = points[0].len();
    let centroid: Vec<f64> = (0..dim)
        .map(|k| points.iter().map(|p| p[k]).sum::<f64>() / points.len() as f64)
        .collect();
    let mut diameter: f64 = 0.0;
    for a in &points {
        for b in &points {
            diameter = diameter.max(crate::lipschitz::tsp::distance(a, b));
        }
    }
    let mut outlier = centroid;
    outlier[0] += multiplier * diameter.max(1.0);
    let mut records = dataset.records().to_vec();
    let id = dataset.ids().max().map_or(0, |m| m + 1);
    records.push(crate::dataset::Record {
        id,
        payload: Payload::Point(outlier),
        group: None,
    });
    let out = Dataset::new(DatasetKind::Points, records)?;
    Ok((out, GroundTruth::with_invalid(id + 1, &[id])))
}

/// Per-record miss model of the scheme's published plan: the probability a
/// run verifies no record of `set`.
fn miss_probability(dataset: &Dataset, ctx: &PlanContext) -> Result<Box<dyn Fn(&[usize]) -> f64>> {
    match ctx.scheme {
        SchemeId::Sum => {
            let plan = SumSamplingPlan::new(dataset, ctx.eps, ctx.delta)?;
            Ok(Box::new(move |set| {
                let p: f64 = set.iter().map(|&id| plan.probability_of(id)).sum();
                (1.0 - p).max(0.0).powf(plan.sample_count as f64)
            }))
        }
        SchemeId::LipschitzTsp | SchemeId::LipschitzSteiner => {
            let w = if ctx.scheme == SchemeId::LipschitzTsp {
                tsp_weights(dataset)?
            } else {
                steiner_weights(dataset)?
            };
            if w.value == 0.0 {
                return Ok(Box::new(|_| 1.0));
            }
            let plan = lipschitz_plan(&w, ctx.eps, ctx.delta)?;
            let q: BTreeMap<usize, f64> = plan.ids.iter().copied().zip(plan.inclusion_probabilities()).collect();
            Ok(Box::new(move |set| set.iter().map(|id| 1.0 - q.get(id).copied().unwrap_or(0.0)).product()))
        }
        other => Err(Error::Config(format!("worst-subset has no sampling plan for {}", other.tag()))),
    }
}

/// The violating subset with the largest miss probability; ties go to the
/// first in enumeration order. Empty when nothing violates.
pub fn worst_subset(dataset: &Dataset, ctx: &PlanContext) -> Result<Vec<usize>> {
    if dataset.len() > MAX_WORST_SUBSET {
        return Err(Error::Input(format!(
            "worst-subset enumerates at most {MAX_WORST_SUBSET} records, got {}",
            dataset.len()
        )));
    }
    ctx.scheme.check_dataset(dataset)?;
    let miss = miss_probability(dataset, ctx)?;
    let certifier = ctx.scheme.certifier(ctx.eps, ctx.delta);
    let f = |d: &Dataset| certifier.evaluate(d);
    let family = enumerate_violations(&f, dataset, ctx.eps, MAX_WORST_SUBSET.min(MAX_ENUMERATION), false)?;
    let mut best: Option<(f64, &Vec<usize>)> = None;
    for set in &family.sets {
        let m = miss(set);
        if best.is_none_or(|(b, _)| m > b) {
            best = Some((m, set));
        }
    }
    Ok(best.map(|(_, s)| s.clone()).unwrap_or_default())
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: Task,
    pub adversary: AdversaryModel,
    pub eps: f64,
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    /// Input instance; generative adversaries ignore it.
    pub base: Option<(Dataset, GroundTruth)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub scheme: String,
    pub adversary: String,
    pub eps: f64,
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    pub failures: u64,
    pub failure_rate: f64,
    /// Runs that ended in a correction failure; also counted as failures.
    pub correction_failures: u64,
    pub mean_verifications: f64,
    pub max_verifications: u64,
    pub mean_invalid_found: f64,
    pub mean_rounds: f64,
    /// Weak-correction runs that broke `charged <= (catches + 1) * cost`.
    pub budget_violations: u64,
    pub wall_time: Duration,
}

/// Outcome of one scored trial.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrialResult {
    pub failed: bool,
    pub correction_failed: bool,
    pub verifications: u64,
    pub invalid_found: u64,
    pub rounds: u64,
    pub budget_ok: bool,
}

/// Child seed of trial `index`: splitmix64 of the master seed, xored with
/// splitmix64 of the index, mixed once more.
pub fn child_seed(master: u64, index: u64) -> u64 {
    fn splitmix64(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(1)))
}

/// `true` when `value / reference` lies outside `[1-eps, 1/(1-eps)]`.
/// Scalar payloads compare exactly; others use a 1e-12 guard band.
pub fn out_of_range(value: f64, reference: f64, eps: f64, exact: bool) -> bool {
    if exact {
        ratio_check_f64_exact(value, reference, eps).is_outside()
    } else {
        ratio_check_guarded(value, reference, eps).is_outside()
    }
}

/// Runs one trial on a planted instance and scores it against the truth.
pub fn run_trial<R: Rng>(task: Task, eps: f64, delta: f64, dataset: &Dataset, truth: &GroundTruth, rng: &mut R) -> Result<TrialResult> {
    let scheme = task.scheme();
    let mut oracle = VerificationOracle::new(truth.clone(), task.budget());
    let exact = dataset.kind() == DatasetKind::Scalar;
    let valid = truth.valid_part(dataset);
    let mut result = TrialResult {
        budget_ok: true,
        ..TrialResult::default()
    };
    let corrected = match task {
        Task::Certify(_) => {
            let certifier = scheme.certifier(eps, delta);
            oracle.begin_round();
            let outcome = certifier.certify(dataset, &mut oracle, rng)?;
            result.rounds = 1;
            match &outcome.verdict {
                Verdict::Certified(v) if !outcome.vacuous => {
                    result.failed = out_of_range(*v, certifier.evaluate(&valid)?, eps, exact);
                }
                Verdict::InvalidFound(ids) => {
                    if let Some(id) = ids.iter().find(|&&id| truth.is_valid(id) != Some(false)) {
                        return Err(Error::Input(format!("scheme reported valid record {id} as invalid")));
                    }
                    result.invalid_found = ids.len() as u64;
                }
                _ => {}
            }
            None
        }
        Task::Correct(CorrectionMode::Weak, _) | Task::Correct(CorrectionMode::WeakGeneral, _) => {
            let certifier = scheme.certifier(eps, 1.0 / 3.0);
            let run = if matches!(task, Task::Correct(CorrectionMode::Weak, _)) {
                weak_correct_monotone(certifier.as_ref(), dataset, &mut oracle, delta, rng)
            } else {
                weak_correct_general(certifier.as_ref(), dataset, &mut oracle, delta, rng)
            };
            Some(run.map(|out| {
                result.invalid_found = out.removed.len() as u64;
                result.rounds = out.rounds;
                if matches!(task, Task::Correct(CorrectionMode::Weak, _)) {
                    result.budget_ok = oracle.ledger().within_weak_budget(out.catches, out.attempt_cost);
                }
                (out.value, certifier.evaluate(&valid))
            }))
        }
        Task::Correct(CorrectionMode::StrongSum, _) => Some(
            strong_correct_sum(dataset, &mut oracle, eps, delta, rng)
                .map(|out| (out.estimate, crate::certify::sum_value(&valid))),
        ),
        Task::Correct(CorrectionMode::StrongMax, _) => Some(
            strong_correct_max(dataset, &mut oracle, rng).map(|out| (out.value, MaxCertifier.evaluate(&valid))),
        ),
    };
    match corrected {
        None => {}
        Some(Ok((value, reference))) => result.failed = out_of_range(value, reference?, eps, exact),
        Some(Err(Error::CorrectionFailure(_))) => {
            result.failed = true;
            result.correction_failed = true;
        }
        Some(Err(e)) => return Err(e),
    }
    result.verifications = oracle.ledger().verifications_charged;
    if matches!(task, Task::Correct(..)) && result.invalid_found == 0 {
        result.invalid_found = oracle.log().iter().filter(|(_, ok)| !ok).map(|(id, _)| *id).collect::<std::collections::BTreeSet<_>>().len() as u64;
    }
    Ok(result)
}

/// Runs `config.trials` seeded trials in parallel and aggregates them.
/// Identical configs give identical stats (wall time aside).
pub fn run_trials(config: &ExperimentConfig) -> Result<TrialStats> {
    let started = Instant::now();
    check_unit_open("epsilon", config.eps)?;
    check_unit_open("delta", config.delta)?;
    if config.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    config.task.validate()?;
    let scheme = config.task.scheme();
    let ctx = PlanContext {
        scheme,
        eps: config.eps,
        delta: config.delta,
    };
    let base = config.base.as_ref().map(|(d, t)| (d, t));
    if config.adversary.needs_base() && base.is_none() {
        return Err(Error::Config(format!("adversary {} needs an input dataset", config.adversary.label())));
    }
    let fixed: Option<Arc<(Dataset, GroundTruth)>> = if config.adversary.is_random() {
        let mut probe = ChaCha8Rng::seed_from_u64(child_seed(config.seed, 0));
        let (d, _) = gen_adversary(&config.adversary, base, &ctx, &mut probe)?;
        scheme.check_dataset(&d)?;
        None
    } else {
        let mut unused = ChaCha8Rng::seed_from_u64(config.seed);
        let planted = gen_adversary(&config.adversary, base, &ctx, &mut unused)?;
        scheme.check_dataset(&planted.0)?;
        Some(Arc::new(planted))
    };

    let results: Vec<TrialResult> = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(config.seed, i));
            match &fixed {
                Some(inst) => run_trial(config.task, config.eps, config.delta, &inst.0, &inst.1, &mut rng),
                None => {
                    let (d, t) = gen_adversary(&config.adversary, base, &ctx, &mut rng)?;
                    run_trial(config.task, config.eps, config.delta, &d, &t, &mut rng)
                }
            }
        })
        .collect::<Result<_>>()?;

    let trials = config.trials;
    let count = |pred: fn(&TrialResult) -> bool| results.iter().filter(|r| pred(r)).count() as u64;
    let failures = count(|r| r.failed);
    let mean = |get: fn(&TrialResult) -> u64| results.iter().map(get).sum::<u64>() as f64 / trials as f64;
    Ok(TrialStats {
        scheme: config.task.label(),
        adversary: config.adversary.label(),
        eps: config.eps,
        delta: config.delta,
        trials,
        seed: config.seed,
        failures,
        failure_rate: failures as f64 / trials as f64,
        correction_failures: count(|r| r.correction_failed),
        mean_verifications: mean(|r| r.verifications),
        max_verifications: results.iter().map(|r| r.verifications).max().unwrap_or(0),
        mean_invalid_found: mean(|r| r.invalid_found),
        mean_rounds: mean(|r| r.rounds),
        budget_violations: count(|r| !r.budget_ok),
        wall_time: started.elapsed(),
    })
}

pub const REPORT_HEADER: [&str; 10] = [
    "scheme",
    "adversary",
    "epsilon",
    "delta",
    "trials",
    "failure_rate",
    "mean_verifications",
    "max_verifications",
    "mean_invalid_found",
    "seed",
];

/// `x` with six significant digits, trailing zeros trimmed.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..6).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{m}e{exp}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let fixed = format!("{x:.decimals$}");
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

fn report_row(s: &TrialStats) -> [String; 10] {
    [
        s.scheme.clone(),
        s.adversary.clone(),
        format_sig6(s.eps),
        format_sig6(s.delta),
        s.trials.to_string(),
        format_sig6(s.failure_rate),
        format_sig6(s.mean_verifications),
        s.max_verifications.to_string(),
        format_sig6(s.mean_invalid_found),
        s.seed.to_string(),
    ]
}

/// Writes one row per experiment under [`REPORT_HEADER`]. In append mode an
/// existing non-empty file must start with the same header; it is left
/// untouched otherwise.
pub fn emit_report(stats: &[TrialStats], path: &Path, append: bool) -> Result<()> {
    let io = |e: std::io::Error| Error::io(path, e);
    let mut write_header = true;
    if append && path.exists() {
        let mut first = String::new();
        BufReader::new(File::open(path).map_err(io)?).read_line(&mut first).map_err(io)?;
        if !first.is_empty() {
            if first.trim_end_matches(['\r', '\n']) != REPORT_HEADER.join(",") {
                return Err(Error::Config(format!("{} has a different report header", path.display())));
            }
            write_header = false;
        }
    }
    let file = if append {
        OpenOptions::new().create(true).append(true).open(path)
    } else {
        File::create(path)
    }
    .map_err(io)?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    if write_header {
        writer.write_record(REPORT_HEADER).map_err(csv_err)?;
    }
    for s in stats {
        writer.write_record(report_row(s)).map_err(csv_err)?;
    }
    writer.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(scheme: SchemeId) -> PlanContext {
        PlanContext { scheme, eps: 0.5, delta: 0.1 }
    }

    #[test]
    fn sig6_rendering() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(0.5), "0.5");
        assert_eq!(format_sig6(1.0 / 3.0), "0.333333");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");
        assert_eq!(format_sig6(0.000012345678), "1.23457e-5");
        assert_eq!(format_sig6(4.25), "4.25");
        assert_eq!(format_sig6(75.0), "75");
    }

    #[test]
    fn hard_instance_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (truth, want) in [(HardTruth::T0, 1.0), (HardTruth::T1, 4.0)] {
            let (d, t) = max_of_sums_hard(2, 16, truth, &mut rng).unwrap();
            let f = crate::certify::max_of_sums_value(&t.valid_part(&d)).unwrap();
            assert_eq!(f, want);
            assert_eq!(crate::certify::max_of_sums_value(&d).unwrap(), 4.0);
        }
        assert!(max_of_sums_hard(3, 16, HardTruth::T0, &mut rng).is_err());
    }

    #[test]
    fn mass_concentrated_takes_the_top() {
        let d = Dataset::from_scalars(&[1.0, 5.0, 2.0, 2.0]).unwrap();
        let model = AdversaryModel::MassConcentrated { fraction: 0.5 };
        let (_, t) = gen_adversary(&model, Some((&d, &GroundTruth::all_valid(4))), &ctx(SchemeId::Sum), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.invalid_ids(), vec![1]);
        let model = AdversaryModel::MassConcentrated { fraction: 0.6 };
        let (_, t) = gen_adversary(&model, Some((&d, &GroundTruth::all_valid(4))), &ctx(SchemeId::Sum), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.invalid_ids(), vec![1, 2]);
    }

    #[test]
    fn uniform_zero_is_all_valid() {
        let d = Dataset::from_scalars(&[1.0; 5]).unwrap();
        let model = AdversaryModel::UniformInvalid { fraction: 0.0 };
        let (_, t) = gen_adversary(&model, Some((&d, &GroundTruth::all_valid(5))), &ctx(SchemeId::Sum), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(t.invalid_ids().is_empty());
    }

    #[test]
    fn worst_subset_prefers_light_records() {
        // sum [4,1,1,1,1], eps 0.5: violating needs removed mass > 4, so a
        // light set is impossible; the lightest violating set is {0,1}
        let d = Dataset::from_scalars(&[4.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let set = worst_subset(&d, &ctx(SchemeId::Sum)).unwrap();
        assert_eq!(set, vec![0, 1]);
    }

    #[test]
    fn parse_models() {
        let params: BTreeMap<String, String> = [("fraction".to_string(), "0.25".to_string())].into();
        assert_eq!(
            AdversaryModel::parse("uniform-invalid", &params).unwrap(),
            AdversaryModel::UniformInvalid { fraction: 0.25 }
        );
        assert!(AdversaryModel::parse("tsp-outlier", &params).is_err());
        assert!(AdversaryModel::parse("bogus", &BTreeMap::new()).is_err());
        let bad: BTreeMap<String, String> = [("c".to_string(), "3".to_string())].into();
        assert!(matches!(AdversaryModel::parse("max-of-sums-hard", &bad), Err(Error::Input(_))));
    }

    #[test]
    fn incompatible_scheme_is_rejected_before_trials() {
        let d = Dataset::from_scalars(&[1.0, 2.0]).unwrap();
        let config = ExperimentConfig {
            task: Task::Certify(SchemeId::LipschitzTsp),
            adversary: AdversaryModel::None,
            eps: 0.5,
            delta: 0.1,
            trials: 10,
            seed: 1,
            base: Some((d, GroundTruth::all_valid(2))),
        };
        assert!(matches!(run_trials(&config), Err(Error::Config(_))));
        let weak_average = Task::Correct(CorrectionMode::Weak, SchemeId::Average);
        assert!(weak_average.validate().is_err());
    }

    #[test]
    fn child_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| child_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(child_seed(7, 0), child_seed(8, 0));
    }
}
