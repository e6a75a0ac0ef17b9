//! The instance-optimal certification LP, solved by brute-force enumeration
//! of violating subsets at desk scale.
//!
//! A subset `S` is violating when `f(N) / f(N \ S)` leaves
//! `[1-eps, 1/(1-eps)]`. Any scheme that succeeds with probability 2/3 must
//! verify some record of every violating `S` with probability 2/3, which
//! gives the LP `min sum p_i  s.t.  sum_{i in S} p_i >= 2/3, 0 <= p <= 1`.
//! Its optimum lower-bounds the expected verifications of every such scheme,
//! and doubling the optimal `p` (capped at 1) gives an independent scheme
//! that is within a factor 2 of it.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{Dataset, GroundTruth};
use crate::error::{Error, Result};
use crate::lipschitz::{run_plan, IndependentPlan};
use crate::lp::{solve_standard, StandardLp};
use crate::numeric::{rational_from_f64, rational_to_f64, ratio_check_f64_exact, Rational, RatioCheck};
use crate::oracle::{BudgetMode, VerificationOracle};

/// Hard cap on the number of records for subset enumeration.
pub const MAX_ENUMERATION: usize = 14;

/// A function evaluated on sub-datasets.
pub type SetFunction<'a> = dyn Fn(&Dataset) -> Result<f64> + Sync + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationFamily {
    /// Record ids of the full dataset, ascending.
    pub ids: Vec<usize>,
    /// Violating subsets as ascending record ids.
    pub sets: Vec<Vec<usize>>,
    /// Only inclusion-minimal violating subsets are listed.
    pub minimal: bool,
    /// `f(N) = 0`: every ratio is 1 and the family is empty by convention.
    pub vacuous: bool,
}

impl ViolationFamily {
    fn bit(&self, id: usize) -> u32 {
        let pos = self.ids.iter().position(|&i| i == id).expect("id in family");
        1 << pos
    }

    /// Each set as a bitmask over positions in `ids`.
    pub fn masks(&self) -> Vec<u32> {
        self.sets
            .iter()
            .map(|s| s.iter().fold(0u32, |m, &id| m | self.bit(id)))
            .collect()
    }

    /// The inclusion-minimal members. The LP is unchanged by this reduction
    /// because `p >= 0` makes every superset constraint redundant.
    pub fn minimized(&self) -> ViolationFamily {
        let masks = self.masks();
        let sets = self
            .sets
            .iter()
            .zip(&masks)
            .filter(|(_, &m)| !masks.iter().any(|&o| o != m && o & m == o))
            .map(|(s, _)| s.clone())
            .collect();
        ViolationFamily {
            sets,
            minimal: true,
            ..self.clone()
        }
    }
}

/// All violating subsets of `dataset` under `f`, by direct recomputation.
pub fn enumerate_violations(
    f: &SetFunction<'_>,
    dataset: &Dataset,
    eps: f64,
    cap_n: usize,
    minimal: bool,
) -> Result<ViolationFamily> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::input(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    if cap_n > MAX_ENUMERATION {
        return Err(Error::input(format!("enumeration cap {cap_n} exceeds {MAX_ENUMERATION}")));
    }
    let n = dataset.len();
    if n > cap_n {
        return Err(Error::input(format!("{n} records exceed the enumeration cap {cap_n}")));
    }
    let ids: Vec<usize> = dataset.ids().collect();
    let full = f(dataset)?;
    if full == 0.0 {
        return Ok(ViolationFamily {
            ids,
            sets: Vec::new(),
            minimal,
            vacuous: true,
        });
    }
    let flags: Vec<bool> = (1u32..1 << n)
        .into_par_iter()
        .map(|mask| {
            let removed = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ids[i]);
            let rest = f(&dataset.restrict(removed))?;
            Ok(ratio_check_f64_exact(full, rest, eps) == RatioCheck::Outside)
        })
        .collect::<Result<_>>()?;
    let sets = flags
        .iter()
        .enumerate()
        .filter(|(_, &v)| v)
        .map(|(k, _)| {
            let mask = k as u32 + 1;
            (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ids[i]).collect()
        })
        .collect();
    let family = ViolationFamily {
        ids,
        sets,
        minimal: false,
        vacuous: false,
    };
    Ok(if minimal { family.minimized() } else { family })
}

/// An optimal solution of the certification LP.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalPlan {
    pub ids: Vec<usize>,
    pub p: Vec<Rational>,
    pub objective: Rational,
}

impl FractionalPlan {
    pub fn p_f64(&self) -> Vec<f64> {
        self.p.iter().map(rational_to_f64).collect()
    }

    pub fn objective_f64(&self) -> f64 {
        rational_to_f64(&self.objective)
    }
}

fn two_thirds() -> Rational {
    Rational::new(BigInt::from(2), BigInt::from(3))
}

/// Solves the certification LP exactly through its dual
/// `max 2/3 sum_S u_S  s.t.  sum_{S ni i} u_S <= 1, u >= 0`, whose row
/// multipliers are the optimal `p`. The bound `p <= 1` is never active at
/// an optimum (lowering any `p_i > 1` to 1 keeps every constraint).
pub fn solve_cert_lp(family: &ViolationFamily) -> Result<FractionalPlan> {
    let n = family.ids.len();
    let reduced = if family.minimal { family.clone() } else { family.minimized() };
    if reduced.sets.iter().any(|s| s.is_empty()) {
        return Err(Error::input("the empty set cannot be violating"));
    }
    if reduced.sets.is_empty() {
        return Ok(FractionalPlan {
            ids: family.ids.clone(),
            p: vec![Rational::zero(); n],
            objective: Rational::zero(),
        });
    }
    let masks = reduced.masks();
    let lp = StandardLp {
        c: vec![two_thirds(); masks.len()],
        a: (0..n)
            .map(|i| {
                masks
                    .iter()
                    .map(|m| if m >> i & 1 == 1 { Rational::one() } else { Rational::zero() })
                    .collect()
            })
            .collect(),
        b: vec![Rational::one(); n],
    };
    let sol = solve_standard(&lp)?;
    let objective: Rational = sol.duals.iter().sum();
    debug_assert_eq!(objective, sol.value);
    Ok(FractionalPlan {
        ids: family.ids.clone(),
        p: sol.duals,
        objective,
    })
}

/// `q_i = min(2 p_i, 1)`, one repetition.
pub fn round_plan(plan: &FractionalPlan) -> IndependentPlan {
    let two = Rational::from_integer(BigInt::from(2));
    IndependentPlan {
        ids: plan.ids.clone(),
        base: plan
            .p
            .iter()
            .map(|p| {
                let q = p * &two;
                if q >= Rational::one() {
                    1.0
                } else {
                    rational_to_f64(&q)
                }
            })
            .collect(),
        repetitions: 1,
    }
}

/// `p >= 0` and every covering constraint `sum_{i in S} p_i >= 2/3`, in exact
/// arithmetic. The bound `p <= 1` is not tested: capping entries at 1 never
/// breaks a covering constraint, so an over-unit vector stands for its cap.
pub fn check_feasibility(p: &[f64], family: &ViolationFamily) -> bool {
    let exact: Vec<Rational> = p.iter().map(|&x| rational_from_f64(x)).collect();
    check_feasibility_exact(&exact, family)
}

pub fn check_feasibility_exact(p: &[Rational], family: &ViolationFamily) -> bool {
    if p.len() != family.ids.len() || p.iter().any(Signed::is_negative) {
        return false;
    }
    let bound = two_thirds();
    family.masks().iter().all(|&m| {
        let total: Rational = (0..p.len()).filter(|i| m >> i & 1 == 1).map(|i| &p[i]).sum();
        total >= bound
    })
}

/// Probability that the plan verifies at least one member of each set.
pub fn catch_probabilities(plan: &IndependentPlan, family: &ViolationFamily) -> Vec<f64> {
    let incl = plan.inclusion_probabilities();
    family
        .masks()
        .iter()
        .map(|&m| {
            let miss: f64 = (0..incl.len())
                .filter(|i| m >> i & 1 == 1)
                .map(|i| 1.0 - incl[i])
                .product();
            1.0 - miss
        })
        .collect()
}

/// Monte Carlo catch rate per set. Each trial runs the plan once against
/// an all-valid oracle and reads the verified ids from its log, so every
/// set is scored on the same draws.
pub fn empirical_catch_rates<R: Rng + ?Sized>(
    plan: &IndependentPlan,
    family: &ViolationFamily,
    trials: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let masks = family.masks();
    let truth = GroundTruth::new(vec![true; family.ids.iter().max().map_or(0, |m| m + 1)]);
    let truth = std::sync::Arc::new(truth);
    let mut hits = vec![0u64; masks.len()];
    for _ in 0..trials {
        let mut oracle = VerificationOracle::shared(truth.clone(), BudgetMode::Weak);
        run_plan(plan, 1.0, &mut oracle, rng)?;
        let verified = oracle
            .log()
            .iter()
            .fold(0u32, |acc, &(id, _)| acc | family.bit(id));
        for (h, &m) in hits.iter_mut().zip(&masks) {
            if verified & m != 0 {
                *h += 1;
            }
        }
    }
    Ok(hits.iter().map(|&h| h as f64 / trials as f64).collect())
}
