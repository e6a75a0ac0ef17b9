//! Certifiers for objectives given by packing, covering and general LPs.
//!
//! Each record owns one objective coefficient `c_i` and one row `a_i*`; the
//! right-hand side `b` is shared. In packing form records are variables
//! (`max c.y  s.t.  sum_i a_ij y_i <= b_j`), in covering form they are
//! constraints (`min b.x  s.t.  sum_j a_ij x_j >= c_i`). The two forms over
//! the same data are LP duals of each other.

pub mod simplex;

use num_traits::{Signed, Zero};
use rand::{Rng, RngCore};

use crate::certify::SumSamplingPlan;
use crate::dataset::{Dataset, LpForm, LpShared, LpSense, Payload};
use crate::error::{Error, Result};
use crate::numeric::{certification_sample_count, check_unit_open, rational_to_f64, Rational};
use crate::oracle::VerificationOracle;
use crate::outcome::CertifyOutcome;
use crate::scheme::{charged_since, Certifier, PreparedCertifier};

pub use simplex::{solve_standard, StandardLp, StandardSolution};

/// Largest `n + m` accepted by [`solve_lp`].
pub const MAX_LP_SIZE: usize = 60;

/// An LP whose records are the dataset's records, in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    pub ids: Vec<usize>,
    pub c: Vec<Rational>,
    pub rows: Vec<Vec<Rational>>,
    pub b: Vec<Rational>,
    pub sense: LpSense,
    pub form: LpForm,
}

impl LpInstance {
    pub fn packing(c: Vec<Rational>, rows: Vec<Vec<Rational>>, b: Vec<Rational>) -> Result<Self> {
        Self::build(c, rows, b, LpSense::Packing, LpForm::Packing)
    }

    pub fn covering(c: Vec<Rational>, rows: Vec<Vec<Rational>>, b: Vec<Rational>) -> Result<Self> {
        Self::build(c, rows, b, LpSense::Covering, LpForm::Covering)
    }

    pub fn general(c: Vec<Rational>, rows: Vec<Vec<Rational>>, b: Vec<Rational>, form: LpForm) -> Result<Self> {
        Self::build(c, rows, b, LpSense::General, form)
    }

    fn build(c: Vec<Rational>, rows: Vec<Vec<Rational>>, b: Vec<Rational>, sense: LpSense, form: LpForm) -> Result<Self> {
        let shared = LpShared { b, sense, form };
        Self::from_dataset(&Dataset::from_lp(c, rows, shared)?)
    }

    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        let shared = dataset
            .lp()
            .ok_or_else(|| Error::input(format!("expected an lp dataset, got kind {}", dataset.kind())))?;
        let mut inst = LpInstance {
            ids: Vec::with_capacity(dataset.len()),
            c: Vec::with_capacity(dataset.len()),
            rows: Vec::with_capacity(dataset.len()),
            b: shared.b.clone(),
            sense: shared.sense,
            form: match shared.sense {
                LpSense::Packing => LpForm::Packing,
                LpSense::Covering => LpForm::Covering,
                LpSense::General => shared.form,
            },
        };
        for r in dataset.records() {
            let Payload::LpRow { c, a } = &r.payload else {
                return Err(Error::input(format!("record {} is not an lp row", r.id)));
            };
            inst.ids.push(r.id);
            inst.c.push(c.clone());
            inst.rows.push(a.clone());
        }
        Ok(inst)
    }

    pub fn to_dataset(&self) -> Result<Dataset> {
        let records = self
            .ids
            .iter()
            .zip(self.c.iter().zip(&self.rows))
            .map(|(&id, (c, a))| crate::dataset::Record {
                id,
                payload: Payload::LpRow { c: c.clone(), a: a.clone() },
                group: None,
            })
            .collect();
        Dataset::new(crate::dataset::DatasetKind::Lp, records)?.with_lp(LpShared {
            b: self.b.clone(),
            sense: self.sense,
            form: self.form,
        })
    }

    /// Number of records.
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    /// Number of shared rows.
    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// Keeps the records at the given positions.
    pub fn select_positions(&self, keep: &[usize]) -> LpInstance {
        LpInstance {
            ids: keep.iter().map(|&p| self.ids[p]).collect(),
            c: keep.iter().map(|&p| self.c[p].clone()).collect(),
            rows: keep.iter().map(|&p| self.rows[p].clone()).collect(),
            b: self.b.clone(),
            sense: self.sense,
            form: self.form,
        }
    }

    /// The same data read in the other form.
    pub fn dual(&self) -> LpInstance {
        let form = match self.form {
            LpForm::Packing => LpForm::Covering,
            LpForm::Covering => LpForm::Packing,
        };
        let sense = match self.sense {
            LpSense::General => LpSense::General,
            _ if form == LpForm::Packing => LpSense::Packing,
            _ => LpSense::Covering,
        };
        LpInstance {
            form,
            sense,
            ..self.clone()
        }
    }

    /// The instance as `max c.y  s.t.  A y <= b, y >= 0`.
    pub fn standard_form(&self) -> StandardLp {
        let (n, m) = (self.n(), self.m());
        match self.form {
            LpForm::Packing => StandardLp {
                c: self.c.clone(),
                a: (0..m).map(|j| (0..n).map(|i| self.rows[i][j].clone()).collect()).collect(),
                b: self.b.clone(),
            },
            LpForm::Covering => StandardLp {
                c: self.b.iter().map(|x| -x).collect(),
                a: self.rows.iter().map(|row| row.iter().map(|x| -x).collect()).collect(),
                b: self.c.iter().map(|x| -x).collect(),
            },
        }
    }

    /// Objective of `primal` in this instance's own sense.
    pub fn objective(&self, primal: &[Rational]) -> Rational {
        let coef = match self.form {
            LpForm::Packing => &self.c,
            LpForm::Covering => &self.b,
        };
        coef.iter().zip(primal).map(|(c, x)| c * x).sum()
    }
}

/// An optimal basic solution of an [`LpInstance`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Packing form: `y` per record. Covering form: `x` per shared row.
    pub primal: Vec<Rational>,
    /// The other side of the duality: `x` per shared row, or `y` per record.
    pub dual: Vec<Rational>,
    /// Maximum for packing form, minimum for covering form.
    pub value: Rational,
    /// Constraints met with equality by `primal`: shared rows in packing
    /// form, record positions in covering form.
    pub tight: Vec<usize>,
    /// Record positions that fix the optimum: removing any other records
    /// leaves the optimal value unchanged. At most `m` of them.
    pub determining: Vec<usize>,
}

impl LpSolution {
    /// Packing variables `y_i` per record position, whichever side they are on.
    pub fn record_multipliers<'a>(&'a self, instance: &LpInstance) -> &'a [Rational] {
        match instance.form {
            LpForm::Packing => &self.primal,
            LpForm::Covering => &self.dual,
        }
    }

    /// Record positions whose covering constraint `sum_j a_ij x_j >= c_i` is
    /// tight at the covering-side solution.
    pub fn tight_records(&self, instance: &LpInstance) -> Vec<usize> {
        match instance.form {
            LpForm::Covering => self.tight.clone(),
            LpForm::Packing => (0..instance.n())
                .filter(|&i| {
                    let lhs: Rational = instance.rows[i].iter().zip(&self.dual).map(|(a, x)| a * x).sum();
                    lhs == instance.c[i]
                })
                .collect(),
        }
    }
}

/// Solves the instance exactly; `n + m` must not exceed [`MAX_LP_SIZE`].
pub fn solve_lp(instance: &LpInstance) -> Result<LpSolution> {
    let (n, m) = (instance.n(), instance.m());
    if n + m > MAX_LP_SIZE {
        return Err(Error::input(format!("LP too large: n + m = {} exceeds {MAX_LP_SIZE}", n + m)));
    }
    let std = instance.standard_form();
    let sol = solve_standard(&std)?;
    let rows = std.b.len();
    let cols = std.c.len();
    let tight = (0..rows)
        .filter(|&r| {
            let lhs: Rational = std.a[r].iter().zip(&sol.y).map(|(a, y)| a * y).sum();
            lhs == std.b[r]
        })
        .collect();
    let determining = match instance.form {
        LpForm::Packing => sol.basic_structurals(cols),
        LpForm::Covering => sol.nonbasic_slack_rows(cols, rows),
    };
    let value = match instance.form {
        LpForm::Packing => sol.value.clone(),
        LpForm::Covering => -sol.value.clone(),
    };
    Ok(LpSolution {
        primal: sol.y,
        dual: sol.duals,
        value,
        tight,
        determining,
    })
}

/// Optimal value as `f64`.
pub fn lp_value(instance: &LpInstance) -> Result<f64> {
    Ok(rational_to_f64(&solve_lp(instance)?.value))
}

fn require_sense(instance: &LpInstance, sense: LpSense) -> Result<()> {
    if instance.sense != sense {
        return Err(Error::input(format!(
            "expected a {} LP, got {}",
            sense.tag(),
            instance.sense.tag()
        )));
    }
    Ok(())
}

/// Sampling plan `p_i ∝ y_i c_i` over the packing-side solution.
fn packing_plan(instance: &LpInstance, y: &[Rational], eps: f64, delta: f64) -> Result<SumSamplingPlan> {
    let weights = y
        .iter()
        .zip(&instance.c)
        .map(|(y, c)| rational_to_f64(&(y * c)).max(0.0))
        .collect();
    SumSamplingPlan::from_weights(instance.ids.clone(), weights, eps, delta)
}

/// Solves the packing LP and samples records in proportion to `y*_i c_i`.
pub fn certify_packing<R: Rng + ?Sized>(
    instance: &LpInstance,
    oracle: &mut VerificationOracle,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<CertifyOutcome> {
    require_sense(instance, LpSense::Packing)?;
    let prepared = PreparedSampling::packing(instance, eps, delta)?;
    prepared.run_inner(oracle, rng)
}

/// Certifies a covering LP through the optimal solution of its dual packing
/// LP; the certified value is the covering optimum.
pub fn certify_covering<R: Rng + ?Sized>(
    instance: &LpInstance,
    oracle: &mut VerificationOracle,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<CertifyOutcome> {
    require_sense(instance, LpSense::Covering)?;
    let prepared = PreparedSampling::covering(instance, eps, delta)?;
    prepared.run_inner(oracle, rng)
}

struct PreparedSampling {
    plan: SumSamplingPlan,
    value: f64,
}

impl PreparedSampling {
    fn packing(instance: &LpInstance, eps: f64, delta: f64) -> Result<Self> {
        check_unit_open("epsilon", eps)?;
        check_unit_open("delta", delta)?;
        let sol = solve_lp(instance)?;
        Ok(PreparedSampling {
            plan: packing_plan(instance, &sol.primal, eps, delta)?,
            value: rational_to_f64(&sol.value),
        })
    }

    fn covering(instance: &LpInstance, eps: f64, delta: f64) -> Result<Self> {
        check_unit_open("epsilon", eps)?;
        check_unit_open("delta", delta)?;
        let primal = solve_lp(instance)?;
        let dual = solve_lp(&instance.dual())?;
        debug_assert_eq!(primal.value, dual.value);
        Ok(PreparedSampling {
            plan: packing_plan(instance, &dual.primal, eps, delta)?,
            value: rational_to_f64(&primal.value),
        })
    }

    fn run_inner<R: Rng + ?Sized>(&self, oracle: &mut VerificationOracle, rng: &mut R) -> Result<CertifyOutcome> {
        self.plan.run(self.value, oracle, rng)
    }
}

impl PreparedCertifier for PreparedSampling {
    fn run(&self, oracle: &mut VerificationOracle, rng: &mut dyn RngCore) -> Result<CertifyOutcome> {
        self.run_inner(oracle, rng)
    }
}

/// Record positions verified by [`certify_general`]: the tight record
/// constraints when there are at most `m`, otherwise one optimal basis.
pub fn general_verification_set(instance: &LpInstance, solution: &LpSolution) -> Vec<usize> {
    let tight = solution.tight_records(instance);
    if tight.len() <= instance.m() {
        tight
    } else {
        solution.determining.clone()
    }
}

/// Deterministic certifier for a general LP: verifies the at most `m`
/// records that determine the optimum.
pub fn certify_general(instance: &LpInstance, oracle: &mut VerificationOracle) -> Result<CertifyOutcome> {
    require_sense(instance, LpSense::General)?;
    let sol = solve_lp(instance)?;
    run_general(instance, &sol, oracle)
}

fn run_general(instance: &LpInstance, sol: &LpSolution, oracle: &mut VerificationOracle) -> Result<CertifyOutcome> {
    let before = oracle.ledger().verifications_charged;
    let mut invalid = Vec::new();
    for pos in general_verification_set(instance, sol) {
        let id = instance.ids[pos];
        if !oracle.verify(id)? {
            invalid.push(id);
        }
    }
    let used = charged_since(oracle, before);
    if invalid.is_empty() {
        Ok(CertifyOutcome::certified(rational_to_f64(&sol.value), used))
    } else {
        Ok(CertifyOutcome::invalid(invalid, used))
    }
}

/// LP certifier for any sense, used by the correction schemes.
#[derive(Debug, Clone, Copy)]
pub struct LpCertifier {
    pub eps: f64,
    pub delta: f64,
}

struct PreparedGeneral {
    instance: LpInstance,
    solution: LpSolution,
}

impl PreparedCertifier for PreparedGeneral {
    fn run(&self, oracle: &mut VerificationOracle, _rng: &mut dyn RngCore) -> Result<CertifyOutcome> {
        run_general(&self.instance, &self.solution, oracle)
    }
}

impl Certifier for LpCertifier {
    fn name(&self) -> String {
        "lp".into()
    }

    fn evaluate(&self, dataset: &Dataset) -> Result<f64> {
        lp_value(&LpInstance::from_dataset(dataset)?)
    }

    fn prepare<'a>(&'a self, dataset: &'a Dataset) -> Result<Box<dyn PreparedCertifier + 'a>> {
        let instance = LpInstance::from_dataset(dataset)?;
        Ok(match instance.sense {
            LpSense::Packing => Box::new(PreparedSampling::packing(&instance, self.eps, self.delta)?),
            LpSense::Covering => Box::new(PreparedSampling::covering(&instance, self.eps, self.delta)?),
            LpSense::General => {
                let solution = solve_lp(&instance)?;
                Box::new(PreparedGeneral { instance, solution })
            }
        })
    }

    fn round_cap(&self, dataset: &Dataset) -> Result<u64> {
        match dataset.lp().map(|s| s.sense) {
            Some(LpSense::General) => Ok(dataset.lp().map_or(0, |s| s.b.len()) as u64),
            _ => certification_sample_count(self.eps, self.delta),
        }
    }
}

/// True when every entry is zero.
pub fn is_zero_vector(v: &[Rational]) -> bool {
    v.iter().all(Zero::is_zero)
}

/// Checks `A y <= b`, `y >= 0` for a packing-form instance, or the covering
/// constraints for a covering-form one.
pub fn is_feasible(instance: &LpInstance, primal: &[Rational]) -> bool {
    if primal.iter().any(Signed::is_negative) {
        return false;
    }
    let std = instance.standard_form();
    std.a
        .iter()
        .zip(&std.b)
        .all(|(row, b)| row.iter().zip(primal).map(|(a, y)| a * y).sum::<Rational>() <= *b)
}
