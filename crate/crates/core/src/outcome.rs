use crate::dataset::GroundTruth;

/// Result of one certification run.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// No invalid record found; carries the value computed on all records.
    Certified(f64),
    /// Witnesses, all genuinely invalid.
    InvalidFound(Vec<usize>),
    /// Assigned only by harness scoring, never by a scheme.
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOutcome {
    pub verdict: Verdict,
    /// Verifications charged during this run.
    pub verifications_used: u64,
    /// The function value was zero, so the multiplicative guarantee is vacuous.
    pub vacuous: bool,
}

impl CertifyOutcome {
    pub fn certified(value: f64, verifications_used: u64) -> Self {
        CertifyOutcome {
            verdict: Verdict::Certified(value),
            verifications_used,
            vacuous: false,
        }
    }

    pub fn vacuous(value: f64) -> Self {
        CertifyOutcome {
            verdict: Verdict::Certified(value),
            verifications_used: 0,
            vacuous: true,
        }
    }

    pub fn invalid(ids: Vec<usize>, verifications_used: u64) -> Self {
        CertifyOutcome {
            verdict: Verdict::InvalidFound(ids),
            verifications_used,
            vacuous: false,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self.verdict, Verdict::Certified(_))
    }

    pub fn certified_value(&self) -> Option<f64> {
        match self.verdict {
            Verdict::Certified(v) => Some(v),
            _ => None,
        }
    }

    pub fn invalid_ids(&self) -> &[usize] {
        match &self.verdict {
            Verdict::InvalidFound(ids) => ids,
            _ => &[],
        }
    }

    /// True when every reported witness is invalid under `truth`.
    pub fn is_sound(&self, truth: &GroundTruth) -> bool {
        self.invalid_ids().iter().all(|&id| truth.is_valid(id) == Some(false))
    }
}
