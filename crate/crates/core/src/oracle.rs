//! The verification oracle: the only path from a scheme to the validity mask.

use std::collections::HashMap;
use std::sync::Arc;

use crate::dataset::GroundTruth;
use crate::error::{Error, Result};

/// How verifications are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetMode {
    /// Every verification is charged; each catch refunds a full attempt.
    Weak,
    /// Verifying an invalid record is free.
    Strong,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetLedger {
    pub mode: BudgetMode,
    pub verifications_charged: u64,
    pub invalid_found: u64,
    pub rounds: u64,
    /// Oracle calls regardless of charge.
    pub calls: u64,
}

impl BudgetLedger {
    pub fn new(mode: BudgetMode) -> Self {
        BudgetLedger {
            mode,
            verifications_charged: 0,
            invalid_found: 0,
            rounds: 0,
            calls: 0,
        }
    }

    /// Weak-model accounting: `charged <= (catches + 1) * attempt_cost`.
    pub fn within_weak_budget(&self, catches: u64, attempt_cost: u64) -> bool {
        self.verifications_charged <= (catches + 1).saturating_mul(attempt_cost)
    }
}

#[derive(Debug, Clone)]
pub struct VerificationOracle {
    truth: Arc<GroundTruth>,
    ledger: BudgetLedger,
    log: Vec<(usize, bool)>,
}

impl VerificationOracle {
    pub fn new(truth: GroundTruth, mode: BudgetMode) -> Self {
        Self::shared(Arc::new(truth), mode)
    }

    pub fn shared(truth: Arc<GroundTruth>, mode: BudgetMode) -> Self {
        VerificationOracle {
            truth,
            ledger: BudgetLedger::new(mode),
            log: Vec::new(),
        }
    }

    /// Reveals whether `id` is valid and charges the ledger.
    ///
    /// Weak mode charges every call; strong mode charges only calls that
    /// return valid. Repeat calls on one id are charged each time.
    pub fn verify(&mut self, id: usize) -> Result<bool> {
        let valid = self
            .truth
            .is_valid(id)
            .ok_or_else(|| Error::input(format!("unknown record id {id} (n = {})", self.truth.len())))?;
        self.ledger.calls += 1;
        if valid || self.ledger.mode == BudgetMode::Weak {
            self.ledger.verifications_charged += 1;
        }
        if !valid {
            self.ledger.invalid_found += 1;
        }
        self.log.push((id, valid));
        Ok(valid)
    }

    pub fn begin_round(&mut self) {
        self.ledger.rounds += 1;
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    pub fn mode(&self) -> BudgetMode {
        self.ledger.mode
    }

    /// Every `(id, result)` revealed so far, in call order.
    pub fn log(&self) -> &[(usize, bool)] {
        &self.log
    }
}

/// Per-run memo so a scheme never pays twice for the same record.
#[derive(Debug, Default)]
pub struct VerificationCache {
    known: HashMap<usize, bool>,
}

impl VerificationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn verify(&mut self, oracle: &mut VerificationOracle, id: usize) -> Result<bool> {
        if let Some(&v) = self.known.get(&id) {
            return Ok(v);
        }
        let v = oracle.verify(id)?;
        self.known.insert(id, v);
        Ok(v)
    }
}
