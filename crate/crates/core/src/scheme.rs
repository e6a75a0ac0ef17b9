//! The certifier abstraction consumed by the correction schemes.

use rand::RngCore;

use crate::dataset::Dataset;
use crate::error::Result;
use crate::oracle::VerificationOracle;
use crate::outcome::CertifyOutcome;

/// A certification scheme for some function `f`, bound to its accuracy
/// parameters.
pub trait Certifier: Send + Sync {
    fn name(&self) -> String;

    /// `f` on the given records.
    fn evaluate(&self, dataset: &Dataset) -> Result<f64>;

    /// Precomputes everything that does not depend on the oracle, so the
    /// same dataset can be certified many times cheaply.
    fn prepare<'a>(&'a self, dataset: &'a Dataset) -> Result<Box<dyn PreparedCertifier + 'a>>;

    /// Upper bound on verifications one run may charge on `dataset`.
    fn round_cap(&self, dataset: &Dataset) -> Result<u64>;

    fn certify(&self, dataset: &Dataset, oracle: &mut VerificationOracle, rng: &mut dyn RngCore) -> Result<CertifyOutcome> {
        self.prepare(dataset)?.run(oracle, rng)
    }
}

pub trait PreparedCertifier {
    fn run(&self, oracle: &mut VerificationOracle, rng: &mut dyn RngCore) -> Result<CertifyOutcome>;
}

/// Charge accrued on `oracle` since `before`.
pub(crate) fn charged_since(oracle: &VerificationOracle, before: u64) -> u64 {
    oracle.ledger().verifications_charged - before
}
