//! Certified computation over datasets that contain invalid records.
//!
//! Schemes reach record validity only through a [`VerificationOracle`], which
//! charges verifications under a weak or strong budget model. Certifiers
//! either attest that the value over all records is within a `(1 ± eps)`
//! factor of the value over the valid ones, or exhibit an invalid record.
//! Correction schemes go further and return an accurate value.

pub mod certify;
pub mod correction;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod instopt;
pub mod lipschitz;
pub mod lp;
pub mod numeric;
pub mod oracle;
pub mod outcome;
pub mod scheme;

pub use dataset::{load_dataset, Dataset, DatasetKind, GroundTruth, Payload, Record};
pub use error::{Error, Result};
pub use oracle::{BudgetLedger, BudgetMode, VerificationOracle};
pub use outcome::{CertifyOutcome, Verdict};
pub use scheme::Certifier;
