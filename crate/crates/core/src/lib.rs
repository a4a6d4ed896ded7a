//! Exact verification of small feedforward ReLU networks.
//!
//! The crate provides three verifier regimes over a shared exact-rational
//! network representation:
//!
//! * [`exact`]: sound and complete linear-spec verification over the whole
//!   input space by enumerating linear regions ([`region`]) and solving an
//!   exact LP ([`lp`]) per region. Cost grows with the region count.
//! * [`bounded`]: interval bound propagation (polynomial, may answer
//!   `Unknown`) and exact verification restricted to a box.
//! * [`proxy`]: pass-fraction scoring on a finite evaluation support.
//!
//! [`symmetry`] and [`diagonal`] build the witnesses showing where each
//! regime stops: function-preserving reparameterizations that change hidden
//! representations, and 1-D networks patched to fool a finite-support proxy.
//! [`harness`] runs the three experiment tracks and writes reports.

pub mod bounded;
pub mod diagonal;
pub mod exact;
pub mod harness;
pub mod lp;
pub mod network;
pub mod proxy;
pub mod rational;
pub mod region;
pub mod symmetry;

pub use bounded::{ibp_bounds, verify_bounded, BoundedMethod, IntervalVector};
pub use exact::{equivalence_check, verify_full, BinaryVerdict, LinearSpec, Verdict, VerdictKind};
pub use lp::{ConstraintSystem, LpOutcome};
pub use network::{ActivationPattern, HiddenTrace, Layer, Network};
pub use rational::Rational;
pub use region::{Domain, Region};

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("region cap of {cap} exceeded")]
    RegionCap { cap: usize },
    #[error("pattern oracle limited to {cap} hidden neurons, network has {neurons}")]
    OracleCap { cap: usize, neurons: usize },
    #[error("invalid symmetry transform: {0}")]
    InvalidTransform(String),
    #[error("network has no hidden layer of width >= 2")]
    NoWideLayer,
    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),
    #[error("evaluation support is empty")]
    EmptySupport,
    #[error("invalid patch plan: {0}")]
    InvalidPlan(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error(transparent)]
    Parse(#[from] rational::ParseRationalError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
