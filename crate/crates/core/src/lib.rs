//! Randomness extraction from nonstationary independent symbol streams.
//!
//! A noisy source emits independent but not identically distributed symbols;
//! the per-index marginals `ρ_i` converge to a limiting law `p` and obey a
//! Doeblin floor `δ`. This crate turns such a stream into an approximately
//! iid output stream whose per-symbol entropy approaches `H(p)`, using an
//! equivariant, finite-coding-radius construction:
//!
//! 1. marker detection (`a^{2k} b`) and the alternating-interval
//!    decomposition ([`intervals`]),
//! 2. method-of-types codebooks with an exactly uniform rank-based encoder
//!    `ψ : G_k → B_k` ([`typecode`]),
//! 3. dyadic expansion of each codebook symbol into `k+1` output symbols
//!    ([`expand`]),
//! 4. Mešalkin matching to deliver the surplus symbols to intervals that
//!    produced none ([`matching`]),
//! 5. the assembled factor map with per-position coding radii ([`factor`]).
//!
//! The [`analysis`] module carries the verification instruments: entropy
//! estimators, Kakutani dichotomy diagnostics, AEP covers, Hamming-ball
//! counts, and the Hellinger-affinity dissipativity series. [`verify`] runs
//! the whole desk-scale check suite; the `nseb` binary fronts everything.

pub mod analysis;
pub mod expand;
pub mod factor;
pub mod intervals;
pub mod matching;
pub mod source;
pub mod typecode;
pub mod verify;

pub use source::{Alphabet, MarginalSchedule, ProbVector, Window};

/// Errors shared across the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two operands were built over different alphabets.
    #[error("mismatched alphabets: {0}")]
    MismatchedAlphabets(String),
    /// A request exceeds a configured memory or enumeration cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// Parameters violate a structural constraint (named in the message).
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Not enough data to run a statistical check.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// An argument is outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A word was queried against a codebook that does not contain it.
    #[error("word is not in the good set")]
    NotGood,
    /// Inconsistent configuration across pipeline stages.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
