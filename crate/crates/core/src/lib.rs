//! One-class GAN stability classifier for smart-grid data.
//!
//! The generator is pushed away from the stable-data distribution by a
//! hinge repulsion loss, so the discriminator learns to separate stable
//! grid states from everything else while only ever seeing stable samples.
//! An optional adversarial training layer feeds FGSM-perturbed stable
//! samples to the discriminator as unstable, which hardens it against
//! evasion attacks.
//!
//! Modules:
//!
//! - [`nn`]: dense networks, one LSTM cell, Adam, BCE, all in `f64`.
//! - [`data`]: CSV ingestion, sixfold consumer-permutation augmentation,
//!   z-score normalization, stable-only splits, windowing.
//! - [`gan`]: architectures, repulsion loss, the four-step trainer,
//!   classification and checkpoints.
//! - [`attacks`]: FGSM, BIM, RFGSM, PGD, the query-only GAN-GRID attacker and
//!   budget verification.
//! - [`surrogate`]: recurrent surrogate for transfer attacks.
//! - [`eval`]: confusion matrices, accuracy/F1, ROC/AUC, scenario tables and
//!   timing.

pub mod attacks;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod gan;
pub mod nn;
pub mod surrogate;

pub use error::{Error, Result};

/// Seeded RNG used throughout. ChaCha8 is portable, so seeded runs agree
/// across platforms.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
