//! Minimal differentiable numerics: a gradient tape over dense vectors,
//! GRU cells, additive attention pooling, the class-weighted cross-entropy
//! loss, Adam, gradient checking and bit-exact checkpoints.

pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod gradcheck;
pub mod gru;
pub mod params;
pub mod tape;

pub use adam::AdamState;
pub use attention::{attention_pool, AttentionParams, Pooled};
pub use gradcheck::{grad_check, GradCheckReport};
pub use gru::{gru_sequence, gru_step, Direction, GruParams};
pub use params::{Grads, Init, ParamId, ParamSet};
pub use tape::{Tape, Var, PROB_EPS};

/// Class-weighted binary cross-entropy, the scalar counterpart of
/// [`Tape::weighted_bce`]: `-w*y*ln(p) - (1-y)*ln(1-p)` with `p` clamped to
/// `[PROB_EPS, 1-PROB_EPS]`.
pub fn weighted_bce(p: f64, y: bool, w: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if y {
        -w * p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_bce_hand_values() {
        assert!(weighted_bce(0.5, false, 123.0) - std::f64::consts::LN_2 < 1e-12);
        let heavy = weighted_bce(0.5, true, 500.0);
        assert!((heavy - 500.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!((heavy - 346.574).abs() < 1e-3);
        assert!(weighted_bce(1.0, true, 1.0) < 1e-5);
        assert!(weighted_bce(0.0, true, 1.0).is_finite());
        assert!(weighted_bce(1.0, false, 1.0).is_finite());
    }
}
