//! Additive attention pooling over a set of hidden states.
//!
//! Each state is scored by `u_t = tanh(W h_t + b)`, `s_t = u_t . ctx`; the
//! scores pass through a softmax and the pooled output is the weighted sum of
//! the states. Masked positions are simply not passed in; pooling zero states
//! yields a zero context by contract.

use rand_chacha::ChaCha20Rng;

use super::params::{Init, ParamId, ParamSet};
use super::tape::{Tape, Var};

#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub w: ParamId,
    pub b: ParamId,
    pub ctx: ParamId,
    pub dim: usize,
}

impl AttentionParams {
    pub fn register(
        params: &mut ParamSet,
        prefix: &str,
        dim: usize,
        rng: &mut ChaCha20Rng,
    ) -> AttentionParams {
        AttentionParams {
            w: params.add(
                &format!("{prefix}.w"),
                &[dim, dim],
                Init::UniformFanIn(dim),
                rng,
            ),
            b: params.add(&format!("{prefix}.b"), &[dim], Init::UniformFanIn(dim), rng),
            ctx: params.add(
                &format!("{prefix}.ctx"),
                &[dim],
                Init::UniformFanIn(dim),
                rng,
            ),
            dim,
        }
    }

    pub fn resolve(params: &ParamSet, prefix: &str, dim: usize) -> AttentionParams {
        let id = |name: &str| {
            params
                .id(&format!("{prefix}.{name}"))
                .unwrap_or_else(|| panic!("missing attention tensor `{prefix}.{name}`"))
        };
        AttentionParams {
            w: id("w"),
            b: id("b"),
            ctx: id("ctx"),
            dim,
        }
    }
}

/// Pooled context plus the attention weights over the pooled states (absent
/// when zero states were pooled).
pub struct Pooled {
    pub context: Var,
    pub weights: Option<Var>,
}

pub fn attention_pool(tape: &mut Tape, p: &AttentionParams, states: &[Var]) -> Pooled {
    if states.is_empty() {
        return Pooled {
            context: tape.zeros(p.dim),
            weights: None,
        };
    }
    let ctx = tape.param(p.ctx);
    let bias = tape.param(p.b);
    let mut scores = Vec::with_capacity(states.len());
    for &h in states {
        assert_eq!(h.len(), p.dim, "attention state dimension mismatch");
        let wh = tape.matvec(p.w, h);
        let pre = tape.add(wh, bias);
        let u = tape.tanh(pre);
        scores.push(tape.dot_product(u, ctx));
    }
    let stacked = tape.concat(&scores);
    let weights = tape.softmax(stacked);
    let context = tape.weighted_sum(weights, states);
    Pooled {
        context,
        weights: Some(weights),
    }
}
