//! Gated recurrent unit built from tape primitives.
//!
//! Gate equations: `z = sigma(Wz x + Uz h + bz)`, `r = sigma(Wr x + Ur h + br)`,
//! `hc = tanh(Wh x + Uh (r*h) + bh)`, `h' = (1-z)*h + z*hc`.

use rand_chacha::ChaCha20Rng;

use super::params::{Init, ParamId, ParamSet};
use super::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

/// Parameter handles for one GRU cell.
#[derive(Debug, Clone, Copy)]
pub struct GruParams {
    pub wz: ParamId,
    pub uz: ParamId,
    pub bz: ParamId,
    pub wr: ParamId,
    pub ur: ParamId,
    pub br: ParamId,
    pub wh: ParamId,
    pub uh: ParamId,
    pub bh: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruParams {
    /// Register the cell's nine tensors under `<prefix>.{wz,uz,bz,...}`.
    pub fn register(
        params: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut ChaCha20Rng,
    ) -> GruParams {
        let w = |params: &mut ParamSet, rng: &mut ChaCha20Rng, name: &str| {
            params.add(
                &format!("{prefix}.{name}"),
                &[hidden_dim, input_dim],
                Init::UniformFanIn(input_dim),
                rng,
            )
        };
        let u = |params: &mut ParamSet, rng: &mut ChaCha20Rng, name: &str| {
            params.add(
                &format!("{prefix}.{name}"),
                &[hidden_dim, hidden_dim],
                Init::UniformFanIn(hidden_dim),
                rng,
            )
        };
        let b = |params: &mut ParamSet, rng: &mut ChaCha20Rng, name: &str| {
            params.add(
                &format!("{prefix}.{name}"),
                &[hidden_dim],
                Init::UniformFanIn(hidden_dim),
                rng,
            )
        };
        GruParams {
            wz: w(params, rng, "wz"),
            uz: u(params, rng, "uz"),
            bz: b(params, rng, "bz"),
            wr: w(params, rng, "wr"),
            ur: u(params, rng, "ur"),
            br: b(params, rng, "br"),
            wh: w(params, rng, "wh"),
            uh: u(params, rng, "uh"),
            bh: b(params, rng, "bh"),
            input_dim,
            hidden_dim,
        }
    }

    /// Look the cell's tensors up by name in an existing parameter set.
    pub fn resolve(params: &ParamSet, prefix: &str, input_dim: usize, hidden_dim: usize) -> GruParams {
        let id = |name: &str| {
            params
                .id(&format!("{prefix}.{name}"))
                .unwrap_or_else(|| panic!("missing GRU tensor `{prefix}.{name}`"))
        };
        GruParams {
            wz: id("wz"),
            uz: id("uz"),
            bz: id("bz"),
            wr: id("wr"),
            ur: id("ur"),
            br: id("br"),
            wh: id("wh"),
            uh: id("uh"),
            bh: id("bh"),
            input_dim,
            hidden_dim,
        }
    }
}

impl From<&GruParams> for crate::nn::tape::GruStepSpec {
    fn from(p: &GruParams) -> Self {
        crate::nn::tape::GruStepSpec {
            wz: p.wz,
            uz: p.uz,
            bz: p.bz,
            wr: p.wr,
            ur: p.ur,
            br: p.br,
            wh: p.wh,
            uh: p.uh,
            bh: p.bh,
            input_dim: p.input_dim as u32,
            hidden_dim: p.hidden_dim as u32,
        }
    }
}

/// One GRU step.
pub fn gru_step(tape: &mut Tape, p: &GruParams, x: Var, h: Var) -> Var {
    tape.gru_step(p.into(), x, h)
}

/// Run a GRU over the first `valid_len` inputs from a zero initial state and
/// return the hidden states, one per consumed input. Positions at or beyond
/// `valid_len` never enter the tape, so they cannot influence anything
/// downstream. `Direction::Reverse` consumes the valid prefix back-to-front.
pub fn gru_sequence(
    tape: &mut Tape,
    p: &GruParams,
    inputs: &[Var],
    valid_len: usize,
    direction: Direction,
) -> Vec<Var> {
    assert!(valid_len <= inputs.len(), "valid_len exceeds sequence length");
    let mut h = tape.zeros(p.hidden_dim);
    let mut states = Vec::with_capacity(valid_len);
    let take = |t: usize| match direction {
        Direction::Forward => inputs[t],
        Direction::Reverse => inputs[valid_len - 1 - t],
    };
    for t in 0..valid_len {
        h = gru_step(tape, p, take(t), h);
        states.push(h);
    }
    states
}
