//! Central-finite-difference verification of reverse-mode gradients.

use super::params::{Grads, ParamSet};
use super::tape::{Tape, Var};

pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for the relative error: coordinates where both gradients
/// are below this are effectively compared absolutely, which keeps
/// finite-difference noise on near-zero gradients from dominating the report.
const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub n_coords: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Compare the tape gradient of a scalar computation against central finite
/// differences over every parameter coordinate.
///
/// `f` must be a pure function of the parameter values: it is re-evaluated
/// under coordinate perturbations of `params`.
pub fn grad_check<F>(params: &mut ParamSet, f: F, tolerance: f64) -> GradCheckReport
where
    F: Fn(&ParamSet, &mut Tape) -> Var,
{
    let analytic = {
        let mut tape = Tape::new(params);
        let loss = f(params, &mut tape);
        let mut grads = Grads::zeros_like(params);
        tape.backward(loss, &mut grads);
        grads.data().to_vec()
    };

    let eval = |params: &ParamSet| -> f64 {
        let mut tape = Tape::new(params);
        let loss = f(params, &mut tape);
        tape.scalar(loss)
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        n_coords: params.len(),
        tolerance,
    };

    for i in 0..params.len() {
        let original = params.data()[i];
        params.data_mut()[i] = original + FD_STEP;
        let up = eval(params);
        params.data_mut()[i] = original - FD_STEP;
        let down = eval(params);
        params.data_mut()[i] = original;

        let fd = (up - down) / (2.0 * FD_STEP);
        let a = analytic[i];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(REL_FLOOR);
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_param = params.name_of_flat_index(i).to_owned();
            report.worst_index = i;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::attention::{attention_pool, AttentionParams};
    use crate::nn::gru::{gru_sequence, gru_step, Direction, GruParams};
    use crate::nn::params::Init;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn linear_function_matches_exactly() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut params = ParamSet::new();
        params.add("x", &[4], Init::UniformFanIn(4), &mut rng);
        let coeffs = [2.0, -3.0, 0.5, 1.25];
        let report = grad_check(
            &mut params,
            |p, tape| {
                let x = tape.param(p.id("x").unwrap());
                let c = tape.input(&coeffs);
                tape.dot_product(x, c)
            },
            1e-6,
        );
        assert!(report.pass(), "max rel err {}", report.max_rel_err);
        assert!(report.max_rel_err < 1e-8);
    }

    #[test]
    fn corrupted_gradient_fails_the_check() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut params = ParamSet::new();
        params.add("x", &[3], Init::UniformFanIn(3), &mut rng);
        // tanh forward paired with a *wrong* downstream scale: compare
        // d/dx of 2*sum(tanh(x)) against the tape of sum(tanh(x)).
        let tape_loss = |p: &ParamSet, tape: &mut Tape| {
            let x = tape.param(p.id("x").unwrap());
            let t = tape.tanh(x);
            let ones = tape.input(&[1.0, 1.0, 1.0]);
            tape.dot_product(t, ones)
        };
        let analytic = {
            let mut tape = Tape::new(&params);
            let loss = tape_loss(&params, &mut tape);
            let mut grads = Grads::zeros_like(&params);
            tape.backward(loss, &mut grads);
            let mut g = grads.data().to_vec();
            for v in &mut g {
                *v *= 2.0; // deliberate corruption
            }
            g
        };
        // Re-run the checker manually against the corrupted gradient.
        let mut worst: f64 = 0.0;
        for i in 0..params.len() {
            let original = params.data()[i];
            let eval = |p: &ParamSet| {
                let mut tape = Tape::new(p);
                let loss = tape_loss(p, &mut tape);
                tape.scalar(loss)
            };
            params.data_mut()[i] = original + FD_STEP;
            let up = eval(&params);
            params.data_mut()[i] = original - FD_STEP;
            let down = eval(&params);
            params.data_mut()[i] = original;
            let fd = (up - down) / (2.0 * FD_STEP);
            let a = analytic[i];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-3));
        }
        assert!(worst > 1e-2, "corruption went undetected: {worst}");
    }

    #[test]
    fn gru_step_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut params = ParamSet::new();
        let gp = GruParams::register(&mut params, "g", 3, 4, &mut rng);
        // Treat x and h as parameters so the check also covers d/dx and d/dh.
        params.add("x", &[3], Init::UniformFanIn(1), &mut rng);
        params.add("h", &[4], Init::UniformFanIn(1), &mut rng);
        let report = grad_check(
            &mut params,
            |p, tape| {
                let x = tape.param(p.id("x").unwrap());
                let h = tape.param(p.id("h").unwrap());
                let h2 = gru_step(tape, &gp, x, h);
                let weights = tape.input(&[0.7, -1.3, 0.2, 0.9]);
                tape.dot_product(h2, weights)
            },
            1e-6,
        );
        assert!(
            report.pass(),
            "worst {} at {}[{}]",
            report.max_rel_err,
            report.worst_param,
            report.worst_index
        );
    }

    #[test]
    fn attention_pool_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut params = ParamSet::new();
        let ap = AttentionParams::register(&mut params, "attn", 3, &mut rng);
        params.add("s0", &[3], Init::UniformFanIn(1), &mut rng);
        params.add("s1", &[3], Init::UniformFanIn(1), &mut rng);
        params.add("s2", &[3], Init::UniformFanIn(1), &mut rng);
        let report = grad_check(
            &mut params,
            |p, tape| {
                let states: Vec<_> = ["s0", "s1", "s2"]
                    .iter()
                    .map(|n| tape.param(p.id(n).unwrap()))
                    .collect();
                let pooled = attention_pool(tape, &ap, &states);
                let weights = tape.input(&[1.1, -0.4, 0.6]);
                tape.dot_product(pooled.context, weights)
            },
            1e-6,
        );
        assert!(
            report.pass(),
            "worst {} at {}[{}]",
            report.max_rel_err,
            report.worst_param,
            report.worst_index
        );
    }

    #[test]
    fn sequence_and_loss_composition_gradient_matches() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut params = ParamSet::new();
        let gp = GruParams::register(&mut params, "g", 2, 3, &mut rng);
        let ap = AttentionParams::register(&mut params, "attn", 3, &mut rng);
        let out_w = params.add("out.w", &[1, 3], Init::UniformFanIn(3), &mut rng);
        let out_b = params.add("out.b", &[1], Init::UniformFanIn(3), &mut rng);
        let inputs: Vec<Vec<f64>> = {
            let mut r = ChaCha20Rng::seed_from_u64(6);
            (0..4)
                .map(|_| (0..2).map(|_| r.random::<f64>() - 0.5).collect())
                .collect()
        };
        let report = grad_check(
            &mut params,
            |_, tape| {
                let xs: Vec<_> = inputs.iter().map(|v| tape.input(v)).collect();
                let states = gru_sequence(tape, &gp, &xs, 3, Direction::Forward);
                let pooled = attention_pool(tape, &ap, &states);
                let logit_v = tape.matvec(out_w, pooled.context);
                let bias = tape.param(out_b);
                let logit = tape.add(logit_v, bias);
                let prob = tape.sigmoid(logit);
                tape.weighted_bce(prob, true, 3.0)
            },
            1e-6,
        );
        assert!(
            report.pass(),
            "worst {} at {}[{}]",
            report.max_rel_err,
            report.worst_param,
            report.worst_index
        );
    }

    #[test]
    fn statistical_reductions_gradient_matches() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut params = ParamSet::new();
        params.add("logits", &[5], Init::UniformFanIn(1), &mut rng);

        // noisy-or
        let report = grad_check(
            &mut params,
            |p, tape| {
                let logits = tape.param(p.id("logits").unwrap());
                let probs = tape.sigmoid(logits);
                let misses = tape.one_minus(probs);
                let none = tape.prod(misses);
                let prob = tape.one_minus(none);
                tape.weighted_bce(prob, true, 2.0)
            },
            1e-6,
        );
        assert!(report.pass(), "noisy-or: {}", report.max_rel_err);

        // geometric mean
        let report = grad_check(
            &mut params,
            |p, tape| {
                let logits = tape.param(p.id("logits").unwrap());
                let probs = tape.sigmoid(logits);
                let lnp = tape.ln(probs);
                let mean = tape.mean(lnp);
                let prob = tape.exp(mean);
                tape.weighted_bce(prob, false, 2.0)
            },
            1e-6,
        );
        assert!(report.pass(), "geo-mean: {}", report.max_rel_err);

        // max (differentiable away from ties)
        let report = grad_check(
            &mut params,
            |p, tape| {
                let logits = tape.param(p.id("logits").unwrap());
                let probs = tape.sigmoid(logits);
                let max = tape.max_reduce(probs);
                tape.weighted_bce(max, true, 2.0)
            },
            1e-6,
        );
        assert!(report.pass(), "max: {}", report.max_rel_err);
    }
}
