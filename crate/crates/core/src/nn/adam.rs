//! Adam with bias correction and non-decoupled L2 weight decay.

use super::Scalar;

/// Optimizer hyperparameters. Defaults follow the training recipe:
/// lr 1e-4, betas (0.9, 0.999), eps 1e-8, L2 1e-3 on weights only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub l2_lambda: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, l2_lambda: 1e-3 }
    }
}

/// First/second moment accumulators for one parameter group.
#[derive(Debug, Clone)]
pub struct AdamSlot<S> {
    pub m: Vec<S>,
    pub v: Vec<S>,
}

/// Moments for every parameter group plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    pub t: u64,
    slots: Vec<AdamSlot<S>>,
}

impl<S: Scalar> AdamState<S> {
    /// One slot per parameter group, sized by `group_sizes` (frozen groups
    /// keep an untouched slot so indices stay stable).
    pub fn new(group_sizes: &[usize]) -> Self {
        Self {
            t: 0,
            slots: group_sizes
                .iter()
                .map(|&n| AdamSlot { m: vec![S::ZERO; n], v: vec![S::ZERO; n] })
                .collect(),
        }
    }

    /// Advance the shared step counter; the returned scale carries the
    /// bias corrections for this step.
    pub fn begin_step(&mut self) -> AdamStepScale {
        self.t += 1;
        AdamStepScale { t: self.t }
    }

    pub fn slot_mut(&mut self, group: usize) -> &mut AdamSlot<S> {
        &mut self.slots[group]
    }
}

pub struct AdamStepScale {
    pub t: u64,
}

impl AdamStepScale {
    fn corrections(&self, hyper: &AdamHyper) -> (f64, f64) {
        (
            1.0 - hyper.beta1.powi(self.t as i32),
            1.0 - hyper.beta2.powi(self.t as i32),
        )
    }
}

/// Update one trainable group in place. `weight_decay` adds
/// l2_lambda * w to the gradient first (conv/dense weights only — never
/// biases or BN parameters). Call [`AdamState::begin_step`] once per
/// optimizer step, then this for each trainable group.
pub fn adam_update_group<S: Scalar>(
    hyper: &AdamHyper,
    scale: &AdamStepScale,
    slot: &mut AdamSlot<S>,
    params: &mut [S],
    grads: &[S],
    weight_decay: bool,
) {
    assert_eq!(params.len(), grads.len(), "adam group size mismatch");
    assert_eq!(params.len(), slot.m.len(), "adam slot size mismatch");
    let (bias1, bias2) = scale.corrections(hyper);
    let beta1 = S::from_f64(hyper.beta1);
    let beta2 = S::from_f64(hyper.beta2);
    let one_minus_b1 = S::ONE - beta1;
    let one_minus_b2 = S::ONE - beta2;
    let lr = S::from_f64(hyper.lr);
    let eps = S::from_f64(hyper.eps);
    let lambda = S::from_f64(hyper.l2_lambda);
    let inv_bias1 = S::from_f64(1.0 / bias1);
    let inv_bias2 = S::from_f64(1.0 / bias2);

    for i in 0..params.len() {
        let mut g = grads[i];
        if weight_decay {
            g += lambda * params[i];
        }
        slot.m[i] = beta1 * slot.m[i] + one_minus_b1 * g;
        slot.v[i] = beta2 * slot.v[i] + one_minus_b2 * g * g;
        let m_hat = slot.m[i] * inv_bias1;
        let v_hat = slot.v[i] * inv_bias2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper(lr: f64, l2: f64) -> AdamHyper {
        AdamHyper { lr, l2_lambda: l2, ..AdamHyper::default() }
    }

    #[test]
    fn first_step_closed_form() {
        // g=1, w=0, lambda=0: m_hat = v_hat = 1 -> delta = -lr / (1 + eps)
        let h = hyper(1e-4, 0.0);
        let mut state = AdamState::<f64>::new(&[1]);
        let scale = state.begin_step();
        let mut w = vec![0.0f64];
        adam_update_group(&h, &scale, state.slot_mut(0), &mut w, &[1.0], false);
        assert!((w[0] + 1e-4).abs() < 1e-9, "w = {}", w[0]);
    }

    #[test]
    fn zero_gradient_is_a_noop() {
        let h = hyper(0.01, 0.0);
        let mut state = AdamState::<f64>::new(&[3]);
        let mut w = vec![1.0, -2.0, 0.5];
        let orig = w.clone();
        for _ in 0..5 {
            let scale = state.begin_step();
            adam_update_group(&h, &scale, state.slot_mut(0), &mut w, &[0.0; 3], false);
        }
        assert_eq!(w, orig);
        assert_eq!(state.t, 5);
    }

    #[test]
    fn descends_a_quadratic() {
        // f(w) = w^2, grad = 2w, from w=1 at lr 0.01
        let h = hyper(0.01, 0.0);
        let mut state = AdamState::<f64>::new(&[1]);
        let mut w = vec![1.0f64];
        for _ in 0..100 {
            let g = [2.0 * w[0]];
            let scale = state.begin_step();
            adam_update_group(&h, &scale, state.slot_mut(0), &mut w, &g, false);
        }
        assert!(w[0].abs() < 0.5, "w = {}", w[0]);
    }

    #[test]
    fn weight_decay_pulls_toward_zero() {
        let h = hyper(0.01, 0.1);
        let mut state = AdamState::<f64>::new(&[1]);
        let mut w = vec![2.0f64];
        for _ in 0..200 {
            let scale = state.begin_step();
            adam_update_group(&h, &scale, state.slot_mut(0), &mut w, &[0.0], true);
        }
        assert!(w[0].abs() < 1.0, "w = {}", w[0]);
    }
}
