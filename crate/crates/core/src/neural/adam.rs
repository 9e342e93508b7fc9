use super::network::{Gradients, Weights};
use crate::error::{Error, Result};

/// First/second moment estimates for every trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Weights,
    pub v: Weights,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(like: &Weights) -> Self {
        AdamState {
            m: like.zeros_like(),
            v: like.zeros_like(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam step. Rejects non-finite gradients before
/// touching anything.
pub fn adam_update(params: &mut Weights, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    let named = grads.named_tensors();
    for (name, g) in &named {
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient { tensor: name.clone() });
        }
    }
    let shapes_match = params
        .named_tensors()
        .iter()
        .zip(&named)
        .all(|((_, p), (_, g))| p.shape() == g.shape());
    if !shapes_match || state.m.named_tensors().len() != named.len() {
        return Err(Error::InvalidArgument("gradient shapes do not match parameters".into()));
    }

    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, (_, g)), m), v) in params.tensors_mut().into_iter().zip(&named).zip(ms).zip(vs) {
        let iter = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut());
        for (((p, &g), m), v) in iter {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn weights() -> Weights {
        Weights::init(3, 4, 5, &mut ChaCha8Rng::seed_from_u64(2))
    }

    fn filled(like: &Weights, value: f64) -> Weights {
        let mut g = like.zeros_like();
        for t in g.tensors_mut() {
            t.fill(value);
        }
        g
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        let mut w = weights();
        let before = w.clone();
        let mut s = AdamState::new(&w);
        let g = w.zeros_like();
        adam_update(&mut w, &g, &mut s, 1e-3).unwrap();
        assert_eq!(w, before);
        assert_eq!(s.m, before.zeros_like());
        assert_eq!(s.v, before.zeros_like());
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut w = weights();
        let before = w.clone();
        let mut s = AdamState::new(&w);
        let lr = 1e-4;
        let g = filled(&w, 1.0);
        adam_update(&mut w, &g, &mut s, lr).unwrap();
        let expected = lr / (1.0 + 1e-8);
        for ((_, a), (_, b)) in before.named_tensors().iter().zip(w.named_tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!(((x - y) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pure_given_state() {
        let w0 = weights();
        let g = filled(&w0, 0.3);
        let s0 = AdamState::new(&w0);
        let (mut w1, mut s1) = (w0.clone(), s0.clone());
        let (mut w2, mut s2) = (w0.clone(), s0.clone());
        adam_update(&mut w1, &g, &mut s1, 1e-3).unwrap();
        adam_update(&mut w2, &g, &mut s2, 1e-3).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut w = weights();
        let before = w.clone();
        let mut g = w.zeros_like();
        g.dense1.bias.data_mut()[1] = f64::NAN;
        let mut s = AdamState::new(&w);
        let err = adam_update(&mut w, &g, &mut s, 1e-3).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref tensor } if tensor == "dense1.bias"));
        assert_eq!(w, before);
        assert_eq!(s.t, 0);
    }

    #[test]
    fn zero_learning_rate_is_bit_identical() {
        let mut w = weights();
        let before = w.clone();
        let mut s = AdamState::new(&w);
        let g = filled(&w, -0.7);
        adam_update(&mut w, &g, &mut s, 0.0).unwrap();
        assert_eq!(w, before);
    }
}
