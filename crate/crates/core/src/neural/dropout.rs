use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// Inverted dropout mask: each entry is 0 with probability `rate`, else
/// `1 / (1 - rate)`. A zero rate draws nothing from the rng.
pub(crate) fn sample_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    if rate == 0.0 {
        return vec![1.0; n];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Returns the masked values and the mask that produced them. Evaluation
/// is the identity with a unit mask.
pub fn dropout<R: Rng + ?Sized>(x: &[f64], rate: f64, phase: Phase, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    assert!((0.0..1.0).contains(&rate), "dropout rate {rate} not in [0, 1)");
    let mask = match phase {
        Phase::Eval => vec![1.0; x.len()],
        Phase::Train => sample_mask(x.len(), rate, rng),
    };
    let out = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
    (out, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [0.3, -2.0, 5.0];
        for phase in [Phase::Train, Phase::Eval] {
            let (y, m) = dropout(&x, 0.0, phase, &mut rng);
            assert_eq!(y, x);
            assert_eq!(m, [1.0; 3]);
        }
    }

    #[test]
    fn eval_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [0.3, -2.0, 5.0];
        assert_eq!(dropout(&x, 0.2, Phase::Eval, &mut rng).0, x);
    }

    #[test]
    fn train_mask_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (_, m) = dropout(&[1.0; 1000], 0.2, Phase::Train, &mut rng);
        assert!(m.iter().all(|&v| v == 0.0 || v == 1.25));
        assert!(m.contains(&0.0));
    }
}
