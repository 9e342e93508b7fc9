#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Smallest probability the loss will take the log of.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// `-ln p[target]`, with `p` floored at [`PROBABILITY_FLOOR`].
pub fn cross_entropy(probs: &[f64], target: usize) -> f64 {
    -probs[target].max(PROBABILITY_FLOOR).ln()
}
