//! Minimal dense tensor plus the handful of kernels the network needs.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::DimensionMismatch {
                what: "tensor data",
                expected,
                actual: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Entries drawn uniformly from `[-bound, bound)`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(&self.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Leading extent; for a vector this is its length.
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Trailing extent of a matrix (1 for vectors).
    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1..].iter().product()
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }
}

/// Dot product with four independent accumulators so the loop pipelines.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out += W x` for a row-major `W` of shape `out.len() × x.len()`.
pub(crate) fn matvec_add(w: &Tensor, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.cols(), x.len());
    debug_assert_eq!(w.rows(), out.len());
    for (i, o) in out.iter_mut().enumerate() {
        *o += dot(w.row(i), x);
    }
}

/// `out += Wᵀ d`
pub(crate) fn matvec_t_add(w: &Tensor, d: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.rows(), d.len());
    debug_assert_eq!(w.cols(), out.len());
    for (i, &di) in d.iter().enumerate() {
        if di != 0.0 {
            axpy(di, w.row(i), out);
        }
    }
}

/// `G += d xᵀ`
pub(crate) fn outer_add(g: &mut Tensor, d: &[f64], x: &[f64]) {
    debug_assert_eq!(g.rows(), d.len());
    debug_assert_eq!(g.cols(), x.len());
    for (i, &di) in d.iter().enumerate() {
        if di != 0.0 {
            axpy(di, x, g.row_mut(i));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::from_vec(&[2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.row(1), [3.0, 4.0, 5.0]);
        assert_eq!((t.rows(), t.cols()), (2, 3));
    }

    #[test]
    fn kernels_match_naive() {
        let w = Tensor::from_vec(&[2, 5], (0..10).map(|v| v as f64 * 0.5 - 2.0).collect()).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut y = vec![1.0, 1.0];
        matvec_add(&w, &x, &mut y);
        for (i, yi) in y.iter().enumerate() {
            let naive: f64 = 1.0 + (0..5).map(|j| w.row(i)[j] * x[j]).sum::<f64>();
            assert!((yi - naive).abs() < 1e-12);
        }
        let d = [0.5, -1.5];
        let mut xt = vec![0.0; 5];
        matvec_t_add(&w, &d, &mut xt);
        for (j, v) in xt.iter().enumerate() {
            let naive = w.row(0)[j] * d[0] + w.row(1)[j] * d[1];
            assert!((v - naive).abs() < 1e-12);
        }
        let mut g = Tensor::zeros(&[2, 5]);
        outer_add(&mut g, &d, &x);
        assert_eq!(g.row(1)[3], -1.5 * 3.0);
    }
}
