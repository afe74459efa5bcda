use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Unnormalized complex DFT of a fixed power-of-two length.
#[derive(Clone)]
pub struct Fft {
    n: usize,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl fmt::Debug for Fft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft").field("n", &self.n).finish()
    }
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `X_k = Σ_j x_j e^{−2πijk/n}` over consecutive chunks of length `n`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// `x_j = Σ_k X_k e^{+2πijk/n}` (no `1/n`).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }
}

/// Unnormalized 2-D DFT over a row-major `n1 × n2` buffer.
#[derive(Clone, Debug)]
pub struct Fft2 {
    rows: Fft,
    cols: Fft,
}

impl Fft2 {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        Ok(Self {
            rows: Fft::new(n2)?,
            cols: Fft::new(n1)?,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.cols.len(), self.rows.len())
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.apply(buf, false);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.apply(buf, true);
    }

    fn apply(&self, buf: &mut [Complex64], inverse: bool) {
        let (n1, n2) = self.dims();
        debug_assert_eq!(buf.len(), n1 * n2);
        if inverse {
            self.rows.inverse(buf);
        } else {
            self.rows.forward(buf);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n1];
        for j in 0..n2 {
            for i in 0..n1 {
                col[i] = buf[i * n2 + j];
            }
            if inverse {
                self.cols.inverse(&mut col);
            } else {
                self.cols.forward(&mut col);
            }
            for i in 0..n1 {
                buf[i * n2 + j] = col[i];
            }
        }
    }
}

/// Signed frequency of DFT index `i` on an axis of length `n`.
pub fn frequency(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(Fft::new(65), Err(Error::NotPowerOfTwo(65))));
        assert!(Fft2::new(8, 12).is_err());
    }

    #[test]
    fn forward_then_inverse_scales_by_n() {
        let fft = Fft::new(16).unwrap();
        let orig: Vec<Complex64> = (0..16)
            .map(|j| Complex64::new(j as f64, -(j as f64) * 0.5))
            .collect();
        let mut buf = orig.clone();
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a / 16.0 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn frequencies() {
        let f: Vec<i64> = (0..8).map(|i| frequency(i, 8)).collect();
        assert_eq!(f, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }
}
