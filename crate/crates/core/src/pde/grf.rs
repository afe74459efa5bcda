use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{gemm, Tensor};
use crate::error::{Error, Result};
use crate::spectral::{frequency, Fft, Fft2};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    NeumannCosine,
}

/// Gaussian measure `N(0, σ²(−Δ + τ²I)^{−α})` discretized on an `n`-point
/// (per axis) grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrfSpec {
    pub dim: usize,
    pub sigma2: f64,
    pub tau2: f64,
    pub alpha: f64,
    pub boundary: Boundary,
    pub n: usize,
}

impl GrfSpec {
    /// `625(−Δ + 25I)^{−2}` on the periodic unit interval.
    pub fn burgers(n: usize) -> Self {
        Self {
            dim: 1,
            sigma2: 625.0,
            tau2: 25.0,
            alpha: 2.0,
            boundary: Boundary::Periodic,
            n,
        }
    }

    /// `(−Δ + 9I)^{−2}` with zero-Neumann cosine modes on the unit square.
    pub fn darcy(n: usize) -> Self {
        Self {
            dim: 2,
            sigma2: 1.0,
            tau2: 9.0,
            alpha: 2.0,
            boundary: Boundary::NeumannCosine,
            n,
        }
    }

    /// `7^{3/2}(−Δ + 49I)^{−2.5}` on the periodic unit square.
    pub fn navier_stokes(n: usize) -> Self {
        Self {
            dim: 2,
            sigma2: 7f64.powf(1.5),
            tau2: 49.0,
            alpha: 2.5,
            boundary: Boundary::Periodic,
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::InvalidConfig(format!(
                "GRF dimension {} (expected 1 or 2)",
                self.dim
            )));
        }
        if !(self.sigma2 > 0.0 && self.alpha > 0.0 && self.tau2 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "GRF needs σ² > 0, α > 0, τ² ≥ 0 (got {}, {}, {})",
                self.sigma2, self.alpha, self.tau2
            )));
        }
        if !self.n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(self.n));
        }
        if self.boundary == Boundary::Periodic && self.tau2 == 0.0 {
            return Err(Error::InvalidConfig(
                "periodic GRF with τ² = 0 has infinite mode-0 variance".into(),
            ));
        }
        Ok(())
    }

    /// Variance of the mode with squared integer wavenumber `k2 = |k|²`.
    pub fn eigenvalue(&self, k2: f64) -> f64 {
        let scale = match self.boundary {
            Boundary::Periodic => 4.0 * std::f64::consts::PI.powi(2),
            Boundary::NeumannCosine => std::f64::consts::PI.powi(2),
        };
        self.sigma2 * (scale * k2 + self.tau2).powf(-self.alpha)
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.dim]
    }
}

/// One draw of the field on the grid. Periodic fields live on `x_j = j/n`,
/// cosine fields on the nodes `x_j = j/(n−1)` including both ends.
pub fn grf_sample(spec: &GrfSpec, seed: u64) -> Result<Tensor> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec.boundary {
        Boundary::Periodic => periodic(spec, &mut rng),
        Boundary::NeumannCosine => cosine(spec, &mut rng),
    }
}

fn periodic(spec: &GrfSpec, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    let n = spec.n;
    let total = n.pow(spec.dim as u32);
    // Re(Σ c_k e^{2πi⟨k,x⟩}) with c_k circular complex normal of variance 2λ_k
    // has exactly the Hermitian coefficients (c_k + conj c_{−k})/2: variance
    // λ_k split ½/½ off the self-conjugate modes, real N(0, λ_k) on them.
    let mut buf: Vec<Complex64> = (0..total)
        .map(|idx| {
            let k2: i64 = if spec.dim == 1 {
                frequency(idx, n).pow(2)
            } else {
                frequency(idx / n, n).pow(2) + frequency(idx % n, n).pow(2)
            };
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * spec.eigenvalue(k2 as f64).sqrt()
        })
        .collect();
    if spec.dim == 1 {
        Fft::new(n)?.inverse(&mut buf);
    } else {
        Fft2::new(n, n)?.inverse(&mut buf);
    }
    Tensor::new(&spec.shape(), buf.iter().map(|c| c.re).collect())
}

/// `basis[j, k] = φ_k(x_j)`, the L²-orthonormal cosines on the nodes.
fn cosine_basis(n: usize) -> Vec<f64> {
    let h = 1.0 / (n - 1) as f64;
    let mut basis = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            basis[j * n + k] = if k == 0 {
                1.0
            } else {
                std::f64::consts::SQRT_2 * (std::f64::consts::PI * k as f64 * j as f64 * h).cos()
            };
        }
    }
    basis
}

fn cosine(spec: &GrfSpec, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    let n = spec.n;
    let basis = cosine_basis(n);
    if spec.dim == 1 {
        let coeff: Vec<f64> = (0..n)
            .map(|k| {
                let xi: f64 = StandardNormal.sample(rng);
                xi * spec.eigenvalue((k * k) as f64).sqrt()
            })
            .collect();
        let mut out = vec![0.0; n];
        gemm(n, n, 1, &basis, (n, 1), &coeff, (1, 1), &mut out, 0.0);
        return Tensor::new(&[n], out);
    }
    let coeff: Vec<f64> = (0..n * n)
        .map(|idx| {
            let (k1, k2) = (idx / n, idx % n);
            let xi: f64 = StandardNormal.sample(rng);
            xi * spec.eigenvalue((k1 * k1 + k2 * k2) as f64).sqrt()
        })
        .collect();
    // Φ·C·Φᵀ
    let mut tmp = vec![0.0; n * n];
    gemm(n, n, n, &basis, (n, 1), &coeff, (n, 1), &mut tmp, 0.0);
    let mut out = vec![0.0; n * n];
    gemm(n, n, n, &tmp, (n, 1), &basis, (1, n), &mut out, 0.0);
    Tensor::new(&[n, n], out)
}

/// Darcy coefficient map: 12 where the field is `≥ 0`, 3 elsewhere.
pub fn psi_threshold(g: &Tensor) -> Tensor {
    g.map(|x| if x >= 0.0 { 12.0 } else { 3.0 })
}
