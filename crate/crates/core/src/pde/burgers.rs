use std::f64::consts::PI;

use num_complex::Complex64;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::spectral::{frequency, Fft};

/// RK4 covers the imaginary axis up to `|λ·dt| ≈ 2.83`.
pub const RK4_IMAG_BOUND: f64 = 2.8;

/// Largest stable step for advection speed `max|u|` on `n` points with
/// the 2/3 rule: `dt·max|u|·2π·(n/3) ≤ 2.8`.
pub fn burgers_stable_dt(max_u: f64, n: usize) -> f64 {
    RK4_IMAG_BOUND / (max_u.max(1e-12) * 2.0 * PI * (n as f64 / 3.0))
}

/// Default step `1e-4` at `n = 2048`, scaled as `1/n`.
pub fn burgers_default_dt(n: usize) -> f64 {
    1e-4 * 2048.0 / n as f64
}

/// `∂_t u + ∂_x(u²/2) = ν ∂_xx u` on the unit torus, from `u0` to `t = final_time`.
///
/// Pseudo-spectral: the flux is formed in physical space from 2/3-truncated
/// modes, diffusion is integrated exactly by `e^{−ν k̃² t}` and RK4 steps the
/// transformed variable. `dt` is shrunk so that it divides `final_time`.
pub fn solve_burgers(u0: &Tensor, nu: f64, final_time: f64, dt: f64) -> Result<Tensor> {
    if u0.ndim() != 1 {
        return Err(Error::invalid_shape(
            "solve_burgers",
            format!("expected a 1-D field, got {:?}", u0.shape()),
        ));
    }
    let n = u0.numel();
    let fft = Fft::new(n)?;
    if !(nu > 0.0 && dt > 0.0 && final_time > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "burgers needs ν, dt, T > 0 (got {nu}, {dt}, {final_time})"
        )));
    }
    let bound = burgers_stable_dt(u0.max_abs(), n);
    if dt > bound {
        return Err(Error::InvalidConfig(format!(
            "burgers dt {dt} exceeds the RK4 advective bound {bound:.3e} for max|u0| = {:.3}",
            u0.max_abs()
        )));
    }
    let steps = ((final_time / dt - 1e-9).ceil() as usize).max(1);
    let dt = final_time / steps as f64;

    let kmax = n / 3;
    let wave: Vec<f64> = (0..n).map(|i| 2.0 * PI * frequency(i, n) as f64).collect();
    let keep: Vec<bool> = (0..n)
        .map(|i| frequency(i, n).unsigned_abs() as usize <= kmax)
        .collect();
    let half: Vec<f64> = wave
        .iter()
        .map(|k| (-nu * k * k * dt / 2.0).exp())
        .collect();
    let full: Vec<f64> = half.iter().map(|e| e * e).collect();

    let mut work = vec![Complex64::new(0.0, 0.0); n];
    // −(i k̃/2)·F[(P u)²], P the 2/3 projection
    let mut flux = |uh: &[Complex64], out: &mut [Complex64]| {
        for i in 0..n {
            work[i] = if keep[i] {
                uh[i]
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        fft.inverse(&mut work);
        for w in work.iter_mut() {
            let u = w.re / n as f64;
            *w = Complex64::new(u * u, 0.0);
        }
        fft.forward(&mut work);
        for i in 0..n {
            out[i] = if keep[i] {
                Complex64::new(0.0, -0.5 * wave[i]) * work[i]
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    };

    let mut uh: Vec<Complex64> = u0.data().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft.forward(&mut uh);
    let zero = Complex64::new(0.0, 0.0);
    let (mut a, mut b, mut c, mut d) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut stage = vec![zero; n];
    for step in 0..steps {
        flux(&uh, &mut a);
        for i in 0..n {
            stage[i] = half[i] * (uh[i] + 0.5 * dt * a[i]);
        }
        flux(&stage, &mut b);
        for i in 0..n {
            stage[i] = half[i] * uh[i] + 0.5 * dt * b[i];
        }
        flux(&stage, &mut c);
        for i in 0..n {
            stage[i] = full[i] * uh[i] + dt * half[i] * c[i];
        }
        flux(&stage, &mut d);
        for i in 0..n {
            uh[i] = full[i] * uh[i]
                + dt / 6.0 * (full[i] * a[i] + 2.0 * half[i] * (b[i] + c[i]) + d[i]);
        }
        if uh.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Diverged {
                solver: "burgers",
                step: step + 1,
                time: (step + 1) as f64 * dt,
                detail: format!("non-finite spectrum (dt = {dt:.3e}, n = {n})"),
            });
        }
    }
    fft.inverse(&mut uh);
    Tensor::new(&[n], uh.iter().map(|z| z.re / n as f64).collect())
}
