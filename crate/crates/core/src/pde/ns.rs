use std::f64::consts::PI;

use num_complex::Complex64;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::spectral::{frequency, Fft2};

/// Default step: `5e-3` up to `n = 64`, `2.5e-3` at 128, `1e-3` from 256 on.
pub fn ns_default_dt(n: usize) -> f64 {
    match n {
        0..=64 => 5e-3,
        65..=128 => 2.5e-3,
        _ => 1e-3,
    }
}

/// `0.1(sin(2π(x + y)) + cos(2π(x + y)))` on the `n×n` periodic grid.
pub fn ns_forcing(n: usize) -> Tensor {
    Tensor::from_fn(&[n, n], |k| {
        let (i, j) = (k / n, k % n);
        let s = 2.0 * PI * (i + j) as f64 / n as f64;
        0.1 * (s.sin() + s.cos())
    })
}

/// Vorticity `w(·, t)` recorded at the requested times.
#[derive(Clone, Debug)]
pub struct NsRun {
    pub snapshots: Tensor,
    pub steps: usize,
    pub dt: f64,
}

/// `∂_t w + u·∇w = νΔw + f` on the unit torus, `u = (∂_yψ, −∂_xψ)`, `−Δψ = w`.
///
/// Axis 0 of the grid is `x`, axis 1 is `y`. Crank–Nicolson on `νΔw`,
/// second-order Adams–Bashforth on advection and forcing (Heun for the
/// first step), 2/3-rule dealiasing, mean mode held at zero. `dt` is
/// shrunk so that every snapshot time is a whole number of steps;
/// `snapshot_times` must be increasing positive integers.
pub fn solve_ns_vorticity(
    w0: &Tensor,
    nu: f64,
    forcing: Option<&Tensor>,
    dt: f64,
    snapshot_times: &[usize],
) -> Result<NsRun> {
    let n = match w0.shape() {
        [n1, n2] if n1 == n2 => *n1,
        s => {
            return Err(Error::invalid_shape(
                "solve_ns_vorticity",
                format!("expected a square grid, got {s:?}"),
            ))
        }
    };
    let fft = Fft2::new(n, n)?;
    if let Some(f) = forcing {
        if f.shape() != w0.shape() {
            return Err(Error::shape(
                "solve_ns_vorticity forcing",
                w0.shape(),
                f.shape(),
            ));
        }
    }
    if !(nu > 0.0 && dt > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "navier-stokes needs ν, dt > 0 (got {nu}, {dt})"
        )));
    }
    if snapshot_times.is_empty()
        || snapshot_times[0] == 0
        || snapshot_times.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidConfig(format!(
            "snapshot times must be increasing positive integers, got {snapshot_times:?}"
        )));
    }
    let total = (n * n) as f64;
    let mean = w0.data().iter().sum::<f64>() / total;
    let rms = (w0.data().iter().map(|v| v * v).sum::<f64>() / total).sqrt();
    if mean.abs() > 1e-10 * (1.0 + rms) {
        return Err(Error::InvalidConfig(format!(
            "initial vorticity must have zero mean (got {mean:.3e}); project the mean out first"
        )));
    }

    let per_unit = ((1.0 / dt - 1e-9).ceil() as usize).max(1);
    let dt = 1.0 / per_unit as f64;
    let kmax = n / 3;
    let zero = Complex64::new(0.0, 0.0);
    let kx: Vec<f64> = (0..n * n)
        .map(|k| 2.0 * PI * frequency(k / n, n) as f64)
        .collect();
    let ky: Vec<f64> = (0..n * n)
        .map(|k| 2.0 * PI * frequency(k % n, n) as f64)
        .collect();
    let keep: Vec<bool> = (0..n * n)
        .map(|k| {
            frequency(k / n, n).unsigned_abs() as usize <= kmax
                && frequency(k % n, n).unsigned_abs() as usize <= kmax
        })
        .collect();
    let lap: Vec<f64> = kx.iter().zip(&ky).map(|(a, b)| a * a + b * b).collect();
    let implicit: Vec<f64> = lap
        .iter()
        .map(|l| 1.0 / (1.0 + 0.5 * nu * dt * l))
        .collect();
    let explicit: Vec<f64> = lap.iter().map(|l| 1.0 - 0.5 * nu * dt * l).collect();

    let to_spectrum = |t: &Tensor| -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = t.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut buf);
        buf
    };
    let f_hat = forcing.map(to_spectrum);

    let mut bufs = [
        vec![zero; n * n],
        vec![zero; n * n],
        vec![zero; n * n],
        vec![zero; n * n],
    ];
    // −F[u·∇w] + f̂, dealiased, mean mode zero
    let mut rhs = |wh: &[Complex64], out: &mut [Complex64]| {
        let [u, v, wx, wy] = &mut bufs;
        for k in 0..n * n {
            if !keep[k] || lap[k] == 0.0 {
                u[k] = zero;
                v[k] = zero;
                wx[k] = zero;
                wy[k] = zero;
                continue;
            }
            let psi = wh[k] / lap[k];
            let i = Complex64::new(0.0, 1.0);
            u[k] = i * ky[k] * psi;
            v[k] = -i * kx[k] * psi;
            wx[k] = i * kx[k] * wh[k];
            wy[k] = i * ky[k] * wh[k];
        }
        for b in [&mut *u, &mut *v, &mut *wx, &mut *wy] {
            fft.inverse(b);
        }
        let scale = 1.0 / (total * total);
        for k in 0..n * n {
            u[k] = Complex64::new((u[k].re * wx[k].re + v[k].re * wy[k].re) * scale, 0.0);
        }
        fft.forward(u);
        for k in 0..n * n {
            out[k] = if keep[k] && lap[k] != 0.0 {
                -u[k]
            } else {
                zero
            };
            if let Some(fh) = &f_hat {
                if lap[k] != 0.0 {
                    out[k] += fh[k];
                }
            }
        }
    };

    let mut wh = to_spectrum(w0);
    wh[0] = zero;
    let last = *snapshot_times.last().unwrap();
    let steps = last * per_unit;
    let mut snaps = Vec::with_capacity(snapshot_times.len() * n * n);
    let mut next_snap = 0;
    let mut n_prev = vec![zero; n * n];
    let mut n_cur = vec![zero; n * n];
    let mut pred = vec![zero; n * n];
    let mut out = vec![zero; n * n];
    for step in 1..=steps {
        rhs(&wh, &mut n_cur);
        if step == 1 {
            for k in 0..n * n {
                pred[k] = implicit[k] * (explicit[k] * wh[k] + dt * n_cur[k]);
            }
            rhs(&pred, &mut n_prev);
            for k in 0..n * n {
                wh[k] = implicit[k] * (explicit[k] * wh[k] + 0.5 * dt * (n_cur[k] + n_prev[k]));
            }
        } else {
            for k in 0..n * n {
                wh[k] =
                    implicit[k] * (explicit[k] * wh[k] + dt * (1.5 * n_cur[k] - 0.5 * n_prev[k]));
            }
        }
        wh[0] = zero;
        std::mem::swap(&mut n_prev, &mut n_cur);
        if wh.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Diverged {
                solver: "navier-stokes",
                step,
                time: step as f64 * dt,
                detail: format!("non-finite vorticity (dt = {dt:.3e}, n = {n})"),
            });
        }
        if step == snapshot_times[next_snap] * per_unit {
            out.copy_from_slice(&wh);
            fft.inverse(&mut out);
            snaps.extend(out.iter().map(|z| z.re / total));
            next_snap += 1;
        }
    }
    Ok(NsRun {
        snapshots: Tensor::new(&[snapshot_times.len(), n, n], snaps)?,
        steps,
        dt,
    })
}
