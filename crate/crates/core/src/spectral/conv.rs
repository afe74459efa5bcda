use num_complex::Complex64;
use rand::Rng;

use super::plan::RfftPlan;
use crate::autodiff::{ComplexTensor, CustomBackward, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Random spectral weights shaped `[mode axes..., d_in, d_out, 2]` with real
/// and imaginary parts uniform in `(−1/d_in, 1/d_in)`.
pub fn init_spectral_weights(
    mode_shape: &[usize],
    d_in: usize,
    d_out: usize,
    rng: &mut impl Rng,
) -> Tensor {
    let mut shape = mode_shape.to_vec();
    shape.extend_from_slice(&[d_in, d_out, 2]);
    Tensor::uniform(&shape, 1.0 / d_in as f64, rng)
}

/// Mode axes of the weight shape for `modes` over `spatial_axes` axes.
pub fn weight_mode_shape(modes: &[usize]) -> Vec<usize> {
    match modes {
        [k] => vec![*k],
        [k1, k2] => vec![2 * k1 - 1, *k2],
        _ => modes.to_vec(),
    }
}

fn check_weights(weights: &Tensor, plan: &RfftPlan, d_in: usize) -> Result<(usize, usize)> {
    let ws = weights.shape();
    let mode_shape = plan.weight_mode_shape();
    let nm = mode_shape.len();
    if ws.len() != nm + 3 || ws[..nm] != mode_shape[..] || ws[nm + 2] != 2 {
        return Err(Error::invalid_shape(
            "spectral_conv",
            format!("weights {ws:?} do not match mode block {mode_shape:?} × d_in × d_out × 2"),
        ));
    }
    if ws[nm] != d_in {
        return Err(Error::shape("spectral_conv", &[d_in], &ws[nm..nm + 1]));
    }
    Ok((ws[nm], ws[nm + 1]))
}

fn weight(w: &[f64], m: usize, i: usize, o: usize, d_in: usize, d_out: usize) -> Complex64 {
    let at = ((m * d_in + i) * d_out + o) * 2;
    Complex64::new(w[at], w[at + 1])
}

struct Forward {
    out: Tensor,
    // retained input coefficients, [batch, mode, d_in]
    kept: Vec<Complex64>,
}

fn forward(field: &Tensor, weights: &Tensor, plan: &RfftPlan) -> Result<Forward> {
    let d_in = field.channels();
    let (_, d_out) = check_weights(weights, plan, d_in)?;
    let coeffs = plan.rfft(field)?;
    let batch = field.shape()[0];
    let h = plan.half_len();
    let retained = plan.retained();
    let nm = retained.len();
    let w = weights.data();

    let mut kept = Vec::with_capacity(batch * nm * d_in);
    let mut out_shape = coeffs.shape().to_vec();
    *out_shape.last_mut().unwrap() = d_out;
    let mut mixed = ComplexTensor::zeros(&out_shape);
    for b in 0..batch {
        for (m, &hi) in retained.iter().enumerate() {
            let x = &coeffs.data()[(b * h + hi) * d_in..(b * h + hi + 1) * d_in];
            kept.extend_from_slice(x);
            let y = &mut mixed.data_mut()[(b * h + hi) * d_out..(b * h + hi + 1) * d_out];
            for (i, &xi) in x.iter().enumerate() {
                for (o, yo) in y.iter_mut().enumerate() {
                    *yo += xi * weight(w, m, i, o, d_in, d_out);
                }
            }
        }
    }
    Ok(Forward {
        out: plan.irfft(&mixed)?,
        kept,
    })
}

/// `irfft(R · truncate(rfft(x)))`: per retained mode, multiply the `d_in`
/// coefficient vector by that mode's `d_in × d_out` complex matrix; every
/// other mode is zeroed.
pub fn spectral_conv(field: &Tensor, weights: &Tensor, plan: &RfftPlan) -> Result<Tensor> {
    Ok(forward(field, weights, plan)?.out)
}

struct SpectralConvBackward {
    plan: RfftPlan,
    kept: Vec<Complex64>,
}

impl CustomBackward for SpectralConvBackward {
    fn name(&self) -> &'static str {
        "spectral_conv"
    }

    fn backward(&self, grad_out: &Tensor, inputs: &[&Tensor]) -> Result<Vec<Option<Vec<f64>>>> {
        let (field, weights) = (inputs[0], inputs[1]);
        let plan = &self.plan;
        let d_in = field.channels();
        let d_out = grad_out.channels();
        let batch = field.shape()[0];
        let h = plan.half_len();
        let retained = plan.retained();
        let nm = retained.len();
        let w = weights.data();

        let g_mixed = plan.irfft_adjoint(grad_out)?;
        let mut g_w = vec![0.0; weights.numel()];
        let mut in_shape = g_mixed.shape().to_vec();
        *in_shape.last_mut().unwrap() = d_in;
        let mut g_coeffs = ComplexTensor::zeros(&in_shape);
        for b in 0..batch {
            for (m, &hi) in retained.iter().enumerate() {
                let gy = &g_mixed.data()[(b * h + hi) * d_out..(b * h + hi + 1) * d_out];
                let x = &self.kept[(b * nm + m) * d_in..(b * nm + m + 1) * d_in];
                let gx = &mut g_coeffs.data_mut()[(b * h + hi) * d_in..(b * h + hi + 1) * d_in];
                for i in 0..d_in {
                    let xc = x[i].conj();
                    for (o, &g) in gy.iter().enumerate() {
                        gx[i] += g * weight(w, m, i, o, d_in, d_out).conj();
                        let gw = xc * g;
                        let at = ((m * d_in + i) * d_out + o) * 2;
                        g_w[at] += gw.re;
                        g_w[at + 1] += gw.im;
                    }
                }
            }
        }
        let g_field = plan.rfft_adjoint(&g_coeffs)?;
        Ok(vec![Some(g_field.into_data()), Some(g_w)])
    }
}

/// Record [`spectral_conv`] on a tape. The plan is built from the field's
/// spatial shape, so the same weights apply at any resolution that can hold
/// the retained modes.
pub fn spectral_conv_on(tape: &mut Tape, field: Var, weights: Var, modes: &[usize]) -> Result<Var> {
    let shape = tape.shape(field);
    if shape.len() < 3 {
        return Err(Error::invalid_shape(
            "spectral_conv",
            format!("expected [batch, spatial..., channels], got {shape:?}"),
        ));
    }
    let plan = RfftPlan::new(&shape[1..shape.len() - 1], modes)?;
    let fwd = forward(tape.value(field), tape.value(weights), &plan)?;
    tape.custom(
        &[field, weights],
        fwd.out,
        Box::new(SpectralConvBackward {
            plan,
            kept: fwd.kept,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{numeric_gradients, relative_error, STEP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_weights(mode_shape: &[usize], d: usize) -> Tensor {
        let mut shape = mode_shape.to_vec();
        shape.extend_from_slice(&[d, d, 2]);
        Tensor::from_fn(&shape, |idx| {
            let part = idx % 2;
            let o = (idx / 2) % d;
            let i = (idx / 2 / d) % d;
            if part == 0 && i == o {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn identity_over_full_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let plan = RfftPlan::new(&[16], &[9]).unwrap();
        let x = Tensor::uniform(&[2, 16, 3], 1.0, &mut rng);
        let y = spectral_conv(&x, &identity_weights(&[9], 3), &plan).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_mode_gives_channel_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let plan = RfftPlan::new(&[8, 8], &[1, 1]).unwrap();
        let x = Tensor::uniform(&[1, 8, 8, 2], 1.0, &mut rng);
        let y = spectral_conv(&x, &identity_weights(&[1, 1], 2), &plan).unwrap();
        for c in 0..2 {
            let mean: f64 = (0..64).map(|s| x.data()[s * 2 + c]).sum::<f64>() / 64.0;
            for s in 0..64 {
                assert!((y.data()[s * 2 + c] - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn width_mismatch() {
        let plan = RfftPlan::new(&[8], &[2]).unwrap();
        let x = Tensor::zeros(&[1, 8, 3]);
        let w = Tensor::zeros(&[2, 4, 4, 2]);
        assert!(spectral_conv(&x, &w, &plan).is_err());
    }

    fn check_gradients(dims: &[usize], modes: &[usize], d_in: usize, d_out: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = vec![2];
        shape.extend_from_slice(dims);
        shape.push(d_in);
        let x = Tensor::uniform(&shape, 1.0, &mut rng);
        let w = init_spectral_weights(&weight_mode_shape(modes), d_in, d_out, &mut rng)
            .map(|v| v * 3.0);
        let mut out_shape = shape.clone();
        *out_shape.last_mut().unwrap() = d_out;
        let probe = Tensor::uniform(&out_shape, 1.0, &mut rng);

        let loss = |inputs: &[Tensor]| -> Result<f64> {
            let mut tape = Tape::new();
            let xv = tape.leaf(inputs[0].clone().with_grad());
            let wv = tape.leaf(inputs[1].clone().with_grad());
            let y = spectral_conv_on(&mut tape, xv, wv, modes)?;
            let p = tape.constant(probe.clone());
            let prod = tape.mul(y, p)?;
            let s = tape.sum(prod)?;
            Ok(tape.value(s).item())
        };
        let inputs = [x.clone(), w.clone()];
        let numeric = numeric_gradients(&inputs, STEP, loss).unwrap();

        let mut tape = Tape::new();
        let xv = tape.leaf(x.with_grad());
        let wv = tape.leaf(w.with_grad());
        let y = spectral_conv_on(&mut tape, xv, wv, modes).unwrap();
        let p = tape.constant(probe);
        let prod = tape.mul(y, p).unwrap();
        let s = tape.sum(prod).unwrap();
        let g = tape.backward(s).unwrap();
        let ex = relative_error(g.get(xv).unwrap(), &numeric[0]);
        let ew = relative_error(g.get(wv).unwrap(), &numeric[1]);
        assert!(ex < 1e-5 && ew < 1e-5, "field {ex:e}, weights {ew:e}");
    }

    #[test]
    fn gradients_1d_include_nyquist() {
        check_gradients(&[8], &[5], 2, 3, 11);
        check_gradients(&[8], &[3], 3, 2, 12);
    }

    #[test]
    fn gradients_2d() {
        check_gradients(&[8, 4], &[3, 3], 2, 2, 13);
        check_gradients(&[4, 8], &[2, 2], 1, 3, 14);
    }
}
