use num_complex::Complex64;

use super::fft::{Fft, Fft2};
use crate::autodiff::{ComplexTensor, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Transform {
    One(Fft),
    Two(Fft2),
}

/// Real-input transforms over fields shaped `[batch, spatial..., channels]`
/// with one or two spatial axes, plus the retained low-frequency block used
/// by the spectral convolution.
///
/// The half spectrum lives on the last spatial axis (`n/2 + 1` entries).
/// Retained modes: the first `k` entries of the half axis and, on a full
/// axis, the frequencies `|f| < k` of both signs (`2k − 1` entries).
#[derive(Clone, Debug)]
pub struct RfftPlan {
    dims: Vec<usize>,
    modes: Vec<usize>,
    transform: Transform,
    retained: Vec<usize>,
}

impl RfftPlan {
    pub fn new(dims: &[usize], modes: &[usize]) -> Result<Self> {
        if dims.len() != modes.len() || !(1..=2).contains(&dims.len()) {
            return Err(Error::InvalidPlan(format!(
                "need one mode count per spatial axis (1 or 2 axes), got dims {dims:?} modes {modes:?}"
            )));
        }
        let last = dims.len() - 1;
        let half = dims[last] / 2 + 1;
        if modes[last] == 0 || modes[last] > half {
            return Err(Error::InvalidPlan(format!(
                "half-spectrum axis of length {} keeps 1..={half} modes, got {}",
                dims[last], modes[last]
            )));
        }
        let transform = match dims {
            [n] => Transform::One(Fft::new(*n)?),
            [n1, n2] => {
                if modes[0] == 0 || 2 * modes[0] - 1 > *n1 {
                    return Err(Error::InvalidPlan(format!(
                        "full axis of length {n1} keeps |f| < k with 2k − 1 <= {n1}, got k = {}",
                        modes[0]
                    )));
                }
                Transform::Two(Fft2::new(*n1, *n2)?)
            }
            _ => unreachable!(),
        };
        let retained = match dims {
            [_] => (0..modes[0]).collect(),
            [n1, _] => {
                let (k1, k2) = (modes[0], modes[1]);
                let mut out = Vec::with_capacity((2 * k1 - 1) * k2);
                for r in 0..2 * k1 - 1 {
                    let row = if r < k1 { r } else { n1 - (2 * k1 - 1 - r) };
                    for c in 0..k2 {
                        out.push(row * half + c);
                    }
                }
                out
            }
            _ => unreachable!(),
        };
        Ok(Self {
            dims: dims.to_vec(),
            modes: modes.to_vec(),
            transform,
            retained,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn spatial_len(&self) -> usize {
        self.dims.iter().product()
    }

    /// Half-spectrum shape of the spatial axes.
    pub fn half_dims(&self) -> Vec<usize> {
        let mut h = self.dims.clone();
        let last = h.len() - 1;
        h[last] = h[last] / 2 + 1;
        h
    }

    pub fn half_len(&self) -> usize {
        self.half_dims().iter().product()
    }

    /// Flat half-spectrum indices of the retained modes, in weight order.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    /// Shape of the mode axes of a weight tensor for this plan.
    pub fn weight_mode_shape(&self) -> Vec<usize> {
        match self.modes.as_slice() {
            [k] => vec![*k],
            [k1, k2] => vec![2 * k1 - 1, *k2],
            _ => unreachable!(),
        }
    }

    fn split(&self, shape: &[usize]) -> Result<(usize, usize)> {
        let nd = self.dims.len();
        if shape.len() != nd + 2 || shape[1..=nd] != self.dims[..] {
            return Err(Error::InvalidPlan(format!(
                "field shape {shape:?} does not match plan dims {:?} (expected [batch, {:?}, channels])",
                self.dims, self.dims
            )));
        }
        Ok((shape[0], shape[nd + 1]))
    }

    fn split_half(&self, shape: &[usize]) -> Result<(usize, usize)> {
        let nd = self.dims.len();
        let half = self.half_dims();
        if shape.len() != nd + 2 || shape[1..=nd] != half[..] {
            return Err(Error::InvalidPlan(format!(
                "coefficient shape {shape:?} does not match half spectrum {half:?}"
            )));
        }
        Ok((shape[0], shape[nd + 1]))
    }

    fn out_shape(&self, batch: usize, spatial: &[usize], channels: usize) -> Vec<usize> {
        let mut s = vec![batch];
        s.extend_from_slice(spatial);
        s.push(channels);
        s
    }

    fn forward_full(&self, buf: &mut [Complex64]) {
        match &self.transform {
            Transform::One(f) => f.forward(buf),
            Transform::Two(f) => f.forward(buf),
        }
    }

    fn inverse_full(&self, buf: &mut [Complex64]) {
        match &self.transform {
            Transform::One(f) => f.inverse(buf),
            Transform::Two(f) => f.inverse(buf),
        }
    }

    /// Map a full-spectrum flat index to its half-spectrum index, if stored.
    fn half_index(&self, full: usize) -> Option<usize> {
        let n_last = *self.dims.last().unwrap();
        let half = n_last / 2 + 1;
        let (row, col) = (full / n_last, full % n_last);
        (col < half).then_some(row * half + col)
    }

    /// Full-spectrum flat index of the conjugate partner `−k`.
    fn mirror(&self, full: usize) -> usize {
        match self.dims.as_slice() {
            [n] => (n - full) % n,
            [n1, n2] => {
                let (r, c) = (full / n2, full % n2);
                ((n1 - r) % n1) * n2 + (n2 - c) % n2
            }
            _ => unreachable!(),
        }
    }

    /// Unnormalized forward transform, half spectrum on the last spatial axis.
    pub fn rfft(&self, field: &Tensor) -> Result<ComplexTensor> {
        let (batch, ch) = self.split(field.shape())?;
        let n = self.spatial_len();
        let h = self.half_len();
        let mut out = ComplexTensor::zeros(&self.out_shape(batch, &self.half_dims(), ch));
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let src = field.data();
        for b in 0..batch {
            for c in 0..ch {
                for (s, z) in buf.iter_mut().enumerate() {
                    *z = Complex64::new(src[(b * n + s) * ch + c], 0.0);
                }
                self.forward_full(&mut buf);
                let dst = out.data_mut();
                for (s, &z) in buf.iter().enumerate() {
                    if let Some(hi) = self.half_index(s) {
                        dst[(b * h + hi) * ch + c] = z;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`RfftPlan::rfft`], scaled by `1/Πn`. Imaginary parts of
    /// self-conjugate modes are ignored, as with any real inverse transform.
    pub fn irfft(&self, coeffs: &ComplexTensor) -> Result<Tensor> {
        let (batch, ch) = self.split_half(coeffs.shape())?;
        let n = self.spatial_len();
        let h = self.half_len();
        let scale = 1.0 / n as f64;
        let mut out = vec![0.0; batch * n * ch];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let src = coeffs.data();
        for b in 0..batch {
            for c in 0..ch {
                for s in 0..n {
                    buf[s] = match self.half_index(s) {
                        Some(hi) => src[(b * h + hi) * ch + c],
                        None => {
                            let hi = self.half_index(self.mirror(s)).expect("mirror is stored");
                            src[(b * h + hi) * ch + c].conj()
                        }
                    };
                }
                self.inverse_full(&mut buf);
                for (s, z) in buf.iter().enumerate() {
                    out[(b * n + s) * ch + c] = z.re * scale;
                }
            }
        }
        Tensor::new(&self.out_shape(batch, &self.dims, ch), out)
    }

    /// Adjoint of [`RfftPlan::rfft`] under the real inner products
    /// `Σ x·y` and `Σ Re(conj(X)·Y)`: zero-extend, unnormalized inverse
    /// DFT, real part.
    pub fn rfft_adjoint(&self, coeffs: &ComplexTensor) -> Result<Tensor> {
        let (batch, ch) = self.split_half(coeffs.shape())?;
        let n = self.spatial_len();
        let h = self.half_len();
        let mut out = vec![0.0; batch * n * ch];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let src = coeffs.data();
        for b in 0..batch {
            for c in 0..ch {
                for (s, z) in buf.iter_mut().enumerate() {
                    *z = match self.half_index(s) {
                        Some(hi) => src[(b * h + hi) * ch + c],
                        None => Complex64::new(0.0, 0.0),
                    };
                }
                self.inverse_full(&mut buf);
                for (s, z) in buf.iter().enumerate() {
                    out[(b * n + s) * ch + c] = z.re;
                }
            }
        }
        Tensor::new(&self.out_shape(batch, &self.dims, ch), out)
    }

    /// Adjoint of [`RfftPlan::irfft`]: `rfft(g)/Πn` with the modes that stand
    /// for a conjugate pair counted twice.
    pub fn irfft_adjoint(&self, field: &Tensor) -> Result<ComplexTensor> {
        let mut out = self.rfft(field)?;
        let n = self.spatial_len() as f64;
        let n_last = *self.dims.last().unwrap();
        let half = n_last / 2 + 1;
        let ch = field.channels();
        for (idx, z) in out.data_mut().iter_mut().enumerate() {
            let col = (idx / ch) % half;
            let paired = col != 0 && 2 * col != n_last;
            *z *= if paired { 2.0 / n } else { 1.0 / n };
        }
        Ok(out)
    }

    /// Zero every mode outside the retained block.
    pub fn truncate(&self, coeffs: &ComplexTensor) -> Result<ComplexTensor> {
        let (batch, ch) = self.split_half(coeffs.shape())?;
        let h = self.half_len();
        let mut keep = vec![false; h];
        for &r in &self.retained {
            keep[r] = true;
        }
        let mut out = coeffs.clone();
        for b in 0..batch {
            for (hi, &k) in keep.iter().enumerate() {
                if !k {
                    for c in 0..ch {
                        out.data_mut()[(b * h + hi) * ch + c] = Complex64::new(0.0, 0.0);
                    }
                }
            }
        }
        Ok(out)
    }
}
