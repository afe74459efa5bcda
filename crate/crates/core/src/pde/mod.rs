//! Input-function sampling and the reference PDE solvers.

mod burgers;
mod darcy;
mod dataset;
mod grf;
mod ns;

pub use burgers::{burgers_default_dt, burgers_stable_dt, solve_burgers, RK4_IMAG_BOUND};
pub use darcy::{cg_iteration_cap, solve_darcy, CG_TOLERANCE};
pub use dataset::{
    build_dataset, generate_sample, read_bundle, write_bundle, Dataset, PdeProblemSpec,
    ProblemKind, METADATA_FILE, TENSOR_FILES,
};
pub use grf::{grf_sample, psi_threshold, Boundary, GrfSpec};
pub use ns::{ns_default_dt, ns_forcing, solve_ns_vorticity, NsRun};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Stride-`r` point subsampling on every axis.
pub fn downsample(field: &Tensor, r: usize) -> Result<Tensor> {
    downsample_spatial(field, r, field.ndim())
}

/// Stride-`r` subsampling of the trailing `spatial` axes; leading axes are kept.
pub fn downsample_spatial(field: &Tensor, r: usize, spatial: usize) -> Result<Tensor> {
    let shape = field.shape();
    if r == 0 || spatial > shape.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot downsample {shape:?} by {r} over {spatial} axes"
        )));
    }
    let lead = shape.len() - spatial;
    if let Some(&d) = shape[lead..].iter().find(|&&d| d % r != 0) {
        return Err(Error::InvalidConfig(format!(
            "factor {r} does not divide axis of size {d}"
        )));
    }
    if r == 1 {
        return Ok(field.clone());
    }
    let out_shape: Vec<usize> = shape
        .iter()
        .enumerate()
        .map(|(i, &d)| if i < lead { d } else { d / r })
        .collect();
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    let src = field.data();
    Ok(Tensor::from_fn(&out_shape, |mut k| {
        let mut offset = 0;
        for i in (0..out_shape.len()).rev() {
            let idx = k % out_shape[i];
            k /= out_shape[i];
            offset += strides[i] * if i < lead { idx } else { idx * r };
        }
        src[offset]
    }))
}
