//! Dense tensors, a reverse-mode tape, and the AdamW optimizer.

mod adamw;
pub mod gradcheck;
mod kernels;
mod tape;
mod tensor;

pub use adamw::{adamw_step, AdamW, AdamWConfig, AdamWState};
pub use kernels::{gelu, gelu_grad, gemm, GELU_CUBIC, GELU_SQRT_2_OVER_PI};
pub use tape::{CustomBackward, Gradients, Tape, Var};
pub use tensor::{ComplexTensor, Tensor};
