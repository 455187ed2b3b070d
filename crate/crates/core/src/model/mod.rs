//! The numerical engine: encoder forward/backward, cosine loss, Adam and
//! gradient verification.

mod adam;
mod encoder;
mod gradcheck;
mod loss;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use encoder::{encoder_backward, encoder_forward, ForwardCache, GateCache};
pub use gradcheck::{central_difference, grad_check, grad_check_subsample, random_case, relative_error, GradCheckSample, GRADCHECK_DIMS};
pub use loss::{cosine_embedding_loss, cosine_embedding_loss_grad, cosine_similarity, loss_and_backward, sample_loss, Label};
pub use params::{init_params, CellKind, Dims, EncoderParams, Gradients, TENSOR_NAMES};
pub use tensor::{dot, norm, Matrix, Real};
