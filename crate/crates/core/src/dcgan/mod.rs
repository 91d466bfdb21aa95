//! A DCGAN over 64×64 RGB piano-roll images.
//!
//! The networks are written directly on top of a GEMM kernel: transposed
//! convolutions, batch norm and ReLU up to a tanh image in the generator,
//! strided convolutions with leaky ReLU down to one logit in the
//! discriminator. Everything is generic over `f32`/`f64`.

mod checkpoint;
mod model;
mod network;
mod optim;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, FORMAT_VERSION, MAGIC};
pub use model::{
    bce_with_logits, probability, ArchitectureError, Gan, GanArchitecture, InitSpec, IMAGE_CHANNELS,
};
pub use network::{Network, Param, ShapeMismatch, Tape, BN_EPS, BN_MOMENTUM, LEAKY_SLOPE};
pub use optim::{Adam, AdamConfig};
pub use tensor::{Scalar, Tensor};
pub use train::{
    images_to_tensor, sample, tensor_to_images, train, GanConfig, SampleError, StepLosses, TrainError, TrainReport,
    TrainState,
};
