//! Small reverse-mode differentiation engine: a tensor type, a recording
//! tape with the layer operations dense networks, 1-D convolutions and LSTMs
//! need, an Adam optimizer and a binary checkpoint container.

pub mod checkpoint;
pub mod error;
pub mod graph;
pub mod model;
pub mod optim;
pub mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use error::{NdError, Result};
pub use graph::{sigmoid, softmax_in_place, Graph, LstmParams, Var};
pub use model::{Forward, LayerSpec, Mode, RunningStats, Sequential};
pub use optim::{Adam, AdamConfig};
pub use tensor::{matmul, Tensor};
