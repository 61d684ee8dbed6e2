//! From-scratch neural core: activations, dense layers, RNN and LSTM cells,
//! squared-error loss with backpropagation through time, optimizers and the
//! training loop.

mod cells;
mod model;
mod tensor;
mod train;

pub use cells::{
    lstm_step, rnn_step, sigmoid, tanh, xavier, Activation, Gate, LstmParams, LstmState, RnnParams,
};
pub use model::{
    argmax, evaluate, loss_and_grad, DeepMobilityModel, DenseLayer, Gradients, MlpParams, ModelConfig, Recurrent,
    RecurrentKind, Sample,
};
pub use tensor::Matrix;
pub use train::{
    train, write_history, write_history_to, EpochStats, Optimizer, OptimizerKind, TrainConfig, HISTORY_HEADER,
};
