//! Recurrent take-over time models, losses, gradients and training.

mod adam;
mod backprop;
mod checkpoint;
mod config;
mod layers;
mod loss;
mod network;
mod train;

pub use adam::Adam;
pub use backprop::{batch_loss, default_loss, gradients, Examples, Target};
pub use checkpoint::{decode as decode_checkpoint, encode as encode_checkpoint};
pub use checkpoint::{load_checkpoint, save_checkpoint, MAGIC, VERSION};
pub use config::{AdamConfig, ModelConfig, TrainConfig, Variant};
pub use layers::{sigmoid, softplus, Dense, LstmCell};
pub use loss::{loss_l1, loss_min_of_k, min_of_k_terms, LossKind, MinOfKTerms, PROB_FLOOR};
pub use network::{Mode, Model, Prediction, Task};
pub use train::{fit, pretrain_ori, train, transfer, EpochRecord, History};
