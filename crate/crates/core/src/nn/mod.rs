//! Feedforward classifiers and the coarse-to-fine cascade.

pub mod cascade;
pub mod mlp;

pub use cascade::{
    cascade_predict, load_model, save_model, train_cascade, CascadeConfig, CascadeModel, Prediction, TrainedCascade,
};
pub use mlp::{forward, init_mlp, loss_and_gradients, train, Example, MlpModel, TrainConfig, TrainHistory};
