//! Xception-style convolutional classifier with hand-written
//! forward and backward passes.

pub mod alpha;
pub mod build;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod tensor;
pub mod train;

pub use alpha::{image_to_input, strip_alpha, AlphaMode};
pub use build::{build_custnet, CustNetConfig};
pub use checkpoint::{network_fingerprint, Checkpoint};
pub use layers::{LayerSpec, Padding};
pub use network::{class_score, ForwardPass, Gradients, Mode, Network, NetworkBuilder, Node, NodeId, Taps};
pub use tensor::Tensor;
pub use train::{stratified_split, train, EpochRecord, History, Optimizer, TrainConfig};
