//! Proximal policy optimization for continuous actions, with an optional
//! curiosity bonus. Networks are small dense MLPs with hand-written
//! backpropagation, generic over `f32` and `f64`.

pub mod agent;
pub mod curiosity;
pub mod gae;
pub mod hyper;
pub mod mlp;
pub mod normalizer;
pub mod policy;
pub mod scalar;
pub mod trainer;

pub use agent::{load_checkpoint, save_checkpoint, Agent, CheckpointError, CHECKPOINT_VERSION};
pub use gae::{compute_gae, normalize_advantages};
pub use hyper::Hyperparams;
pub use scalar::Scalar;
pub use trainer::{episode_seed, EnvStep, Environment, SummaryRow, TrainError, Trainer};
