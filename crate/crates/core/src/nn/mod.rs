//! Neural building blocks shared by every model variant.

pub mod adam;
pub mod checkpoint;
pub mod gaussian;
pub mod layers;
pub mod loss;
pub mod params;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use checkpoint::CheckpointMeta;
pub use gaussian::{
    gaussian_head_forward, gaussian_kl, gaussian_kl_node, reparameterize, reparameterize_node,
    GaussianHead, GaussianParams,
};
pub use layers::{
    affine_forward, bilstm_encode, embed, embed_steps, lstm_step, mlp_forward, AffineNodes,
    BilstmNodes, LstmNodes, MlpNodes, ParamNodes, SeqSteps,
};
pub use loss::{bce_loss, bce_node, PROB_CLAMP};
pub use params::{GradMap, ModelParams, ParamInit};
