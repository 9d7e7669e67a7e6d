//! Feed-forward networks and the VAE experience surrogate.

mod blob;
mod mlp;
mod train;
mod vae;

pub use blob::{decode_networks, encode_networks, load_surrogate, save_surrogate};
pub use mlp::{Activation, Layer, Mlp, Trace};
pub use train::{
    finetune_decoder, resize_output, train_vae, FinetuneConfig, Finetuned, Normalization, TrainConfig, TrainedVae,
};
pub use vae::{default_latent_dim, Latent, LossWeights, VaeOutput, VaeSurrogate, LOG_SIGMA_MAX, LOG_SIGMA_MIN};
