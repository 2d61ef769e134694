//! Reconstruction, adversarial and combined objectives, SPADE modulation,
//! and the pluggable feature extractors the texture/semantic terms use.

mod adversarial;
mod features;
mod objective;
mod spade;

pub use adversarial::{hinge_d, hinge_g};
pub use features::{
    feature_cosine, feature_l2, instance_normalize, FeatureExtractor, RandProjExtractor,
    SobelExtractor, DEFAULT_RANDPROJ_SEED,
};
pub use objective::{generator_objective, mse, rec_loss, LossReport, ObjectiveWeights, RecWeights};
pub use spade::{spade_modulate, FeatureMap};
