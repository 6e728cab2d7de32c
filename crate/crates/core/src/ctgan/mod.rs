//! Conditional tabular GAN: mode-specific row transforms, training-by-sampling
//! and a Wasserstein generator/critic pair with gradient penalty.

mod layout;
mod model;
mod sampler;

pub use layout::{
    build_layout, fit_codecs, gan_row, inverse_transform_row, transform_row, transform_row_with, ColumnCodec,
    Codecs, ModeChoice, RowLayout, Span,
};
pub use model::{train_gan, EpochLoss, GanConfig, GanModel, TransformedTable};
pub use sampler::{sample_condition, CondSampler, CondVector, FrequencyTable};
