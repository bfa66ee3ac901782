//! Data augmentation for handwritten text recognition.
//!
//! Two augmentations live here:
//!
//! * [`blot`] draws Bezier strikethrough strokes over line images.
//! * [`stackmix`] builds new labeled lines by stacking character segments
//!   cut from training images. The segments come from [`segbank`], which is
//!   built from per-character pixel spans recovered by CTC forced alignment
//!   in [`ctc_align`].
//!
//! [`metrics`] holds CER/WER/accuracy and [`corpus`] the external text
//! filtering used to feed the generator.

pub mod blot;
pub mod corpus;
pub mod ctc_align;
pub mod error;
pub mod geometry;
pub mod image;
pub mod manifest;
pub mod metrics;
pub mod segbank;
pub mod seed;
pub mod stackmix;
pub mod synth;

pub use crate::error::{Error, Result};
pub use crate::image::LineImage;
