//! Automatic fetal abdominal-circumference (AC) estimation from B-mode
//! ultrasound images.
//!
//! The pipeline classifies anechoic pixels into stomach bubble (SB),
//! umbilical vein (UV), amniotic fluid (AF), and shadowing artifact (SA)
//! with a three-branch patch CNN, fits an ellipse to the AF boundary with a
//! randomized Hough transform, derives the circumference from the ellipse,
//! and runs a second CNN to decide whether the plane is acceptable for
//! measurement. A deterministic synthetic phantom generator provides labeled
//! training and evaluation data.

pub mod ellipse;
pub mod error;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod patch;
pub mod semantic;
pub(crate) mod par;

pub use error::{Error, Result};
