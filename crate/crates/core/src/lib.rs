//! Vanishing points and vanishing curves of catadioptric cameras built from
//! a perspective camera and a quadric-of-revolution mirror, together with
//! pose estimation from vanishing points and a synthetic experiment harness.

pub mod curves;
pub mod error;
pub mod geometry;
pub mod poly;
pub mod pose;
pub mod search;
pub mod sim;
pub mod vanishing;

pub use error::{Error, ErrorKind, Result};
pub use geometry::{
    canonicalize_rig, CameraRig, Direction, Intrinsics, MirrorPoint, MirrorShape, Pixel, PlueckerLine, Vec3,
};
