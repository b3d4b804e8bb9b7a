//! Scene, camera and image files.

mod cameras;
mod ply;
mod png;
mod synthetic;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::projection::Splat3D;

pub use cameras::{
    cameras_to_json, load_cameras, parse_cameras, write_cameras, CameraEntry, ROTATION_TOLERANCE,
};
pub use ply::{sigmoid, write_ply};
pub use png::{quantize, quantize_framebuffer, quantize_image, read_png, write_png};
pub use synthetic::{
    dc_for_color, generate_synthetic_scene, synthetic_cameras, SyntheticKind, SYNTHETIC_RESOLUTION,
};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PLY format: {0}")]
    UnsupportedFormat(String),
    #[error("missing PLY property `{0}`")]
    MissingProperty(String),
    #[error("truncated PLY data: need {expected} bytes, have {actual}")]
    TruncatedData { expected: usize, actual: usize },
    #[error("camera parse error: {0}")]
    Parse(String),
    #[error("camera {id}: rotation is not orthonormal (error {error:e})")]
    NonOrthonormalRotation { id: i64, error: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneFile {
    pub splats: Vec<Splat3D>,
    pub source_path: Option<PathBuf>,
    /// Degree of the spherical harmonics stored per splat (0..=3).
    pub sh_degree: usize,
}

/// Parses an in-memory binary PLY.
pub fn parse_ply(bytes: &[u8]) -> Result<SceneFile, SceneError> {
    ply::parse_ply(bytes)
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<SceneFile, SceneError> {
    let path = path.as_ref();
    let mut scene = ply::parse_ply(&std::fs::read(path)?)?;
    scene.source_path = Some(path.to_path_buf());
    Ok(scene)
}

/// Serializes a scene to PLY bytes (float32, inverse activations applied).
pub fn encode_ply(scene: &SceneFile) -> Vec<u8> {
    ply::encode_ply(scene)
}
