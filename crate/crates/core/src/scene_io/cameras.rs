//! Camera lists as JSON.
//!
//! ```json
//! [{"id": 0, "width": 256, "height": 256, "fx": 280.0, "fy": 280.0,
//!   "cx": 128.0, "cy": 128.0,
//!   "rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1], "translation": [0, 0, 2.2]}]
//! ```
//!
//! `rotation` is row-major world-to-camera.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::projection::Camera;

/// Rotations further than this from orthonormal are rejected.
pub const ROTATION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CameraRecord {
    id: i64,
    width: u32,
    height: u32,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    rotation: [f64; 9],
    translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraEntry {
    pub id: i64,
    pub camera: Camera,
}

/// Nearest proper rotation (polar factor).
fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    u * v_t
}

fn to_entry(r: CameraRecord) -> Result<CameraEntry, SceneError> {
    let rotation = Matrix3::from_row_slice(&r.rotation);
    let err = Camera::rotation_error(&rotation);
    if !(err <= ROTATION_TOLERANCE) {
        return Err(SceneError::NonOrthonormalRotation {
            id: r.id,
            error: err,
        });
    }
    let rotation = if err > 1e-9 {
        orthonormalize(&rotation)
    } else {
        rotation
    };
    let camera = Camera {
        width: r.width,
        height: r.height,
        fx: r.fx,
        fy: r.fy,
        cx: r.cx,
        cy: r.cy,
        rotation,
        translation: Vector3::from_column_slice(&r.translation),
    };
    camera
        .validate(1e-6)
        .map_err(|e| SceneError::Parse(format!("camera {}: {e}", r.id)))?;
    Ok(CameraEntry { id: r.id, camera })
}

pub fn parse_cameras(text: &str) -> Result<Vec<CameraEntry>, SceneError> {
    let records: Vec<CameraRecord> =
        serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
    records.into_iter().map(to_entry).collect()
}

pub fn load_cameras(path: impl AsRef<Path>) -> Result<Vec<CameraEntry>, SceneError> {
    parse_cameras(&std::fs::read_to_string(path)?)
}

pub fn cameras_to_json(cameras: &[CameraEntry]) -> String {
    let records: Vec<CameraRecord> = cameras
        .iter()
        .map(|e| {
            let c = &e.camera;
            let mut rotation = [0.0; 9];
            for r in 0..3 {
                for k in 0..3 {
                    rotation[r * 3 + k] = c.rotation[(r, k)];
                }
            }
            CameraRecord {
                id: e.id,
                width: c.width,
                height: c.height,
                fx: c.fx,
                fy: c.fy,
                cx: c.cx,
                cy: c.cy,
                rotation,
                translation: [c.translation.x, c.translation.y, c.translation.z],
            }
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("camera records serialize")
}

pub fn write_cameras(cameras: &[CameraEntry], path: impl AsRef<Path>) -> Result<(), SceneError> {
    std::fs::write(path, cameras_to_json(cameras))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: &str = r#"[{"id": 3, "width": 32, "height": 24, "fx": 20.0, "fy": 21.0,
        "cx": 16.0, "cy": 12.0, "rotation": [1,0,0, 0,1,0, 0,0,1], "translation": [0,0,0]}]"#;

    #[test]
    fn identity_camera_sits_at_origin() {
        let cams = parse_cameras(IDENTITY).unwrap();
        assert_eq!(cams.len(), 1);
        assert_eq!(cams[0].id, 3);
        let c = &cams[0].camera;
        assert_eq!(c.center(), Vector3::zeros());
        let p = c.to_camera(&Vector3::new(0.0, 0.0, 5.0));
        assert_eq!(p.z, 5.0);
    }

    #[test]
    fn reflection_rejected() {
        let text = IDENTITY.replace("0,0,1]", "0,0,-1]");
        assert!(matches!(
            parse_cameras(&text),
            Err(SceneError::NonOrthonormalRotation { id: 3, .. })
        ));
    }

    #[test]
    fn slightly_off_rotation_is_repaired() {
        let text = IDENTITY.replace("[1,0,0,", "[1.0002,0,0,");
        let cams = parse_cameras(&text).unwrap();
        assert!(Camera::rotation_error(&cams[0].camera.rotation) < 1e-12);
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(
            parse_cameras("[{\"id\": 1}]"),
            Err(SceneError::Parse(_))
        ));
        assert!(matches!(parse_cameras("nope"), Err(SceneError::Parse(_))));
    }
}
