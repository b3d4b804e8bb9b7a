//! Small deterministic scenes for tests and benchmarks.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CameraEntry, SceneFile};
use crate::projection::{Camera, Splat3D, SH_C0};

/// Image size of the synthetic cameras.
pub const SYNTHETIC_RESOLUTION: u32 = 256;
const FOCAL: f64 = 280.0;
const CAMERA_DISTANCE: f64 = 2.2;
/// Half the horizontal orbit covered by a camera sweep, in radians.
const ORBIT_HALF_ANGLE: f64 = 0.26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    /// 10 × 10 isotropic splats on a plane.
    Grid,
    /// 5000 anisotropic splats in the unit cube, degree-3 SH.
    Random,
    /// Bright low-opacity "sky" splats in front of a dark backdrop.
    OverexposedSky,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 3] = [Self::Grid, Self::Random, Self::OverexposedSky];

    pub fn label(self) -> &'static str {
        match self {
            Self::Grid => "grid",
            Self::Random => "random",
            Self::OverexposedSky => "overexposed-sky",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == label)
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    // Uniform on SO(3) (Shoemake).
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        b * (tau * u3).cos(),
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
    ))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn grid(rng: &mut ChaCha8Rng) -> SceneFile {
    let mut splats = Vec::with_capacity(100);
    for j in 0..10 {
        for i in 0..10 {
            let mean = Vector3::new(-0.9 + 0.2 * i as f64, -0.9 + 0.2 * j as f64, 0.0);
            let rgb = [
                rng.gen_range(0.1..0.9),
                rng.gen_range(0.1..0.9),
                rng.gen_range(0.1..0.9),
            ];
            let opacity = rng.gen_range(0.35..1.0);
            splats.push(Splat3D::with_color(
                mean,
                Vector3::repeat(0.08),
                UnitQuaternion::identity(),
                opacity,
                rgb,
            ));
        }
    }
    SceneFile {
        splats,
        source_path: None,
        sh_degree: 0,
    }
}

fn random(rng: &mut ChaCha8Rng) -> SceneFile {
    let splats = (0..5000)
        .map(|_| {
            let mean = Vector3::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            );
            let scale = Vector3::new(
                log_uniform(rng, 0.015, 0.06),
                log_uniform(rng, 0.015, 0.06),
                log_uniform(rng, 0.015, 0.06),
            );
            let rotation = random_rotation(rng);
            let opacity = rng.gen_range(0.05..1.0);
            let rgb = [
                rng.gen_range(0.1..0.9),
                rng.gen_range(0.1..0.9),
                rng.gen_range(0.1..0.9),
            ];
            let mut s = Splat3D::with_color(mean, scale, rotation, opacity, rgb);
            for k in 1..16 {
                for ch in 0..3 {
                    s.sh[k][ch] = rng.gen_range(-0.05..0.05);
                }
            }
            s
        })
        .collect();
    SceneFile {
        splats,
        source_path: None,
        sh_degree: 3,
    }
}

fn overexposed_sky(rng: &mut ChaCha8Rng) -> SceneFile {
    let mut splats = Vec::new();
    // Dark, nearly opaque backdrop.
    for j in 0..16 {
        for i in 0..16 {
            let mean = Vector3::new(-1.2 + 0.16 * i as f64, -1.2 + 0.16 * j as f64, 0.5);
            let g = rng.gen_range(0.05..0.2);
            splats.push(Splat3D::with_color(
                mean,
                Vector3::new(0.11, 0.11, 0.02),
                UnitQuaternion::identity(),
                0.95,
                [g, g, 1.2 * g],
            ));
        }
    }
    // Large faint splats far brighter than white over the upper half.
    for _ in 0..150 {
        let mean = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..0.05),
            rng.gen_range(0.1..0.3),
        );
        let scale = Vector3::new(rng.gen_range(0.1..0.25), rng.gen_range(0.08..0.18), 0.02);
        let rotation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), rng.gen_range(0.0..3.2));
        let level = rng.gen_range(2.9..3.1);
        splats.push(Splat3D::with_color(
            mean,
            scale,
            rotation,
            rng.gen_range(0.05..0.25),
            [level, level, level],
        ));
    }
    SceneFile {
        splats,
        source_path: None,
        sh_degree: 0,
    }
}

/// Deterministic in `(kind, seed)`.
pub fn generate_synthetic_scene(kind: SyntheticKind, seed: u64) -> SceneFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SyntheticKind::Grid => grid(&mut rng),
        SyntheticKind::Random => random(&mut rng),
        SyntheticKind::OverexposedSky => overexposed_sky(&mut rng),
    }
}

/// `count` cameras on a horizontal arc in front of the scene, all looking at
/// the origin. A single camera looks straight down `+z`.
pub fn synthetic_cameras(count: usize) -> Vec<CameraEntry> {
    (0..count)
        .map(|k| {
            let angle = if count > 1 {
                -ORBIT_HALF_ANGLE + 2.0 * ORBIT_HALF_ANGLE * k as f64 / (count - 1) as f64
            } else {
                0.0
            };
            let eye = Vector3::new(
                CAMERA_DISTANCE * angle.sin(),
                -0.1 * angle,
                -CAMERA_DISTANCE * angle.cos(),
            );
            CameraEntry {
                id: k as i64,
                camera: Camera::look_at(
                    SYNTHETIC_RESOLUTION,
                    SYNTHETIC_RESOLUTION,
                    FOCAL,
                    eye,
                    Vector3::zeros(),
                ),
            }
        })
        .collect()
}

/// Band-0 coefficient that yields `rgb` under the `+0.5` offset.
pub fn dc_for_color(rgb: f64) -> f64 {
    (rgb - 0.5) / SH_C0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        for kind in SyntheticKind::ALL {
            assert_eq!(
                generate_synthetic_scene(kind, 1),
                generate_synthetic_scene(kind, 1)
            );
        }
        assert_ne!(
            generate_synthetic_scene(SyntheticKind::Random, 1),
            generate_synthetic_scene(SyntheticKind::Random, 2)
        );
    }

    #[test]
    fn sizes() {
        assert_eq!(
            generate_synthetic_scene(SyntheticKind::Grid, 0)
                .splats
                .len(),
            100
        );
        assert_eq!(
            generate_synthetic_scene(SyntheticKind::Random, 0)
                .splats
                .len(),
            5000
        );
    }

    #[test]
    fn random_scene_invariants() {
        let scene = generate_synthetic_scene(SyntheticKind::Random, 7);
        for s in &scene.splats {
            assert!(s.scale.iter().all(|&v| v > 0.0));
            assert!((s.rotation.quaternion().norm() - 1.0).abs() < 1e-6);
            assert!((0.05..=1.0).contains(&s.opacity));
            assert!(s.mean.iter().all(|v| v.abs() <= 0.5));
        }
    }

    #[test]
    fn single_camera_faces_plus_z() {
        let cams = synthetic_cameras(1);
        assert!(
            (cams[0].camera.rotation - nalgebra::Matrix3::identity())
                .abs()
                .max()
                < 1e-15
        );
        assert_eq!(synthetic_cameras(4).len(), 4);
    }
}
