use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use polysplat::projection::{Camera, ProjectedSplat, Splat3D, Sym2};
use polysplat::rasterizer::{min_quadric_over_box, tight_tile_test, PixelBox};
use polysplat::scene_io::{generate_synthetic_scene, synthetic_cameras, SyntheticKind};
use polysplat::{count_pairs, render, CullingMode, RasterConfig, StandardKernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_projected(rng: &mut ChaCha8Rng) -> ProjectedSplat {
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let (l1, l2): (f64, f64) = (rng.gen_range(0.3..400.0), rng.gen_range(0.3..400.0));
    let (c, s) = (angle.cos(), angle.sin());
    let cov = Sym2::new(
        c * c * l1 + s * s * l2,
        c * s * (l1 - l2),
        s * s * l1 + c * c * l2,
    );
    ProjectedSplat {
        mean2d: [rng.gen_range(-20.0..84.0), rng.gen_range(-20.0..84.0)],
        cov2d: cov,
        conic: cov.inverse().unwrap(),
        depth: 1.0,
        opacity: 1.0,
        opacity_eff: 1.0,
        color: [1.0; 3],
    }
}

fn grid_min(p: &ProjectedSplat, b: &PixelBox, n: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let x = b.x0 + (b.x1 - b.x0) * i as f64 / (n - 1) as f64;
            let y = b.y0 + (b.y1 - b.y0) * j as f64 / (n - 1) as f64;
            best = best.min(p.quadric(x, y));
        }
    }
    best
}

#[test]
fn tight_test_agrees_with_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut positives, mut false_positives) = (0, 0);
    for _ in 0..1000 {
        let p = random_projected(&mut rng);
        let (tx, ty) = (rng.gen_range(0..4), rng.gen_range(0..4));
        let b = PixelBox::for_tile(tx, ty, 16, 64, 64);
        let bound = rng.gen_range(1.0..12.0);
        let decision = tight_tile_test(&p, &b, bound);
        let coarse = grid_min(&p, &b, 64);
        if coarse <= bound {
            assert!(decision, "false negative: grid min {coarse} <= {bound}");
        }
        // The exact minimum can never exceed a sampled one.
        assert!(min_quadric_over_box(&p, &b) <= coarse + 1e-9);
        if decision {
            positives += 1;
            if coarse > bound {
                false_positives += 1;
                // Within grid resolution: one grid cell of slack.
                let h = (b.x1 - b.x0) / 63.0;
                let lmax = 0.5 * (p.conic.a + p.conic.c)
                    + (0.25 * (p.conic.a - p.conic.c).powi(2) + p.conic.b.powi(2)).sqrt();
                let slack =
                    2.0 * (lmax * bound).sqrt() * h * std::f64::consts::SQRT_2 + 2.0 * lmax * h * h;
                assert!(coarse - bound <= slack, "{coarse} vs {bound} (+{slack})");
            }
        }
    }
    assert!(positives > 100);
    assert!(false_positives < positives / 10);
}

fn all_configs() -> Vec<RasterConfig> {
    let mut cfgs = Vec::new();
    for k in StandardKernel::ALL {
        for mode in CullingMode::ALL {
            let cfg = RasterConfig::new(k.spec(), mode);
            if cfg.validate().is_ok() {
                cfgs.push(cfg);
            }
        }
    }
    cfgs
}

#[test]
fn render_is_identical_across_thread_counts() {
    let cam = &synthetic_cameras(3)[2].camera;
    for kind in SyntheticKind::ALL {
        let scene = generate_synthetic_scene(kind, 4);
        for mut cfg in all_configs() {
            let mut outputs = Vec::new();
            for threads in [1, 2, 8] {
                cfg.threads = Some(threads);
                outputs.push(render(&scene.splats, scene.sh_degree, cam, &cfg).unwrap());
            }
            let (first_fb, first_c) = &outputs[0];
            for (fb, c) in &outputs[1..] {
                assert!(fb
                    .rgb
                    .iter()
                    .zip(&first_fb.rgb)
                    .all(|(a, b)| a.map(f64::to_bits) == b.map(f64::to_bits)));
                assert!(fb
                    .transmittance
                    .iter()
                    .zip(&first_fb.transmittance)
                    .all(|(a, b)| a.to_bits() == b.to_bits()));
                assert_eq!(c, first_c);
            }
        }
    }
}

#[test]
fn pair_counts_order_by_culling_mode() {
    let scene = generate_synthetic_scene(SyntheticKind::Random, 0);
    for entry in synthetic_cameras(3) {
        let pairs = |mode| {
            let cfg = RasterConfig::new(StandardKernel::Linear.spec(), mode);
            count_pairs(&scene.splats, scene.sh_degree, &entry.camera, &cfg).unwrap()
        };
        let (stp, zero, oa) = (
            pairs(CullingMode::StopThePop),
            pairs(CullingMode::ZeroCrossing),
            pairs(CullingMode::OpacityAware),
        );
        assert!(oa.tile_pairs_after_tight_test <= zero.tile_pairs_after_tight_test);
        assert!(zero.tile_pairs_after_tight_test < stp.tile_pairs_after_tight_test);
        for c in [stp, zero, oa] {
            assert!(c.tile_pairs_after_tight_test <= c.tile_pairs_coarse);
            assert_eq!(c.kernel_evaluations, 0);
        }
    }
}

#[test]
fn opacity_aware_matches_stop_the_pop_for_linear_kernel() {
    for kind in SyntheticKind::ALL {
        let scene = generate_synthetic_scene(kind, 0);
        for entry in synthetic_cameras(2) {
            let run = |mode| {
                let cfg = RasterConfig::new(StandardKernel::Linear.spec(), mode);
                render(&scene.splats, scene.sh_degree, &entry.camera, &cfg)
                    .unwrap()
                    .0
            };
            assert_eq!(run(CullingMode::OpacityAware), run(CullingMode::StopThePop));
        }
    }
}

/// Camera at the world origin looking down `+z`, with the principal point on
/// a pixel center.
fn centered_camera() -> Camera {
    Camera {
        width: 64,
        height: 64,
        fx: 100.0,
        fy: 100.0,
        cx: 40.5,
        cy: 24.5,
        rotation: Matrix3::identity(),
        translation: Vector3::zeros(),
    }
}

fn white_splat(scale: f64, opacity: f64) -> Splat3D {
    Splat3D::with_color(
        Vector3::new(0.0, 0.0, 2.0),
        Vector3::repeat(scale),
        UnitQuaternion::identity(),
        opacity,
        [1.0; 3],
    )
}

#[test]
fn center_pixel_is_effective_opacity() {
    let cam = centered_camera();
    let splat = white_splat(0.05, 0.6);
    let p = polysplat::project_splat(&splat, &cam, 0.3, 0)
        .unwrap()
        .unwrap();
    for k in [
        StandardKernel::Exponential,
        StandardKernel::Linear,
        StandardKernel::Cubic,
    ] {
        let mut cfg = RasterConfig::new(k.spec(), CullingMode::StopThePop);
        cfg.background = [0.0; 3];
        let (fb, _) = render(std::slice::from_ref(&splat), 0, &cam, &cfg).unwrap();
        let img = fb.composite(cfg.background);
        let v = img.get(40, 24);
        let want = p.opacity_eff * k.spec().peak();
        assert!(
            (v[0] - want).abs() < 1e-12,
            "{}: {} vs {want}",
            k.label(),
            v[0]
        );
    }
}

#[test]
fn small_splat_inside_one_tile_gives_one_pair() {
    let cam = centered_camera();
    let cfg = RasterConfig::new(StandardKernel::Linear.spec(), CullingMode::OpacityAware);
    let c = count_pairs(&[white_splat(0.02, 0.9)], 0, &cam, &cfg).unwrap();
    assert_eq!(c.tile_pairs_coarse, 1);
    assert_eq!(c.tile_pairs_after_tight_test, 1);
}

#[test]
fn empty_scene_is_background() {
    let cam = centered_camera();
    let cfg = RasterConfig::new(StandardKernel::Exponential.spec(), CullingMode::StopThePop);
    let (fb, c) = render(&[], 0, &cam, &cfg).unwrap();
    assert!(fb.transmittance.iter().all(|&t| t == 1.0));
    assert!(fb
        .composite(cfg.background)
        .pixels
        .iter()
        .all(|p| *p == [1.0; 3]));
    assert_eq!(c, Default::default());
}

#[test]
fn splat_behind_camera_is_culled() {
    let cam = centered_camera();
    let mut s = white_splat(0.05, 0.9);
    s.mean.z = -1.0;
    let cfg = RasterConfig::new(StandardKernel::Exponential.spec(), CullingMode::StopThePop);
    let (_, c) = render(&[s], 0, &cam, &cfg).unwrap();
    assert_eq!(c.splats_frustum_culled, 1);
    assert_eq!(c.tile_pairs_coarse, 0);
}
