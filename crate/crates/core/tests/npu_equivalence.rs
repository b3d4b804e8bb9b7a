use polysplat::npu_form::{
    batch_eval, build_splat_vector, vector_dimension, NpuError, PixelVector,
};
use polysplat::projection::{ProjectedSplat, Sym2};
use polysplat::rasterizer::fragment_weight;
use polysplat::StandardKernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_splat(rng: &mut ChaCha8Rng) -> ProjectedSplat {
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let (l1, l2): (f64, f64) = (rng.gen_range(0.3..200.0), rng.gen_range(0.3..200.0));
    let (c, s) = (angle.cos(), angle.sin());
    let cov = Sym2::new(
        c * c * l1 + s * s * l2,
        c * s * (l1 - l2),
        s * s * l1 + c * c * l2,
    );
    ProjectedSplat {
        mean2d: [rng.gen_range(0.0..256.0), rng.gen_range(0.0..256.0)],
        cov2d: cov,
        conic: cov.inverse().unwrap(),
        depth: 1.0,
        opacity: 1.0,
        opacity_eff: rng.gen_range(0.01..1.0),
        color: [1.0; 3],
    }
}

#[test]
fn random_pairs_match_direct_path() {
    let kernel = StandardKernel::Linear.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        let p = random_splat(&mut rng);
        // Pixels near the splat so both the active and the clamped branch occur.
        let px = p.mean2d[0] + rng.gen_range(-40.0..40.0);
        let py = p.mean2d[1] + rng.gen_range(-40.0..40.0);
        let s = build_splat_vector(&p, &kernel).unwrap();
        let got = batch_eval(&[PixelVector::new(px, py)], &[s])[0][0];
        let want = fragment_weight(&p, &kernel, px, py);
        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
    }
}

#[test]
fn full_image_against_splat_batch() {
    let kernel = StandardKernel::Linear.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let splats: Vec<ProjectedSplat> = (0..37).map(|_| random_splat(&mut rng)).collect();
    let vectors: Vec<_> = splats
        .iter()
        .map(|p| build_splat_vector(p, &kernel).unwrap())
        .collect();
    let mut pixels = Vec::with_capacity(256 * 256);
    for y in 0..256 {
        for x in 0..256 {
            pixels.push((x as f64 + 0.5, y as f64 + 0.5));
        }
    }
    let us: Vec<PixelVector> = pixels
        .iter()
        .map(|&(x, y)| PixelVector::new(x, y))
        .collect();
    let out = batch_eval(&us, &vectors);
    let mut worst = 0.0f64;
    for (row, &(x, y)) in out.iter().zip(&pixels) {
        for (v, p) in row.iter().zip(&splats) {
            worst = worst.max((v - fragment_weight(p, &kernel, x, y)).abs());
        }
    }
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn dimensions_and_order_check() {
    assert_eq!([1, 2, 3].map(vector_dimension), [6, 15, 28]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_splat(&mut rng);
    assert_eq!(
        build_splat_vector(&p, &StandardKernel::Cubic.spec()),
        Err(NpuError::WrongOrder(3))
    );
}
