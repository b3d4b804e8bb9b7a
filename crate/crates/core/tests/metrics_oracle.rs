use polysplat::metrics::{psnr, ssim};
use polysplat::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SSIM with an explicit 11×11 window per position, no separable filtering.
fn naive_ssim(a: &Image, b: &Image) -> f64 {
    let (w, h) = (a.width as usize, a.height as usize);
    let sigma: f64 = 1.5;
    let mut win = [[0.0; 11]; 11];
    let mut total = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut sum = 0.0;
    let mut count = 0;
    for ch in 0..3 {
        for y in 0..=h - 11 {
            for x in 0..=w - 11 {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (i, row) in win.iter().enumerate() {
                    for (j, &wt) in row.iter().enumerate() {
                        let idx = (y + i) * w + x + j;
                        let (va, vb) = (a.pixels[idx][ch], b.pixels[idx][ch]);
                        let wt = wt / total;
                        ma += wt * va;
                        mb += wt * vb;
                        saa += wt * va * va;
                        sbb += wt * vb * vb;
                        sab += wt * va * vb;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
    }
    sum / count as f64
}

fn noisy(rng: &mut ChaCha8Rng, base: &Image, amp: f64) -> Image {
    let mut out = base.clone();
    for p in &mut out.pixels {
        for c in p.iter_mut() {
            *c = (*c + rng.gen_range(-amp..amp)).clamp(0.0, 1.0);
        }
    }
    out
}

#[test]
fn ssim_matches_naive_window_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut base = Image::filled(37, 29, [0.0; 3]);
    for (i, p) in base.pixels.iter_mut().enumerate() {
        let (x, y) = ((i % 37) as f64, (i / 37) as f64);
        *p = [
            0.5 + 0.4 * (x / 5.0).sin(),
            0.5 + 0.4 * (y / 7.0).cos(),
            ((x + y) / 66.0).min(1.0),
        ];
    }
    for amp in [0.01, 0.1, 0.4] {
        let other = noisy(&mut rng, &base, amp);
        let (fast, slow) = (ssim(&base, &other).unwrap(), naive_ssim(&base, &other));
        assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }
}

#[test]
fn psnr_matches_direct_mse() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = noisy(&mut rng, &Image::filled(20, 20, [0.5; 3]), 0.5);
    let b = noisy(&mut rng, &a, 0.05);
    let mse: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(p, q)| (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>())
        .sum::<f64>()
        / 1200.0;
    assert!((psnr(&a, &b).unwrap() - 10.0 * (1.0 / mse).log10()).abs() < 1e-10);
}
