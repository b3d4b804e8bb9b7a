//! View-dependent color from real spherical harmonics (degree ≤ 3), in the
//! basis and sign convention of standard 3DGS checkpoints.

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Number of coefficients per channel for a given degree.
pub fn coefficient_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Evaluates the basis functions up to `degree` for a unit direction.
pub fn sh_basis(dir: [f64; 3], degree: usize) -> [f64; 16] {
    let [x, y, z] = dir;
    let mut b = [0.0; 16];
    b[0] = SH_C0;
    if degree >= 1 {
        b[1] = -SH_C1 * y;
        b[2] = SH_C1 * z;
        b[3] = -SH_C1 * x;
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b[4] = SH_C2[0] * x * y;
        b[5] = SH_C2[1] * y * z;
        b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
        b[7] = SH_C2[3] * x * z;
        b[8] = SH_C2[4] * (xx - yy);
        if degree >= 3 {
            b[9] = SH_C3[0] * y * (3.0 * xx - yy);
            b[10] = SH_C3[1] * x * y * z;
            b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
            b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
            b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
            b[14] = SH_C3[5] * z * (xx - yy);
            b[15] = SH_C3[6] * x * (xx - 3.0 * yy);
        }
    }
    b
}

/// RGB color seen along `view_dir` (from camera towards the splat).
///
/// Adds the usual `+0.5` offset and clamps below at zero. Values above one
/// are kept: trained scenes rely on overexposed splats.
pub fn eval_sh_color(sh: &[[f64; 3]; 16], view_dir: [f64; 3], degree: usize) -> [f64; 3] {
    let degree = degree.min(3);
    let basis = sh_basis(view_dir, degree);
    let mut rgb = [0.5; 3];
    for (coeff, &w) in sh.iter().zip(&basis).take(coefficient_count(degree)) {
        for ch in 0..3 {
            rgb[ch] += w * coeff[ch];
        }
    }
    rgb.map(|v| v.max(0.0))
}
