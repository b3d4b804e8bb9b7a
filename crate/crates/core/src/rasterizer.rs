//! Tile-based software rasterizer.
//!
//! Splats are projected, sorted once by camera depth (ties by index) and
//! binned into square tiles. Binning is two-staged: a coarse axis-aligned
//! rectangle from the culling radius, then an exact test of the smallest
//! quadric value inside each tile's pixel-center box. Each tile then blends
//! its list front to back. Tiles own their pixels, so tiles run in parallel
//! and the output does not depend on the thread count.

use std::ops::AddAssign;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel_math::{
    culling_radius, eval_kernel, CullingBound, KernelError, KernelSpec, DEFAULT_EPSILON,
};
use crate::projection::{project_splat, Camera, ProjectedSplat, Splat3D, DEFAULT_DILATION};

/// Upper bound on a single fragment's alpha.
pub const ALPHA_CAP: f64 = 0.999;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("invalid raster configuration: {0}")]
    InvalidConfig(String),
    #[error("splat contributes less than the cutoff everywhere on screen")]
    EmptyBounds,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Which radius bins a splat into tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CullingMode {
    /// The Gaussian bound `sqrt(2 ln(o/ε))`, whatever the kernel.
    StopThePop,
    /// The polynomial's first root; the same for every splat.
    ZeroCrossing,
    /// The kernel's own `o · k(t²) = ε` radius.
    OpacityAware,
}

impl CullingMode {
    pub const ALL: [CullingMode; 3] = [
        CullingMode::StopThePop,
        CullingMode::ZeroCrossing,
        CullingMode::OpacityAware,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CullingMode::StopThePop => "stp",
            CullingMode::ZeroCrossing => "zero",
            CullingMode::OpacityAware => "opacity",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterConfig {
    pub tile_size: u32,
    pub epsilon: f64,
    pub transmittance_floor: f64,
    pub culling_mode: CullingMode,
    pub kernel: KernelSpec,
    /// Kernel whose bounds drive `ZeroCrossing`/`OpacityAware` culling when it
    /// differs from the blending kernel. Used to study mismatched bounds.
    pub culling_kernel: Option<KernelSpec>,
    /// `None` uses every available core.
    pub threads: Option<usize>,
    pub v_dilation: f64,
    pub background: [f64; 3],
    /// Clamp splat colors to `[0, 1]` before blending instead of only at
    /// output.
    pub clamp_before_blend: bool,
}

impl RasterConfig {
    pub fn new(kernel: KernelSpec, culling_mode: CullingMode) -> Self {
        Self {
            tile_size: 16,
            epsilon: DEFAULT_EPSILON,
            transmittance_floor: 1e-4,
            culling_mode,
            kernel,
            culling_kernel: None,
            threads: None,
            v_dilation: DEFAULT_DILATION,
            background: [1.0; 3],
            clamp_before_blend: false,
        }
    }

    /// Kernel used for culling bounds.
    pub fn bounds_kernel(&self) -> &KernelSpec {
        self.culling_kernel.as_ref().unwrap_or(&self.kernel)
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        let bad = |m: String| Err(RasterError::InvalidConfig(m));
        if self.tile_size == 0 {
            return bad("tile size must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} not in (0, 1)", self.epsilon));
        }
        if !(0.0..1.0).contains(&self.transmittance_floor) {
            return bad(format!(
                "transmittance floor {} not in [0, 1)",
                self.transmittance_floor
            ));
        }
        if !(self.v_dilation >= 0.0 && self.v_dilation.is_finite()) {
            return bad(format!("dilation {} must be nonnegative", self.v_dilation));
        }
        if self.culling_mode == CullingMode::ZeroCrossing && !self.bounds_kernel().is_polynomial() {
            return bad("zero-crossing culling needs a polynomial kernel".into());
        }
        if self.threads == Some(0) {
            return bad("thread count must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerfCounters {
    pub splats_submitted: u64,
    pub splats_frustum_culled: u64,
    pub tile_pairs_coarse: u64,
    pub tile_pairs_after_tight_test: u64,
    pub kernel_evaluations: u64,
    pub fragments_blended: u64,
}

impl AddAssign for PerfCounters {
    fn add_assign(&mut self, o: Self) {
        self.splats_submitted += o.splats_submitted;
        self.splats_frustum_culled += o.splats_frustum_culled;
        self.tile_pairs_coarse += o.tile_pairs_coarse;
        self.tile_pairs_after_tight_test += o.tile_pairs_after_tight_test;
        self.kernel_evaluations += o.kernel_evaluations;
        self.fragments_blended += o.fragments_blended;
    }
}

/// Accumulated color and remaining transmittance per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Framebuffer {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<[f64; 3]>,
    pub transmittance: Vec<f64>,
}

impl Framebuffer {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            rgb: vec![[0.0; 3]; n],
            transmittance: vec![1.0; n],
        }
    }

    /// `rgb + T · background`, unclamped.
    pub fn composite(&self, background: [f64; 3]) -> Image {
        let pixels = self
            .rgb
            .iter()
            .zip(&self.transmittance)
            .map(|(c, &t)| [0, 1, 2].map(|i| c[i] + t * background[i]))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

/// Row-major RGB image with real-valued channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[f64; 3]>,
}

impl Image {
    pub fn filled(width: u32, height: u32, rgb: [f64; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![rgb; width as usize * height as usize],
        }
    }

    pub fn clamped(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|p| p.map(|v| v.clamp(0.0, 1.0)))
                .collect(),
        }
    }

    pub fn get(&self, x: u32, y: u32) -> [f64; 3] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

/// Inclusive-exclusive range of tile indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl TileRect {
    pub fn area(&self) -> u64 {
        (self.x1 - self.x0) as u64 * (self.y1 - self.y0) as u64
    }
}

/// Closed box of pixel-center coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl PixelBox {
    /// Pixel centers covered by tile `(tx, ty)` of an image `width × height`.
    pub fn for_tile(tx: u32, ty: u32, tile_size: u32, width: u32, height: u32) -> Self {
        let px0 = tx * tile_size;
        let py0 = ty * tile_size;
        let px1 = (px0 + tile_size).min(width);
        let py1 = (py0 + tile_size).min(height);
        Self {
            x0: px0 as f64 + 0.5,
            y0: py0 as f64 + 0.5,
            x1: px1 as f64 - 0.5,
            y1: py1 as f64 - 0.5,
        }
    }
}

/// Culling radius and the matching half extents of the bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub bound: CullingBound,
    pub half_extent: [f64; 2],
}

/// Culling bound for `p` under `cfg`, using the post-anti-aliasing opacity.
pub fn culling_bound(p: &ProjectedSplat, cfg: &RasterConfig) -> Result<CullingBound, RasterError> {
    let opacity = p.opacity_eff.min(1.0);
    if !(opacity > 0.0) {
        return Err(RasterError::EmptyBounds);
    }
    let result = match cfg.culling_mode {
        CullingMode::StopThePop => culling_radius(&KernelSpec::exponential(), opacity, cfg.epsilon),
        CullingMode::ZeroCrossing => {
            if !cfg.bounds_kernel().is_polynomial() {
                return Err(RasterError::InvalidConfig(
                    "zero-crossing culling needs a polynomial kernel".into(),
                ));
            }
            culling_radius(cfg.bounds_kernel(), opacity, 0.0)
        }
        CullingMode::OpacityAware => culling_radius(cfg.bounds_kernel(), opacity, cfg.epsilon),
    };
    match result {
        Ok(b) => Ok(b),
        Err(KernelError::FullyCulled) => Err(RasterError::EmptyBounds),
        Err(e) => Err(e.into()),
    }
}

/// The ellipse `Q(v) ≤ t²` has half extents `t·sqrt(Σ_xx)` and `t·sqrt(Σ_yy)`.
pub fn footprint(p: &ProjectedSplat, cfg: &RasterConfig) -> Result<Footprint, RasterError> {
    let bound = culling_bound(p, cfg)?;
    let t = bound.radius_sigma;
    Ok(Footprint {
        bound,
        half_extent: [t * p.cov2d.a.sqrt(), t * p.cov2d.c.sqrt()],
    })
}

/// Tiles touched by the splat's bounding box, clipped to the image.
pub fn screen_bounds(
    p: &ProjectedSplat,
    cfg: &RasterConfig,
    width: u32,
    height: u32,
) -> Result<(TileRect, Footprint), RasterError> {
    let fp = footprint(p, cfg)?;
    let pixel_range = |center: f64, half: f64, size: u32| -> Option<(u32, u32)> {
        // Pixel i is covered when its center i + 0.5 lies in [center − half, center + half].
        let lo = (center - half - 0.5).ceil().max(0.0);
        let hi = (center + half - 0.5).floor().min(size as f64 - 1.0);
        (lo <= hi).then_some((lo as u32, hi as u32))
    };
    let (px0, px1) =
        pixel_range(p.mean2d[0], fp.half_extent[0], width).ok_or(RasterError::EmptyBounds)?;
    let (py0, py1) =
        pixel_range(p.mean2d[1], fp.half_extent[1], height).ok_or(RasterError::EmptyBounds)?;
    let t = cfg.tile_size;
    Ok((
        TileRect {
            x0: px0 / t,
            y0: py0 / t,
            x1: px1 / t + 1,
            y1: py1 / t + 1,
        },
        fp,
    ))
}

/// Exact minimum of the splat's quadric over a box of pixel positions.
///
/// Zero when the mean lies inside. Otherwise the convex quadratic attains its
/// minimum on the boundary, so each edge is minimized in one variable with
/// clamping.
pub fn min_quadric_over_box(p: &ProjectedSplat, b: &PixelBox) -> f64 {
    let (mx, my) = (p.mean2d[0], p.mean2d[1]);
    let (xlo, xhi) = (b.x0 - mx, b.x1 - mx);
    let (ylo, yhi) = (b.y0 - my, b.y1 - my);
    if xlo <= 0.0 && 0.0 <= xhi && ylo <= 0.0 && 0.0 <= yhi {
        return 0.0;
    }
    let q = &p.conic;
    let along_y = |dx: f64| {
        let dy = (-q.b * dx / q.c).clamp(ylo, yhi);
        q.quadratic_form(dx, dy)
    };
    let along_x = |dy: f64| {
        let dx = (-q.b * dy / q.a).clamp(xlo, xhi);
        q.quadratic_form(dx, dy)
    };
    along_y(xlo)
        .min(along_y(xhi))
        .min(along_x(ylo))
        .min(along_x(yhi))
}

/// Whether any pixel center of the box can fall inside `Q ≤ quadric_bound`.
pub fn tight_tile_test(p: &ProjectedSplat, b: &PixelBox, quadric_bound: f64) -> bool {
    min_quadric_over_box(p, b) <= quadric_bound
}

/// `opacity_eff · k(Q(v))` before the alpha cap; the direct per-pixel path.
#[inline]
pub fn fragment_weight(p: &ProjectedSplat, kernel: &KernelSpec, px: f64, py: f64) -> f64 {
    p.opacity_eff * eval_kernel(kernel, p.quadric(px, py))
}

struct Binned {
    projected: Vec<ProjectedSplat>,
    /// Per tile, indices into `projected` in blending order.
    tiles: Vec<Vec<u32>>,
    tiles_x: u32,
    counters: PerfCounters,
}

fn thread_pool(cfg: &RasterConfig) -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool")
}

fn bin(splats: &[Splat3D], sh_degree: usize, cam: &Camera, cfg: &RasterConfig) -> Binned {
    let (w, h) = (cam.width, cam.height);
    let tiles_x = w.div_ceil(cfg.tile_size);
    let tiles_y = h.div_ceil(cfg.tile_size);

    let projected: Vec<Option<ProjectedSplat>> = splats
        .par_iter()
        .map(|s| {
            project_splat(s, cam, cfg.v_dilation, sh_degree)
                .ok()
                .flatten()
        })
        .collect();
    let mut counters = PerfCounters {
        splats_submitted: splats.len() as u64,
        splats_frustum_culled: projected.iter().filter(|p| p.is_none()).count() as u64,
        ..PerfCounters::default()
    };
    let mut visible: Vec<ProjectedSplat> = projected.into_iter().flatten().collect();
    let mut order: Vec<usize> = (0..visible.len()).collect();
    order.sort_by(|&i, &j| {
        visible[i]
            .depth
            .total_cmp(&visible[j].depth)
            .then(i.cmp(&j))
    });
    visible = order.into_iter().map(|i| visible[i].clone()).collect();

    let per_splat: Vec<(u64, Vec<u32>)> = visible
        .par_iter()
        .map(|p| {
            let Ok((rect, fp)) = screen_bounds(p, cfg, w, h) else {
                return (0, Vec::new());
            };
            let mut hits = Vec::new();
            for ty in rect.y0..rect.y1 {
                for tx in rect.x0..rect.x1 {
                    let b = PixelBox::for_tile(tx, ty, cfg.tile_size, w, h);
                    if tight_tile_test(p, &b, fp.bound.quadric_root) {
                        hits.push(ty * tiles_x + tx);
                    }
                }
            }
            (rect.area(), hits)
        })
        .collect();

    let mut tiles = vec![Vec::new(); (tiles_x * tiles_y) as usize];
    for (idx, (coarse, hits)) in per_splat.into_iter().enumerate() {
        counters.tile_pairs_coarse += coarse;
        counters.tile_pairs_after_tight_test += hits.len() as u64;
        for t in hits {
            tiles[t as usize].push(idx as u32);
        }
    }
    Binned {
        projected: visible,
        tiles,
        tiles_x,
        counters,
    }
}

struct TileOutput {
    rgb: Vec<[f64; 3]>,
    transmittance: Vec<f64>,
    counters: PerfCounters,
}

fn blend_tile(binned: &Binned, tile: usize, cam: &Camera, cfg: &RasterConfig) -> TileOutput {
    let tx = tile as u32 % binned.tiles_x;
    let ty = tile as u32 / binned.tiles_x;
    let x0 = tx * cfg.tile_size;
    let y0 = ty * cfg.tile_size;
    let x1 = (x0 + cfg.tile_size).min(cam.width);
    let y1 = (y0 + cfg.tile_size).min(cam.height);
    let list = &binned.tiles[tile];

    let n = ((x1 - x0) * (y1 - y0)) as usize;
    let mut out = TileOutput {
        rgb: Vec::with_capacity(n),
        transmittance: Vec::with_capacity(n),
        counters: PerfCounters::default(),
    };
    for y in y0..y1 {
        for x in x0..x1 {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut t = 1.0;
            let mut rgb = [0.0; 3];
            for &i in list {
                if t < cfg.transmittance_floor {
                    break;
                }
                let p = &binned.projected[i as usize];
                out.counters.kernel_evaluations += 1;
                let alpha = fragment_weight(p, &cfg.kernel, px, py).min(ALPHA_CAP);
                if alpha < cfg.epsilon {
                    continue;
                }
                out.counters.fragments_blended += 1;
                let color = if cfg.clamp_before_blend {
                    p.color.map(|c| c.clamp(0.0, 1.0))
                } else {
                    p.color
                };
                let w = alpha * t;
                for ch in 0..3 {
                    rgb[ch] += w * color[ch];
                }
                t *= 1.0 - alpha;
            }
            out.rgb.push(rgb);
            out.transmittance.push(t);
        }
    }
    out
}

/// Renders `splats` from `cam`. Output is bit-identical for any thread count.
pub fn render(
    splats: &[Splat3D],
    sh_degree: usize,
    cam: &Camera,
    cfg: &RasterConfig,
) -> Result<(Framebuffer, PerfCounters), RasterError> {
    cfg.validate()?;
    cam.validate(1e-6)
        .map_err(|e| RasterError::InvalidConfig(e.to_string()))?;
    let pool = thread_pool(cfg);
    pool.install(|| {
        let binned = bin(splats, sh_degree, cam, cfg);
        let outputs: Vec<TileOutput> = (0..binned.tiles.len())
            .into_par_iter()
            .map(|tile| blend_tile(&binned, tile, cam, cfg))
            .collect();

        let mut fb = Framebuffer::new(cam.width, cam.height);
        let mut counters = binned.counters;
        for (tile, out) in outputs.into_iter().enumerate() {
            let tx = tile as u32 % binned.tiles_x;
            let ty = tile as u32 / binned.tiles_x;
            let x0 = tx * cfg.tile_size;
            let y0 = ty * cfg.tile_size;
            let tw = ((x0 + cfg.tile_size).min(cam.width) - x0) as usize;
            for (k, (rgb, t)) in out.rgb.into_iter().zip(out.transmittance).enumerate() {
                let x = x0 as usize + k % tw;
                let y = y0 as usize + k / tw;
                let idx = y * cam.width as usize + x;
                fb.rgb[idx] = rgb;
                fb.transmittance[idx] = t;
            }
            counters += out.counters;
        }
        Ok((fb, counters))
    })
}

/// Binning and tight tests only; the blending counters stay zero.
pub fn count_pairs(
    splats: &[Splat3D],
    sh_degree: usize,
    cam: &Camera,
    cfg: &RasterConfig,
) -> Result<PerfCounters, RasterError> {
    cfg.validate()?;
    cam.validate(1e-6)
        .map_err(|e| RasterError::InvalidConfig(e.to_string()))?;
    let pool = thread_pool(cfg);
    Ok(pool.install(|| bin(splats, sh_degree, cam, cfg).counters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::Sym2;

    fn splat_at(x: f64, y: f64, cov: Sym2, opacity: f64) -> ProjectedSplat {
        ProjectedSplat {
            mean2d: [x, y],
            cov2d: cov,
            conic: cov.inverse().unwrap(),
            depth: 1.0,
            opacity,
            opacity_eff: opacity,
            color: [1.0; 3],
        }
    }

    fn linear_kernel() -> KernelSpec {
        KernelSpec::polynomial_relu(vec![0.773, -0.176]).unwrap()
    }

    #[test]
    fn isotropic_zero_crossing_extent() {
        let cfg = RasterConfig::new(linear_kernel(), CullingMode::ZeroCrossing);
        let p = splat_at(8.0, 8.0, Sym2::IDENTITY, 1.0);
        let fp = footprint(&p, &cfg).unwrap();
        let t = linear_kernel().first_root().sqrt();
        assert!((fp.half_extent[0] - t).abs() < 1e-12);
        assert!((fp.half_extent[1] - t).abs() < 1e-12);
        let (rect, _) = screen_bounds(&p, &cfg, 64, 64).unwrap();
        assert_eq!(
            rect,
            TileRect {
                x0: 0,
                y0: 0,
                x1: 1,
                y1: 1
            }
        );
    }

    #[test]
    fn anisotropic_extent_ratio() {
        let cfg = RasterConfig::new(KernelSpec::exponential(), CullingMode::StopThePop);
        let p = splat_at(30.0, 30.0, Sym2::new(100.0, 0.0, 1.0), 0.8);
        let fp = footprint(&p, &cfg).unwrap();
        assert!((fp.half_extent[0] / fp.half_extent[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn faint_splat_has_empty_bounds() {
        let cfg = RasterConfig::new(linear_kernel(), CullingMode::OpacityAware);
        let p = splat_at(8.0, 8.0, Sym2::IDENTITY, 0.5 / 255.0);
        assert_eq!(
            screen_bounds(&p, &cfg, 64, 64),
            Err(RasterError::EmptyBounds)
        );
    }

    #[test]
    fn offscreen_has_empty_bounds() {
        let cfg = RasterConfig::new(linear_kernel(), CullingMode::OpacityAware);
        let p = splat_at(-50.0, 8.0, Sym2::IDENTITY, 1.0);
        assert_eq!(
            screen_bounds(&p, &cfg, 64, 64),
            Err(RasterError::EmptyBounds)
        );
    }

    #[test]
    fn tight_test_trivial_cases() {
        let b = PixelBox::for_tile(1, 1, 16, 64, 64);
        let inside = splat_at(20.0, 20.0, Sym2::IDENTITY, 1.0);
        assert!(tight_tile_test(&inside, &b, 1e-9));
        let far = splat_at(16.5 + 100.0, 20.0, Sym2::IDENTITY, 1.0);
        assert!(!tight_tile_test(&far, &b, 2.1 * 2.1));
    }

    #[test]
    fn min_quadric_on_edge_by_hand() {
        let b = PixelBox {
            x0: 0.5,
            y0: 0.5,
            x1: 15.5,
            y1: 15.5,
        };
        let p = splat_at(18.5, 8.0, Sym2::IDENTITY, 1.0);
        assert!((min_quadric_over_box(&p, &b) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn zero_crossing_with_exponential_is_invalid() {
        let cfg = RasterConfig::new(KernelSpec::exponential(), CullingMode::ZeroCrossing);
        assert!(matches!(cfg.validate(), Err(RasterError::InvalidConfig(_))));
    }

    #[test]
    fn labels_round_trip() {
        for m in CullingMode::ALL {
            assert_eq!(CullingMode::from_label(m.label()), Some(m));
        }
    }
}
