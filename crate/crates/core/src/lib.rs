//! Gaussian splatting with ReLU-polynomial kernels.
//!
//! A CPU reference renderer plus the analysis pieces around it:
//!
//! - [`kernel_math`]: kernels, L1 polynomial fits, closed-form culling radii.
//! - [`projection`]: EWA projection, kernel-agnostic anti-aliasing, SH color.
//! - [`rasterizer`]: tile binning with exact tile tests, front-to-back blending,
//!   hardware-independent performance counters.
//! - [`npu_form`]: order-1 kernel evaluation as a ReLU'd inner product.
//! - [`scene_io`]: 3DGS PLY checkpoints, camera JSON, PNG, synthetic scenes.
//! - [`metrics`]: PSNR, SSIM and render comparisons.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod kernel_math;
pub mod metrics;
pub mod npu_form;
pub mod projection;
pub mod rasterizer;
pub mod scene_io;

pub use kernel_math::{
    culling_radius, eval_kernel, extended_fit_range_xmax, first_positive_root, fit_polynomial,
    CullingBound, FitConfig, FitError, FitResult, KernelFile, KernelKind, KernelSpec,
    StandardKernel, DEFAULT_EPSILON,
};
pub use metrics::{compare, psnr, ssim, CompareReport};
pub use projection::{project_splat, Camera, ProjectedSplat, Splat3D, Sym2};
pub use rasterizer::{
    count_pairs, render, CullingMode, Framebuffer, Image, PerfCounters, RasterConfig,
};
pub use scene_io::{load_cameras, load_ply, SceneFile};
