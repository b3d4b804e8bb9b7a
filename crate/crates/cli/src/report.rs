//! Flat report rows for CSV/JSON output.

use polysplat::{CompareReport, PerfCounters};
use serde::{Deserialize, Serialize};

/// One comparison, flattened so it fits a CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub camera_id: i64,
    pub kernel_a: String,
    pub culling_a: String,
    pub kernel_b: String,
    pub culling_b: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub max_abs_diff: f64,
    pub pair_ratio: f64,
    pub pairs_coarse_a: u64,
    pub pairs_tight_a: u64,
    pub kernel_evaluations_a: u64,
    pub fragments_blended_a: u64,
    pub pairs_coarse_b: u64,
    pub pairs_tight_b: u64,
    pub kernel_evaluations_b: u64,
    pub fragments_blended_b: u64,
}

impl CompareRow {
    pub fn new(camera_id: i64, a: (&str, &str), b: (&str, &str), r: &CompareReport) -> Self {
        Self {
            camera_id,
            kernel_a: a.0.into(),
            culling_a: a.1.into(),
            kernel_b: b.0.into(),
            culling_b: b.1.into(),
            psnr_db: r.psnr_db,
            ssim: r.ssim,
            max_abs_diff: r.max_abs_diff,
            pair_ratio: r.pair_ratio,
            pairs_coarse_a: r.counters_a.tile_pairs_coarse,
            pairs_tight_a: r.counters_a.tile_pairs_after_tight_test,
            kernel_evaluations_a: r.counters_a.kernel_evaluations,
            fragments_blended_a: r.counters_a.fragments_blended,
            pairs_coarse_b: r.counters_b.tile_pairs_coarse,
            pairs_tight_b: r.counters_b.tile_pairs_after_tight_test,
            kernel_evaluations_b: r.counters_b.kernel_evaluations,
            fragments_blended_b: r.counters_b.fragments_blended,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub camera_id: i64,
    pub splats_submitted: u64,
    pub splats_frustum_culled: u64,
    pub pairs_coarse: u64,
    pub pairs_tight: u64,
    pub kernel_evaluations: u64,
    pub fragments_blended: u64,
    pub baseline_pairs_tight: u64,
    pub wall_ms: f64,
}

impl BenchRow {
    pub fn new(camera_id: i64, c: &PerfCounters, baseline: &PerfCounters, wall_ms: f64) -> Self {
        Self {
            camera_id,
            splats_submitted: c.splats_submitted,
            splats_frustum_culled: c.splats_frustum_culled,
            pairs_coarse: c.tile_pairs_coarse,
            pairs_tight: c.tile_pairs_after_tight_test,
            kernel_evaluations: c.kernel_evaluations,
            fragments_blended: c.fragments_blended,
            baseline_pairs_tight: baseline.tile_pairs_after_tight_test,
            wall_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub cameras: usize,
    pub pairs_tight_mean: f64,
    pub pairs_tight_min: u64,
    pub pairs_tight_max: u64,
    /// Total tight pairs over total baseline tight pairs.
    pub pair_ratio: f64,
    pub wall_ms_total: f64,
}

impl BenchSummary {
    /// `None` for an empty sweep.
    pub fn from_rows(rows: &[BenchRow]) -> Option<Self> {
        if rows.is_empty() {
            return None;
        }
        let pairs: Vec<u64> = rows.iter().map(|r| r.pairs_tight).collect();
        let total: u64 = pairs.iter().sum();
        let baseline: u64 = rows.iter().map(|r| r.baseline_pairs_tight).sum();
        Some(Self {
            cameras: rows.len(),
            pairs_tight_mean: total as f64 / rows.len() as f64,
            pairs_tight_min: *pairs.iter().min()?,
            pairs_tight_max: *pairs.iter().max()?,
            pair_ratio: if baseline == 0 {
                f64::NAN
            } else {
                total as f64 / baseline as f64
            },
            wall_ms_total: rows.iter().map(|r| r.wall_ms).sum(),
        })
    }
}

pub fn write_csv<T: Serialize>(rows: &[T], out: impl std::io::Write) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn compare_table(rows: &[CompareRow]) -> String {
    let mut s = format!(
        "{:<14} {:<14} {:>9} {:>8} {:>9} {:>10} {:>10} {:>7}\n",
        "a", "b", "psnr_db", "ssim", "max_diff", "pairs_a", "pairs_b", "ratio"
    );
    for r in rows {
        s += &format!(
            "{:<14} {:<14} {:>9.3} {:>8.5} {:>9.5} {:>10} {:>10} {:>7.3}\n",
            format!("{}/{}", r.kernel_a, r.culling_a),
            format!("{}/{}", r.kernel_b, r.culling_b),
            r.psnr_db,
            r.ssim,
            r.max_abs_diff,
            r.pairs_tight_a,
            r.pairs_tight_b,
            r.pair_ratio
        );
    }
    s
}
