//! Per-point normal estimation from k-nearest-neighbour plane fits.

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{fit_plane_indexed, PointCloud, UnitVec3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct NormalEstimationConfig {
    /// Neighbours used besides the point itself. At least 3.
    pub k_neighbors: usize,
    /// Sensor origin; every normal is turned to face it.
    pub viewpoint: Vec3,
}

impl NormalEstimationConfig {
    /// Sharp-edged preset.
    pub const K_SMALL: usize = 7;
    /// Smoother preset.
    pub const K_LARGE: usize = 11;

    pub fn new(k_neighbors: usize, viewpoint: Vec3) -> Result<Self> {
        if k_neighbors < 3 {
            return Err(Error::InvalidInput(format!(
                "k_neighbors must be at least 3, got {k_neighbors}"
            )));
        }
        Ok(Self {
            k_neighbors,
            viewpoint,
        })
    }
}

impl Default for NormalEstimationConfig {
    fn default() -> Self {
        Self {
            k_neighbors: Self::K_SMALL,
            viewpoint: Vec3::zeros(),
        }
    }
}

/// Indices of the `k` nearest neighbours of `points[query]` (excluding itself),
/// nearest first; equal distances are ordered by index.
pub fn k_nearest(points: &[Vec3], query: usize, k: usize) -> Vec<usize> {
    let q = points[query];
    let mut cand: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != query)
        .map(|(i, p)| ((p - q).norm_squared(), i))
        .collect();
    let k = k.min(cand.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, i)| i).collect()
}

/// Neighbourhoods that stay collinear are widened up to this multiple of `k_neighbors`.
const MAX_WIDENING: usize = 4;

/// Estimate a normal for every point by fitting a plane to the point and its
/// `k_neighbors` nearest neighbours. A neighbourhood lying on a line (one scan row of
/// a grazing face, say) is doubled until it spans a plane; points still without a
/// plane get `None`.
pub fn estimate_normals(cloud: &PointCloud, cfg: &NormalEstimationConfig) -> Result<PointCloud> {
    if cfg.k_neighbors < 3 {
        return Err(Error::InvalidInput("k_neighbors must be at least 3".into()));
    }
    if cloud.len() < cfg.k_neighbors + 1 {
        return Err(Error::InvalidInput(format!(
            "normal estimation with k = {} needs at least {} points, got {}",
            cfg.k_neighbors,
            cfg.k_neighbors + 1,
            cloud.len()
        )));
    }
    let points = cloud.points();
    let normals: Vec<Option<UnitVec3>> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut k = cfg.k_neighbors;
            let plane = loop {
                let mut hood = k_nearest(points, i, k);
                hood.push(i);
                match fit_plane_indexed(points, &hood) {
                    Ok(p) => break p,
                    Err(_) if hood.iter().all(|&j| points[j] == points[i]) => return None,
                    Err(_) if k < MAX_WIDENING * cfg.k_neighbors && hood.len() < points.len() => k *= 2,
                    Err(_) => return None,
                }
            };
            let n = plane.normal;
            Some(if n.dot(&(cfg.viewpoint - points[i])) < 0.0 { -n } else { n })
        })
        .collect();

    let invalid = normals.iter().filter(|n| n.is_none()).count();
    if invalid == normals.len() {
        return Err(Error::DegenerateInput(
            "no point has a neighbourhood that spans a plane".into(),
        ));
    }
    if invalid > 0 {
        warn!("{invalid} of {} points have rank-deficient neighbourhoods", normals.len());
    }
    cloud.clone().with_normals(normals)
}
