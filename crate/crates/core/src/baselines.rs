//! Unconstrained RANSAC baselines: one RANSAC per known group, and sequential
//! plane extraction on the raw cloud.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{fit_plane_indexed, PlaneModel, PointCloud, Vec3};
use crate::mcransac::McRansacConfig;
use crate::seed::derive_seed;

/// Default inlier distance for both baselines, in scene units.
pub const DEFAULT_DISTANCE_THRESHOLD: f64 = 1e-3;

/// Smallest plane `iterative_ransac` accepts, as a fraction of the whole cloud.
pub const MIN_SUPPORT_FRACTION: f64 = 0.05;

/// Best sample plane among `iterations` draws from `candidates`, with its inliers
/// (ascending). `None` if every draw was degenerate.
fn ransac_single(
    points: &[Vec3],
    candidates: &[usize],
    iterations: usize,
    sample_size: usize,
    threshold: f64,
    seed: u64,
) -> Option<(PlaneModel, Vec<usize>)> {
    if candidates.len() < sample_size {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(PlaneModel, Vec<usize>)> = None;
    for _ in 0..iterations {
        let sample: Vec<usize> = index::sample(&mut rng, candidates.len(), sample_size)
            .into_iter()
            .map(|k| candidates[k])
            .collect();
        let Ok(plane) = fit_plane_indexed(points, &sample) else { continue };
        let inliers: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&i| plane.distance(&points[i]) <= threshold)
            .collect();
        if best.as_ref().is_none_or(|(_, b)| inliers.len() > b.len()) {
            best = Some((plane, inliers));
        }
    }
    best
}

/// Independent RANSAC in every group with a final least-squares refit on the
/// winning inliers. No constraint between groups is used.
pub fn clustered_ransac(groups: &[Vec<usize>], cloud: &PointCloud, cfg: &McRansacConfig, threshold: f64) -> Result<Vec<PlaneModel>> {
    if groups.is_empty() {
        return Err(Error::InvalidInput("at least one group is required".into()));
    }
    let points = cloud.points();
    groups
        .par_iter()
        .enumerate()
        .map(|(g, group)| {
            let seed = derive_seed(cfg.rng_seed, &[g as u64]);
            let (sample_plane, inliers) = ransac_single(points, group, cfg.iterations, cfg.sample_size, threshold, seed)
                .ok_or_else(|| Error::DegenerateInput(format!("group {g}: no non-degenerate sample")))?;
            Ok(fit_plane_indexed(points, &inliers).unwrap_or_else(|_| PlaneModel {
                inliers,
                ..sample_plane
            }))
        })
        .collect()
}

/// Extract planes one after another from the points not yet explained, until fewer
/// than `sample_size` points remain or the best plane has less than 5% of the cloud.
/// Planes are the raw sample fits with their inliers attached.
pub fn iterative_ransac(cloud: &PointCloud, cfg: &McRansacConfig, threshold: f64) -> Vec<PlaneModel> {
    let points = cloud.points();
    let min_support = (MIN_SUPPORT_FRACTION * points.len() as f64).ceil().max(1.0) as usize;
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut planes = Vec::new();
    let mut round = 0u64;
    while remaining.len() >= cfg.sample_size {
        let seed = derive_seed(cfg.rng_seed, &[round]);
        round += 1;
        let Some((mut plane, inliers)) = ransac_single(points, &remaining, cfg.iterations, cfg.sample_size, threshold, seed) else {
            break;
        };
        if inliers.len() < min_support {
            break;
        }
        remaining.retain(|i| inliers.binary_search(i).is_err());
        plane.residual_bound = inliers.iter().map(|&i| plane.distance(&points[i])).fold(0.0, f64::max);
        plane.inliers = inliers;
        planes.push(plane);
    }
    planes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{angle_between, plane_angle};
    use nalgebra::Unit;

    fn cube_corner(n: usize) -> (PointCloud, Vec<Vec<usize>>) {
        let t = |k: usize| k as f64 / (n - 1) as f64;
        let mut pts = Vec::new();
        for k in 0..n * n {
            pts.push(Vec3::new(t(k % n), t(k / n), 0.0));
        }
        for k in 0..n * n {
            pts.push(Vec3::new(0.0, t(k % n), 0.02 + t(k / n)));
        }
        for k in 0..n * n {
            pts.push(Vec3::new(0.02 + t(k % n), 0.0, 0.02 + t(k / n)));
        }
        let m = n * n;
        (PointCloud::new(pts).unwrap(), vec![(0..m).collect(), (m..2 * m).collect(), (2 * m..3 * m).collect()])
    }

    #[test]
    fn clustered_recovers_clean_faces() {
        let (cloud, groups) = cube_corner(12);
        let planes = clustered_ransac(&groups, &cloud, &McRansacConfig::default(), DEFAULT_DISTANCE_THRESHOLD).unwrap();
        let axes = [Vec3::z(), Vec3::x(), Vec3::y()];
        for (p, a) in planes.iter().zip(axes) {
            assert!(angle_between(&p.normal, &Unit::new_unchecked(a)) < 1e-3);
            assert_eq!(p.inliers.len(), 144);
        }
    }

    #[test]
    fn iterative_finds_three_faces() {
        let (cloud, _) = cube_corner(12);
        let planes = iterative_ransac(&cloud, &McRansacConfig::default(), DEFAULT_DISTANCE_THRESHOLD);
        assert_eq!(planes.len(), 3);
        let total: usize = planes.iter().map(|p| p.inliers.len()).sum();
        assert_eq!(total, 432);
    }

    #[test]
    fn single_plane_gives_one_plane() {
        let (cloud, groups) = cube_corner(10);
        let flat = PointCloud::new(groups[0].iter().map(|&i| cloud.points()[i]).collect()).unwrap();
        assert_eq!(iterative_ransac(&flat, &McRansacConfig::default(), 1e-3).len(), 1);
    }

    #[test]
    fn one_group_matches_first_iterative_plane() {
        let pts: Vec<Vec3> = (0..300)
            .map(|k| {
                let x = (k % 20) as f64 * 0.05;
                let y = (k / 20) as f64 * 0.05;
                Vec3::new(x, y, 0.001 * ((k * 7919) % 13) as f64 / 13.0)
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let cfg = McRansacConfig {
            rng_seed: 11,
            ..Default::default()
        };
        let all: Vec<usize> = (0..cloud.len()).collect();
        let clustered = clustered_ransac(&[all], &cloud, &cfg, 5e-4).unwrap();
        let iterative = iterative_ransac(&cloud, &cfg, 5e-4);
        assert_eq!(clustered[0].inliers, iterative[0].inliers);
        let refit = fit_plane_indexed(cloud.points(), &iterative[0].inliers).unwrap();
        assert_eq!(clustered[0], refit);
        assert!(plane_angle(&clustered[0], &iterative[0]) < 1.0);
    }
}
