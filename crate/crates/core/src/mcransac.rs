//! Multi-constraint RANSAC.
//!
//! One plane is fitted per pre-clustered group, all at once. A hypothesis (a random
//! minimal sample per group) is kept only if every pair of hypothesised planes meets
//! its model angle; points are then offered one at a time to their group's plane and
//! accepted only if the refitted set of planes still meets every constraint.

use log::debug;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constraints::ConstraintMatrix;
use crate::error::{Error, Result};
use crate::geometry::{angle_deviation, facing_angle, fit_plane_indexed, PlaneAccumulator, PlaneModel, PointCloud, Vec3};
use crate::pcc::PccSolution;
use crate::seed::derive_seed;

/// How a group's plane is refitted when a point is offered to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefitMode {
    /// Total-least-squares fit over the whole tentative inlier set.
    #[default]
    Full,
    /// Running moments updated per point. Much faster; agrees with `Full` only to
    /// rounding, so accept/reject decisions at the tolerance boundary can differ.
    Incremental,
}

impl std::str::FromStr for RefitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(RefitMode::Full),
            "incremental" => Ok(RefitMode::Incremental),
            _ => Err(Error::InvalidInput(format!("unknown refit mode `{s}` (expected full or incremental)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRansacConfig {
    /// Outer hypothesise/check/grow cycles.
    pub iterations: usize,
    /// Points drawn per group for each hypothesis.
    pub sample_size: usize,
    pub constraint_tolerance_deg: f64,
    /// Fraction of each group's points offered as inlier candidates.
    pub min_eval_fraction: f64,
    /// A grown fit only counts as satisfied when every group accepted at least this
    /// fraction of its offered points.
    pub min_support_fraction: f64,
    pub rng_seed: u64,
    /// Sensor position; plane normals are turned toward it before measuring angles.
    pub viewpoint: Vec3,
    pub refit: RefitMode,
}

impl Default for McRansacConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            sample_size: 3,
            constraint_tolerance_deg: 2.0,
            min_eval_fraction: 1.0,
            min_support_fraction: 0.25,
            rng_seed: 0,
            viewpoint: Vec3::zeros(),
            refit: RefitMode::Full,
        }
    }
}

impl McRansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidInput("iterations must be positive".into()));
        }
        if self.sample_size < 3 {
            return Err(Error::InvalidInput(format!(
                "sample_size must be at least 3, got {}",
                self.sample_size
            )));
        }
        if !(self.constraint_tolerance_deg > 0.0) {
            return Err(Error::InvalidInput("constraint_tolerance_deg must be positive".into()));
        }
        if !(self.min_eval_fraction > 0.0 && self.min_eval_fraction <= 1.0) {
            return Err(Error::InvalidInput("min_eval_fraction must be in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.min_support_fraction) {
            return Err(Error::InvalidInput("min_support_fraction must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Final planes of one grown hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPlaneFit {
    /// One plane per group; `inliers` holds the accepted points including the sample.
    pub planes: Vec<PlaneModel>,
    pub satisfied: bool,
    pub total_inliers: usize,
    /// Mean orthogonal distance of accepted points from their plane.
    pub mean_residual: f64,
    /// Outer iteration that produced this fit.
    pub iteration: usize,
}

/// Minimal-sample planes, one per group.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub planes: Vec<PlaneModel>,
}

/// Principal sub-matrix of `model` at the model planes the solution maps, in
/// model-plane order.
pub fn restrict_constraints(model: &ConstraintMatrix, solution: &PccSolution) -> Result<ConstraintMatrix> {
    let planes = solution.mapped_planes();
    if planes.is_empty() {
        return Err(Error::InvalidInput("no model plane is mapped".into()));
    }
    Ok(model.submatrix(&planes))
}

/// Whether every pair of planes meets its model angle within `tolerance_deg`.
pub fn check_constraints(planes: &[PlaneModel], model: &ConstraintMatrix, tolerance_deg: f64, viewpoint: &Vec3) -> bool {
    debug_assert_eq!(planes.len(), model.size());
    (0..planes.len()).all(|i| {
        ((i + 1)..planes.len()).all(|j| {
            angle_deviation(facing_angle(&planes[i], &planes[j], viewpoint), model.get(i, j)) <= tolerance_deg
        })
    })
}

/// Draw `sample_size` points from every group and fit a plane to each sample.
/// A rank-deficient sample is redrawn up to 10 times.
pub fn hypothesize(groups: &[Vec<usize>], cloud: &PointCloud, cfg: &McRansacConfig, rng: &mut ChaCha8Rng) -> Result<Hypothesis> {
    const REDRAWS: usize = 10;
    let points = cloud.points();
    let mut planes = Vec::with_capacity(groups.len());
    for (g, group) in groups.iter().enumerate() {
        if group.len() < cfg.sample_size {
            return Err(Error::InvalidInput(format!(
                "group {g} has {} points, fewer than the sample size {}",
                group.len(),
                cfg.sample_size
            )));
        }
        let mut fitted = None;
        for _ in 0..=REDRAWS {
            let mut sample: Vec<usize> = index::sample(rng, group.len(), cfg.sample_size)
                .into_iter()
                .map(|k| group[k])
                .collect();
            sample.sort_unstable();
            if let Ok(plane) = fit_plane_indexed(points, &sample) {
                fitted = Some(plane);
                break;
            }
        }
        planes.push(fitted.ok_or_else(|| {
            Error::DegenerateInput(format!("group {g}: every sample was rank deficient"))
        })?);
    }
    Ok(Hypothesis { planes })
}

enum GroupFit {
    Full(Vec<usize>),
    Incremental(PlaneAccumulator, Vec<usize>),
}

impl GroupFit {
    fn members(&self) -> &[usize] {
        match self {
            GroupFit::Full(m) | GroupFit::Incremental(_, m) => m,
        }
    }

    fn try_with(&mut self, points: &[Vec3], p: usize) -> Option<PlaneModel> {
        match self {
            GroupFit::Full(m) => {
                m.push(p);
                let fit = fit_plane_indexed(points, m).ok();
                m.pop();
                fit
            }
            GroupFit::Incremental(acc, _) => {
                let mut trial = acc.clone();
                trial.add(&points[p]);
                trial.fit().ok()
            }
        }
    }

    fn accept(&mut self, points: &[Vec3], p: usize) {
        match self {
            GroupFit::Full(m) => m.push(p),
            GroupFit::Incremental(acc, m) => {
                acc.add(&points[p]);
                m.push(p);
            }
        }
    }
}

/// Offer points to each group's hypothesised plane in a seeded random order, keeping
/// a point only if the refitted planes still meet every constraint.
pub fn grow_inliers(
    hypothesis: &Hypothesis,
    groups: &[Vec<usize>],
    cloud: &PointCloud,
    model: &ConstraintMatrix,
    cfg: &McRansacConfig,
    rng: &mut ChaCha8Rng,
) -> MultiPlaneFit {
    let points = cloud.points();
    let mut planes = hypothesis.planes.clone();
    let mut fits: Vec<GroupFit> = planes
        .iter()
        .map(|plane| match cfg.refit {
            RefitMode::Full => GroupFit::Full(plane.inliers.clone()),
            RefitMode::Incremental => {
                let mut acc = PlaneAccumulator::new(plane.centroid);
                for &i in &plane.inliers {
                    acc.add(&points[i]);
                }
                GroupFit::Incremental(acc, plane.inliers.clone())
            }
        })
        .collect();

    let mut supported = true;
    for (g, group) in groups.iter().enumerate() {
        let sample = &hypothesis.planes[g].inliers;
        let mut candidates: Vec<usize> = group.iter().copied().filter(|i| !sample.contains(i)).collect();
        candidates.shuffle(rng);
        let budget = ((cfg.min_eval_fraction * group.len() as f64).ceil() as usize).min(candidates.len());
        let mut accepted = 0usize;
        for &p in &candidates[..budget] {
            let Some(trial) = fits[g].try_with(points, p) else { continue };
            let previous = std::mem::replace(&mut planes[g], trial);
            if check_constraints(&planes, model, cfg.constraint_tolerance_deg, &cfg.viewpoint) {
                fits[g].accept(points, p);
                accepted += 1;
            } else {
                planes[g] = previous;
            }
        }
        if (accepted as f64) < cfg.min_support_fraction * budget as f64 {
            supported = false;
        }
    }

    let mut total = 0usize;
    let mut residual_sum = 0.0;
    for (plane, fit) in planes.iter_mut().zip(&fits) {
        let mut members = fit.members().to_vec();
        members.sort_unstable();
        plane.residual_bound = 0.0;
        for &i in &members {
            let d = plane.distance(&points[i]);
            residual_sum += d;
            plane.residual_bound = plane.residual_bound.max(d);
        }
        total += members.len();
        plane.inliers = members;
    }
    let satisfied = supported && check_constraints(&planes, model, cfg.constraint_tolerance_deg, &cfg.viewpoint);
    MultiPlaneFit {
        planes,
        satisfied,
        total_inliers: total,
        mean_residual: if total > 0 { residual_sum / total as f64 } else { 0.0 },
        iteration: 0,
    }
}

/// Repeated hypothesise/check/grow cycles; returns the satisfied fit with the most
/// inliers (ties: lower mean residual, then earlier iteration), or
/// [`Error::ErrorStatus`] when no cycle produced one.
pub fn run_mcransac(groups: &[Vec<usize>], cloud: &PointCloud, model: &ConstraintMatrix, cfg: &McRansacConfig) -> Result<MultiPlaneFit> {
    cfg.validate()?;
    if groups.is_empty() {
        return Err(Error::InvalidInput("at least one group is required".into()));
    }
    if groups.len() != model.size() {
        return Err(Error::InvalidInput(format!(
            "{} groups but the constraint matrix has size {}",
            groups.len(),
            model.size()
        )));
    }
    if let Some(g) = groups.iter().position(|g| g.len() < cfg.sample_size) {
        return Err(Error::InvalidInput(format!(
            "group {g} has {} points, fewer than the sample size {}",
            groups[g].len(),
            cfg.sample_size
        )));
    }

    let outcomes: Vec<Option<MultiPlaneFit>> = (0..cfg.iterations)
        .into_par_iter()
        .map(|it| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &[it as u64]));
            let hyp = hypothesize(groups, cloud, cfg, &mut rng).ok()?;
            if !check_constraints(&hyp.planes, model, cfg.constraint_tolerance_deg, &cfg.viewpoint) {
                return None;
            }
            let mut fit = grow_inliers(&hyp, groups, cloud, model, cfg, &mut rng);
            fit.iteration = it;
            fit.satisfied.then_some(fit)
        })
        .collect();

    let accepted = outcomes.iter().flatten().count();
    debug!("{accepted} of {} hypotheses satisfied the constraints", cfg.iterations);
    outcomes
        .into_iter()
        .flatten()
        .min_by(|a, b| {
            b.total_inliers
                .cmp(&a.total_inliers)
                .then(a.mean_residual.total_cmp(&b.mean_residual))
                .then(a.iteration.cmp(&b.iteration))
        })
        .ok_or(Error::ErrorStatus)
}
