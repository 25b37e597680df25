//! End-to-end estimation: normals, constrained clustering, constrained fitting.
//!
//! When the fitting stage cannot satisfy the model on the clusters it was handed, the
//! clustering is redone with a fresh seed, up to `max_attempts` times.

use log::{debug, info};

use crate::constraints::ConstraintMatrix;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::mcransac::{restrict_constraints, run_mcransac, McRansacConfig, MultiPlaneFit};
use crate::normals::{estimate_normals, NormalEstimationConfig};
use crate::pcc::{run_pcc, PccConfig, PccOutcome};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct MmeConfig {
    pub normals: NormalEstimationConfig,
    pub pcc: PccConfig,
    pub mcransac: McRansacConfig,
    /// Clustering/fitting rounds before giving up.
    pub max_attempts: usize,
}

impl Default for MmeConfig {
    fn default() -> Self {
        Self {
            normals: NormalEstimationConfig::default(),
            pcc: PccConfig::default(),
            mcransac: McRansacConfig::default(),
            max_attempts: 3,
        }
    }
}

impl MmeConfig {
    /// Use one seed for every stochastic stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.pcc.rng_seed = seed;
        self.mcransac.rng_seed = seed;
        self
    }

    /// Set the sensor position for normal orientation and angle measurement.
    pub fn with_viewpoint(mut self, viewpoint: Vec3) -> Self {
        self.normals.viewpoint = viewpoint;
        self.mcransac.viewpoint = viewpoint;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmeOutcome {
    pub pcc: PccOutcome,
    /// Model planes that received a plane, ascending; `fit.planes[k]` realizes
    /// `model_planes[k]`.
    pub model_planes: Vec<usize>,
    /// Model constraints restricted to `model_planes`.
    pub restricted: ConstraintMatrix,
    pub fit: MultiPlaneFit,
    pub attempts: usize,
}

impl MmeOutcome {
    /// Fraction of the cloud accepted as inliers by the final fit.
    pub fn inlier_ratio(&self) -> f64 {
        let n = self.pcc.clustering.assignment.len();
        if n == 0 {
            0.0
        } else {
            self.fit.total_inliers as f64 / n as f64
        }
    }
}

/// Estimate every visible model plane in `cloud`. Normals are estimated first when
/// the cloud carries none.
pub fn estimate(cloud: &PointCloud, model: &ConstraintMatrix, cfg: &MmeConfig) -> Result<MmeOutcome> {
    if cfg.max_attempts == 0 {
        return Err(Error::InvalidInput("max_attempts must be positive".into()));
    }
    let with_normals;
    let cloud = if cloud.normals().is_some() {
        cloud
    } else {
        with_normals = estimate_normals(cloud, &cfg.normals)?;
        &with_normals
    };

    let mut last = Error::NoSolution;
    for attempt in 0..cfg.max_attempts {
        let seed_for = |base: u64| if attempt == 0 { base } else { derive_seed(base, &[attempt as u64]) };
        let pcc_cfg = PccConfig {
            rng_seed: seed_for(cfg.pcc.rng_seed),
            ..cfg.pcc.clone()
        };
        let pcc = match run_pcc(cloud, model, &pcc_cfg) {
            Ok(p) => p,
            Err(Error::NoSolution) => {
                debug!("attempt {}: clustering found no consistent assignment", attempt + 1);
                if !matches!(last, Error::ErrorStatus) {
                    last = Error::NoSolution;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let restricted = restrict_constraints(model, &pcc.solution)?;
        let groups = pcc.groups();
        let mc_cfg = McRansacConfig {
            rng_seed: seed_for(cfg.mcransac.rng_seed),
            ..cfg.mcransac.clone()
        };
        if groups.iter().any(|g| g.len() < mc_cfg.sample_size) {
            debug!("attempt {}: a mapped cluster is smaller than the sample size", attempt + 1);
            last = Error::ErrorStatus;
            continue;
        }
        match run_mcransac(&groups, cloud, &restricted, &mc_cfg) {
            Ok(fit) => {
                info!(
                    "fitted {} planes with {} inliers after {} attempt(s)",
                    fit.planes.len(),
                    fit.total_inliers,
                    attempt + 1
                );
                return Ok(MmeOutcome {
                    model_planes: pcc.solution.mapped_planes(),
                    pcc,
                    restricted,
                    fit,
                    attempts: attempt + 1,
                });
            }
            Err(Error::ErrorStatus) => {
                debug!("attempt {}: constraints not satisfiable on these clusters", attempt + 1);
                last = Error::ErrorStatus;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last)
}
