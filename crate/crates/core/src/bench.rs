//! Metrics and the seeded benchmark sweep.
//!
//! Every cell (method, object, noise level, view, repeat) draws its scene from a seed
//! that ignores the method, so all methods see identical inputs, and its method seed
//! from a hash of the whole cell key, so results do not depend on execution order.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{clustered_ransac, iterative_ransac, DEFAULT_DISTANCE_THRESHOLD};
use crate::constraints::ConstraintMatrix;
use crate::error::{Error, Result};
use crate::geometry::{angle_between, angle_deviation, facing_angle, fold_angle, PlaneModel, Vec3};
use crate::mcransac::{run_mcransac, McRansacConfig, RefitMode};
use crate::pipeline::{estimate, MmeConfig};
use crate::seed::{derive_seed, hash_str};
use crate::synth::{generate_view, NoiseSpec, ObjectKind, ObjectSpec, ScanConfig, Scene, VIEW_COUNT};

/// Mean and population standard deviation of the deviations between measured and
/// model angles over all plane pairs. Fewer than two planes give `(0, 0)`.
pub fn constraint_error(planes: &[PlaneModel], model: &ConstraintMatrix, viewpoint: &Vec3) -> (f64, f64) {
    let mut devs = Vec::new();
    for i in 0..planes.len() {
        for j in (i + 1)..planes.len() {
            devs.push(angle_deviation(facing_angle(&planes[i], &planes[j], viewpoint), model.get(i, j)));
        }
    }
    mean_std(&devs).unwrap_or((0.0, 0.0))
}

/// Same as [`constraint_error`] but from already measured pair angles.
pub fn angle_list_error(measured: &[f64], model: &[f64]) -> (f64, f64) {
    let devs: Vec<f64> = measured.iter().zip(model).map(|(&m, &a)| angle_deviation(m, a)).collect();
    mean_std(&devs).unwrap_or((0.0, 0.0))
}

fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Mean angle between each plane and the ground-truth face most of its inliers came
/// from, folded into `[0, 90]`.
pub fn orientation_error(planes: &[PlaneModel], scene: &Scene) -> Option<f64> {
    let errs: Vec<f64> = planes
        .iter()
        .filter_map(|p| scene.truth_for(&p.inliers).map(|t| fold_angle(angle_between(&p.normal, &t.normal))))
        .collect();
    mean_std(&errs).map(|(m, _)| m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Full pipeline: normals, clustering, constrained fitting.
    Mme,
    /// Constrained fitting on the ground-truth face groups.
    McRansac,
    /// Independent RANSAC on the ground-truth face groups.
    Clustered,
    /// Sequential RANSAC on the raw cloud.
    Iterative,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mme, Method::McRansac, Method::Clustered, Method::Iterative];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mme => "mme",
            Method::McRansac => "mcransac",
            Method::Clustered => "clustered",
            Method::Iterative => "iterative",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}` (expected mme, mcransac, clustered or iterative)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// `None` when planes cannot be matched to model planes (iterative RANSAC).
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
    pub plane_count: usize,
    pub inlier_ratio: f64,
    pub orientation_error: Option<f64>,
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub objects: Vec<ObjectKind>,
    pub sigmas: Vec<f64>,
    /// 1-based view numbers.
    pub views: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub scan: ScanConfig,
    /// Settings for the constrained methods.
    pub mme: MmeConfig,
    pub distance_threshold: f64,
    /// Points per RANSAC sample in the baselines.
    pub baseline_sample_size: usize,
    pub baseline_iterations: usize,
    /// Ground-truth faces with fewer points are left out of the grouped methods.
    pub min_group_points: usize,
    /// Record wall-clock time per cell. Off by default so output is reproducible.
    pub timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let mut mme = MmeConfig::default();
        mme.mcransac.refit = RefitMode::Incremental;
        mme.mcransac.iterations = 400;
        mme.mcransac.sample_size = 10;
        mme.mcransac.min_eval_fraction = 0.01;
        Self {
            methods: vec![Method::Mme, Method::McRansac, Method::Clustered],
            objects: ObjectKind::ALL.to_vec(),
            sigmas: vec![1e-5, 4e-5, 6e-5],
            views: (1..=VIEW_COUNT).collect(),
            repeats: 5,
            seed: 42,
            scan: ScanConfig::default(),
            mme,
            distance_threshold: DEFAULT_DISTANCE_THRESHOLD,
            baseline_sample_size: 3,
            baseline_iterations: 20,
            min_group_points: 10,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub method: Method,
    pub object: ObjectKind,
    pub sigma: f64,
    pub view: usize,
    pub repeat: usize,
    /// `None` when the method failed; see `status`.
    pub report: Option<FitReport>,
    pub status: String,
}

/// Short status word recorded for a failed run.
pub fn status_of(e: &Error) -> &'static str {
    match e {
        Error::ErrorStatus => "error_status",
        Error::NoSolution => "no_solution",
        Error::DegenerateInput(_) => "degenerate",
        _ => "invalid",
    }
}

/// Seed of the scene shared by every method in a cell.
pub fn scene_seed(base: u64, object: ObjectKind, sigma: f64, view: usize, repeat: usize) -> u64 {
    derive_seed(base, &[hash_str(object.name()), sigma.to_bits(), view as u64, repeat as u64])
}

pub fn method_seed(base: u64, method: Method, object: ObjectKind, sigma: f64, view: usize, repeat: usize) -> u64 {
    derive_seed(
        base,
        &[hash_str(method.name()), hash_str(object.name()), sigma.to_bits(), view as u64, repeat as u64],
    )
}

/// Scene of one cell.
pub fn cell_scene(cfg: &BenchConfig, object: ObjectKind, sigma: f64, view: usize, repeat: usize) -> Result<Scene> {
    let obj = ObjectSpec::new(object);
    generate_view(
        &obj,
        &obj.view(view)?,
        &cfg.scan,
        &NoiseSpec::gaussian(sigma),
        scene_seed(cfg.seed, object, sigma, view, repeat),
    )
}

/// Fitted planes, their constraints (if known) and the inlier count of one method
/// on one scene.
pub fn fit_scene(method: Method, scene: &Scene, cfg: &BenchConfig, seed: u64) -> Result<(Vec<PlaneModel>, Option<ConstraintMatrix>, usize)> {
    let model = ObjectSpec::new(scene.object).model_matrix;
    let grouped = || {
        let groups = scene.model_groups(cfg.min_group_points);
        if groups.is_empty() {
            return Err(Error::DegenerateInput("no model face is visible".into()));
        }
        let planes: Vec<usize> = groups.iter().map(|(p, _)| *p).collect();
        let idx: Vec<Vec<usize>> = groups.into_iter().map(|(_, g)| g).collect();
        Ok((model.submatrix(&planes), idx))
    };
    let mut mc = cfg.mme.mcransac.clone();
    mc.rng_seed = seed;
    let baseline = McRansacConfig {
        sample_size: cfg.baseline_sample_size,
        iterations: cfg.baseline_iterations,
        ..mc.clone()
    };
    match method {
        Method::Mme => {
            let mme_cfg = cfg.mme.clone().with_seed(seed);
            let out = estimate(&scene.cloud, &model, &mme_cfg)?;
            Ok((out.fit.planes, Some(out.restricted), out.fit.total_inliers))
        }
        Method::McRansac => {
            let (restricted, groups) = grouped()?;
            let fit = run_mcransac(&groups, &scene.cloud, &restricted, &mc)?;
            Ok((fit.planes, Some(restricted), fit.total_inliers))
        }
        Method::Clustered => {
            let (restricted, groups) = grouped()?;
            let planes = clustered_ransac(&groups, &scene.cloud, &baseline, cfg.distance_threshold)?;
            let inliers = planes.iter().map(|p| p.inliers.len()).sum();
            Ok((planes, Some(restricted), inliers))
        }
        Method::Iterative => {
            let planes = iterative_ransac(&scene.cloud, &baseline, cfg.distance_threshold);
            let inliers = planes.iter().map(|p| p.inliers.len()).sum();
            Ok((planes, None, inliers))
        }
    }
}

pub fn run_cell(method: Method, object: ObjectKind, sigma: f64, view: usize, repeat: usize, cfg: &BenchConfig) -> CellResult {
    let start = Instant::now();
    let result = cell_scene(cfg, object, sigma, view, repeat).and_then(|scene| {
        let seed = method_seed(cfg.seed, method, object, sigma, view, repeat);
        let (planes, restricted, inliers) = fit_scene(method, &scene, cfg, seed)?;
        let viewpoint = cfg.mme.mcransac.viewpoint;
        let (gamma, rho) = match &restricted {
            Some(m) => {
                let (g, r) = constraint_error(&planes, m, &viewpoint);
                (Some(g), Some(r))
            }
            None => (None, None),
        };
        Ok(FitReport {
            gamma,
            rho,
            plane_count: planes.len(),
            inlier_ratio: inliers as f64 / scene.cloud.len().max(1) as f64,
            orientation_error: orientation_error(&planes, &scene),
            runtime_ms: None,
        })
    });
    let (report, status) = match result {
        Ok(mut r) => {
            if cfg.timing {
                r.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            (Some(r), "ok".to_string())
        }
        Err(e) => (None, status_of(&e).to_string()),
    };
    CellResult {
        method,
        object,
        sigma,
        view,
        repeat,
        report,
        status,
    }
}

/// Full factorial sweep. Cells are returned in configuration order whatever order
/// they were computed in.
pub fn run_experiment(cfg: &BenchConfig) -> Vec<CellResult> {
    let mut keys = Vec::new();
    for &method in &cfg.methods {
        for &object in &cfg.objects {
            for &sigma in &cfg.sigmas {
                for &view in &cfg.views {
                    for repeat in 0..cfg.repeats {
                        keys.push((method, object, sigma, view, repeat));
                    }
                }
            }
        }
    }
    keys.par_iter()
        .map(|&(m, o, s, v, r)| run_cell(m, o, s, v, r, cfg))
        .collect()
}

/// Aggregate over views and repeats of one (method, object, sigma).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub object: ObjectKind,
    pub sigma: f64,
    pub runs: usize,
    pub failures: usize,
    pub gamma_mean: Option<f64>,
    /// Spread of the per-run gamma across runs.
    pub gamma_std: Option<f64>,
    pub rho_mean: Option<f64>,
    pub orientation_mean: Option<f64>,
    pub orientation_std: Option<f64>,
    pub inlier_ratio_mean: Option<f64>,
    pub plane_count_mean: Option<f64>,
}

impl SummaryRow {
    pub fn failure_rate(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.failures as f64 / self.runs as f64
        }
    }
}

/// Per-(method, object, sigma) aggregates, in first-appearance order of the cells.
/// Failed cells count toward `failures` and are left out of every mean.
pub fn summarize(cells: &[CellResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, ObjectKind, u64)> = Vec::new();
    for c in cells {
        let k = (c.method, c.object, c.sigma.to_bits());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, object, sigma_bits)| {
            let mut members: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.method == method && c.object == object && c.sigma.to_bits() == sigma_bits)
                .collect();
            members.sort_by_key(|c| (c.view, c.repeat));
            let reports: Vec<&FitReport> = members.iter().filter_map(|c| c.report.as_ref()).collect();
            let collect = |f: &dyn Fn(&FitReport) -> Option<f64>| -> Vec<f64> { reports.iter().filter_map(|r| f(r)).collect() };
            let gamma = mean_std(&collect(&|r| r.gamma));
            let orient = mean_std(&collect(&|r| r.orientation_error));
            SummaryRow {
                method,
                object,
                sigma: f64::from_bits(sigma_bits),
                runs: members.len(),
                failures: members.len() - reports.len(),
                gamma_mean: gamma.map(|g| g.0),
                gamma_std: gamma.map(|g| g.1),
                rho_mean: mean_std(&collect(&|r| r.rho)).map(|x| x.0),
                orientation_mean: orient.map(|o| o.0),
                orientation_std: orient.map(|o| o.1),
                inlier_ratio_mean: mean_std(&collect(&|r| Some(r.inlier_ratio))).map(|x| x.0),
                plane_count_mean: mean_std(&collect(&|r| Some(r.plane_count as f64))).map(|x| x.0),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const CELLS_HEADER: &str = "method,object,sigma,view,repeat,gamma,rho,plane_count,inlier_ratio,orientation_error,runtime_ms,status";

pub fn cells_csv(cells: &[CellResult]) -> String {
    let mut out = String::from(CELLS_HEADER);
    out.push('\n');
    for c in cells {
        let r = c.report.as_ref();
        let _ = writeln!(
            out,
            "{},{},{:e},{},{},{},{},{},{},{},{},{}",
            c.method,
            c.object,
            c.sigma,
            c.view,
            c.repeat,
            opt(r.and_then(|r| r.gamma)),
            opt(r.and_then(|r| r.rho)),
            r.map(|r| r.plane_count.to_string()).unwrap_or_default(),
            opt(r.map(|r| r.inlier_ratio)),
            opt(r.and_then(|r| r.orientation_error)),
            opt(r.and_then(|r| r.runtime_ms)),
            c.status
        );
    }
    out
}

pub const SUMMARY_HEADER: &str = "method,object,sigma,runs,failures,gamma_mean,gamma_std,rho_mean,orientation_mean,orientation_std,inlier_ratio_mean,plane_count_mean";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:e},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.object,
            r.sigma,
            r.runs,
            r.failures,
            opt(r.gamma_mean),
            opt(r.gamma_std),
            opt(r.rho_mean),
            opt(r.orientation_mean),
            opt(r.orientation_std),
            opt(r.inlier_ratio_mean),
            opt(r.plane_count_mean)
        );
    }
    out
}
