use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::info;
use mme::baselines::{clustered_ransac, iterative_ransac, DEFAULT_DISTANCE_THRESHOLD};
use mme::bench::{cells_csv, constraint_error, run_experiment, status_of, summarize, summary_csv, BenchConfig, Method};
use mme::io::{read_cloud, write_cloud};
use mme::mcransac::run_mcransac;
use mme::pipeline::{estimate, MmeConfig};
use mme::synth::{generate_view, NoiseSpec, ObjectKind, ObjectSpec, ScanConfig, DEFAULT_DEPTH_SCALE};
use mme::{ConstraintFile, ConstraintMatrix, PlaneModel, PointCloud, Vec3};

use crate::settings::Settings;
use crate::{BenchArgs, FitArgs, FitParams, SynthArgs};

pub enum Outcome {
    Done,
    /// The model could not be reached; carries the reason.
    Unreachable(mme::Error),
}

fn parse_vec3(raw: &str) -> Result<Vec3> {
    let v: Vec<f64> = raw
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("`{raw}` is not x,y,z"))?;
    match v[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => bail!("`{raw}` is not x,y,z"),
    }
}

/// Apply flags and config keys on top of `base`.
fn mme_config(base: MmeConfig, p: &FitParams, s: &Settings, seed: u64) -> Result<MmeConfig> {
    let mut cfg = base;
    cfg.normals.k_neighbors = s.or(p.k_neighbors, "k_neighbors", cfg.normals.k_neighbors)?;
    let mc = &mut cfg.mcransac;
    mc.iterations = s.or(p.iterations, "iterations", mc.iterations)?;
    mc.sample_size = s.or(p.sample_size, "sample_size", mc.sample_size)?;
    mc.constraint_tolerance_deg = s.or(p.tolerance, "constraint_tolerance_deg", mc.constraint_tolerance_deg)?;
    mc.min_eval_fraction = s.or(p.min_eval_fraction, "min_eval_fraction", mc.min_eval_fraction)?;
    mc.min_support_fraction = s.or(None, "min_support_fraction", mc.min_support_fraction)?;
    mc.refit = s.or(None, "refit", mc.refit)?;
    let pcc = &mut cfg.pcc;
    pcc.cluster_surplus_fraction = s.or(None, "cluster_surplus_fraction", pcc.cluster_surplus_fraction)?;
    pcc.merge_angle_deg = s.or(None, "merge_angle_deg", pcc.merge_angle_deg)?;
    pcc.similarity_threshold_deg = s.or(None, "similarity_threshold_deg", pcc.similarity_threshold_deg)?;
    pcc.constraint_tolerance_deg = s.or(None, "pcc_tolerance_deg", pcc.constraint_tolerance_deg)?;
    pcc.kmeans_max_iter = s.or(None, "kmeans_max_iter", pcc.kmeans_max_iter)?;
    cfg.max_attempts = s.or(None, "max_attempts", cfg.max_attempts)?;
    let mut cfg = cfg.with_seed(seed);
    if let Some(raw) = s.get::<String>(None, "viewpoint")? {
        cfg = cfg.with_viewpoint(parse_vec3(&raw)?);
    }
    cfg.mcransac.validate()?;
    cfg.pcc.validate()?;
    Ok(cfg)
}

pub fn synth(a: &SynthArgs, s: &Settings) -> Result<Outcome> {
    let object: ObjectKind = s
        .get(a.object.clone(), "object")?
        .context("--object is required")?
        .parse()?;
    let view = s.or(a.view, "view", 1usize)?;
    let noise = NoiseSpec {
        mu: s.or(a.mu, "mu", 0.0)?,
        sigma: s.or(a.sigma, "sigma", 0.0)?,
    };
    let seed = s.seed(a.seed, 0)?;
    let scan = ScanConfig {
        focal: s.get(a.focal, "focal")?,
        depth_scale: s.or(a.depth_scale, "depth_scale", DEFAULT_DEPTH_SCALE)?,
    };
    let obj = ObjectSpec::new(object);
    let scene = generate_view(&obj, &obj.view(view)?, &scan, &noise, seed)?;
    write_cloud(&scene.cloud, &a.out).with_context(|| format!("cannot write {}", a.out.display()))?;

    let mut file = ConstraintFile::new(obj.model_matrix.clone());
    file.meta.insert("object".into(), object.to_string());
    file.meta.insert("view".into(), view.to_string());
    file.meta.insert("sigma".into(), format!("{:e}", noise.sigma));
    file.meta.insert("seed".into(), seed.to_string());
    let cpath = a.out.with_extension("constraints");
    file.write(&cpath).with_context(|| format!("cannot write {}", cpath.display()))?;
    info!("{} points from {} faces written to {}", scene.cloud.len(), scene.cloud.label_groups().len(), a.out.display());
    Ok(Outcome::Done)
}

/// Label groups feeding model planes: `(model plane, indices)` for every label below
/// the model size.
fn labelled_groups(cloud: &PointCloud, model: &ConstraintMatrix) -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
    if cloud.labels().is_none() {
        bail!("this method takes its groups from point labels, but the cloud has none");
    }
    let (planes, groups): (Vec<usize>, Vec<Vec<usize>>) = cloud
        .label_groups()
        .into_iter()
        .filter(|(l, _)| (*l as usize) < model.size())
        .map(|(l, g)| (l as usize, g))
        .unzip();
    if planes.is_empty() {
        bail!("no point carries a label of a model plane (0 to {})", model.size() - 1);
    }
    Ok((planes, groups))
}

struct FitResult {
    planes: Vec<PlaneModel>,
    model_planes: Vec<Option<usize>>,
    restricted: Option<ConstraintMatrix>,
    inliers: usize,
}

fn run_fit(method: Method, cloud: &PointCloud, model: &ConstraintMatrix, cfg: &MmeConfig, threshold: f64) -> mme::Result<FitResult> {
    let grouped = || labelled_groups(cloud, model).map_err(|e| mme::Error::InvalidInput(e.to_string()));
    Ok(match method {
        Method::Mme => {
            let out = estimate(cloud, model, cfg)?;
            FitResult {
                model_planes: out.model_planes.iter().map(|&p| Some(p)).collect(),
                inliers: out.fit.total_inliers,
                planes: out.fit.planes,
                restricted: Some(out.restricted),
            }
        }
        Method::McRansac => {
            let (planes, groups) = grouped()?;
            let restricted = model.submatrix(&planes);
            let fit = run_mcransac(&groups, cloud, &restricted, &cfg.mcransac)?;
            FitResult {
                model_planes: planes.into_iter().map(Some).collect(),
                inliers: fit.total_inliers,
                planes: fit.planes,
                restricted: Some(restricted),
            }
        }
        Method::Clustered => {
            let (planes, groups) = grouped()?;
            let fitted = clustered_ransac(&groups, cloud, &cfg.mcransac, threshold)?;
            FitResult {
                model_planes: planes.iter().map(|&p| Some(p)).collect(),
                inliers: fitted.iter().map(|p| p.inliers.len()).sum(),
                planes: fitted,
                restricted: Some(model.submatrix(&planes)),
            }
        }
        Method::Iterative => {
            let fitted = iterative_ransac(cloud, &cfg.mcransac, threshold);
            FitResult {
                model_planes: vec![None; fitted.len()],
                inliers: fitted.iter().map(|p| p.inliers.len()).sum(),
                planes: fitted,
                restricted: None,
            }
        }
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const REPORT_HEADER: &str = "method,gamma,rho,plane_count,inlier_ratio,runtime_ms,status";
pub const PLANES_HEADER: &str = "plane,model_plane,nx,ny,nz,offset,cx,cy,cz,inlier_count,inliers";

fn planes_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{stem}.planes.csv"))
}

fn planes_csv(fit: &FitResult) -> String {
    let mut out = String::from(PLANES_HEADER);
    out.push('\n');
    for (k, p) in fit.planes.iter().enumerate() {
        let n = p.normal.into_inner();
        let inliers: Vec<String> = p.inliers.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(
            out,
            "{k},{},{},{},{},{},{},{},{},{},{}",
            fit.model_planes[k].map(|m| m.to_string()).unwrap_or_default(),
            n.x,
            n.y,
            n.z,
            p.offset,
            p.centroid.x,
            p.centroid.y,
            p.centroid.z,
            p.inliers.len(),
            inliers.join(" ")
        );
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn fit(a: &FitArgs, s: &Settings) -> Result<Outcome> {
    let method: Method = s.or(a.method.clone(), "method", "mme".to_string())?.parse()?;
    let seed = s.seed(a.seed, 0)?;
    let cfg = mme_config(MmeConfig::default(), &a.params, s, seed)?;
    let threshold = s.or(a.params.distance_threshold, "distance_threshold", DEFAULT_DISTANCE_THRESHOLD)?;
    let cloud = read_cloud(&a.cloud)?;
    let model = ConstraintFile::read(&a.constraints)?.matrix;

    let start = Instant::now();
    let result = run_fit(method, &cloud, &model, &cfg, threshold);
    let runtime = a.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    let mut report = String::from(REPORT_HEADER);
    report.push('\n');
    match result {
        Ok(fit) => {
            let (gamma, rho) = match &fit.restricted {
                Some(m) => {
                    let (g, r) = constraint_error(&fit.planes, m, &cfg.mcransac.viewpoint);
                    (Some(g), Some(r))
                }
                None => (None, None),
            };
            let _ = writeln!(
                report,
                "{method},{},{},{},{},{},ok",
                opt(gamma),
                opt(rho),
                fit.planes.len(),
                fit.inliers as f64 / cloud.len() as f64,
                opt(runtime)
            );
            write_file(&a.out, &report)?;
            write_file(&planes_path(&a.out), &planes_csv(&fit))?;
            info!("{} planes, gamma {}", fit.planes.len(), opt(gamma));
            Ok(Outcome::Done)
        }
        Err(e) if e.is_model_unreachable() => {
            let _ = writeln!(report, "{method},,,,,{},{}", opt(runtime), status_of(&e));
            write_file(&a.out, &report)?;
            Ok(Outcome::Unreachable(e))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn bench(a: &BenchArgs, s: &Settings) -> Result<Outcome> {
    let mut cfg = BenchConfig::default();
    if let Some(m) = s.list::<Method>(a.methods.as_deref(), "methods")? {
        cfg.methods = m;
    }
    match s.get::<String>(a.objects.clone(), "objects")? {
        Some(o) if o.trim() == "all" => cfg.objects = ObjectKind::ALL.to_vec(),
        Some(o) => cfg.objects = s.list(Some(&o), "objects")?.unwrap_or_default(),
        None => {}
    }
    if let Some(v) = s.list::<f64>(a.sigmas.as_deref(), "sigmas")? {
        cfg.sigmas = v;
    }
    if let Some(v) = s.list::<usize>(a.views.as_deref(), "views")? {
        cfg.views = v;
    }
    cfg.repeats = s.or(a.repeats, "repeats", cfg.repeats)?;
    cfg.seed = s.seed(a.seed, cfg.seed)?;
    cfg.scan.depth_scale = s.or(a.depth_scale, "depth_scale", cfg.scan.depth_scale)?;
    cfg.distance_threshold = s.or(a.params.distance_threshold, "distance_threshold", cfg.distance_threshold)?;
    cfg.baseline_iterations = s.or(None, "baseline_iterations", cfg.baseline_iterations)?;
    cfg.baseline_sample_size = s.or(None, "baseline_sample_size", cfg.baseline_sample_size)?;
    cfg.min_group_points = s.or(None, "min_group_points", cfg.min_group_points)?;
    cfg.timing = a.timing || s.or(None, "timing", false)?;
    let seed = cfg.seed;
    cfg.mme = mme_config(cfg.mme, &a.params, s, seed)?;
    if cfg.methods.is_empty() || cfg.objects.is_empty() || cfg.sigmas.is_empty() || cfg.views.is_empty() {
        bail!("methods, objects, sigmas and views must not be empty");
    }
    if let Some(&v) = cfg.views.iter().find(|&&v| !(1..=8).contains(&v)) {
        bail!("view must be in 1..=8, got {v}");
    }

    std::fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let cells = run_experiment(&cfg);
    let summary = summarize(&cells);
    write_file(&a.out.join("cells.csv"), &cells_csv(&cells))?;
    write_file(&a.out.join("summary.csv"), &summary_csv(&summary))?;
    info!("{} cells written to {}", cells.len(), a.out.display());
    Ok(Outcome::Done)
}
