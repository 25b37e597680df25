//! Synthetic range scans of polyhedral test objects.
//!
//! A pinhole camera looks at the object from one of eight turntable positions. Each
//! pixel ray is cast against the object's faces (back faces culled, nearest hit
//! wins), and the hit is pushed along its ray by Gaussian depth noise. Points are
//! returned in the camera frame, so the sensor sits at the origin.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Unit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::constraints::ConstraintMatrix;
use crate::error::{Error, Result};
use crate::geometry::{angle_between, PlaneModel, PointCloud, UnitVec3, Vec3};

pub const VIEW_COUNT: usize = 8;

/// Scene units per depth-noise unit. Noise levels are quoted in sensor depth units;
/// one such unit spans this many scene units at the working distance.
pub const DEFAULT_DEPTH_SCALE: f64 = 850.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectKind {
    Cube,
    Pyramid,
    DoublePyramid,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 3] = [ObjectKind::Cube, ObjectKind::Pyramid, ObjectKind::DoublePyramid];

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Cube => "cube",
            ObjectKind::Pyramid => "pyramid",
            ObjectKind::DoublePyramid => "double_pyramid",
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cube" => Ok(ObjectKind::Cube),
            "pyramid" => Ok(ObjectKind::Pyramid),
            "double_pyramid" | "double-pyramid" => Ok(ObjectKind::DoublePyramid),
            _ => Err(Error::InvalidInput(format!(
                "unknown object `{s}` (expected cube, pyramid or double_pyramid)"
            ))),
        }
    }
}

/// Planar convex polygon with outward normal; vertices run counter-clockwise seen
/// from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: Vec<Vec3>,
    pub normal: UnitVec3,
    /// Model plane this face realizes, if any.
    pub model_plane: Option<usize>,
}

impl Face {
    fn new(vertices: Vec<Vec3>, model_plane: Option<usize>) -> Self {
        let n = (vertices[1] - vertices[0]).cross(&(vertices[2] - vertices[0]));
        Self {
            normal: Unit::new_normalize(n),
            vertices,
            model_plane,
        }
    }

    fn quad(center: Vec3, u: Vec3, v: Vec3, model_plane: Option<usize>) -> Self {
        Self::new(vec![center - u - v, center + u - v, center + u + v, center - u + v], model_plane)
    }

    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    /// Ray parameter of the hit of `origin + t * dir` with the face, if any.
    fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let denom = self.normal.dot(dir);
        if denom >= 0.0 {
            return None;
        }
        let t = self.normal.dot(&(self.vertices[0] - origin)) / denom;
        if t <= 0.0 {
            return None;
        }
        let p = origin + dir * t;
        let k = self.vertices.len();
        let inside = (0..k).all(|e| {
            let a = self.vertices[e];
            let b = self.vertices[(e + 1) % k];
            (b - a).cross(&(p - a)).dot(&self.normal) >= -1e-12
        });
        inside.then_some(t)
    }
}

/// Turntable camera pose: the camera sits at `distance` from `target`, at the given
/// azimuth about +z and elevation above the xy-plane, looking at `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewSpec {
    /// 1-based view number.
    pub index: usize,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance: f64,
    pub target: Vec3,
}

impl ViewSpec {
    pub fn position(&self) -> Vec3 {
        let (az, el) = (self.azimuth_deg.to_radians(), self.elevation_deg.to_radians());
        self.target + self.distance * Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }

    /// Rotation taking object-frame directions into the camera frame (+z forward).
    pub fn rotation(&self) -> Matrix3<f64> {
        let forward = (self.target - self.position()).normalize();
        let right = forward.cross(&Vec3::z()).normalize();
        let down = forward.cross(&right);
        Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()])
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation() * (p - self.position())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub mu: f64,
    /// Standard deviation in depth units.
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Self {
        Self { mu: 0.0, sigma }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub kind: ObjectKind,
    pub model_matrix: ConstraintMatrix,
    /// Model faces first, in model-plane order, then any other faces.
    pub faces: Vec<Face>,
    pub max_visible_faces: usize,
    /// Default sampling density: pixels per radian.
    pub focal: f64,
    azimuth_range: (f64, f64),
    elevation_deg: f64,
    distance: f64,
    target: Vec3,
}

impl ObjectSpec {
    pub fn new(kind: ObjectKind) -> Self {
        match kind {
            ObjectKind::Cube => cube(),
            ObjectKind::Pyramid => pyramid(),
            ObjectKind::DoublePyramid => double_pyramid(),
        }
    }

    /// View `index` (1-based) of the eight evenly spaced turntable positions.
    pub fn view(&self, index: usize) -> Result<ViewSpec> {
        if !(1..=VIEW_COUNT).contains(&index) {
            return Err(Error::InvalidInput(format!("view must be in 1..={VIEW_COUNT}, got {index}")));
        }
        let (a0, a1) = self.azimuth_range;
        let step = (a1 - a0) / (VIEW_COUNT - 1) as f64;
        Ok(ViewSpec {
            index,
            azimuth_deg: a0 + step * (index - 1) as f64,
            elevation_deg: self.elevation_deg,
            distance: self.distance,
            target: self.target,
        })
    }

    /// Angles between the outward normals of the model faces.
    pub fn face_angle_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.model_matrix.size();
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { angle_between(&self.faces[i].normal, &self.faces[j].normal) }).collect())
            .collect()
    }
}

/// The three test objects.
pub fn builtin_objects() -> Vec<ObjectSpec> {
    ObjectKind::ALL.iter().map(|&k| ObjectSpec::new(k)).collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> ConstraintMatrix {
    ConstraintMatrix::model(rows).expect("built-in matrices are valid")
}

fn cube() -> ObjectSpec {
    let h = 0.5;
    let (x, y, z) = (Vec3::x() * h, Vec3::y() * h, Vec3::z() * h);
    let faces = vec![
        Face::quad(x, y, z, Some(0)),
        Face::quad(y, z, x, Some(1)),
        Face::quad(z, x, y, Some(2)),
        Face::quad(-x, z, y, None),
        Face::quad(-y, x, z, None),
        Face::quad(-z, y, x, None),
    ];
    ObjectSpec {
        kind: ObjectKind::Cube,
        model_matrix: matrix(vec![vec![0., 90., 90.], vec![90., 0., 90.], vec![90., 90., 0.]]),
        faces,
        max_visible_faces: 3,
        focal: 140.0,
        azimuth_range: (0.0, 70.0),
        elevation_deg: 25.0,
        distance: 3.0,
        target: Vec3::zeros(),
    }
}

/// Square pyramid whose adjacent side faces meet at 80 degrees between outward
/// normals: cos 80 = a^2 / (h^2 + a^2) for half-base `a` and height `h`.
fn pyramid() -> ObjectSpec {
    let a = 0.5;
    let h = a * (1.0 / 80f64.to_radians().cos() - 1.0).sqrt();
    let apex = Vec3::new(0., 0., h);
    let b = |sx: f64, sy: f64| Vec3::new(sx * a, sy * a, 0.0);
    let faces = vec![
        Face::new(vec![b(1., -1.), b(1., 1.), apex], Some(0)),
        Face::new(vec![b(1., 1.), b(-1., 1.), apex], Some(1)),
        Face::new(vec![b(-1., 1.), b(-1., -1.), apex], None),
        Face::new(vec![b(-1., -1.), b(1., -1.), apex], None),
        Face::quad(Vec3::zeros(), Vec3::y() * a, Vec3::x() * a, None),
    ];
    ObjectSpec {
        kind: ObjectKind::Pyramid,
        model_matrix: matrix(vec![vec![0., 80.], vec![80., 0.]]),
        faces,
        max_visible_faces: 2,
        focal: 140.0,
        azimuth_range: (10.0, 80.0),
        elevation_deg: 15.0,
        distance: 3.0,
        target: Vec3::new(0., 0., h / 3.0),
    }
}

/// Two square pyramids with 45-degree sides joined at their apexes at the origin:
/// the upper one stands inverted on its apex with its base on top.
fn double_pyramid() -> ObjectSpec {
    let h = 0.5;
    let o = Vec3::zeros();
    let v = |x: f64, y: f64, z: f64| Vec3::new(x * h, y * h, z * h);
    let faces = vec![
        Face::quad(v(0., 0., 1.), Vec3::x() * h, Vec3::y() * h, Some(0)),
        Face::new(vec![o, v(1., 1., 1.), v(1., -1., 1.)], Some(1)),
        Face::new(vec![o, v(-1., 1., 1.), v(1., 1., 1.)], Some(2)),
        Face::new(vec![o, v(1., -1., -1.), v(1., 1., -1.)], Some(3)),
        Face::new(vec![o, v(1., 1., -1.), v(-1., 1., -1.)], Some(4)),
        Face::new(vec![o, v(-1., -1., 1.), v(-1., 1., 1.)], None),
        Face::new(vec![o, v(1., -1., 1.), v(-1., -1., 1.)], None),
        Face::new(vec![o, v(-1., 1., -1.), v(-1., -1., -1.)], None),
        Face::new(vec![o, v(-1., -1., -1.), v(1., -1., -1.)], None),
        Face::quad(v(0., 0., -1.), Vec3::y() * h, Vec3::x() * h, None),
    ];
    ObjectSpec {
        kind: ObjectKind::DoublePyramid,
        model_matrix: matrix(vec![
            vec![0., 135., 135., 45., 45.],
            vec![135., 0., 60., 90., 120.],
            vec![135., 60., 0., 120., 90.],
            vec![45., 90., 120., 0., 60.],
            vec![45., 120., 90., 60., 0.],
        ]),
        faces,
        max_visible_faces: 5,
        focal: 140.0,
        azimuth_range: (28.0, 62.0),
        elevation_deg: 28.0,
        distance: 3.0,
        target: Vec3::zeros(),
    }
}

/// Scan parameters beyond the view and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    /// Pixels per radian; `None` uses the object's default.
    pub focal: Option<f64>,
    /// Scene units per depth-noise unit.
    pub depth_scale: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            focal: None,
            depth_scale: DEFAULT_DEPTH_SCALE,
        }
    }
}

/// A labelled scan with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub object: ObjectKind,
    pub view: ViewSpec,
    /// Camera-frame points labelled with the index of the face they were sampled from.
    pub cloud: PointCloud,
    /// Every face's plane in the camera frame, indexed like the object's faces.
    pub face_planes: Vec<PlaneModel>,
    /// Model plane of every face.
    pub face_model_planes: Vec<Option<usize>>,
}

impl Scene {
    /// Ground-truth point groups of the model planes with at least `min_points`
    /// points, as `(model plane, indices)` in model-plane order.
    pub fn model_groups(&self, min_points: usize) -> Vec<(usize, Vec<usize>)> {
        let mut out: Vec<(usize, Vec<usize>)> = self
            .cloud
            .label_groups()
            .into_iter()
            .filter_map(|(face, idx)| Some((self.face_model_planes[face as usize]?, idx)))
            .filter(|(_, idx)| idx.len() >= min_points)
            .collect();
        out.sort_by_key(|(plane, _)| *plane);
        out
    }

    /// Ground-truth plane of the face most of `indices` were sampled from.
    pub fn truth_for(&self, indices: &[usize]) -> Option<&PlaneModel> {
        let labels = self.cloud.labels()?;
        let mut counts = vec![0usize; self.face_planes.len()];
        for &i in indices {
            counts[labels[i] as usize] += 1;
        }
        let (face, &count) = counts.iter().enumerate().max_by_key(|&(f, c)| (*c, std::cmp::Reverse(f)))?;
        (count > 0).then(|| &self.face_planes[face])
    }
}

/// Cast a regular pixel grid at the object from `view` and return the noisy hits.
pub fn generate_view(obj: &ObjectSpec, view: &ViewSpec, scan: &ScanConfig, noise: &NoiseSpec, seed: u64) -> Result<Scene> {
    let focal = scan.focal.unwrap_or(obj.focal);
    if !(focal > 0.0) {
        return Err(Error::InvalidInput("sampling density must be positive".into()));
    }
    if !(noise.sigma >= 0.0) || !noise.mu.is_finite() {
        return Err(Error::InvalidInput("noise sigma must be non-negative".into()));
    }
    let rot = view.rotation();
    let faces: Vec<Face> = obj
        .faces
        .iter()
        .map(|f| Face {
            vertices: f.vertices.iter().map(|p| view.to_camera(p)).collect(),
            normal: Unit::new_normalize(rot * f.normal.into_inner()),
            model_plane: f.model_plane,
        })
        .collect();

    // image-plane bounding box of the object
    let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in faces.iter().flat_map(|f| &f.vertices) {
        if p.z <= 0.0 {
            return Err(Error::InvalidInput("object is not in front of the camera".into()));
        }
        u0 = u0.min(p.x / p.z);
        u1 = u1.max(p.x / p.z);
        v0 = v0.min(p.y / p.z);
        v1 = v1.max(p.y / p.z);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(noise.mu * scan.depth_scale, noise.sigma * scan.depth_scale)
        .map_err(|e| Error::InvalidInput(format!("noise: {e}")))?;
    let origin = Vec3::zeros();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for row in (v0 * focal).floor() as i64..=(v1 * focal).ceil() as i64 {
        for col in (u0 * focal).floor() as i64..=(u1 * focal).ceil() as i64 {
            let dir = Vec3::new(col as f64 / focal, row as f64 / focal, 1.0);
            let hit = faces
                .iter()
                .enumerate()
                .filter_map(|(k, f)| f.intersect(&origin, &dir).map(|t| (t, k)))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((t, k)) = hit {
                let p = dir * t;
                let depth = p.z + normal.sample(&mut rng);
                points.push(p * (depth / p.z));
                labels.push(k as u32);
            }
        }
    }

    let face_planes = faces
        .iter()
        .map(|f| PlaneModel::from_point_normal(f.centroid(), f.normal.into_inner()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Scene {
        object: obj.kind,
        view: *view,
        cloud: PointCloud::new(points)?.with_labels(labels)?,
        face_planes,
        face_model_planes: faces.iter().map(|f| f.model_plane).collect(),
    })
}
