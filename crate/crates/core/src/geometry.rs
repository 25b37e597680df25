//! Core 3D types, plane fitting and angle arithmetic.

use nalgebra::{Matrix3, SymmetricEigen, Unit, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;

/// Relative eigenvalue floor below which a covariance is treated as rank deficient.
const RANK_EPS: f64 = 1e-12;

/// Angle between two unit vectors in degrees, in `[0, 180]`.
pub fn angle_between(a: &UnitVec3, b: &UnitVec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Fold an angle in `[0, 180]` onto `[0, 90]`.
pub fn fold_angle(theta: f64) -> f64 {
    theta.min(180.0 - theta)
}

/// Deviation of a measured inter-plane angle from a model angle.
///
/// Model entries up to 90 degrees describe unoriented planes and are compared folded;
/// obtuse entries are only meaningful between oriented normals and are compared raw.
pub fn angle_deviation(measured: f64, model: f64) -> f64 {
    if model <= 90.0 {
        (fold_angle(measured) - fold_angle(model)).abs()
    } else {
        (measured - model).abs()
    }
}

/// Flip `normal` so that its largest-magnitude component is non-negative.
/// Ties go to the first of x, y, z.
pub fn canonicalize(normal: Vec3) -> Vec3 {
    let mut lead = 0;
    for axis in 1..3 {
        if normal[axis].abs() > normal[lead].abs() {
            lead = axis;
        }
    }
    if normal[lead] < 0.0 {
        -normal
    } else {
        normal
    }
}

/// An infinite plane `normal · p = offset` with the support it was fitted to.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneModel {
    pub normal: UnitVec3,
    pub offset: f64,
    pub centroid: Vec3,
    /// Indices into the point cloud the plane was fitted against.
    pub inliers: Vec<usize>,
    /// Largest orthogonal distance of any fitted point from the plane.
    pub residual_bound: f64,
}

impl PlaneModel {
    /// Plane through `centroid` with the given normal (canonicalized). No support.
    pub fn from_point_normal(centroid: Vec3, normal: Vec3) -> Result<Self> {
        let norm = normal.norm();
        if !(norm.is_finite() && norm > 0.0) || !centroid.iter().all(|c| c.is_finite()) {
            return Err(Error::DegenerateInput("plane normal must be finite and non-zero".into()));
        }
        let normal = Unit::new_unchecked(canonicalize(normal / norm));
        Ok(Self {
            offset: normal.dot(&centroid),
            normal,
            centroid,
            inliers: Vec::new(),
            residual_bound: 0.0,
        })
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.signed_distance(p).abs()
    }

    /// The plane normal flipped, if needed, to point toward `viewpoint`.
    pub fn facing_normal(&self, viewpoint: &Vec3) -> UnitVec3 {
        if self.normal.dot(&(viewpoint - self.centroid)) < 0.0 {
            -self.normal
        } else {
            self.normal
        }
    }
}

/// Angle between the (canonical) normals of two planes, in `[0, 180]`.
pub fn plane_angle(p: &PlaneModel, q: &PlaneModel) -> f64 {
    angle_between(&p.normal, &q.normal)
}

/// Angle between two planes whose normals are both turned toward `viewpoint`.
///
/// This is the angle an observer sees between two visible faces and is the quantity
/// compared against obtuse constraint entries.
pub fn facing_angle(p: &PlaneModel, q: &PlaneModel, viewpoint: &Vec3) -> f64 {
    angle_between(&p.facing_normal(viewpoint), &q.facing_normal(viewpoint))
}

/// Total-least-squares plane through `points`.
///
/// The returned model's inliers are `0..points.len()`.
pub fn fit_plane_lsq(points: &[Vec3]) -> Result<PlaneModel> {
    let mut plane = fit_iter(points.iter().copied(), points.len())?;
    plane.residual_bound = points
        .iter()
        .map(|p| plane.distance(p))
        .fold(0.0, f64::max);
    plane.inliers = (0..points.len()).collect();
    Ok(plane)
}

/// Total-least-squares plane through `points[i]` for every `i` in `indices`.
pub fn fit_plane_indexed(points: &[Vec3], indices: &[usize]) -> Result<PlaneModel> {
    let mut plane = fit_iter(indices.iter().map(|&i| points[i]), indices.len())?;
    plane.residual_bound = indices
        .iter()
        .map(|&i| plane.distance(&points[i]))
        .fold(0.0, f64::max);
    plane.inliers = indices.to_vec();
    Ok(plane)
}

fn fit_iter<I>(points: I, count: usize) -> Result<PlaneModel>
where
    I: Iterator<Item = Vec3> + Clone,
{
    if count < 3 {
        return Err(Error::DegenerateInput(format!(
            "plane fit needs at least 3 points, got {count}"
        )));
    }
    let n = count as f64;
    let centroid = points.clone().fold(Vec3::zeros(), |acc, p| acc + p) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    plane_from_moments(centroid, cov)
}

fn plane_from_moments(centroid: Vec3, cov: Matrix3<f64>) -> Result<PlaneModel> {
    if !cov.iter().all(|c| c.is_finite()) {
        return Err(Error::DegenerateInput("non-finite coordinates".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    let middle = eig.eigenvalues[order[1]];
    if largest <= 0.0 || middle <= RANK_EPS * largest {
        return Err(Error::DegenerateInput(
            "points are coincident or collinear".into(),
        ));
    }
    let normal: Vec3 = eig.eigenvectors.column(order[0]).into_owned();
    PlaneModel::from_point_normal(centroid, normal)
}

/// Running first and second moments of a point set, for refitting a plane as points
/// are added one at a time.
///
/// Moments are taken relative to a fixed reference point to limit cancellation.
/// Results agree with [`fit_plane_lsq`] to rounding but are not bit-identical.
#[derive(Debug, Clone)]
pub struct PlaneAccumulator {
    reference: Vec3,
    count: usize,
    sum: Vec3,
    sum_outer: Matrix3<f64>,
}

impl PlaneAccumulator {
    pub fn new(reference: Vec3) -> Self {
        Self {
            reference,
            count: 0,
            sum: Vec3::zeros(),
            sum_outer: Matrix3::zeros(),
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn add(&mut self, p: &Vec3) {
        let d = p - self.reference;
        self.count += 1;
        self.sum += d;
        self.sum_outer += d * d.transpose();
    }

    pub fn remove(&mut self, p: &Vec3) {
        let d = p - self.reference;
        self.count -= 1;
        self.sum -= d;
        self.sum_outer -= d * d.transpose();
    }

    /// Plane through the accumulated points. Support and residual bound are left empty.
    pub fn fit(&self) -> Result<PlaneModel> {
        if self.count < 3 {
            return Err(Error::DegenerateInput(format!(
                "plane fit needs at least 3 points, got {}",
                self.count
            )));
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let cov = self.sum_outer / n - mean * mean.transpose();
        plane_from_moments(self.reference + mean, cov)
    }
}

/// Ordered 3D points with optional per-point normals and ground-truth face labels.
///
/// A `None` entry in `normals` marks a point whose normal could not be estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    normals: Option<Vec<Option<UnitVec3>>>,
    labels: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self {
            points,
            normals: None,
            labels: None,
        })
    }

    pub fn with_normals(mut self, normals: Vec<Option<UnitVec3>>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::InvalidInput(format!(
                "{} normals for {} points",
                normals.len(),
                self.points.len()
            )));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.points.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} points",
                labels.len(),
                self.points.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Option<UnitVec3>]> {
        self.normals.as_deref()
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    /// Point indices grouped by label, in ascending label order.
    pub fn label_groups(&self) -> Vec<(u32, Vec<usize>)> {
        let Some(labels) = &self.labels else {
            return Vec::new();
        };
        let mut groups: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            groups.entry(l).or_default().push(i);
        }
        groups.into_iter().collect()
    }

    /// Largest distance between any two corners of the axis-aligned bounding box.
    pub fn diameter(&self) -> f64 {
        let Some(first) = self.points.first() else {
            return 0.0;
        };
        let (lo, hi) = self
            .points
            .iter()
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        (hi - lo).norm()
    }
}
