//! Point cloud clustering under model angle constraints.
//!
//! The stage runs k-means over joint position and normal features, merges clusters
//! whose mean normals nearly agree, measures the angles between the surviving clusters,
//! and searches for the assignment of clusters to model planes that respects the model
//! angles and covers the most points.

use log::{debug, warn};
use nalgebra::Unit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::ConstraintMatrix;
use crate::error::{Error, Result};
use crate::geometry::{angle_between, PointCloud, UnitVec3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct PccConfig {
    /// Extra clusters requested from k-means, as a fraction of the model plane count.
    pub cluster_surplus_fraction: f64,
    /// Clusters whose mean normals are closer than this are merged.
    pub merge_angle_deg: f64,
    /// Angle difference under which a cluster angle matches a model angle when ranking
    /// correspondences.
    pub similarity_threshold_deg: f64,
    /// Largest accepted deviation between cluster and model angles in the search.
    pub constraint_tolerance_deg: f64,
    pub kmeans_max_iter: usize,
    pub rng_seed: u64,
}

impl Default for PccConfig {
    fn default() -> Self {
        Self {
            cluster_surplus_fraction: 0.4,
            merge_angle_deg: 10.0,
            similarity_threshold_deg: 20.0,
            constraint_tolerance_deg: 20.0,
            kmeans_max_iter: 100,
            rng_seed: 0,
        }
    }
}

impl PccConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.cluster_surplus_fraction) {
            return Err(Error::InvalidInput("cluster_surplus_fraction must be in [0, 1)".into()));
        }
        for (name, v) in [
            ("merge_angle_deg", self.merge_angle_deg),
            ("similarity_threshold_deg", self.similarity_threshold_deg),
            ("constraint_tolerance_deg", self.constraint_tolerance_deg),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if self.kmeans_max_iter == 0 {
            return Err(Error::InvalidInput("kmeans_max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Number of k-means clusters for a model with `max_visible_planes` planes.
pub fn choose_k(max_visible_planes: usize, cfg: &PccConfig) -> usize {
    let surplus = max_visible_planes as f64 * cfg.cluster_surplus_fraction;
    // guard against products like 0.1 * 10 landing a hair above an integer
    max_visible_planes + (surplus - 1e-9).ceil().max(0.0) as usize
}

/// Six-dimensional clustering features: min-max scaled position and the normal.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub features: Vec<[f64; 6]>,
    /// Cloud index of each feature row. Points without a valid normal are skipped.
    pub indices: Vec<usize>,
}

/// Scale positions per axis onto `[-1, 1]` and append normals.
///
/// An axis along which every point has the same coordinate maps to 0.
pub fn normalize_features(cloud: &PointCloud) -> Result<FeatureSet> {
    let normals = cloud
        .normals()
        .ok_or_else(|| Error::InvalidInput("clustering needs per-point normals".into()))?;
    let indices: Vec<usize> = (0..cloud.len()).filter(|&i| normals[i].is_some()).collect();
    if indices.is_empty() {
        return Err(Error::DegenerateInput("no point has a valid normal".into()));
    }
    let pts = cloud.points();
    let mut lo = pts[indices[0]];
    let mut hi = lo;
    for &i in &indices {
        lo = lo.inf(&pts[i]);
        hi = hi.sup(&pts[i]);
    }
    let features = indices
        .iter()
        .map(|&i| {
            let p = pts[i];
            let n = normals[i].expect("filtered").into_inner();
            let mut f = [0.0; 6];
            for axis in 0..3 {
                let span = hi[axis] - lo[axis];
                f[axis] = if span > 0.0 {
                    (2.0 * (p[axis] - lo[axis]) / span - 1.0).clamp(-1.0, 1.0)
                } else {
                    0.0
                };
                f[axis + 3] = n[axis];
            }
            f
        })
        .collect();
    Ok(FeatureSet { features, indices })
}

fn dist2(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Result of Lloyd iteration over feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centers: Vec<[f64; 6]>,
    pub inertia: f64,
    pub iterations: usize,
}

fn nearest(centers: &[[f64; 6]], f: &[f64; 6]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = dist2(center, f);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iteration with squared Euclidean distance.
pub fn lloyd(features: &[[f64; 6]], k: usize, max_iter: usize, seed: u64) -> Result<KMeans> {
    let n = features.len();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "k-means needs 1 <= k <= {n} points, got k = {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<[f64; 6]> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    centers.push(features[first]);
    chosen[first] = true;
    let mut d2: Vec<f64> = features.iter().map(|f| dist2(f, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            chosen.iter().position(|c| !c).expect("k <= n")
        };
        chosen[pick] = true;
        centers.push(features[pick]);
        for (i, f) in features.iter().enumerate() {
            d2[i] = d2[i].min(dist2(f, &features[pick]));
        }
    }

    let mut labels: Vec<usize> = features.iter().map(|f| nearest(&centers, f).0).collect();
    let mut iterations = 0;
    loop {
        // update
        let mut sums = vec![[0.0f64; 6]; k];
        let mut counts = vec![0usize; k];
        for (f, &l) in features.iter().zip(&labels) {
            counts[l] += 1;
            for d in 0..6 {
                sums[l][d] += f[d];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..6 {
                    centers[c][d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
        // empty clusters take the point farthest from its own center
        for c in 0..k {
            if counts[c] == 0 {
                let (far, _) = features
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| counts[labels[i]] > 1)
                    .map(|(i, f)| (i, dist2(f, &centers[labels[i]])))
                    .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                if far != usize::MAX {
                    counts[labels[far]] -= 1;
                    labels[far] = c;
                    counts[c] = 1;
                    centers[c] = features[far];
                }
            }
        }

        iterations += 1;
        if iterations >= max_iter {
            break;
        }
        let next: Vec<usize> = features.iter().map(|f| nearest(&centers, f).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let inertia = features
        .iter()
        .zip(&labels)
        .map(|(f, &l)| dist2(f, &centers[l]))
        .sum();
    Ok(KMeans {
        labels,
        centers,
        inertia,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub centroid: Vec3,
    pub mean_normal: UnitVec3,
    pub point_indices: Vec<usize>,
}

impl Cluster {
    fn from_members(cloud: &PointCloud, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        let pts = cloud.points();
        let normals = cloud.normals().expect("clusters are built from clouds with normals");
        let centroid = members.iter().map(|&i| pts[i]).sum::<Vec3>() / members.len() as f64;
        let normal_sum: Vec3 = members.iter().filter_map(|&i| normals[i]).map(|n| n.into_inner()).sum();
        let mean_normal = if normal_sum.norm() > 0.0 {
            Unit::new_normalize(normal_sum)
        } else {
            // opposing normals cancel exactly; fall back to the first member
            members
                .iter()
                .find_map(|&i| normals[i])
                .unwrap_or_else(|| Unit::new_unchecked(Vec3::z()))
        };
        Self {
            centroid,
            mean_normal,
            point_indices: members,
        }
    }

    pub fn size(&self) -> usize {
        self.point_indices.len()
    }
}

/// Partition of (valid-normal) point indices into clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster of every cloud point; `None` for points that were not clustered.
    pub assignment: Vec<Option<usize>>,
    pub clusters: Vec<Cluster>,
}

impl Clustering {
    /// Build clusters from per-point cluster ids, dropping ids with no members.
    pub fn from_assignment(cloud: &PointCloud, assignment: &[Option<usize>]) -> Self {
        let groups = assignment.iter().flatten().copied().max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups];
        for (i, a) in assignment.iter().enumerate() {
            if let Some(c) = a {
                members[*c].push(i);
            }
        }
        let clusters: Vec<Cluster> = members
            .into_iter()
            .filter(|m| !m.is_empty())
            .map(|m| Cluster::from_members(cloud, m))
            .collect();
        Self::from_clusters(cloud.len(), clusters)
    }

    fn from_clusters(n_points: usize, clusters: Vec<Cluster>) -> Self {
        let mut assignment = vec![None; n_points];
        for (c, cluster) in clusters.iter().enumerate() {
            for &i in &cluster.point_indices {
                assignment[i] = Some(c);
            }
        }
        Self {
            assignment,
            clusters,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Cluster::size).collect()
    }
}

/// k-means over the normalized features of `cloud`, returned as clusters of cloud points.
pub fn kmeans_cluster(cloud: &PointCloud, features: &FeatureSet, k: usize, cfg: &PccConfig) -> Result<Clustering> {
    let km = lloyd(&features.features, k, cfg.kmeans_max_iter, cfg.rng_seed)?;
    debug!("k-means: k = {k}, {} iterations, inertia {:.4}", km.iterations, km.inertia);
    let mut assignment = vec![None; cloud.len()];
    for (row, &label) in km.labels.iter().enumerate() {
        assignment[features.indices[row]] = Some(label);
    }
    Ok(Clustering::from_assignment(cloud, &assignment))
}

/// Repeatedly merge the first pair of clusters (in index order) whose mean normals
/// are less than `merge_angle_deg` apart, until no such pair remains. Centroids play no
/// part in the decision.
pub fn merge_similar_clusters(clustering: &Clustering, cloud: &PointCloud, cfg: &PccConfig) -> Clustering {
    let mut clusters = clustering.clusters.clone();
    'outer: loop {
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                if angle_between(&clusters[i].mean_normal, &clusters[j].mean_normal) < cfg.merge_angle_deg {
                    let absorbed = clusters.remove(j);
                    let mut members = std::mem::take(&mut clusters[i].point_indices);
                    members.extend(absorbed.point_indices);
                    clusters[i] = Cluster::from_members(cloud, members);
                    continue 'outer;
                }
            }
        }
        break;
    }
    Clustering::from_clusters(clustering.assignment.len(), clusters)
}

/// Angles between the mean normals of every pair of clusters.
pub fn object_matrix(clustering: &Clustering) -> Result<ConstraintMatrix> {
    let c = &clustering.clusters;
    let rows = (0..c.len())
        .map(|i| {
            (0..c.len())
                .map(|j| if i == j { 0.0 } else { angle_between(&c[i].mean_normal, &c[j].mean_normal) })
                .collect()
        })
        .collect();
    ConstraintMatrix::object(rows)
}

/// For each observed cluster, the model planes it most plausibly corresponds to.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceCandidates {
    /// `candidates[x]` lists model planes (ascending) for cluster `x`.
    pub candidates: Vec<Vec<usize>>,
    /// `counts[x][y]`: matched angles between cluster row `x` and model row `y`.
    pub counts: Vec<Vec<usize>>,
}

impl CorrespondenceCandidates {
    /// Clusters that may fill model plane `plane`, ascending.
    pub fn clusters_for(&self, plane: usize) -> Vec<usize> {
        (0..self.candidates.len())
            .filter(|&x| self.candidates[x].contains(&plane))
            .collect()
    }
}

/// Number of one-to-one pairs between two angle lists whose difference is below
/// `threshold`. Pairing runs greedily over both lists in sorted order, which is
/// maximal for interval matching on a line.
pub fn matched_angle_count(object_row: &[f64], model_row: &[f64], threshold: f64) -> usize {
    let mut a = object_row.to_vec();
    let mut b = model_row.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        if (a[i] - b[j]).abs() < threshold {
            count += 1;
            i += 1;
            j += 1;
        } else if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    count
}

/// Keep, for every row of `object`, the model rows with the highest matched-angle count.
pub fn similarity_reduction(model: &ConstraintMatrix, object: &ConstraintMatrix, threshold_deg: f64) -> CorrespondenceCandidates {
    let model_rows: Vec<Vec<f64>> = (0..model.size()).map(|y| model.off_diagonal_row(y)).collect();
    let mut candidates = Vec::with_capacity(object.size());
    let mut counts = Vec::with_capacity(object.size());
    for x in 0..object.size() {
        let row = object.off_diagonal_row(x);
        let c: Vec<usize> = model_rows
            .iter()
            .map(|m| matched_angle_count(&row, m, threshold_deg))
            .collect();
        let best = c.iter().copied().max().unwrap_or(0);
        if best == 0 {
            warn!("cluster {x} matches no model angle; every model plane stays a candidate");
        }
        candidates.push((0..c.len()).filter(|&y| c[y] == best).collect());
        counts.push(c);
    }
    CorrespondenceCandidates { candidates, counts }
}

/// Assignment of clusters to model planes chosen by the search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PccSolution {
    /// For each model plane, the mapped cluster or `None` for the empty choice.
    pub mapping: Vec<Option<usize>>,
    pub total_points: usize,
}

impl PccSolution {
    /// `(model plane, cluster)` pairs in model-plane order.
    pub fn mapped_pairs(&self) -> Vec<(usize, usize)> {
        self.mapping
            .iter()
            .enumerate()
            .filter_map(|(plane, c)| c.map(|c| (plane, c)))
            .collect()
    }

    pub fn mapped_planes(&self) -> Vec<usize> {
        self.mapped_pairs().into_iter().map(|(p, _)| p).collect()
    }
}

/// Lexicographic order on mappings where the empty choice sorts after every cluster.
pub fn mapping_order(a: &[Option<usize>], b: &[Option<usize>]) -> std::cmp::Ordering {
    let key = |m: &Option<usize>| m.map_or(usize::MAX, |c| c);
    a.iter().map(key).cmp(b.iter().map(key))
}

struct Search<'a> {
    model: &'a ConstraintMatrix,
    object: &'a ConstraintMatrix,
    options: Vec<Vec<usize>>,
    tolerance: f64,
    used: Vec<bool>,
    branch: Vec<Option<usize>>,
}

impl Search<'_> {
    fn accepts(&self, level: usize, cluster: usize) -> bool {
        self.branch.iter().enumerate().all(|(k, assigned)| match assigned {
            Some(l) => (self.object.get(cluster, *l) - self.model.get(level, k)).abs() <= self.tolerance,
            None => true,
        })
    }

    /// Depth-first walk; `visit` sees every complete branch in lexicographic order.
    fn walk(&mut self, visit: &mut dyn FnMut(&[Option<usize>])) {
        let level = self.branch.len();
        if level == self.model.size() {
            visit(&self.branch);
            return;
        }
        for idx in 0..self.options[level].len() {
            let cluster = self.options[level][idx];
            if self.used[cluster] || !self.accepts(level, cluster) {
                continue;
            }
            self.used[cluster] = true;
            self.branch.push(Some(cluster));
            self.walk(visit);
            self.branch.pop();
            self.used[cluster] = false;
        }
        self.branch.push(None);
        self.walk(visit);
        self.branch.pop();
    }
}

/// Every complete branch of the constrained search tree, including the all-empty one,
/// in lexicographic order (empty after clusters).
pub fn enumerate_branches(
    model: &ConstraintMatrix,
    object: &ConstraintMatrix,
    candidates: &CorrespondenceCandidates,
    tolerance_deg: f64,
) -> Vec<Vec<Option<usize>>> {
    let mut out = Vec::new();
    let mut search = Search {
        model,
        object,
        options: (0..model.size()).map(|p| candidates.clusters_for(p)).collect(),
        tolerance: tolerance_deg,
        used: vec![false; object.size()],
        branch: Vec::with_capacity(model.size()),
    };
    search.walk(&mut |b| out.push(b.to_vec()));
    out
}

/// Backtracking search over model planes for the cluster assignment that satisfies
/// every pairwise angle constraint and covers the most points. Ties go to the
/// lexicographically smallest mapping.
pub fn tree_search(
    model: &ConstraintMatrix,
    object: &ConstraintMatrix,
    candidates: &CorrespondenceCandidates,
    cluster_sizes: &[usize],
    tolerance_deg: f64,
) -> Result<PccSolution> {
    if cluster_sizes.len() != object.size() || candidates.candidates.len() != object.size() {
        return Err(Error::InvalidInput("cluster sizes, candidates and object matrix disagree".into()));
    }
    let mut best: Option<PccSolution> = None;
    let mut branches = 0usize;
    let mut search = Search {
        model,
        object,
        options: (0..model.size()).map(|p| candidates.clusters_for(p)).collect(),
        tolerance: tolerance_deg,
        used: vec![false; object.size()],
        branch: Vec::with_capacity(model.size()),
    };
    search.walk(&mut |branch| {
        branches += 1;
        if branch.iter().all(Option::is_none) {
            return;
        }
        let total = branch.iter().flatten().map(|&c| cluster_sizes[c]).sum();
        // branches arrive in lexicographic order, so only a strictly larger total wins
        if best.as_ref().is_none_or(|b| total > b.total_points) {
            best = Some(PccSolution {
                mapping: branch.to_vec(),
                total_points: total,
            });
        }
    });
    debug!("tree search: {branches} complete branches");
    best.ok_or(Error::NoSolution)
}

/// Everything the clustering stage produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PccOutcome {
    pub solution: PccSolution,
    /// Clusters after merging; `solution` indexes into these.
    pub clustering: Clustering,
    pub object_matrix: ConstraintMatrix,
    pub candidates: CorrespondenceCandidates,
}

impl PccOutcome {
    /// Point groups for the mapped model planes, in model-plane order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        self.solution
            .mapped_pairs()
            .into_iter()
            .map(|(_, c)| self.clustering.clusters[c].point_indices.clone())
            .collect()
    }

    /// Fraction of the cloud's points that ended up in mapped clusters.
    pub fn inlier_ratio(&self) -> f64 {
        let n = self.clustering.assignment.len();
        if n == 0 {
            0.0
        } else {
            self.solution.total_points as f64 / n as f64
        }
    }
}

/// Full clustering stage: features, k-means, merging, correspondence ranking and
/// constrained search.
pub fn run_pcc(cloud: &PointCloud, model: &ConstraintMatrix, cfg: &PccConfig) -> Result<PccOutcome> {
    cfg.validate()?;
    let features = normalize_features(cloud)?;
    let k = choose_k(model.size(), cfg).min(features.features.len());
    let raw = kmeans_cluster(cloud, &features, k, cfg)?;
    let clustering = merge_similar_clusters(&raw, cloud, cfg);
    debug!("{} clusters after merging {}", clustering.clusters.len(), raw.clusters.len());
    let object = object_matrix(&clustering)?;
    let candidates = similarity_reduction(model, &object, cfg.similarity_threshold_deg);
    let solution = tree_search(model, &object, &candidates, &clustering.sizes(), cfg.constraint_tolerance_deg)?;
    Ok(PccOutcome {
        solution,
        clustering,
        object_matrix: object,
        candidates,
    })
}
