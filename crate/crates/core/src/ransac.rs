//! Voxelized RANSAC plane extraction, kept as a comparison baseline.

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExtractionConfig;
use crate::error::{Error, Result};
use crate::geometry::{principal_axes, validate_points, Point3, PointCluster};
use crate::octree::{build_root_map, sorted_roots, PlanePatch, VoxelKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    /// Inlier band half-width, meters.
    pub dist_threshold: f64,
    pub max_iterations: usize,
    /// Defaults to the extraction config's `min_points`.
    pub min_inliers: Option<usize>,
    pub success_probability: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            dist_threshold: 0.03,
            max_iterations: 500,
            min_inliers: None,
            success_probability: 0.99,
            seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dist_threshold > 0.0 && self.dist_threshold.is_finite()) {
            return Err(Error::InvalidConfig(
                "ransac dist_threshold must be positive".into(),
            ));
        }
        if !(self.success_probability > 0.0 && self.success_probability < 1.0) {
            return Err(Error::InvalidConfig(
                "ransac success_probability must lie in (0, 1)".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "ransac max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A plane `n·p = offset` with unit `n` and the indices of its inliers.
#[derive(Debug, Clone, PartialEq)]
pub struct RansacPlane {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub inliers: Vec<usize>,
}

impl RansacPlane {
    pub fn distance(&self, p: &Point3) -> f64 {
        (self.normal.dot(&p.coords()) - self.offset).abs()
    }
}

const DEGENERATE_CROSS: f64 = 1e-12;

/// Best plane among `points`, seeded with `params.seed`. `None` when fewer
/// than three points or fewer than `min_inliers` (default 3) support it.
pub fn ransac_plane(points: &[Point3], params: &RansacParams) -> Option<RansacPlane> {
    let indices: Vec<usize> = (0..points.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    ransac_indexed(
        points,
        &indices,
        params,
        params.min_inliers.unwrap_or(3),
        &mut rng,
    )
}

fn count_inliers(
    points: &[Point3],
    indices: &[usize],
    normal: &Vector3<f64>,
    offset: f64,
    thr: f64,
) -> usize {
    indices
        .iter()
        .filter(|&&i| (normal.dot(&points[i].coords()) - offset).abs() <= thr)
        .count()
}

fn ransac_indexed(
    points: &[Point3],
    indices: &[usize],
    params: &RansacParams,
    min_inliers: usize,
    rng: &mut ChaCha8Rng,
) -> Option<RansacPlane> {
    let m = indices.len();
    if m < 3 {
        return None;
    }
    let thr = params.dist_threshold;
    let mut best: Option<(usize, Vector3<f64>, f64)> = None;
    let mut needed = params.max_iterations as f64;
    let mut iter = 0usize;
    while iter < params.max_iterations && (iter as f64) < needed {
        iter += 1;
        let s = sample(rng, m, 3);
        let (a, b, c) = (
            points[indices[s.index(0)]].coords(),
            points[indices[s.index(1)]].coords(),
            points[indices[s.index(2)]].coords(),
        );
        let cross = (b - a).cross(&(c - a));
        let len = cross.norm();
        if len < DEGENERATE_CROSS {
            continue;
        }
        let normal = cross / len;
        let offset = normal.dot(&a);
        let score = count_inliers(points, indices, &normal, offset, thr);
        if best.is_none_or(|(s, _, _)| score > s) {
            best = Some((score, normal, offset));
            let w = score as f64 / m as f64;
            needed = if w >= 1.0 {
                0.0
            } else {
                (1.0 - params.success_probability).ln() / (1.0 - w.powi(3)).ln()
            };
        }
    }
    let (score, normal, offset) = best?;
    if score < min_inliers.max(3) {
        return None;
    }

    let inliers_of = |n: &Vector3<f64>, d: f64| -> Vec<usize> {
        indices
            .iter()
            .copied()
            .filter(|&i| (n.dot(&points[i].coords()) - d).abs() <= thr)
            .collect()
    };
    let consensus = inliers_of(&normal, offset);
    // PCA refit over the consensus set; kept only if it does not lose support.
    let cluster = PointCluster::accumulate_indexed(points, &consensus);
    if let Ok((eig, centroid)) = principal_axes(&cluster) {
        let n = eig.normal();
        let d = n.dot(&centroid.coords());
        let refit = inliers_of(&n, d);
        if refit.len() >= consensus.len() {
            return Some(RansacPlane {
                normal: n,
                offset: d,
                inliers: refit,
            });
        }
    }
    Some(RansacPlane {
        normal,
        offset,
        inliers: consensus,
    })
}

/// Random stream seed for one root voxel, independent of processing order.
pub fn voxel_seed(seed: u64, key: VoxelKey) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in [key.ix, key.iy, key.iz] {
        h = splitmix64(h ^ v as u64);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per root voxel, repeatedly extracts the best RANSAC plane and removes its
/// inliers until no plane reaches `min_inliers`.
pub fn ransac_extract_all(
    points: &[Point3],
    config: &ExtractionConfig,
    params: &RansacParams,
) -> Result<Vec<PlanePatch>> {
    config.validate()?;
    params.validate()?;
    validate_points(points)?;
    let min_inliers = params.min_inliers.unwrap_or(config.min_points);
    let mut patches = Vec::new();
    for (key, mut remaining) in sorted_roots(build_root_map(points, config.root_size)) {
        let mut rng = ChaCha8Rng::seed_from_u64(voxel_seed(params.seed, key));
        while remaining.len() >= min_inliers.max(3) {
            let Some(plane) = ransac_indexed(points, &remaining, params, min_inliers, &mut rng)
            else {
                break;
            };
            let cluster = PointCluster::accumulate_indexed(points, &plane.inliers);
            let mut taken = plane.inliers;
            taken.sort_unstable();
            remaining.retain(|i| taken.binary_search(i).is_err());
            patches.push(PlanePatch::from_cluster(cluster, taken, key, 0)?);
        }
    }
    Ok(patches)
}
