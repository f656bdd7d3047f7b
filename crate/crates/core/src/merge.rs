//! Greedy merging of coplanar leaf planes within one root voxel.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::octree::PlanePatch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeParams {
    /// Maximum angle between normals, degrees.
    pub eps1: f64,
    /// Maximum deviation from 90° of the angle between the centroid offset
    /// and either normal, degrees.
    pub eps2: f64,
    /// Centroid separations below this (meters) skip the offset test.
    pub min_separation_guard: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self {
            eps1: 8.0,
            eps2: 10.0,
            min_separation_guard: 1e-6,
        }
    }
}

impl MergeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(v > 0.0 && v < 90.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in (0, 90) degrees, got {v}"
                )));
            }
        }
        if !(self.min_separation_guard >= 0.0 && self.min_separation_guard.is_finite()) {
            return Err(Error::InvalidConfig(
                "min_separation_guard must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Angle in degrees between two lines, folded into [0°, 90°].
pub fn line_angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let c = (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0);
    c.acos().to_degrees()
}

/// Parallel normals and a centroid offset lying in both planes.
pub fn coplanar_test(pi: &PlanePatch, pj: &PlanePatch, params: &MergeParams) -> bool {
    if line_angle_deg(&pi.normal, &pj.normal) >= params.eps1 {
        return false;
    }
    let d = pi.centroid.coords() - pj.centroid.coords();
    if d.norm() < params.min_separation_guard {
        return true;
    }
    (line_angle_deg(&d, &pi.normal) - 90.0).abs() < params.eps2
        && (line_angle_deg(&d, &pj.normal) - 90.0).abs() < params.eps2
}

/// Coplanar patches of one root voxel and their combined plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneGroup {
    pub members: Vec<PlanePatch>,
    pub merged: PlanePatch,
}

impl PlaneGroup {
    pub fn single(patch: PlanePatch) -> Self {
        Self {
            merged: patch.clone(),
            members: vec![patch],
        }
    }

    fn absorb(&mut self, patch: PlanePatch) {
        let cluster = self.merged.cluster.merge(&patch.cluster);
        let mut indices = std::mem::take(&mut self.merged.point_indices);
        indices.extend_from_slice(&patch.point_indices);
        let depth = self.merged.depth.min(patch.depth);
        self.merged = PlanePatch::from_cluster(cluster, indices, self.merged.root_key, depth)
            .expect("merged cluster is non-empty");
        self.members.push(patch);
    }

    pub fn len(&self) -> usize {
        self.merged.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merged.is_empty()
    }

    /// Member counts per octree depth, index = depth.
    pub fn depth_histogram(&self) -> Vec<usize> {
        let max = self.members.iter().map(|m| m.depth).max().unwrap_or(0) as usize;
        let mut h = vec![0; max + 1];
        for m in &self.members {
            h[m.depth as usize] += 1;
        }
        h
    }
}

/// First-fit grouping. Each patch joins the first group (in creation order)
/// whose current merged plane is coplanar with it, otherwise opens a new one.
///
/// All patches must share one root key.
pub fn greedy_merge(patches: Vec<PlanePatch>, params: &MergeParams) -> Vec<PlaneGroup> {
    let mut groups: Vec<PlaneGroup> = Vec::new();
    for patch in patches {
        debug_assert!(groups
            .first()
            .is_none_or(|g| g.merged.root_key == patch.root_key));
        match groups
            .iter_mut()
            .find(|g| coplanar_test(&g.merged, &patch, params))
        {
            Some(g) => g.absorb(patch),
            None => groups.push(PlaneGroup::single(patch)),
        }
    }
    groups
}
