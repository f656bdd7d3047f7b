//! Scoring extracted planes against ground-truth labels.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::Point3;
use crate::merge::PlaneGroup;
use crate::octree::{PlanePatch, StageTimings};
use crate::synthetic::{GroundTruthCloud, TruthPlane, UNLABELED};

/// Anything that names a set of member points and a fitted plane.
pub trait ExtractedPlane {
    fn member_indices(&self) -> &[usize];
    fn plane_normal(&self) -> Vector3<f64>;
    fn plane_centroid(&self) -> Point3;
}

impl ExtractedPlane for PlanePatch {
    fn member_indices(&self) -> &[usize] {
        &self.point_indices
    }
    fn plane_normal(&self) -> Vector3<f64> {
        self.normal
    }
    fn plane_centroid(&self) -> Point3 {
        self.centroid
    }
}

impl ExtractedPlane for PlaneGroup {
    fn member_indices(&self) -> &[usize] {
        &self.merged.point_indices
    }
    fn plane_normal(&self) -> Vector3<f64> {
        self.merged.normal
    }
    fn plane_centroid(&self) -> Point3 {
        self.merged.centroid
    }
}

/// Plurality assignment of one extracted plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneMatch {
    pub extracted: usize,
    /// `None` when the plurality label is the unlabeled class.
    pub truth: Option<i32>,
    /// Member points carrying the matched label.
    pub support: usize,
    pub size: usize,
}

/// Assigns each extracted plane to the label held by most of its points,
/// breaking ties toward the smaller label.
pub fn match_planes<P: ExtractedPlane>(extracted: &[P], labels: &[i32]) -> Vec<PlaneMatch> {
    extracted
        .iter()
        .enumerate()
        .map(|(k, plane)| {
            let mut votes: BTreeMap<i32, usize> = BTreeMap::new();
            for &i in plane.member_indices() {
                *votes.entry(labels[i]).or_default() += 1;
            }
            let winner = votes
                .iter()
                .fold(None::<(i32, usize)>, |best, (&l, &c)| match best {
                    Some((_, bc)) if bc >= c => best,
                    _ => Some((l, c)),
                });
            let (label, support) = winner.unwrap_or((UNLABELED, 0));
            PlaneMatch {
                extracted: k,
                truth: (label >= 0).then_some(label),
                support: if label >= 0 { support } else { 0 },
                size: plane.member_indices().len(),
            }
        })
        .collect()
}

/// Point precision and recall of a matching. Precision is absent when
/// nothing was extracted, recall when no point is labeled.
pub fn point_metrics(matches: &[PlaneMatch], labels: &[i32]) -> (Option<f64>, Option<f64>) {
    let correct: usize = matches.iter().map(|m| m.support).sum();
    let extracted: usize = matches.iter().map(|m| m.size).sum();
    let labeled = labels.iter().filter(|&&l| l >= 0).count();
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    (ratio(correct, extracted), ratio(correct, labeled))
}

/// Normal angle (degrees, in [0, 90]) and offset difference (meters) between
/// an extracted plane and a ground-truth plane, insensitive to normal signs.
pub fn geometry_error<P: ExtractedPlane>(plane: &P, truth: &TruthPlane) -> (f64, f64) {
    let n = plane.plane_normal();
    let dot = n.dot(&truth.normal);
    let angle = dot.abs().min(1.0).acos().to_degrees();
    let d_ext = n.dot(&plane.plane_centroid().coords());
    let d_gt = if dot < 0.0 {
        -truth.offset
    } else {
        truth.offset
    };
    (angle, (d_ext - d_gt).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPlane {
    pub extracted: usize,
    pub truth: i32,
    pub normal_error_deg: f64,
    pub offset_error_m: f64,
    pub support: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub matched_planes: Vec<MatchedPlane>,
    pub unmatched: usize,
    pub extracted_count: usize,
    pub ground_truth_count: usize,
    /// Excluded from determinism guarantees.
    pub wall_time: Option<StageTimings>,
}

impl EvalReport {
    pub fn max_normal_error_deg(&self) -> f64 {
        self.matched_planes
            .iter()
            .map(|m| m.normal_error_deg)
            .fold(0.0, f64::max)
    }

    pub fn max_offset_error_m(&self) -> f64 {
        self.matched_planes
            .iter()
            .map(|m| m.offset_error_m)
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn evaluate<P: ExtractedPlane>(
    method: &str,
    extracted: &[P],
    truth: &GroundTruthCloud,
    wall_time: Option<StageTimings>,
) -> EvalReport {
    let matches = match_planes(extracted, &truth.labels);
    let (precision, recall) = point_metrics(&matches, &truth.labels);
    let mut matched_planes = Vec::new();
    let mut unmatched = 0;
    for m in &matches {
        match m.truth.and_then(|id| truth.plane(id)) {
            Some(tp) => {
                let (angle, offset) = geometry_error(&extracted[m.extracted], tp);
                matched_planes.push(MatchedPlane {
                    extracted: m.extracted,
                    truth: tp.id,
                    normal_error_deg: angle,
                    offset_error_m: offset,
                    support: m.support,
                    size: m.size,
                });
            }
            None => unmatched += 1,
        }
    }
    EvalReport {
        method: method.to_string(),
        precision,
        recall,
        matched_planes,
        unmatched,
        extracted_count: extracted.len(),
        ground_truth_count: truth.planes.len(),
        wall_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointCluster;
    use crate::octree::VoxelKey;
    use crate::synthetic::gen_corner;

    fn patch_for(cloud: &GroundTruthCloud, indices: Vec<usize>) -> PlanePatch {
        let cluster = PointCluster::accumulate_indexed(&cloud.points, &indices);
        PlanePatch::from_cluster(cluster, indices, VoxelKey::new(0, 0, 0), 0).unwrap()
    }

    fn perfect(cloud: &GroundTruthCloud) -> Vec<PlanePatch> {
        (0..3)
            .map(|id| {
                let idx = (0..cloud.len())
                    .filter(|&i| cloud.labels[i] == id)
                    .collect();
                patch_for(cloud, idx)
            })
            .collect()
    }

    #[test]
    fn perfect_extraction() {
        let c = gen_corner(2.0, 200.0, 0.0, 1);
        let r = evaluate("ours", &perfect(&c), &c, None);
        assert_eq!(r.matched_planes.len(), 3);
        assert_eq!(r.unmatched, 0);
        assert_eq!(r.precision, Some(1.0));
        assert_eq!(r.recall, Some(1.0));
        assert!(r.max_normal_error_deg() < 1e-6);
        assert!(r.max_offset_error_m() < 1e-9);
    }

    #[test]
    fn empty_extraction() {
        let c = gen_corner(2.0, 200.0, 0.0, 1);
        let none: Vec<PlanePatch> = Vec::new();
        assert!(match_planes(&none, &c.labels).is_empty());
        let r = evaluate("ours", &none, &c, None);
        assert_eq!(r.recall, Some(0.0));
        assert_eq!(r.precision, None);
    }

    #[test]
    fn no_labeled_points() {
        let (p, r) = point_metrics(&[], &[UNLABELED, UNLABELED]);
        assert_eq!((p, r), (None, None));
    }

    #[test]
    fn unlabeled_plurality_is_unmatched() {
        let labels = vec![UNLABELED, UNLABELED, 0];
        let cloud = GroundTruthCloud {
            points: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            labels: labels.clone(),
            ..Default::default()
        };
        let m = match_planes(&[patch_for(&cloud, vec![0, 1, 2])], &labels);
        assert_eq!(m[0].truth, None);
        assert_eq!(m[0].support, 0);
    }

    #[test]
    fn geometry_error_cases() {
        let c = gen_corner(2.0, 200.0, 0.0, 1);
        let patches = perfect(&c);
        let floor = c.plane(0).unwrap();
        let wall = c.plane(2).unwrap();
        let (a, d) = geometry_error(&patches[0], floor);
        assert!(a < 1e-6 && d < 1e-9);
        let (a, _) = geometry_error(&patches[0], wall);
        assert!((a - 90.0).abs() < 1e-6);
        // sign flips of the truth normal do not matter
        let flipped = TruthPlane {
            normal: -floor.normal,
            offset: -floor.offset,
            ..*floor
        };
        let (a2, d2) = geometry_error(&patches[0], &flipped);
        assert!(a2 < 1e-6 && d2 < 1e-9);
    }

    #[test]
    fn relabeling_invariance() {
        let c = gen_corner(2.0, 200.0, 0.0, 1);
        let patches = perfect(&c);
        let perm = |l: i32| if l < 0 { l } else { (l + 1) % 3 };
        let relabeled: Vec<i32> = c.labels.iter().map(|&l| perm(l)).collect();
        let a = point_metrics(&match_planes(&patches, &c.labels), &c.labels);
        let b = point_metrics(&match_planes(&patches, &relabeled), &relabeled);
        assert_eq!(a, b);
    }
}
