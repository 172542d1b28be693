//! Top-layer extraction, skeletons, prompt sampling, mask post-processing
//! and back-projection of a mask to a raw 3D point sequence.

mod backproject;
mod postprocess;
mod prompts;
mod skeleton;
mod toplayer;

pub use backproject::{estimate_radius, mask_to_raw_shape, path_to_points};
pub use postprocess::postprocess_masks;
pub use prompts::sample_prompts;
pub use skeleton::{skeletonize, zhang_suen};
pub use toplayer::extract_top_layer;
pub(crate) use toplayer::largest_component;

use crate::geometry::{GeometryError, Mask, Pixel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegError {
    #[error("no contiguous region reaches the area threshold")]
    NoTopLayer,
    #[error("no skeleton pixel has depth data")]
    NoDepthData,
    #[error("no candidate mask")]
    NoCandidate,
    #[error("invalid segmentation parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegParams {
    /// Area a contiguous region must reach to count as the top layer, pixels.
    pub a_threshold: usize,
    /// Depth scan step, meters.
    pub step: f64,
    /// Number of point prompts.
    pub n_prompts: usize,
    pub t_merge: f64,
    pub t_discard: f64,
    /// Skeleton spurs shorter than this are pruned, pixels.
    pub prune_min: usize,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            a_threshold: 15000,
            step: 0.005,
            n_prompts: 20,
            t_merge: 0.4,
            t_discard: 0.1,
            prune_min: 10,
        }
    }
}

impl SegParams {
    pub fn validate(&self) -> Result<(), SegError> {
        let ok = self.t_discard > 0.0
            && self.t_discard <= self.t_merge
            && self.t_merge < 1.0
            && self.n_prompts >= 1
            && self.a_threshold >= 1
            && self.step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SegError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// A binary mask with its confidence; area and bounding box are cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMask {
    pub mask: Mask,
    pub confidence: f64,
    area: usize,
    bbox: Option<(usize, usize, usize, usize)>,
}

impl ScoredMask {
    pub fn new(mask: Mask, confidence: f64) -> Self {
        let area = mask.count();
        let bbox = mask.bbox();
        Self {
            mask,
            confidence,
            area,
            bbox,
        }
    }

    pub fn area(&self) -> usize {
        self.area
    }

    /// Same value as [`crate::geometry::iou`], restricted to the overlap of
    /// the two bounding boxes.
    pub fn iou(&self, other: &ScoredMask) -> f64 {
        let (Some(a), Some(b)) = (self.bbox, other.bbox) else {
            return 0.0;
        };
        let (x0, y0) = (a.0.max(b.0), a.1.max(b.1));
        let (x1, y1) = (a.2.min(b.2), a.3.min(b.3));
        let mut inter = 0usize;
        if x0 <= x1 && y0 <= y1 {
            let w = self.mask.width;
            for y in y0..=y1 {
                let row = y * w;
                inter += (x0..=x1)
                    .filter(|&x| self.mask.values[row + x] && other.mask.values[row + x])
                    .count();
            }
        }
        let union = self.area + other.area - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub(crate) fn absorb(&mut self, other: &ScoredMask) {
        self.mask.union_with(&other.mask);
        self.confidence = self.confidence.max(other.confidence);
        self.area = self.mask.count();
        self.bbox = self.mask.bbox();
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaskSet {
    pub masks: Vec<ScoredMask>,
}

impl MaskSet {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn confidences(&self) -> Vec<f64> {
        self.masks.iter().map(|m| m.confidence).collect()
    }
}

/// Thinned mask split into 8-connected pixel paths.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Skeleton {
    pub paths: Vec<Vec<Pixel>>,
    pub source: Option<usize>,
}

impl Skeleton {
    pub fn total_len(&self) -> usize {
        self.paths.iter().map(Vec::len).sum()
    }

    /// Index of the longest path, ties to the lower index.
    pub fn longest(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, p) in self.paths.iter().enumerate() {
            if best.is_none_or(|b| p.len() > self.paths[b].len()) {
                best = Some(i);
            }
        }
        best
    }

    pub fn longest_len(&self) -> usize {
        self.longest().map_or(0, |i| self.paths[i].len())
    }
}

/// The mask whose longest skeleton path is longest; ties to the lower index.
pub fn select_target(processed: &MaskSet, prune_min: usize) -> Result<(usize, Skeleton), SegError> {
    let mut best: Option<(usize, Skeleton)> = None;
    for (i, m) in processed.masks.iter().enumerate() {
        let mut sk = skeletonize(&m.mask, prune_min);
        sk.source = Some(i);
        if best
            .as_ref()
            .is_none_or(|(_, b)| sk.longest_len() > b.longest_len())
        {
            best = Some((i, sk));
        }
    }
    best.ok_or(SegError::NoCandidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{iou, Point3};

    fn bar(w: usize, h: usize, x0: usize, y0: usize, len: usize) -> Mask {
        let mut m = Mask::filled(w, h, 0.001, Point3::origin(), false);
        for x in x0..x0 + len {
            for y in y0..y0 + 5 {
                m.set(x, y, true);
            }
        }
        m
    }

    #[test]
    fn cached_iou_matches_reference() {
        let a = ScoredMask::new(bar(64, 64, 2, 10, 30), 1.0);
        let b = ScoredMask::new(bar(64, 64, 12, 12, 40), 1.0);
        let c = ScoredMask::new(bar(64, 64, 2, 40, 10), 1.0);
        assert!((a.iou(&b) - iou(&a.mask, &b.mask).unwrap()).abs() < 1e-15);
        assert_eq!(a.iou(&c), 0.0);
    }

    #[test]
    fn select_target_prefers_longest_path() {
        let set = MaskSet {
            masks: vec![
                ScoredMask::new(bar(200, 64, 10, 5, 80), 0.9),
                ScoredMask::new(bar(200, 64, 10, 20, 120), 0.8),
                ScoredMask::new(bar(200, 64, 10, 40, 60), 0.7),
            ],
        };
        assert_eq!(select_target(&set, 10).unwrap().0, 1);
        let tie = MaskSet {
            masks: vec![
                ScoredMask::new(bar(200, 64, 10, 5, 100), 0.9),
                ScoredMask::new(bar(200, 64, 10, 20, 100), 0.8),
            ],
        };
        assert_eq!(select_target(&tie, 10).unwrap().0, 0);
        assert_eq!(
            select_target(&MaskSet::default(), 10),
            Err(SegError::NoCandidate)
        );
    }

    #[test]
    fn params_validate() {
        assert!(SegParams::default().validate().is_ok());
        let bad = SegParams {
            t_discard: 0.5,
            ..SegParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
