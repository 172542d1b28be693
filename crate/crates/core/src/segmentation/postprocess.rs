use super::{MaskSet, ScoredMask, SegParams};

fn sort_masks(masks: &mut [ScoredMask]) {
    masks.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.area().cmp(&a.area()))
    });
}

/// Sort by confidence, merge heavily overlapping masks into the more
/// confident one, then keep only masks that barely overlap anything kept
/// before them.
///
/// A mask merged into an earlier one is consumed and takes no further part.
/// The kept masks are returned in sorted order, so the function is
/// idempotent.
pub fn postprocess_masks(raw: &MaskSet, p: &SegParams) -> MaskSet {
    let mut masks: Vec<ScoredMask> = raw.masks.iter().filter(|m| m.area() > 0).cloned().collect();
    sort_masks(&mut masks);
    let mut consumed = vec![false; masks.len()];
    for i in 0..masks.len() {
        if consumed[i] {
            continue;
        }
        for j in i + 1..masks.len() {
            if !consumed[j] && masks[i].iou(&masks[j]) > p.t_merge {
                let other = masks[j].clone();
                masks[i].absorb(&other);
                consumed[j] = true;
            }
        }
    }
    let mut kept: Vec<ScoredMask> = Vec::new();
    for (m, _) in masks.into_iter().zip(consumed).filter(|(_, c)| !c) {
        if kept.iter().all(|k| k.iou(&m) <= p.t_discard) {
            kept.push(m);
        }
    }
    sort_masks(&mut kept);
    MaskSet { masks: kept }
}
