use super::{SegError, SegParams};
use crate::geometry::{connected_components, DepthImage, Mask};

/// Largest 8-connected component of `mask`, first label on size ties.
pub(crate) fn largest_component(mask: &Mask) -> (Mask, usize) {
    let (labels, sizes) = connected_components(mask);
    let mut out = mask.blank_like(false);
    let Some((best, &size)) = sizes.iter().enumerate().rev().max_by_key(|(_, s)| **s) else {
        return (out, 0);
    };
    let label = best as u32 + 1;
    for (v, &l) in out.values.iter_mut().zip(&labels) {
        *v = l == label;
    }
    (out, size)
}

/// Shallowest depth band whose largest contiguous region reaches
/// `a_threshold` pixels.
///
/// The scan starts at the closest valid depth and walks down in steps of
/// `p.step`; the last step is clamped to the farthest valid depth.
pub fn extract_top_layer(depth: &DepthImage, p: &SegParams) -> Result<(Mask, f64), SegError> {
    let valid = depth.values.iter().copied().filter(|d| *d > 0.0);
    let (d_min, d_max) = valid.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
        (lo.min(d), hi.max(d))
    });
    if !d_min.is_finite() {
        return Err(SegError::NoTopLayer);
    }
    let mut band = depth.blank_like(false);
    let mut k = 0usize;
    loop {
        let d = (d_min + k as f64 * p.step).min(d_max);
        for (b, &v) in band.values.iter_mut().zip(&depth.values) {
            *b = v > 0.0 && v <= d;
        }
        let (comp, area) = largest_component(&band);
        if area >= p.a_threshold {
            return Ok((comp, d));
        }
        if d >= d_max {
            return Err(SegError::NoTopLayer);
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    fn image(w: usize, h: usize) -> DepthImage {
        DepthImage::filled(w, h, 0.001, Point3::origin(), 0.0)
    }

    #[test]
    fn flat_plane_is_found_at_first_step() {
        let mut d = image(200, 100);
        d.values.fill(0.5);
        let (m, found) = extract_top_layer(&d, &SegParams::default()).unwrap();
        assert_eq!(found, 0.5);
        assert_eq!(m.count(), 20000);
    }

    #[test]
    fn invalid_image_has_no_top_layer() {
        assert_eq!(
            extract_top_layer(&image(20, 20), &SegParams::default()),
            Err(SegError::NoTopLayer)
        );
    }

    #[test]
    fn small_upper_plateau_is_skipped() {
        let mut d = image(300, 100);
        for y in 0..100 {
            for x in 0..300 {
                let v = if x < 80 {
                    0.4
                } else if x >= 100 {
                    0.6
                } else {
                    0.0
                };
                d.set(x, y, v);
            }
        }
        let (m, found) = extract_top_layer(&d, &SegParams::default()).unwrap();
        assert!((found - 0.6).abs() < 1e-9, "found {found}");
        assert_eq!(m.count(), 20000);
        assert!(!*m.get(10, 10));
    }
}
