use super::{gauss, RenderOutput, Scene, SensorNoise};
use crate::geometry::{Mask, Pixel};
use crate::segmentation::{MaskSet, ScoredMask};
use rand::Rng;
use std::collections::BTreeMap;

/// Stand-in for a promptable segmentation model, answering from the
/// renderer's instance buffer.
pub struct OracleSegmenter<'a> {
    render: &'a RenderOutput,
    cache: BTreeMap<i32, Mask>,
}

impl<'a> OracleSegmenter<'a> {
    pub fn new(render: &'a RenderOutput) -> Self {
        Self {
            render,
            cache: BTreeMap::new(),
        }
    }

    /// Ground-truth visible pixels of instance `id`.
    pub fn visible_mask(&mut self, id: i32) -> &Mask {
        let ids = &self.render.ids;
        self.cache.entry(id).or_insert_with(|| {
            let mut m = ids.blank_like(false);
            for (v, &owner) in m.values.iter_mut().zip(&ids.values) {
                *v = owner == id;
            }
            m
        })
    }

    /// Most-touching other instance within 3 px of `mask`, ties to the
    /// lower id.
    fn neighbor_of(&self, mask: &Mask, id: i32) -> Option<i32> {
        let ring = mask.morph(3);
        let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
        for (i, (&r, &owner)) in ring.values.iter().zip(&self.render.ids.values).enumerate() {
            if r && !mask.values[i] && owner >= 0 && owner != id {
                *counts.entry(owner).or_default() += 1;
            }
        }
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(k, _)| k)
    }

    pub fn segment_one<R: Rng + ?Sized>(
        &mut self,
        prompt: Pixel,
        noise: &SensorNoise,
        rng: &mut R,
    ) -> ScoredMask {
        let ids = &self.render.ids;
        let id = *ids.get(prompt.x, prompt.y);
        let spurious = rng.random::<f64>() < noise.spurious_mask_rate;
        let b = noise.mask_boundary_erosion as i32;
        let k = if b > 0 { rng.random_range(-b..=b) } else { 0 };
        let conf_noise = gauss(rng, noise.confidence_sigma);
        if id < 0 {
            return ScoredMask::new(ids.blank_like(false), 0.0);
        }
        let mut mask = self.visible_mask(id).clone();
        let visibility = {
            let fp = self.render.footprint.get(id as usize).copied().unwrap_or(0);
            if fp == 0 {
                0.0
            } else {
                mask.count() as f64 / fp as f64
            }
        };
        if spurious {
            if let Some(other) = self.neighbor_of(&mask, id) {
                let extra = self.visible_mask(other).clone();
                mask.union_with(&extra);
            }
        }
        if k != 0 {
            mask = mask.morph(k);
        }
        ScoredMask::new(mask, (visibility + conf_noise).clamp(0.0, 1.0))
    }

    pub fn segment<R: Rng + ?Sized>(
        &mut self,
        prompts: &[Pixel],
        noise: &SensorNoise,
        rng: &mut R,
    ) -> MaskSet {
        MaskSet {
            masks: prompts
                .iter()
                .map(|&p| self.segment_one(p, noise, rng))
                .collect(),
        }
    }
}

/// One mask per prompt from a fresh noise-free render of `scene`.
pub fn oracle_segment<R: Rng + ?Sized>(
    scene: &Scene,
    pitch: f64,
    prompts: &[Pixel],
    noise: &SensorNoise,
    rng: &mut R,
) -> MaskSet {
    let render = super::render_scene(scene, pitch);
    OracleSegmenter::new(&render).segment(prompts, noise, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point3, Polyline3D};
    use crate::sim::{BinDims, DloInstance, DloSpec, InstanceStatus};

    fn two_parallel() -> Scene {
        let mut s = Scene::empty(BinDims::default(), 0);
        for (id, y) in [(0usize, 0.2), (1, 0.2125)] {
            s.instances.push(DloInstance {
                id,
                spec: DloSpec::hv_cable(),
                centerline: Polyline3D::new(vec![
                    Point3::new(0.1, y, 0.0055),
                    Point3::new(0.5, y, 0.0055),
                ])
                .unwrap(),
                layer: id,
                status: InstanceStatus::InPile,
            });
        }
        s
    }

    #[test]
    fn zero_noise_is_exact() {
        let s = two_parallel();
        let render = crate::sim::render_scene(&s, 0.001);
        let p = render.ids.world_to_pixel(0.3, 0.2).unwrap();
        let mut oracle = OracleSegmenter::new(&render);
        let mut rng = crate::rng::seeded(1);
        let m = oracle.segment_one(p, &SensorNoise::zero(), &mut rng);
        assert_eq!(m.confidence, 1.0);
        let truth = oracle.visible_mask(0).clone();
        assert_eq!(m.mask, truth);
    }

    #[test]
    fn background_prompt_is_empty() {
        let s = two_parallel();
        let render = crate::sim::render_scene(&s, 0.001);
        let p = render.ids.world_to_pixel(0.05, 0.05).unwrap();
        let mut rng = crate::rng::seeded(1);
        let m = OracleSegmenter::new(&render).segment_one(p, &SensorNoise::default(), &mut rng);
        assert!(m.mask.is_empty_mask());
        assert_eq!(m.confidence, 0.0);
    }

    #[test]
    fn spurious_masks_bleed_into_neighbor() {
        let s = two_parallel();
        let render = crate::sim::render_scene(&s, 0.001);
        let p = render.ids.world_to_pixel(0.3, 0.2).unwrap();
        let noise = SensorNoise {
            spurious_mask_rate: 1.0,
            ..SensorNoise::zero()
        };
        let mut oracle = OracleSegmenter::new(&render);
        let mut rng = crate::rng::seeded(1);
        let m = oracle.segment_one(p, &noise, &mut rng);
        let both = oracle.visible_mask(0).count() + oracle.visible_mask(1).count();
        assert_eq!(m.mask.count(), both);
    }
}
