//! Direct light sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::math::{vec3, Vec3};
use crate::scene::{LightKind, LightSource, PatternFilter};

#[derive(Clone, Copy, Debug)]
pub struct LightSample {
    /// Unit direction from the shading point toward the light.
    pub wi: Vec3,
    /// Incident radiance along `wi`, including distance falloff, cone mask
    /// and pattern attenuation.
    pub radiance: Vec3,
    /// Distance to the light sample (shadow-ray length). f32::MAX for
    /// directional lights.
    pub dist: f32,
    /// Sampling pdf; 1 for delta lights, otherwise folded into `radiance`.
    pub pdf: f32,
}

/// Sample the contribution of `light` at `point`. Returns None when the
/// point is outside the light's support (e.g. the spot cone).
pub fn light_contribution(
    light: &LightSource,
    point: Vec3,
    rng: &mut ChaCha8Rng,
) -> Option<LightSample> {
    let intensity = Vec3::from_array(light.intensity);
    match light.kind {
        LightKind::Point => {
            let to_light = light.pose.t - point;
            let r2 = to_light.length_squared();
            if r2 <= 0.0 {
                return None;
            }
            let dist = r2.sqrt();
            Some(LightSample {
                wi: to_light / dist,
                radiance: intensity / r2,
                dist,
                pdf: 1.0,
            })
        }
        LightKind::Directional => {
            let forward = light.forward();
            Some(LightSample {
                wi: -forward,
                radiance: intensity,
                dist: f32::MAX,
                pdf: 1.0,
            })
        }
        LightKind::Spot | LightKind::TexturedSpot => {
            let to_light = light.pose.t - point;
            let r2 = to_light.length_squared();
            if r2 <= 0.0 {
                return None;
            }
            let dist = r2.sqrt();
            // direction of the point in the light's local frame
            let local = light.pose.rot.transpose() * (point - light.pose.t);
            if local.z <= 0.0 {
                return None;
            }
            let cos = local.z / dist;
            if cos < light.fov.cos() {
                return None;
            }
            let mut attenuation = 1.0f32;
            if light.kind == LightKind::TexturedSpot {
                let pattern = light.pattern.as_ref()?;
                let tan_fov = light.fov.tan();
                let u = (local.x / local.z / tan_fov + 1.0) / 2.0;
                let v = (local.y / local.z / tan_fov + 1.0) / 2.0;
                attenuation = match light.filter {
                    PatternFilter::Nearest => pattern.sample_nearest(u, v, 0),
                    PatternFilter::Bilinear => pattern.sample_bilinear(u, v, 0),
                };
                if attenuation <= 0.0 {
                    return None;
                }
            }
            Some(LightSample {
                wi: to_light / dist,
                radiance: intensity * (attenuation / r2),
                dist,
                pdf: 1.0,
            })
        }
        LightKind::Area => {
            // one-sided square emitter on the local xy plane, facing +z;
            // `intensity` is the emitted radiance
            let h = light.size / 2.0;
            let lx = rng.gen::<f32>() * light.size - h;
            let ly = rng.gen::<f32>() * light.size - h;
            let q = light.pose.transform_point(vec3(lx, ly, 0.0));
            let to_light = q - point;
            let r2 = to_light.length_squared();
            if r2 <= 1e-12 {
                return None;
            }
            let dist = r2.sqrt();
            let wi = to_light / dist;
            let cos_l = light.forward().dot(-wi);
            if cos_l <= 0.0 {
                return None;
            }
            let area = light.size * light.size;
            Some(LightSample {
                wi,
                radiance: intensity * (cos_l * area / r2),
                dist,
                pdf: 1.0,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{rng_for, Pose};
    use crate::scene::LightSource;
    use std::sync::Arc;

    #[test]
    fn inverse_square_falloff() {
        let light = LightSource {
            kind: LightKind::Point,
            pose: Pose::from_translation(Vec3::ZERO),
            intensity: [4.0, 4.0, 4.0],
            ..Default::default()
        };
        let mut rng = rng_for(1, 0);
        let near = light_contribution(&light, vec3(0.0, 0.0, 1.0), &mut rng).unwrap();
        let far = light_contribution(&light, vec3(0.0, 0.0, 2.0), &mut rng).unwrap();
        let ratio = far.radiance.x / near.radiance.x;
        assert!((ratio - 0.25).abs() < 1e-6);
    }

    #[test]
    fn all_ones_pattern_equals_plain_spot() {
        let mut rng = rng_for(2, 0);
        let pattern = Arc::new(crate::img::ImageF::filled(16, 16, 1, 1.0));
        let spot = LightSource {
            kind: LightKind::Spot,
            intensity: [2.0, 2.0, 2.0],
            fov: 0.6,
            ..Default::default()
        };
        let textured = LightSource {
            kind: LightKind::TexturedSpot,
            intensity: [2.0, 2.0, 2.0],
            fov: 0.6,
            pattern: Some(pattern),
            ..Default::default()
        };
        for p in [
            vec3(0.0, 0.0, 1.0),
            vec3(0.3, -0.2, 1.5),
            vec3(-0.5, 0.5, 2.0),
            vec3(2.0, 0.0, 1.0), // outside the cone
        ] {
            let a = light_contribution(&spot, p, &mut rng).map(|s| s.radiance);
            let b = light_contribution(&textured, p, &mut rng).map(|s| s.radiance);
            assert_eq!(a.is_some(), b.is_some(), "support mismatch at {p:?}");
            if let (Some(a), Some(b)) = (a, b) {
                assert!((a - b).length() < 1e-6);
            }
        }
    }

    #[test]
    fn all_zero_pattern_contributes_nothing() {
        let mut rng = rng_for(3, 0);
        let pattern = Arc::new(crate::img::ImageF::filled(8, 8, 1, 0.0));
        let light = LightSource {
            kind: LightKind::TexturedSpot,
            pattern: Some(pattern),
            fov: 0.8,
            ..Default::default()
        };
        assert!(light_contribution(&light, vec3(0.0, 0.0, 1.0), &mut rng).is_none());
    }

    #[test]
    fn point_behind_spot_is_dark() {
        let mut rng = rng_for(4, 0);
        let light = LightSource {
            kind: LightKind::Spot,
            fov: 0.5,
            ..Default::default()
        };
        assert!(light_contribution(&light, vec3(0.0, 0.0, -1.0), &mut rng).is_none());
    }
}
