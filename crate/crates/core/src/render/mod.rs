//! Unidirectional CPU path tracer with tiled, scheduling-independent
//! parallelism.
//!
//! `visible` renders use the scene lights at full intensity. `ir` renders
//! scale every non-projector light by the rig's visible attenuation, add the
//! projector at full intensity plus a constant ambient environment term, and
//! return the R channel only.

pub mod bsdf;
pub mod bvh;
pub mod light;

pub use bsdf::{dielectric_f0, eval_bsdf, sample_bsdf, BsdfSample};
pub use light::{light_contribution, LightSample};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::img::{ImageF, ImageU8, INVALID};
use crate::math::{rng_for, splitmix64, vec3, Pose, Vec3};
use crate::scene::{CameraModel, LightSource, Scene};
use bvh::Ray;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spectrum {
    Visible,
    Ir,
}

#[derive(Clone, Debug)]
pub struct RenderSettings {
    pub spp: usize,
    pub max_bounces: usize,
    pub seed: u64,
    pub spectrum: Spectrum,
    /// Tile edge in pixels; part of the deterministic RNG layout.
    pub tile_size: usize,
    /// Per-sample radiance clamp; None derives 50x the brightest light.
    pub firefly_clamp: Option<f32>,
    /// 3x3 median over the float image before quantization.
    pub median_prefilter: bool,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            spp: 8,
            max_bounces: 8,
            seed: 0,
            spectrum: Spectrum::Visible,
            tile_size: 32,
            firefly_clamp: None,
            median_prefilter: false,
        }
    }
}

struct SceneHit {
    t: f32,
    obj: usize,
    tri: u32,
    u: f32,
    v: f32,
}

/// Per-trace context: effective lights, environment and object transforms.
struct TraceCtx<'a> {
    scene: &'a Scene,
    lights: Vec<LightSource>,
    environment: Vec3,
    emission_scale: f32,
    inv_poses: Vec<(Pose, f32)>,
    clamp: f32,
    max_bounces: usize,
}

impl<'a> TraceCtx<'a> {
    fn new(scene: &'a Scene, settings: &RenderSettings) -> Self {
        let mut lights = Vec::new();
        let (environment, emission_scale) = match settings.spectrum {
            Spectrum::Visible => {
                lights.extend(scene.lights.iter().cloned());
                (Vec3::from_array(scene.environment), 1.0)
            }
            Spectrum::Ir => {
                let a = scene.rig.visible_attenuation;
                for l in &scene.lights {
                    let mut l = l.clone();
                    l.intensity = [
                        l.intensity[0] * a,
                        l.intensity[1] * a,
                        l.intensity[2] * a,
                    ];
                    lights.push(l);
                }
                lights.push(scene.rig.projector.clone());
                (
                    Vec3::from_array(scene.environment) * a
                        + Vec3::splat(scene.rig.ir_ambient),
                    a,
                )
            }
        };
        let inv_poses = scene
            .objects
            .iter()
            .map(|o| (o.pose.inverse(), o.scale))
            .collect();
        let mut peak = environment.max_component().max(1e-3);
        for l in &lights {
            peak = peak.max(Vec3::from_array(l.intensity).max_component());
        }
        for o in &scene.objects {
            peak = peak.max(Vec3::from_array(o.material.emission).max_component());
        }
        let clamp = settings.firefly_clamp.unwrap_or(50.0 * peak);
        TraceCtx {
            scene,
            lights,
            environment,
            emission_scale,
            inv_poses,
            clamp,
            max_bounces: settings.max_bounces,
        }
    }

    fn intersect(&self, ray: &Ray, t_min: f32, t_max: f32) -> Option<SceneHit> {
        let mut best: Option<SceneHit> = None;
        let mut closest = t_max;
        for (i, obj) in self.scene.objects.iter().enumerate() {
            let (inv, scale) = &self.inv_poses[i];
            let local = Ray {
                origin: inv.transform_point(ray.origin) / *scale,
                dir: inv.transform_dir(ray.dir),
            };
            if let Some(h) = obj.mesh.bvh.intersect(&local, t_min / scale, closest / scale) {
                let t_world = h.t * scale;
                if t_world < closest {
                    closest = t_world;
                    best = Some(SceneHit {
                        t: t_world,
                        obj: i,
                        tri: h.tri,
                        u: h.u,
                        v: h.v,
                    });
                }
            }
        }
        best
    }

    fn occluded(&self, ray: &Ray, t_min: f32, t_max: f32) -> bool {
        for (i, obj) in self.scene.objects.iter().enumerate() {
            let (inv, scale) = &self.inv_poses[i];
            let local = Ray {
                origin: inv.transform_point(ray.origin) / *scale,
                dir: inv.transform_dir(ray.dir),
            };
            if obj
                .mesh
                .bvh
                .intersect_any(&local, t_min / scale, t_max / scale)
            {
                return true;
            }
        }
        false
    }

    fn radiance(&self, mut ray: Ray, rng: &mut ChaCha8Rng) -> Vec3 {
        let mut throughput = Vec3::ONE;
        let mut acc = Vec3::ZERO;
        for bounce in 0..=self.max_bounces {
            let hit = match self.intersect(&ray, 1e-4, f32::MAX) {
                Some(h) => h,
                None => {
                    acc += throughput * self.environment;
                    break;
                }
            };
            let obj = &self.scene.objects[hit.obj];
            let mat = &obj.material;
            let p = ray.origin + ray.dir * hit.t;
            let n_local = obj.mesh.shading_normal(hit.tri as usize, hit.u, hit.v);
            let ng_local = obj.mesh.geometric_normal(hit.tri as usize);
            let n = obj.pose.transform_dir(n_local).normalized();
            let ng = obj.pose.transform_dir(ng_local).normalized();
            let uv = obj.mesh.uv(hit.tri as usize, hit.u, hit.v);
            let wo = -ray.dir;

            let emission = Vec3::from_array(mat.emission) * self.emission_scale;
            if emission.max_component() > 0.0 {
                acc += throughput * emission;
            }

            // next-event estimation over every light
            for lsrc in &self.lights {
                if let Some(ls) = light_contribution(lsrc, p, rng) {
                    if ls.radiance.max_component() <= 0.0 {
                        continue;
                    }
                    let f = eval_bsdf(mat, ls.wi, wo, n, uv);
                    if f.max_component() <= 0.0 {
                        continue;
                    }
                    let offset = ng * 1e-4 * ls.wi.dot(ng).signum();
                    let sray = Ray {
                        origin: p + offset,
                        dir: ls.wi,
                    };
                    let tmax = if ls.dist == f32::MAX {
                        f32::MAX
                    } else {
                        ls.dist - 1e-3
                    };
                    if !self.occluded(&sray, 1e-4, tmax) {
                        acc += throughput * f * ls.radiance * n.dot(ls.wi).abs();
                    }
                }
            }

            if bounce == self.max_bounces {
                break;
            }
            let sample = match sample_bsdf(mat, wo, n, uv, rng) {
                Some(s) if s.weight.max_component() > 0.0 => s,
                _ => break,
            };
            throughput *= sample.weight;

            // Russian roulette after bounce 3
            if bounce >= 3 {
                let p_survive = throughput.max_component().clamp(0.05, 1.0);
                if rng.gen::<f32>() >= p_survive {
                    break;
                }
                throughput = throughput / p_survive;
            }

            let offset = ng * 1e-4 * sample.wi.dot(ng).signum();
            ray = Ray {
                origin: p + offset,
                dir: sample.wi,
            };
        }
        acc.clamp_max(self.clamp)
    }
}

/// Render `cam`'s view of the scene. Returns a 3-channel image in `visible`
/// mode and the 1-channel R extraction in `ir` mode. Output is bit-identical
/// for a fixed (scene, settings) regardless of worker-thread count.
pub fn trace(scene: &Scene, cam: &CameraModel, settings: &RenderSettings) -> ImageF {
    let ctx = TraceCtx::new(scene, settings);
    let w = cam.width;
    let h = cam.height;
    let ts = settings.tile_size.max(1);
    let tiles_x = w.div_ceil(ts);
    let tiles_y = h.div_ceil(ts);
    let n_tiles = tiles_x * tiles_y;
    let spp = settings.spp.max(1);

    let tile_results: Vec<(usize, Vec<Vec3>)> = (0..n_tiles)
        .into_par_iter()
        .map(|tile| {
            let tx = (tile % tiles_x) * ts;
            let ty = (tile / tiles_x) * ts;
            let tw = ts.min(w - tx);
            let th = ts.min(h - ty);
            let mut rng = rng_for(settings.seed, tile as u64);
            let mut buf = vec![Vec3::ZERO; tw * th];
            for py in 0..th {
                for px in 0..tw {
                    let mut sum = [0.0f64; 3];
                    for _ in 0..spp {
                        let jx: f32 = rng.gen();
                        let jy: f32 = rng.gen();
                        let (origin, dir) = cam.primary_ray(tx + px, ty + py, jx, jy);
                        let l = ctx.radiance(Ray { origin, dir }, &mut rng);
                        sum[0] += l.x as f64;
                        sum[1] += l.y as f64;
                        sum[2] += l.z as f64;
                    }
                    buf[py * tw + px] = vec3(
                        (sum[0] / spp as f64) as f32,
                        (sum[1] / spp as f64) as f32,
                        (sum[2] / spp as f64) as f32,
                    );
                }
            }
            (tile, buf)
        })
        .collect();

    let mut rgb = ImageF::new(w, h, 3);
    for (tile, buf) in tile_results {
        let tx = (tile % tiles_x) * ts;
        let ty = (tile / tiles_x) * ts;
        let tw = ts.min(w - tx);
        let th = ts.min(h - ty);
        for py in 0..th {
            for px in 0..tw {
                let v = buf[py * tw + px];
                rgb.set(tx + px, ty + py, 0, v.x);
                rgb.set(tx + px, ty + py, 1, v.y);
                rgb.set(tx + px, ty + py, 2, v.z);
            }
        }
    }

    let mut out = match settings.spectrum {
        Spectrum::Visible => rgb,
        Spectrum::Ir => rgb.channel(0),
    };
    if settings.median_prefilter {
        out = median_prefilter3(&out);
    }
    out
}

/// Render the two IR views with seeds derived from `seed` and identical
/// exposure scale.
pub fn render_ir_pair(scene: &Scene, settings: &RenderSettings) -> (ImageF, ImageF) {
    let mut left_cfg = settings.clone();
    left_cfg.spectrum = Spectrum::Ir;
    left_cfg.seed = splitmix64(settings.seed ^ 0x1ef7);
    let mut right_cfg = left_cfg.clone();
    right_cfg.seed = splitmix64(settings.seed ^ 0x2a3d);
    let left = trace(scene, &scene.rig.ir_left, &left_cfg);
    let right = trace(scene, &scene.rig.ir_right, &right_cfg);
    (left, right)
}

/// Quantize a float intensity image: clamp(round(img * exposure * 255)).
pub fn quantize_ir(img: &ImageF, exposure: f32) -> ImageU8 {
    img.to_u8_scaled(exposure * 255.0)
}

/// Exact z-depth of primary rays through pixel centers; misses are INVALID.
pub fn depth_pass(scene: &Scene, cam: &CameraModel) -> ImageF {
    let ctx = TraceCtx::new(
        scene,
        &RenderSettings {
            spp: 1,
            ..Default::default()
        },
    );
    let forward = cam.forward();
    let mut out = ImageF::new(cam.width, cam.height, 1);
    let rows: Vec<Vec<f32>> = (0..cam.height)
        .into_par_iter()
        .map(|y| {
            let mut row = vec![INVALID; cam.width];
            for (x, r) in row.iter_mut().enumerate() {
                let (origin, dir) = cam.primary_ray(x, y, 0.5, 0.5);
                if let Some(hit) = ctx.intersect(&Ray { origin, dir }, 1e-4, f32::MAX) {
                    *r = hit.t * dir.dot(forward);
                }
            }
            row
        })
        .collect();
    for (y, row) in rows.into_iter().enumerate() {
        for (x, v) in row.into_iter().enumerate() {
            out.set(x, y, 0, v);
        }
    }
    out
}

/// 3x3 median filter per channel; borders use the in-bounds neighborhood.
pub fn median_prefilter3(img: &ImageF) -> ImageF {
    let mut out = ImageF::new(img.width(), img.height(), img.channels());
    let w = img.width() as isize;
    let h = img.height() as isize;
    for y in 0..h {
        for x in 0..w {
            for c in 0..img.channels() {
                let mut vals = [0.0f32; 9];
                let mut n = 0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (xx, yy) = (x + dx, y + dy);
                        if xx >= 0 && xx < w && yy >= 0 && yy < h {
                            vals[n] = img.get(xx as usize, yy as usize, c);
                            n += 1;
                        }
                    }
                }
                vals[..n].sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                out.set(x as usize, y as usize, c, vals[(n - 1) / 2]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{
        default_rig, make_icosphere, make_quad, PbrMaterial, Scene, SceneObject,
    };
    use std::sync::Arc;

    pub(crate) fn empty_scene() -> Scene {
        Scene {
            objects: Vec::new(),
            lights: Vec::new(),
            rig: default_rig(32, 24, 30.0, 0.04),
            environment: [0.0; 3],
            desc: None,
        }
    }

    pub(crate) fn wall_scene(width: usize, height: usize, fx: f32, z: f32) -> Scene {
        let mut scene = empty_scene();
        scene.rig = default_rig(width, height, fx, 0.055);
        let mesh = Arc::new(make_quad(4.0));
        scene.objects.push(SceneObject {
            name: "wall".into(),
            mesh,
            mesh_name: "wall".into(),
            material: PbrMaterial {
                base_color: [0.8, 0.8, 0.8],
                roughness: 0.9,
                ..Default::default()
            },
            material_name: "diffuse".into(),
            pose: crate::math::Pose::from_translation(vec3(0.0, 0.0, z)),
            scale: 1.0,
        });
        scene
    }

    #[test]
    fn empty_scene_returns_ambient() {
        let mut scene = empty_scene();
        scene.rig.ir_ambient = 0.125;
        scene.rig.visible_attenuation = 0.05;
        let img = trace(
            &scene,
            &scene.rig.ir_left,
            &RenderSettings {
                spp: 2,
                spectrum: Spectrum::Ir,
                ..Default::default()
            },
        );
        for &v in img.data() {
            assert!((v - 0.125).abs() < 1e-6);
        }
    }

    #[test]
    fn white_furnace_small() {
        // albedo-1 sphere inside a uniform environment: every pixel equals
        // the environment radiance
        let mut scene = empty_scene();
        scene.environment = [0.7, 0.7, 0.7];
        scene.objects.push(SceneObject {
            name: "ball".into(),
            mesh: Arc::new(make_icosphere(0.3, 2)),
            mesh_name: "ball".into(),
            material: PbrMaterial {
                base_color: [1.0, 1.0, 1.0],
                roughness: 1.0,
                metallic: 0.0,
                transmission: 0.0,
                specular: 0.0,
                ..Default::default()
            },
            material_name: "white".into(),
            pose: Pose::from_translation(vec3(0.0, 0.0, 1.0)),
            scale: 1.0,
        });
        let img = trace(
            &scene,
            &scene.rig.ir_left,
            &RenderSettings {
                spp: 64,
                seed: 5,
                ..Default::default()
            },
        );
        let mean = img.mean();
        assert!(
            (mean - 0.7).abs() / 0.7 < 0.02,
            "furnace mean {mean} vs 0.7"
        );
    }

    #[test]
    fn trace_deterministic_across_thread_counts() {
        let scene = wall_scene(64, 48, 60.0, 1.0);
        let settings = RenderSettings {
            spp: 4,
            seed: 11,
            spectrum: Spectrum::Ir,
            ..Default::default()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| trace(&scene, &scene.rig.ir_left, &settings))
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn spp_means_agree() {
        let scene = wall_scene(48, 36, 40.0, 1.0);
        let s1 = RenderSettings {
            spp: 1,
            seed: 3,
            spectrum: Spectrum::Ir,
            ..Default::default()
        };
        let s64 = RenderSettings {
            spp: 64,
            ..s1.clone()
        };
        let a = trace(&scene, &scene.rig.ir_left, &s1);
        let b = trace(&scene, &scene.rig.ir_left, &s64);
        assert_ne!(a.data(), b.data());
        let (ma, mb) = (a.mean(), b.mean());
        assert!(
            (ma - mb).abs() / mb.max(1e-9) < 0.05,
            "spp=1 mean {ma} vs spp=64 mean {mb}"
        );
    }

    #[test]
    fn quantize_edges() {
        let img = ImageF::from_vec(3, 1, 1, vec![0.5, 0.0, 2.0]).unwrap();
        let q = quantize_ir(&img, 1.0);
        assert_eq!(q.data(), &[128, 0, 255]);
        let img2 = ImageF::from_vec(1, 1, 1, vec![0.5]).unwrap();
        assert_eq!(quantize_ir(&img2, 2.0).get(0, 0, 0), 255);
    }

    #[test]
    fn depth_pass_flat_wall() {
        let scene = wall_scene(64, 48, 60.0, 1.25);
        let d = depth_pass(&scene, &scene.rig.ir_left);
        let center = d.get(32, 24, 0);
        assert!((center - 1.25).abs() < 1e-4, "depth {center}");
        // wall is 4 m wide at 1.25 m: the 64x48 fov is fully covered
        assert_eq!(d.count_valid(), 64 * 48);
    }

    #[test]
    fn dot_pattern_density_visible_on_wall() {
        // bright-pixel fraction tracks the pattern dot density; the pattern
        // is coarse enough that the camera resolves individual texels
        let mut scene = wall_scene(128, 96, 240.0, 1.0);
        let density = 0.5;
        scene.rig.projector.pattern = Some(Arc::new(
            crate::scene::pattern::bernoulli_pattern(64, 64, density, 3),
        ));
        scene.rig.projector.intensity = [3.0, 3.0, 3.0];
        scene.rig.ir_ambient = 0.0;
        let img = trace(
            &scene,
            &scene.rig.ir_left,
            &RenderSettings {
                spp: 16,
                seed: 9,
                spectrum: Spectrum::Ir,
                ..Default::default()
            },
        );
        // histogram is bimodal: threshold midway between the two modes
        let mut sorted: Vec<f32> = img.data().to_vec();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let dark = sorted[sorted.len() / 10];
        let brightmode = sorted[sorted.len() * 9 / 10];
        assert!(
            brightmode > 5.0 * dark.max(1e-6),
            "histogram not bimodal: p10 {dark}, p90 {brightmode}"
        );
        let thresh = (dark + brightmode) / 2.0;
        let mid_band = img
            .data()
            .iter()
            .filter(|&&v| v > dark + 0.25 * (brightmode - dark) && v < brightmode - 0.25 * (brightmode - dark))
            .count() as f32
            / img.data().len() as f32;
        assert!(mid_band < 0.3, "too much mass between modes: {mid_band}");
        let bright = img.data().iter().filter(|&&v| v > thresh).count() as f32
            / img.data().len() as f32;
        assert!(
            (bright - density).abs() < 0.05,
            "bright fraction {bright} vs density {density}"
        );
    }
}
