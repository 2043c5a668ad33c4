//! World description: meshes, PBR materials, lights, and the stereo sensor rig.
//!
//! A `Scene` is immutable after load and safe to share read-only across
//! renderer and matcher workers.

mod desc;
mod obj;
pub mod pattern;

pub use desc::{load_scene, save_scene};
pub use obj::{read_obj, write_obj};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::img::ImageF;
use crate::math::{vec3, Pose, Vec3};
use crate::render::bvh::Bvh;

/// Disney-style PBR material subset.
#[derive(Clone, Debug, PartialEq)]
pub struct PbrMaterial {
    pub base_color: [f32; 3],
    pub base_color_texture: Option<Arc<ImageF>>,
    pub metallic: f32,
    pub specular: f32,
    pub roughness: f32,
    pub ior: f32,
    pub transmission: f32,
    pub emission: [f32; 3],
}

impl Default for PbrMaterial {
    fn default() -> Self {
        PbrMaterial {
            base_color: [0.8, 0.8, 0.8],
            base_color_texture: None,
            metallic: 0.0,
            specular: 0.5,
            roughness: 0.5,
            ior: 1.45,
            transmission: 0.0,
            emission: [0.0, 0.0, 0.0],
        }
    }
}

impl PbrMaterial {
    /// Diffuse lobe weight w_d = (1 - metallic) * (1 - transmission).
    pub fn diffuse_weight(&self) -> f32 {
        (1.0 - self.metallic) * (1.0 - self.transmission)
    }

    pub fn base_color_at(&self, uv: Option<[f32; 2]>) -> Vec3 {
        match (&self.base_color_texture, uv) {
            (Some(tex), Some([u, v])) => {
                if tex.channels() == 3 {
                    vec3(
                        tex.sample_nearest(u, v, 0),
                        tex.sample_nearest(u, v, 1),
                        tex.sample_nearest(u, v, 2),
                    )
                } else {
                    Vec3::splat(tex.sample_nearest(u, v, 0))
                }
            }
            _ => Vec3::from_array(self.base_color),
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let unit = |field: &str, v: f32| -> Result<()> {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                Err(Error::invariant(
                    field,
                    format!("material '{name}': value {v} outside [0,1]"),
                ))
            } else {
                Ok(())
            }
        };
        for (i, c) in self.base_color.iter().enumerate() {
            unit(&format!("base_color[{i}]"), *c)?;
        }
        unit("metallic", self.metallic)?;
        unit("specular", self.specular)?;
        unit("roughness", self.roughness)?;
        unit("transmission", self.transmission)?;
        if !(self.ior >= 1.0) || !self.ior.is_finite() {
            return Err(Error::invariant(
                "ior",
                format!("material '{name}': ior {} must be >= 1", self.ior),
            ));
        }
        for (i, e) in self.emission.iter().enumerate() {
            if *e < 0.0 || !e.is_finite() {
                return Err(Error::invariant(
                    &format!("emission[{i}]"),
                    format!("material '{name}': emission must be >= 0"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LightKind {
    Point,
    Directional,
    Spot,
    Area,
    TexturedSpot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PatternFilter {
    #[default]
    Nearest,
    Bilinear,
}

/// A light source. Spot kinds emit inside a cone of half-angle `fov` about the
/// local +z axis; `textured_spot` additionally attenuates by a grayscale
/// pattern texture. `size` is the edge length of area emitters.
#[derive(Clone, Debug)]
pub struct LightSource {
    pub kind: LightKind,
    pub pose: Pose,
    pub intensity: [f32; 3],
    pub pattern: Option<Arc<ImageF>>,
    pub fov: f32,
    pub size: f32,
    pub filter: PatternFilter,
}

impl Default for LightSource {
    fn default() -> Self {
        LightSource {
            kind: LightKind::Point,
            pose: Pose::IDENTITY,
            intensity: [1.0, 1.0, 1.0],
            pattern: None,
            fov: 0.5,
            size: 0.1,
            filter: PatternFilter::Nearest,
        }
    }
}

impl LightSource {
    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.intensity.iter().enumerate() {
            if *v < 0.0 || !v.is_finite() {
                return Err(Error::invariant(
                    &format!("intensity[{i}]"),
                    "light intensity must be >= 0",
                ));
            }
        }
        match self.kind {
            LightKind::TexturedSpot => {
                let pat = self.pattern.as_ref().ok_or_else(|| {
                    Error::invariant("pattern", "textured_spot light requires a pattern")
                })?;
                if pat.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::invariant("pattern", "pattern values must be in [0,1]"));
                }
            }
            LightKind::Spot => {
                if !(self.fov > 0.0 && self.fov < std::f32::consts::FRAC_PI_2) {
                    return Err(Error::invariant("fov", "spot half-angle must be in (0, pi/2)"));
                }
            }
            _ => {}
        }
        if self.kind == LightKind::TexturedSpot
            && !(self.fov > 0.0 && self.fov < std::f32::consts::FRAC_PI_2)
        {
            return Err(Error::invariant("fov", "spot half-angle must be in (0, pi/2)"));
        }
        Ok(())
    }

    pub fn forward(&self) -> Vec3 {
        self.pose.rot * Vec3::Z
    }
}

/// Pinhole camera. The camera frame is x-right, y-down, z-forward; `pose`
/// maps camera coordinates to world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    pub fx: f32,
    pub fy: f32,
    pub cx: f32,
    pub cy: f32,
    pub pose: Pose,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invariant("fx/fy", "focal lengths must be > 0"));
        }
        if !(0.0 <= self.cx && self.cx < self.width as f32) {
            return Err(Error::invariant("cx", "principal point outside image"));
        }
        if !(0.0 <= self.cy && self.cy < self.height as f32) {
            return Err(Error::invariant("cy", "principal point outside image"));
        }
        Ok(())
    }

    /// World-space ray through pixel (x + jx, y + jy), jitter in [0,1).
    pub fn primary_ray(&self, x: usize, y: usize, jx: f32, jy: f32) -> (Vec3, Vec3) {
        let dx = (x as f32 + jx - self.cx) / self.fx;
        let dy = (y as f32 + jy - self.cy) / self.fy;
        let dir = self.pose.rot * vec3(dx, dy, 1.0).normalized();
        (self.pose.t, dir.normalized())
    }

    /// Project a camera-space point; returns pixel coordinates and depth.
    pub fn project(&self, p_cam: Vec3) -> Option<(f32, f32, f32)> {
        if p_cam.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
            p_cam.z,
        ))
    }

    /// Unproject pixel (x, y) at depth z into camera space.
    pub fn unproject(&self, x: f32, y: f32, z: f32) -> Vec3 {
        vec3((x - self.cx) / self.fx * z, (y - self.cy) / self.fy * z, z)
    }

    pub fn forward(&self) -> Vec3 {
        self.pose.rot * Vec3::Z
    }
}

/// Sensor head: two IR cameras, an RGB camera and the dot projector.
#[derive(Clone, Debug)]
pub struct SensorRig {
    pub ir_left: CameraModel,
    pub ir_right: CameraModel,
    pub rgb: CameraModel,
    pub projector: LightSource,
    pub baseline: f32,
    pub ir_ambient: f32,
    pub visible_attenuation: f32,
    pub exposure: f32,
}

pub const DEFAULT_VISIBLE_ATTENUATION: f32 = 0.05;

/// The simulated rig is born rectified: identical IR intrinsics with a pure
/// x-translation of `baseline` between the optical centers.
pub fn validate_rig(rig: &SensorRig) -> Result<()> {
    rig.ir_left.validate()?;
    rig.ir_right.validate()?;
    rig.rgb.validate()?;
    rig.projector.validate()?;
    if rig.projector.kind != LightKind::TexturedSpot {
        return Err(Error::invariant("projector", "projector must be a textured_spot"));
    }
    if !(rig.baseline > 0.0) {
        return Err(Error::invariant("baseline", "degenerate baseline"));
    }
    let l = &rig.ir_left;
    let r = &rig.ir_right;
    if l.width != r.width
        || l.height != r.height
        || l.fx != r.fx
        || l.fy != r.fy
        || l.cx != r.cx
        || l.cy != r.cy
    {
        return Err(Error::invariant(
            "ir_right",
            "IR cameras not rectified: intrinsics differ",
        ));
    }
    let tol = 1e-5;
    for i in 0..3 {
        for j in 0..3 {
            if (l.pose.rot.m[i][j] - r.pose.rot.m[i][j]).abs() > tol {
                return Err(Error::invariant(
                    "ir_right",
                    "IR cameras not rectified: rotations differ",
                ));
            }
        }
    }
    // offset expressed in the left camera frame must be (baseline, 0, 0)
    let off = l.pose.rot.transpose() * (r.pose.t - l.pose.t);
    if (off.x - rig.baseline).abs() > 1e-5 * rig.baseline.max(1.0)
        || off.y.abs() > tol
        || off.z.abs() > tol
    {
        return Err(Error::invariant(
            "ir_right",
            format!(
                "IR cameras not rectified: offset ({}, {}, {}) is not a pure x-baseline",
                off.x, off.y, off.z
            ),
        ));
    }
    if !(rig.visible_attenuation >= 0.0) {
        return Err(Error::invariant("visible_attenuation", "must be >= 0"));
    }
    if !(rig.ir_ambient >= 0.0) {
        return Err(Error::invariant("ir_ambient", "must be >= 0"));
    }
    if !(rig.exposure > 0.0) {
        return Err(Error::invariant("exposure", "must be > 0"));
    }
    Ok(())
}

/// Triangle mesh with optional per-corner normals and UVs, plus its BVH.
#[derive(Debug)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub tris: Vec<[u32; 3]>,
    pub corner_normals: Option<Vec<[Vec3; 3]>>,
    pub corner_uvs: Option<Vec<[[f32; 2]; 3]>>,
    pub bvh: Bvh,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.tris == other.tris
            && self.corner_normals == other.corner_normals
            && self.corner_uvs == other.corner_uvs
    }
}

impl Mesh {
    pub fn build(
        vertices: Vec<Vec3>,
        tris: Vec<[u32; 3]>,
        corner_normals: Option<Vec<[Vec3; 3]>>,
        corner_uvs: Option<Vec<[[f32; 2]; 3]>>,
    ) -> Result<Mesh> {
        for (ti, t) in tris.iter().enumerate() {
            for &v in t {
                if v as usize >= vertices.len() {
                    return Err(Error::invariant(
                        "indices",
                        format!("triangle {ti} references vertex {v} out of range"),
                    ));
                }
            }
        }
        if let Some(n) = &corner_normals {
            if n.len() != tris.len() {
                return Err(Error::invariant("normals", "normal count != triangle count"));
            }
        }
        if let Some(u) = &corner_uvs {
            if u.len() != tris.len() {
                return Err(Error::invariant("uvs", "uv count != triangle count"));
            }
        }
        for (ti, t) in tris.iter().enumerate() {
            let e1 = vertices[t[1] as usize] - vertices[t[0] as usize];
            let e2 = vertices[t[2] as usize] - vertices[t[0] as usize];
            if e1.cross(e2).length_squared() <= 0.0 {
                return Err(Error::invariant(
                    "triangles",
                    format!("triangle {ti} is degenerate (zero area)"),
                ));
            }
        }
        let bvh = Bvh::build(&vertices, &tris);
        Ok(Mesh {
            vertices,
            tris,
            corner_normals,
            corner_uvs,
            bvh,
        })
    }

    pub fn geometric_normal(&self, tri: usize) -> Vec3 {
        let t = self.tris[tri];
        let e1 = self.vertices[t[1] as usize] - self.vertices[t[0] as usize];
        let e2 = self.vertices[t[2] as usize] - self.vertices[t[0] as usize];
        e1.cross(e2).normalized()
    }

    /// Interpolated shading normal at barycentric (u, v) of `tri`.
    pub fn shading_normal(&self, tri: usize, u: f32, v: f32) -> Vec3 {
        match &self.corner_normals {
            Some(n) => {
                let [n0, n1, n2] = n[tri];
                (n0 * (1.0 - u - v) + n1 * u + n2 * v).normalized()
            }
            None => self.geometric_normal(tri),
        }
    }

    pub fn uv(&self, tri: usize, u: f32, v: f32) -> Option<[f32; 2]> {
        self.corner_uvs.as_ref().map(|uvs| {
            let [a, b, c] = uvs[tri];
            let w = 1.0 - u - v;
            [
                a[0] * w + b[0] * u + c[0] * v,
                a[1] * w + b[1] * u + c[1] * v,
            ]
        })
    }
}

/// A placed mesh instance.
#[derive(Clone, Debug)]
pub struct SceneObject {
    pub name: String,
    pub mesh: Arc<Mesh>,
    pub mesh_name: String,
    pub material: PbrMaterial,
    pub material_name: String,
    pub pose: Pose,
    pub scale: f32,
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub lights: Vec<LightSource>,
    pub rig: SensorRig,
    /// Constant environment radiance returned by escaped rays (visible spectrum).
    pub environment: [f32; 3],
    /// Retained description for serialization; None for scenes built in code.
    pub(crate) desc: Option<desc::SceneDesc>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        validate_rig(&self.rig)?;
        for obj in &self.objects {
            obj.material.validate(&obj.material_name)?;
            if !(obj.scale > 0.0) {
                return Err(Error::invariant("scale", "object scale must be > 0"));
            }
        }
        for light in &self.lights {
            light.validate()?;
        }
        for e in &self.environment {
            if *e < 0.0 || !e.is_finite() {
                return Err(Error::invariant("environment", "must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Canonical rig: D415-like geometry looking down +z from the origin.
pub fn default_rig(width: usize, height: usize, fx: f32, baseline: f32) -> SensorRig {
    let cam = CameraModel {
        width,
        height,
        fx,
        fy: fx,
        cx: (width as f32 - 1.0) / 2.0,
        cy: (height as f32 - 1.0) / 2.0,
        pose: Pose::IDENTITY,
    };
    let mut right = cam;
    right.pose = Pose::from_translation(vec3(baseline, 0.0, 0.0));
    let projector = LightSource {
        kind: LightKind::TexturedSpot,
        pose: Pose::from_translation(vec3(baseline / 2.0, 0.0, 0.0)),
        intensity: [3.0, 3.0, 3.0],
        pattern: Some(Arc::new(pattern::bernoulli_pattern(512, 512, 0.2, 7))),
        fov: 0.55,
        size: 0.0,
        filter: PatternFilter::Nearest,
    };
    SensorRig {
        ir_left: cam,
        ir_right: right,
        rgb: cam,
        projector,
        baseline,
        ir_ambient: 0.01,
        visible_attenuation: DEFAULT_VISIBLE_ATTENUATION,
        exposure: 1.0,
    }
}

/// Unit quad in the xy plane centered at the origin, facing -z toward the
/// canonical rig; size is the full edge length.
pub fn make_quad(size: f32) -> Mesh {
    let h = size / 2.0;
    let vertices = vec![
        vec3(-h, -h, 0.0),
        vec3(h, -h, 0.0),
        vec3(h, h, 0.0),
        vec3(-h, h, 0.0),
    ];
    // wound so the geometric normal points toward -z (toward a camera at z<0)
    let tris = vec![[0u32, 2, 1], [0, 3, 2]];
    let n = vec3(0.0, 0.0, -1.0);
    let normals = vec![[n; 3]; 2];
    let uvs = vec![
        [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0]],
        [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
    ];
    Mesh::build(vertices, tris, Some(normals), Some(uvs)).expect("quad is valid")
}

/// Icosphere with `subdiv` subdivision levels.
pub fn make_icosphere(radius: f32, subdiv: usize) -> Mesh {
    let phi = (1.0 + 5.0f32.sqrt()) / 2.0;
    let mut verts = vec![
        vec3(-1.0, phi, 0.0),
        vec3(1.0, phi, 0.0),
        vec3(-1.0, -phi, 0.0),
        vec3(1.0, -phi, 0.0),
        vec3(0.0, -1.0, phi),
        vec3(0.0, 1.0, phi),
        vec3(0.0, -1.0, -phi),
        vec3(0.0, 1.0, -phi),
        vec3(phi, 0.0, -1.0),
        vec3(phi, 0.0, 1.0),
        vec3(-phi, 0.0, -1.0),
        vec3(-phi, 0.0, 1.0),
    ];
    for v in &mut verts {
        *v = v.normalized();
    }
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut cache = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        for t in &tris {
            let mid = |cache: &mut std::collections::HashMap<(u32, u32), u32>,
                       verts: &mut Vec<Vec3>,
                       a: u32,
                       b: u32| {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let m = ((verts[a as usize] + verts[b as usize]) * 0.5).normalized();
                    verts.push(m);
                    (verts.len() - 1) as u32
                })
            };
            let ab = mid(&mut cache, &mut verts, t[0], t[1]);
            let bc = mid(&mut cache, &mut verts, t[1], t[2]);
            let ca = mid(&mut cache, &mut verts, t[2], t[0]);
            next.push([t[0], ab, ca]);
            next.push([t[1], bc, ab]);
            next.push([t[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        tris = next;
    }
    let normals: Vec<[Vec3; 3]> = tris
        .iter()
        .map(|t| [verts[t[0] as usize], verts[t[1] as usize], verts[t[2] as usize]])
        .collect();
    let vertices: Vec<Vec3> = verts.iter().map(|&v| v * radius).collect();
    Mesh::build(vertices, tris, Some(normals), None).expect("icosphere is valid")
}

/// Axis-aligned box centered at origin, normals pointing inward when
/// `inward` (an enclosure), outward otherwise.
pub fn make_box(size: f32, inward: bool) -> Mesh {
    let h = size / 2.0;
    let mut vertices = Vec::new();
    let mut tris: Vec<[u32; 3]> = Vec::new();
    let faces = [
        (Vec3::X, Vec3::Y, Vec3::Z),
        (-Vec3::X, Vec3::Z, Vec3::Y),
        (Vec3::Y, Vec3::Z, Vec3::X),
        (-Vec3::Y, Vec3::X, Vec3::Z),
        (Vec3::Z, Vec3::X, Vec3::Y),
        (-Vec3::Z, Vec3::Y, Vec3::X),
    ];
    for (n, u, v) in faces {
        let base = vertices.len() as u32;
        let c = n * h;
        vertices.push(c - u * h - v * h);
        vertices.push(c + u * h - v * h);
        vertices.push(c + u * h + v * h);
        vertices.push(c - u * h + v * h);
        if inward {
            tris.push([base, base + 2, base + 1]);
            tris.push([base, base + 3, base + 2]);
        } else {
            tris.push([base, base + 1, base + 2]);
            tris.push([base, base + 2, base + 3]);
        }
    }
    Mesh::build(vertices, tris, None, None).expect("box is valid")
}
