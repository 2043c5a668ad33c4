//! Structured-text scene files (TOML) and their resolution into `Scene`.
//!
//! Lengths are meters, angles radians, colors linear in [0,1]. Asset paths
//! are resolved relative to the scene file and stored absolute so a saved
//! scene reloads from anywhere.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::img::{read_pfm, read_pnm, ImageF};
use crate::math::{Mat3, Pose, Vec3};
use crate::scene::{
    pattern, CameraModel, LightKind, LightSource, PatternFilter, PbrMaterial, Scene, SceneObject,
    SensorRig, DEFAULT_VISIBLE_ATTENUATION,
};

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub(crate) struct PoseDesc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<[f32; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rpy: Option<[f32; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub look_at: Option<[f32; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub up: Option<[f32; 3]>,
}

impl PoseDesc {
    fn resolve(&self) -> Pose {
        let t = Vec3::from_array(self.position.unwrap_or([0.0; 3]));
        if let Some(target) = self.look_at {
            let up = Vec3::from_array(self.up.unwrap_or([0.0, -1.0, 0.0]));
            return Pose::look_at(t, Vec3::from_array(target), up);
        }
        let rot = match self.rpy {
            Some([r, p, y]) => Mat3::from_rpy(r, p, y),
            None => Mat3::IDENTITY,
        };
        Pose::new(rot, t)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub(crate) enum PatternDesc {
    Path(String),
    Procedural {
        width: usize,
        height: usize,
        density: f32,
        seed: u64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub(crate) struct MeshDesc {
    pub name: String,
    pub path: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub(crate) struct MaterialDesc {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_color: Option<[f32; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_color_texture: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metallic: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub specular: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roughness: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ior: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transmission: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emission: Option<[f32; 3]>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub(crate) struct ObjectDesc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mesh: String,
    pub material: String,
    #[serde(flatten)]
    pub pose: PoseDesc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f32>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub(crate) struct LightDesc {
    pub kind: String,
    #[serde(flatten)]
    pub pose: PoseDesc,
    pub intensity: [f32; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternDesc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fov: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub(crate) struct ProjectorDesc {
    #[serde(flatten)]
    pub pose: PoseDesc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity: Option<[f32; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fov: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternDesc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub(crate) struct RgbCameraDesc {
    #[serde(flatten)]
    pub pose: PoseDesc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fx: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fy: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cx: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cy: Option<f32>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub(crate) struct RigDesc {
    pub width: usize,
    pub height: usize,
    pub fx: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fy: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cx: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cy: Option<f32>,
    pub baseline: f32,
    #[serde(flatten)]
    pub pose: PoseDesc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ir_ambient: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visible_attenuation: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exposure: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projector: Option<ProjectorDesc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rgb: Option<RgbCameraDesc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub(crate) struct SceneDesc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub environment: Option<[f32; 3]>,
    #[serde(default)]
    pub meshes: Vec<MeshDesc>,
    #[serde(default)]
    pub materials: Vec<MaterialDesc>,
    #[serde(default)]
    pub objects: Vec<ObjectDesc>,
    #[serde(default)]
    pub lights: Vec<LightDesc>,
    pub rig: RigDesc,
}

fn resolve_asset(base: &Path, rel: &str) -> Result<PathBuf> {
    let p = PathBuf::from(rel);
    let abs = if p.is_absolute() { p } else { base.join(p) };
    if !abs.exists() {
        return Err(Error::MissingAsset(abs));
    }
    Ok(abs)
}

fn load_texture(path: &Path) -> Result<ImageF> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => read_pfm(path),
        _ => Ok(read_pnm(path)?.to_f32_unit()),
    }
}

fn resolve_pattern(desc: &PatternDesc, base: &Path) -> Result<(ImageF, PatternDesc)> {
    match desc {
        PatternDesc::Path(rel) => {
            let abs = resolve_asset(base, rel)?;
            let img = load_texture(&abs)?;
            let gray = if img.channels() == 3 { img.channel(0) } else { img };
            Ok((gray, PatternDesc::Path(abs.display().to_string())))
        }
        PatternDesc::Procedural {
            width,
            height,
            density,
            seed,
        } => Ok((
            pattern::bernoulli_pattern(*width, *height, *density, *seed),
            desc.clone(),
        )),
    }
}

fn parse_light_kind(s: &str) -> Result<LightKind> {
    Ok(match s {
        "point" => LightKind::Point,
        "directional" => LightKind::Directional,
        "spot" => LightKind::Spot,
        "area" => LightKind::Area,
        "textured_spot" => LightKind::TexturedSpot,
        _ => {
            return Err(Error::invariant(
                "kind",
                format!("unknown light kind '{s}'"),
            ))
        }
    })
}

fn parse_filter(s: Option<&str>) -> Result<PatternFilter> {
    Ok(match s {
        None | Some("nearest") => PatternFilter::Nearest,
        Some("bilinear") => PatternFilter::Bilinear,
        Some(other) => {
            return Err(Error::invariant(
                "filter",
                format!("unknown pattern filter '{other}'"),
            ))
        }
    })
}

const DEFAULT_PROJECTOR_FOV: f32 = 0.55;
const DEFAULT_PROJECTOR_INTENSITY: [f32; 3] = [3.0, 3.0, 3.0];

impl SceneDesc {
    pub(crate) fn resolve(mut self, base: &Path) -> Result<Scene> {
        let mut meshes: HashMap<String, (Arc<super::Mesh>, String)> = HashMap::new();
        for m in &mut self.meshes {
            let abs = resolve_asset(base, &m.path)?;
            let mesh = super::read_obj(&abs)?;
            m.path = abs.display().to_string();
            if meshes
                .insert(m.name.clone(), (Arc::new(mesh), m.path.clone()))
                .is_some()
            {
                return Err(Error::invariant(
                    "meshes",
                    format!("duplicate mesh name '{}'", m.name),
                ));
            }
        }

        let mut materials: HashMap<String, PbrMaterial> = HashMap::new();
        for m in &mut self.materials {
            let defaults = PbrMaterial::default();
            let texture = match &m.base_color_texture {
                Some(rel) => {
                    let abs = resolve_asset(base, rel)?;
                    m.base_color_texture = Some(abs.display().to_string());
                    Some(Arc::new(load_texture(&abs)?))
                }
                None => None,
            };
            let mat = PbrMaterial {
                base_color: m.base_color.unwrap_or(defaults.base_color),
                base_color_texture: texture,
                metallic: m.metallic.unwrap_or(defaults.metallic),
                specular: m.specular.unwrap_or(defaults.specular),
                roughness: m.roughness.unwrap_or(defaults.roughness),
                ior: m.ior.unwrap_or(defaults.ior),
                transmission: m.transmission.unwrap_or(defaults.transmission),
                emission: m.emission.unwrap_or(defaults.emission),
            };
            mat.validate(&m.name)?;
            if materials.insert(m.name.clone(), mat).is_some() {
                return Err(Error::invariant(
                    "materials",
                    format!("duplicate material name '{}'", m.name),
                ));
            }
        }

        let mut objects = Vec::new();
        for (i, o) in self.objects.iter().enumerate() {
            let (mesh, mesh_path) = meshes
                .get(&o.mesh)
                .cloned()
                .ok_or_else(|| Error::invariant("mesh", format!("unknown mesh '{}'", o.mesh)))?;
            let _ = mesh_path;
            let material = materials
                .get(&o.material)
                .cloned()
                .ok_or_else(|| {
                    Error::invariant("material", format!("unknown material '{}'", o.material))
                })?;
            objects.push(SceneObject {
                name: o.name.clone().unwrap_or_else(|| format!("{}_{i}", o.mesh)),
                mesh,
                mesh_name: o.mesh.clone(),
                material,
                material_name: o.material.clone(),
                pose: o.pose.resolve(),
                scale: o.scale.unwrap_or(1.0),
            });
        }

        let mut lights = Vec::new();
        for (li, l) in self.lights.iter_mut().enumerate() {
            let kind = parse_light_kind(&l.kind)?;
            let pattern = match &l.pattern {
                Some(p) => {
                    let (img, canonical) = resolve_pattern(p, base)?;
                    l.pattern = Some(canonical);
                    Some(Arc::new(img))
                }
                None => None,
            };
            if kind == LightKind::TexturedSpot && pattern.is_none() {
                return Err(Error::invariant(
                    "pattern",
                    format!("light {li}: textured_spot requires a pattern"),
                ));
            }
            lights.push(LightSource {
                kind,
                pose: l.pose.resolve(),
                intensity: l.intensity,
                pattern,
                fov: l.fov.unwrap_or(0.5),
                size: l.size.unwrap_or(0.1),
                filter: parse_filter(l.filter.as_deref())?,
            });
        }

        let rig = self.resolve_rig(base)?;
        let scene = Scene {
            objects,
            lights,
            rig,
            environment: self.environment.unwrap_or([0.0; 3]),
            desc: Some(self),
        };
        scene.validate()?;
        Ok(scene)
    }

    fn resolve_rig(&mut self, base: &Path) -> Result<SensorRig> {
        let r = &mut self.rig;
        let pose = r.pose.resolve();
        let left = CameraModel {
            width: r.width,
            height: r.height,
            fx: r.fx,
            fy: r.fy.unwrap_or(r.fx),
            cx: r.cx.unwrap_or((r.width as f32 - 1.0) / 2.0),
            cy: r.cy.unwrap_or((r.height as f32 - 1.0) / 2.0),
            pose,
        };
        let mut right = left;
        right.pose = pose * Pose::from_translation(Vec3::X * r.baseline);

        let proj_desc = r.projector.clone().unwrap_or_default();
        let proj_pose = if proj_desc.pose.position.is_some() || proj_desc.pose.look_at.is_some() {
            proj_desc.pose.resolve()
        } else {
            pose * Pose::from_translation(Vec3::X * (r.baseline / 2.0))
        };
        let pattern_desc = proj_desc.pattern.clone().unwrap_or(PatternDesc::Procedural {
            width: 512,
            height: 512,
            density: 0.2,
            seed: 7,
        });
        let (pattern_img, canonical) = resolve_pattern(&pattern_desc, base)?;
        let projector = LightSource {
            kind: LightKind::TexturedSpot,
            pose: proj_pose,
            intensity: proj_desc.intensity.unwrap_or(DEFAULT_PROJECTOR_INTENSITY),
            pattern: Some(Arc::new(pattern_img)),
            fov: proj_desc.fov.unwrap_or(DEFAULT_PROJECTOR_FOV),
            size: 0.0,
            filter: parse_filter(proj_desc.filter.as_deref())?,
        };
        let mut stored = proj_desc;
        stored.pattern = Some(canonical);
        r.projector = Some(stored);

        let rgb = match &r.rgb {
            Some(c) => CameraModel {
                width: c.width.unwrap_or(left.width),
                height: c.height.unwrap_or(left.height),
                fx: c.fx.unwrap_or(left.fx),
                fy: c.fy.unwrap_or(left.fy),
                cx: c.cx.unwrap_or(left.cx),
                cy: c.cy.unwrap_or(left.cy),
                pose: if c.pose.position.is_some() || c.pose.look_at.is_some() {
                    c.pose.resolve()
                } else {
                    left.pose
                },
            },
            None => left,
        };

        Ok(SensorRig {
            ir_left: left,
            ir_right: right,
            rgb,
            projector,
            baseline: r.baseline,
            ir_ambient: r.ir_ambient.unwrap_or(0.01),
            visible_attenuation: r
                .visible_attenuation
                .unwrap_or(DEFAULT_VISIBLE_ATTENUATION),
            exposure: r.exposure.unwrap_or(1.0),
        })
    }
}

/// Load and fully resolve a scene file, validating all invariants.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let desc: SceneDesc = toml::from_str(&text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            path: path.display().to_string(),
            line,
            msg: e.message().to_string(),
        }
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    desc.resolve(base)
}

/// Serialize a loaded scene back to a scene file. Asset paths were made
/// absolute at load time, so the file is location-independent.
pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    let desc = scene.desc.as_ref().ok_or_else(|| {
        Error::Config("scene was built in code and has no file description to save".into())
    })?;
    let text = toml::to_string_pretty(desc)
        .map_err(|e| Error::Config(format!("serialize scene: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
