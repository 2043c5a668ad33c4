//! BSDF evaluation and sampling.
//!
//! The surface response is a mix of a Lambertian diffuse term and a GGX
//! microfacet specular term, weighted by w_d = (1 - metallic)(1 - transmission).
//! The specular term covers reflection (Fresnel-Schlick, F0 from `specular`
//! and `ior` for dielectrics, from base color for metals) and, when
//! transmission > 0, GGX refraction through the interface.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::math::{onb, Vec3};
use crate::scene::PbrMaterial;

use std::f32::consts::PI;

/// Below this roughness the specular lobes degenerate to perfect mirrors.
pub const DELTA_ROUGHNESS: f32 = 1e-3;

/// Normal-incidence reflectance of a dielectric interface.
pub fn dielectric_f0(ior: f32) -> f32 {
    let r = (ior - 1.0) / (ior + 1.0);
    r * r
}

fn schlick(f0: Vec3, cos: f32) -> Vec3 {
    let m = (1.0 - cos).clamp(0.0, 1.0);
    let m5 = m * m * m * m * m;
    f0 + (Vec3::ONE - f0) * m5
}

fn schlick_scalar(f0: f32, cos: f32) -> f32 {
    let m = (1.0 - cos).clamp(0.0, 1.0);
    f0 + (1.0 - f0) * m * m * m * m * m
}

/// GGX normal distribution D(h); `cos_h` is n.h, alpha = roughness^2.
pub fn ggx_d(alpha: f32, cos_h: f32) -> f32 {
    if cos_h <= 0.0 {
        return 0.0;
    }
    let a2 = alpha * alpha;
    let c2 = cos_h * cos_h;
    let d = c2 * (a2 - 1.0) + 1.0;
    a2 / (PI * d * d)
}

/// Smith G1 for GGX.
fn ggx_g1(alpha: f32, cos: f32) -> f32 {
    if cos <= 0.0 {
        return 0.0;
    }
    let a2 = alpha * alpha;
    let c2 = cos * cos;
    let tan2 = (1.0 - c2).max(0.0) / c2;
    2.0 / (1.0 + (1.0 + a2 * tan2).sqrt())
}

fn ggx_g(alpha: f32, cos_i: f32, cos_o: f32) -> f32 {
    ggx_g1(alpha, cos_i.abs()) * ggx_g1(alpha, cos_o.abs())
}

/// Sample a microfacet normal from D(h) * cos(h) in the local frame of `n`.
pub fn sample_ggx_half(alpha: f32, n: Vec3, rng: &mut ChaCha8Rng) -> Vec3 {
    let u1: f32 = rng.gen();
    let u2: f32 = rng.gen();
    let tan2 = alpha * alpha * u1 / (1.0 - u1).max(1e-12);
    let cos_t = (1.0 / (1.0 + tan2)).sqrt();
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    let (t, b) = onb(n);
    (t * (sin_t * phi.cos()) + b * (sin_t * phi.sin()) + n * cos_t).normalized()
}

fn cosine_sample_hemisphere(n: Vec3, rng: &mut ChaCha8Rng) -> (Vec3, f32) {
    let u1: f32 = rng.gen();
    let u2: f32 = rng.gen();
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    let (t, b) = onb(n);
    let z = (1.0 - u1).max(0.0).sqrt();
    let dir = (t * (r * phi.cos()) + b * (r * phi.sin()) + n * z).normalized();
    (dir, (z / PI).max(1e-9))
}

/// Refract `w` about `h`; eta is n_incident / n_transmitted. None on TIR.
fn refract(w: Vec3, h: Vec3, eta: f32) -> Option<Vec3> {
    let cos_i = w.dot(h);
    let sin2_t = eta * eta * (1.0 - cos_i * cos_i).max(0.0);
    if sin2_t >= 1.0 {
        return None;
    }
    let cos_t = (1.0 - sin2_t).sqrt();
    Some((-w * eta + h * (eta * cos_i - cos_t)).normalized())
}

struct LobeWeights {
    diffuse: f32,
    reflect: f32,
    transmit: f32,
}

fn lobe_weights(mat: &PbrMaterial) -> LobeWeights {
    let w_d = mat.diffuse_weight();
    LobeWeights {
        diffuse: w_d,
        reflect: (1.0 - w_d) * (1.0 - mat.transmission),
        transmit: (1.0 - w_d) * mat.transmission,
    }
}

fn f0_color(mat: &PbrMaterial, albedo: Vec3) -> Vec3 {
    let f0d = (2.0 * mat.specular * dielectric_f0(mat.ior)).min(1.0);
    Vec3::splat(f0d).lerp(albedo, mat.metallic)
}

/// Fresnel for the transmissive interface. Uses the angle on the less dense
/// side; total internal reflection yields 1.
fn glass_fresnel(f0: f32, cos_i: f32, eta: f32) -> f32 {
    if eta > 1.0 {
        // leaving the dense medium: evaluate at the refracted (outside) angle
        let sin2_t = eta * eta * (1.0 - cos_i * cos_i).max(0.0);
        if sin2_t >= 1.0 {
            return 1.0;
        }
        schlick_scalar(f0, (1.0 - sin2_t).sqrt())
    } else {
        schlick_scalar(f0, cos_i.abs())
    }
}

/// Evaluate the BSDF for light direction `wi` and view direction `wo`
/// (both pointing away from the surface). Delta lobes are excluded.
pub fn eval_bsdf(mat: &PbrMaterial, wi: Vec3, wo: Vec3, n: Vec3, uv: Option<[f32; 2]>) -> Vec3 {
    let albedo = mat.base_color_at(uv);
    let lobes = lobe_weights(mat);
    let cos_o = n.dot(wo);
    let cos_i = n.dot(wi);
    if cos_o == 0.0 || cos_i == 0.0 {
        return Vec3::ZERO;
    }
    // shade opaque interactions in the hemisphere of the viewer
    let ns = if cos_o >= 0.0 { n } else { -n };
    let ci = ns.dot(wi);
    let co = ns.dot(wo);

    let mut f = Vec3::ZERO;
    let alpha = (mat.roughness * mat.roughness).max(0.0);
    let delta = mat.roughness < DELTA_ROUGHNESS;

    if ci > 0.0 {
        // reflection side
        if lobes.diffuse > 0.0 {
            f += albedo * (lobes.diffuse / PI);
        }
        if !delta && (lobes.reflect > 0.0 || lobes.transmit > 0.0) {
            let h = (wi + wo).normalized();
            let d = ggx_d(alpha, ns.dot(h));
            if d > 0.0 {
                let g = ggx_g(alpha, ci, co);
                let spec_base = d * g / (4.0 * ci * co);
                if lobes.reflect > 0.0 {
                    let fr = schlick(f0_color(mat, albedo), wi.dot(h).abs());
                    f += fr * (spec_base * lobes.reflect);
                }
                if lobes.transmit > 0.0 {
                    // reflective half of the glass lobe
                    let outside = co > 0.0;
                    let eta = if outside { 1.0 / mat.ior } else { mat.ior };
                    let fg = glass_fresnel(dielectric_f0(mat.ior), wi.dot(h).abs(), eta);
                    f += Vec3::splat(spec_base * lobes.transmit * fg);
                }
            }
        }
    } else if !delta && lobes.transmit > 0.0 {
        // refraction side (Walter et al. 2007, eq. 21)
        let outside = co > 0.0;
        let (eta_o, eta_i) = if outside {
            (1.0f32, mat.ior)
        } else {
            (mat.ior, 1.0)
        };
        let h = -(wo * eta_o + wi * eta_i).normalized();
        let h = if h.dot(ns) < 0.0 { -h } else { h };
        let d = ggx_d(alpha, ns.dot(h));
        if d > 0.0 {
            let ih = wi.dot(h);
            let oh = wo.dot(h);
            let denom = eta_i * ih + eta_o * oh;
            if denom.abs() > 1e-6 {
                let g = ggx_g(alpha, ci, co);
                let eta_ratio = if outside { 1.0 / mat.ior } else { mat.ior };
                let fg = glass_fresnel(dielectric_f0(mat.ior), oh.abs(), eta_ratio);
                let ft = (ih.abs() * oh.abs() / (ci.abs() * co.abs()))
                    * (eta_o * eta_o * d * g * (1.0 - fg))
                    / (denom * denom);
                f += Vec3::splat(ft * lobes.transmit);
            }
        }
    }
    f
}

#[derive(Clone, Copy, Debug)]
pub struct BsdfSample {
    /// Sampled incoming light direction (away from surface).
    pub wi: Vec3,
    /// Solid-angle pdf of the chosen lobe scaled by its selection probability;
    /// 1 for delta lobes.
    pub pdf: f32,
    /// f * |cos| / pdf, ready to multiply into the path throughput.
    pub weight: Vec3,
    pub is_delta: bool,
}

/// Sample an incoming direction. Lobe selection is proportional to
/// (w_d, (1-w_d)(1-transmission), (1-w_d)*transmission).
pub fn sample_bsdf(
    mat: &PbrMaterial,
    wo: Vec3,
    n: Vec3,
    uv: Option<[f32; 2]>,
    rng: &mut ChaCha8Rng,
) -> Option<BsdfSample> {
    let albedo = mat.base_color_at(uv);
    let lobes = lobe_weights(mat);
    let co_signed = n.dot(wo);
    if co_signed == 0.0 {
        return None;
    }
    let ns = if co_signed >= 0.0 { n } else { -n };
    let co = ns.dot(wo);

    let total = lobes.diffuse + lobes.reflect + lobes.transmit;
    if total <= 0.0 {
        return None;
    }
    let pick: f32 = rng.gen::<f32>() * total;
    let alpha = (mat.roughness * mat.roughness).max(0.0);
    let delta = mat.roughness < DELTA_ROUGHNESS;

    if pick < lobes.diffuse {
        // Lambertian: cosine sampling makes weight = albedo exactly
        let (wi, pdf) = cosine_sample_hemisphere(ns, rng);
        let p = lobes.diffuse / total;
        return Some(BsdfSample {
            wi,
            pdf: pdf * p,
            weight: albedo,
            is_delta: false,
        });
    }

    if pick < lobes.diffuse + lobes.reflect {
        let p = lobes.reflect / total;
        let f0 = f0_color(mat, albedo);
        if delta {
            let wi = wo.reflect(ns);
            let fr = schlick(f0, ns.dot(wi).abs());
            return Some(BsdfSample {
                wi,
                pdf: p,
                weight: fr,
                is_delta: true,
            });
        }
        let h = sample_ggx_half(alpha, ns, rng);
        let wi = wo.reflect(h);
        let ci = ns.dot(wi);
        if ci <= 0.0 {
            return None;
        }
        let fr = schlick(f0, wo.dot(h).abs());
        let g = ggx_g(alpha, ci, co);
        // f*cos/pdf with pdf = D(h)|n.h| / (4 |wo.h|)
        let weight = fr * (g * wo.dot(h).abs() / (co * ns.dot(h)).max(1e-9));
        let pdf = ggx_d(alpha, ns.dot(h)) * ns.dot(h) / (4.0 * wo.dot(h).abs()).max(1e-9);
        return Some(BsdfSample {
            wi,
            pdf: pdf * p,
            weight,
            is_delta: false,
        });
    }

    // transmissive lobe: microfacet interface with a Fresnel split
    let p = lobes.transmit / total;
    let outside = co_signed >= 0.0;
    let eta = if outside { 1.0 / mat.ior } else { mat.ior };
    let f0 = dielectric_f0(mat.ior);
    let h = if delta {
        ns
    } else {
        sample_ggx_half(alpha, ns, rng)
    };
    let cos_oh = wo.dot(h);
    if cos_oh <= 0.0 {
        return None;
    }
    let fresnel = glass_fresnel(f0, cos_oh, eta);
    let reflect_choice = rng.gen::<f32>() < fresnel;
    let wi = if reflect_choice {
        wo.reflect(h)
    } else {
        match refract(wo, h, eta) {
            Some(w) => w,
            None => wo.reflect(h), // TIR
        }
    };
    if delta {
        return Some(BsdfSample {
            wi,
            pdf: p,
            weight: Vec3::ONE,
            is_delta: true,
        });
    }
    let ci = ns.dot(wi);
    if reflect_choice && ci <= 0.0 {
        return None;
    }
    if !reflect_choice && ci >= 0.0 && eta != 1.0 {
        return None;
    }
    let g = ggx_g(alpha, ci, co);
    // Fresnel selection cancels F from the weight; eta^2 cancels against the
    // refraction Jacobian in the sampling density.
    let weight = Vec3::splat(g * cos_oh / (co * ns.dot(h)).max(1e-9));
    let pdf_h = ggx_d(alpha, ns.dot(h)) * ns.dot(h);
    let pdf = if reflect_choice {
        fresnel * pdf_h / (4.0 * cos_oh).max(1e-9)
    } else {
        (1.0 - fresnel) * pdf_h // Jacobian folded into weight
    };
    Some(BsdfSample {
        wi,
        pdf: (pdf * p).max(1e-12),
        weight,
        is_delta: false,
    })
}
