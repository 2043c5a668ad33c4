//! Axis-aligned BVH over triangles: median split on the longest centroid
//! axis, at most 4 triangles per leaf. Intersection is Moller-Trumbore.

use crate::math::{vec3, Vec3};

#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

#[derive(Clone, Copy, Debug)]
pub struct TriHit {
    pub t: f32,
    pub tri: u32,
    /// Barycentric coordinates of vertices 1 and 2.
    pub u: f32,
    pub v: f32,
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    const EMPTY: Aabb = Aabb {
        min: vec3(f32::MAX, f32::MAX, f32::MAX),
        max: vec3(f32::MIN, f32::MIN, f32::MIN),
    };

    fn grow(&mut self, p: Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    fn union(&mut self, o: &Aabb) {
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
    }

    fn longest_axis(&self) -> usize {
        let d = self.max - self.min;
        if d.x >= d.y && d.x >= d.z {
            0
        } else if d.y >= d.z {
            1
        } else {
            2
        }
    }

    #[inline]
    fn hit(&self, origin: Vec3, inv_dir: Vec3, t_max: f32) -> bool {
        let t0 = (self.min - origin) * inv_dir;
        let t1 = (self.max - origin) * inv_dir;
        let tmin = t0.min(t1);
        let tmax = t0.max(t1);
        let enter = tmin.max_component().max(0.0);
        let exit = tmax.min_component().min(t_max);
        enter <= exit
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    aabb: Aabb,
    /// Interior: left child index (right = left + 1 is implicit via `right`).
    /// Leaf: start into tri_idx.
    a: u32,
    /// Interior: right child index. Leaf: triangle count (flagged).
    b: u32,
    leaf: bool,
}

#[derive(Debug, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    tri_idx: Vec<u32>,
    verts: Vec<[Vec3; 3]>,
}

const MAX_LEAF_TRIS: usize = 4;

impl Bvh {
    pub fn build(vertices: &[Vec3], tris: &[[u32; 3]]) -> Bvh {
        let verts: Vec<[Vec3; 3]> = tris
            .iter()
            .map(|t| {
                [
                    vertices[t[0] as usize],
                    vertices[t[1] as usize],
                    vertices[t[2] as usize],
                ]
            })
            .collect();
        let centroids: Vec<Vec3> = verts
            .iter()
            .map(|v| (v[0] + v[1] + v[2]) / 3.0)
            .collect();
        let mut tri_idx: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            build_node(&verts, &centroids, &mut tri_idx, 0, tris.len(), &mut nodes);
        }
        Bvh {
            nodes,
            tri_idx,
            verts,
        }
    }

    /// Closest hit in (t_min, t_max).
    pub fn intersect(&self, ray: &Ray, t_min: f32, mut t_max: f32) -> Option<TriHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = vec3(
            1.0 / ray.dir.x,
            1.0 / ray.dir.y,
            1.0 / ray.dir.z,
        );
        let mut best: Option<TriHit> = None;
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if !node.aabb.hit(ray.origin, inv_dir, t_max) {
                continue;
            }
            if node.leaf {
                for i in node.a..node.a + node.b {
                    let tri = self.tri_idx[i as usize];
                    if let Some(hit) = intersect_tri(ray, &self.verts[tri as usize], t_min, t_max)
                    {
                        t_max = hit.0;
                        best = Some(TriHit {
                            t: hit.0,
                            tri,
                            u: hit.1,
                            v: hit.2,
                        });
                    }
                }
            } else {
                stack[sp] = node.a;
                stack[sp + 1] = node.b;
                sp += 2;
            }
        }
        best
    }

    /// Any hit in (t_min, t_max); used for shadow rays.
    pub fn intersect_any(&self, ray: &Ray, t_min: f32, t_max: f32) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let inv_dir = vec3(
            1.0 / ray.dir.x,
            1.0 / ray.dir.y,
            1.0 / ray.dir.z,
        );
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if !node.aabb.hit(ray.origin, inv_dir, t_max) {
                continue;
            }
            if node.leaf {
                for i in node.a..node.a + node.b {
                    let tri = self.tri_idx[i as usize];
                    if intersect_tri(ray, &self.verts[tri as usize], t_min, t_max).is_some() {
                        return true;
                    }
                }
            } else {
                stack[sp] = node.a;
                stack[sp + 1] = node.b;
                sp += 2;
            }
        }
        false
    }
}

fn build_node(
    verts: &[[Vec3; 3]],
    centroids: &[Vec3],
    tri_idx: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let mut aabb = Aabb::EMPTY;
    let mut cbounds = Aabb::EMPTY;
    for &t in &tri_idx[start..end] {
        for v in &verts[t as usize] {
            aabb.grow(*v);
        }
        cbounds.grow(centroids[t as usize]);
    }
    let id = nodes.len() as u32;
    nodes.push(Node {
        aabb,
        a: 0,
        b: 0,
        leaf: false,
    });
    let count = end - start;
    let axis = cbounds.longest_axis();
    let splittable = cbounds.max.axis(axis) > cbounds.min.axis(axis);
    if count <= MAX_LEAF_TRIS || !splittable {
        nodes[id as usize].a = start as u32;
        nodes[id as usize].b = count as u32;
        nodes[id as usize].leaf = true;
        return id;
    }
    tri_idx[start..end].sort_unstable_by(|&a, &b| {
        centroids[a as usize]
            .axis(axis)
            .partial_cmp(&centroids[b as usize].axis(axis))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mid = start + count / 2;
    let left = build_node(verts, centroids, tri_idx, start, mid, nodes);
    let right = build_node(verts, centroids, tri_idx, mid, end, nodes);
    nodes[id as usize].a = left;
    nodes[id as usize].b = right;
    id
}

#[inline]
fn intersect_tri(ray: &Ray, v: &[Vec3; 3], t_min: f32, t_max: f32) -> Option<(f32, f32, f32)> {
    let e1 = v[1] - v[0];
    let e2 = v[2] - v[0];
    let p = ray.dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = ray.origin - v[0];
    let u = s.dot(p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let vv = ray.dir.dot(q) * inv_det;
    if vv < 0.0 || u + vv > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv_det;
    if t > t_min && t < t_max {
        Some((t, u, vv))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::rng_for;
    use rand::Rng;

    fn quad_tris() -> (Vec<Vec3>, Vec<[u32; 3]>) {
        (
            vec![
                vec3(-1.0, -1.0, 0.0),
                vec3(1.0, -1.0, 0.0),
                vec3(1.0, 1.0, 0.0),
                vec3(-1.0, 1.0, 0.0),
            ],
            vec![[0, 2, 1], [0, 3, 2]],
        )
    }

    #[test]
    fn hits_quad_center() {
        let (v, t) = quad_tris();
        let bvh = Bvh::build(&v, &t);
        let ray = Ray {
            origin: vec3(0.1, -0.2, -3.0),
            dir: Vec3::Z,
        };
        let hit = bvh.intersect(&ray, 1e-4, f32::MAX).unwrap();
        assert!((hit.t - 3.0).abs() < 1e-5);
        assert!(bvh.intersect_any(&ray, 1e-4, f32::MAX));
        assert!(!bvh.intersect_any(&ray, 1e-4, 2.5));
    }

    #[test]
    fn misses_outside_quad() {
        let (v, t) = quad_tris();
        let bvh = Bvh::build(&v, &t);
        let ray = Ray {
            origin: vec3(2.5, 0.0, -3.0),
            dir: Vec3::Z,
        };
        assert!(bvh.intersect(&ray, 1e-4, f32::MAX).is_none());
    }

    #[test]
    fn bvh_matches_brute_force_on_random_soup() {
        let mut rng = rng_for(11, 0);
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        for i in 0..200u32 {
            let c = vec3(
                rng.gen::<f32>() * 2.0 - 1.0,
                rng.gen::<f32>() * 2.0 - 1.0,
                rng.gen::<f32>() * 2.0,
            );
            for _ in 0..3 {
                verts.push(
                    c + vec3(
                        rng.gen::<f32>() * 0.2,
                        rng.gen::<f32>() * 0.2,
                        rng.gen::<f32>() * 0.2,
                    ),
                );
            }
            tris.push([i * 3, i * 3 + 1, i * 3 + 2]);
        }
        let bvh = Bvh::build(&verts, &tris);
        for _ in 0..500 {
            let ray = Ray {
                origin: vec3(
                    rng.gen::<f32>() * 2.0 - 1.0,
                    rng.gen::<f32>() * 2.0 - 1.0,
                    -2.0,
                ),
                dir: vec3(
                    rng.gen::<f32>() - 0.5,
                    rng.gen::<f32>() - 0.5,
                    1.0,
                )
                .normalized(),
            };
            let mut brute: Option<f32> = None;
            for t in &tris {
                let v = [
                    verts[t[0] as usize],
                    verts[t[1] as usize],
                    verts[t[2] as usize],
                ];
                if let Some((tt, _, _)) = intersect_tri(&ray, &v, 1e-4, f32::MAX) {
                    brute = Some(brute.map_or(tt, |b: f32| b.min(tt)));
                }
            }
            let got = bvh.intersect(&ray, 1e-4, f32::MAX).map(|h| h.t);
            match (brute, got) {
                (None, None) => {}
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-5),
                other => panic!("mismatch: {other:?}"),
            }
        }
    }
}
