//! ASCII OBJ subset: v / vn / vt / f, triangles only.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{vec3, Vec3};
use crate::scene::Mesh;

pub fn read_obj(path: &Path) -> Result<Mesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };

    let mut positions: Vec<Vec3> = Vec::new();
    let mut normals: Vec<Vec3> = Vec::new();
    let mut uvs: Vec<[f32; 2]> = Vec::new();
    let mut tris: Vec<[u32; 3]> = Vec::new();
    let mut tri_normals: Vec<[usize; 3]> = Vec::new();
    let mut tri_uvs: Vec<[usize; 3]> = Vec::new();
    let mut any_normals = false;
    let mut any_uvs = false;

    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap();
        let floats = |it: std::str::SplitWhitespace<'_>, n: usize| -> Result<Vec<f32>> {
            let vals: Vec<f32> = it.filter_map(|t| t.parse().ok()).collect();
            if vals.len() < n {
                Err(perr(ln, format!("expected {n} numeric fields")))
            } else {
                Ok(vals)
            }
        };
        match tag {
            "v" => {
                let f = floats(it, 3)?;
                positions.push(vec3(f[0], f[1], f[2]));
            }
            "vn" => {
                let f = floats(it, 3)?;
                normals.push(vec3(f[0], f[1], f[2]));
            }
            "vt" => {
                let f = floats(it, 2)?;
                uvs.push([f[0], f[1]]);
            }
            "f" => {
                let corners: Vec<&str> = it.collect();
                if corners.len() != 3 {
                    return Err(perr(
                        ln,
                        format!("face has {} vertices; only triangles supported", corners.len()),
                    ));
                }
                let mut vidx = [0u32; 3];
                let mut nidx = [0usize; 3];
                let mut tidx = [0usize; 3];
                let mut has_n = true;
                let mut has_t = true;
                for (i, c) in corners.iter().enumerate() {
                    let parts: Vec<&str> = c.split('/').collect();
                    let parse_idx = |s: &str, count: usize| -> Result<usize> {
                        let v: i64 = s
                            .parse()
                            .map_err(|_| perr(ln, format!("bad index '{s}'")))?;
                        let idx = if v < 0 { count as i64 + v } else { v - 1 };
                        if idx < 0 || idx as usize >= count {
                            return Err(perr(ln, format!("index {v} out of range")));
                        }
                        Ok(idx as usize)
                    };
                    vidx[i] = parse_idx(parts[0], positions.len())? as u32;
                    match parts.len() {
                        1 => {
                            has_n = false;
                            has_t = false;
                        }
                        2 => {
                            tidx[i] = parse_idx(parts[1], uvs.len())?;
                            has_n = false;
                        }
                        3 => {
                            if parts[1].is_empty() {
                                has_t = false;
                            } else {
                                tidx[i] = parse_idx(parts[1], uvs.len())?;
                            }
                            nidx[i] = parse_idx(parts[2], normals.len())?;
                        }
                        _ => return Err(perr(ln, format!("bad face corner '{c}'"))),
                    }
                }
                tris.push(vidx);
                if has_n {
                    tri_normals.push(nidx);
                    any_normals = true;
                }
                if has_t {
                    tri_uvs.push(tidx);
                    any_uvs = true;
                }
            }
            // o, g, s, usemtl, mtllib carry no geometry
            "o" | "g" | "s" | "usemtl" | "mtllib" => {}
            _ => return Err(perr(ln, format!("unsupported directive '{tag}'"))),
        }
    }

    let corner_normals = if any_normals && tri_normals.len() == tris.len() {
        Some(
            tri_normals
                .iter()
                .map(|n| [normals[n[0]], normals[n[1]], normals[n[2]]])
                .collect(),
        )
    } else {
        None
    };
    let corner_uvs = if any_uvs && tri_uvs.len() == tris.len() {
        Some(
            tri_uvs
                .iter()
                .map(|t| [uvs[t[0]], uvs[t[1]], uvs[t[2]]])
                .collect(),
        )
    } else {
        None
    };
    Mesh::build(positions, tris, corner_normals, corner_uvs)
}

pub fn write_obj(path: &Path, mesh: &Mesh) -> Result<()> {
    let mut buf = Vec::new();
    let w = |buf: &mut Vec<u8>, s: String| buf.extend_from_slice(s.as_bytes());
    for v in &mesh.vertices {
        w(&mut buf, format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    let mut normal_idx = 0usize;
    let mut uv_idx = 0usize;
    if let Some(ns) = &mesh.corner_normals {
        for tri in ns {
            for n in tri {
                w(&mut buf, format!("vn {} {} {}\n", n.x, n.y, n.z));
            }
        }
    }
    if let Some(uvs) = &mesh.corner_uvs {
        for tri in uvs {
            for t in tri {
                w(&mut buf, format!("vt {} {}\n", t[0], t[1]));
            }
        }
    }
    for (ti, t) in mesh.tris.iter().enumerate() {
        let _ = ti;
        match (&mesh.corner_normals, &mesh.corner_uvs) {
            (Some(_), Some(_)) => {
                w(
                    &mut buf,
                    format!(
                        "f {}/{}/{} {}/{}/{} {}/{}/{}\n",
                        t[0] + 1,
                        uv_idx + 1,
                        normal_idx + 1,
                        t[1] + 1,
                        uv_idx + 2,
                        normal_idx + 2,
                        t[2] + 1,
                        uv_idx + 3,
                        normal_idx + 3
                    ),
                );
                normal_idx += 3;
                uv_idx += 3;
            }
            (Some(_), None) => {
                w(
                    &mut buf,
                    format!(
                        "f {}//{} {}//{} {}//{}\n",
                        t[0] + 1,
                        normal_idx + 1,
                        t[1] + 1,
                        normal_idx + 2,
                        t[2] + 1,
                        normal_idx + 3
                    ),
                );
                normal_idx += 3;
            }
            (None, Some(_)) => {
                w(
                    &mut buf,
                    format!(
                        "f {}/{} {}/{} {}/{}\n",
                        t[0] + 1,
                        uv_idx + 1,
                        t[1] + 1,
                        uv_idx + 2,
                        t[2] + 1,
                        uv_idx + 3
                    ),
                );
                uv_idx += 3;
            }
            (None, None) => {
                w(&mut buf, format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
            }
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{make_icosphere, make_quad};

    #[test]
    fn obj_roundtrip_quad() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.obj");
        let quad = make_quad(2.0);
        write_obj(&path, &quad).unwrap();
        let back = read_obj(&path).unwrap();
        assert_eq!(back.vertices, quad.vertices);
        assert_eq!(back.tris, quad.tris);
        assert_eq!(back.corner_normals, quad.corner_normals);
        assert_eq!(back.corner_uvs, quad.corner_uvs);
    }

    #[test]
    fn obj_roundtrip_sphere_no_uvs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.obj");
        let sphere = make_icosphere(1.0, 1);
        write_obj(&path, &sphere).unwrap();
        let back = read_obj(&path).unwrap();
        assert_eq!(back.tris.len(), sphere.tris.len());
        assert!(back.corner_normals.is_some());
    }

    #[test]
    fn quad_face_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.obj");
        std::fs::write(
            &path,
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n",
        )
        .unwrap();
        let err = read_obj(&path).unwrap_err();
        assert!(err.to_string().contains("triangles"), "{err}");
    }

    #[test]
    fn negative_indices_resolve_from_end() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("neg.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        let mesh = read_obj(&path).unwrap();
        assert_eq!(mesh.tris, vec![[0, 1, 2]]);
    }
}
