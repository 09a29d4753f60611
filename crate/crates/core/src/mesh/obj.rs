//! Wavefront OBJ, `v` and `f` statements only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::mesh::TriMesh;
use crate::{Error, Result};

pub fn encode_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub fn write_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_obj(mesh)).map_err(|e| Error::io(path, e))
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_obj(&text, &path.display().to_string())
}

/// Parses `v` and `f` lines; polygons are fan-triangulated and other
/// statements are ignored.
pub fn decode_obj(text: &str, name: &str) -> Result<TriMesh> {
    let err = |line: usize, msg: String| Error::Parse {
        path: name.into(),
        line,
        msg,
    };
    let mut mesh = TriMesh::default();
    let mut faces: Vec<(usize, Vec<usize>)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse().map_err(|_| err(line, format!("bad coordinate {t:?}"))))
                    .collect::<Result<_>>()?;
                if coords.len() < 3 {
                    return Err(err(line, "vertex needs 3 coordinates".into()));
                }
                mesh.vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tokens {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| err(line, format!("bad face index {t:?}")))?;
                    if i < 0 {
                        return Err(err(line, format!("negative index {i} not supported")));
                    }
                    if i == 0 {
                        return Err(err(line, "face indices are 1-based".into()));
                    }
                    idx.push(i as usize - 1);
                }
                if idx.len() < 3 {
                    return Err(err(line, "face needs at least 3 vertices".into()));
                }
                faces.push((line, idx));
            }
            _ => {}
        }
    }
    for (line, idx) in faces {
        if let Some(&bad) = idx.iter().find(|&&i| i >= mesh.vertices.len()) {
            return Err(err(line, format!("index {} out of range", bad + 1)));
        }
        for k in 1..idx.len() - 1 {
            mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_triangle() {
        let m = decode_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", "t").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn round_trip_exact() {
        let m = TriMesh {
            vertices: vec![[0.1, -2.5e-7, 3.0], [1.0 / 3.0, 0.0, 7.25], [0.0, 1.0, -0.3]],
            triangles: vec![[0, 1, 2], [2, 1, 0]],
        };
        assert_eq!(decode_obj(&encode_obj(&m), "t").unwrap(), m);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.obj");
        write_obj(&m, &p).unwrap();
        assert_eq!(read_obj(&p).unwrap(), m);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match decode_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 -2 3\n", "t") {
            Err(Error::Parse { line: 4, msg, .. }) => assert!(msg.contains("negative")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(decode_obj("v 0 0\n", "t"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            decode_obj("v 0 0 0\n\nf 1 2 3\n", "t"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn quads_and_slashes() {
        let m = decode_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n", "t").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }
}
