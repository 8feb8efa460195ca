//! ASCII OFF / OBJ / PLY readers and writers, plus landmark files.
//!
//! Vertex indices are 0-based everywhere in the library; OBJ's 1-based (and
//! negative relative) indices are converted here. Polygons with more than
//! three corners are fan-triangulated.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{Point, TriangleMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        ext.parse()
    }
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            other => Err(Error::Config(format!("unsupported mesh format '{other}'"))),
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    load_mesh_as(path, format)
}

pub fn load_mesh_as(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, format)
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> Result<TriangleMesh> {
    let (vertices, polygons) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::Obj => parse_obj(text)?,
        MeshFormat::Ply => parse_ply(text)?,
    };
    let mut faces = Vec::with_capacity(polygons.len());
    for poly in polygons {
        if poly.len() < 3 {
            return Err(Error::parse(0, "face with fewer than 3 vertices"));
        }
        for k in 1..poly.len() - 1 {
            faces.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

type RawMesh = (Vec<Point>, Vec<Vec<usize>>);

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_num<T: FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, "unexpected end of line"))?;
    tok.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse '{tok}'")))
}

fn parse_off(text: &str) -> Result<RawMesh> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "missing OFF header"))?;
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| Error::parse(ln, "expected OFF header"))?
        .trim();
    let counts_line = if rest.is_empty() {
        lines
            .next()
            .ok_or_else(|| Error::parse(ln, "missing counts line"))?
    } else {
        (ln, rest)
    };
    let mut tok = counts_line.1.split_whitespace();
    let nv: usize = parse_num(tok.next(), counts_line.0)?;
    let nf: usize = parse_num(tok.next(), counts_line.0)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "unexpected end of file in vertex list"))?;
        let mut tok = l.split_whitespace();
        vertices.push(Point::new(
            parse_num(tok.next(), ln)?,
            parse_num(tok.next(), ln)?,
            parse_num(tok.next(), ln)?,
        ));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "unexpected end of file in face list"))?;
        let mut tok = l.split_whitespace();
        let k: usize = parse_num(tok.next(), ln)?;
        let poly = (0..k)
            .map(|_| parse_num(tok.next(), ln))
            .collect::<Result<Vec<usize>>>()?;
        faces.push(poly);
    }
    Ok((vertices, faces))
}

fn parse_obj(text: &str) -> Result<RawMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, l) in content_lines(text) {
        let mut tok = l.split_whitespace();
        match tok.next() {
            Some("v") => vertices.push(Point::new(
                parse_num(tok.next(), ln)?,
                parse_num(tok.next(), ln)?,
                parse_num(tok.next(), ln)?,
            )),
            Some("f") => {
                let poly = tok
                    .map(|t| {
                        let idx: i64 = parse_num(t.split('/').next(), ln)?;
                        let resolved = if idx > 0 {
                            idx - 1
                        } else if idx < 0 {
                            vertices.len() as i64 + idx
                        } else {
                            return Err(Error::parse(ln, "OBJ index 0 is invalid"));
                        };
                        usize::try_from(resolved)
                            .map_err(|_| Error::parse(ln, "OBJ index out of range"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                faces.push(poly);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

fn parse_ply(text: &str) -> Result<RawMesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(1, "expected 'ply' magic")),
    }
    let mut nv = 0usize;
    let mut nf = 0usize;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut current = "";
    let mut elements_before_faces: Vec<(String, usize)> = Vec::new();
    for (ln, l) in lines.by_ref() {
        let mut tok = l.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(Error::parse(ln, "only ASCII PLY is supported"));
                }
            }
            Some("element") => {
                let name = tok.next().unwrap_or("");
                let count: usize = parse_num(tok.next(), ln)?;
                match name {
                    "vertex" => {
                        nv = count;
                        current = "vertex";
                    }
                    "face" => {
                        nf = count;
                        current = "face";
                    }
                    other => {
                        if nf == 0 {
                            elements_before_faces.push((other.to_string(), count));
                        }
                        current = "other";
                    }
                }
            }
            Some("property") if current == "vertex" => {
                if let Some(name) = tok.last() {
                    vertex_props.push(name.to_string());
                }
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    let col = |name: &str| vertex_props.iter().position(|p| p == name);
    let (cx, cy, cz) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::parse(0, "PLY vertex element lacks x/y/z")),
    };
    let mut body = lines.filter(|(_, l)| !l.is_empty());
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = body
            .next()
            .ok_or_else(|| Error::parse(0, "unexpected end of PLY vertex data"))?;
        let vals: Vec<&str> = l.split_whitespace().collect();
        vertices.push(Point::new(
            parse_num(vals.get(cx).copied(), ln)?,
            parse_num(vals.get(cy).copied(), ln)?,
            parse_num(vals.get(cz).copied(), ln)?,
        ));
    }
    // Skip elements declared between vertices and faces.
    for (_, count) in &elements_before_faces {
        for _ in 0..*count {
            body.next();
        }
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = body
            .next()
            .ok_or_else(|| Error::parse(0, "unexpected end of PLY face data"))?;
        let mut tok = l.split_whitespace();
        let k: usize = parse_num(tok.next(), ln)?;
        let poly = (0..k)
            .map(|_| parse_num(tok.next(), ln))
            .collect::<Result<Vec<usize>>>()?;
        faces.push(poly);
    }
    Ok((vertices, faces))
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    let text = format_mesh(mesh, format);
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn format_mesh(mesh: &TriangleMesh, format: MeshFormat) -> String {
    let mut s = String::new();
    match format {
        MeshFormat::Off => {
            let _ = writeln!(s, "OFF\n{} {} 0", mesh.num_vertices(), mesh.num_faces());
            for p in mesh.vertices() {
                let _ = writeln!(s, "{:e} {:e} {:e}", p.x, p.y, p.z);
            }
            for f in mesh.faces() {
                let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
        MeshFormat::Obj => {
            for p in mesh.vertices() {
                let _ = writeln!(s, "v {:e} {:e} {:e}", p.x, p.y, p.z);
            }
            for f in mesh.faces() {
                let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
        MeshFormat::Ply => {
            let _ = write!(
                s,
                "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
                mesh.num_vertices(),
                mesh.num_faces()
            );
            for p in mesh.vertices() {
                let _ = writeln!(s, "{:e} {:e} {:e}", p.x, p.y, p.z);
            }
            for f in mesh.faces() {
                let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
    }
    s
}

/// One 0-based vertex index per line.
pub fn load_landmarks(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    content_lines(&text)
        .map(|(ln, l)| parse_num(Some(l), ln))
        .collect()
}

pub fn save_landmarks(landmarks: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    for l in landmarks {
        let _ = writeln!(s, "{l}");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn off_single_triangle() {
        let m = parse_mesh("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n", MeshFormat::Off).unwrap();
        assert_eq!(m.num_vertices(), 3);
        assert!((m.total_area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn off_invalid_index() {
        let err = parse_mesh("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n", MeshFormat::Off).unwrap_err();
        assert!(err.to_string().contains("invalid face index"));
    }

    #[test]
    fn obj_quad_is_triangulated() {
        let m = parse_mesh(
            "# square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n",
            MeshFormat::Obj,
        )
        .unwrap();
        assert_eq!(m.num_faces(), 2);
        assert_eq!(m.faces()[0], [0, 1, 2]);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn obj_negative_indices() {
        let m = parse_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n", MeshFormat::Obj).unwrap();
        assert_eq!(m.faces()[0], [0, 1, 2]);
    }

    #[test]
    fn ply_with_extra_properties() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 9\n1 0 0 9\n0 1 0 9\n3 0 1 2\n";
        let m = parse_mesh(text, MeshFormat::Ply).unwrap();
        assert_eq!(m.num_vertices(), 3);
        assert!((m.total_area() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn format_round_trip_all() {
        let m = crate::mesh::shapes::icosphere(3);
        for fmt in [MeshFormat::Off, MeshFormat::Obj, MeshFormat::Ply] {
            let back = parse_mesh(&format_mesh(&m, fmt), fmt).unwrap();
            assert_eq!(back.faces(), m.faces());
            for (p, q) in back.vertices().iter().zip(m.vertices()) {
                assert!((p - q).norm() < 1e-9);
            }
        }
    }
}
