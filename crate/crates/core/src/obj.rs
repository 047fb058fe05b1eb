//! Wavefront OBJ reading and writing.
//!
//! Only `v` and `f` records are interpreted; texture and normal indices on
//! faces are ignored. Polygons are fan-triangulated. Vertices are written
//! with 17 significant digits so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};
use crate::poisson::VertexMap;

/// Raw OBJ contents before validation.
#[derive(Debug, Clone, Default)]
pub struct ObjData {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

pub fn parse_obj(reader: impl BufRead) -> Result<ObjData> {
    let mut data = ObjData::default();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.split('#').next().unwrap_or("");
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let tok = tokens.next().ok_or_else(|| Error::Parse {
                        line: lineno,
                        message: "vertex record needs three coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("bad coordinate {tok:?}"),
                    })?;
                }
                data.vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in tokens {
                    poly.push(parse_face_index(tok, data.vertices.len(), lineno)?);
                }
                if poly.len() < 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "face record needs at least three vertices".into(),
                    });
                }
                for k in 1..poly.len() - 1 {
                    data.triangles.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(data)
}

fn parse_face_index(tok: &str, nverts: usize, line: usize) -> Result<usize> {
    let pos = tok.split('/').next().unwrap_or("");
    let idx: i64 = pos.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad face index {tok:?}"),
    })?;
    // positive indices are 1-based, negative ones count back from the last vertex
    let resolved = if idx > 0 {
        idx - 1
    } else {
        nverts as i64 + idx
    };
    if idx == 0 || resolved < 0 || resolved >= nverts as i64 {
        return Err(Error::Parse {
            line,
            message: format!("face index {idx} out of range (1..={nverts})"),
        });
    }
    Ok(resolved as usize)
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<ObjData> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_obj(std::io::BufReader::new(file))
}

/// Loads and validates a mesh.
pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh> {
    let data = read_obj(path)?;
    Ok(Mesh::new(data.vertices, data.triangles)?)
}

pub fn mesh_to_obj_string(vertices: &[Vec3], triangles: &[[usize; 3]]) -> String {
    let mut out = String::with_capacity(64 * (vertices.len() + triangles.len()));
    for p in vertices {
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z).unwrap();
    }
    for t in triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    out
}

pub fn write_obj(path: impl AsRef<Path>, vertices: &[Vec3], triangles: &[[usize; 3]]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, mesh_to_obj_string(vertices, triangles)).map_err(|e| Error::io(path, e))
}

pub fn write_mesh(path: impl AsRef<Path>, mesh: &Mesh) -> Result<()> {
    write_obj(path, mesh.vertices(), mesh.triangles())
}

/// Writes a 2D map as a flat OBJ (z = 0) with matching `vt` records.
pub fn write_uv_obj(path: impl AsRef<Path>, uv: &VertexMap, triangles: &[[usize; 3]]) -> Result<()> {
    let path = path.as_ref();
    if uv.dim() != 2 {
        return Err(Error::shape("write_uv_obj", 2, uv.dim()));
    }
    let mut out = String::new();
    for j in 0..uv.rows() {
        let r = uv.row(j);
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", r[0], r[1], 0.0).unwrap();
    }
    for j in 0..uv.rows() {
        let r = uv.row(j);
        writeln!(out, "vt {:.16e} {:.16e}", r[0], r[1]).unwrap();
    }
    for t in triangles {
        let (a, b, c) = (t[0] + 1, t[1] + 1, t[2] + 1);
        writeln!(out, "f {a}/{a} {b}/{b} {c}/{c}").unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
