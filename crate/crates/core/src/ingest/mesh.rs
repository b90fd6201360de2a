use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::geometry::{triangle_area, Vec3};
use super::IngestError;
use crate::voxfield::SemanticLabel;

/// Color used for vertices that carry none.
pub const DEFAULT_COLOR: [f64; 3] = [0.5, 0.5, 0.5];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub position: Vec3,
    pub color: [f64; 3],
}

/// Colored triangle mesh with one semantic label per face.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<[u32; 3]>,
    pub face_semantics: Vec<SemanticLabel>,
}

impl Mesh {
    pub fn new(
        vertices: Vec<Vertex>,
        triangles: Vec<[u32; 3]>,
        face_semantics: Vec<SemanticLabel>,
    ) -> Result<Self, IngestError> {
        let m = Self {
            vertices,
            triangles,
            face_semantics,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.face_semantics.len() != self.triangles.len() {
            return Err(IngestError::SidecarLength {
                expected: self.triangles.len(),
                actual: self.face_semantics.len(),
            });
        }
        for (face, t) in self.triangles.iter().enumerate() {
            for &i in t {
                if i as usize >= self.vertices.len() {
                    return Err(IngestError::IndexOutOfRange {
                        face,
                        index: i as i64,
                        vertex_count: self.vertices.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        self.triangles[face].map(|i| self.vertices[i as usize].position)
    }

    pub fn triangle_colors(&self, face: usize) -> [[f64; 3]; 3] {
        self.triangles[face].map(|i| self.vertices[i as usize].color)
    }

    pub fn area(&self, face: usize) -> f64 {
        triangle_area(&self.triangle(face))
    }

    /// Appends a triangle with its own three vertices.
    pub fn push_triangle(&mut self, corners: [Vec3; 3], colors: [[f64; 3]; 3], label: SemanticLabel) {
        let base = self.vertices.len() as u32;
        for (position, color) in corners.into_iter().zip(colors) {
            self.vertices.push(Vertex { position, color });
        }
        self.triangles.push([base, base + 1, base + 2]);
        self.face_semantics.push(label);
    }

    /// Appends the planar quad `a b c d` (counter-clockwise) as two triangles.
    pub fn push_quad(&mut self, q: [Vec3; 4], colors: [[f64; 3]; 4], label: SemanticLabel) {
        self.push_triangle([q[0], q[1], q[2]], [colors[0], colors[1], colors[2]], label);
        self.push_triangle([q[0], q[2], q[3]], [colors[0], colors[2], colors[3]], label);
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("sem")
}

fn parse_f64(tok: Option<&str>, line: usize, what: &str) -> Result<f64, IngestError> {
    let tok = tok.ok_or_else(|| IngestError::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    let v: f64 = tok.parse().map_err(|_| IngestError::Parse {
        line,
        message: format!("invalid {what} {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(IngestError::Parse {
            line,
            message: format!("non-finite {what}"),
        });
    }
    Ok(v)
}

/// Parses OBJ text with the `v x y z r g b` vertex-color extension. Polygons
/// are fan-triangulated; texture/normal references are ignored.
pub fn parse_obj(text: &str) -> Result<(Vec<Vertex>, Vec<[u32; 3]>), IngestError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => {
                let position = [
                    parse_f64(toks.next(), line, "x")?,
                    parse_f64(toks.next(), line, "y")?,
                    parse_f64(toks.next(), line, "z")?,
                ];
                let rest: Vec<&str> = toks.collect();
                let color = match rest.len() {
                    0 | 1 => DEFAULT_COLOR,
                    3 | 4 => {
                        let mut c = [0.0; 3];
                        for (slot, tok) in c.iter_mut().zip(&rest) {
                            *slot = parse_f64(Some(tok), line, "color")?;
                            if !(0.0..=1.0).contains(slot) {
                                return Err(IngestError::Parse {
                                    line,
                                    message: format!("color component {slot} outside [0, 1]"),
                                });
                            }
                        }
                        c
                    }
                    k => {
                        return Err(IngestError::Parse {
                            line,
                            message: format!("vertex has {} values, expected 3 or 6", 3 + k),
                        })
                    }
                };
                vertices.push(Vertex { position, color });
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in toks {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| IngestError::Parse {
                        line,
                        message: format!("invalid face index {tok:?}"),
                    })?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(IngestError::IndexOutOfRange {
                            face: triangles.len(),
                            index: i,
                            vertex_count: vertices.len(),
                        });
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(IngestError::Parse {
                        line,
                        message: "face with fewer than 3 vertices".into(),
                    });
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

/// Parses a `.sem` sidecar: one class id per face, whitespace separated.
/// `255` and `-1` denote NULL.
pub fn parse_sidecar(text: &str) -> Result<Vec<SemanticLabel>, IngestError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        for tok in raw.split('#').next().unwrap_or("").split_whitespace() {
            let bad = || IngestError::Parse {
                line: lineno + 1,
                message: format!("invalid class id {tok:?} in sidecar"),
            };
            let v: i64 = tok.parse().map_err(|_| bad())?;
            let label = match v {
                -1 | 255 => SemanticLabel::NULL,
                0..=19 => SemanticLabel::class(v as u8).map_err(|_| bad())?,
                _ => return Err(bad()),
            };
            out.push(label);
        }
    }
    Ok(out)
}

/// Loads an OBJ mesh plus its optional `.sem` sidecar.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let (vertices, triangles) = parse_obj(&text)?;
    let sem = sidecar_path(path);
    let face_semantics = if sem.exists() {
        let labels = parse_sidecar(&fs::read_to_string(&sem)?)?;
        if labels.len() != triangles.len() {
            return Err(IngestError::SidecarLength {
                expected: triangles.len(),
                actual: labels.len(),
            });
        }
        labels
    } else {
        vec![SemanticLabel::NULL; triangles.len()]
    };
    Mesh::new(vertices, triangles, face_semantics)
}

/// Writes the mesh as OBJ with vertex colors plus a `.sem` sidecar.
/// Coordinates use shortest round-trip formatting, so reloading is exact.
pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    let mut obj = String::with_capacity(mesh.vertices.len() * 48);
    obj.push_str("# vertex-colored mesh\n");
    for v in &mesh.vertices {
        let [x, y, z] = v.position;
        let [r, g, b] = v.color;
        writeln!(obj, "v {x} {y} {z} {r} {g} {b}").unwrap();
    }
    for t in &mesh.triangles {
        writeln!(obj, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    fs::write(path, obj)?;
    let mut sem = String::with_capacity(mesh.face_semantics.len() * 3);
    for l in &mesh.face_semantics {
        writeln!(sem, "{}", l.to_byte()).unwrap();
    }
    fs::write(sidecar_path(path), sem)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle_without_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tri.obj");
        fs::write(&p, "v 0 0 0 1 0 0\nv 1 0 0\nv 0 1 0 0 0 1\nf 1 2 3\n").unwrap();
        let m = load_mesh(&p).unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
        assert_eq!(m.vertices[1].color, DEFAULT_COLOR);
        assert_eq!(m.face_semantics, vec![SemanticLabel::NULL]);
    }

    #[test]
    fn sidecar_length_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tri.obj");
        fs::write(&p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        fs::write(dir.path().join("tri.sem"), "0 2\n").unwrap();
        assert!(matches!(
            load_mesh(&p),
            Err(IngestError::SidecarLength { expected: 1, actual: 2 })
        ));
        fs::write(dir.path().join("tri.sem"), "2\n").unwrap();
        assert_eq!(load_mesh(&p).unwrap().face_semantics, vec![SemanticLabel::BUILDING]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_obj("v 0 0 0\nv 1 x 0\n").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 2, .. }), "{err}");
        let err = parse_obj("v 0 0 0\nf 1 2 3\n").unwrap_err();
        assert!(matches!(err, IngestError::IndexOutOfRange { .. }));
    }

    #[test]
    fn quads_are_fan_triangulated_and_negative_indices_resolve() {
        let (v, t) = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4/1 -3/2 -2/3 -1/4\n").unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(t, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn save_load_round_trip() {
        let mut m = Mesh::default();
        m.push_triangle(
            [[0.1, 0.2, 0.3], [1.0 / 3.0, 0.0, 2.5], [0.0, 1.0, 0.0]],
            [[0.2, 0.4, 0.6], [1.0, 0.0, 0.0], [0.123456789, 0.5, 0.5]],
            SemanticLabel::POLE,
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.obj");
        save_mesh(&m, &p).unwrap();
        assert_eq!(load_mesh(&p).unwrap(), m);
    }
}
