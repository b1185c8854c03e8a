//! Binary and ASCII STL codec.

use std::fmt::Write as _;

use super::GeometryError;

pub const HEADER_LEN: usize = 80;
pub const RECORD_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub normal: [f32; 3],
    pub vertices: [[f32; 3]; 3],
    pub attribute: u16,
}

impl Triangle {
    pub fn new(vertices: [[f32; 3]; 3]) -> Self {
        let [a, b, c] = vertices;
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let normal = if len > 0.0 { [n[0] / len, n[1] / len, n[2] / len] } else { [0.0; 3] };
        Self { normal, vertices, attribute: 0 }
    }
}

/// Triangle soup in millimeters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub triangles: Vec<Triangle>,
}

impl TriangleMesh {
    pub fn new(triangles: Vec<Triangle>) -> Self {
        Self { triangles }
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.triangles
            .iter()
            .all(|t| t.normal.iter().chain(t.vertices.iter().flatten()).all(|x| x.is_finite()))
    }

    /// Closed triangulated box with outward normals.
    pub fn cuboid(min: [f32; 3], max: [f32; 3]) -> Self {
        let p = |i: usize| {
            [
                if i & 1 == 0 { min[0] } else { max[0] },
                if i & 2 == 0 { min[1] } else { max[1] },
                if i & 4 == 0 { min[2] } else { max[2] },
            ]
        };
        // Quads as corner indices, counter-clockwise seen from outside.
        const QUADS: [[usize; 4]; 6] = [
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
        ];
        let mut triangles = Vec::with_capacity(12);
        for q in QUADS {
            triangles.push(Triangle::new([p(q[0]), p(q[1]), p(q[2])]));
            triangles.push(Triangle::new([p(q[0]), p(q[2]), p(q[3])]));
        }
        Self { triangles }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlFormat {
    Binary,
    Ascii,
}

fn looks_binary(bytes: &[u8]) -> bool {
    if bytes.len() < HEADER_LEN + 4 {
        return !bytes.starts_with(b"solid");
    }
    let count = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap()) as usize;
    let exact = count
        .checked_mul(RECORD_LEN)
        .and_then(|n| n.checked_add(HEADER_LEN + 4))
        .is_some_and(|n| n == bytes.len());
    exact || !bytes.starts_with(b"solid")
}

/// Parses binary or ASCII STL; the format is detected from the content.
pub fn parse_stl(bytes: &[u8]) -> Result<TriangleMesh, GeometryError> {
    if looks_binary(bytes) {
        parse_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| GeometryError::Stl { line: None, message: format!("ASCII STL is not UTF-8: {e}") })?;
        parse_ascii(text)
    }
}

fn parse_binary(bytes: &[u8]) -> Result<TriangleMesh, GeometryError> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(GeometryError::Truncated { expected: HEADER_LEN + 4, actual: bytes.len() });
    }
    let count = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap()) as usize;
    let expected = HEADER_LEN + 4 + count * RECORD_LEN;
    if bytes.len() < expected {
        return Err(GeometryError::Truncated { expected, actual: bytes.len() });
    }
    let f = |b: &[u8], i: usize| f32::from_le_bytes(b[i * 4..i * 4 + 4].try_into().unwrap());
    let triangles = bytes[HEADER_LEN + 4..expected]
        .chunks_exact(RECORD_LEN)
        .map(|r| Triangle {
            normal: [f(r, 0), f(r, 1), f(r, 2)],
            vertices: [[f(r, 3), f(r, 4), f(r, 5)], [f(r, 6), f(r, 7), f(r, 8)], [f(r, 9), f(r, 10), f(r, 11)]],
            attribute: u16::from_le_bytes([r[48], r[49]]),
        })
        .collect();
    Ok(TriangleMesh { triangles })
}

struct Tokens<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    current: std::str::SplitWhitespace<'a>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Self { lines: text.lines().enumerate(), current: "".split_whitespace(), line: 0 }
    }

    fn next(&mut self) -> Option<&'a str> {
        loop {
            if let Some(t) = self.current.next() {
                return Some(t);
            }
            let (i, l) = self.lines.next()?;
            self.line = i + 1;
            self.current = l.split_whitespace();
        }
    }

    fn err(&self, message: impl Into<String>) -> GeometryError {
        GeometryError::Stl { line: Some(self.line), message: message.into() }
    }

    fn expect(&mut self, word: &str) -> Result<(), GeometryError> {
        match self.next() {
            Some(t) if t.eq_ignore_ascii_case(word) => Ok(()),
            Some(t) => Err(self.err(format!("expected `{word}`, found `{t}`"))),
            None => Err(self.err(format!("expected `{word}`, found end of input"))),
        }
    }

    fn vec3(&mut self) -> Result<[f32; 3], GeometryError> {
        let mut v = [0.0f32; 3];
        for x in &mut v {
            let t = self.next().ok_or_else(|| self.err("expected a number, found end of input"))?;
            *x = t.parse().map_err(|_| self.err(format!("invalid number `{t}`")))?;
        }
        Ok(v)
    }
}

fn parse_ascii(text: &str) -> Result<TriangleMesh, GeometryError> {
    let mut tok = Tokens::new(text);
    tok.expect("solid")?;
    let mut triangles = Vec::new();
    // Skip the optional solid name up to the first keyword.
    let mut word = tok.next();
    while let Some(w) = word {
        if w.eq_ignore_ascii_case("facet") || w.eq_ignore_ascii_case("endsolid") {
            break;
        }
        word = tok.next();
    }
    loop {
        match word {
            Some(w) if w.eq_ignore_ascii_case("facet") => {
                tok.expect("normal")?;
                let normal = tok.vec3()?;
                tok.expect("outer")?;
                tok.expect("loop")?;
                let mut vertices = [[0.0f32; 3]; 3];
                for v in &mut vertices {
                    tok.expect("vertex")?;
                    *v = tok.vec3()?;
                }
                tok.expect("endloop")?;
                tok.expect("endfacet")?;
                triangles.push(Triangle { normal, vertices, attribute: 0 });
            }
            Some(w) if w.eq_ignore_ascii_case("endsolid") => return Ok(TriangleMesh { triangles }),
            Some(w) => return Err(tok.err(format!("expected `facet` or `endsolid`, found `{w}`"))),
            None => return Err(tok.err("missing `endsolid`")),
        }
        word = tok.next();
    }
}

pub fn write_stl(mesh: &TriangleMesh, format: StlFormat) -> Vec<u8> {
    match format {
        StlFormat::Binary => {
            let mut out = Vec::with_capacity(HEADER_LEN + 4 + mesh.len() * RECORD_LEN);
            let mut header = [0u8; HEADER_LEN];
            let tag = b"rodfind binary stl";
            header[..tag.len()].copy_from_slice(tag);
            out.extend_from_slice(&header);
            out.extend_from_slice(&(mesh.len() as u32).to_le_bytes());
            for t in &mesh.triangles {
                for x in t.normal.iter().chain(t.vertices.iter().flatten()) {
                    out.extend_from_slice(&x.to_le_bytes());
                }
                out.extend_from_slice(&t.attribute.to_le_bytes());
            }
            out
        }
        StlFormat::Ascii => {
            let mut s = String::from("solid rodfind\n");
            for t in &mesh.triangles {
                let [nx, ny, nz] = t.normal;
                let _ = writeln!(s, "  facet normal {nx:e} {ny:e} {nz:e}\n    outer loop");
                for [x, y, z] in t.vertices {
                    let _ = writeln!(s, "      vertex {x:e} {y:e} {z:e}");
                }
                s.push_str("    endloop\n  endfacet\n");
            }
            s.push_str("endsolid rodfind\n");
            s.into_bytes()
        }
    }
}
