//! Mesh file readers and writers.
//!
//! Native format (`softmesh 1`), blank lines and `#` comments ignored:
//!
//! ```text
//! softmesh 1
//! vertices N
//! x y z            (N lines, mm)
//! tets M
//! a b c d          (M lines, zero-based)
//! cavity <name> K  (optional, repeatable)
//! a b c            (K lines)
//! fixed K          (optional)
//! i                (K lines, or whitespace separated)
//! ```
//!
//! Gmsh MSH 2 ASCII files are also accepted; only type-4 (tetrahedron)
//! elements are kept.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{parse_err, MeshError, TetMesh};
use crate::Point3;

/// Contents of a mesh file: geometry plus optional named cavities and fixed
/// vertex set.
#[derive(Debug, Clone)]
pub struct MeshFile {
    pub mesh: TetMesh,
    pub cavities: Vec<(String, Vec<[usize; 3]>)>,
    pub fixed: Vec<usize>,
}

/// Loads a mesh, picking the parser from the file contents.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<MeshFile, MeshError> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with("$MeshFormat") {
        parse_gmsh_v2(&text)
    } else {
        parse_softmesh(&text)
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-empty, non-comment line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.inner.by_ref() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                self.last = i + 1;
                return Some((i + 1, line));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), MeshError> {
        let last = self.last;
        self.next()
            .ok_or_else(|| parse_err(last + 1, format!("unexpected end of file, expected {what}")))
    }
}

fn parse_fields<T: std::str::FromStr>(line_no: usize, line: &str, count: usize) -> Result<Vec<T>, MeshError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != count {
        return Err(parse_err(
            line_no,
            format!("expected {count} fields, found {}", fields.len()),
        ));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<T>()
                .map_err(|_| parse_err(line_no, format!("cannot parse `{f}`")))
        })
        .collect()
}

fn section_count(line_no: usize, line: &str, keyword: &str) -> Result<usize, MeshError> {
    let mut it = line.split_whitespace();
    if it.next() != Some(keyword) {
        return Err(parse_err(line_no, format!("expected `{keyword} <count>`")));
    }
    let count = it
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| parse_err(line_no, format!("missing count after `{keyword}`")))?;
    if it.next().is_some() {
        return Err(parse_err(line_no, "trailing fields"));
    }
    Ok(count)
}

fn check_index(line_no: usize, idx: usize, n: usize) -> Result<usize, MeshError> {
    if idx >= n {
        Err(parse_err(
            line_no,
            format!("vertex index {idx} out of range for {n} vertices"),
        ))
    } else {
        Ok(idx)
    }
}

pub fn parse_softmesh(text: &str) -> Result<MeshFile, MeshError> {
    let mut lines = Lines::new(text);
    let (no, header) = lines.expect("header")?;
    if header.split_whitespace().collect::<Vec<_>>() != ["softmesh", "1"] {
        return Err(parse_err(no, "expected header `softmesh 1`"));
    }

    let (no, line) = lines.expect("vertices section")?;
    let nv = section_count(no, line, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, line) = lines.expect("vertex")?;
        let xyz: Vec<f64> = parse_fields(no, line, 3)?;
        if xyz.iter().any(|c| !c.is_finite()) {
            return Err(parse_err(no, "non-finite coordinate"));
        }
        vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }

    let (no, line) = lines.expect("tets section")?;
    let nt = section_count(no, line, "tets")?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (no, line) = lines.expect("tet")?;
        let idx: Vec<usize> = parse_fields(no, line, 4)?;
        let mut tet = [0; 4];
        for (slot, &i) in tet.iter_mut().zip(&idx) {
            *slot = check_index(no, i, nv)?;
        }
        tets.push(tet);
    }

    let mut cavities = Vec::new();
    let mut fixed = Vec::new();
    while let Some((no, line)) = lines.next() {
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("cavity") => {
                let name = fields
                    .next()
                    .ok_or_else(|| parse_err(no, "missing cavity name"))?
                    .to_owned();
                let count: usize = fields
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(no, "missing cavity triangle count"))?;
                let mut tris = Vec::with_capacity(count);
                for _ in 0..count {
                    let (no, line) = lines.expect("cavity triangle")?;
                    let idx: Vec<usize> = parse_fields(no, line, 3)?;
                    tris.push([
                        check_index(no, idx[0], nv)?,
                        check_index(no, idx[1], nv)?,
                        check_index(no, idx[2], nv)?,
                    ]);
                }
                cavities.push((name, tris));
            }
            Some("fixed") => {
                let count = section_count(no, line, "fixed")?;
                while fixed.len() < count {
                    let (no, line) = lines.expect("fixed vertex index")?;
                    for f in line.split_whitespace() {
                        let i: usize = f.parse().map_err(|_| parse_err(no, format!("cannot parse `{f}`")))?;
                        fixed.push(check_index(no, i, nv)?);
                    }
                }
                if fixed.len() != count {
                    return Err(parse_err(no, "too many fixed indices"));
                }
            }
            _ => return Err(parse_err(no, format!("unknown section `{line}`"))),
        }
    }

    Ok(MeshFile {
        mesh: TetMesh::new(vertices, tets)?,
        cavities,
        fixed,
    })
}

pub fn write_softmesh(file: &MeshFile) -> String {
    let mut out = String::from("softmesh 1\n");
    let mesh = &file.mesh;
    let _ = writeln!(out, "vertices {}", mesh.num_vertices());
    for p in mesh.rest_positions() {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    let _ = writeln!(out, "tets {}", mesh.num_tets());
    for t in mesh.tets() {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    for (name, tris) in &file.cavities {
        let _ = writeln!(out, "cavity {name} {}", tris.len());
        for t in tris {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
    }
    if !file.fixed.is_empty() {
        let _ = writeln!(out, "fixed {}", file.fixed.len());
        for chunk in file.fixed.chunks(16) {
            let line: Vec<String> = chunk.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

/// Gmsh MSH 2.x ASCII import. Node tags may be arbitrary; they are remapped
/// to dense zero-based indices in file order.
pub fn parse_gmsh_v2(text: &str) -> Result<MeshFile, MeshError> {
    let mut lines = Lines::new(text);
    let mut vertices = Vec::new();
    let mut tag_to_index: HashMap<usize, usize> = HashMap::new();
    let mut tets = Vec::new();
    let mut saw_format = false;

    while let Some((no, line)) = lines.next() {
        match line {
            "$MeshFormat" => {
                let (no, fmt) = lines.expect("format line")?;
                if !fmt.starts_with('2') {
                    return Err(parse_err(no, format!("unsupported MSH version `{fmt}`")));
                }
                let parts: Vec<&str> = fmt.split_whitespace().collect();
                if parts.get(1) != Some(&"0") {
                    return Err(parse_err(no, "only ASCII MSH files are supported"));
                }
                lines.expect("$EndMeshFormat")?;
                saw_format = true;
            }
            "$Nodes" => {
                let (no, count) = lines.expect("node count")?;
                let n: usize = count.parse().map_err(|_| parse_err(no, "bad node count"))?;
                for _ in 0..n {
                    let (no, line) = lines.expect("node")?;
                    let f: Vec<f64> = parse_fields(no, line, 4)?;
                    tag_to_index.insert(f[0] as usize, vertices.len());
                    vertices.push(Point3::new(f[1], f[2], f[3]));
                }
                lines.expect("$EndNodes")?;
            }
            "$Elements" => {
                let (no, count) = lines.expect("element count")?;
                let n: usize = count.parse().map_err(|_| parse_err(no, "bad element count"))?;
                for _ in 0..n {
                    let (no, line) = lines.expect("element")?;
                    let f: Vec<usize> = line
                        .split_whitespace()
                        .map(|s| s.parse().map_err(|_| parse_err(no, "bad element field")))
                        .collect::<Result<_, _>>()?;
                    if f.len() < 3 {
                        return Err(parse_err(no, "truncated element"));
                    }
                    if f[1] != 4 {
                        continue;
                    }
                    let start = 3 + f[2];
                    if f.len() != start + 4 {
                        return Err(parse_err(no, "tetrahedron needs 4 nodes"));
                    }
                    let mut tet = [0; 4];
                    for (slot, tag) in tet.iter_mut().zip(&f[start..]) {
                        *slot = *tag_to_index
                            .get(tag)
                            .ok_or_else(|| parse_err(no, format!("unknown node tag {tag}")))?;
                    }
                    tets.push(tet);
                }
                lines.expect("$EndElements")?;
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                // Skip unknown sections such as $PhysicalNames.
                let end = format!("$End{}", &other[1..]);
                loop {
                    let (_, l) = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            _ => return Err(parse_err(no, format!("unexpected line `{line}`"))),
        }
    }
    if !saw_format {
        return Err(parse_err(1, "missing $MeshFormat"));
    }
    if tets.is_empty() {
        return Err(parse_err(lines.last, "no tetrahedra found"));
    }
    Ok(MeshFile {
        mesh: TetMesh::new(vertices, tets)?,
        cavities: Vec::new(),
        fixed: Vec::new(),
    })
}
