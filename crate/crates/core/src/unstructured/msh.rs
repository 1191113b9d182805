//! Reader and writer for an ASCII subset of the Gmsh MSH 2.2 format.
//!
//! Supported sections: `$MeshFormat` (version 2.x, ASCII), `$PhysicalNames`,
//! `$Nodes` and `$Elements`. Element types: 1 (line), 2 (triangle),
//! 3 (quadrangle), 4 (tetrahedron), 5 (hexahedron) and 15 (point, skipped).
//! The first element tag is the physical group. Unknown sections are skipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::phm::Vec3;

/// Element shapes understood by the reader.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Line,
    Triangle,
    Quad,
    Tet,
    Hex,
}

impl ElementKind {
    pub fn from_gmsh(code: u32) -> Option<Self> {
        match code {
            1 => Some(ElementKind::Line),
            2 => Some(ElementKind::Triangle),
            3 => Some(ElementKind::Quad),
            4 => Some(ElementKind::Tet),
            5 => Some(ElementKind::Hex),
            _ => None,
        }
    }

    pub fn gmsh_code(self) -> u32 {
        match self {
            ElementKind::Line => 1,
            ElementKind::Triangle => 2,
            ElementKind::Quad => 3,
            ElementKind::Tet => 4,
            ElementKind::Hex => 5,
        }
    }

    pub fn node_count(self) -> usize {
        match self {
            ElementKind::Line => 2,
            ElementKind::Triangle => 3,
            ElementKind::Quad => 4,
            ElementKind::Tet => 4,
            ElementKind::Hex => 8,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ElementKind::Line => 1,
            ElementKind::Triangle | ElementKind::Quad => 2,
            ElementKind::Tet | ElementKind::Hex => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    /// Zero-based node indices.
    pub nodes: Vec<usize>,
    pub physical: i64,
}

/// Raw mesh content: nodes, elements of all dimensions and group names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeshData {
    pub nodes: Vec<Vec3>,
    pub elements: Vec<Element>,
    /// `(dimension, tag, name)`
    pub physical_names: Vec<(usize, i64, String)>,
}

impl MeshData {
    /// Highest element dimension present.
    pub fn dim(&self) -> usize {
        self.elements.iter().map(|e| e.kind.dim()).max().unwrap_or(0)
    }

    pub fn physical_name(&self, dim: usize, tag: i64) -> Option<&str> {
        self.physical_names
            .iter()
            .find(|(d, t, _)| *d == dim && *t == tag)
            .map(|(_, _, n)| n.as_str())
    }
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::MeshParse {
        line,
        msg: msg.into(),
    }
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.iter.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some(t);
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<&'a str> {
        let line = self.line;
        self.next()
            .ok_or_else(|| perr(line, format!("unexpected end of file, expected {what}")))
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| perr(line, format!("cannot parse {what} from '{tok}'")))
}

pub fn parse_msh_str(text: &str) -> Result<MeshData> {
    let mut lines = Lines {
        iter: text.lines().enumerate(),
        line: 0,
    };
    let mut data = MeshData::default();
    let mut node_ids: HashMap<u64, usize> = HashMap::new();
    let mut saw_format = false;
    let mut raw_elements: Vec<(usize, ElementKind, i64, Vec<u64>)> = Vec::new();
    while let Some(head) = lines.next() {
        match head {
            "$MeshFormat" => {
                let l = lines.expect("format line")?;
                let mut it = l.split_whitespace();
                let version: f64 = parse_num(it.next().unwrap_or(""), lines.line, "version")?;
                let file_type: i32 = parse_num(it.next().unwrap_or(""), lines.line, "file type")?;
                if !(2.0..3.0).contains(&version) {
                    return Err(perr(lines.line, format!("unsupported MSH version {version}")));
                }
                if file_type != 0 {
                    return Err(perr(lines.line, "binary MSH files are not supported"));
                }
                if lines.expect("$EndMeshFormat")? != "$EndMeshFormat" {
                    return Err(perr(lines.line, "expected $EndMeshFormat"));
                }
                saw_format = true;
            }
            "$PhysicalNames" => {
                let n: usize = parse_num(lines.expect("count")?, lines.line, "count")?;
                for _ in 0..n {
                    let l = lines.expect("physical name")?;
                    let mut it = l.splitn(3, char::is_whitespace);
                    let d: usize = parse_num(it.next().unwrap_or(""), lines.line, "dimension")?;
                    let t: i64 = parse_num(it.next().unwrap_or("").trim(), lines.line, "tag")?;
                    let name = it.next().unwrap_or("").trim().trim_matches('"').to_string();
                    data.physical_names.push((d, t, name));
                }
                if lines.expect("$EndPhysicalNames")? != "$EndPhysicalNames" {
                    return Err(perr(lines.line, "expected $EndPhysicalNames"));
                }
            }
            "$Nodes" => {
                let n: usize = parse_num(lines.expect("count")?, lines.line, "node count")?;
                data.nodes.reserve(n);
                for _ in 0..n {
                    let l = lines.expect("node")?;
                    let tok: Vec<&str> = l.split_whitespace().collect();
                    if tok.len() < 4 {
                        return Err(perr(lines.line, "node line needs an id and three coordinates"));
                    }
                    let id: u64 = parse_num(tok[0], lines.line, "node id")?;
                    let mut x = [0.0; 3];
                    for d in 0..3 {
                        x[d] = parse_num(tok[1 + d], lines.line, "coordinate")?;
                    }
                    if node_ids.insert(id, data.nodes.len()).is_some() {
                        return Err(perr(lines.line, format!("duplicate node id {id}")));
                    }
                    data.nodes.push(x);
                }
                if lines.expect("$EndNodes")? != "$EndNodes" {
                    return Err(perr(lines.line, "expected $EndNodes"));
                }
            }
            "$Elements" => {
                let n: usize = parse_num(lines.expect("count")?, lines.line, "element count")?;
                for _ in 0..n {
                    let l = lines.expect("element")?;
                    let line = lines.line;
                    let tok: Vec<&str> = l.split_whitespace().collect();
                    if tok.len() < 3 {
                        return Err(perr(line, "truncated element line"));
                    }
                    let code: u32 = parse_num(tok[1], line, "element type")?;
                    if code == 15 {
                        continue;
                    }
                    let kind = ElementKind::from_gmsh(code)
                        .ok_or_else(|| perr(line, format!("unsupported element type {code}")))?;
                    let ntags: usize = parse_num(tok[2], line, "tag count")?;
                    let first = 3 + ntags;
                    if tok.len() != first + kind.node_count() {
                        return Err(perr(
                            line,
                            format!("element of type {code} needs {} nodes", kind.node_count()),
                        ));
                    }
                    let physical = if ntags > 0 {
                        parse_num(tok[3], line, "physical tag")?
                    } else {
                        0
                    };
                    let nodes = tok[first..]
                        .iter()
                        .map(|t| parse_num::<u64>(t, line, "node id"))
                        .collect::<Result<Vec<_>>>()?;
                    raw_elements.push((line, kind, physical, nodes));
                }
                if lines.expect("$EndElements")? != "$EndElements" {
                    return Err(perr(lines.line, "expected $EndElements"));
                }
            }
            other if other.starts_with('$') => {
                let end = format!("$End{}", &other[1..]);
                loop {
                    if lines.expect(&end)? == end {
                        break;
                    }
                }
            }
            other => return Err(perr(lines.line, format!("unexpected content '{other}'"))),
        }
    }
    if !saw_format {
        return Err(perr(1, "missing $MeshFormat section"));
    }
    for (line, kind, physical, ids) in raw_elements {
        let nodes = ids
            .iter()
            .map(|id| {
                node_ids
                    .get(id)
                    .copied()
                    .ok_or_else(|| perr(line, format!("element references unknown node {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        data.elements.push(Element {
            kind,
            nodes,
            physical,
        });
    }
    Ok(data)
}

pub fn read_msh(path: &Path) -> Result<MeshData> {
    let text = std::fs::read_to_string(path)?;
    parse_msh_str(&text)
}

pub fn write_msh_string(data: &MeshData) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    if !data.physical_names.is_empty() {
        let _ = writeln!(s, "$PhysicalNames\n{}", data.physical_names.len());
        for (d, t, n) in &data.physical_names {
            let _ = writeln!(s, "{d} {t} \"{n}\"");
        }
        s.push_str("$EndPhysicalNames\n");
    }
    let _ = writeln!(s, "$Nodes\n{}", data.nodes.len());
    for (i, x) in data.nodes.iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", i + 1, x[0], x[1], x[2]);
    }
    s.push_str("$EndNodes\n");
    let _ = writeln!(s, "$Elements\n{}", data.elements.len());
    for (i, e) in data.elements.iter().enumerate() {
        let _ = write!(s, "{} {} 2 {} {}", i + 1, e.kind.gmsh_code(), e.physical, e.physical);
        for n in &e.nodes {
            let _ = write!(s, " {}", n + 1);
        }
        s.push('\n');
    }
    s.push_str("$EndElements\n");
    s
}

pub fn write_msh(data: &MeshData, path: &Path) -> Result<()> {
    std::fs::write(path, write_msh_string(data))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TET: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n2\n2 1 \"wall\"\n3 2 \"air\"\n$EndPhysicalNames\n$Nodes\n4\n10 0 0 0\n11 1 0 0\n12 0 1 0\n13 0 0 1\n$EndNodes\n$Elements\n3\n1 15 2 0 0 10\n2 2 2 1 1 10 11 12\n3 4 2 2 2 10 11 12 13\n$EndElements\n";

    #[test]
    fn parses_single_tet() {
        let d = parse_msh_str(TET).unwrap();
        assert_eq!(d.nodes.len(), 4);
        assert_eq!(d.elements.len(), 2);
        assert_eq!(d.elements[1].kind, ElementKind::Tet);
        assert_eq!(d.elements[1].nodes, vec![0, 1, 2, 3]);
        assert_eq!(d.physical_name(2, 1), Some("wall"));
        assert_eq!(d.dim(), 3);
    }

    #[test]
    fn round_trip() {
        let d = parse_msh_str(TET).unwrap();
        let again = parse_msh_str(&write_msh_string(&d)).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = TET.replace("3 4 2 2 2 10 11 12 13", "3 6 2 2 2 10 11 12 13");
        match parse_msh_str(&bad) {
            Err(Error::MeshParse { line, msg }) => {
                assert_eq!(line, 20);
                assert!(msg.contains("unsupported element type 6"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let missing = TET.replace("10 11 12 13", "10 11 12 99");
        assert!(matches!(parse_msh_str(&missing), Err(Error::MeshParse { .. })));
        assert!(parse_msh_str("$Nodes\n0\n$EndNodes\n").is_err());
        let binary = TET.replace("2.2 0 8", "2.2 1 8");
        assert!(parse_msh_str(&binary).is_err());
    }
}
