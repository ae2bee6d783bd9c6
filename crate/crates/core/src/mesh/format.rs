//! Line-oriented text format:
//!
//! ```text
//! nodes <N>
//! <x> <y>
//! triangles <M>
//! <i> <j> <k> <region>
//! edges <E>
//! <i> <j> <tag>
//! ```
//!
//! Indices are 0-based, regions are 1 or 2, and tags are `gamma0`, `gamma`
//! or `gammaprime`. Blank lines are ignored.

use std::fmt::Write as _;

use super::{EdgeTag, Mesh, Region, TaggedEdge, Triangle};
use crate::error::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
            last: 0,
        }
    }

    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !fields.is_empty() {
                self.last = i + 1;
                return Some((i + 1, fields));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.next().ok_or_else(|| Error::MeshFormat {
            line: self.last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn header(&mut self, keyword: &str) -> Result<usize> {
        let (line, f) = self.expect(&format!("'{keyword} <count>'"))?;
        if f.len() != 2 || f[0] != keyword {
            return Err(Error::MeshFormat {
                line,
                msg: format!("expected '{keyword} <count>', found '{}'", f.join(" ")),
            });
        }
        f[1].parse().map_err(|_| Error::MeshFormat {
            line,
            msg: format!("malformed {keyword} count '{}'", f[1]),
        })
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::MeshFormat {
        line,
        msg: format!("malformed {what} '{s}'"),
    })
}

fn arity(line: usize, f: &[&str], n: usize, what: &str) -> Result<()> {
    if f.len() != n {
        return Err(Error::MeshFormat {
            line,
            msg: format!("{what} line needs {n} fields, found {}", f.len()),
        });
    }
    Ok(())
}

/// Parse and validate a mesh.
pub fn load_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines::new(text);

    let n = lines.header("nodes")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, f) = lines.expect("a node line")?;
        arity(line, &f, 2, "node")?;
        nodes.push([
            parse_field(line, f[0], "coordinate")?,
            parse_field(line, f[1], "coordinate")?,
        ]);
    }

    let m = lines.header("triangles")?;
    let mut triangles = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, f) = lines.expect("a triangle line")?;
        arity(line, &f, 4, "triangle")?;
        let mut idx = [0usize; 3];
        for (slot, s) in idx.iter_mut().zip(&f[..3]) {
            *slot = parse_field(line, s, "node index")?;
            if *slot >= n {
                return Err(Error::MeshFormat {
                    line,
                    msg: format!("dangling node index {slot} (only {n} nodes)"),
                });
            }
        }
        let r: u8 = parse_field(line, f[3], "region")?;
        let region = Region::from_index(r).ok_or_else(|| Error::MeshFormat {
            line,
            msg: format!("region must be 1 or 2, found {r}"),
        })?;
        triangles.push(Triangle { nodes: idx, region });
    }

    let e = lines.header("edges")?;
    let mut edges = Vec::with_capacity(e);
    for _ in 0..e {
        let (line, f) = lines.expect("an edge line")?;
        arity(line, &f, 3, "edge")?;
        let a: usize = parse_field(line, f[0], "node index")?;
        let b: usize = parse_field(line, f[1], "node index")?;
        if a >= n || b >= n {
            return Err(Error::MeshFormat {
                line,
                msg: format!("dangling node index in edge {a}-{b} (only {n} nodes)"),
            });
        }
        let tag = EdgeTag::parse(f[2]).ok_or_else(|| Error::MeshFormat {
            line,
            msg: format!("unknown edge tag '{}'", f[2]),
        })?;
        edges.push(TaggedEdge { nodes: [a, b], tag });
    }

    if let Some((line, f)) = lines.next() {
        return Err(Error::MeshFormat {
            line,
            msg: format!("trailing content '{}'", f.join(" ")),
        });
    }

    let mesh = Mesh {
        nodes,
        triangles,
        edges,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Serialize a mesh. Coordinates use the shortest representation that
/// parses back to the same `f64`, so `load_mesh(save_mesh(m)) == m`.
pub fn save_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "nodes {}", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(out, "{:?} {:?}", p[0], p[1]);
    }
    let _ = writeln!(out, "triangles {}", mesh.triangles.len());
    for t in &mesh.triangles {
        let [i, j, k] = t.nodes;
        let _ = writeln!(out, "{i} {j} {k} {}", t.region.index());
    }
    let _ = writeln!(out, "edges {}", mesh.edges.len());
    for e in &mesh.edges {
        let _ = writeln!(out, "{} {} {}", e.nodes[0], e.nodes[1], e.tag.as_str());
    }
    out
}
