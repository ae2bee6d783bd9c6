//! Triangulated waveguide cross-sections with region and boundary tags.
//!
//! The rectangle `Q` is split into region 1 and region 2 by an interface
//! curve. Interface edges tagged [`EdgeTag::Gamma`] carry an orientation
//! `a → b`; the tangent is `τ = (b − a)/|b − a|` and the normal is
//! `n = (−τ₂, τ₁)`, so that `τ × n = +1`. A valid mesh has `n` pointing from
//! region 2 into region 1. Shielded parts of the interface ([`EdgeTag::GammaPrime`])
//! are slits: both sides carry their own copy of every node that needs one.

mod format;
mod generate;

pub use format::{load_mesh, save_mesh};
pub use generate::{generate_homogeneous_rect, generate_rect_slab};

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Dielectric region of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    One,
    Two,
}

impl Region {
    pub fn index(self) -> u8 {
        match self {
            Region::One => 1,
            Region::Two => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(Region::One),
            2 => Some(Region::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeTag {
    /// Perfectly conducting outer shield.
    Gamma0,
    /// Dielectric interface between region 1 and region 2.
    Gamma,
    /// Shielded (slit) part of the interface curve.
    GammaPrime,
}

impl EdgeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeTag::Gamma0 => "gamma0",
            EdgeTag::Gamma => "gamma",
            EdgeTag::GammaPrime => "gammaprime",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gamma0" => Some(EdgeTag::Gamma0),
            "gamma" => Some(EdgeTag::Gamma),
            "gammaprime" => Some(EdgeTag::GammaPrime),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedEdge {
    pub nodes: [usize; 2],
    pub tag: EdgeTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<TaggedEdge>,
}

/// Gradients of the three barycentric basis functions and the area of a
/// triangle. `grad[i] = [∂φᵢ/∂x₁, ∂φᵢ/∂x₂]`.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    pub grad: [[f64; 2]; 3],
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Signed area under the stored vertex order.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [i, j, k] = self.triangles[t].nodes;
        let (p, q, r) = (self.nodes[i], self.nodes[j], self.nodes[k]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [i, j, k] = self.triangles[t].nodes;
        let (p, q, r) = (self.nodes[i], self.nodes[j], self.nodes[k]);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    pub fn element(&self, t: usize) -> ElementGeometry {
        let [i, j, k] = self.triangles[t].nodes;
        let p = [self.nodes[i], self.nodes[j], self.nodes[k]];
        let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut grad = [[0.0; 2]; 3];
        for m in 0..3 {
            let a = p[(m + 1) % 3];
            let b = p[(m + 2) % 3];
            grad[m] = [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a];
        }
        ElementGeometry {
            area: 0.5 * two_a,
            grad,
        }
    }

    /// Indices into `edges` of the oriented interface edges, in storage order.
    pub fn interface_edges(&self) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.tag == EdgeTag::Gamma)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count_edges(&self, tag: EdgeTag) -> usize {
        self.edges.iter().filter(|e| e.tag == tag).count()
    }

    /// Unit tangent and normal `(τ, n)` of a tagged edge under its stored
    /// orientation.
    pub fn edge_frame(&self, e: usize) -> ([f64; 2], [f64; 2]) {
        let [a, b] = self.edges[e].nodes;
        let (pa, pb) = (self.nodes[a], self.nodes[b]);
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = d[0].hypot(d[1]);
        let tau = [d[0] / len, d[1] / len];
        (tau, [-tau[1], tau[0]])
    }

    /// Nodes touched by at least one edge with the given tag.
    pub fn nodes_on(&self, tag: EdgeTag) -> Vec<bool> {
        let mut mark = vec![false; self.nodes.len()];
        for e in self.edges.iter().filter(|e| e.tag == tag) {
            mark[e.nodes[0]] = true;
            mark[e.nodes[1]] = true;
        }
        mark
    }

    /// Map from undirected edge to the triangles containing it.
    fn edge_triangles(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            let [i, j, k] = tri.nodes;
            for (a, b) in [(i, j), (j, k), (k, i)] {
                map.entry(sorted_pair(a, b)).or_default().push(t);
            }
        }
        map
    }

    /// Check every structural invariant, including interface orientation.
    pub fn validate(&self) -> Result<()> {
        self.validate_topology()?;
        self.check_orientation()
    }

    /// Structural checks that do not depend on the orientation of
    /// interface edges.
    pub fn validate_topology(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.triangles.is_empty() {
            return Err(Error::MeshValidation("mesh has no triangles".into()));
        }
        for (i, p) in self.nodes.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::MeshValidation(format!("node {i} has non-finite coordinates")));
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&bad) = tri.nodes.iter().find(|&&v| v >= n) {
                return Err(Error::MeshValidation(format!(
                    "triangle {t} references node {bad}, but there are only {n} nodes"
                )));
            }
            let area = self.signed_area(t);
            if area.is_nan() || area <= 0.0 {
                return Err(Error::MeshValidation(format!(
                    "triangle {t} has non-positive signed area {area:e}"
                )));
            }
        }
        let adjacency = self.edge_triangles();
        if let Some((edge, tris)) = adjacency.iter().find(|(_, v)| v.len() > 2) {
            return Err(Error::MeshValidation(format!(
                "edge {edge:?} is shared by {} triangles",
                tris.len()
            )));
        }

        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        for (e, edge) in self.edges.iter().enumerate() {
            let [a, b] = edge.nodes;
            if a >= n || b >= n {
                return Err(Error::MeshValidation(format!(
                    "edge {e} references a node index beyond {n}"
                )));
            }
            if a == b {
                return Err(Error::MeshValidation(format!("edge {e} is degenerate")));
            }
            let key = sorted_pair(a, b);
            if tagged.insert(key, e).is_some() {
                return Err(Error::MeshValidation(format!("edge {a}-{b} is tagged twice")));
            }
            let Some(tris) = adjacency.get(&key) else {
                return Err(Error::MeshValidation(format!(
                    "tagged edge {e} ({a}-{b}) is not an edge of the triangulation"
                )));
            };
            match edge.tag {
                EdgeTag::Gamma => {
                    if tris.len() != 2 || self.triangles[tris[0]].region == self.triangles[tris[1]].region {
                        return Err(Error::MeshValidation(format!(
                            "interface edge {e} ({a}-{b}) does not separate region 1 from region 2"
                        )));
                    }
                }
                EdgeTag::Gamma0 | EdgeTag::GammaPrime => {
                    if tris.len() != 1 {
                        return Err(Error::MeshValidation(format!(
                            "{} edge {e} ({a}-{b}) is interior to the triangulation",
                            edge.tag.as_str()
                        )));
                    }
                }
            }
        }

        for (key, tris) in &adjacency {
            let is_tagged = tagged.contains_key(key);
            if tris.len() == 1 && !is_tagged {
                return Err(Error::MeshValidation(format!(
                    "boundary edge {}-{} carries no tag",
                    key.0, key.1
                )));
            }
            if tris.len() == 2 && self.triangles[tris[0]].region != self.triangles[tris[1]].region && !is_tagged {
                return Err(Error::MeshValidation(format!(
                    "edge {}-{} separates the two regions but is not tagged gamma",
                    key.0, key.1
                )));
            }
        }

        self.check_slit_twins()
    }

    /// Every shielded edge must have a geometric twin on the other side of
    /// the slit.
    fn check_slit_twins(&self) -> Result<()> {
        let slit: Vec<usize> = (0..self.edges.len())
            .filter(|&e| self.edges[e].tag == EdgeTag::GammaPrime)
            .collect();
        let same = |p: [f64; 2], q: [f64; 2]| {
            let scale = 1.0 + p[0].abs().max(p[1].abs());
            (p[0] - q[0]).abs() <= 1e-12 * scale && (p[1] - q[1]).abs() <= 1e-12 * scale
        };
        for &e in &slit {
            let [a, b] = self.edges[e].nodes;
            let (pa, pb) = (self.nodes[a], self.nodes[b]);
            let twin = slit.iter().any(|&f| {
                if f == e {
                    return false;
                }
                let [c, d] = self.edges[f].nodes;
                let (pc, pd) = (self.nodes[c], self.nodes[d]);
                let geometric = (same(pa, pc) && same(pb, pd)) || (same(pa, pd) && same(pb, pc));
                geometric && sorted_pair(a, b) != sorted_pair(c, d)
            });
            if !twin {
                return Err(Error::MeshValidation(format!(
                    "gammaprime edge {e} ({a}-{b}) has no twin on the other side of the slit"
                )));
            }
        }
        Ok(())
    }

    /// Every interface edge must have its normal pointing into region 1,
    /// judged by the centroids of the two adjacent triangles.
    pub fn check_orientation(&self) -> Result<()> {
        let adjacency = self.edge_triangles();
        for e in self.interface_edges() {
            let [a, b] = self.edges[e].nodes;
            let Some(tris) = adjacency.get(&sorted_pair(a, b)) else {
                return Err(Error::MeshValidation(format!(
                    "interface edge {e} ({a}-{b}) is not an edge of the triangulation"
                )));
            };
            let (_, normal) = self.edge_frame(e);
            let mid = [
                0.5 * (self.nodes[a][0] + self.nodes[b][0]),
                0.5 * (self.nodes[a][1] + self.nodes[b][1]),
            ];
            for &t in tris {
                let c = self.centroid(t);
                let side = (c[0] - mid[0]) * normal[0] + (c[1] - mid[1]) * normal[1];
                let expected = match self.triangles[t].region {
                    Region::One => side > 0.0,
                    Region::Two => side < 0.0,
                };
                if !expected {
                    return Err(Error::InconsistentOrientation { edge: e, a, b });
                }
            }
        }
        Ok(())
    }

    /// Turn the listed interface edges into a shielded slit. Nodes interior
    /// to the slit, and slit nodes on the outer boundary, are duplicated;
    /// region-1 triangles and region-1 boundary edges switch to the copies.
    /// A slit tip that continues into an unshielded interface keeps a
    /// single node.
    pub fn with_slit(&self, interface_edges: &[usize]) -> Result<Mesh> {
        for &e in interface_edges {
            if self.edges.get(e).map(|x| x.tag) != Some(EdgeTag::Gamma) {
                return Err(Error::MeshValidation(format!(
                    "edge {e} is not an interface edge and cannot become a slit"
                )));
            }
        }
        let mut degree = vec![0usize; self.nodes.len()];
        for &e in interface_edges {
            for v in self.edges[e].nodes {
                degree[v] += 1;
            }
        }
        let on_shield = self.nodes_on(EdgeTag::Gamma0);
        let mut mesh = self.clone();
        let mut twin = vec![None; self.nodes.len()];
        for v in 0..self.nodes.len() {
            if degree[v] >= 2 || (degree[v] == 1 && on_shield[v]) {
                twin[v] = Some(mesh.nodes.len());
                mesh.nodes.push(self.nodes[v]);
            }
        }
        for tri in &mut mesh.triangles {
            if tri.region == Region::One {
                for v in &mut tri.nodes {
                    if let Some(w) = twin[*v] {
                        *v = w;
                    }
                }
            }
        }
        let adjacency = self.edge_triangles();
        for edge in &mut mesh.edges {
            if edge.tag != EdgeTag::Gamma0 {
                continue;
            }
            let [a, b] = edge.nodes;
            let t = adjacency[&sorted_pair(a, b)][0];
            if self.triangles[t].region == Region::One {
                edge.nodes = [twin[a].unwrap_or(a), twin[b].unwrap_or(b)];
            }
        }
        for &e in interface_edges {
            let [a, b] = self.edges[e].nodes;
            mesh.edges[e].tag = EdgeTag::GammaPrime;
            mesh.edges.push(TaggedEdge {
                nodes: [twin[a].unwrap_or(a), twin[b].unwrap_or(b)],
                tag: EdgeTag::GammaPrime,
            });
        }
        mesh.validate()?;
        Ok(mesh)
    }
}
