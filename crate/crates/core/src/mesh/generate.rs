use super::{EdgeTag, Mesh, Region, TaggedEdge, Triangle};
use crate::error::{Error, Result};

/// Structured triangulation of `[0, width] × [0, height]` with region 2 on
/// `x < slab_x` and region 1 on `x > slab_x`. `slab_x` is snapped to the
/// nearest interior grid line. Every cell is split along its lower-left to
/// upper-right diagonal.
pub fn generate_rect_slab(width: f64, height: f64, slab_x: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::Geometry(format!(
            "nx and ny must be at least 2, got {nx} x {ny}"
        )));
    }
    if !(width > 0.0 && width.is_finite() && height > 0.0 && height.is_finite()) {
        return Err(Error::Geometry(format!(
            "rectangle dimensions must be positive and finite, got {width} x {height}"
        )));
    }
    if !(slab_x > 0.0 && slab_x < width) {
        return Err(Error::Geometry(format!(
            "interface position {slab_x} lies outside the open interval (0, {width})"
        )));
    }
    let is = ((slab_x / width) * nx as f64).round().clamp(1.0, (nx - 1) as f64) as usize;

    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([width * i as f64 / nx as f64, height * j as f64 / ny as f64]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let region = if i < is { Region::Two } else { Region::One };
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push(Triangle {
                nodes: [a, b, c],
                region,
            });
            triangles.push(Triangle {
                nodes: [a, c, d],
                region,
            });
        }
    }

    let mut edges = Vec::with_capacity(2 * (nx + ny) + ny);
    let shield = |a, b| TaggedEdge {
        nodes: [a, b],
        tag: EdgeTag::Gamma0,
    };
    for i in 0..nx {
        edges.push(shield(id(i, 0), id(i + 1, 0)));
    }
    for j in 0..ny {
        edges.push(shield(id(nx, j), id(nx, j + 1)));
    }
    for i in (0..nx).rev() {
        edges.push(shield(id(i + 1, ny), id(i, ny)));
    }
    for j in (0..ny).rev() {
        edges.push(shield(id(0, j + 1), id(0, j)));
    }
    // downward tangent gives the normal (1, 0), from region 2 into region 1
    for j in (0..ny).rev() {
        edges.push(TaggedEdge {
            nodes: [id(is, j + 1), id(is, j)],
            tag: EdgeTag::Gamma,
        });
    }

    let mesh = Mesh {
        nodes,
        triangles,
        edges,
    };
    debug_assert!(mesh.validate().is_ok());
    Ok(mesh)
}

/// Same triangulation as [`generate_rect_slab`]; the interface is kept so
/// that the coupling operator is still assembled when both regions are
/// later given the same permittivity.
pub fn generate_homogeneous_rect(width: f64, height: f64, nx: usize, ny: usize, interface_x: f64) -> Result<Mesh> {
    generate_rect_slab(width, height, interface_x, nx, ny)
}
