//! Norms of errors between finite element functions and reference fields.
//!
//! Integration runs over the FE function's own mesh (per HCT subtriangle),
//! with optional uniform subcell refinement so that oscillatory reference
//! fields are resolved independently of the mesh size.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::quad::QuadratureRule;
use crate::space::{map_ref, FeFunction, Field2, SpaceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    /// Full H¹ norm: value and gradient parts.
    H1,
    /// Full H² norm: value, gradient and all Hessian entries.
    H2,
    /// L² norm of a single Hessian-entry error.
    L2Entry(usize, usize),
    /// L¹ norm of a single Hessian-entry error.
    L1Entry(usize, usize),
}

impl NormKind {
    fn order(self) -> u8 {
        match self {
            NormKind::L1 | NormKind::L2 => 0,
            NormKind::H1 => 1,
            _ => 2,
        }
    }
}

fn entry(h: [f64; 3], k: usize, l: usize) -> f64 {
    match (k, l) {
        (0, 0) => h[0],
        (1, 1) => h[2],
        _ => h[1],
    }
}

/// Split a triangle into s² congruent subtriangles.
fn subcells(pts: [Vec2; 3], s: usize) -> Vec<[Vec2; 3]> {
    let pt = |i: usize, j: usize| -> Vec2 {
        let a = i as f64 / s as f64;
        let b = j as f64 / s as f64;
        [
            pts[0][0] + a * (pts[1][0] - pts[0][0]) + b * (pts[2][0] - pts[0][0]),
            pts[0][1] + a * (pts[1][1] - pts[0][1]) + b * (pts[2][1] - pts[0][1]),
        ]
    };
    let mut out = Vec::with_capacity(s * s);
    for i in 0..s {
        for j in 0..s - i {
            out.push([pt(i, j), pt(i + 1, j), pt(i, j + 1)]);
            if i + j + 2 <= s {
                out.push([pt(i + 1, j), pt(i + 1, j + 1), pt(i, j + 1)]);
            }
        }
    }
    out
}

fn tri_area(t: [Vec2; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1])
        - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0]))
        .abs()
}

/// Norm of (u − exact). `subcell ≥ 1` refines each integration cell uniformly.
pub fn error_norm(
    u: &FeFunction,
    exact: &dyn Field2,
    kind: NormKind,
    quad_degree: usize,
    subcell: usize,
) -> Result<f64> {
    let order = kind.order();
    let rule = QuadratureRule::for_degree(quad_degree);
    let mesh = &u.space.mesh;
    let s = subcell.max(1);
    let mut acc = 0.0;

    for t in 0..mesh.n_triangles() {
        let basis = u.space.local_basis(t);
        let cells: Vec<[Vec2; 3]> = if u.space.kind == SpaceKind::Hct {
            let hct = basis.hct().unwrap();
            (0..3)
                .flat_map(|k| subcells(hct.subtriangle(k), s))
                .collect()
        } else {
            subcells(mesh.triangle_points(t), s)
        };
        for cell in cells {
            let area = tri_area(cell);
            for (q, w) in rule.points.iter().zip(&rule.weights) {
                let p = map_ref(cell, *q);
                let (v, g, h) = u.eval_with_basis(t, &basis, p, order);
                let ev = exact.value(p);
                let term = match kind {
                    NormKind::L1 => (v - ev).abs(),
                    NormKind::L2 => (v - ev) * (v - ev),
                    NormKind::H1 => {
                        let eg = exact
                            .gradient(p)
                            .ok_or_else(|| Error::Capability("H1 norm needs gradients".into()))?;
                        (v - ev) * (v - ev)
                            + (g[0] - eg[0]) * (g[0] - eg[0])
                            + (g[1] - eg[1]) * (g[1] - eg[1])
                    }
                    NormKind::H2 => {
                        let eg = exact
                            .gradient(p)
                            .ok_or_else(|| Error::Capability("H2 norm needs gradients".into()))?;
                        let eh = exact
                            .hessian(p)
                            .ok_or_else(|| Error::Capability("H2 norm needs Hessians".into()))?;
                        (v - ev) * (v - ev)
                            + (g[0] - eg[0]) * (g[0] - eg[0])
                            + (g[1] - eg[1]) * (g[1] - eg[1])
                            + (h[0] - eh[0]) * (h[0] - eh[0])
                            + 2.0 * (h[1] - eh[1]) * (h[1] - eh[1])
                            + (h[2] - eh[2]) * (h[2] - eh[2])
                    }
                    NormKind::L2Entry(k, l) => {
                        let eh = exact
                            .hessian(p)
                            .ok_or_else(|| Error::Capability("entry norm needs Hessians".into()))?;
                        let d = entry(h, k, l) - entry(eh, k, l);
                        d * d
                    }
                    NormKind::L1Entry(k, l) => {
                        let eh = exact
                            .hessian(p)
                            .ok_or_else(|| Error::Capability("entry norm needs Hessians".into()))?;
                        (entry(h, k, l) - entry(eh, k, l)).abs()
                    }
                };
                acc += w * area * term;
            }
        }
    }
    Ok(match kind {
        NormKind::L1 | NormKind::L1Entry(..) => acc,
        _ => acc.sqrt(),
    })
}

/// L² and L¹ distance between one Hessian entry of `u` and a plain scalar
/// field `g` (used when the reference Hessian is only available entrywise).
pub fn hessian_entry_error(
    u: &FeFunction,
    k: usize,
    l: usize,
    g: &(dyn Fn(Vec2) -> f64 + Sync),
    quad_degree: usize,
    subcell: usize,
) -> (f64, f64) {
    let rule = QuadratureRule::for_degree(quad_degree);
    let mesh = &u.space.mesh;
    let s = subcell.max(1);
    let (mut l2, mut l1) = (0.0, 0.0);
    for t in 0..mesh.n_triangles() {
        let basis = u.space.local_basis(t);
        let cells: Vec<[Vec2; 3]> = if u.space.kind == SpaceKind::Hct {
            let hct = basis.hct().unwrap();
            (0..3)
                .flat_map(|m| subcells(hct.subtriangle(m), s))
                .collect()
        } else {
            subcells(mesh.triangle_points(t), s)
        };
        for cell in cells {
            let area = tri_area(cell);
            for (q, w) in rule.points.iter().zip(&rule.weights) {
                let p = map_ref(cell, *q);
                let (_, _, h) = u.eval_with_basis(t, &basis, p, 2);
                let d = entry(h, k, l) - g(p);
                l2 += w * area * d * d;
                l1 += w * area * d.abs();
            }
        }
    }
    (l2.sqrt(), l1)
}

/// Norm of a plain field over a mesh (for relative-error denominators).
pub fn field_norm(
    f: &dyn Field2,
    mesh: &crate::mesh::TriMesh,
    kind: NormKind,
    quad_degree: usize,
    subcell: usize,
) -> Result<f64> {
    let rule = QuadratureRule::for_degree(quad_degree);
    let s = subcell.max(1);
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        for cell in subcells(mesh.triangle_points(t), s) {
            let area = tri_area(cell);
            for (q, w) in rule.points.iter().zip(&rule.weights) {
                let p = map_ref(cell, *q);
                let v = f.value(p);
                let term = match kind {
                    NormKind::L1 => v.abs(),
                    NormKind::L2 => v * v,
                    NormKind::H1 => {
                        let g = f
                            .gradient(p)
                            .ok_or_else(|| Error::Capability("H1 norm needs gradients".into()))?;
                        v * v + g[0] * g[0] + g[1] * g[1]
                    }
                    NormKind::H2 => {
                        let g = f
                            .gradient(p)
                            .ok_or_else(|| Error::Capability("H2 norm needs gradients".into()))?;
                        let h = f
                            .hessian(p)
                            .ok_or_else(|| Error::Capability("H2 norm needs Hessians".into()))?;
                        v * v
                            + g[0] * g[0]
                            + g[1] * g[1]
                            + h[0] * h[0]
                            + 2.0 * h[1] * h[1]
                            + h[2] * h[2]
                    }
                    NormKind::L2Entry(k, l) => {
                        let h = f
                            .hessian(p)
                            .ok_or_else(|| Error::Capability("entry norm needs Hessians".into()))?;
                        entry(h, k, l) * entry(h, k, l)
                    }
                    NormKind::L1Entry(k, l) => {
                        let h = f
                            .hessian(p)
                            .ok_or_else(|| Error::Capability("entry norm needs Hessians".into()))?;
                        entry(h, k, l).abs()
                    }
                };
                acc += w * area * term;
            }
        }
    }
    Ok(match kind {
        NormKind::L1 | NormKind::L1Entry(..) => acc,
        _ => acc.sqrt(),
    })
}
