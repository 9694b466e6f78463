//! Element-loop assembly of bilinear and linear forms over an `FeSpace`.
//!
//! Dirichlet dofs are eliminated (their columns move to the right-hand side);
//! zero-mean spaces get a Lagrange-multiplier border of basis integrals.
//! HCT elements are integrated per subtriangle since the basis is only
//! piecewise cubic.

use crate::error::Result;
use crate::geom::{Mat2, Vec2};
use crate::quad::QuadratureRule;
use crate::space::{map_ref, Constraint, Dof, FeFunction, FeSpace, SpaceKind};
use crate::sparse::{SparseSystem, Triplets};

pub type ScalarField<'a> = &'a (dyn Fn(Vec2) -> f64 + Sync);
pub type VectorField<'a> = &'a (dyn Fn(Vec2) -> Vec2 + Sync);
pub type MatrixField<'a> = &'a (dyn Fn(Vec2) -> Mat2 + Sync);

pub enum BiForm<'a> {
    /// ∫ u v
    Mass,
    /// ∫ (A∇u)·∇v
    GradAGrad(MatrixField<'a>),
    /// ∫ u (b·∇v) — trial value against drift in the test gradient
    UDotBGradV(VectorField<'a>),
    /// ∫ (b·∇u) v
    BGradUDotV(VectorField<'a>),
    /// ∫ (M:D²u)(M:D²v)
    HessContractPair(MatrixField<'a>),
    /// ∫ γ (A:D²u) Δv
    CordesLs {
        a: MatrixField<'a>,
        gamma: ScalarField<'a>,
    },
}

pub enum LinForm<'a> {
    /// ∫ f v
    Load(ScalarField<'a>),
    /// ∫ b·∇v
    LoadGrad(VectorField<'a>),
    /// ∫ f (M:D²v)
    LoadContract {
        f: ScalarField<'a>,
        m: MatrixField<'a>,
    },
    /// ∫ γ f Δv
    LoadLaplacian {
        f: ScalarField<'a>,
        gamma: ScalarField<'a>,
    },
    /// ∫ (B∇w)·∇v for an existing function w on the same mesh
    MatGradFnDotGradV {
        b: MatrixField<'a>,
        w: &'a FeFunction,
    },
    /// ∫ (b·∇w) v for an existing function w on the same mesh
    BGradFnDotV {
        b: VectorField<'a>,
        w: &'a FeFunction,
    },
}

fn contract(m: Mat2, h: [f64; 3]) -> f64 {
    m[0][0] * h[0] + (m[0][1] + m[1][0]) * h[1] + m[1][1] * h[2]
}

/// Assemble Σ cᵢ·biᵢ(u, v) = Σ dⱼ·linⱼ(v) over the free dofs of `space`.
pub fn assemble(
    space: &FeSpace,
    bi: &[(f64, BiForm)],
    lin: &[(f64, LinForm)],
    quad_degree: usize,
    symmetric: bool,
) -> Result<SparseSystem> {
    let n = space.n_dofs;
    let mut matrix = Triplets::new(n, n);
    let mut rhs = vec![0.0; n];
    let rule = QuadratureRule::for_degree(quad_degree);
    let mesh = &space.mesh;
    let nloc = space.n_local();

    let mut local = vec![0.0; nloc * nloc];
    let mut local_rhs = vec![0.0; nloc];

    for t in 0..mesh.n_triangles() {
        local.iter_mut().for_each(|x| *x = 0.0);
        local_rhs.iter_mut().for_each(|x| *x = 0.0);
        let basis = space.local_basis(t);
        let pts = mesh.triangle_points(t);

        // Quadrature points with weights scaled by physical area; HCT gets
        // the rule on each of its three subtriangles.
        let accumulate = |p: Vec2,
                              w: f64,
                              vals: &[f64],
                              grads: &[[f64; 2]],
                              hess: &[[f64; 3]],
                              local: &mut [f64],
                              local_rhs: &mut [f64]| {
            for (c, form) in bi {
                match form {
                    BiForm::Mass => {
                        for i in 0..nloc {
                            for j in 0..nloc {
                                local[i * nloc + j] += c * w * vals[j] * vals[i];
                            }
                        }
                    }
                    BiForm::GradAGrad(a) => {
                        let m = a(p);
                        for j in 0..nloc {
                            let ag = [
                                m[0][0] * grads[j][0] + m[0][1] * grads[j][1],
                                m[1][0] * grads[j][0] + m[1][1] * grads[j][1],
                            ];
                            for i in 0..nloc {
                                local[i * nloc + j] +=
                                    c * w * (ag[0] * grads[i][0] + ag[1] * grads[i][1]);
                            }
                        }
                    }
                    BiForm::UDotBGradV(b) => {
                        let bv = b(p);
                        for i in 0..nloc {
                            let bg = bv[0] * grads[i][0] + bv[1] * grads[i][1];
                            for j in 0..nloc {
                                local[i * nloc + j] += c * w * vals[j] * bg;
                            }
                        }
                    }
                    BiForm::BGradUDotV(b) => {
                        let bv = b(p);
                        for j in 0..nloc {
                            let bg = bv[0] * grads[j][0] + bv[1] * grads[j][1];
                            for i in 0..nloc {
                                local[i * nloc + j] += c * w * bg * vals[i];
                            }
                        }
                    }
                    BiForm::HessContractPair(mf) => {
                        let m = mf(p);
                        for j in 0..nloc {
                            let cj = contract(m, hess[j]);
                            for i in 0..nloc {
                                local[i * nloc + j] += c * w * cj * contract(m, hess[i]);
                            }
                        }
                    }
                    BiForm::CordesLs { a, gamma } => {
                        let m = a(p);
                        let g = gamma(p);
                        for j in 0..nloc {
                            let cj = contract(m, hess[j]);
                            for i in 0..nloc {
                                local[i * nloc + j] += c * w * g * cj * (hess[i][0] + hess[i][2]);
                            }
                        }
                    }
                }
            }
            for (d, form) in lin {
                match form {
                    LinForm::Load(f) => {
                        let fv = f(p);
                        for i in 0..nloc {
                            local_rhs[i] += d * w * fv * vals[i];
                        }
                    }
                    LinForm::LoadGrad(b) => {
                        let bv = b(p);
                        for i in 0..nloc {
                            local_rhs[i] += d * w * (bv[0] * grads[i][0] + bv[1] * grads[i][1]);
                        }
                    }
                    LinForm::LoadContract { f, m } => {
                        let fv = f(p);
                        let mv = m(p);
                        for i in 0..nloc {
                            local_rhs[i] += d * w * fv * contract(mv, hess[i]);
                        }
                    }
                    LinForm::LoadLaplacian { f, gamma } => {
                        let s = f(p) * gamma(p);
                        for i in 0..nloc {
                            local_rhs[i] += d * w * s * (hess[i][0] + hess[i][2]);
                        }
                    }
                    LinForm::MatGradFnDotGradV { b, w: wfn } => {
                        debug_assert!(std::ptr::eq(
                            &*wfn.space.mesh as *const _,
                            &**mesh as *const _
                        ));
                        let gw = wfn.eval_in(t, p, 1).1;
                        let m = b(p);
                        let bg = [
                            m[0][0] * gw[0] + m[0][1] * gw[1],
                            m[1][0] * gw[0] + m[1][1] * gw[1],
                        ];
                        for i in 0..nloc {
                            local_rhs[i] += d * w * (bg[0] * grads[i][0] + bg[1] * grads[i][1]);
                        }
                    }
                    LinForm::BGradFnDotV { b, w: wfn } => {
                        let gw = wfn.eval_in(t, p, 1).1;
                        let bv = b(p);
                        let s = bv[0] * gw[0] + bv[1] * gw[1];
                        for i in 0..nloc {
                            local_rhs[i] += d * w * s * vals[i];
                        }
                    }
                }
            }
        };

        if space.kind == SpaceKind::Hct {
            let hct = basis.hct().unwrap();
            for s in 0..3 {
                let sub = hct.subtriangle(s);
                let area = 0.5
                    * ((sub[1][0] - sub[0][0]) * (sub[2][1] - sub[0][1])
                        - (sub[1][1] - sub[0][1]) * (sub[2][0] - sub[0][0]))
                        .abs();
                for (q, wq) in rule.points.iter().zip(&rule.weights) {
                    let p = map_ref(sub, *q);
                    let (vals, grads, hess) = basis.eval_hct_sub(s, p);
                    accumulate(p, wq * area, &vals, &grads, &hess, &mut local, &mut local_rhs);
                }
            }
        } else {
            let area = mesh.triangle_area(t);
            for (q, wq) in rule.points.iter().zip(&rule.weights) {
                let p = map_ref(pts, *q);
                let (vals, grads, hess) = basis.eval(p);
                accumulate(p, wq * area, &vals, &grads, &hess, &mut local, &mut local_rhs);
            }
        }

        // Scatter with Dirichlet elimination.
        let dofs = space.element_dofs(t);
        for i in 0..nloc {
            let Dof::Free(gi) = dofs[i] else { continue };
            for j in 0..nloc {
                match dofs[j] {
                    Dof::Free(gj) => matrix.push(gi, gj, local[i * nloc + j]),
                    Dof::Fixed(v) => rhs[gi] -= local[i * nloc + j] * v,
                }
            }
            rhs[gi] += local_rhs[i];
        }
    }

    let border = if space.constraint == Constraint::ZeroMean {
        Some(space.basis_integrals())
    } else {
        None
    };
    Ok(SparseSystem {
        matrix,
        rhs,
        symmetric,
        border,
    })
}

/// Assemble only a right-hand side against the test space (matrix ignored).
pub fn assemble_rhs(space: &FeSpace, lin: &[(f64, LinForm)], quad_degree: usize) -> Result<Vec<f64>> {
    Ok(assemble(space, &[], lin, quad_degree, false)?.rhs)
}
