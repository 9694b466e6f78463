//! Macro-scale solves on Ω: the constant-coefficient homogenized problem in
//! H¹ (P2) and H² (HCT least squares), the ε-dependent fine-scale problem via
//! the Cordes least-squares formulation, and the variable-coefficient
//! homogenized problem of the nonuniform pipeline.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::assemble::{assemble, BiForm, LinForm};
use crate::coeff::{gamma, CellCoefficient, MacroCoefficient};
use crate::error::{Error, Result};
use crate::geom::{frac, scale, sym_eigenvalues, Mat2, Vec2};
use crate::mesh::{refine, MacroGrid, TriMesh};
use crate::space::{FeFunction, FeSpace};
use crate::sparse::Method;

const SOLVE_TOL: f64 = 1e-9;
/// Refinement levels of the auxiliary H¹ solve that supplies boundary
/// normal-derivative data for the H² spaces.
const AUX_REFINE: usize = 2;

/// One JSON-lines record per macro solve; collected lazily so callers that do
/// not care pay nothing beyond a mutex push.
#[derive(Debug, Clone, Serialize)]
pub struct SolveManifest {
    pub formulation: &'static str,
    pub n_triangles: usize,
    pub n_dofs: usize,
    pub h_max: f64,
    pub wall_ms: f64,
}

static MANIFESTS: Mutex<Vec<SolveManifest>> = Mutex::new(Vec::new());

pub fn drain_manifests() -> Vec<SolveManifest> {
    std::mem::take(&mut MANIFESTS.lock().unwrap())
}

fn record(formulation: &'static str, space: &FeSpace, start: Instant) {
    MANIFESTS.lock().unwrap().push(SolveManifest {
        formulation,
        n_triangles: space.mesh.n_triangles(),
        n_dofs: space.n_dofs,
        h_max: space.mesh.h_max,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    });
}

fn check_spd(a0: Mat2) -> Result<()> {
    let [lo, _] = sym_eigenvalues(a0);
    if (a0[0][1] - a0[1][0]).abs() > 1e-12 || lo <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "coefficient matrix must be symmetric positive definite, got {:?}",
            a0
        )));
    }
    Ok(())
}

/// H¹ approximation of the homogenized solution: since A⁰ is constant,
/// A⁰:D²u = ∇·(A⁰∇u) and the problem has the standard symmetric weak form
/// ∫A⁰∇u·∇φ = −∫fφ over P2 with zero Dirichlet data.
pub fn solve_homogenized_h1(
    a0: Mat2,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
    mesh: Arc<TriMesh>,
) -> Result<FeFunction> {
    check_spd(a0)?;
    let start = Instant::now();
    let space = FeSpace::p2_dirichlet(mesh);
    let af = move |_: Vec2| a0;
    let sys = assemble(
        &space,
        &[(1.0, BiForm::GradAGrad(&af))],
        &[(-1.0, LinForm::Load(&f))],
        6,
        true,
    )?;
    let x = sys.solve(Method::Direct, SOLVE_TOL)?;
    record("h1_p2", &space, start);
    Ok(FeFunction::new(space, x))
}

/// Boundary gradient data for the H²∩H¹₀ space, taken from an auxiliary H¹
/// solve on a refined mesh. The returned closure owns the auxiliary solution.
fn aux_boundary_gradient(
    mesh: &Arc<TriMesh>,
    refine_levels: usize,
    solve: impl Fn(Arc<TriMesh>) -> Result<FeFunction>,
) -> Result<impl Fn(Vec2) -> Vec2> {
    let mut fine = mesh.as_ref().clone();
    for _ in 0..refine_levels {
        fine = refine(&fine);
    }
    let aux = solve(Arc::new(fine))?;
    Ok(move |p: Vec2| {
        aux.eval(p, 1)
            .map(|(_, g, _)| g)
            .unwrap_or([0.0, 0.0])
    })
}

/// H² approximation of the homogenized solution by the least-squares scheme
/// ∫(A⁰:D²u)(A⁰:D²φ) = ∫f(A⁰:D²φ) over HCT with H²∩H¹₀ boundary treatment;
/// boundary normal derivatives come from an auxiliary H¹ solve.
pub fn solve_homogenized_h2(
    a0: Mat2,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
    mesh: Arc<TriMesh>,
) -> Result<FeFunction> {
    check_spd(a0)?;
    let start = Instant::now();
    let grad = aux_boundary_gradient(&mesh, AUX_REFINE, |m| solve_homogenized_h1(a0, f, m))?;
    let space = FeSpace::hct_h2_dirichlet(mesh, &grad);
    let af = move |_: Vec2| a0;
    let sys = assemble(
        &space,
        &[(1.0, BiForm::HessContractPair(&af))],
        &[(1.0, LinForm::LoadContract { f: &f, m: &af })],
        4,
        true,
    )?;
    let x = sys.solve(Method::Direct, SOLVE_TOL)?;
    record("h2_hct_ls", &space, start);
    Ok(FeFunction::new(space, x))
}

/// Reference fine-scale solve of A(x/ε):D²u = f by the Cordes least-squares
/// formulation ∫γ^ε(A^ε:D²u)Δφ = ∫γ^ε f Δφ over HCT. The mesh must resolve
/// the oscillation: h_max ≤ ε/min_ratio.
pub struct FineScaleOpts {
    /// Required resolution ε/h_max (mesh rejected below this). The default 5
    /// admits 8 axis cells per period on the structured patterns, whose
    /// diameter is h_max = √2·(axis spacing).
    pub min_ratio: f64,
    /// Refinement levels of the auxiliary boundary-data solve. The fine mesh
    /// already resolves ε, so no extra refinement by default.
    pub aux_refine: usize,
}

impl Default for FineScaleOpts {
    fn default() -> FineScaleOpts {
        FineScaleOpts {
            min_ratio: 5.0,
            aux_refine: 0,
        }
    }
}

pub fn solve_fine_scale(
    a: &CellCoefficient,
    epsilon: f64,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
    mesh: Arc<TriMesh>,
    opts: &FineScaleOpts,
) -> Result<FeFunction> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument("epsilon must lie in (0, 1]".into()));
    }
    if mesh.h_max > epsilon / opts.min_ratio + 1e-12 {
        return Err(Error::HTooCoarse(format!(
            "mesh h_max = {:.3e} does not resolve epsilon = {:.3e} (need h <= eps/{})",
            mesh.h_max, epsilon, opts.min_ratio
        )));
    }
    let report = crate::coeff::cordes_check(a, 64)?;
    if report.delta <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "Cordes condition fails: delta = {:.3e}",
            report.delta
        )));
    }
    let start = Instant::now();
    let a_eps = |x: Vec2| a.a(frac(scale(1.0 / epsilon, x)));
    let gamma_eps = |x: Vec2| gamma(a_eps(x));
    // Auxiliary H¹ form of the same equation: A:D²u = ∇·(A∇u) − (divA)·∇u,
    // with the drift picking up a 1/ε from the chain rule.
    let grad = aux_boundary_gradient(&mesh, opts.aux_refine, |m| {
        let drift = |x: Vec2| scale(1.0 / epsilon, a.div_a(frac(scale(1.0 / epsilon, x))));
        let space = FeSpace::p2_dirichlet(m);
        let sys = assemble(
            &space,
            &[
                (1.0, BiForm::GradAGrad(&a_eps)),
                (1.0, BiForm::BGradUDotV(&drift)),
            ],
            &[(-1.0, LinForm::Load(&f))],
            6,
            false,
        )?;
        let x = sys.solve(Method::Direct, SOLVE_TOL)?;
        Ok(FeFunction::new(space, x))
    })?;
    let space = FeSpace::hct_h2_dirichlet(mesh, &grad);
    let sys = assemble(
        &space,
        &[(
            1.0,
            BiForm::CordesLs {
                a: &a_eps,
                gamma: &gamma_eps,
            },
        )],
        &[(
            1.0,
            LinForm::LoadLaplacian {
                f: &f,
                gamma: &gamma_eps,
            },
        )],
        4,
        false,
    )?;
    let x = sys.solve(Method::Direct, SOLVE_TOL)?;
    record("fine_cordes_ls", &space, start);
    Ok(FeFunction::new(space, x))
}

/// Continuous piecewise-linear matrix field built from per-node homogenized
/// matrices on a macro triangulation.
pub struct MatrixP1Field {
    pub a11: FeFunction,
    pub a12: FeFunction,
    pub a22: FeFunction,
}

impl MatrixP1Field {
    pub fn at(&self, x: Vec2) -> Mat2 {
        let a11 = self.a11.eval(x, 0).map(|(v, _, _)| v).unwrap_or(f64::NAN);
        let a12 = self.a12.eval(x, 0).map(|(v, _, _)| v).unwrap_or(f64::NAN);
        let a22 = self.a22.eval(x, 0).map(|(v, _, _)| v).unwrap_or(f64::NAN);
        [[a11, a12], [a12, a22]]
    }

    /// Row divergence (∂₁a₁ⱼ + ∂₂a₂ⱼ), elementwise constant for P1 entries.
    pub fn div_at(&self, x: Vec2) -> Vec2 {
        let g11 = self.a11.eval(x, 1).map(|(_, g, _)| g).unwrap_or([0.0; 2]);
        let g12 = self.a12.eval(x, 1).map(|(_, g, _)| g).unwrap_or([0.0; 2]);
        let g22 = self.a22.eval(x, 1).map(|(_, g, _)| g).unwrap_or([0.0; 2]);
        [g11[0] + g12[1], g12[0] + g22[1]]
    }
}

pub struct NonuniformSolution {
    pub a0_field: MatrixP1Field,
    pub u0_hk: FeFunction,
    /// Per-node homogenized matrices in macro-grid vertex order.
    pub node_matrices: Vec<Mat2>,
}

/// Nonuniform pipeline: per macro node xᵢ solve the cell problem with the
/// frozen coefficient A(xᵢ,·) on a periodic mesh with 1/h = cell_n, build the
/// piecewise-linear field A⁰ₕₖ, then solve A⁰ₕₖ:D²u = f by the variable-γ
/// Cordes least-squares HCT formulation.
pub fn solve_nonuniform(
    a: &MacroCoefficient,
    grid: &MacroGrid,
    cell_n: usize,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
) -> Result<NonuniformSolution> {
    let cell_mesh = Arc::new(crate::mesh::unit_square_mesh(
        cell_n,
        crate::mesh::Pattern::CrissCross,
    )?);
    // Only A⁰ is needed per node, so solve just the invariant-measure
    // problem instead of the full cell suite (correctors would double the
    // per-node factorization cost).
    let pairing = Arc::new(crate::mesh::periodic_pairing(&cell_mesh)?);
    let node_matrices: Vec<Mat2> = grid
        .nodes()
        .par_iter()
        .map(|&x| -> Result<Mat2> {
            let frozen = a.freeze(x);
            let m_h = crate::cell::solve_invariant_measure(&frozen, &cell_mesh, &pairing)
                .map_err(|e| {
                    Error::Config(format!(
                        "cell problem at macro node ({:.4}, {:.4}) failed: {}",
                        x[0], x[1], e
                    ))
                })?;
            Ok(crate::cell::homogenized_matrix(&frozen, &m_h).entries)
        })
        .collect::<Result<_>>()?;

    let macro_mesh = Arc::new(grid.triangulation.clone());
    let p1 = FeSpace::p1(macro_mesh.clone());
    let entry = |k: usize, l: usize| {
        FeFunction::new(
            p1.clone(),
            node_matrices.iter().map(|m| m[k][l]).collect(),
        )
    };
    let a0_field = MatrixP1Field {
        a11: entry(0, 0),
        a12: entry(0, 1),
        a22: entry(1, 1),
    };

    let u0_hk = {
        let start = Instant::now();
        let af = |x: Vec2| a0_field.at(x);
        let gf = |x: Vec2| gamma(af(x));
        let grad = aux_boundary_gradient(&macro_mesh, AUX_REFINE, |m| {
            // H¹ form with the elementwise-constant divergence of the P1 field.
            let drift = |x: Vec2| a0_field.div_at(x);
            let space = FeSpace::p2_dirichlet(m);
            let sys = assemble(
                &space,
                &[
                    (1.0, BiForm::GradAGrad(&af)),
                    (1.0, BiForm::BGradUDotV(&drift)),
                ],
                &[(-1.0, LinForm::Load(&f))],
                6,
                false,
            )?;
            let x = sys.solve(Method::Direct, SOLVE_TOL)?;
            Ok(FeFunction::new(space, x))
        })?;
        let space = FeSpace::hct_h2_dirichlet(macro_mesh, &grad);
        let sys = assemble(
            &space,
            &[(1.0, BiForm::CordesLs { a: &af, gamma: &gf })],
            &[(1.0, LinForm::LoadLaplacian { f: &f, gamma: &gf })],
            4,
            false,
        )?;
        let x = sys.solve(Method::Direct, SOLVE_TOL)?;
        record("nonuniform_cordes_ls", &space, start);
        FeFunction::new(space, x)
    };
    Ok(NonuniformSolution {
        a0_field,
        u0_hk,
        node_matrices,
    })
}

/// Max |u| over `n` boundary sample points; Dirichlet solves should return 0
/// here to solver tolerance.
pub fn boundary_trace_max(u: &FeFunction, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..n {
        let t = (k as f64 + 0.5) / n as f64;
        for p in [
            [t, 0.0],
            [t, 1.0],
            [0.0, t],
            [1.0, t],
        ] {
            if let Ok((v, _, _)) = u.eval(p, 0) {
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}
