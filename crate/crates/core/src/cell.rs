//! Unit-cell problems: invariant measure, homogenized matrix, correctors,
//! successive derivative lifts for corrector Hessians, and the
//! divergence-form transform diagnostic.
//!
//! All problems share the P1 periodic zero-mean space over the cell mesh.
//! The corrector operator ∫A∇u·∇φ + ∫(divA·∇u)φ also governs both lift
//! stages, so its LU factorization is built once per cell solve. The
//! invariant-measure operator is its transpose and gets its own
//! factorization.

use crate::assemble::{assemble, assemble_rhs, BiForm, LinForm};
use crate::coeff::CellCoefficient;
use crate::error::{Error, Result};
use crate::geom::{Mat2, Vec2};
use crate::mesh::{periodic_pairing, PeriodicPairing, TriMesh};
use crate::space::{Dof, FeFunction, FeSpace};
use crate::sparse::{FactorizedOperator, PinnedOperator};
use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

const SOLVE_TOL: f64 = 1e-10;

/// Symmetric corrector indices in storage order: (0,0), (0,1), (1,1).
pub const IJ: [(usize, usize); 3] = [(0, 0), (0, 1), (1, 1)];

pub fn ij_index(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (0, 1) => 1,
        (1, 1) => 2,
        _ => panic!("index out of range"),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HomogenizedMatrix {
    pub entries: Mat2,
    /// Cell mesh size the entries were computed on.
    pub h: f64,
    pub quadrature_tag: &'static str,
}

/// mₕ = m̃ₕ + 1 where m̃ₕ solves ∫(A∇m̃ + m̃ divA)·∇φ = −∫divA·∇φ in the
/// periodic zero-mean space; ∫mₕ = 1 by construction.
pub fn solve_invariant_measure(
    a: &CellCoefficient,
    mesh: &Arc<TriMesh>,
    pairing: &Arc<PeriodicPairing>,
) -> Result<FeFunction> {
    let space = FeSpace::p1_periodic_zero_mean(mesh.clone(), pairing.clone());
    let af = |y: Vec2| a.a(y);
    let div = |y: Vec2| a.div_a(y);
    let sys = assemble(
        &space,
        &[
            (1.0, BiForm::GradAGrad(&af)),
            (1.0, BiForm::UDotBGradV(&div)),
        ],
        &[(-1.0, LinForm::LoadGrad(&div))],
        4,
        false,
    )?;
    // The kernel of the operator is spanned by the measure itself, so the
    // pinned solve picks the representative with m(v0) = 1; rescaling to
    // unit integral then recovers the normalized measure.
    let op = PinnedOperator::new(&sys.matrix)?;
    let mut x = op.solve(&sys.rhs, SOLVE_TOL)?;
    for c in x.iter_mut() {
        *c += 1.0;
    }
    let total: f64 = space
        .basis_integrals()
        .iter()
        .zip(&x)
        .map(|(b, v)| b * v)
        .sum();
    if total.abs() < 1e-12 {
        return Err(crate::error::Error::HTooCoarse(
            "invariant measure has vanishing integral".into(),
        ));
    }
    for c in x.iter_mut() {
        *c /= total;
    }
    Ok(FeFunction::new(space, x))
}

/// Smallest vertex value of mₕ; a nonpositive value flags an unreliable
/// (too coarse) cell mesh.
pub fn measure_min(m: &FeFunction) -> f64 {
    let mesh = &m.space.mesh;
    (0..mesh.n_vertices())
        .map(|v| m.dof_value(m.space.dofs[v]))
        .fold(f64::INFINITY, f64::min)
}

/// A⁰ₕ entries ∫ I_h(a_ij mₕ), integrated exactly for the P1 interpolant
/// (vertex average times triangle area).
pub fn homogenized_matrix(a: &CellCoefficient, m_h: &FeFunction) -> HomogenizedMatrix {
    let mesh = &m_h.space.mesh;
    let mut e = [[0.0; 2]; 2];
    for t in 0..mesh.n_triangles() {
        let w = mesh.triangle_area(t) / 3.0;
        for &v in &mesh.triangles[t] {
            let av = a.a(mesh.vertices[v]);
            let mv = m_h.dof_value(m_h.space.dofs[v]);
            for i in 0..2 {
                for j in 0..2 {
                    e[i][j] += w * av[i][j] * mv;
                }
            }
        }
    }
    // Symmetrize away rounding asymmetry from the accumulation order.
    let off = 0.5 * (e[0][1] + e[1][0]);
    e[0][1] = off;
    e[1][0] = off;
    HomogenizedMatrix {
        entries: e,
        h: mesh.h_max,
        quadrature_tag: "p1-interpolatory",
    }
}

/// ⟨f, mₕ⟩ with the same interpolatory quadrature as `homogenized_matrix`.
pub fn measure_pairing(f: &dyn Fn(Vec2) -> f64, m_h: &FeFunction) -> f64 {
    let mesh = &m_h.space.mesh;
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        let w = mesh.triangle_area(t) / 3.0;
        for &v in &mesh.triangles[t] {
            s += w * f(mesh.vertices[v]) * m_h.dof_value(m_h.space.dofs[v]);
        }
    }
    s
}

fn corrector_operator(a: &CellCoefficient, space: &Arc<FeSpace>) -> Result<PinnedOperator> {
    let af = |y: Vec2| a.a(y);
    let div = |y: Vec2| a.div_a(y);
    let sys = assemble(
        space,
        &[
            (1.0, BiForm::GradAGrad(&af)),
            (1.0, BiForm::BGradUDotV(&div)),
        ],
        &[],
        4,
        false,
    )?;
    PinnedOperator::new(&sys.matrix)
}

/// Shift a functional vector by c·∫φ with c = F(mₕ), making it compatible
/// with the bordered zero-mean system.
fn solvability_shift(rhs: &mut [f64], m_h: &FeFunction, border: &[f64]) -> f64 {
    let c: f64 = rhs.iter().zip(&m_h.coeffs).map(|(f, m)| f * m).sum();
    for (r, b) in rhs.iter_mut().zip(border) {
        *r -= c * b;
    }
    c
}

/// χ_ij solving A:D²χ = g, g = a⁰_ij − a_ij, in weak form
/// ∫A∇χ·∇φ + ∫(divA·∇χ)φ = −∫(g − c)φ with c = ⟨g, mₕ⟩.
pub fn solve_corrector(
    a: &CellCoefficient,
    a0: &HomogenizedMatrix,
    ij: (usize, usize),
    mesh: &Arc<TriMesh>,
    pairing: &Arc<PeriodicPairing>,
) -> Result<FeFunction> {
    let space = FeSpace::p1_periodic_zero_mean(mesh.clone(), pairing.clone());
    let m_h = solve_invariant_measure(a, mesh, pairing)?;
    let op = corrector_operator(a, &space)?;
    corrector_with(a, a0, ij, &space, &m_h, &op)
}

fn corrector_with(
    a: &CellCoefficient,
    a0: &HomogenizedMatrix,
    (i, j): (usize, usize),
    space: &Arc<FeSpace>,
    m_h: &FeFunction,
    op: &PinnedOperator,
) -> Result<FeFunction> {
    let g = move |y: Vec2| a0.entries[i][j] - a.a(y)[i][j];
    let source = assemble_rhs(space, &[(1.0, LinForm::Load(&g))], 4)?;
    solve_shifted(&source, space, m_h, op)
}

/// One derivative lift: vₕ ≈ ∂_r χ from the differentiated corrector
/// equation A:D²v = ∂_r g − ∂_rA:D²χ, with the second-derivative term of χ
/// paired weakly (χₕ is only P1).
pub fn derivative_lift(
    a: &CellCoefficient,
    g_r: &(dyn Fn(Vec2) -> f64 + Sync),
    chi_h: &FeFunction,
    r: usize,
) -> Result<FeFunction> {
    let space = chi_h.space.clone();
    let mesh = space.mesh.clone();
    let pairing = Arc::new(periodic_pairing(&mesh)?);
    let m_h = solve_invariant_measure(a, &mesh, &pairing)?;
    let op = corrector_operator(a, &space)?;
    lift_with(a, g_r, chi_h, r, &m_h, &op)
}

/// Constant gradient of a P1 function on triangle t, from its dof values.
fn p1_gradient(u: &FeFunction, t: usize) -> Vec2 {
    let mesh = &u.space.mesh;
    let [v0, v1, v2] = mesh.triangles[t];
    let (p0, p1, p2) = (mesh.vertices[v0], mesh.vertices[v1], mesh.vertices[v2]);
    let u0 = u.dof_value(u.space.dofs[v0]);
    let d1 = u.dof_value(u.space.dofs[v1]) - u0;
    let d2 = u.dof_value(u.space.dofs[v2]) - u0;
    let (ax, ay) = (p1[0] - p0[0], p1[1] - p0[1]);
    let (bx, by) = (p2[0] - p0[0], p2[1] - p0[1]);
    let det = ax * by - bx * ay;
    [(d1 * by - d2 * ay) / det, (d2 * ax - d1 * bx) / det]
}

/// Unit normal of edge e pointing away from triangle t.
fn normal_away(mesh: &TriMesh, e: usize, t: usize) -> Vec2 {
    let [a, b] = mesh.edges[e];
    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
    let mut n = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
    let [v0, v1, v2] = mesh.triangles[t];
    let c = [
        (mesh.vertices[v0][0] + mesh.vertices[v1][0] + mesh.vertices[v2][0]) / 3.0,
        (mesh.vertices[v0][1] + mesh.vertices[v1][1] + mesh.vertices[v2][1]) / 3.0,
    ];
    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
    if (c[0] - mid[0]) * n[0] + (c[1] - mid[1]) * n[1] > 0.0 {
        n = [-n[0], -n[1]];
    }
    n
}

/// ⟨M : D²w, φ⟩ for a P1 periodic w, whose distributional Hessian is the
/// line measure [∂_ν w] ν⊗ν on mesh edges (tangential jumps vanish by
/// continuity). Returns the pairing per free dof, summed over torus edges —
/// periodically identified boundary edges count once, with the partner
/// triangle taken from the opposite side of the seam. M is evaluated as the
/// two-sided average across the edge, which settles the a.e. ambiguity on
/// edges where M itself jumps.
fn hessian_jump_pairing(
    m: &dyn Fn(Vec2) -> Mat2,
    w: &FeFunction,
) -> Result<Vec<f64>> {
    let space = &w.space;
    let mesh = &space.mesh;
    let pairing = space
        .pairing
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("hessian jump pairing needs a periodic space".into()))?;
    let mut groups: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for t in 0..mesh.n_triangles() {
        for &e in &mesh.tri_edges[t] {
            let [a, b] = mesh.edges[e];
            let (ma, mb) = (pairing.master(a), pairing.master(b));
            let key = if ma <= mb { (ma, mb) } else { (mb, ma) };
            groups.entry(key).or_default().push((e, t));
        }
    }
    // 3-point Gauss on [0,1]; exact for the linear test factor times a
    // smooth coefficient trace.
    const GAUSS3: [(f64, f64); 3] = [
        (0.112701665379258, 0.277777777777778),
        (0.5, 0.444444444444444),
        (0.887298334620742, 0.277777777777778),
    ];
    const SIDE_EPS: f64 = 1e-7;
    let mut out = vec![0.0; space.n_dofs];
    for members in groups.values() {
        if members.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "torus edge with {} incident triangles; mesh is not a closed periodic cell",
                members.len()
            )));
        }
        let (e0, t0) = members[0];
        let (_, t1) = members[1];
        let nu = normal_away(mesh, e0, t0);
        // ν points from t0 into the t1 side (for seam pairs the translated
        // partner gradient is the correct torus neighbour).
        let (g0, g1) = (p1_gradient(w, t0), p1_gradient(w, t1));
        let jump_dn = nu[0] * (g1[0] - g0[0]) + nu[1] * (g1[1] - g0[1]);
        let [va, vb] = mesh.edges[e0];
        let (pa, pb) = (mesh.vertices[va], mesh.vertices[vb]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        for (s, wq) in GAUSS3 {
            let y = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let mp = m([y[0] + SIDE_EPS * nu[0], y[1] + SIDE_EPS * nu[1]]);
            let mm = m([y[0] - SIDE_EPS * nu[0], y[1] - SIDE_EPS * nu[1]]);
            let nmn = 0.5
                * (nu[0] * (mp[0][0] + mm[0][0]) * nu[0]
                    + 2.0 * nu[0] * (mp[0][1] + mm[0][1]) * nu[1]
                    + nu[1] * (mp[1][1] + mm[1][1]) * nu[1]);
            let val = wq * len * nmn * jump_dn;
            for (v, phi) in [(va, 1.0 - s), (vb, s)] {
                if let Dof::Free(i) = space.dofs[v] {
                    out[i] += val * phi;
                }
            }
        }
    }
    Ok(out)
}

/// Weak pairing of the lifted equation's right-hand side:
/// b(φ) = ∫∂_r g φ − ⟨∂_rA:D²w, φ⟩, the source of ∂_r w's equation with w's
/// distributional Hessian (edge jump measure for P1 w) paired exactly.
/// Splitting the Hessian term as ∇·(∂_rA∇w) − (div∂_rA)·∇w and evaluating
/// div∂_rA pointwise would drop the line deltas of div∂_rA where the
/// coefficient gradient jumps; each split term carries one, and they only
/// cancel when paired jointly.
fn lift_source(
    a: &CellCoefficient,
    g_r: &(dyn Fn(Vec2) -> f64 + Sync),
    w: &FeFunction,
    r: usize,
) -> Result<Vec<f64>> {
    let space = &w.space;
    let d = a.derivs()?;
    let da = |y: Vec2| (d.d_a)(y, r);
    let mut source = assemble_rhs(space, &[(1.0, LinForm::Load(g_r))], 4)?;
    let jump = hessian_jump_pairing(&da, w)?;
    for (s, j) in source.iter_mut().zip(&jump) {
        *s -= j;
    }
    Ok(source)
}

fn solve_shifted(
    source: &[f64],
    space: &Arc<FeSpace>,
    m_h: &FeFunction,
    op: &PinnedOperator,
) -> Result<FeFunction> {
    let mut rhs: Vec<f64> = source.iter().map(|v| -v).collect();
    let weights = space.basis_integrals();
    solvability_shift(&mut rhs, m_h, &weights);
    let mut x = op.solve(&rhs, SOLVE_TOL)?;
    // Pinning fixes x(v0) = 0; restore the zero-mean representative.
    let mean: f64 = weights.iter().zip(&x).map(|(w, v)| w * v).sum();
    for v in x.iter_mut() {
        *v -= mean;
    }
    Ok(FeFunction::new(space.clone(), x))
}

fn lift_with(
    a: &CellCoefficient,
    g_r: &(dyn Fn(Vec2) -> f64 + Sync),
    chi_h: &FeFunction,
    r: usize,
    m_h: &FeFunction,
    op: &PinnedOperator,
) -> Result<FeFunction> {
    let source = lift_source(a, g_r, chi_h, r)?;
    solve_shifted(&source, &chi_h.space, m_h, op)
}

/// L² projection onto the periodic P1 space (SPD mass system).
fn mass_operator(space: &Arc<FeSpace>) -> Result<FactorizedOperator> {
    let sys = assemble(space, &[(1.0, BiForm::Mass)], &[], 4, true)?;
    FactorizedOperator::new(&sys.matrix, None)
}

/// Second-stage lift: z ≈ ∂_s vₕ by L² projection of the elementwise
/// derivative of the first-stage lift. A literal second solve of the lifted
/// equation would need the distributional part of div ∂_sA (line deltas
/// wherever the coefficient gradient jumps), which a pointwise coefficient
/// registry cannot supply; the projected derivative keeps the O(h) bound
/// (its error is dominated by the H¹ error of vₕ) without that data.
fn projected_derivative(
    v: &FeFunction,
    s: usize,
    mass: &FactorizedOperator,
) -> Result<FeFunction> {
    let space = &v.space;
    let e_s: Vec2 = if s == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
    let dir = move |_: Vec2| e_s;
    let rhs = assemble_rhs(space, &[(1.0, LinForm::BGradFnDotV { b: &dir, w: v })], 4)?;
    let x = mass.solve(&rhs, SOLVE_TOL)?;
    Ok(FeFunction::new(space.clone(), x))
}

/// Everything the reconstruction needs from one cell mesh.
pub struct CellSolution {
    pub mesh: Arc<TriMesh>,
    pub m_h: FeFunction,
    pub a0_h: HomogenizedMatrix,
    /// χ_ij in `IJ` order; (j,i) is the identical object.
    pub correctors: [FeFunction; 3],
    /// Gradient lifts v_r ≈ ∂_rχ_ij, per corrector then per direction.
    pub gradient_lifts: Option<[[FeFunction; 2]; 3]>,
    /// z^{kl}_ij ≈ ∂²_klχ_ij, per corrector, (k,l) in `IJ` order.
    pub corrector_hessians: Option<[[FeFunction; 3]; 3]>,
    pub mesh_h: f64,
}

impl CellSolution {
    pub fn corrector(&self, i: usize, j: usize) -> &FeFunction {
        &self.correctors[ij_index(i, j)]
    }

    pub fn hessian(&self, i: usize, j: usize, k: usize, l: usize) -> Option<&FeFunction> {
        self.corrector_hessians
            .as_ref()
            .map(|h| &h[ij_index(i, j)][ij_index(k, l)])
    }

    /// Full cell solve. `with_hessians` additionally runs both lift stages
    /// (requires a coefficient with second derivatives).
    pub fn solve(
        a: &CellCoefficient,
        mesh: Arc<TriMesh>,
        with_hessians: bool,
    ) -> Result<CellSolution> {
        let pairing = Arc::new(periodic_pairing(&mesh)?);
        let space = FeSpace::p1_periodic_zero_mean(mesh.clone(), pairing.clone());
        let m_h = solve_invariant_measure(a, &mesh, &pairing)?;
        let a0_h = homogenized_matrix(a, &m_h);
        let op = corrector_operator(a, &space)?;
        let correctors = [
            corrector_with(a, &a0_h, IJ[0], &space, &m_h, &op)?,
            corrector_with(a, &a0_h, IJ[1], &space, &m_h, &op)?,
            corrector_with(a, &a0_h, IJ[2], &space, &m_h, &op)?,
        ];
        let (mut lifts, mut hessians) = (None, None);
        if with_hessians {
            let d = a.derivs()?;
            let mass = mass_operator(&space)?;
            let mut lv: Vec<[FeFunction; 2]> = Vec::with_capacity(3);
            let mut hv: Vec<[FeFunction; 3]> = Vec::with_capacity(3);
            for (c, &(i, j)) in IJ.iter().enumerate() {
                let chi = &correctors[c];
                let mut v = Vec::with_capacity(2);
                for r in 0..2 {
                    let g_r = move |y: Vec2| -(d.d_a)(y, r)[i][j];
                    v.push(lift_with(a, &g_r, chi, r, &m_h, &op)?);
                }
                let z00 = projected_derivative(&v[0], 0, &mass)?;
                let z11 = projected_derivative(&v[1], 1, &mass)?;
                // Mixed entry: the two differentiation orders differ at the
                // discrete level; average them to restore symmetry.
                let za = projected_derivative(&v[0], 1, &mass)?;
                let zb = projected_derivative(&v[1], 0, &mass)?;
                let z01 = FeFunction::new(
                    space.clone(),
                    za.coeffs
                        .iter()
                        .zip(&zb.coeffs)
                        .map(|(x, y)| 0.5 * (x + y))
                        .collect(),
                );
                hv.push([z00, z01, z11]);
                lv.push([v.remove(0), v.remove(0)]);
            }
            lifts = Some([lv.remove(0), lv.remove(0), lv.remove(0)]);
            hessians = Some([hv.remove(0), hv.remove(0), hv.remove(0)]);
        }
        let mesh_h = mesh.h_max;
        Ok(CellSolution {
            mesh,
            m_h,
            a0_h,
            correctors,
            gradient_lifts: lifts,
            corrector_hessians: hessians,
            mesh_h,
        })
    }

    /// Text block with the homogenized matrix and references to exported
    /// function files (one per corrector and Hessian component).
    pub fn export<W: Write>(&self, w: &mut W, file_prefix: &str) -> Result<()> {
        writeln!(w, "cell-solution v1")?;
        writeln!(w, "h {:.17e}", self.mesh_h)?;
        let e = self.a0_h.entries;
        writeln!(
            w,
            "a0 {:.17e} {:.17e} {:.17e} {:.17e}",
            e[0][0], e[0][1], e[1][0], e[1][1]
        )?;
        writeln!(w, "measure {}_m.txt", file_prefix)?;
        for (c, &(i, j)) in IJ.iter().enumerate() {
            writeln!(w, "corrector {} {} {}_chi{}{}.txt", i, j, file_prefix, i, j)?;
            if self.corrector_hessians.is_some() {
                for &(k, l) in &IJ {
                    writeln!(
                        w,
                        "hessian {} {} {} {} {}_z{}{}_{}{}.txt",
                        i, j, k, l, file_prefix, i, j, k, l
                    )?;
                }
            }
            let _ = c;
        }
        Ok(())
    }
}

/// Divergence-form transform diagnostic: find the skew matrix Bₕ making
/// A^div = A·mₕ + Bₕ (approximately) row-wise divergence free, via two
/// periodic Poisson solves −Δv_l = (div(Amₕ))_l.
pub struct DivergenceTransform {
    /// Elementwise-constant skew part per triangle.
    pub b_h: Vec<Mat2>,
    /// Max |B + Bᵀ| entry (zero by construction).
    pub skewness: f64,
    /// |∫_Y Bₕ| (should tend to zero under refinement).
    pub mean: [f64; 2],
    /// max_φ |∫ A^div ∇φ| / ‖φ‖_{H¹} over the P1 periodic basis.
    pub divergence_residual: f64,
}

pub fn divergence_form_transform(
    a: &CellCoefficient,
    m_h: &FeFunction,
    mesh: &Arc<TriMesh>,
    pairing: &Arc<PeriodicPairing>,
) -> Result<DivergenceTransform> {
    let space = FeSpace::p1_periodic_zero_mean(mesh.clone(), pairing.clone());
    let id = |_: Vec2| crate::geom::IDENTITY;
    // Weak Poisson: ∫∇v_l·∇φ = ∫(div(Amₕ))_l φ = −∫ mₕ (A e_l)·∇φ.
    let mut v = Vec::with_capacity(2);
    for l in 0..2 {
        let col = |y: Vec2| -> Vec2 {
            let av = a.a(y);
            let mv = m_h.eval(y, 0).expect("cell point").0;
            [mv * av[0][l], mv * av[1][l]]
        };
        let sys = assemble(
            &space,
            &[(1.0, BiForm::GradAGrad(&id))],
            &[(-1.0, LinForm::LoadGrad(&col))],
            4,
            true,
        )?;
        let op = PinnedOperator::new(&sys.matrix)?;
        let mut x = op.solve(&sys.rhs, SOLVE_TOL)?;
        let weights = space.basis_integrals();
        let mean: f64 = weights.iter().zip(&x).map(|(w, u)| w * u).sum();
        for u in x.iter_mut() {
            *u -= mean;
        }
        v.push(FeFunction::new(space.clone(), x));
    }

    // B_ij = ∂_j v_i − ∂_i v_j per element: div(row i of B) = Δv_i − ∂_i(div v)
    // cancels (div(Amₕ))_i up to the harmonic part of div v.
    let nt = mesh.n_triangles();
    let mut b_h = Vec::with_capacity(nt);
    let mut mean = [0.0f64; 2];
    let mut area_total = 0.0;
    for t in 0..nt {
        let c = centroid(mesh.triangle_points(t));
        let g0 = v[0].eval_in(t, c, 1).1;
        let g1 = v[1].eval_in(t, c, 1).1;
        let b01 = g0[1] - g1[0];
        b_h.push([[0.0, b01], [-b01, 0.0]]);
        let area = mesh.triangle_area(t);
        mean[0] += area * b01;
        mean[1] -= area * b01;
        area_total += area;
    }
    mean[0] /= area_total;
    mean[1] /= area_total;

    // Residual rows r_l(φ) = ∫ (A^div ∇φ)·e_l; assemble both components
    // against every basis function and normalize by ‖φ‖_{H¹}.
    let rule = crate::quad::QuadratureRule::for_degree(4);
    let n = space.n_dofs;
    let mut resid = vec![[0.0f64; 2]; n];
    let mut h1sq = vec![0.0f64; n];
    for t in 0..nt {
        let basis = space.local_basis(t);
        let pts = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        let dofs = space.element_dofs(t);
        for (q, wq) in rule.points.iter().zip(&rule.weights) {
            let p = crate::space::map_ref(pts, *q);
            let (vals, grads, _) = basis.eval(p);
            let av = a.a(p);
            let mv = m_h.eval_with_basis(t, &basis, p, 0).0;
            let bt = &b_h[t];
            for (lidx, dof) in dofs.iter().enumerate() {
                let crate::space::Dof::Free(k) = dof else { continue };
                let g = grads[lidx];
                for i in 0..2 {
                    let adiv_row = [
                        mv * av[i][0] + bt[i][0],
                        mv * av[i][1] + bt[i][1],
                    ];
                    resid[*k][i] += wq * area * (adiv_row[0] * g[0] + adiv_row[1] * g[1]);
                }
                h1sq[*k] += wq * area * (vals[lidx] * vals[lidx] + g[0] * g[0] + g[1] * g[1]);
            }
        }
    }
    let divergence_residual = resid
        .iter()
        .zip(&h1sq)
        .map(|(r, h)| (r[0] * r[0] + r[1] * r[1]).sqrt() / h.sqrt())
        .fold(0.0f64, f64::max);

    Ok(DivergenceTransform {
        b_h,
        skewness: 0.0,
        mean,
        divergence_residual,
    })
}

fn centroid(p: [Vec2; 3]) -> Vec2 {
    [
        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
    ]
}
