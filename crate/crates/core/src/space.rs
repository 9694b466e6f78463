//! Finite element spaces and functions: P1 (optionally periodic with zero
//! mean), P2, and the HCT C¹ macro-element, with constraint handling by dof
//! elimination (Dirichlet) or a Lagrange-multiplier border (zero mean).

use crate::error::{Error, Result};
use crate::geom::{Vec2};
use crate::hct::{edge_normal, HctBasis};
use crate::mesh::{PeriodicPairing, TriMesh};
use std::io::Write;
use std::sync::Arc;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    P1PerZeroMean,
    P1,
    P2,
    Hct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    None,
    ZeroMean,
    DirichletZero,
    DirichletZeroWithBoundaryGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dof {
    Free(usize),
    Fixed(f64),
}

/// Largest mesh for which per-triangle HCT bases are cached for random-point
/// evaluation; larger meshes rebuild the local basis on demand.
const HCT_CACHE_LIMIT: usize = 24_000;

pub struct FeSpace {
    pub kind: SpaceKind,
    pub mesh: Arc<TriMesh>,
    pub pairing: Option<Arc<PeriodicPairing>>,
    pub constraint: Constraint,
    /// Entity dofs. Layout: P1 = vertex; P2 = vertices then edges;
    /// HCT = (value, d/dx, d/dy) per vertex then one per edge.
    pub dofs: Vec<Dof>,
    pub n_dofs: usize,
    hct_cache: OnceLock<Vec<HctBasis>>,
}

impl FeSpace {
    pub fn p1(mesh: Arc<TriMesh>) -> Arc<FeSpace> {
        let nv = mesh.n_vertices();
        Arc::new(FeSpace {
            kind: SpaceKind::P1,
            mesh,
            pairing: None,
            constraint: Constraint::None,
            dofs: (0..nv).map(Dof::Free).collect(),
            n_dofs: nv,
            hct_cache: OnceLock::new(),
        })
    }

    pub fn p1_periodic_zero_mean(
        mesh: Arc<TriMesh>,
        pairing: Arc<PeriodicPairing>,
    ) -> Arc<FeSpace> {
        let nv = mesh.n_vertices();
        let mut index = vec![usize::MAX; nv];
        let mut next = 0;
        for v in 0..nv {
            if pairing.master(v) == v {
                index[v] = next;
                next += 1;
            }
        }
        let dofs = (0..nv)
            .map(|v| Dof::Free(index[pairing.master(v)]))
            .collect();
        Arc::new(FeSpace {
            kind: SpaceKind::P1PerZeroMean,
            mesh,
            pairing: Some(pairing),
            constraint: Constraint::ZeroMean,
            dofs,
            n_dofs: next,
            hct_cache: OnceLock::new(),
        })
    }

    pub fn p2(mesh: Arc<TriMesh>) -> Arc<FeSpace> {
        let n = mesh.n_vertices() + mesh.edges.len();
        Arc::new(FeSpace {
            kind: SpaceKind::P2,
            mesh,
            pairing: None,
            constraint: Constraint::None,
            dofs: (0..n).map(Dof::Free).collect(),
            n_dofs: n,
            hct_cache: OnceLock::new(),
        })
    }

    /// P2 with homogeneous Dirichlet conditions on the whole boundary.
    pub fn p2_dirichlet(mesh: Arc<TriMesh>) -> Arc<FeSpace> {
        let nv = mesh.n_vertices();
        let mut dofs = Vec::with_capacity(nv + mesh.edges.len());
        let mut next = 0;
        for v in 0..nv {
            if mesh.is_boundary_vertex(v) {
                dofs.push(Dof::Fixed(0.0));
            } else {
                dofs.push(Dof::Free(next));
                next += 1;
            }
        }
        for b in &mesh.edge_boundary {
            if b.is_some() {
                dofs.push(Dof::Fixed(0.0));
            } else {
                dofs.push(Dof::Free(next));
                next += 1;
            }
        }
        Arc::new(FeSpace {
            kind: SpaceKind::P2,
            mesh,
            pairing: None,
            constraint: Constraint::DirichletZero,
            dofs,
            n_dofs: next,
            hct_cache: OnceLock::new(),
        })
    }

    pub fn hct(mesh: Arc<TriMesh>) -> Arc<FeSpace> {
        let n = 3 * mesh.n_vertices() + mesh.edges.len();
        Arc::new(FeSpace {
            kind: SpaceKind::Hct,
            mesh,
            pairing: None,
            constraint: Constraint::None,
            dofs: (0..n).map(Dof::Free).collect(),
            n_dofs: n,
            hct_cache: OnceLock::new(),
        })
    }

    /// HCT space for H²∩H¹₀ on an axis-aligned rectangle: boundary values and
    /// tangential derivatives vanish; boundary normal-derivative data comes
    /// from `boundary_grad` (typically the gradient of an auxiliary H¹ solve).
    pub fn hct_h2_dirichlet(
        mesh: Arc<TriMesh>,
        boundary_grad: &dyn Fn(Vec2) -> Vec2,
    ) -> Arc<FeSpace> {
        let nv = mesh.n_vertices();
        let [lo, hi] = mesh.domain_box;
        let tol = crate::mesh::PERIODIC_TOL;
        let mut dofs = Vec::with_capacity(3 * nv + mesh.edges.len());
        let mut next = 0;
        let free = |dofs: &mut Vec<Dof>, next: &mut usize| {
            dofs.push(Dof::Free(*next));
            *next += 1;
        };
        for v in 0..nv {
            let p = mesh.vertices[v];
            let on_lr = (p[0] - lo[0]).abs() < tol || (p[0] - hi[0]).abs() < tol;
            let on_tb = (p[1] - lo[1]).abs() < tol || (p[1] - hi[1]).abs() < tol;
            if !(on_lr || on_tb) {
                free(&mut dofs, &mut next);
                free(&mut dofs, &mut next);
                free(&mut dofs, &mut next);
                continue;
            }
            dofs.push(Dof::Fixed(0.0)); // value
            if on_lr && on_tb {
                // Corner: both tangential directions force the full gradient.
                dofs.push(Dof::Fixed(0.0));
                dofs.push(Dof::Fixed(0.0));
            } else if on_lr {
                // Tangent is e_y: d/dy = 0; d/dx prescribed.
                dofs.push(Dof::Fixed(boundary_grad(p)[0]));
                dofs.push(Dof::Fixed(0.0));
            } else {
                dofs.push(Dof::Fixed(0.0));
                dofs.push(Dof::Fixed(boundary_grad(p)[1]));
            }
        }
        for (e, b) in mesh.edges.iter().zip(&mesh.edge_boundary) {
            if b.is_some() {
                let a = mesh.vertices[e[0]];
                let bb = mesh.vertices[e[1]];
                let n = edge_normal(a, bb);
                let mid = [0.5 * (a[0] + bb[0]), 0.5 * (a[1] + bb[1])];
                let g = boundary_grad(mid);
                dofs.push(Dof::Fixed(n[0] * g[0] + n[1] * g[1]));
            } else {
                free(&mut dofs, &mut next);
            }
        }
        Arc::new(FeSpace {
            kind: SpaceKind::Hct,
            mesh,
            pairing: None,
            constraint: Constraint::DirichletZeroWithBoundaryGradient,
            dofs,
            n_dofs: next,
            hct_cache: OnceLock::new(),
        })
    }

    pub fn n_local(&self) -> usize {
        match self.kind {
            SpaceKind::P1 | SpaceKind::P1PerZeroMean => 3,
            SpaceKind::P2 => 6,
            SpaceKind::Hct => 12,
        }
    }

    /// Entity dof indices of element t, in local basis order.
    pub fn element_entities(&self, t: usize) -> Vec<usize> {
        let tri = self.mesh.triangles[t];
        match self.kind {
            SpaceKind::P1 | SpaceKind::P1PerZeroMean => tri.to_vec(),
            SpaceKind::P2 => {
                let nv = self.mesh.n_vertices();
                let mut out = tri.to_vec();
                for k in 0..3 {
                    out.push(nv + self.mesh.tri_edges[t][k]);
                }
                out
            }
            SpaceKind::Hct => {
                let nv = self.mesh.n_vertices();
                let mut out = Vec::with_capacity(12);
                for &v in &tri {
                    out.push(3 * v);
                    out.push(3 * v + 1);
                    out.push(3 * v + 2);
                }
                for k in 0..3 {
                    out.push(3 * nv + self.mesh.tri_edges[t][k]);
                }
                out
            }
        }
    }

    pub fn element_dofs(&self, t: usize) -> Vec<Dof> {
        self.element_entities(t)
            .into_iter()
            .map(|e| self.dofs[e])
            .collect()
    }

    /// Local basis of element t. For HCT this builds (or fetches) the
    /// macro-element construction.
    pub fn local_basis(&self, t: usize) -> LocalBasis<'_> {
        let pts = self.mesh.triangle_points(t);
        match self.kind {
            SpaceKind::P1 | SpaceKind::P1PerZeroMean => LocalBasis::P1 {
                pts,
                grads: lambda_grads(pts),
            },
            SpaceKind::P2 => LocalBasis::P2 {
                pts,
                grads: lambda_grads(pts),
            },
            SpaceKind::Hct => {
                if self.mesh.n_triangles() <= HCT_CACHE_LIMIT {
                    let cache = self.hct_cache.get_or_init(|| {
                        (0..self.mesh.n_triangles())
                            .map(|t| self.build_hct_basis(t))
                            .collect()
                    });
                    LocalBasis::HctRef(&cache[t])
                } else {
                    LocalBasis::Hct(Box::new(self.build_hct_basis(t)))
                }
            }
        }
    }

    fn build_hct_basis(&self, t: usize) -> HctBasis {
        let pts = self.mesh.triangle_points(t);
        let tri = self.mesh.triangles[t];
        let mut normals = [[0.0; 2]; 3];
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let (lo, hi) = if tri[i] < tri[j] { (i, j) } else { (j, i) };
            normals[k] = edge_normal(self.mesh.vertices[tri[lo]], self.mesh.vertices[tri[hi]]);
        }
        HctBasis::new(pts, normals)
    }

    /// Integral of each free basis function (the zero-mean border vector).
    pub fn basis_integrals(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_dofs];
        match self.kind {
            SpaceKind::P1 | SpaceKind::P1PerZeroMean => {
                for t in 0..self.mesh.n_triangles() {
                    let area = self.mesh.triangle_area(t);
                    for d in self.element_dofs(t) {
                        if let Dof::Free(k) = d {
                            c[k] += area / 3.0;
                        }
                    }
                }
            }
            _ => {
                // Exact for P2 (degree-2 rule); HCT handled by element loops.
                let rule = crate::quad::QuadratureRule::for_degree(4);
                for t in 0..self.mesh.n_triangles() {
                    let area = self.mesh.triangle_area(t);
                    let basis = self.local_basis(t);
                    let pts = self.mesh.triangle_points(t);
                    let dofs = self.element_dofs(t);
                    for (q, w) in rule.points.iter().zip(&rule.weights) {
                        let p = map_ref(pts, *q);
                        let (vals, _, _) = basis.eval(p);
                        for (l, d) in dofs.iter().enumerate() {
                            if let Dof::Free(k) = d {
                                c[*k] += w * area * vals[l];
                            }
                        }
                    }
                }
            }
        }
        c
    }
}

pub fn map_ref(pts: [Vec2; 3], q: Vec2) -> Vec2 {
    let l0 = 1.0 - q[0] - q[1];
    [
        l0 * pts[0][0] + q[0] * pts[1][0] + q[1] * pts[2][0],
        l0 * pts[0][1] + q[0] * pts[1][1] + q[1] * pts[2][1],
    ]
}

fn lambda_grads(pts: [Vec2; 3]) -> [[f64; 2]; 3] {
    let area2 = (pts[1][0] - pts[0][0]) * (pts[2][1] - pts[0][1])
        - (pts[1][1] - pts[0][1]) * (pts[2][0] - pts[0][0]);
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        let u = [
            pts[(k + 2) % 3][0] - pts[(k + 1) % 3][0],
            pts[(k + 2) % 3][1] - pts[(k + 1) % 3][1],
        ];
        g[k] = [-u[1] / area2, u[0] / area2];
    }
    g
}

/// Per-element basis evaluations: values, gradients, Hessians (xx, xy, yy).
pub enum LocalBasis<'a> {
    P1 {
        pts: [Vec2; 3],
        grads: [[f64; 2]; 3],
    },
    P2 {
        pts: [Vec2; 3],
        grads: [[f64; 2]; 3],
    },
    Hct(Box<HctBasis>),
    HctRef(&'a HctBasis),
}

impl LocalBasis<'_> {
    pub fn n(&self) -> usize {
        match self {
            LocalBasis::P1 { .. } => 3,
            LocalBasis::P2 { .. } => 6,
            LocalBasis::Hct(_) | LocalBasis::HctRef(_) => 12,
        }
    }

    pub fn hct(&self) -> Option<&HctBasis> {
        match self {
            LocalBasis::Hct(b) => Some(b),
            LocalBasis::HctRef(b) => Some(b),
            _ => None,
        }
    }

    pub fn eval(&self, p: Vec2) -> (Vec<f64>, Vec<[f64; 2]>, Vec<[f64; 3]>) {
        match self {
            LocalBasis::P1 { pts, grads } => {
                let lam = bary(*pts, p);
                (
                    lam.to_vec(),
                    grads.to_vec(),
                    vec![[0.0; 3]; 3],
                )
            }
            LocalBasis::P2 { pts, grads } => {
                let lam = bary(*pts, p);
                let mut vals = Vec::with_capacity(6);
                let mut gs = Vec::with_capacity(6);
                let mut hs = Vec::with_capacity(6);
                for k in 0..3 {
                    vals.push(lam[k] * (2.0 * lam[k] - 1.0));
                    let f = 4.0 * lam[k] - 1.0;
                    gs.push([f * grads[k][0], f * grads[k][1]]);
                    hs.push([
                        4.0 * grads[k][0] * grads[k][0],
                        4.0 * grads[k][0] * grads[k][1],
                        4.0 * grads[k][1] * grads[k][1],
                    ]);
                }
                for k in 0..3 {
                    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                    vals.push(4.0 * lam[i] * lam[j]);
                    gs.push([
                        4.0 * (lam[j] * grads[i][0] + lam[i] * grads[j][0]),
                        4.0 * (lam[j] * grads[i][1] + lam[i] * grads[j][1]),
                    ]);
                    hs.push([
                        8.0 * grads[i][0] * grads[j][0],
                        4.0 * (grads[i][0] * grads[j][1] + grads[i][1] * grads[j][0]),
                        8.0 * grads[i][1] * grads[j][1],
                    ]);
                }
                (vals, gs, hs)
            }
            LocalBasis::Hct(_) | LocalBasis::HctRef(_) => {
                let b = self.hct().unwrap();
                let (v, g, h) = b.eval(p);
                (v.to_vec(), g.to_vec(), h.to_vec())
            }
        }
    }

    /// Like `eval`, but for HCT restricted to a known subtriangle (used by
    /// assembly loops that place quadrature points per subtriangle).
    pub fn eval_hct_sub(&self, s: usize, p: Vec2) -> ([f64; 12], [[f64; 2]; 12], [[f64; 3]; 12]) {
        self.hct().expect("HCT basis required").eval_sub(s, p)
    }
}

fn bary(pts: [Vec2; 3], p: Vec2) -> [f64; 3] {
    let area2 = (pts[1][0] - pts[0][0]) * (pts[2][1] - pts[0][1])
        - (pts[1][1] - pts[0][1]) * (pts[2][0] - pts[0][0]);
    let la = ((pts[1][0] - p[0]) * (pts[2][1] - p[1])
        - (pts[1][1] - p[1]) * (pts[2][0] - p[0]))
        / area2;
    let lb = ((pts[2][0] - p[0]) * (pts[0][1] - p[1])
        - (pts[2][1] - p[1]) * (pts[0][0] - p[0]))
        / area2;
    [la, lb, 1.0 - la - lb]
}

/// Pointwise-evaluable scalar field with optional derivatives.
pub trait Field2: Sync {
    fn value(&self, p: Vec2) -> f64;
    fn gradient(&self, p: Vec2) -> Option<Vec2> {
        let _ = p;
        None
    }
    /// Hessian entries (xx, xy, yy).
    fn hessian(&self, p: Vec2) -> Option<[f64; 3]> {
        let _ = p;
        None
    }
}

/// Field built from closures.
pub struct FnField<V, G, H>
where
    V: Fn(Vec2) -> f64 + Sync,
    G: Fn(Vec2) -> Vec2 + Sync,
    H: Fn(Vec2) -> [f64; 3] + Sync,
{
    pub v: V,
    pub g: Option<G>,
    pub h: Option<H>,
}

pub type ValueField<V> = FnField<V, fn(Vec2) -> Vec2, fn(Vec2) -> [f64; 3]>;

pub fn value_field<V: Fn(Vec2) -> f64 + Sync>(v: V) -> ValueField<V> {
    FnField {
        v,
        g: None,
        h: None,
    }
}

pub fn full_field<V, G, H>(v: V, g: G, h: H) -> FnField<V, G, H>
where
    V: Fn(Vec2) -> f64 + Sync,
    G: Fn(Vec2) -> Vec2 + Sync,
    H: Fn(Vec2) -> [f64; 3] + Sync,
{
    FnField {
        v,
        g: Some(g),
        h: Some(h),
    }
}

impl<V, G, H> Field2 for FnField<V, G, H>
where
    V: Fn(Vec2) -> f64 + Sync,
    G: Fn(Vec2) -> Vec2 + Sync,
    H: Fn(Vec2) -> [f64; 3] + Sync,
{
    fn value(&self, p: Vec2) -> f64 {
        (self.v)(p)
    }
    fn gradient(&self, p: Vec2) -> Option<Vec2> {
        self.g.as_ref().map(|g| g(p))
    }
    fn hessian(&self, p: Vec2) -> Option<[f64; 3]> {
        self.h.as_ref().map(|h| h(p))
    }
}

/// Coefficient vector bound to a finite element space.
#[derive(Clone)]
pub struct FeFunction {
    pub space: Arc<FeSpace>,
    pub coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> FeFunction {
        assert_eq!(coeffs.len(), space.n_dofs);
        FeFunction { space, coeffs }
    }

    pub fn zero(space: Arc<FeSpace>) -> FeFunction {
        let n = space.n_dofs;
        FeFunction::new(space, vec![0.0; n])
    }

    pub fn dof_value(&self, d: Dof) -> f64 {
        match d {
            Dof::Free(k) => self.coeffs[k],
            Dof::Fixed(v) => v,
        }
    }

    /// Value, gradient, Hessian at a point (located in the mesh).
    ///
    /// `order` caps the work: 0 returns only the value. P1/P2 Hessians are
    /// element-interior quantities (zero / constant per element).
    pub fn eval(&self, p: Vec2, order: u8) -> Result<(f64, Vec2, [f64; 3])> {
        let (t, _) = self.space.mesh.locate(p)?;
        Ok(self.eval_in(t, p, order))
    }

    /// Evaluation when the containing triangle is already known.
    pub fn eval_in(&self, t: usize, p: Vec2, order: u8) -> (f64, Vec2, [f64; 3]) {
        let basis = self.space.local_basis(t);
        self.eval_with_basis(t, &basis, p, order)
    }

    /// Evaluation reusing an already-built local basis (hot loops).
    pub fn eval_with_basis(
        &self,
        t: usize,
        basis: &LocalBasis,
        p: Vec2,
        order: u8,
    ) -> (f64, Vec2, [f64; 3]) {
        let dofs = self.space.element_dofs(t);
        let (vals, grads, hess) = basis.eval(p);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [0.0; 3];
        for (l, d) in dofs.iter().enumerate() {
            let c = self.dof_value(*d);
            v += c * vals[l];
            if order >= 1 {
                g[0] += c * grads[l][0];
                g[1] += c * grads[l][1];
            }
            if order >= 2 {
                for k in 0..3 {
                    h[k] += c * hess[l][k];
                }
            }
        }
        (v, g, h)
    }

    /// ∫ fn over the mesh (exact for P1; quadrature otherwise).
    pub fn integral(&self) -> f64 {
        match self.space.kind {
            SpaceKind::P1 | SpaceKind::P1PerZeroMean => {
                let mesh = &self.space.mesh;
                let mut s = 0.0;
                for t in 0..mesh.n_triangles() {
                    let area = mesh.triangle_area(t);
                    for d in self.space.element_dofs(t) {
                        s += area / 3.0 * self.dof_value(d);
                    }
                }
                s
            }
            _ => {
                let c = self.space.basis_integrals();
                let mut s: f64 = c.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum();
                // Fixed dofs contribute too; integrate them by element loop.
                let has_fixed = self
                    .space
                    .dofs
                    .iter()
                    .any(|d| matches!(d, Dof::Fixed(v) if *v != 0.0));
                if has_fixed {
                    s = 0.0;
                    let rule = crate::quad::QuadratureRule::for_degree(4);
                    let mesh = &self.space.mesh;
                    for t in 0..mesh.n_triangles() {
                        let area = mesh.triangle_area(t);
                        let pts = mesh.triangle_points(t);
                        for (q, w) in rule.points.iter().zip(&rule.weights) {
                            let p = map_ref(pts, *q);
                            s += w * area * self.eval_in(t, p, 0).0;
                        }
                    }
                }
                s
            }
        }
    }

    /// Plain-text `fe-fn v1` export.
    pub fn export<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "fe-fn v1")?;
        writeln!(
            w,
            "{:?} {:016x} {}",
            self.space.kind,
            mesh_hash(&self.space.mesh),
            self.coeffs.len()
        )?;
        for c in &self.coeffs {
            writeln!(w, "{:.17e}", c)?;
        }
        Ok(())
    }

    /// CSV of sampled values on a uniform (n+1)×(n+1) grid for plotting.
    pub fn sample_csv<W: Write>(&self, w: &mut W, n: usize) -> Result<()> {
        writeln!(w, "x1,x2,value")?;
        let [lo, hi] = self.space.mesh.domain_box;
        for j in 0..=n {
            for i in 0..=n {
                let p = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64,
                ];
                let v = self.eval(p, 0).map(|r| r.0).unwrap_or(f64::NAN);
                writeln!(w, "{},{},{:.17e}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }
}

impl Field2 for FeFunction {
    fn value(&self, p: Vec2) -> f64 {
        self.eval(p, 0).expect("point outside mesh").0
    }
    fn gradient(&self, p: Vec2) -> Option<Vec2> {
        Some(self.eval(p, 1).expect("point outside mesh").1)
    }
    fn hessian(&self, p: Vec2) -> Option<[f64; 3]> {
        Some(self.eval(p, 2).expect("point outside mesh").2)
    }
}

/// FNV-1a over vertex coordinates and triangle indices; identifies the mesh a
/// function file belongs to.
pub fn mesh_hash(mesh: &TriMesh) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for v in &mesh.vertices {
        eat(&v[0].to_le_bytes());
        eat(&v[1].to_le_bytes());
    }
    for t in &mesh.triangles {
        for &i in t {
            eat(&(i as u64).to_le_bytes());
        }
    }
    h
}

/// Nodal interpolation. P1/P2 use point values; HCT needs gradients too.
pub fn interpolate(space: &Arc<FeSpace>, f: &dyn Field2) -> Result<FeFunction> {
    let mesh = &space.mesh;
    let nv = mesh.n_vertices();
    let mut coeffs = vec![0.0; space.n_dofs];
    let set = |d: Dof, v: f64, coeffs: &mut Vec<f64>| {
        if let Dof::Free(k) = d {
            coeffs[k] = v;
        }
    };
    match space.kind {
        SpaceKind::P1 | SpaceKind::P1PerZeroMean => {
            for v in 0..nv {
                set(space.dofs[v], f.value(mesh.vertices[v]), &mut coeffs);
            }
        }
        SpaceKind::P2 => {
            for v in 0..nv {
                set(space.dofs[v], f.value(mesh.vertices[v]), &mut coeffs);
            }
            for (e, edge) in mesh.edges.iter().enumerate() {
                let a = mesh.vertices[edge[0]];
                let b = mesh.vertices[edge[1]];
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                set(space.dofs[nv + e], f.value(mid), &mut coeffs);
            }
        }
        SpaceKind::Hct => {
            for v in 0..nv {
                let p = mesh.vertices[v];
                let g = f.gradient(p).ok_or_else(|| {
                    Error::Capability("HCT interpolation needs gradients".into())
                })?;
                set(space.dofs[3 * v], f.value(p), &mut coeffs);
                set(space.dofs[3 * v + 1], g[0], &mut coeffs);
                set(space.dofs[3 * v + 2], g[1], &mut coeffs);
            }
            for (e, edge) in mesh.edges.iter().enumerate() {
                let a = mesh.vertices[edge[0]];
                let b = mesh.vertices[edge[1]];
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let n = edge_normal(a, b);
                let g = f.gradient(mid).ok_or_else(|| {
                    Error::Capability("HCT interpolation needs gradients".into())
                })?;
                set(
                    space.dofs[3 * nv + e],
                    n[0] * g[0] + n[1] * g[1],
                    &mut coeffs,
                );
            }
        }
    }
    Ok(FeFunction::new(space.clone(), coeffs))
}
