//! Hsieh–Clough–Tocher C¹ macro-element: cubic on each of the 3 subtriangles
//! of the centroid split, 12 dofs (vertex values, vertex gradients, edge
//! midpoint normal derivatives).
//!
//! The local basis is built per triangle by solving a consistent least-squares
//! system: 21 interior C⁰/C¹ matching rows across the internal edges plus 12
//! dof rows, for the 30 cubic coefficients. Monomials use coordinates scaled
//! by the longest edge, keeping the system well conditioned at any h.

use crate::geom::{norm, sub, Vec2};
use faer::prelude::*;

/// Unit normal of an edge, oriented by the convention that the edge vector
/// runs from the lower global vertex index to the higher one and the normal
/// is its clockwise rotation. Both triangles sharing the edge agree on it.
pub fn edge_normal(p_low: Vec2, p_high: Vec2) -> Vec2 {
    let e = sub(p_high, p_low);
    let l = norm(e);
    [e[1] / l, -e[0] / l]
}

const MONO: [(i32, i32); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

fn mono_val(xi: Vec2) -> [f64; 10] {
    let mut out = [0.0; 10];
    for (m, &(a, b)) in MONO.iter().enumerate() {
        out[m] = xi[0].powi(a) * xi[1].powi(b);
    }
    out
}

fn mono_grad(xi: Vec2) -> [[f64; 2]; 10] {
    let mut out = [[0.0; 2]; 10];
    for (m, &(a, b)) in MONO.iter().enumerate() {
        out[m][0] = if a > 0 {
            a as f64 * xi[0].powi(a - 1) * xi[1].powi(b)
        } else {
            0.0
        };
        out[m][1] = if b > 0 {
            b as f64 * xi[0].powi(a) * xi[1].powi(b - 1)
        } else {
            0.0
        };
    }
    out
}

/// Hessian entries (xx, xy, yy) of each monomial.
fn mono_hess(xi: Vec2) -> [[f64; 3]; 10] {
    let mut out = [[0.0; 3]; 10];
    for (m, &(a, b)) in MONO.iter().enumerate() {
        if a > 1 {
            out[m][0] = (a * (a - 1)) as f64 * xi[0].powi(a - 2) * xi[1].powi(b);
        }
        if a > 0 && b > 0 {
            out[m][1] = (a * b) as f64 * xi[0].powi(a - 1) * xi[1].powi(b - 1);
        }
        if b > 1 {
            out[m][2] = (b * (b - 1)) as f64 * xi[0].powi(a) * xi[1].powi(b - 2);
        }
    }
    out
}

/// Local HCT basis on one macro triangle.
///
/// Dof order: (v0, v0x, v0y, v1, v1x, v1y, v2, v2x, v2y, e0, e1, e2) where
/// e_k is the midpoint normal-derivative dof of the edge opposite vertex k,
/// with the normal passed in by the caller (global orientation).
pub struct HctBasis {
    pts: [Vec2; 3],
    centroid: Vec2,
    scale: f64,
    /// coef[s][d][m]: coefficient of monomial m for dof d on subtriangle s.
    coef: Box<[[[f64; 10]; 12]; 3]>,
}

impl HctBasis {
    pub fn new(pts: [Vec2; 3], edge_normals: [Vec2; 3]) -> HctBasis {
        let centroid = [
            (pts[0][0] + pts[1][0] + pts[2][0]) / 3.0,
            (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0,
        ];
        let scale = norm(sub(pts[1], pts[0]))
            .max(norm(sub(pts[2], pts[1])))
            .max(norm(sub(pts[0], pts[2])));
        let xi = |p: Vec2| -> Vec2 {
            [(p[0] - centroid[0]) / scale, (p[1] - centroid[1]) / scale]
        };

        // 33 rows, 30 unknowns (subtriangle-major, then monomial).
        let mut m = faer::Mat::<f64>::zeros(33, 30);
        let mut rhs = faer::Mat::<f64>::zeros(33, 12);
        let col = |s: usize, mono: usize| s * 10 + mono;

        let mut row = 0;
        // Interior matching: internal edge j runs from p_j to the centroid and
        // separates subtriangles T_{j+2} and T_j (T_s = (p_s, p_{s+1}, c)).
        for j in 0..3 {
            let s_plus = j;
            let s_minus = (j + 2) % 3;
            let a = pts[j];
            let dir = sub(centroid, a);
            let n = {
                let l = norm(dir);
                [dir[1] / l, -dir[0] / l]
            };
            for t in [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0] {
                let p = [a[0] + t * dir[0], a[1] + t * dir[1]];
                let vals = mono_val(xi(p));
                for mono in 0..10 {
                    m[(row, col(s_plus, mono))] = vals[mono];
                    m[(row, col(s_minus, mono))] = -vals[mono];
                }
                row += 1;
            }
            for t in [0.0, 0.5, 1.0] {
                let p = [a[0] + t * dir[0], a[1] + t * dir[1]];
                let grads = mono_grad(xi(p));
                for mono in 0..10 {
                    let dn = n[0] * grads[mono][0] + n[1] * grads[mono][1];
                    m[(row, col(s_plus, mono))] = dn;
                    m[(row, col(s_minus, mono))] = -dn;
                }
                row += 1;
            }
        }
        debug_assert_eq!(row, 21);

        // Vertex dofs: value and both gradient components of p_k, evaluated on
        // subtriangle T_k. Gradient rows carry the 1/scale chain factor so the
        // dofs are physical derivatives.
        for k in 0..3 {
            let vals = mono_val(xi(pts[k]));
            let grads = mono_grad(xi(pts[k]));
            for mono in 0..10 {
                m[(row, col(k, mono))] = vals[mono];
                m[(row + 1, col(k, mono))] = grads[mono][0] / scale;
                m[(row + 2, col(k, mono))] = grads[mono][1] / scale;
            }
            rhs[(row, 3 * k)] = 1.0;
            rhs[(row + 1, 3 * k + 1)] = 1.0;
            rhs[(row + 2, 3 * k + 2)] = 1.0;
            row += 3;
        }

        // Edge dofs: normal derivative at the midpoint of the edge opposite
        // vertex k, i.e. the outer edge of subtriangle T_{k+1}.
        for k in 0..3 {
            let a = pts[(k + 1) % 3];
            let b = pts[(k + 2) % 3];
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let n = edge_normals[k];
            let grads = mono_grad(xi(mid));
            for mono in 0..10 {
                m[(row, col((k + 1) % 3, mono))] =
                    (n[0] * grads[mono][0] + n[1] * grads[mono][1]) / scale;
            }
            rhs[(row, 9 + k)] = 1.0;
            row += 1;
        }
        debug_assert_eq!(row, 33);

        let sol = m.col_piv_qr().solve_lstsq(&rhs);
        let mut coef = Box::new([[[0.0; 10]; 12]; 3]);
        for s in 0..3 {
            for d in 0..12 {
                for mono in 0..10 {
                    coef[s][d][mono] = sol[(col(s, mono), d)];
                }
            }
        }
        HctBasis {
            pts,
            centroid,
            scale,
            coef,
        }
    }

    pub fn subtriangle(&self, s: usize) -> [Vec2; 3] {
        [self.pts[s], self.pts[(s + 1) % 3], self.centroid]
    }

    /// Subtriangle containing the point (ties resolve to the lowest index).
    pub fn sub_of(&self, p: Vec2) -> usize {
        let mut best = 0;
        let mut best_min = f64::NEG_INFINITY;
        for s in 0..3 {
            let [a, b, c] = self.subtriangle(s);
            let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            let la = ((b[0] - p[0]) * (c[1] - p[1]) - (b[1] - p[1]) * (c[0] - p[0])) / area2;
            let lb = ((c[0] - p[0]) * (a[1] - p[1]) - (c[1] - p[1]) * (a[0] - p[0])) / area2;
            let lc = 1.0 - la - lb;
            let min = la.min(lb).min(lc);
            if min >= -1e-12 {
                return s;
            }
            if min > best_min {
                best_min = min;
                best = s;
            }
        }
        best
    }

    /// Values, gradients, and Hessians (xx, xy, yy) of all 12 basis functions
    /// at a point inside subtriangle s.
    pub fn eval_sub(
        &self,
        s: usize,
        p: Vec2,
    ) -> ([f64; 12], [[f64; 2]; 12], [[f64; 3]; 12]) {
        let xi = [
            (p[0] - self.centroid[0]) / self.scale,
            (p[1] - self.centroid[1]) / self.scale,
        ];
        let mv = mono_val(xi);
        let mg = mono_grad(xi);
        let mh = mono_hess(xi);
        let mut vals = [0.0; 12];
        let mut grads = [[0.0; 2]; 12];
        let mut hess = [[0.0; 3]; 12];
        let inv_s = 1.0 / self.scale;
        let inv_s2 = inv_s * inv_s;
        for d in 0..12 {
            let c = &self.coef[s][d];
            let mut v = 0.0;
            let mut gx = 0.0;
            let mut gy = 0.0;
            let mut hxx = 0.0;
            let mut hxy = 0.0;
            let mut hyy = 0.0;
            for m in 0..10 {
                v += c[m] * mv[m];
                gx += c[m] * mg[m][0];
                gy += c[m] * mg[m][1];
                hxx += c[m] * mh[m][0];
                hxy += c[m] * mh[m][1];
                hyy += c[m] * mh[m][2];
            }
            vals[d] = v;
            grads[d] = [gx * inv_s, gy * inv_s];
            hess[d] = [hxx * inv_s2, hxy * inv_s2, hyy * inv_s2];
        }
        (vals, grads, hess)
    }

    pub fn eval(&self, p: Vec2) -> ([f64; 12], [[f64; 2]; 12], [[f64; 3]; 12]) {
        self.eval_sub(self.sub_of(p), p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis_for(pts: [Vec2; 3], globals: [usize; 3]) -> HctBasis {
        // Mimic the mesh convention: edge k is opposite vertex k; orient by
        // global indices of its endpoints.
        let mut normals = [[0.0; 2]; 3];
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let (lo, hi) = if globals[i] < globals[j] { (i, j) } else { (j, i) };
            normals[k] = edge_normal(pts[lo], pts[hi]);
        }
        HctBasis::new(pts, normals)
    }

    /// Interpolate an analytic function into local dofs.
    fn dofs_of(
        pts: [Vec2; 3],
        globals: [usize; 3],
        f: &dyn Fn(Vec2) -> (f64, [f64; 2]),
    ) -> [f64; 12] {
        let mut dofs = [0.0; 12];
        for k in 0..3 {
            let (v, g) = f(pts[k]);
            dofs[3 * k] = v;
            dofs[3 * k + 1] = g[0];
            dofs[3 * k + 2] = g[1];
        }
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let (lo, hi) = if globals[i] < globals[j] { (i, j) } else { (j, i) };
            let n = edge_normal(pts[lo], pts[hi]);
            let mid = [
                0.5 * (pts[i][0] + pts[j][0]),
                0.5 * (pts[i][1] + pts[j][1]),
            ];
            let (_, g) = f(mid);
            dofs[9 + k] = n[0] * g[0] + n[1] * g[1];
        }
        dofs
    }

    fn combine(
        basis: &HctBasis,
        dofs: &[f64; 12],
        p: Vec2,
    ) -> (f64, [f64; 2], [f64; 3]) {
        let (v, g, h) = basis.eval(p);
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        let mut hess = [0.0; 3];
        for d in 0..12 {
            val += dofs[d] * v[d];
            grad[0] += dofs[d] * g[d][0];
            grad[1] += dofs[d] * g[d][1];
            for c in 0..3 {
                hess[c] += dofs[d] * h[d][c];
            }
        }
        (val, grad, hess)
    }

    #[test]
    fn cubic_reproduction() {
        let pts = [[0.1, 0.2], [0.9, 0.15], [0.4, 0.95]];
        let basis = basis_for(pts, [7, 3, 11]);
        // f = x³ − 2x²y + xy² + y³ + x² + xy − y + 2, an arbitrary cubic.
        let f = |p: Vec2| -> (f64, [f64; 2]) {
            let (x, y) = (p[0], p[1]);
            (
                x * x * x - 2.0 * x * x * y + x * y * y + y * y * y + x * x + x * y - y + 2.0,
                [
                    3.0 * x * x - 4.0 * x * y + y * y + 2.0 * x + y,
                    -2.0 * x * x + 2.0 * x * y + 3.0 * y * y + x - 1.0,
                ],
            )
        };
        let dofs = dofs_of(pts, [7, 3, 11], &f);
        for &p in &[[0.3, 0.3], [0.5, 0.4], [0.45, 0.43], [0.12, 0.21], [0.6, 0.5]] {
            let (v, g, _) = combine(&basis, &dofs, p);
            let (fv, fg) = f(p);
            assert!((v - fv).abs() < 1e-12, "value at {:?}", p);
            assert!((g[0] - fg[0]).abs() < 1e-11 && (g[1] - fg[1]).abs() < 1e-11);
        }
    }

    #[test]
    fn hessian_of_x_squared() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let basis = basis_for(pts, [0, 1, 2]);
        let f = |p: Vec2| -> (f64, [f64; 2]) { (p[0] * p[0], [2.0 * p[0], 0.0]) };
        let dofs = dofs_of(pts, [0, 1, 2], &f);
        for &p in &[[0.2, 0.2], [0.1, 0.7], [0.55, 0.3]] {
            let (_, _, h) = combine(&basis, &dofs, p);
            assert!((h[0] - 2.0).abs() < 1e-10);
            assert!(h[1].abs() < 1e-10);
            assert!(h[2].abs() < 1e-10);
        }
    }

    #[test]
    fn c1_across_shared_edge() {
        // Two triangles sharing the edge between global vertices 1 and 2.
        let p0 = [0.0, 0.0];
        let p1 = [1.0, 0.1];
        let p2 = [0.4, 1.0];
        let p3 = [1.3, 1.1];
        let tri_a = basis_for([p0, p1, p2], [0, 1, 2]);
        let tri_b = basis_for([p1, p3, p2], [1, 3, 2]);

        // Shared dofs: vertex dofs at p1 (global 1), p2 (global 2), and the
        // normal dof on edge (1,2). Fill with pseudo-random values.
        let g = |v: usize, c: usize| ((v * 31 + c * 17 + 5) % 23) as f64 / 7.0 - 1.0;
        // tri_a local: verts (g0, g1, g2); edge k opposite vertex k:
        //   edge 0 = (g1, g2) shared, edge dof index 9.
        let mut dofs_a = [0.0; 12];
        let mut dofs_b = [0.0; 12];
        for (local, global) in [(0usize, 0usize), (1, 1), (2, 2)] {
            for c in 0..3 {
                dofs_a[3 * local + c] = g(global, c);
            }
        }
        for (local, global) in [(0usize, 1usize), (1, 3), (2, 2)] {
            for c in 0..3 {
                dofs_b[3 * local + c] = g(global, c);
            }
        }
        let shared = 0.613;
        dofs_a[9] = shared; // edge opposite local vertex 0 = (p1, p2)
        dofs_b[9 + 1] = shared; // edge opposite local vertex 1 = (p2, p1)
        dofs_a[10] = 0.2;
        dofs_a[11] = -0.4;
        dofs_b[9] = 0.7;
        dofs_b[11] = -0.1;

        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let p = [
                p1[0] + t * (p2[0] - p1[0]),
                p1[1] + t * (p2[1] - p1[1]),
            ];
            let (va, ga, _) = combine(&tri_a, &dofs_a, p);
            let (vb, gb, _) = combine(&tri_b, &dofs_b, p);
            assert!((va - vb).abs() < 1e-10, "value jump {} at t={}", va - vb, t);
            assert!(
                (ga[0] - gb[0]).abs() < 1e-10 && (ga[1] - gb[1]).abs() < 1e-10,
                "gradient jump at t={}: {:?} vs {:?}",
                t,
                ga,
                gb
            );
        }
    }

    #[test]
    fn partition_of_unity_on_values() {
        // Constant 1: vertex values 1, all derivatives 0.
        let pts = [[0.2, 0.1], [0.8, 0.3], [0.5, 0.9]];
        let basis = basis_for(pts, [4, 9, 2]);
        let mut dofs = [0.0; 12];
        dofs[0] = 1.0;
        dofs[3] = 1.0;
        dofs[6] = 1.0;
        for &p in &[[0.5, 0.4], [0.3, 0.25], [0.6, 0.6]] {
            let (v, g, h) = combine(&basis, &dofs, p);
            assert!((v - 1.0).abs() < 1e-12);
            assert!(g[0].abs() < 1e-11 && g[1].abs() < 1e-11);
            assert!(h.iter().all(|&x| x.abs() < 1e-10));
        }
    }
}
