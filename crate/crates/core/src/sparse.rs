//! Sparse matrices and linear solves: triplet assembly, CSR storage, a direct
//! sparse LU (via faer) with reusable factorization, and hand-rolled CG,
//! BiCGStab, and restarted GMRES. Zero-mean constraints enter as a single
//! Lagrange-multiplier border row/column.

use crate::error::{Error, Result};
use faer::prelude::*;
use faer::sparse::SparseColMat;

#[derive(Debug, Clone)]
pub struct Triplets {
    pub n_rows: usize,
    pub n_cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n_rows: usize, n_cols: usize) -> Triplets {
        Triplets {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    /// CSR with duplicate entries summed.
    pub fn to_csr(&self) -> Csr {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_unstable_by_key(|&k| (self.entries[k].0, self.entries[k].1));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (i, j, v) = self.entries[k];
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            vals,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        for i in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            out[i] = s;
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut map = std::collections::HashMap::new();
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                map.insert((i, self.col_idx[k]), self.vals[k]);
            }
        }
        let mut worst = 0.0f64;
        for (&(i, j), &v) in &map {
            let vt = map.get(&(j, i)).copied().unwrap_or(0.0);
            worst = worst.max((v - vt).abs());
        }
        worst
    }
}

/// Assembled linear system. `border` holds the c-vector of a single
/// zero-mean Lagrange multiplier: the solved system is [K c; cᵀ 0].
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: Triplets,
    pub rhs: Vec<f64>,
    pub symmetric: bool,
    pub border: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    Cg,
    BiCgStab,
    Gmres,
}

impl SparseSystem {
    /// Triplets of the (possibly bordered) square system actually solved.
    fn augmented(&self) -> (Triplets, Vec<f64>) {
        let n = self.matrix.n_rows;
        match &self.border {
            None => (self.matrix.clone(), self.rhs.clone()),
            Some(c) => {
                let mut t = Triplets::new(n + 1, n + 1);
                t.entries = self.matrix.entries.clone();
                for (i, &ci) in c.iter().enumerate() {
                    t.push(i, n, ci);
                    t.push(n, i, ci);
                }
                let mut rhs = self.rhs.clone();
                rhs.push(0.0);
                (t, rhs)
            }
        }
    }

    pub fn solve(&self, method: Method, tol: f64) -> Result<Vec<f64>> {
        if method == Method::Cg && (!self.symmetric || self.border.is_some()) {
            return Err(Error::Capability(
                "CG requires a symmetric unbordered system".into(),
            ));
        }
        let (aug, rhs) = self.augmented();
        let csr = aug.to_csr();
        let mut x = match method {
            Method::Direct => {
                let lu = factorize(&csr)?;
                lu_solve(&lu, &rhs)
            }
            Method::Cg => cg(&csr, &rhs, tol)?,
            Method::BiCgStab => bicgstab(&csr, &rhs, tol)?,
            Method::Gmres => gmres(&csr, &rhs, tol)?,
        };
        check_residual(&csr, &x, &rhs, tol, method)?;
        x.truncate(self.matrix.n_rows);
        Ok(x)
    }
}

fn check_residual(a: &Csr, x: &[f64], b: &[f64], tol: f64, method: Method) -> Result<()> {
    let mut ax = vec![0.0; b.len()];
    a.matvec(x, &mut ax);
    let rn: f64 = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rn > tol * bn.max(1e-300) && bn > 0.0 {
        return Err(Error::SolverFailure {
            what: format!("{:?}", method),
            residual: rn / bn,
        });
    }
    Ok(())
}

type Lu = faer::sparse::linalg::solvers::Lu<usize, f64>;

fn factorize(csr: &Csr) -> Result<Lu> {
    let mut trip = Vec::with_capacity(csr.vals.len());
    for i in 0..csr.n_rows {
        for k in csr.row_ptr[i]..csr.row_ptr[i + 1] {
            trip.push((i, csr.col_idx[k], csr.vals[k]));
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(csr.n_rows, csr.n_cols, &trip)
        .map_err(|e| Error::SolverFailure {
            what: format!("sparse matrix construction: {:?}", e),
            residual: f64::NAN,
        })?;
    mat.sp_lu().map_err(|e| Error::HTooCoarse(format!(
        "sparse LU factorization failed (singular system): {:?}",
        e
    )))
}

fn lu_solve(lu: &Lu, rhs: &[f64]) -> Vec<f64> {
    let b = faer::Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    (0..rhs.len()).map(|i| x[(i, 0)]).collect()
}

/// Factorized (possibly bordered) operator for repeated solves.
pub struct FactorizedOperator {
    n: usize,
    bordered: bool,
    csr: Csr,
    lu: Lu,
}

impl FactorizedOperator {
    pub fn new(matrix: &Triplets, border: Option<&[f64]>) -> Result<FactorizedOperator> {
        let n = matrix.n_rows;
        let (aug, bordered) = match border {
            None => (matrix.clone(), false),
            Some(c) => {
                let mut t = Triplets::new(n + 1, n + 1);
                t.entries = matrix.entries.clone();
                for (i, &ci) in c.iter().enumerate() {
                    t.push(i, n, ci);
                    t.push(n, i, ci);
                }
                (t, true)
            }
        };
        let csr = aug.to_csr();
        let lu = factorize(&csr)?;
        Ok(FactorizedOperator {
            n,
            bordered,
            csr,
            lu,
        })
    }

    /// Solves for a right-hand side of length n (border rhs entry is 0).
    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.n);
        let mut b = rhs.to_vec();
        if self.bordered {
            b.push(0.0);
        }
        let mut x = lu_solve(&self.lu, &b);
        check_residual(&self.csr, &x, &b, tol, Method::Direct)?;
        x.truncate(self.n);
        Ok(x)
    }
}

/// Rank-one-deficient operator (kernel = constants) factorized with the
/// first equation replaced by x₀ = 0, keeping the matrix fully sparse —
/// a dense Lagrange border row would destroy LU fill. Valid when the
/// left-kernel vector is nonzero at entry 0 and the right-hand side is
/// orthogonal to the left kernel; the caller restores its preferred
/// normalization afterwards.
pub struct PinnedOperator {
    n: usize,
    csr: Csr,
    lu: Lu,
}

impl PinnedOperator {
    pub fn new(matrix: &Triplets) -> Result<PinnedOperator> {
        let n = matrix.n_rows;
        let mut t = Triplets::new(n, n);
        t.entries = matrix
            .entries
            .iter()
            .filter(|(i, _, _)| *i != 0)
            .copied()
            .collect();
        t.push(0, 0, 1.0);
        let csr = t.to_csr();
        let lu = factorize(&csr)?;
        Ok(PinnedOperator { n, csr, lu })
    }

    /// Solves with the pinned value x₀ = 0 (rhs entry 0 is ignored).
    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.n);
        let mut b = rhs.to_vec();
        b[0] = 0.0;
        let x = lu_solve(&self.lu, &b);
        check_residual(&self.csr, &x, &b, tol, Method::Direct)?;
        Ok(x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cg(a: &Csr, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let bn = dot(b, b).sqrt();
    if bn == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for _ in 0..(20 * n + 200) {
        a.matvec(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bn {
            return Ok(x);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure {
        what: "CG".into(),
        residual: rr.sqrt() / bn,
    })
}

fn bicgstab(a: &Csr, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let bn = dot(b, b).sqrt();
    if bn == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for _ in 0..(20 * n + 200) {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        a.matvec(&p, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if dot(&s, &s).sqrt() <= tol * bn {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            return Ok(x);
        }
        a.matvec(&s, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if dot(&r, &r).sqrt() <= tol * bn {
            return Ok(x);
        }
    }
    let mut ax = vec![0.0; n];
    a.matvec(&x, &mut ax);
    let res: f64 = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    Err(Error::SolverFailure {
        what: "BiCGStab".into(),
        residual: res / bn,
    })
}

fn gmres(a: &Csr, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let bn = dot(b, b).sqrt();
    if bn == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let m = 80.min(n);
    let mut x = vec![0.0; n];
    for _restart in 0..200 {
        let mut r = vec![0.0; n];
        a.matvec(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = dot(&r, &r).sqrt();
        if beta <= tol * bn {
            return Ok(x);
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|t| t / beta).collect()];
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0f64; m], vec![0.0f64; m]);
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = vec![0.0; n];
            a.matvec(&v[k], &mut w);
            for i in 0..=k {
                h[i][k] = dot(&w, &v[i]);
                for j in 0..n {
                    w[j] -= h[i][k] * v[i][j];
                }
            }
            h[k + 1][k] = dot(&w, &w).sqrt();
            if h[k + 1][k] > 1e-300 {
                v.push(w.iter().map(|t| t / h[k + 1][k]).collect());
            } else {
                v.push(vec![0.0; n]);
            }
            // Apply stored Givens rotations, then create a new one.
            for i in 0..k {
                let tmp = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = tmp;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= tol * bn {
                break;
            }
        }
        // Back substitution.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * v[j][i];
            }
        }
        if g[k_used].abs() <= tol * bn {
            return Ok(x);
        }
    }
    Err(Error::SolverFailure {
        what: "GMRES".into(),
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> Triplets {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.0);
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
                t.push(i + 1, i, -1.0);
            }
        }
        t
    }

    #[test]
    fn identity_solve() {
        let mut t = Triplets::new(3, 3);
        for i in 0..3 {
            t.push(i, i, 1.0);
        }
        let sys = SparseSystem {
            matrix: t,
            rhs: vec![4.0, -1.0, 2.5],
            symmetric: true,
            border: None,
        };
        let x = sys.solve(Method::Direct, 1e-12).unwrap();
        assert_eq!(x, vec![4.0, -1.0, 2.5]);
    }

    #[test]
    fn poisson_3x3_hand_elimination() {
        let sys = SparseSystem {
            matrix: tridiag(3),
            rhs: vec![1.0, 1.0, 1.0],
            symmetric: true,
            border: None,
        };
        for method in [Method::Direct, Method::Cg, Method::BiCgStab, Method::Gmres] {
            let x = sys.solve(method, 1e-12).unwrap();
            assert!((x[0] - 1.5).abs() < 1e-10, "{:?}", method);
            assert!((x[1] - 2.0).abs() < 1e-10, "{:?}", method);
            assert!((x[2] - 1.5).abs() < 1e-10, "{:?}", method);
        }
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 0, 1.0);
        t.push(1, 1, 2.0);
        let csr = t.to_csr();
        assert_eq!(csr.vals, vec![2.0, 2.0]);
    }

    #[test]
    fn random_spd_direct_vs_cg() {
        // Deterministic congruential fill; SPD via AᵀA + n·I.
        let n = 50;
        let mut state = 12345u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut dense = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                dense[i][j] = rnd();
            }
        }
        let mut spd = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += dense[k][i] * dense[k][j];
                }
                spd[i][j] = s + if i == j { n as f64 } else { 0.0 };
            }
        }
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            for j in 0..n {
                t.push(i, j, spd[i][j]);
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let sys = SparseSystem {
            matrix: t,
            rhs,
            symmetric: true,
            border: None,
        };
        let xd = sys.solve(Method::Direct, 1e-10).unwrap();
        let xc = sys.solve(Method::Cg, 1e-12).unwrap();
        for i in 0..n {
            assert!((xd[i] - xc[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn bordered_system_zero_mean() {
        // Singular Laplacian-like matrix becomes solvable with a mean border.
        let n = 4;
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.0);
            t.push(i, (i + 1) % n, -1.0);
            t.push(i, (i + n - 1) % n, -1.0);
        }
        // Compatible rhs (sums to zero).
        let sys = SparseSystem {
            matrix: t,
            rhs: vec![1.0, -1.0, 1.0, -1.0],
            symmetric: true,
            border: Some(vec![1.0; n]),
        };
        let x = sys.solve(Method::Direct, 1e-10).unwrap();
        let mean: f64 = x.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-12);
        let x2 = sys.solve(Method::Gmres, 1e-12).unwrap();
        for i in 0..n {
            assert!((x[i] - x2[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn factorized_operator_reuse() {
        let t = tridiag(5);
        let f = FactorizedOperator::new(&t, None).unwrap();
        let x1 = f.solve(&[1.0, 0.0, 0.0, 0.0, 0.0], 1e-12).unwrap();
        let x2 = f.solve(&[0.0, 0.0, 0.0, 0.0, 1.0], 1e-12).unwrap();
        // Symmetric inverse: (e1, A⁻¹e5) = (e5, A⁻¹e1).
        assert!((x1[4] - x2[0]).abs() < 1e-12);
    }

    #[test]
    fn cg_rejects_nonsymmetric_flag() {
        let t = tridiag(3);
        let sys = SparseSystem {
            matrix: t,
            rhs: vec![1.0; 3],
            symmetric: false,
            border: None,
        };
        assert!(sys.solve(Method::Cg, 1e-10).is_err());
    }
}
