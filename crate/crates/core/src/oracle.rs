//! Closed-form and quadrature-based reference quantities for the separable
//! benchmark coefficients: exact invariant measures, homogenized matrices,
//! corrector Hessians, and the exact macro solution used in manufactured
//! right-hand sides.

use std::sync::Arc;

use crate::coeff::{CellCoefficient, MacroCoefficient};
use crate::error::{Error, Result};
use crate::geom::{Mat2, Vec2};
use crate::quad::integrate_1d_split;

const QUAD_TOL: f64 = 1e-12;
/// Interior breakpoints for the adaptive 1D quadrature. The arcsin-kink
/// coefficient family has a derivative kink at t = 1/2; splitting there keeps
/// the adaptive rule at full accuracy for every builtin.
const BREAKS: [f64; 3] = [0.0, 0.5, 1.0];

/// Exact reference data for a separable cell coefficient.
pub struct SeparableOracle {
    pub m_exact: Arc<dyn Fn(Vec2) -> f64 + Send + Sync>,
    pub a0: Mat2,
    /// (i, j, k, l, y) ↦ exact z^{kl}_{ij}(y) = ∂²_{kl}χ_{ij}(y).
    pub corrector_hessian: Arc<dyn Fn(usize, usize, usize, usize, Vec2) -> f64 + Send + Sync>,
    /// (i, j, y₁) ↦ exact ∂₁χ_{ij}(y₁), defined for y₁-only coefficients.
    pub corrector_d1: Arc<dyn Fn(usize, usize, f64) -> f64 + Send + Sync>,
}

fn check_y1_only(a: &CellCoefficient) -> Result<()> {
    for k in 0..17usize {
        let y1 = k as f64 / 16.0;
        let base = a.a([y1, 0.0]);
        for l in 1..7usize {
            let m = a.a([y1, l as f64 / 7.0]);
            for r in 0..2 {
                for c in 0..2 {
                    if (m[r][c] - base[r][c]).abs() > 1e-12 {
                        return Err(Error::InvalidArgument(
                            "coefficient depends on y2; the y1-only oracle does not apply".into(),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Exact homogenization data for A = A(y₁):
/// m = C/a₁₁ with C = (∫ dt/a₁₁)⁻¹, a⁰₁₁ = C, a⁰ᵢⱼ = C ∫ aᵢⱼ/a₁₁ otherwise,
/// and correctors depending on y₁ alone, so the only nonzero Hessian entry is
/// ∂²₁₁χ_{ij} = (a⁰ᵢⱼ − aᵢⱼ)/a₁₁.
pub fn oracle_y1_only(a: &CellCoefficient) -> Result<SeparableOracle> {
    check_y1_only(a)?;
    let a11 = {
        let a = a.clone_eval();
        move |t: f64| a([t, 0.0])[0][0]
    };
    let c = 1.0 / integrate_1d_split(&|t| 1.0 / a11(t), &BREAKS, QUAD_TOL);
    let mut a0 = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let av = a.clone_eval();
            a0[i][j] = if i == 0 && j == 0 {
                c
            } else {
                c * integrate_1d_split(&|t| av([t, 0.0])[i][j] / av([t, 0.0])[0][0], &BREAKS, QUAD_TOL)
            };
        }
    }
    let m = {
        let a11 = a11.clone();
        move |y: Vec2| c / a11(y[0])
    };
    let hess = {
        let av = a.clone_eval();
        move |i: usize, j: usize, k: usize, l: usize, y: Vec2| {
            if k == 0 && l == 0 {
                let m = av([y[0], 0.0]);
                (a0[i][j] - m[i][j]) / m[0][0]
            } else {
                0.0
            }
        }
    };
    // ∂₁χ(y₁) = ∫₀^{y₁} (a⁰ᵢⱼ − aᵢⱼ)/a₁₁ dt + const, the constant fixed by
    // periodicity of χ (zero mean of ∂₁χ). Tabulated once by the trapezoid
    // rule on a grid fine enough for the 1e-9-level accuracy the tests need.
    let d1 = {
        let av = a.clone_eval();
        let n = 400_000usize;
        let mut tables: Vec<Vec<f64>> = Vec::with_capacity(3);
        for &(i, j) in &[(0usize, 0usize), (0, 1), (1, 1)] {
            let g = |t: f64| {
                let m = av([t, 0.0]);
                (a0[i][j] - m[i][j]) / m[0][0]
            };
            let h = 1.0 / n as f64;
            let mut cum = Vec::with_capacity(n + 1);
            let mut s = 0.0;
            cum.push(0.0);
            let mut prev = g(0.0);
            for k in 1..=n {
                let cur = g(k as f64 * h);
                s += 0.5 * h * (prev + cur);
                cum.push(s);
                prev = cur;
            }
            let mean = cum.iter().sum::<f64>() / cum.len() as f64;
            for v in cum.iter_mut() {
                *v -= mean;
            }
            tables.push(cum);
        }
        move |i: usize, j: usize, t: f64| {
            let idx = match (i.min(j), i.max(j)) {
                (0, 0) => 0,
                (0, 1) => 1,
                _ => 2,
            };
            let tab = &tables[idx];
            let n = tab.len() - 1;
            let s = (t - t.floor()) * n as f64;
            let k = (s.floor() as usize).min(n - 1);
            let w = s - k as f64;
            tab[k] * (1.0 - w) + tab[k + 1] * w
        }
    };
    Ok(SeparableOracle {
        m_exact: Arc::new(m),
        a0,
        corrector_hessian: Arc::new(hess),
        corrector_d1: Arc::new(d1),
    })
}

fn check_diag_product(a: &MacroCoefficient, x: Vec2) -> Result<()> {
    for k in 0..9usize {
        for l in 0..9usize {
            let y = [k as f64 / 8.0, l as f64 / 8.0];
            let m = a.a(x, y);
            let d11 = m[0][0] - a.a(x, [y[0], 0.3])[0][0];
            let d22 = m[1][1] - a.a(x, [0.7, y[1]])[1][1];
            if m[0][1].abs() > 1e-12 || m[1][0].abs() > 1e-12 || d11.abs() > 1e-12 || d22.abs() > 1e-12
            {
                return Err(Error::InvalidArgument(
                    "coefficient is not diag(a11(x,y1), a22(x,y2)); the product oracle does not apply"
                        .into(),
                ));
            }
        }
    }
    Ok(())
}

/// Exact homogenization data at a frozen macro point x for
/// A(x,y) = diag(a₁₁(x,y₁), a₂₂(x,y₂)): harmonic-mean diagonal a⁰ᵢᵢ(x),
/// product-form measure, and corrector Hessians
/// ∂²ᵢᵢχᵢᵢ = (a⁰ᵢᵢ − aᵢᵢ)/aᵢᵢ (all other entries zero).
pub fn oracle_diag_product(a: &MacroCoefficient, x: Vec2) -> Result<SeparableOracle> {
    check_diag_product(a, x)?;
    let a11 = {
        let a = a.clone_eval();
        move |t: f64| a(x, [t, 0.0])[0][0]
    };
    let a22 = {
        let a = a.clone_eval();
        move |t: f64| a(x, [0.0, t])[1][1]
    };
    let c1 = 1.0 / integrate_1d_split(&|t| 1.0 / a11(t), &BREAKS, QUAD_TOL);
    let c2 = 1.0 / integrate_1d_split(&|t| 1.0 / a22(t), &BREAKS, QUAD_TOL);
    let a0 = [[c1, 0.0], [0.0, c2]];
    let m = {
        let (a11, a22) = (a11.clone(), a22.clone());
        move |y: Vec2| c1 * c2 / (a11(y[0]) * a22(y[1]))
    };
    let hess = move |i: usize, j: usize, k: usize, l: usize, y: Vec2| {
        if i == j && k == i && l == i {
            let aii = if i == 0 { a11(y[0]) } else { a22(y[1]) };
            (a0[i][i] - aii) / aii
        } else {
            0.0
        }
    };
    Ok(SeparableOracle {
        m_exact: Arc::new(m),
        a0,
        corrector_hessian: Arc::new(hess),
        corrector_d1: Arc::new(|_, _, _| f64::NAN),
    })
}

/// The exact macro solution u₀(x) = ½x₁(x₁−1)x₂(x₂−1) with all partial
/// derivatives through fourth order, plus the matching right-hand side
/// f = A⁰:D²u₀ for a given (possibly x-dependent) homogenized matrix.
pub struct KnownU0;

impl KnownU0 {
    pub fn value(x: Vec2) -> f64 {
        0.5 * x[0] * (x[0] - 1.0) * x[1] * (x[1] - 1.0)
    }

    pub fn gradient(x: Vec2) -> Vec2 {
        [
            0.5 * (2.0 * x[0] - 1.0) * x[1] * (x[1] - 1.0),
            0.5 * x[0] * (x[0] - 1.0) * (2.0 * x[1] - 1.0),
        ]
    }

    /// (∂²₁₁, ∂²₁₂, ∂²₂₂).
    pub fn hessian(x: Vec2) -> [f64; 3] {
        [
            x[1] * (x[1] - 1.0),
            0.5 * (2.0 * x[0] - 1.0) * (2.0 * x[1] - 1.0),
            x[0] * (x[0] - 1.0),
        ]
    }

    /// ∂³ indexed by the number of x₁ derivatives (3, 2, 1, 0).
    pub fn third(x: Vec2) -> [f64; 4] {
        [
            0.0,
            2.0 * x[1] - 1.0,
            2.0 * x[0] - 1.0,
            0.0,
        ]
    }

    /// ∂⁴ indexed by the number of x₁ derivatives (4, 3, 2, 1, 0).
    pub fn fourth(_x: Vec2) -> [f64; 5] {
        [0.0, 0.0, 2.0, 0.0, 0.0]
    }

    /// f(x) = A⁰(x):D²u₀(x).
    pub fn rhs(a0: impl Fn(Vec2) -> Mat2 + Sync + Send + 'static) -> impl Fn(Vec2) -> f64 + Sync + Send {
        move |x: Vec2| {
            let m = a0(x);
            let h = KnownU0::hessian(x);
            m[0][0] * h[0] + (m[0][1] + m[1][0]) * h[1] + m[1][1] * h[2]
        }
    }
}
