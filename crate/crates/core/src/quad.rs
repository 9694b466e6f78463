//! Quadrature rules on the reference triangle and adaptive 1D integration.
//!
//! Reference triangle: vertices (0,0), (1,0), (0,1), area 1/2. Weights sum to 1
//! and are applied as `weight * |T|` on a physical triangle.

/// Symmetric quadrature rule on the reference triangle.
///
/// Exact for polynomials up to `exact_degree`; all weights positive.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub exact_degree: usize,
    /// Points in reference coordinates (x, y).
    pub points: Vec<[f64; 2]>,
    /// Weights summing to 1.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Rule with the fewest points among the built-in ones that is exact
    /// for polynomials of the requested degree.
    pub fn for_degree(degree: usize) -> QuadratureRule {
        match degree {
            0 | 1 => Self::degree1(),
            2 => Self::degree2(),
            3 | 4 => Self::degree4(),
            _ => Self::degree6(),
        }
    }

    pub fn degree1() -> QuadratureRule {
        QuadratureRule {
            exact_degree: 1,
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![1.0],
        }
    }

    pub fn degree2() -> QuadratureRule {
        let a = 1.0 / 6.0;
        let b = 2.0 / 3.0;
        QuadratureRule {
            exact_degree: 2,
            points: vec![[a, a], [b, a], [a, b]],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    pub fn degree4() -> QuadratureRule {
        let a1 = 0.445948490915964886318712674181;
        let w1 = 0.223381589678011471811203136894;
        let a2 = 0.091576213509770743459571463402;
        let w2 = 0.109951743655321870773988734981;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (a, w) in [(a1, w1), (a2, w2)] {
            points.push([a, a]);
            points.push([1.0 - 2.0 * a, a]);
            points.push([a, 1.0 - 2.0 * a]);
            weights.extend_from_slice(&[w, w, w]);
        }
        QuadratureRule {
            exact_degree: 4,
            points,
            weights,
        }
    }

    pub fn degree6() -> QuadratureRule {
        let a1 = 0.249286745170910421291638553107;
        let w1 = 0.116786275726379366049533217197;
        let a2 = 0.063089014491502228340331602870;
        let w2 = 0.050844906370206816920936809108;
        let a3 = 0.310352451033784405416607733956;
        let b3 = 0.053145049844816947353249671631;
        let w3 = 0.082851075618373575193553456420;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (a, w) in [(a1, w1), (a2, w2)] {
            points.push([a, a]);
            points.push([1.0 - 2.0 * a, a]);
            points.push([a, 1.0 - 2.0 * a]);
            weights.extend_from_slice(&[w, w, w]);
        }
        let c3 = 1.0 - a3 - b3;
        for p in [
            [a3, b3],
            [b3, a3],
            [a3, c3],
            [c3, a3],
            [b3, c3],
            [c3, b3],
        ] {
            points.push(p);
            weights.push(w3);
        }
        QuadratureRule {
            exact_degree: 6,
            points,
            weights,
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        nodes[0] = 0.0;
        weights[0] = 2.0;
    }
    (nodes, weights)
}

/// Adaptive 1D integration over [a, b] with interval bisection.
///
/// Compares 10-point and 20-point Gauss estimates per interval; splits until
/// the local discrepancy is below the tolerance (scaled by interval share).
pub fn integrate_1d(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (n10, w10) = gauss_legendre(10);
    let (n20, w20) = gauss_legendre(20);
    let eval = |lo: f64, hi: f64, nodes: &[f64], weights: &[f64]| -> f64 {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut s = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            s += w * f(mid + half * x);
        }
        s * half
    };
    fn rec(
        eval: &dyn Fn(f64, f64, &[f64], &[f64]) -> f64,
        n10: &[f64],
        w10: &[f64],
        n20: &[f64],
        w20: &[f64],
        lo: f64,
        hi: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let coarse = eval(lo, hi, n10, w10);
        let fine = eval(lo, hi, n20, w20);
        if (fine - coarse).abs() <= tol || depth >= 40 {
            return fine;
        }
        let mid = 0.5 * (lo + hi);
        rec(eval, n10, w10, n20, w20, lo, mid, tol / 2.0, depth + 1)
            + rec(eval, n10, w10, n20, w20, mid, hi, tol / 2.0, depth + 1)
    }
    rec(&eval, &n10, &w10, &n20, &w20, a, b, tol, 0)
}

/// Adaptive 1D integration with a priori breakpoints (e.g. known kinks).
pub fn integrate_1d_split(f: &dyn Fn(f64) -> f64, breakpoints: &[f64], tol: f64) -> f64 {
    let mut total = 0.0;
    for w in breakpoints.windows(2) {
        total += integrate_1d(f, w[0], w[1], tol);
    }
    total
}
