//! Coefficient fields: symmetric 2x2 matrix A on the unit cell (and optionally
//! a macro variable), row-wise divergence, ellipticity bounds, and the Cordes
//! quantities. Benchmark coefficients ship as builtins with analytic
//! derivatives; user-defined fields are parsed expressions with
//! finite-difference divergences.

use crate::error::{Error, Result};
use crate::expr::{self, Var};
use crate::geom::{Mat2, Vec2, ZERO_MAT, ZERO_VEC};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    /// A in W^{1,q}: divergence available, no higher derivatives.
    W1q,
    /// A in W^{2,inf}: first and second matrix derivatives available.
    W2inf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    Analytic,
    FiniteDifference,
}

type MatFn = Arc<dyn Fn(Vec2) -> Mat2 + Send + Sync>;
type VecFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
type DirMatFn = Arc<dyn Fn(Vec2, usize) -> Mat2 + Send + Sync>;
type DirVecFn = Arc<dyn Fn(Vec2, usize) -> Vec2 + Send + Sync>;
type Dir2MatFn = Arc<dyn Fn(Vec2, usize, usize) -> Mat2 + Send + Sync>;
type Dir2VecFn = Arc<dyn Fn(Vec2, usize, usize) -> Vec2 + Send + Sync>;

/// Matrix derivatives needed by the corrector-derivative lift.
#[derive(Clone)]
pub struct CoeffDerivs {
    /// d_a(y, r) = ∂A/∂y_r (r is 0-based).
    pub d_a: DirMatFn,
    /// Row-wise divergence of ∂A/∂y_r.
    pub div_d_a: DirVecFn,
    /// d2_a(y, r, s) = ∂²A/∂y_r∂y_s.
    pub d2_a: Dir2MatFn,
    /// Row-wise divergence of ∂²A/∂y_r∂y_s.
    pub div_d2_a: Dir2VecFn,
}

/// Y-periodic symmetric coefficient A(y) on the unit cell.
#[derive(Clone)]
pub struct CellCoefficient {
    pub name: String,
    eval: MatFn,
    div_eval: VecFn,
    pub lambda: f64,
    pub big_lambda: f64,
    pub smoothness: Smoothness,
    pub divergence_kind: DivergenceKind,
    /// True when lambda/big_lambda were estimated by sampling.
    pub bounds_estimated: bool,
    pub derivs: Option<CoeffDerivs>,
}

impl CellCoefficient {
    /// Shared handle to the raw evaluator, for oracles whose closures must
    /// outlive `self`.
    pub fn clone_eval(&self) -> MatFn {
        self.eval.clone()
    }

    pub fn clone_div_eval(&self) -> VecFn {
        self.div_eval.clone()
    }

    pub fn a(&self, y: Vec2) -> Mat2 {
        (self.eval)(y)
    }

    pub fn div_a(&self, y: Vec2) -> Vec2 {
        (self.div_eval)(y)
    }

    pub fn derivs(&self) -> Result<&CoeffDerivs> {
        self.derivs.as_ref().ok_or_else(|| {
            Error::Capability(format!(
                "coefficient {:?} does not supply second derivatives",
                self.name
            ))
        })
    }

    /// Sampled symmetry / ellipticity / periodicity checks; cheap enough to
    /// run in tests and on user-supplied fields at load time.
    pub fn validate(&self) -> Result<()> {
        let n = 101;
        let mut rng_state = 0x2545F4914F6CDD1Du64;
        let mut xi = Vec::new();
        for _ in 0..8 {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            let t = (rng_state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 * PI;
            xi.push([t.cos(), t.sin()]);
        }
        for i in 0..n {
            for j in 0..n {
                let y = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
                let a = self.a(y);
                if (a[0][1] - a[1][0]).abs() > 1e-14 {
                    return Err(Error::InvalidArgument(format!(
                        "coefficient not symmetric at ({}, {})",
                        y[0], y[1]
                    )));
                }
                for x in &xi {
                    let q = a[0][0] * x[0] * x[0] + 2.0 * a[0][1] * x[0] * x[1]
                        + a[1][1] * x[1] * x[1];
                    if q < self.lambda - 1e-10 || q > self.big_lambda + 1e-10 {
                        return Err(Error::Ellipticity(format!(
                            "A xi.xi = {} outside [{}, {}] at ({}, {})",
                            q, self.lambda, self.big_lambda, y[0], y[1]
                        )));
                    }
                }
            }
        }
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            for (p, q) in [([t, 0.0], [t, 1.0]), ([0.0, t], [1.0, t])] {
                let (a, b) = (self.a(p), self.a(q));
                for r in 0..2 {
                    for c in 0..2 {
                        if (a[r][c] - b[r][c]).abs() > 1e-12 {
                            return Err(Error::PeriodicityMismatch(format!(
                                "coefficient entry ({}, {}) not periodic at t = {}",
                                r, c, t
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Coefficient A(x, y) of the nonuniform problem; Y-periodic in y for each x.
#[derive(Clone)]
pub struct MacroCoefficient {
    pub name: String,
    eval: Arc<dyn Fn(Vec2, Vec2) -> Mat2 + Send + Sync>,
    div_y_eval: Arc<dyn Fn(Vec2, Vec2) -> Vec2 + Send + Sync>,
    pub lambda: f64,
    pub big_lambda: f64,
    pub divergence_kind: DivergenceKind,
    pub bounds_estimated: bool,
    freeze_hook: Option<Arc<dyn Fn(Vec2) -> CellCoefficient + Send + Sync>>,
}

impl MacroCoefficient {
    /// Lifts an x-independent cell coefficient into the macro interface.
    pub fn from_cell(a: &CellCoefficient) -> MacroCoefficient {
        let ev = a.clone_eval();
        let dv = a.clone_div_eval();
        let frozen = {
            let (ev, dv) = (ev.clone(), dv.clone());
            let (name, lambda, big_lambda) = (a.name.clone(), a.lambda, a.big_lambda);
            let (smoothness, divergence_kind, bounds_estimated) =
                (a.smoothness, a.divergence_kind, a.bounds_estimated);
            let derivs = a.derivs.clone();
            move |_x: Vec2| CellCoefficient {
                name: name.clone(),
                eval: ev.clone(),
                div_eval: dv.clone(),
                lambda,
                big_lambda,
                smoothness,
                divergence_kind,
                bounds_estimated,
                derivs: derivs.clone(),
            }
        };
        MacroCoefficient {
            name: a.name.clone(),
            eval: {
                let ev = ev.clone();
                Arc::new(move |_x, y| ev(y))
            },
            div_y_eval: Arc::new(move |_x, y| dv(y)),
            lambda: a.lambda,
            big_lambda: a.big_lambda,
            divergence_kind: a.divergence_kind,
            bounds_estimated: a.bounds_estimated,
            freeze_hook: Some(Arc::new(frozen)),
        }
    }

    pub fn clone_eval(&self) -> Arc<dyn Fn(Vec2, Vec2) -> Mat2 + Send + Sync> {
        self.eval.clone()
    }

    pub fn a(&self, x: Vec2, y: Vec2) -> Mat2 {
        (self.eval)(x, y)
    }

    pub fn div_y(&self, x: Vec2, y: Vec2) -> Vec2 {
        (self.div_y_eval)(x, y)
    }

    /// Cell coefficient with x frozen; analytic derivatives when the builtin
    /// provides them.
    pub fn freeze(&self, x: Vec2) -> CellCoefficient {
        if let Some(hook) = &self.freeze_hook {
            return hook(x);
        }
        let eval = self.eval.clone();
        let div = self.div_y_eval.clone();
        CellCoefficient {
            name: format!("{}@({:.6},{:.6})", self.name, x[0], x[1]),
            eval: Arc::new(move |y| eval(x, y)),
            div_eval: Arc::new(move |y| div(x, y)),
            lambda: self.lambda,
            big_lambda: self.big_lambda,
            smoothness: Smoothness::W1q,
            divergence_kind: self.divergence_kind,
            bounds_estimated: self.bounds_estimated,
            derivs: None,
        }
    }
}

pub enum Coefficient {
    Cell(CellCoefficient),
    Macro(MacroCoefficient),
}

impl Coefficient {
    pub fn into_cell(self) -> Result<CellCoefficient> {
        match self {
            Coefficient::Cell(c) => Ok(c),
            Coefficient::Macro(m) => Err(Error::Capability(format!(
                "{:?} depends on the macro variable; freeze it at a point first",
                m.name
            ))),
        }
    }

    pub fn into_macro(self) -> Result<MacroCoefficient> {
        match self {
            Coefficient::Macro(m) => Ok(m),
            Coefficient::Cell(c) => Err(Error::Capability(format!(
                "{:?} is a cell-only coefficient",
                c.name
            ))),
        }
    }
}

/// Cordes quantities sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct CordesReport {
    /// Largest δ' in (0, 1] with |A|²/(trA)² ≤ 1/(1+δ') at every sample.
    pub delta: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub sample_resolution: usize,
}

/// Cordes check over an arbitrary matrix field sampled on [0,1]².
pub fn cordes_check_fn(
    eval: &dyn Fn(Vec2) -> Mat2,
    sample_n: usize,
) -> Result<CordesReport> {
    let n = sample_n.max(2);
    let mut worst_ratio = 0.0f64;
    let mut gamma_min = f64::INFINITY;
    let mut gamma_max = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let y = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
            let a = eval(y);
            let tr = a[0][0] + a[1][1];
            if tr <= 0.0 {
                return Err(Error::Ellipticity(format!(
                    "trace {} ≤ 0 at ({}, {})",
                    tr, y[0], y[1]
                )));
            }
            let frob2 = a[0][0] * a[0][0]
                + a[0][1] * a[0][1]
                + a[1][0] * a[1][0]
                + a[1][1] * a[1][1];
            worst_ratio = worst_ratio.max(frob2 / (tr * tr));
            let gamma = tr / frob2;
            gamma_min = gamma_min.min(gamma);
            gamma_max = gamma_max.max(gamma);
        }
    }
    let delta = (1.0 / worst_ratio - 1.0).clamp(f64::MIN_POSITIVE, 1.0);
    Ok(CordesReport {
        delta,
        gamma_min,
        gamma_max,
        sample_resolution: n,
    })
}

pub fn cordes_check(field: &CellCoefficient, sample_n: usize) -> Result<CordesReport> {
    cordes_check_fn(&|y| field.a(y), sample_n)
}

/// γ(y) = trA/|A|², the least-squares scaling weight.
pub fn gamma(a: Mat2) -> f64 {
    let tr = a[0][0] + a[1][1];
    let frob2 =
        a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1];
    tr / frob2
}

// ---------------------------------------------------------------------------
// Builtins
// ---------------------------------------------------------------------------

/// Looks up a builtin coefficient. Parameterized names take literal float
/// arguments, e.g. `constant_spd(2,3)` or `sep_diag(2)`.
pub fn builtin(name: &str) -> Result<Coefficient> {
    let (base, args) = split_name(name)?;
    match (base, args.as_slice()) {
        ("identity", []) => Ok(Coefficient::Cell(constant_matrix(
            "identity",
            [[1.0, 0.0], [0.0, 1.0]],
        ))),
        ("constant_spd", [d1, d2]) => {
            if *d1 <= 0.0 || *d2 <= 0.0 {
                return Err(Error::InvalidArgument(
                    "constant_spd needs positive diagonal entries".into(),
                ));
            }
            Ok(Coefficient::Cell(constant_matrix(
                name,
                [[*d1, 0.0], [0.0, *d2]],
            )))
        }
        ("sep_diag", [a]) => Ok(Coefficient::Cell(sep_diag(*a)?)),
        ("arcsin_kink", []) => Ok(Coefficient::Cell(arcsin_kink())),
        ("xdep_diag", []) => Ok(Coefficient::Macro(xdep_diag())),
        _ => Err(Error::Lookup(format!("unknown builtin {:?}", name))),
    }
}

fn split_name(name: &str) -> Result<(&str, Vec<f64>)> {
    let name = name.trim();
    match name.find('(') {
        None => Ok((name, Vec::new())),
        Some(p) => {
            let base = &name[..p];
            let rest = name[p + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::Lookup(format!("missing ')' in {:?}", name)))?;
            let args = rest
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Lookup(format!("bad argument {:?} in {:?}", s, name)))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((base, args))
        }
    }
}

/// Constant symmetric matrix; all derivatives vanish.
pub fn constant_matrix(name: &str, m: Mat2) -> CellCoefficient {
    let eigs = crate::geom::sym_eigenvalues(m);
    CellCoefficient {
        name: name.to_string(),
        eval: Arc::new(move |_| m),
        div_eval: Arc::new(|_| ZERO_VEC),
        lambda: eigs[0],
        big_lambda: eigs[1],
        smoothness: Smoothness::W2inf,
        divergence_kind: DivergenceKind::Analytic,
        bounds_estimated: false,
        derivs: Some(CoeffDerivs {
            d_a: Arc::new(|_, _| ZERO_MAT),
            div_d_a: Arc::new(|_, _| ZERO_VEC),
            d2_a: Arc::new(|_, _, _| ZERO_MAT),
            div_d2_a: Arc::new(|_, _, _| ZERO_VEC),
        }),
    }
}

/// diag(a + sin²(πy₁), 1) — smooth separable benchmark with the closed-form
/// homogenized entry a⁰₁₁ = √(a(a+1)).
fn sep_diag(a: f64) -> Result<CellCoefficient> {
    if a <= 0.0 {
        return Err(Error::InvalidArgument("sep_diag needs a > 0".into()));
    }
    let f = move |t: f64| a + (PI * t).sin().powi(2);
    let f1 = |t: f64| PI * (2.0 * PI * t).sin();
    let f2 = |t: f64| 2.0 * PI * PI * (2.0 * PI * t).cos();
    let f3 = |t: f64| -4.0 * PI * PI * PI * (2.0 * PI * t).sin();
    Ok(CellCoefficient {
        name: format!("sep_diag({})", a),
        eval: Arc::new(move |y| [[f(y[0]), 0.0], [0.0, 1.0]]),
        div_eval: Arc::new(move |y| [f1(y[0]), 0.0]),
        lambda: a.min(1.0),
        big_lambda: (a + 1.0).max(1.0),
        smoothness: Smoothness::W2inf,
        divergence_kind: DivergenceKind::Analytic,
        bounds_estimated: false,
        derivs: Some(CoeffDerivs {
            d_a: Arc::new(move |y, r| {
                if r == 0 {
                    [[f1(y[0]), 0.0], [0.0, 0.0]]
                } else {
                    ZERO_MAT
                }
            }),
            div_d_a: Arc::new(move |y, r| if r == 0 { [f2(y[0]), 0.0] } else { ZERO_VEC }),
            d2_a: Arc::new(move |y, r, s| {
                if r == 0 && s == 0 {
                    [[f2(y[0]), 0.0], [0.0, 0.0]]
                } else {
                    ZERO_MAT
                }
            }),
            div_d2_a: Arc::new(move |y, r, s| {
                if r == 0 && s == 0 {
                    [f3(y[0]), 0.0]
                } else {
                    ZERO_VEC
                }
            }),
        }),
    })
}

/// Derivatives of arcsin(sin²(πt)) in the stabilized closed form.
///
/// The naive chain rule π sin(2πt)/√(1−sin⁴(πt)) is 0/0 at t = 1/2; the forms
/// below stay finite (the first derivative has a jump there, value taken 0).
pub mod arcsin_sin2 {
    use std::f64::consts::PI;

    pub fn val(t: f64) -> f64 {
        (PI * t).sin().powi(2).asin()
    }

    pub fn d1(t: f64) -> f64 {
        let s = (PI * t).sin();
        let c = (PI * t).cos();
        if c == 0.0 {
            return 0.0;
        }
        2.0 * PI * s * c.signum() / (1.0 + s * s).sqrt()
    }

    pub fn d2(t: f64) -> f64 {
        let s = (PI * t).sin();
        let c = (PI * t).cos();
        2.0 * PI * PI * c.abs() / (1.0 + s * s).powf(1.5)
    }

    pub fn d3(t: f64) -> f64 {
        let s = (PI * t).sin();
        let c = (PI * t).cos();
        if c == 0.0 {
            return 0.0;
        }
        -2.0 * PI.powi(3) * c.signum() * s * ((1.0 + s * s) + 3.0 * c * c)
            / (1.0 + s * s).powf(2.5)
    }
}

/// Nonsmooth y₁-only benchmark with closed-form homogenized limit:
/// a₁₁ = 1 + arcsin(sin²(πy₁)), a₁₂ = sin(πy₁)cos(πy₁), a₂₂ = 2 + cos²(πy₁).
/// a₁₁ has a gradient kink at y₁ = 1/2, so A ∈ W¹,∞ \ W²,∞.
fn arcsin_kink() -> CellCoefficient {
    use arcsin_sin2 as f;
    let a11 = |t: f64| 1.0 + f::val(t);
    let a12 = |t: f64| 0.5 * (2.0 * PI * t).sin();
    let a22 = |t: f64| 2.5 + 0.5 * (2.0 * PI * t).cos();
    let a12_1 = |t: f64| PI * (2.0 * PI * t).cos();
    let a12_2 = |t: f64| -2.0 * PI * PI * (2.0 * PI * t).sin();
    let a12_3 = |t: f64| -4.0 * PI.powi(3) * (2.0 * PI * t).cos();
    let a22_1 = |t: f64| -PI * (2.0 * PI * t).sin();
    let a22_2 = |t: f64| -2.0 * PI * PI * (2.0 * PI * t).cos();
    let _a22_3 = |t: f64| 4.0 * PI.powi(3) * (2.0 * PI * t).sin();
    CellCoefficient {
        name: "arcsin_kink".into(),
        eval: Arc::new(move |y| {
            let t = y[0];
            [[a11(t), a12(t)], [a12(t), a22(t)]]
        }),
        div_eval: Arc::new(move |y| [f::d1(y[0]), a12_1(y[0])]),
        lambda: 0.7,
        big_lambda: 3.6,
        smoothness: Smoothness::W2inf,
        divergence_kind: DivergenceKind::Analytic,
        bounds_estimated: false,
        derivs: Some(CoeffDerivs {
            d_a: Arc::new(move |y, r| {
                if r == 0 {
                    let t = y[0];
                    [[f::d1(t), a12_1(t)], [a12_1(t), a22_1(t)]]
                } else {
                    ZERO_MAT
                }
            }),
            div_d_a: Arc::new(move |y, r| {
                if r == 0 {
                    [f::d2(y[0]), a12_2(y[0])]
                } else {
                    ZERO_VEC
                }
            }),
            d2_a: Arc::new(move |y, r, s| {
                if r == 0 && s == 0 {
                    let t = y[0];
                    [[f::d2(t), a12_2(t)], [a12_2(t), a22_2(t)]]
                } else {
                    ZERO_MAT
                }
            }),
            div_d2_a: Arc::new(move |y, r, s| {
                if r == 0 && s == 0 {
                    [f::d3(y[0]), a12_3(y[0])]
                } else {
                    ZERO_VEC
                }
            }),
        }),
    }
}

/// The nonuniform benchmark:
/// a₁₁ = e^{x₁x₂} + ¼|x|² arcsin(sin²(πy₁)), a₂₂ = 2 + x₂cos(2πy₂ + x₁), a₁₂ = 0.
fn xdep_diag() -> MacroCoefficient {
    use arcsin_sin2 as f;
    let a11 = |x: Vec2, y1: f64| {
        (x[0] * x[1]).exp() + 0.25 * (x[0] * x[0] + x[1] * x[1]) * f::val(y1)
    };
    let a22 = |x: Vec2, y2: f64| 2.0 + x[1] * (2.0 * PI * y2 + x[0]).cos();
    let freeze = move |x: Vec2| -> CellCoefficient {
        let c11 = 0.25 * (x[0] * x[0] + x[1] * x[1]);
        let e11 = (x[0] * x[1]).exp();
        let phase = x[0];
        let amp = x[1];
        let b22 = move |t: f64| 2.0 + amp * (2.0 * PI * t + phase).cos();
        let b22_1 = move |t: f64| -2.0 * PI * amp * (2.0 * PI * t + phase).sin();
        let b22_2 = move |t: f64| -4.0 * PI * PI * amp * (2.0 * PI * t + phase).cos();
        let b22_3 = move |t: f64| 8.0 * PI.powi(3) * amp * (2.0 * PI * t + phase).sin();
        CellCoefficient {
            name: format!("xdep_diag@({:.6},{:.6})", x[0], x[1]),
            eval: Arc::new(move |y| [[e11 + c11 * f::val(y[0]), 0.0], [0.0, b22(y[1])]]),
            div_eval: Arc::new(move |y| [c11 * f::d1(y[0]), b22_1(y[1])]),
            lambda: 0.99,
            big_lambda: 3.8,
            smoothness: Smoothness::W2inf,
            divergence_kind: DivergenceKind::Analytic,
            bounds_estimated: false,
            derivs: Some(CoeffDerivs {
                d_a: Arc::new(move |y, r| match r {
                    0 => [[c11 * f::d1(y[0]), 0.0], [0.0, 0.0]],
                    _ => [[0.0, 0.0], [0.0, b22_1(y[1])]],
                }),
                div_d_a: Arc::new(move |y, r| match r {
                    0 => [c11 * f::d2(y[0]), 0.0],
                    _ => [0.0, b22_2(y[1])],
                }),
                d2_a: Arc::new(move |y, r, s| match (r, s) {
                    (0, 0) => [[c11 * f::d2(y[0]), 0.0], [0.0, 0.0]],
                    (1, 1) => [[0.0, 0.0], [0.0, b22_2(y[1])]],
                    _ => ZERO_MAT,
                }),
                div_d2_a: Arc::new(move |y, r, s| match (r, s) {
                    (0, 0) => [c11 * f::d3(y[0]), 0.0],
                    (1, 1) => [0.0, b22_3(y[1])],
                    _ => ZERO_VEC,
                }),
            }),
        }
    };
    MacroCoefficient {
        name: "xdep_diag".into(),
        eval: Arc::new(move |x, y| [[a11(x, y[0]), 0.0], [0.0, a22(x, y[1])]]),
        div_y_eval: Arc::new(move |x, y| {
            [
                0.25 * (x[0] * x[0] + x[1] * x[1]) * f::d1(y[0]),
                -2.0 * PI * x[1] * (2.0 * PI * y[1] + x[0]).sin(),
            ]
        }),
        lambda: 0.99,
        big_lambda: 3.8,
        divergence_kind: DivergenceKind::Analytic,
        bounds_estimated: false,
        freeze_hook: Some(Arc::new(freeze)),
    }
}

// ---------------------------------------------------------------------------
// Parsed expression fields
// ---------------------------------------------------------------------------

/// Builds a coefficient from expression strings for a11, a12, a22 (a21 := a12).
///
/// The divergence is a central finite difference with step 1e-6; ellipticity
/// bounds are sampled with a 10% margin and flagged as estimates. Returns a
/// macro coefficient when any expression references x1 or x2.
pub fn parse_expression_field(a11: &str, a12: &str, a22: &str) -> Result<Coefficient> {
    let e11 = expr::parse(a11)?;
    let e12 = expr::parse(a12)?;
    let e22 = expr::parse(a22)?;
    let uses_x = [&e11, &e12, &e22]
        .iter()
        .any(|e| e.uses(Var::X1) || e.uses(Var::X2));
    let name = format!("expr[{}; {}; {}]", a11, a12, a22);
    let mat = move |x: Vec2, y: Vec2| -> Mat2 {
        let v11 = e11.eval(x, y);
        let v12 = e12.eval(x, y);
        let v22 = e22.eval(x, y);
        [[v11, v12], [v12, v22]]
    };
    let mat = Arc::new(mat);
    const H: f64 = 1e-6;
    let m = mat.clone();
    let div_y = Arc::new(move |x: Vec2, y: Vec2| -> Vec2 {
        let mut out = [0.0; 2];
        for row in 0..2 {
            for j in 0..2 {
                let mut yp = y;
                let mut ym = y;
                yp[j] += H;
                ym[j] -= H;
                out[row] += (m(x, yp)[row][j] - m(x, ym)[row][j]) / (2.0 * H);
            }
        }
        out
    });

    // Sampled ellipticity bounds with safety margin.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let xs: &[f64] = if uses_x { &[0.0, 0.25, 0.5, 0.75, 1.0] } else { &[0.0] };
    for &x1 in xs {
        for &x2 in xs {
            for i in 0..101 {
                for j in 0..101 {
                    let y = [i as f64 / 100.0, j as f64 / 100.0];
                    let a = mat([x1, x2], y);
                    let eigs = crate::geom::sym_eigenvalues(a);
                    lo = lo.min(eigs[0]);
                    hi = hi.max(eigs[1]);
                }
            }
        }
    }
    if lo <= 0.0 {
        return Err(Error::Ellipticity(format!(
            "sampled minimum eigenvalue {} ≤ 0",
            lo
        )));
    }
    let lambda = lo * 0.9;
    let big_lambda = hi * 1.1;

    if uses_x {
        Ok(Coefficient::Macro(MacroCoefficient {
            name,
            eval: Arc::new(move |x, y| mat(x, y)),
            div_y_eval: div_y,
            lambda,
            big_lambda,
            divergence_kind: DivergenceKind::FiniteDifference,
            bounds_estimated: true,
            freeze_hook: None,
        }))
    } else {
        Ok(Coefficient::Cell(CellCoefficient {
            name,
            eval: Arc::new(move |y| mat([0.0; 2], y)),
            div_eval: Arc::new(move |y| div_y([0.0; 2], y)),
            lambda,
            big_lambda,
            smoothness: Smoothness::W1q,
            divergence_kind: DivergenceKind::FiniteDifference,
            bounds_estimated: true,
            derivs: None,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_builtin() {
        let c = builtin("identity").unwrap().into_cell().unwrap();
        assert_eq!(c.a([0.3, 0.8]), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(c.div_a([0.3, 0.8]), [0.0, 0.0]);
        assert_eq!(c.lambda, 1.0);
        assert_eq!(c.big_lambda, 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_builtin_rejected() {
        assert!(matches!(builtin("nope"), Err(Error::Lookup(_))));
    }

    #[test]
    fn arcsin_kink_values() {
        let c = builtin("arcsin_kink").unwrap().into_cell().unwrap();
        let a = c.a([0.0, 0.0]);
        assert!((a[0][0] - 1.0).abs() < 1e-14);
        assert!((a[0][1]).abs() < 1e-14);
        assert!((a[1][1] - 3.0).abs() < 1e-14);
        let a = c.a([0.25, 0.9]);
        assert!((a[0][0] - (1.0 + PI / 6.0)).abs() < 1e-13);
        c.validate().unwrap();
    }

    #[test]
    fn xdep_diag_values() {
        let c = builtin("xdep_diag").unwrap().into_macro().unwrap();
        let a = c.a([0.0, 1.0], [0.7, 0.0]);
        assert!((a[1][1] - 3.0).abs() < 1e-14);
        // Frozen coefficient sees the same values.
        let frozen = c.freeze([0.0, 1.0]);
        let b = frozen.a([0.7, 0.0]);
        assert!((b[1][1] - 3.0).abs() < 1e-14);
        frozen.validate().unwrap();
    }

    #[test]
    fn analytic_divergence_matches_finite_difference() {
        let h = 1e-6;
        for name in ["arcsin_kink", "sep_diag(2)"] {
            let c = builtin(name).unwrap().into_cell().unwrap();
            for i in 0..64 {
                for j in 0..64 {
                    let y = [i as f64 / 64.0, j as f64 / 64.0];
                    if (y[0] - 0.5).abs() < 1e-3 {
                        continue; // kink line of arcsin(sin²)
                    }
                    let mut fd = [0.0; 2];
                    for row in 0..2 {
                        for d in 0..2 {
                            let mut yp = y;
                            let mut ym = y;
                            yp[d] += h;
                            ym[d] -= h;
                            fd[row] += (c.a(yp)[row][d] - c.a(ym)[row][d]) / (2.0 * h);
                        }
                    }
                    let an = c.div_a(y);
                    for row in 0..2 {
                        assert!(
                            (an[row] - fd[row]).abs() < 1e-5,
                            "{} divergence row {} at ({}, {}): {} vs {}",
                            name,
                            row,
                            y[0],
                            y[1],
                            an[row],
                            fd[row]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn matrix_derivatives_match_finite_difference() {
        let h = 1e-5;
        for name in ["arcsin_kink", "sep_diag(2)"] {
            let c = builtin(name).unwrap().into_cell().unwrap();
            let d = c.derivs().unwrap();
            for i in 0..32 {
                let y = [i as f64 / 32.0 + 0.011, 0.37];
                if (y[0] - 0.5).abs() < 2e-2 {
                    continue;
                }
                for r in 0..2 {
                    let mut yp = y;
                    let mut ym = y;
                    yp[r] += h;
                    ym[r] -= h;
                    let fd = crate::geom::mat_scale(
                        1.0 / (2.0 * h),
                        crate::geom::mat_add(c.a(yp), crate::geom::mat_scale(-1.0, c.a(ym))),
                    );
                    let an = (d.d_a)(y, r);
                    for p in 0..2 {
                        for q in 0..2 {
                            assert!(
                                (an[p][q] - fd[p][q]).abs() < 1e-4,
                                "{} dA[{}][{}]/dy{} at y1={}",
                                name,
                                p,
                                q,
                                r,
                                y[0]
                            );
                        }
                    }
                    // Second derivative vs FD of the first.
                    for s in 0..2 {
                        let mut ysp = y;
                        let mut ysm = y;
                        ysp[s] += h;
                        ysm[s] -= h;
                        let fd2 = crate::geom::mat_scale(
                            1.0 / (2.0 * h),
                            crate::geom::mat_add(
                                (d.d_a)(ysp, r),
                                crate::geom::mat_scale(-1.0, (d.d_a)(ysm, r)),
                            ),
                        );
                        let an2 = (d.d2_a)(y, r, s);
                        for p in 0..2 {
                            for q in 0..2 {
                                assert!(
                                    (an2[p][q] - fd2[p][q]).abs() < 1e-3,
                                    "{} d2A[{}][{}]/dy{}dy{} at y1={}",
                                    name,
                                    p,
                                    q,
                                    r,
                                    s,
                                    y[0]
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cordes_examples() {
        let id = builtin("identity").unwrap().into_cell().unwrap();
        let r = cordes_check(&id, 11).unwrap();
        assert!((r.delta - 1.0).abs() < 1e-14);
        assert!((r.gamma_min - 1.0).abs() < 1e-14);
        assert!((r.gamma_max - 1.0).abs() < 1e-14);

        let d12 = builtin("constant_spd(1,2)").unwrap().into_cell().unwrap();
        let r = cordes_check(&d12, 11).unwrap();
        assert!((r.delta - 0.8).abs() < 1e-12);
    }

    #[test]
    fn cordes_scaling_invariance() {
        let c = builtin("arcsin_kink").unwrap().into_cell().unwrap();
        let r1 = cordes_check(&c, 41).unwrap();
        let r2 = cordes_check_fn(&|y| crate::geom::mat_scale(7.5, c.a(y)), 41).unwrap();
        assert!((r1.delta - r2.delta).abs() < 1e-12);
    }

    #[test]
    fn cordes_at_least_eigenvalue_bound() {
        for name in ["arcsin_kink", "sep_diag(2)"] {
            let c = builtin(name).unwrap().into_cell().unwrap();
            // Sample eigenvalue extrema.
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..201 {
                for j in 0..3 {
                    let y = [i as f64 / 200.0, j as f64 / 2.0];
                    let e = crate::geom::sym_eigenvalues(c.a(y));
                    lo = lo.min(e[0]);
                    hi = hi.max(e[1]);
                }
            }
            let bound = lo * lo / (2.0 * hi * hi - lo * lo);
            let r = cordes_check(&c, 201).unwrap();
            assert!(
                r.delta >= bound - 1e-10,
                "{}: delta {} < bound {}",
                name,
                r.delta,
                bound
            );
            // Stored ellipticity constants bracket the sampled eigenvalues.
            assert!(c.lambda <= lo + 1e-12 && c.big_lambda >= hi - 1e-12);
        }
    }

    #[test]
    fn parsed_identity_field() {
        let c = parse_expression_field("1", "0", "1")
            .unwrap()
            .into_cell()
            .unwrap();
        assert_eq!(c.a([0.2, 0.9]), [[1.0, 0.0], [0.0, 1.0]]);
        assert!(c.bounds_estimated);
        assert_eq!(c.divergence_kind, DivergenceKind::FiniteDifference);
    }

    #[test]
    fn parsed_matches_builtin_xdep_diag_entry() {
        let c = parse_expression_field("3", "0", "2+x2*cos(2*pi*y2+x1)")
            .unwrap()
            .into_macro()
            .unwrap();
        let a = c.a([0.0, 1.0], [0.3, 0.0]);
        assert!((a[1][1] - 3.0).abs() < 1e-14);
        // Finite-difference divergence close to analytic for the builtin entry.
        let b = builtin("xdep_diag").unwrap().into_macro().unwrap();
        let x = [0.4, 0.8];
        let y = [0.3, 0.6];
        let fd = c.div_y(x, y)[1];
        let an = b.div_y(x, y)[1];
        assert!((fd - an).abs() < 1e-5);
    }

    #[test]
    fn parse_error_reported() {
        assert!(matches!(
            parse_expression_field("1+", "0", "1"),
            Err(Error::Parse { .. })
        ));
    }
}
