//! Small fixed-size vector/matrix helpers for 2D problems.

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const ZERO_VEC: Vec2 = [0.0, 0.0];
pub const ZERO_MAT: Mat2 = [[0.0, 0.0], [0.0, 0.0]];
pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn scale(s: f64, a: Vec2) -> Vec2 {
    [s * a[0], s * a[1]]
}

pub fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

pub fn matvec(m: Mat2, v: Vec2) -> Vec2 {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

pub fn mat_add(a: Mat2, b: Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub fn mat_scale(s: f64, a: Mat2) -> Mat2 {
    [[s * a[0][0], s * a[0][1]], [s * a[1][0], s * a[1][1]]]
}

/// Frobenius inner product A : B.
pub fn contract(a: Mat2, b: Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

pub fn trace(a: Mat2) -> f64 {
    a[0][0] + a[1][1]
}

pub fn det(a: Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn inverse(a: Mat2) -> Mat2 {
    let d = det(a);
    [
        [a[1][1] / d, -a[0][1] / d],
        [-a[1][0] / d, a[0][0] / d],
    ]
}

pub fn transpose(a: Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn sym_eigenvalues(a: Mat2) -> [f64; 2] {
    let t = trace(a);
    let d = det(a);
    let disc = (t * t / 4.0 - d).max(0.0).sqrt();
    [t / 2.0 - disc, t / 2.0 + disc]
}

/// Fractional part componentwise, mapped into [0, 1).
pub fn frac(x: Vec2) -> Vec2 {
    let f = |t: f64| {
        let r = t - t.floor();
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    };
    [f(x[0]), f(x[1])]
}
