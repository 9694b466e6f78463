//! Acceptance suite: one test (and one printed PASS/FAIL line) per criterion.
//!
//! The harness prints `ok`/`FAILED` per criterion; run with `-- --nocapture`
//! to also see the measured numbers behind each verdict.

use std::sync::Arc;

use homfem::cell::{
    divergence_form_transform, homogenized_matrix, solve_invariant_measure, CellSolution,
};
use homfem::coeff::{builtin, cordes_check};
use homfem::geom::{sym_eigenvalues, Vec2};
use homfem::macroprob::{boundary_trace_max, solve_homogenized_h1, solve_homogenized_h2};
use homfem::mesh::{periodic_pairing, unit_square_mesh, Pattern};
use homfem::oracle::oracle_y1_only;
use homfem::space::{full_field, interpolate, value_field, FeSpace};
use homfem::study::{run_study, StudyConfig};

fn report(criterion: usize, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict} — {detail}");
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn study(toml: &str) -> homfem::study::StudyOutput {
    let cfg = StudyConfig::from_toml(toml).expect("config parses");
    run_study(&cfg, None).expect("study runs")
}

/// Successive EOCs of a study column (first entry of `eoc` is always None).
fn eocs(out: &homfem::study::StudyOutput, col: &str) -> Vec<f64> {
    let errs = out.table.column(col).expect("column exists");
    homfem::study::eoc(errs).into_iter().flatten().collect()
}

fn fmt(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", s.join(", "))
}

fn in_window(v: &[f64], lo: f64, hi: f64) -> bool {
    !v.is_empty() && v.iter().all(|&x| x >= lo && x <= hi)
}

/// Deterministic low-discrepancy interior sample points.
fn sample_points(n: usize) -> Vec<Vec2> {
    (0..n)
        .map(|k| {
            let t = k as f64 + 0.5;
            [
                (t * 0.754877666).fract() * 0.96 + 0.02,
                (t * 0.569840291).fract() * 0.96 + 0.02,
            ]
        })
        .collect()
}

#[test]
fn criterion_01_trivial_exactness() {
    let tol = 1e-10;
    let mut worst = 0.0f64;
    for name in ["identity", "constant_spd(2,3)"] {
        let a = builtin(name).unwrap().into_cell().unwrap();
        let mesh = Arc::new(unit_square_mesh(16, Pattern::CrissCross).unwrap());
        let sol = CellSolution::solve(&a, mesh, true).unwrap();
        for &v in &sol.m_h.coeffs {
            worst = worst.max((v - 1.0).abs());
        }
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((sol.a0_h.entries[i][j] - a.a([0.3, 0.7])[i][j]).abs());
            }
        }
        for chi in &sol.correctors {
            for &v in &chi.coeffs {
                worst = worst.max(v.abs());
            }
        }
        for zrow in sol.corrector_hessians.as_ref().unwrap() {
            for z in zrow {
                for &v in &z.coeffs {
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    report(
        1,
        worst <= tol,
        &format!("identity and diag(2,3): max deviation {worst:.2e} (tol {tol:.0e})"),
    );
}

#[test]
fn criterion_02_homogenized_constants() {
    let a = builtin("arcsin_kink").unwrap().into_cell().unwrap();
    let mesh = Arc::new(unit_square_mesh(256, Pattern::CrissCross).unwrap());
    let pairing = Arc::new(periodic_pairing(&mesh).unwrap());
    let m_h = solve_invariant_measure(&a, &mesh, &pairing).unwrap();
    let fem = homogenized_matrix(&a, &m_h).entries;
    let orc = oracle_y1_only(&a).unwrap().a0;
    let tol = 5e-4;
    let pass = (fem[0][0] - 1.4684).abs() <= tol
        && (fem[1][1] - 2.6037).abs() <= tol
        && fem[0][1].abs() <= 1e-6
        && (fem[0][0] - orc[0][0]).abs() <= tol
        && (fem[1][1] - orc[1][1]).abs() <= tol
        && orc[0][1].abs() <= 1e-6;
    report(
        2,
        pass,
        &format!(
            "a0_11 = {:.6} (ref 1.4684), a0_22 = {:.6} (ref 2.6037), |a0_12| = {:.1e}; \
             oracle ({:.6}, {:.6})",
            fem[0][0], fem[1][1], fem[0][1], orc[0][0], orc[1][1]
        ),
    );
}

#[test]
fn criterion_03_invariant_measure_rates() {
    let base = "study = \"invariant_measure\"\nproblem = \"arcsin_kink\"\ncell_ladder = [16, 32, 64, 128]\n";
    let shifted = eocs(&study(&format!("{base}mesh = \"shifted\"\n")), "m_l2");
    let aligned = eocs(&study(&format!("{base}mesh = \"aligned\"\n")), "m_l2");
    let pass = in_window(&shifted, 1.35, 1.65) && in_window(&aligned, 1.8, 2.2);
    report(
        3,
        pass,
        &format!(
            "shifted EOC {} (window [1.35, 1.65]), aligned EOC {} (window [1.8, 2.2])",
            fmt(&shifted),
            fmt(&aligned)
        ),
    );
}

#[test]
fn criterion_04_homogenized_matrix_rate() {
    let out = study(
        "study = \"homogenized_matrix\"\nproblem = \"arcsin_kink\"\ncell_ladder = [16, 32, 64, 128]\n",
    );
    let e = eocs(&out, "a0_max");
    report(
        4,
        in_window(&e, 1.75, 2.25),
        &format!("|A0 - A0_h| EOC {} (window [1.75, 2.25])", fmt(&e)),
    );
}

#[test]
fn criterion_05_u0_h2_rate() {
    let out = study(
        "study = \"u0_h2\"\nproblem = \"arcsin_kink\"\ncell_n = 256\nmacro_ladder = [8, 16, 32, 64]\n",
    );
    let e = eocs(&out, "u0_h2");
    report(
        5,
        in_window(&e, 1.75, 2.25),
        &format!("||u0 - u0_hk||_H2 EOC {} (window [1.75, 2.25])", fmt(&e)),
    );
}

#[test]
fn criterion_06_corrector_epsilon_rate() {
    let out = study(
        "study = \"corrector_error\"\nproblem = \"arcsin_kink\"\n\
         epsilon_ladder = [0.125, 0.0625, 0.03125]\ncell_n = 128\nmacro_n = 32\n",
    );
    let sq = out.table.column("squared_total").unwrap();
    let ratios: Vec<f64> = sq.windows(2).map(|w| w[0] / w[1]).collect();
    report(
        6,
        in_window(&ratios, 1.6, 2.4),
        &format!(
            "squared composite error ratios {} over eps halving (window [1.6, 2.4])",
            fmt(&ratios)
        ),
    );
}

#[test]
fn criterion_07_derivative_lift_rates() {
    let out =
        study("study = \"lift\"\nproblem = \"arcsin_kink\"\ncell_ladder = [16, 32, 64, 128]\n");
    let v = eocs(&out, "v_h1");
    let z = eocs(&out, "z_l2");
    let pass = in_window(&v, 0.9, f64::INFINITY) && in_window(&z, 0.9, f64::INFINITY);
    report(
        7,
        pass,
        &format!(
            "first-stage lift H1 EOC {}, second-stage Hessian L2 EOC {} (both >= 0.9)",
            fmt(&v),
            fmt(&z)
        ),
    );
}

#[test]
fn criterion_08_nonuniform_pipeline() {
    let out = study("study = \"nonuniform\"\nproblem = \"xdep_diag\"\nmacro_ladder = [8, 16, 32]\n");
    let node = eocs(&out, "a0_node_max");
    let u0 = eocs(&out, "u0_h2");
    let pass = in_window(&node, 1.5, 2.5) && in_window(&u0, 1.75, 2.25);
    report(
        8,
        pass,
        &format!(
            "max-node |A0(x_i) - A0_h^i| EOC {} (window [1.5, 2.5]), u0 H2 EOC {} (window [1.75, 2.25])",
            fmt(&node),
            fmt(&u0)
        ),
    );
}

#[test]
fn criterion_09_property_suite() {
    let mut failures: Vec<String> = Vec::new();
    let pts = sample_points(40);

    // HCT cubic exactness and C1 continuity across interior edges.
    {
        let mesh = Arc::new(unit_square_mesh(4, Pattern::CrissCross).unwrap());
        let space = FeSpace::hct(mesh.clone());
        let cubic = full_field(
            |p: Vec2| p[0].powi(3) + 2.0 * p[0].powi(2) * p[1] - p[1].powi(3) + p[0] * p[1],
            |p: Vec2| {
                [
                    3.0 * p[0] * p[0] + 4.0 * p[0] * p[1] + p[1],
                    2.0 * p[0] * p[0] - 3.0 * p[1] * p[1] + p[0],
                ]
            },
            |p: Vec2| [6.0 * p[0] + 4.0 * p[1], 4.0 * p[0] + 1.0, -6.0 * p[1]],
        );
        let u = interpolate(&space, &cubic).unwrap();
        let mut worst = 0.0f64;
        for &p in &pts {
            let exact = p[0].powi(3) + 2.0 * p[0].powi(2) * p[1] - p[1].powi(3) + p[0] * p[1];
            worst = worst.max((u.eval(p, 0).unwrap().0 - exact).abs());
        }
        if worst > 1e-10 {
            failures.push(format!("HCT cubic exactness: {worst:.2e}"));
        }

        let smooth = full_field(
            |p: Vec2| (2.1 * p[0]).sin() * (1.3 * p[1]).cos(),
            |p: Vec2| {
                [
                    2.1 * (2.1 * p[0]).cos() * (1.3 * p[1]).cos(),
                    -1.3 * (2.1 * p[0]).sin() * (1.3 * p[1]).sin(),
                ]
            },
            |p: Vec2| {
                [
                    -2.1 * 2.1 * (2.1 * p[0]).sin() * (1.3 * p[1]).cos(),
                    -2.1 * 1.3 * (2.1 * p[0]).cos() * (1.3 * p[1]).sin(),
                    -1.3 * 1.3 * (2.1 * p[0]).sin() * (1.3 * p[1]).cos(),
                ]
            },
        );
        let w = interpolate(&space, &smooth).unwrap();
        let mut tris_of_edge = vec![Vec::new(); mesh.edges.len()];
        for t in 0..mesh.n_triangles() {
            for &e in &mesh.tri_edges[t] {
                tris_of_edge[e].push(t);
            }
        }
        let mut jump = 0.0f64;
        for (e, tris) in tris_of_edge.iter().enumerate() {
            if mesh.edge_boundary[e].is_some() || tris.len() != 2 {
                continue;
            }
            let [a, b] = mesh.edges[e];
            let mid = [
                0.5 * (mesh.vertices[a][0] + mesh.vertices[b][0]),
                0.5 * (mesh.vertices[a][1] + mesh.vertices[b][1]),
            ];
            let (v0, g0, _) = w.eval_in(tris[0], mid, 1);
            let (v1, g1, _) = w.eval_in(tris[1], mid, 1);
            jump = jump
                .max((v0 - v1).abs())
                .max((g0[0] - g1[0]).abs())
                .max((g0[1] - g1[1]).abs());
        }
        if jump > 1e-9 {
            failures.push(format!("HCT C1 continuity jump: {jump:.2e}"));
        }
    }

    // Partition of unity: the interpolant of 1 evaluates to 1 everywhere.
    {
        let mesh = Arc::new(unit_square_mesh(5, Pattern::Diagonal).unwrap());
        let one_flat = value_field(|_| 1.0);
        let one_full = full_field(|_| 1.0, |_| [0.0, 0.0], |_| [0.0; 3]);
        for (label, u) in [
            ("P1", interpolate(&FeSpace::p1(mesh.clone()), &one_flat).unwrap()),
            ("P2", interpolate(&FeSpace::p2(mesh.clone()), &one_flat).unwrap()),
            ("HCT", interpolate(&FeSpace::hct(mesh.clone()), &one_full).unwrap()),
        ] {
            let worst = pts
                .iter()
                .map(|&p| (u.eval(p, 0).unwrap().0 - 1.0).abs())
                .fold(0.0f64, f64::max);
            if worst > 1e-12 {
                failures.push(format!("{label} partition of unity: {worst:.2e}"));
            }
        }
    }

    // Zero-mean constraints, unit measure mass, and corrector symmetry.
    {
        let a = builtin("arcsin_kink").unwrap().into_cell().unwrap();
        let mesh = Arc::new(unit_square_mesh(32, Pattern::CrissCross).unwrap());
        let sol = CellSolution::solve(&a, mesh, false).unwrap();
        let weights = sol.m_h.space.basis_integrals();
        let mass: f64 = weights.iter().zip(&sol.m_h.coeffs).map(|(w, c)| w * c).sum();
        if (mass - 1.0).abs() > 1e-10 {
            failures.push(format!("measure mass: |int m - 1| = {:.2e}", (mass - 1.0).abs()));
        }
        for chi in &sol.correctors {
            let mean: f64 = weights.iter().zip(&chi.coeffs).map(|(w, c)| w * c).sum();
            if mean.abs() > 1e-10 {
                failures.push(format!("corrector mean: {:.2e}", mean.abs()));
            }
        }
        if !std::ptr::eq(sol.corrector(0, 1), sol.corrector(1, 0)) {
            failures.push("corrector (0,1)/(1,0) not the identical object".into());
        }
    }

    // Galerkin orthogonality: the H1 solve's residual vanishes on the space.
    let a0 = [[2.0, 0.3], [0.3, 1.5]];
    let f1 = |p: Vec2| (3.0 * p[0]).sin() * (2.0 * p[1]).cos();
    {
        use homfem::assemble::{assemble, BiForm, LinForm};
        let mesh = Arc::new(unit_square_mesh(8, Pattern::CrissCross).unwrap());
        let u = solve_homogenized_h1(a0, &f1, mesh.clone()).unwrap();
        let space = FeSpace::p2_dirichlet(mesh);
        let af = |_: Vec2| a0;
        let sys = assemble(
            &space,
            &[(1.0, BiForm::GradAGrad(&af))],
            &[(-1.0, LinForm::Load(&f1))],
            6,
            true,
        )
        .unwrap();
        let mut ku = vec![0.0; sys.rhs.len()];
        sys.matrix.to_csr().matvec(&u.coeffs, &mut ku);
        let res = ku
            .iter()
            .zip(&sys.rhs)
            .map(|(k, b)| (k - b).abs())
            .fold(0.0f64, f64::max);
        if res > 1e-9 {
            failures.push(format!("Galerkin residual: {res:.2e}"));
        }
    }

    // Divergence-form diagnostic: skewness and decay of the mean of B.
    {
        let a = builtin("arcsin_kink").unwrap().into_cell().unwrap();
        let mut means = Vec::new();
        for n in [32usize, 64] {
            let mesh = Arc::new(unit_square_mesh(n, Pattern::CrissCross).unwrap());
            let pairing = Arc::new(periodic_pairing(&mesh).unwrap());
            let m_h = solve_invariant_measure(&a, &mesh, &pairing).unwrap();
            let dt = divergence_form_transform(&a, &m_h, &mesh, &pairing).unwrap();
            if dt.skewness > 1e-10 {
                failures.push(format!("B skewness at n={n}: {:.2e}", dt.skewness));
            }
            means.push(dt.mean[0].hypot(dt.mean[1]));
        }
        let decayed = means[1] <= 1e-12 || means[0] / means[1] >= 2.0f64.powf(0.9);
        if !decayed {
            failures.push(format!("|int B| decay: {:.2e} -> {:.2e}", means[0], means[1]));
        }
    }

    // Cordes lower bound from the ellipticity constants of the sampled field.
    for name in ["arcsin_kink", "sep_diag(2)", "constant_spd(2,3)"] {
        let a = builtin(name).unwrap().into_cell().unwrap();
        let n = 64usize;
        let (mut lam, mut big) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            for j in 0..n {
                let y = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
                let e = sym_eigenvalues(a.a(y));
                lam = lam.min(e[0]);
                big = big.max(e[1]);
            }
        }
        let bound = lam * lam / (2.0 * big * big - lam * lam);
        let delta = cordes_check(&a, n).unwrap().delta;
        if delta < bound - 1e-10 {
            failures.push(format!("Cordes {name}: delta {delta:.4} < bound {bound:.4}"));
        }
    }

    // Macro solver linearity and homogeneous Dirichlet traces.
    {
        let mesh = Arc::new(unit_square_mesh(8, Pattern::CrissCross).unwrap());
        let f2 = |p: Vec2| p[0] * p[0] - 3.0 * p[1] + 1.0;
        let f12 = |p: Vec2| f1(p) + 2.0 * f2(p);
        let u1 = solve_homogenized_h1(a0, &f1, mesh.clone()).unwrap();
        let u2 = solve_homogenized_h1(a0, &f2, mesh.clone()).unwrap();
        let u12 = solve_homogenized_h1(a0, &f12, mesh.clone()).unwrap();
        let lin_err = u12
            .coeffs
            .iter()
            .zip(u1.coeffs.iter().zip(&u2.coeffs))
            .map(|(c, (c1, c2))| (c - (c1 + 2.0 * c2)).abs())
            .fold(0.0f64, f64::max);
        if lin_err > 1e-9 {
            failures.push(format!("H1 solve linearity: {lin_err:.2e}"));
        }
        let uh2 = solve_homogenized_h2(a0, &f1, mesh).unwrap();
        for (label, u) in [("H1", &u1), ("H2", &uh2)] {
            let trace = boundary_trace_max(u, 200);
            if trace > 1e-10 {
                failures.push(format!("{label} Dirichlet trace: {trace:.2e}"));
            }
        }
    }

    report(
        9,
        failures.is_empty(),
        &if failures.is_empty() {
            "HCT C1/cubic exactness, partition of unity, zero means, Galerkin residual, \
             B skewness and mean decay, Cordes bound, linearity, Dirichlet traces"
                .to_string()
        } else {
            failures.join("; ")
        },
    );
}

#[test]
fn criterion_10_plateau() {
    let out = study(
        "study = \"plateau\"\nproblem = \"arcsin_kink\"\nepsilon_ladder = [0.015625]\n\
         cell_n = 128\nmacro_ladder = [4, 8, 16, 32]\neps_ratio = 4\n",
    );
    let sq = out.table.column("squared_total").unwrap();
    let decreasing = sq.windows(2).all(|w| w[1] < w[0]);
    let flattening = sq[sq.len() - 1] / sq[sq.len() - 2] > 0.5;
    let adj = eocs(&out, "adjusted");
    let pass = decreasing && flattening && in_window(&adj, 3.0, f64::INFINITY);
    report(
        10,
        pass,
        &format!(
            "squared error decreasing {decreasing} then flattening {flattening}; \
             plateau-adjusted EOC {} (>= 3)",
            fmt(&adj)
        ),
    );
}
