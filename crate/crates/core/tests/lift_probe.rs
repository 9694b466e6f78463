//! Manual probe of corrector and lift accuracy against a 1D ODE oracle.
//! Run: cargo test --release --test lift_probe -- --ignored --nocapture

use homfem::cell::CellSolution;
use homfem::coeff::builtin;
use homfem::mesh::{unit_square_mesh, Pattern};
use homfem::norms::{error_norm, NormKind};
use homfem::space::value_field;
use std::sync::Arc;

// Tabulate chi'' = (a0 - a11)/a11, then chi' and chi by cumulative
// integration with periodic/zero-mean normalization.
struct Oracle1d {
    xs: Vec<f64>,
    chi: Vec<f64>,
    dchi: Vec<f64>,
    d2chi: Vec<f64>,
}

impl Oracle1d {
    fn build(a0: f64) -> Oracle1d {
        let a = builtin("arcsin_kink").unwrap().into_cell().unwrap();
        let m = 200_000usize;
        let xs: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
        let d2: Vec<f64> = xs
            .iter()
            .map(|&t| {
                let a11 = a.a([t, 0.0])[0][0];
                (a0 - a11) / a11
            })
            .collect();
        let cumul = |f: &[f64]| {
            let mut c = vec![0.0; f.len()];
            for i in 1..f.len() {
                c[i] = c[i - 1] + 0.5 * (f[i] + f[i - 1]) / m as f64;
            }
            c
        };
        let zero_mean = |f: &mut [f64]| {
            let mean = f.iter().sum::<f64>() / f.len() as f64;
            f.iter_mut().for_each(|v| *v -= mean);
        };
        let mut d1 = cumul(&d2);
        zero_mean(&mut d1);
        let mut chi = cumul(&d1);
        zero_mean(&mut chi);
        Oracle1d { xs, chi, dchi: d1, d2chi: d2 }
    }
    fn at(&self, v: &[f64], t: f64) -> f64 {
        let m = self.xs.len() - 1;
        let i = ((t * m as f64) as usize).min(m - 1);
        let s = t * m as f64 - i as f64;
        v[i] * (1.0 - s) + v[i + 1] * s
    }
}

#[test]
#[ignore]
fn lift_accuracy() {
    let a = builtin("arcsin_kink").unwrap().into_cell().unwrap();
    for n in [16usize, 32, 64, 128] {
        let mesh = Arc::new(unit_square_mesh(n, Pattern::CrissCross).unwrap());
        let sol = CellSolution::solve(&a, mesh, true).unwrap();
        let a0 = sol.a0_h.entries[0][0];
        let or = Arc::new(Oracle1d::build(a0));
        let (o1, o2, o3) = (or.clone(), or.clone(), or.clone());
        let chi_e = value_field(move |y: [f64; 2]| o1.at(&o1.chi, y[0]));
        let v_e = value_field(move |y: [f64; 2]| o2.at(&o2.dchi, y[0]));
        let z_e = value_field(move |y: [f64; 2]| o3.at(&o3.d2chi, y[0]));
        let zero = value_field(|_| 0.0);
        let chi = &sol.correctors[0];
        let v = &sol.gradient_lifts.as_ref().unwrap()[0];
        let z = &sol.corrector_hessians.as_ref().unwrap()[0];
        let e_chi = error_norm(chi, &chi_e, NormKind::L2, 4, 2).unwrap();
        let e_v0 = error_norm(&v[0], &v_e, NormKind::L2, 4, 2).unwrap();
        let e_v1 = error_norm(&v[1], &zero, NormKind::L2, 4, 2).unwrap();
        let e_z = error_norm(&z[0], &z_e, NormKind::L2, 4, 2).unwrap();
        println!(
            "n={:4} chi_err={:.3e} v0_err={:.3e} v1={:.3e} z11_err={:.3e}",
            n, e_chi, e_v0, e_v1, e_z
        );
    }
}
