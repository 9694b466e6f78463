//! Manual scaling probe for the direct solver on large HCT systems.
//! Run with: cargo test --release --test scale_probe -- --ignored --nocapture

use homfem::assemble::{assemble, BiForm, LinForm, MatrixField, ScalarField};
use homfem::geom::IDENTITY;
use homfem::mesh::{unit_square_mesh, Pattern};
use homfem::space::FeSpace;
use homfem::sparse::Method;
use std::sync::Arc;
use std::time::Instant;

#[test]
#[ignore]
fn hct_direct_solver_scaling() {
    for n in [64usize, 128, 256] {
        let t0 = Instant::now();
        let mesh = Arc::new(unit_square_mesh(n, Pattern::Diagonal).unwrap());
        let sp = FeSpace::hct_h2_dirichlet(mesh, &|_| [0.0, 0.0]);
        let t_mesh = t0.elapsed();
        let id: MatrixField = &|_| IDENTITY;
        let one: ScalarField = &|_| 1.0;
        let t1 = Instant::now();
        let sys = assemble(
            &sp,
            &[(1.0, BiForm::HessContractPair(id))],
            &[(1.0, LinForm::LoadContract { f: one, m: id })],
            6,
            true,
        )
        .unwrap();
        let t_asm = t1.elapsed();
        let t2 = Instant::now();
        let x = sys.solve(Method::Direct, 1e-8).unwrap();
        let t_solve = t2.elapsed();
        println!(
            "n={} dofs={} nnz~{} mesh={:.1?} assemble={:.1?} solve={:.1?} |x|max={:.3e}",
            n,
            sp.n_dofs,
            sys.matrix.entries.len(),
            t_mesh,
            t_asm,
            t_solve,
            x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        );
    }
}
