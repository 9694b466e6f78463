//! Corrector-based reconstruction of the fine-scale solution and its Hessian
//! from a macro solve and cell data, plus the composite error quantities used
//! by the convergence studies.

use std::io::Write;
use std::sync::Arc;

use crate::cell::{ij_index, CellSolution};
use crate::error::{Error, Result};
use crate::geom::{frac, scale, Vec2};
use crate::norms::{error_norm, hessian_entry_error, NormKind};
use crate::space::{FeFunction, SpaceKind};

/// View over a macro solution and cell data producing the corrected Hessian
/// entries u^{kl}(x) = ∂²_{kl}u₀ₕ(x) + Σᵢⱼ z^{kl}_{ij}(x/ε)·∂²ᵢⱼu₀ₕ(x) and the
/// first-order ansatz u₀ₕ + ε²Σχᵢⱼ(x/ε)∂²ᵢⱼu₀ₕ. Cell arguments are wrapped
/// into the unit cell componentwise.
pub struct Reconstruction {
    pub u0_h: FeFunction,
    pub cell: Arc<CellSolution>,
    pub epsilon: f64,
}

/// Weight of the (i, j) entry in a symmetric sum over all of {1,2}².
const SYM_W: [f64; 3] = [1.0, 2.0, 1.0];

pub fn reconstruct(u0_h: FeFunction, cell: Arc<CellSolution>, epsilon: f64) -> Result<Reconstruction> {
    if u0_h.space.kind != SpaceKind::Hct {
        return Err(Error::Capability(
            "reconstruction needs second derivatives of the macro solution (H² element)".into(),
        ));
    }
    if cell.corrector_hessians.is_none() {
        return Err(Error::Capability(
            "cell solution lacks corrector Hessian lifts; solve with hessians enabled".into(),
        ));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    Ok(Reconstruction {
        u0_h,
        cell,
        epsilon,
    })
}

impl Reconstruction {
    fn wrap(&self, x: Vec2) -> Vec2 {
        frac(scale(1.0 / self.epsilon, x))
    }

    /// Corrected Hessian entry u^{kl}_{ε,h}(x); (k, l) symmetric by
    /// construction (shared z objects).
    pub fn hessian_entry(&self, k: usize, l: usize, x: Vec2) -> Result<f64> {
        let (_, _, h0) = self.u0_h.eval(x, 2)?;
        let y = self.wrap(x);
        let kl = ij_index(k, l);
        let mut v = [h0[0], h0[1], h0[2]][kl];
        let zs = self.cell.corrector_hessians.as_ref().unwrap();
        for (c, &w) in SYM_W.iter().enumerate() {
            let z = zs[c][kl].eval(y, 0)?.0;
            v += w * z * [h0[0], h0[1], h0[2]][c];
        }
        Ok(v)
    }

    /// First-order corrector ansatz u₀ₕ(x) + ε²Σχᵢⱼ(x/ε)∂²ᵢⱼu₀ₕ(x).
    pub fn first_order(&self, x: Vec2) -> Result<f64> {
        let (u, _, h0) = self.u0_h.eval(x, 2)?;
        let y = self.wrap(x);
        let mut v = u;
        for (c, &w) in SYM_W.iter().enumerate() {
            let chi = self.cell.correctors[c].eval(y, 0)?.0;
            v += self.epsilon * self.epsilon * w * chi * [h0[0], h0[1], h0[2]][c];
        }
        Ok(v)
    }
}

/// Composite error record for one (ε, h, k) triple.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub epsilon: f64,
    pub h_cell: f64,
    pub k_macro: f64,
    /// ‖u_ε − u₀ₕ‖_{H¹}.
    pub h1_error: f64,
    /// (k, l) → (L², L¹) distance of ∂²_{kl}u_ε from the corrected entry.
    pub hessian_errors: [(f64, f64); 3],
    /// h1² + e11² + e12² + e22² (each distinct entry once, L² values).
    pub squared_total: f64,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str =
        "epsilon,h_cell,k_macro,h1_err,e11,e12,e22,l1_e11,l1_e12,l1_e22,squared_total";

    pub fn csv_row<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            self.epsilon,
            self.h_cell,
            self.k_macro,
            self.h1_error,
            self.hessian_errors[0].0,
            self.hessian_errors[1].0,
            self.hessian_errors[2].0,
            self.hessian_errors[0].1,
            self.hessian_errors[1].1,
            self.hessian_errors[2].1,
            self.squared_total
        )?;
        Ok(())
    }
}

/// Integrates the mismatch between a resolved reference u_ε and the
/// reconstruction over the reference mesh with subcell quadrature. The
/// subcell count must give at least `4` quadrature cells per oscillation
/// period in each direction.
pub fn corrector_error_report(
    u_eps_ref: &FeFunction,
    recon: &Reconstruction,
    quad_degree: usize,
    subcell: usize,
) -> Result<ErrorReport> {
    let h = u_eps_ref.space.mesh.h_max;
    let s = subcell.max(1);
    if h / s as f64 > recon.epsilon / 4.0 + 1e-12 {
        return Err(Error::HTooCoarse(format!(
            "subcell quadrature resolves only {:.2} cells per period; need >= 4 \
             (h = {:.3e}, subcell = {}, epsilon = {:.3e})",
            recon.epsilon / (h / s as f64),
            h,
            s,
            recon.epsilon
        )));
    }
    let h1_error = error_norm(u_eps_ref, &recon.u0_h, NormKind::H1, quad_degree, s)?;
    let mut hessian_errors = [(0.0, 0.0); 3];
    for (c, &(k, l)) in [(0usize, 0usize), (0, 1), (1, 1)].iter().enumerate() {
        let g = |x: Vec2| recon.hessian_entry(k, l, x).unwrap_or(f64::NAN);
        hessian_errors[c] = hessian_entry_error(u_eps_ref, k, l, &g, quad_degree, s);
    }
    let squared_total = h1_error * h1_error
        + hessian_errors
            .iter()
            .map(|(l2, _)| l2 * l2)
            .sum::<f64>();
    Ok(ErrorReport {
        epsilon: recon.epsilon,
        h_cell: recon.cell.mesh_h,
        k_macro: recon.u0_h.space.mesh.h_max,
        h1_error,
        hessian_errors,
        squared_total,
    })
}
