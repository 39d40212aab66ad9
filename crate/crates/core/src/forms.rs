//! Cell and facet kernels of the weak forms.
//!
//! Local vector-valued test functions `ψ = φ_a e_c` are indexed `c * nbv + a`.
//! All kernels return dense local arrays; scattering is done by `assembly`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{CellTable, FacetTable};
use crate::mesh::{Marker, Point};

/// A time-dependent vector field returning `(value, ∂_t value)`.
pub type VectorField = Arc<dyn Fn(Point, f64) -> ([f64; 2], [f64; 2]) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcMode {
    Strong,
    Nitsche,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NitscheParams {
    pub eta1: f64,
    pub eta2: f64,
    pub mode: BcMode,
}

impl Default for NitscheParams {
    fn default() -> Self {
        Self { eta1: 35.0, eta2: 35.0, mode: BcMode::Nitsche }
    }
}

impl NitscheParams {
    pub fn strong() -> Self {
        Self { mode: BcMode::Strong, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == BcMode::Nitsche && !(self.eta1 > 0.0 && self.eta2 > 0.0) {
            return Err(Error::Argument(format!(
                "Nitsche penalties must be positive (η₁ = {}, η₂ = {})",
                self.eta1, self.eta2
            )));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct ProblemData {
    pub nu: f64,
    pub force: VectorField,
    pub dirichlet: VectorField,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData").field("nu", &self.nu).finish_non_exhaustive()
    }
}

pub fn zero_field() -> VectorField {
    Arc::new(|_, _| ([0.0; 2], [0.0; 2]))
}

impl ProblemData {
    pub fn new(nu: f64, force: VectorField, dirichlet: VectorField) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::Argument(format!("viscosity must be positive, got {nu}")));
        }
        Ok(Self { nu, force, dirichlet })
    }

    /// Homogeneous data: `f = 0`, `g = 0`.
    pub fn homogeneous(nu: f64) -> Result<Self> {
        Self::new(nu, zero_field(), zero_field())
    }
}

/// Selects the value or the time derivative of a data field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeSample {
    Value,
    Rate,
}

pub(crate) fn sample(field: &VectorField, x: Point, t: f64, which: TimeSample) -> [f64; 2] {
    let (v, dv) = field(x, t);
    match which {
        TimeSample::Value => v,
        TimeSample::Rate => dv,
    }
}

/// State-independent cell matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLinear {
    /// `∫ φ_a φ_b`, `nbv × nbv`.
    pub mass: Vec<f64>,
    /// `ν ∫ ∇φ_a · ∇φ_b`, `nbv × nbv`.
    pub stiffness: Vec<f64>,
    /// `−∫ ξ_b ∂_c φ_a`, `2nbv × nbp`.
    pub grad: Vec<f64>,
    /// `∫ ξ_a ξ_b`, `nbp × nbp`.
    pub pressure_mass: Vec<f64>,
}

pub fn cell_linear(tab: &CellTable, nbv: usize, nbp: usize, nu: f64) -> CellLinear {
    let mut mass = vec![0.0; nbv * nbv];
    let mut stiffness = vec![0.0; nbv * nbv];
    let mut grad = vec![0.0; 2 * nbv * nbp];
    let mut pressure_mass = vec![0.0; nbp * nbp];
    for (q, &w) in tab.weights.iter().enumerate() {
        let phi = &tab.v_phi[q * nbv..(q + 1) * nbv];
        let dphi = &tab.v_grad[q * nbv..(q + 1) * nbv];
        let xi = &tab.p_phi[q * nbp..(q + 1) * nbp];
        for a in 0..nbv {
            for b in 0..nbv {
                mass[a * nbv + b] += w * phi[a] * phi[b];
                stiffness[a * nbv + b] += w * nu * (dphi[a][0] * dphi[b][0] + dphi[a][1] * dphi[b][1]);
            }
            for c in 0..2 {
                for b in 0..nbp {
                    grad[(c * nbv + a) * nbp + b] -= w * xi[b] * dphi[a][c];
                }
            }
        }
        for a in 0..nbp {
            for b in 0..nbp {
                pressure_mass[a * nbp + b] += w * xi[a] * xi[b];
            }
        }
    }
    CellLinear { mass, stiffness, grad, pressure_mass }
}

/// Facet matrices of the Nitsche terms on one Dirichlet facet.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetNitsche {
    /// Consistency, symmetry and both penalties, `2nbv × 2nbv`.
    pub vv: Vec<f64>,
    /// `∫ ξ_b n_c φ_a`, `2nbv × nbp`.
    pub vp: Vec<f64>,
}

/// Nitsche bilinear terms of one facet:
/// `−ν ∂_n u · ψ − ν u · ∂_n ψ + (η₁ν/h) u · ψ + (η₂/h)(u·n)(ψ·n)` and `p n · ψ`.
pub fn nitsche_boundary_terms(
    ft: &FacetTable,
    nbv: usize,
    nbp: usize,
    nu: f64,
    params: &NitscheParams,
) -> Result<FacetNitsche> {
    if ft.marker == Marker::Outflow {
        return Err(Error::Argument("Nitsche terms are not defined on outflow facets".into()));
    }
    let n = ft.normal;
    let nv2 = 2 * nbv;
    let mut vv = vec![0.0; nv2 * nv2];
    let mut vp = vec![0.0; nv2 * nbp];
    let pen1 = params.eta1 * nu / ft.h;
    let pen2 = params.eta2 / ft.h;
    for (q, &w) in ft.weights.iter().enumerate() {
        let phi = &ft.v_phi[q * nbv..(q + 1) * nbv];
        let dphi = &ft.v_grad[q * nbv..(q + 1) * nbv];
        let xi = &ft.p_phi[q * nbp..(q + 1) * nbp];
        let dn: Vec<f64> = dphi.iter().map(|g| g[0] * n[0] + g[1] * n[1]).collect();
        for a in 0..nbv {
            for b in 0..nbv {
                let diag = -nu * dn[b] * phi[a] - nu * phi[b] * dn[a] + pen1 * phi[a] * phi[b];
                let normal = pen2 * phi[a] * phi[b];
                for c in 0..2 {
                    for d in 0..2 {
                        let mut v = normal * n[c] * n[d];
                        if c == d {
                            v += diag;
                        }
                        vv[(c * nbv + a) * nv2 + d * nbv + b] += w * v;
                    }
                }
            }
            for c in 0..2 {
                for b in 0..nbp {
                    vp[(c * nbv + a) * nbp + b] += w * xi[b] * n[c] * phi[a];
                }
            }
        }
    }
    Ok(FacetNitsche { vv, vp })
}

/// Dirichlet data contributions of one Nitsche facet, so that the facet
/// residual reads `vv·u + vp·p − mom` and the divergence residual `D u − div`.
pub fn nitsche_data_load(
    ft: &FacetTable,
    nbv: usize,
    nbp: usize,
    nu: f64,
    params: &NitscheParams,
    g: &[[f64; 2]],
) -> (Vec<f64>, Vec<f64>) {
    let n = ft.normal;
    let mut mom = vec![0.0; 2 * nbv];
    let mut div = vec![0.0; nbp];
    let pen1 = params.eta1 * nu / ft.h;
    let pen2 = params.eta2 / ft.h;
    for (q, &w) in ft.weights.iter().enumerate() {
        let phi = &ft.v_phi[q * nbv..(q + 1) * nbv];
        let dphi = &ft.v_grad[q * nbv..(q + 1) * nbv];
        let xi = &ft.p_phi[q * nbp..(q + 1) * nbp];
        let gq = g[q];
        let gn = gq[0] * n[0] + gq[1] * n[1];
        for a in 0..nbv {
            let dn = dphi[a][0] * n[0] + dphi[a][1] * n[1];
            for c in 0..2 {
                mom[c * nbv + a] += w * (-nu * gq[c] * dn + pen1 * gq[c] * phi[a] + pen2 * gn * n[c] * phi[a]);
            }
        }
        for b in 0..nbp {
            div[b] -= w * gn * xi[b];
        }
    }
    (mom, div)
}

/// `∫ f · ψ` for force samples at the cell quadrature points.
pub fn cell_force_load(tab: &CellTable, nbv: usize, f: &[[f64; 2]]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * nbv];
    for (q, &w) in tab.weights.iter().enumerate() {
        let phi = &tab.v_phi[q * nbv..(q + 1) * nbv];
        for a in 0..nbv {
            for c in 0..2 {
                out[c * nbv + a] += w * f[q][c] * phi[a];
            }
        }
    }
    out
}

/// Velocity value and gradient `[[∂_x u_0, ∂_y u_0], [∂_x u_1, ∂_y u_1]]`
/// of a local coefficient vector at quadrature point `q`.
fn eval_velocity(phi: &[f64], dphi: &[[f64; 2]], u: &[f64], nbv: usize) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut val = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for c in 0..2 {
        for a in 0..nbv {
            let coef = u[c * nbv + a];
            val[c] += coef * phi[a];
            grad[c][0] += coef * dphi[a][0];
            grad[c][1] += coef * dphi[a][1];
        }
    }
    (val, grad)
}

/// `Σ_ij m_ij ∫ ((U_i · ∇) U_j) · ψ` for local velocity fields `U_i`.
pub fn cell_convection_residual(tab: &CellTable, nbv: usize, fields: &[Vec<f64>], m: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * nbv];
    let k = fields.len();
    let mut vals = vec![[0.0; 2]; k];
    let mut grads = vec![[[0.0; 2]; 2]; k];
    for (q, &w) in tab.weights.iter().enumerate() {
        let phi = &tab.v_phi[q * nbv..(q + 1) * nbv];
        let dphi = &tab.v_grad[q * nbv..(q + 1) * nbv];
        for i in 0..k {
            let (v, g) = eval_velocity(phi, dphi, &fields[i], nbv);
            vals[i] = v;
            grads[i] = g;
        }
        let mut conv = [0.0; 2];
        for i in 0..k {
            for j in 0..k {
                let mij = m[i][j];
                if mij == 0.0 {
                    continue;
                }
                for c in 0..2 {
                    conv[c] += mij * (vals[i][0] * grads[j][c][0] + vals[i][1] * grads[j][c][1]);
                }
            }
        }
        for a in 0..nbv {
            for c in 0..2 {
                out[c * nbv + a] += w * conv[c] * phi[a];
            }
        }
    }
    out
}

/// Linearized convection `C(A) δ = (δ · ∇) A + (A · ∇) δ`, `2nbv × 2nbv`.
pub fn cell_convection_matrix(tab: &CellTable, nbv: usize, a_field: &[f64]) -> Vec<f64> {
    let nv2 = 2 * nbv;
    let mut out = vec![0.0; nv2 * nv2];
    for (q, &w) in tab.weights.iter().enumerate() {
        let phi = &tab.v_phi[q * nbv..(q + 1) * nbv];
        let dphi = &tab.v_grad[q * nbv..(q + 1) * nbv];
        let (av, ag) = eval_velocity(phi, dphi, a_field, nbv);
        for a in 0..nbv {
            let wa = w * phi[a];
            for b in 0..nbv {
                let adv = av[0] * dphi[b][0] + av[1] * dphi[b][1];
                for c in 0..2 {
                    let row = (c * nbv + a) * nv2;
                    for d in 0..2 {
                        let mut v = phi[b] * ag[c][d];
                        if c == d {
                            v += adv;
                        }
                        out[row + d * nbv + b] += wa * v;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{QuadratureCache, TaylorHoodPair};
    use crate::mesh::generate_unit_square;

    fn setup() -> (TaylorHoodPair, QuadratureCache) {
        let pair = TaylorHoodPair::new(generate_unit_square(2).unwrap(), 2).unwrap();
        let cache = QuadratureCache::new(&pair).unwrap();
        (pair, cache)
    }

    #[test]
    fn penalty_scales_linearly_in_eta1() {
        let (_, cache) = setup();
        let ft = &cache.facets[0];
        let (nbv, nbp) = (cache.nbv, cache.nbp);
        let base = NitscheParams { eta1: 0.0, eta2: 0.0, mode: BcMode::Nitsche };
        let p1 = NitscheParams { eta1: 10.0, ..base };
        let p2 = NitscheParams { eta1: 20.0, ..base };
        let a0 = nitsche_boundary_terms(ft, nbv, nbp, 0.3, &base).unwrap().vv;
        let a1 = nitsche_boundary_terms(ft, nbv, nbp, 0.3, &p1).unwrap().vv;
        let a2 = nitsche_boundary_terms(ft, nbv, nbp, 0.3, &p2).unwrap().vv;
        for k in 0..a0.len() {
            let d1 = a1[k] - a0[k];
            let d2 = a2[k] - a0[k];
            assert!((d2 - 2.0 * d1).abs() <= 1e-12 * (1.0 + d1.abs()));
        }
    }

    #[test]
    fn tangential_mismatch_has_no_normal_penalty() {
        let (_, cache) = setup();
        let ft = &cache.facets[0];
        let n = ft.normal;
        let g: Vec<[f64; 2]> = ft.points.iter().map(|_| [-n[1], n[0]]).collect();
        let only2 = NitscheParams { eta1: 1e-300, eta2: 35.0, mode: BcMode::Nitsche };
        let zero2 = NitscheParams { eta2: 1e-300, ..only2 };
        let (m1, d1) = nitsche_data_load(ft, cache.nbv, cache.nbp, 1.0, &only2, &g);
        let (m2, d2) = nitsche_data_load(ft, cache.nbv, cache.nbp, 1.0, &zero2, &g);
        for (a, b) in m1.iter().zip(&m2) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(d1.iter().chain(&d2).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn outflow_facets_are_rejected() {
        let (_, cache) = setup();
        let mut ft = cache.facets[0].clone();
        ft.marker = Marker::Outflow;
        assert!(nitsche_boundary_terms(&ft, cache.nbv, cache.nbp, 1.0, &NitscheParams::default()).is_err());
    }

    #[test]
    fn invalid_penalties_are_rejected() {
        let p = NitscheParams { eta1: 0.0, ..NitscheParams::default() };
        assert!(p.validate().is_err());
        assert!(NitscheParams { eta1: 0.0, ..NitscheParams::strong() }.validate().is_ok());
        assert!(ProblemData::homogeneous(0.0).is_err());
    }
}
