//! Global assembly of the spatial operators, the per-slab residuals and the
//! block Newton matrices of both time schemes.
//!
//! Unknown ordering: velocity component-major (`c * nv + dof`), then pressure.
//! A GCC¹(3) slab solves `x = (V2, P2, V3, P3)`, a cGP(1) slab `x = (V1, P1)`.

use std::collections::HashMap;
use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{QuadratureCache, TaylorHoodPair};
use crate::forms::{
    cell_convection_matrix, cell_convection_residual, cell_force_load, cell_linear,
    nitsche_boundary_terms, nitsche_data_load, sample, BcMode, NitscheParams, ProblemData, TimeSample,
};
use crate::linalg::{CsrMatrix, RowCombination, SaddleLayout, SaddleStage, SchurApprox};
use crate::mesh::Marker;
use crate::time_kernel::coupling_table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Gcc13,
    Cgp1,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Gcc13 => "gcc13",
            Scheme::Cgp1 => "cgp1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gcc13" => Some(Scheme::Gcc13),
            "cgp1" => Some(Scheme::Cgp1),
            _ => None,
        }
    }

    /// Temporal coefficients per interval (known and unknown).
    pub fn slots(self) -> usize {
        match self {
            Scheme::Gcc13 => 4,
            Scheme::Cgp1 => 2,
        }
    }

    /// Temporal coefficients copied from the previous interval.
    pub fn known_slots(self) -> usize {
        self.slots() / 2
    }
}

/// Temporal coefficient vectors of one time slab. Slots 0/1 hold value and
/// τ-scaled derivative at `t0`, slots 2/3 the same at `t0 + tau`; cGP(1) uses
/// slots 0/1 for the values at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalState {
    pub t0: f64,
    pub tau: f64,
    pub slots: Vec<Vec<f64>>,
}

/// Sparse Newton matrix, residual `q` and right-hand side `d = −q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    pub matrix: CsrMatrix,
    pub residual: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Start indices of the unknown blocks plus the total size.
    pub offsets: Vec<usize>,
}

impl BlockSystem {
    pub fn block_range(&self, b: usize) -> Range<usize> {
        self.offsets[b]..self.offsets[b + 1]
    }

    pub fn block(&self, r: usize, c: usize) -> CsrMatrix {
        self.matrix.submatrix(self.block_range(r), self.block_range(c))
    }

    /// Saddle sub-blocks `(F_i, B_iᵀ; −B_i, 0)` of a GCC¹(3) system, with
    /// `S1 = (rows 1–2, cols V2 P2)`, `S2 = (rows 1–2, cols V3 P3)` and
    /// `S3 = (rows 3–4, cols V2 P2)`. A cGP(1) system has the single view `S1`.
    pub fn submatrix_views(&self) -> Vec<CsrMatrix> {
        let o = &self.offsets;
        if o.len() == 3 {
            return vec![self.matrix.clone()];
        }
        vec![
            self.matrix.submatrix(o[0]..o[2], o[0]..o[2]),
            self.matrix.submatrix(o[0]..o[2], o[2]..o[4]),
            self.matrix.submatrix(o[2]..o[4], o[0]..o[2]),
        ]
    }
}

/// Eliminates constrained unknowns: known corrections `δ_i = d_i` are moved
/// to the right-hand side, then rows and columns become identity rows.
pub fn condense_dirichlet(system: &BlockSystem, constraints: &[usize]) -> Result<BlockSystem> {
    let n = system.matrix.nrows;
    if let Some(&i) = constraints.iter().find(|&&i| i >= n) {
        return Err(Error::Argument(format!("constraint on DoF {i} but the system has {n} unknowns")));
    }
    if constraints.is_empty() {
        return Ok(system.clone());
    }
    let mut known = vec![0.0; n];
    let mut is_c = vec![false; n];
    for &i in constraints {
        known[i] = system.rhs[i];
        is_c[i] = true;
    }
    let shift = system.matrix.matvec(&known);
    let mut rhs = system.rhs.clone();
    for i in 0..n {
        if !is_c[i] {
            rhs[i] -= shift[i];
        }
    }
    Ok(BlockSystem {
        matrix: system.matrix.with_identity_rows_cols(constraints),
        residual: system.residual.clone(),
        rhs,
        offsets: system.offsets.clone(),
    })
}

/// Global block pattern with placement maps for each stored block.
#[derive(Debug, Clone)]
pub struct BlockPattern {
    pub offsets: Vec<usize>,
    pub matrix: CsrMatrix,
    maps: HashMap<(usize, usize), Vec<usize>>,
}

impl BlockPattern {
    pub fn new(sizes: &[usize], blocks: &[(usize, usize, &CsrMatrix)]) -> Self {
        let mut offsets = vec![0];
        for s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        let n = *offsets.last().unwrap();
        let mut rows = vec![Vec::new(); n];
        for &(r, c, m) in blocks {
            for i in 0..m.nrows {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    rows[offsets[r] + i].push(offsets[c] + m.col_idx[k]);
                }
            }
        }
        let matrix = CsrMatrix::from_pattern(n, n, rows);
        let mut maps = HashMap::new();
        for &(r, c, m) in blocks {
            let mut map = Vec::with_capacity(m.nnz());
            for i in 0..m.nrows {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    map.push(matrix.find(offsets[r] + i, offsets[c] + m.col_idx[k]).unwrap());
                }
            }
            maps.insert((r, c), map);
        }
        Self { offsets, matrix, maps }
    }

    /// `Σ α · block` placed at the listed block positions.
    pub fn compose(&self, terms: &[(usize, usize, &CsrMatrix, f64)]) -> CsrMatrix {
        let mut out = self.matrix.zeros_like();
        for &(r, c, m, alpha) in terms {
            let map = &self.maps[&(r, c)];
            debug_assert_eq!(map.len(), m.nnz());
            for (k, &pos) in map.iter().enumerate() {
                out.values[pos] += alpha * m.values[k];
            }
        }
        out
    }
}

/// State-independent global matrices.
#[derive(Debug, Clone)]
pub struct SpatialOperators {
    /// Vector mass matrix (`J × J`).
    pub mass: CsrMatrix,
    /// Viscous stiffness plus Nitsche velocity terms (`J × J`).
    pub stiffness: CsrMatrix,
    /// Pressure gradient `−(p, ∇·ψ)` plus Nitsche `⟨p n, ψ⟩` (`J × M`).
    pub grad: CsrMatrix,
    /// Divergence, `−gradᵀ` (`M × J`).
    pub div: CsrMatrix,
    /// Pressure mass matrix (`M × M`).
    pub pressure_mass: CsrMatrix,
}

/// Navier–Stokes problem on a Taylor–Hood pair with fixed data and BC mode.
pub struct NsProblem {
    pub pair: TaylorHoodPair,
    pub cache: QuadratureCache,
    pub data: ProblemData,
    pub params: NitscheParams,
    pub ops: SpatialOperators,
    /// Velocity unknowns on Dirichlet facets (indices into `0..J`).
    pub dirichlet_dofs: Vec<usize>,
    /// True when no outflow boundary fixes the pressure constant.
    pub pin_pressure: bool,
    /// Evaluate cell kernels concurrently (results are scattered in cell order).
    pub parallel: bool,
    gcc_pattern: BlockPattern,
    cgp_pattern: BlockPattern,
}

fn velocity_indices(pair: &TaylorHoodPair, cell: usize) -> Vec<usize> {
    let nv = pair.nv();
    let map = &pair.velocity.dof_map[cell];
    (0..2).flat_map(|c| map.iter().map(move |&g| c * nv + g)).collect()
}

fn scatter_dense(m: &mut CsrMatrix, rows: &[usize], cols: &[usize], local: &[f64]) {
    let nc = cols.len();
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            let v = local[i * nc + j];
            if v != 0.0 {
                m.add(r, c, v);
            }
        }
    }
}

fn cell_pattern(n: usize, ncols: usize, cells: usize, rows: impl Fn(usize) -> Vec<usize>, cols: impl Fn(usize) -> Vec<usize>) -> CsrMatrix {
    let mut pattern = vec![Vec::new(); n];
    for c in 0..cells {
        let cs = cols(c);
        for r in rows(c) {
            pattern[r].extend_from_slice(&cs);
        }
    }
    CsrMatrix::from_pattern(n, ncols, pattern)
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

impl NsProblem {
    pub fn new(pair: TaylorHoodPair, data: ProblemData, params: NitscheParams) -> Result<Self> {
        params.validate()?;
        if !(data.nu > 0.0) {
            return Err(Error::Argument("viscosity must be positive".into()));
        }
        let cache = QuadratureCache::new(&pair)?;
        let (nbv, nbp) = (cache.nbv, cache.nbp);
        let (j, m) = (pair.j(), pair.m());
        let ncell = pair.mesh.num_cells();
        let pmap = |c: usize| pair.pressure.dof_map[c].clone();
        let vv = cell_pattern(j, j, ncell, |c| velocity_indices(&pair, c), |c| velocity_indices(&pair, c));
        let vp = cell_pattern(j, m, ncell, |c| velocity_indices(&pair, c), pmap);
        let pp = cell_pattern(m, m, ncell, pmap, pmap);

        let mut mass = vv.zeros_like();
        let mut stiffness = vv.zeros_like();
        let mut grad = vp.zeros_like();
        let mut pressure_mass = pp.zeros_like();
        for c in 0..ncell {
            let lin = cell_linear(&cache.cells[c], nbv, nbp, data.nu);
            let vidx = velocity_indices(&pair, c);
            let pidx = &pair.pressure.dof_map[c];
            let vmap = &pair.velocity.dof_map[c];
            for comp in 0..2 {
                let rows: Vec<usize> = vmap.iter().map(|&g| comp * pair.nv() + g).collect();
                scatter_dense(&mut mass, &rows, &rows, &lin.mass);
                scatter_dense(&mut stiffness, &rows, &rows, &lin.stiffness);
            }
            scatter_dense(&mut grad, &vidx, pidx, &lin.grad);
            scatter_dense(&mut pressure_mass, pidx, pidx, &lin.pressure_mass);
        }
        if params.mode == BcMode::Nitsche {
            for ft in cache.facets.iter().filter(|f| f.marker.is_dirichlet()) {
                let nit = nitsche_boundary_terms(ft, nbv, nbp, data.nu, &params)?;
                let vidx = velocity_indices(&pair, ft.cell);
                scatter_dense(&mut stiffness, &vidx, &vidx, &nit.vv);
                scatter_dense(&mut grad, &vidx, &pair.pressure.dof_map[ft.cell], &nit.vp);
            }
        }
        let div = grad.transpose().scaled(-1.0);
        let ops = SpatialOperators { mass, stiffness, grad, div, pressure_mass };

        let nv = pair.nv();
        let scalar_dofs = pair.velocity.boundary_dofs(&pair.mesh, Marker::is_dirichlet);
        let dirichlet_dofs: Vec<usize> = (0..2).flat_map(|c| scalar_dofs.iter().map(move |&g| c * nv + g)).collect();
        let pin_pressure = !pair.mesh.facets.iter().any(|f| f.marker == Marker::Outflow);

        let gcc_pattern = BlockPattern::new(
            &[j, m, j, m],
            &[
                (0, 0, &vv), (0, 1, &ops.grad), (0, 2, &vv), (0, 3, &ops.grad),
                (1, 0, &ops.div), (1, 2, &ops.div),
                (2, 0, &vv), (2, 1, &ops.grad), (2, 2, &vv),
                (3, 0, &ops.div),
            ],
        );
        let cgp_pattern = BlockPattern::new(&[j, m], &[(0, 0, &vv), (0, 1, &ops.grad), (1, 0, &ops.div)]);
        Ok(Self {
            pair,
            cache,
            data,
            params,
            ops,
            dirichlet_dofs,
            pin_pressure,
            parallel: cfg!(feature = "parallel"),
            gcc_pattern,
            cgp_pattern,
        })
    }

    pub fn j(&self) -> usize {
        self.pair.j()
    }

    pub fn m(&self) -> usize {
        self.pair.m()
    }

    pub fn slot_dim(&self) -> usize {
        self.pair.slot_dim()
    }

    /// Unknowns solved per interval.
    pub fn dofs_per_interval(&self, scheme: Scheme) -> usize {
        scheme.known_slots() * self.slot_dim()
    }

    fn local_velocity(&self, cell: usize, v: &[f64]) -> Vec<f64> {
        velocity_indices(&self.pair, cell).into_iter().map(|g| v[g]).collect()
    }

    fn map_cells<T: Send>(&self, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        let n = self.pair.mesh.num_cells();
        #[cfg(feature = "parallel")]
        if self.parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Momentum load `(f, ψ)` plus Nitsche data terms, and divergence data
    /// load, for data sampled at time `t` (values or time derivatives).
    pub fn data_load(&self, t: f64, which: TimeSample) -> (Vec<f64>, Vec<f64>) {
        let (nbv, nbp) = (self.cache.nbv, self.cache.nbp);
        let mut mom = vec![0.0; self.j()];
        let mut div = vec![0.0; self.m()];
        let locals = self.map_cells(|c| {
            let tab = &self.cache.cells[c];
            let f: Vec<[f64; 2]> = tab.points.iter().map(|&x| sample(&self.data.force, x, t, which)).collect();
            cell_force_load(tab, nbv, &f)
        });
        for (c, local) in locals.iter().enumerate() {
            for (g, v) in velocity_indices(&self.pair, c).into_iter().zip(local) {
                mom[g] += v;
            }
        }
        if self.params.mode == BcMode::Nitsche {
            for ft in self.cache.facets.iter().filter(|f| f.marker.is_dirichlet()) {
                let g: Vec<[f64; 2]> = ft.points.iter().map(|&x| sample(&self.data.dirichlet, x, t, which)).collect();
                let (lm, ld) = nitsche_data_load(ft, nbv, nbp, self.data.nu, &self.params, &g);
                for (gi, v) in velocity_indices(&self.pair, ft.cell).into_iter().zip(&lm) {
                    mom[gi] += v;
                }
                for (&gi, v) in self.pair.pressure.dof_map[ft.cell].iter().zip(&ld) {
                    div[gi] += v;
                }
            }
        }
        (mom, div)
    }

    /// `Σ_ij m_ij ((V_i · ∇) V_j, ψ)` for global velocity vectors.
    pub fn convection_residual(&self, fields: &[&[f64]], m: &[Vec<f64>]) -> Vec<f64> {
        let nbv = self.cache.nbv;
        let locals = self.map_cells(|c| {
            let loc: Vec<Vec<f64>> = fields.iter().map(|f| self.local_velocity(c, f)).collect();
            cell_convection_residual(&self.cache.cells[c], nbv, &loc, m)
        });
        let mut out = vec![0.0; self.j()];
        for (c, local) in locals.iter().enumerate() {
            for (g, v) in velocity_indices(&self.pair, c).into_iter().zip(local) {
                out[g] += v;
            }
        }
        out
    }

    /// Linearized convection matrix `C(A)` on the velocity pattern.
    pub fn convection_matrix(&self, a: &[f64]) -> CsrMatrix {
        let nbv = self.cache.nbv;
        let locals = self.map_cells(|c| cell_convection_matrix(&self.cache.cells[c], nbv, &self.local_velocity(c, a)));
        let mut out = self.ops.mass.zeros_like();
        for (c, local) in locals.iter().enumerate() {
            let idx = velocity_indices(&self.pair, c);
            scatter_dense(&mut out, &idx, &idx, local);
        }
        out
    }

    /// Slab-constant data vector `L` such that `q(x) = A(x) − L`.
    pub fn slab_load(&self, scheme: Scheme, t0: f64, tau: f64) -> Vec<f64> {
        let (j, m) = (self.j(), self.m());
        match scheme {
            Scheme::Gcc13 => {
                let s = coupling_table().s;
                let t1 = t0 + tau;
                let samples = [
                    (t0, TimeSample::Value, 1.0),
                    (t0, TimeSample::Rate, tau),
                    (t1, TimeSample::Value, 1.0),
                    (t1, TimeSample::Rate, tau),
                ];
                let mut out = vec![0.0; 2 * (j + m)];
                for (l, &(t, which, scale)) in samples.iter().enumerate() {
                    let (mom, div) = self.data_load(t, which);
                    axpy(&mut out[..j], tau * s[l] * scale, &mom);
                    axpy(&mut out[j..j + m], tau * s[l] * scale, &div);
                    if l == 2 {
                        out[j + m..2 * j + m].copy_from_slice(&mom);
                        out[2 * j + m..].copy_from_slice(&div);
                    }
                }
                out
            }
            Scheme::Cgp1 => {
                let mut out = vec![0.0; j + m];
                let a = 0.5 / 3f64.sqrt();
                for theta in [0.5 - a, 0.5 + a] {
                    let (mom, div) = self.data_load(t0 + theta * tau, TimeSample::Value);
                    axpy(&mut out[..j], 0.5 * tau, &mom);
                    axpy(&mut out[j..], 0.5 * tau, &div);
                }
                out
            }
        }
    }

    fn split<'a>(&self, slot: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        slot.split_at(self.j())
    }

    /// Unconstrained residual `q(x)` of one slab, with the known slots and
    /// slab load given.
    pub fn residual(&self, scheme: Scheme, tau: f64, known: &[Vec<f64>], x: &[f64], load: &[f64]) -> Vec<f64> {
        let (j, m) = (self.j(), self.m());
        let ops = &self.ops;
        let mut q = vec![0.0; x.len()];
        match scheme {
            Scheme::Gcc13 => {
                let table = coupling_table();
                let s = table.s;
                let mt: Vec<Vec<f64>> = table.m.iter().map(|r| r.to_vec()).collect();
                let slots: [&[f64]; 4] = [&known[0], &known[1], &x[..j + m], &x[j + m..]];
                let mut vbar = vec![0.0; j];
                let mut pbar = vec![0.0; m];
                for l in 0..4 {
                    let (v, p) = self.split(slots[l]);
                    axpy(&mut vbar, s[l], v);
                    axpy(&mut pbar, s[l], p);
                }
                let (v0, _) = self.split(slots[0]);
                let (v2, p2) = self.split(slots[2]);
                let (v3, _) = self.split(slots[3]);
                let vels: Vec<&[f64]> = slots.iter().map(|sl| &sl[..j]).collect();
                let conv_int = self.convection_residual(&vels, &mt);
                let conv_col = self.convection_residual(&[v2], &[vec![1.0]]);
                // q1
                let dv: Vec<f64> = v2.iter().zip(v0).map(|(a, b)| a - b).collect();
                let q1 = &mut q[..j];
                ops.mass.matvec_into(&dv, q1);
                axpy(q1, tau, &ops.stiffness.matvec(&vbar));
                axpy(q1, tau, &ops.grad.matvec(&pbar));
                axpy(q1, tau, &conv_int);
                // q2
                let q2 = ops.div.matvec(&vbar);
                for (qi, v) in q[j..j + m].iter_mut().zip(&q2) {
                    *qi = tau * v;
                }
                // q3
                let q3 = &mut q[j + m..2 * j + m];
                ops.mass.matvec_into(v3, q3);
                q3.iter_mut().for_each(|v| *v /= tau);
                axpy(q3, 1.0, &ops.stiffness.matvec(v2));
                axpy(q3, 1.0, &ops.grad.matvec(p2));
                axpy(q3, 1.0, &conv_col);
                // q4
                ops.div.matvec_into(v2, &mut q[2 * j + m..]);
            }
            Scheme::Cgp1 => {
                let (v0, p0) = self.split(&known[0]);
                let (v1, p1) = self.split(x);
                let vsum: Vec<f64> = v0.iter().zip(v1).map(|(a, b)| a + b).collect();
                let psum: Vec<f64> = p0.iter().zip(p1).map(|(a, b)| a + b).collect();
                let dv: Vec<f64> = v1.iter().zip(v0).map(|(a, b)| a - b).collect();
                let mt = vec![vec![1.0 / 3.0, 1.0 / 6.0], vec![1.0 / 6.0, 1.0 / 3.0]];
                let conv = self.convection_residual(&[v0, v1], &mt);
                let q1 = &mut q[..j];
                ops.mass.matvec_into(&dv, q1);
                axpy(q1, 0.5 * tau, &ops.stiffness.matvec(&vsum));
                axpy(q1, 0.5 * tau, &ops.grad.matvec(&psum));
                axpy(q1, tau, &conv);
                let q2 = ops.div.matvec(&vsum);
                for (qi, v) in q[j..].iter_mut().zip(&q2) {
                    *qi = 0.5 * tau * v;
                }
            }
        }
        for (qi, li) in q.iter_mut().zip(load) {
            *qi -= li;
        }
        q
    }

    /// Unconstrained Jacobian `∂q/∂x` of one slab.
    pub fn jacobian(&self, scheme: Scheme, tau: f64, known: &[Vec<f64>], x: &[f64]) -> CsrMatrix {
        let (j, m) = (self.j(), self.m());
        let ops = &self.ops;
        match scheme {
            Scheme::Gcc13 => {
                let table = coupling_table();
                let (s, mt) = (table.s, table.m);
                let slots: [&[f64]; 4] = [&known[0], &known[1], &x[..j + m], &x[j + m..]];
                let mut a = vec![0.0; j];
                let mut b = vec![0.0; j];
                for l in 0..4 {
                    axpy(&mut a, mt[2][l], &slots[l][..j]);
                    axpy(&mut b, mt[3][l], &slots[l][..j]);
                }
                let ca = self.convection_matrix(&a);
                let cb = self.convection_matrix(&b);
                let cv = self.convection_matrix(&slots[2][..j]);
                let (s2, s3) = (s[2], s[3]);
                self.gcc_pattern.compose(&[
                    (0, 0, &ops.mass, 1.0),
                    (0, 0, &ops.stiffness, tau * s2),
                    (0, 0, &ca, tau),
                    (0, 1, &ops.grad, tau * s2),
                    (0, 2, &ops.stiffness, tau * s3),
                    (0, 2, &cb, tau),
                    (0, 3, &ops.grad, tau * s3),
                    (1, 0, &ops.div, tau * s2),
                    (1, 2, &ops.div, tau * s3),
                    (2, 0, &ops.stiffness, 1.0),
                    (2, 0, &cv, 1.0),
                    (2, 1, &ops.grad, 1.0),
                    (2, 2, &ops.mass, 1.0 / tau),
                    (3, 0, &ops.div, 1.0),
                ])
            }
            Scheme::Cgp1 => {
                let mut a = vec![0.0; j];
                axpy(&mut a, 1.0 / 6.0, &known[0][..j]);
                axpy(&mut a, 1.0 / 3.0, &x[..j]);
                let ca = self.convection_matrix(&a);
                self.cgp_pattern.compose(&[
                    (0, 0, &ops.mass, 1.0),
                    (0, 0, &ops.stiffness, 0.5 * tau),
                    (0, 0, &ca, tau),
                    (0, 1, &ops.grad, 0.5 * tau),
                    (1, 0, &ops.div, 0.5 * tau),
                ])
            }
        }
    }

    pub fn offsets(&self, scheme: Scheme) -> Vec<usize> {
        match scheme {
            Scheme::Gcc13 => self.gcc_pattern.offsets.clone(),
            Scheme::Cgp1 => self.cgp_pattern.offsets.clone(),
        }
    }

    /// Unconstrained block system at the current iterate of a slab.
    pub fn assemble(&self, scheme: Scheme, state: &IntervalState) -> Result<BlockSystem> {
        let k = scheme.known_slots();
        if state.slots.len() != scheme.slots() || state.slots.iter().any(|s| s.len() != self.slot_dim()) {
            return Err(Error::Argument("interval state does not match the problem dimensions".into()));
        }
        let x: Vec<f64> = state.slots[k..].concat();
        let known = &state.slots[..k];
        let load = self.slab_load(scheme, state.t0, state.tau);
        let residual = self.residual(scheme, state.tau, known, &x, &load);
        let rhs = residual.iter().map(|v| -v).collect();
        Ok(BlockSystem {
            matrix: self.jacobian(scheme, state.tau, known, &x),
            residual,
            rhs,
            offsets: self.offsets(scheme),
        })
    }

    /// Constrained unknowns of a slab with their prescribed values:
    /// strong Dirichlet values (and τ-scaled rates) and pressure pins.
    pub fn constraints(&self, scheme: Scheme, t0: f64, tau: f64) -> (Vec<usize>, Vec<f64>) {
        let (j, m) = (self.j(), self.m());
        let nv = self.pair.nv();
        let t1 = t0 + tau;
        let mut idx = Vec::new();
        let mut val = Vec::new();
        let blocks: Vec<(usize, TimeSample, f64)> = match scheme {
            Scheme::Gcc13 => vec![(0, TimeSample::Value, 1.0), (j + m, TimeSample::Rate, tau)],
            Scheme::Cgp1 => vec![(0, TimeSample::Value, 1.0)],
        };
        for &(off, which, scale) in &blocks {
            if self.params.mode == BcMode::Strong {
                for &d in &self.dirichlet_dofs {
                    let (c, g) = (d / nv, d % nv);
                    let x = self.pair.velocity.dof_points[g];
                    idx.push(off + d);
                    val.push(scale * sample(&self.data.dirichlet, x, t1, which)[c]);
                }
            }
            if self.pin_pressure {
                idx.push(off + j);
                val.push(0.0);
            }
        }
        (idx, val)
    }

    /// Block preconditioner layout for a slab. GCC¹(3) pairs the Galerkin
    /// rows with `(V2, P3)` and the collocation rows with `(V3, P2)`, using
    /// `q2 − τ s₂ q4 = τ s₃ D V3` as divergence row of the second stage.
    pub fn saddle_layout(&self, scheme: Scheme, tau: f64) -> SaddleLayout {
        let (j, m) = (self.j(), self.m());
        let nu = self.data.nu;
        let mass = |scale: f64| {
            let s = self.ops.pressure_mass.scaled(scale);
            if self.pin_pressure {
                s.with_identity_rows_cols(&[0])
            } else {
                s
            }
        };
        match scheme {
            Scheme::Gcc13 => {
                let s = coupling_table().s;
                SaddleLayout {
                    row_ops: vec![RowCombination { target: j..j + m, source: 2 * j + m..2 * (j + m), factor: -tau * s[2] }],
                    stages: vec![
                        SaddleStage {
                            velocity: 0..j,
                            pressure: 2 * j + m..2 * (j + m),
                            momentum_rows: 0..j,
                            divergence_rows: 2 * j + m..2 * (j + m),
                            schur: SchurApprox::Diagonal { correction: Some(mass(s[3] / (s[2] * nu))) },
                        },
                        SaddleStage {
                            velocity: j + m..2 * j + m,
                            pressure: j..j + m,
                            momentum_rows: j + m..2 * j + m,
                            divergence_rows: j..j + m,
                            schur: SchurApprox::Diagonal { correction: None },
                        },
                    ],
                }
            }
            Scheme::Cgp1 => SaddleLayout {
                row_ops: Vec::new(),
                stages: vec![SaddleStage {
                    velocity: 0..j,
                    pressure: j..j + m,
                    momentum_rows: 0..j,
                    divergence_rows: j..j + m,
                    schur: SchurApprox::Diagonal { correction: Some(mass(0.5 * tau / nu)) },
                }],
            },
        }
    }

    /// Shifts the pressure of every slot to zero mean when the pressure is
    /// only determined up to a constant.
    pub fn normalize_pressure(&self, slot: &mut [f64]) {
        if !self.pin_pressure {
            return;
        }
        let j = self.j();
        let p = &mut slot[j..];
        let ones = vec![1.0; p.len()];
        let area: f64 = self.ops.pressure_mass.matvec(&ones).iter().sum();
        let mean: f64 = self.ops.pressure_mass.matvec(p).iter().sum::<f64>() / area;
        p.iter_mut().for_each(|v| *v -= mean);
    }

    /// Weak divergence `(∇·v, ξ_k)` of a slot for every pressure basis function.
    pub fn weak_divergence(&self, slot: &[f64]) -> Vec<f64> {
        self.ops.div.matvec(&slot[..self.j()])
    }
}
