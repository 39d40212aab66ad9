//! Compressed-row matrices, restarted GMRES, the block Schur preconditioner
//! and small dense utilities.

use std::fmt::Write as _;
use std::ops::Range;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given per-row column sets (sorted and deduplicated here).
    pub fn from_pattern(nrows: usize, ncols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.last().is_none_or(|&c| c < ncols));
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    /// Sums duplicate entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        let mut m = Self::from_pattern(nrows, ncols, rows);
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern(n, n, (0..n).map(|i| vec![i]).collect());
        m.values.fill(1.0);
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::identity(d.len());
        m.values.copy_from_slice(d);
        m
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let m = if n == 0 { 0 } else { a[0].len() };
        let mut t = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, m, &t)
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Storage position of entry `(i, j)`.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.col_idx[start..self.row_ptr[i + 1]]
            .binary_search(&j)
            .ok()
            .map(|k| start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.find(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds to an entry that must exist in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        match self.find(i, j) {
            Some(k) => self.values[k] += v,
            None => panic!("entry ({i}, {j}) is not in the sparsity pattern"),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self { values: vec![0.0; self.values.len()], ..self.clone() }
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// `self += alpha * other` for matrices sharing a pattern.
    pub fn axpy(&mut self, alpha: f64, other: &CsrMatrix) {
        assert!(self.same_pattern(other), "axpy needs identical patterns");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// Sparse sum with the union pattern.
    pub fn plus(&self, other: &CsrMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "shape mismatch");
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for m in [self, other] {
            for i in 0..m.nrows {
                let (c, v) = m.row(i);
                t.extend(c.iter().zip(v).map(|(&j, &x)| (i, j, x)));
            }
        }
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Sparse product `self · other`.
    pub fn multiply(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows, "shape mismatch");
        let mut t = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut seen = vec![false; other.ncols];
        let mut used: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                for (&j, &b) in cb.iter().zip(vb) {
                    if !seen[j] {
                        seen[j] = true;
                        used.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &used {
                t.push((i, j, acc[j]));
                acc[j] = 0.0;
                seen[j] = false;
            }
            used.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, &t)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                t.push((self.col_idx[k], i, self.values[k]));
            }
        }
        let mut rows = vec![Vec::new(); self.ncols];
        for &(i, j, _) in &t {
            rows[i].push(j);
        }
        let mut m = Self::from_pattern(self.ncols, self.nrows, rows);
        for (i, j, v) in t {
            let k = m.find(i, j).unwrap();
            m.values[k] = v;
        }
        m
    }

    /// Copy of the block `rows × cols`, keeping stored entries (including zeros).
    pub fn submatrix(&self, rows: Range<usize>, cols: Range<usize>) -> Self {
        let mut pattern = Vec::with_capacity(rows.len());
        let mut vals = Vec::new();
        for i in rows.clone() {
            let mut r = Vec::new();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if cols.contains(&j) {
                    r.push(j - cols.start);
                    vals.push(self.values[k]);
                }
            }
            pattern.push(r);
        }
        let mut m = Self::from_pattern(rows.len(), cols.len(), pattern);
        m.values = vals;
        m
    }

    /// Replaces the listed rows by those of the identity.
    pub fn with_identity_rows(&self, idx: &[usize]) -> Self {
        let mut mark = vec![false; self.nrows];
        for &i in idx {
            mark[i] = true;
        }
        let mut pattern = Vec::with_capacity(self.nrows);
        let mut vals = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            if mark[i] {
                pattern.push(vec![i]);
                vals.push(1.0);
            } else {
                pattern.push(self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]].to_vec());
                vals.extend_from_slice(&self.values[self.row_ptr[i]..self.row_ptr[i + 1]]);
            }
        }
        let mut m = Self::from_pattern(self.nrows, self.ncols, pattern);
        m.values = vals;
        m
    }

    /// Replaces the listed rows and columns by those of the identity.
    pub fn with_identity_rows_cols(&self, idx: &[usize]) -> Self {
        let mut mark = vec![false; self.nrows.max(self.ncols)];
        for &i in idx {
            mark[i] = true;
        }
        let mut pattern = Vec::with_capacity(self.nrows);
        let mut vals = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let mut r = Vec::new();
            if mark[i] {
                r.push(i);
                vals.push(1.0);
            } else {
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.col_idx[k];
                    if !mark[j] {
                        r.push(j);
                        vals.push(self.values[k]);
                    }
                }
            }
            pattern.push(r);
        }
        let mut m = Self::from_pattern(self.nrows, self.ncols, pattern);
        m.values = vals;
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.ncols]; self.nrows];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                a[i][self.col_idx[k]] += self.values[k];
            }
        }
        a
    }

    fn to_faer_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] += self.values[k];
            }
        }
        m
    }

    fn to_faer_sparse(&self) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                t.push(Triplet::new(i, self.col_idx[k], self.values[k]));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::Factorization(format!("{e:?}")))
    }

    /// Matrix Market coordinate text (1-based, 17 significant digits).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let _ = writeln!(s, "{} {} {:.16e}", i + 1, self.col_idx[k] + 1, self.values[k]);
            }
        }
        s
    }

    pub fn from_matrix_market(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('%')
        });
        let parse_err = |line: usize, message: &str| Error::Parse { line: line + 1, message: message.into() };
        let (ln, header) = lines.next().ok_or_else(|| parse_err(0, "missing size line"))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(ln, "bad size line")))
            .collect::<Result<_>>()?;
        if h.len() != 3 {
            return Err(parse_err(ln, "size line needs rows, cols, nnz"));
        }
        let mut t = Vec::with_capacity(h[2]);
        for (ln, l) in lines {
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.len() != 3 {
                return Err(parse_err(ln, "entry needs row, column, value"));
            }
            let i: usize = tok[0].parse().map_err(|_| parse_err(ln, "bad row index"))?;
            let j: usize = tok[1].parse().map_err(|_| parse_err(ln, "bad column index"))?;
            let v: f64 = tok[2].parse().map_err(|_| parse_err(ln, "bad value"))?;
            if i == 0 || j == 0 || i > h[0] || j > h[1] {
                return Err(parse_err(ln, "index out of range"));
            }
            t.push((i - 1, j - 1, v));
        }
        if t.len() != h[2] {
            return Err(Error::Parse { line: 0, message: format!("expected {} entries, found {}", h[2], t.len()) });
        }
        Ok(Self::from_triplets(h[0], h[1], &t))
    }
}

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y)
    }
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64>;
}

/// Sparse LU factorization backed by faer.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SparseLu {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Argument("LU needs a square matrix".into()));
        }
        let lu = a
            .to_faer_sparse()?
            .sp_lu()
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self { n: a.nrows, lu })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        let x: Vec<f64> = (0..self.n).map(|i| rhs[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("singular matrix (non-finite solution)".into()));
        }
        Ok(x)
    }
}

impl Preconditioner for SparseLu {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.solve(r).unwrap_or_else(|_| r.to_vec())
    }
}

/// Direct sparse solve of `A x = b`.
pub fn sparse_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    SparseLu::new(a)?.solve(b)
}

/// Dense LU solve with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::Argument("dense solve needs a square system".into()));
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[i][j]);
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let x = m.partial_piv_lu().solve(rhs);
    let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization("singular dense matrix".into()));
    }
    Ok(out)
}

/// Spectral condition number `σ_max / σ_min` by dense SVD.
pub fn condition_number(a: &CsrMatrix, cap: usize) -> Result<f64> {
    if a.nrows != a.ncols {
        return Err(Error::Argument("condition number needs a square matrix".into()));
    }
    if a.nrows > cap {
        return Err(Error::Capability(format!(
            "dimension {} exceeds the dense SVD cap {cap}",
            a.nrows
        )));
    }
    let s = a
        .to_faer_dense()
        .singular_values()
        .map_err(|e| Error::Factorization(format!("SVD failed: {e:?}")))?;
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionerKind {
    None,
    BlockSchur,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_iterations: usize,
    pub restart: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            max_iterations: 2000,
            restart: 200,
            preconditioner: PreconditionerKind::BlockSchur,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) || self.restart == 0 || self.max_iterations == 0 {
            return Err(Error::Argument("GMRES tolerances, restart and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Right-preconditioned restarted GMRES with modified Gram–Schmidt.
///
/// Convergence is measured on the true residual `‖b − A x‖`.
pub fn gmres(
    a: &dyn LinearOperator,
    b: &[f64],
    precond: Option<&dyn Preconditioner>,
    config: &SolverConfig,
) -> Result<GmresOutcome> {
    config.validate()?;
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Argument(format!("right-hand side has length {} but operator has {n}", b.len())));
    }
    let target = (config.rtol * norm(b)).max(config.atol);
    let pre = |v: &[f64]| match precond {
        Some(p) => p.apply(v),
        None => v.to_vec(),
    };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut beta = norm(&r);
    let mut iterations = 0;
    let mut tmp = vec![0.0; n];
    if beta <= target {
        return Ok(GmresOutcome { x, iterations, residual: beta });
    }
    while iterations < config.max_iterations {
        let m = config.restart.min(config.max_iterations - iterations).max(1);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m {
            let zk = pre(&v[k]);
            a.apply(&zk, &mut tmp);
            z.push(zk);
            let mut w = tmp.clone();
            for i in 0..=k {
                h[i][k] = dot(&w, &v[i]);
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= h[i][k] * vj;
                }
            }
            h[k + 1][k] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            let hkk1 = h[k + 1][k];
            if d == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / d;
                sn[k] = hkk1 / d;
            }
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            if g[k].abs() <= target || hkk1 <= 1e-14 * d.max(f64::MIN_POSITIVE) {
                break;
            }
            v.push(w.iter().map(|wi| wi / hkk1).collect());
        }
        // back substitution on the k × k triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&z[j]) {
                *xi += yj * zi;
            }
        }
        a.apply(&x, &mut tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        let new_beta = norm(&r);
        if new_beta <= target {
            return Ok(GmresOutcome { x, iterations, residual: new_beta });
        }
        if !new_beta.is_finite() || new_beta >= beta * (1.0 - 1e-13) {
            return Err(Error::LinearSolver { iterations, residual: new_beta, best: x });
        }
        beta = new_beta;
    }
    Err(Error::LinearSolver { iterations, residual: beta, best: x })
}

/// Pressure Schur complement approximation of one saddle stage.
#[derive(Debug, Clone)]
pub enum SchurApprox {
    /// A given matrix `Σ̂`, factorized once.
    Matrix(CsrMatrix),
    /// `Σ̂_d = −D diag(F)⁻¹ G` built from the stage blocks. With a correction
    /// `C` the action is `Σ̂⁻¹ = Σ̂_d⁻¹ + C⁻¹`.
    Diagonal { correction: Option<CsrMatrix> },
}

/// One saddle sub-problem `(F, G; D, 0)` of the block preconditioner.
#[derive(Debug, Clone)]
pub struct SaddleStage {
    /// Unknown block range of the velocity and pressure variables.
    pub velocity: Range<usize>,
    pub pressure: Range<usize>,
    /// Equation rows paired with them.
    pub momentum_rows: Range<usize>,
    pub divergence_rows: Range<usize>,
    pub schur: SchurApprox,
}

/// Row operation `row[target] += factor · row[source]` applied to the
/// matrix and to every residual before the stages are solved.
#[derive(Debug, Clone, PartialEq)]
pub struct RowCombination {
    pub target: Range<usize>,
    pub source: Range<usize>,
    pub factor: f64,
}

/// Block structure of a saddle-point Newton matrix: stages are solved in
/// order, each with the residual updated by previously solved unknowns.
#[derive(Debug, Clone)]
pub struct SaddleLayout {
    pub row_ops: Vec<RowCombination>,
    pub stages: Vec<SaddleStage>,
}

struct StageFactors {
    stage: SaddleStage,
    f_lu: SparseLu,
    s_lu: SparseLu,
    correction: Option<SparseLu>,
    g: CsrMatrix,
}

/// Block Gauss–Seidel over saddle stages, each applied as an upper-triangular
/// Schur preconditioner `z_p = Σ̂⁻¹ r_p`, `z_v = F⁻¹ (r_v − G z_p)`.
pub struct BlockSchurPreconditioner {
    matrix: CsrMatrix,
    row_ops: Vec<RowCombination>,
    stages: Vec<StageFactors>,
}

fn combine_rows(m: &CsrMatrix, ops: &[RowCombination]) -> CsrMatrix {
    let mut out = m.clone();
    for op in ops {
        let n = op.target.len();
        let mut t = Vec::new();
        for k in 0..n {
            let (cols, vals) = out.row(op.source.start + k);
            t.extend(cols.iter().zip(vals).map(|(&c, &v)| (op.target.start + k, c, op.factor * v)));
        }
        let add = CsrMatrix::from_triplets(out.nrows, out.ncols, &t);
        out = out.plus(&add);
    }
    out
}

/// `−D diag(F)⁻¹ G`, with unit diagonal where a row vanishes.
fn diagonal_schur(f: &CsrMatrix, g: &CsrMatrix, d: &CsrMatrix) -> Result<CsrMatrix> {
    let mut inv = Vec::with_capacity(f.nrows);
    for i in 0..f.nrows {
        let v = f.get(i, i);
        if v == 0.0 {
            return Err(Error::Factorization(format!("velocity block has a zero diagonal at row {i}")));
        }
        inv.push(-1.0 / v);
    }
    let s = d.multiply(&CsrMatrix::from_diagonal(&inv)).multiply(g);
    let empty: Vec<usize> = (0..s.nrows).filter(|&i| s.row(i).1.iter().all(|v| *v == 0.0)).collect();
    Ok(s.with_identity_rows_cols(&empty))
}

impl BlockSchurPreconditioner {
    pub fn new(matrix: &CsrMatrix, layout: &SaddleLayout) -> Result<Self> {
        let matrix = combine_rows(matrix, &layout.row_ops);
        let mut stages = Vec::with_capacity(layout.stages.len());
        for st in &layout.stages {
            let f = matrix.submatrix(st.momentum_rows.clone(), st.velocity.clone());
            let g = matrix.submatrix(st.momentum_rows.clone(), st.pressure.clone());
            let f_lu = SparseLu::new(&f)
                .map_err(|e| Error::Factorization(format!("velocity block: {e}")))?;
            let (schur, correction) = match &st.schur {
                SchurApprox::Matrix(m) => (m.clone(), None),
                SchurApprox::Diagonal { correction } => {
                    let d = matrix.submatrix(st.divergence_rows.clone(), st.velocity.clone());
                    (diagonal_schur(&f, &g, &d)?, correction.as_ref())
                }
            };
            let s_lu = SparseLu::new(&schur)
                .map_err(|e| Error::Factorization(format!("Schur approximation: {e}")))?;
            let correction = correction
                .map(SparseLu::new)
                .transpose()
                .map_err(|e| Error::Factorization(format!("Schur correction: {e}")))?;
            stages.push(StageFactors { stage: st.clone(), f_lu, s_lu, correction, g });
        }
        Ok(Self { matrix, row_ops: layout.row_ops.clone(), stages })
    }

    fn stage_solve(&self, sf: &StageFactors, rhs: &[f64]) -> Result<Vec<f64>> {
        let st = &sf.stage;
        let rp = &rhs[st.divergence_rows.clone()];
        let mut zp = sf.s_lu.solve(rp)?;
        if let Some(c) = &sf.correction {
            for (a, b) in zp.iter_mut().zip(c.solve(rp)?) {
                *a += b;
            }
        }
        let gz = sf.g.matvec(&zp);
        let rv: Vec<f64> = rhs[st.momentum_rows.clone()].iter().zip(&gz).map(|(a, b)| a - b).collect();
        let zv = sf.f_lu.solve(&rv)?;
        let mut part = vec![0.0; rhs.len()];
        part[st.velocity.clone()].copy_from_slice(&zv);
        part[st.pressure.clone()].copy_from_slice(&zp);
        Ok(part)
    }

    /// Solves the stages in order, updating `z` and the residual `rhs`.
    fn sweep(&self, z: &mut [f64], rhs: &mut [f64]) -> Result<()> {
        for (k, sf) in self.stages.iter().enumerate() {
            let part = self.stage_solve(sf, rhs)?;
            if k + 1 == self.stages.len() {
                for (zi, pi) in z.iter_mut().zip(&part) {
                    *zi += pi;
                }
                break;
            }
            let s = self.matrix.matvec(&part);
            for ((zi, pi), (ri, si)) in z.iter_mut().zip(&part).zip(rhs.iter_mut().zip(&s)) {
                *zi += pi;
                *ri -= si;
            }
        }
        Ok(())
    }

    /// One forward block Gauss–Seidel sweep over the stages.
    pub fn try_apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut z = vec![0.0; r.len()];
        let mut rhs = r.to_vec();
        for op in &self.row_ops {
            for k in 0..op.target.len() {
                rhs[op.target.start + k] += op.factor * rhs[op.source.start + k];
            }
        }
        self.sweep(&mut z, &mut rhs)?;
        Ok(z)
    }
}

impl Preconditioner for BlockSchurPreconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.try_apply(r).unwrap_or_else(|_| r.to_vec())
    }
}
