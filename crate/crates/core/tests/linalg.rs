use std::sync::Arc;

use galcol::assembly::{condense_dirichlet, BlockSystem, NsProblem, Scheme};
use galcol::fem::TaylorHoodPair;
use galcol::forms::{NitscheParams, ProblemData, VectorField};
use galcol::linalg::{
    gmres, sparse_solve, BlockSchurPreconditioner, CsrMatrix, PreconditionerKind, SaddleLayout, SaddleStage,
    SchurApprox, SolverConfig,
};
use galcol::mesh::{generate_channel_cylinder, generate_unit_square, ChannelGeometry, Mesh};
use galcol::stepper::NsModel;
use galcol::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n).map(|i| (0..m).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
}

fn sparse_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(prop_oneof![3 => Just(0.0), 1 => -5.0f64..5.0], cols),
        rows,
    )
}

proptest! {
    #[test]
    fn multiply_matches_dense(a in sparse_matrix(5, 4), b in sparse_matrix(4, 6)) {
        let p = CsrMatrix::from_dense(&a).multiply(&CsrMatrix::from_dense(&b)).to_dense();
        let e = dense_product(&a, &b);
        for (pr, er) in p.iter().zip(&e) {
            for (x, y) in pr.iter().zip(er) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn plus_matches_dense(a in sparse_matrix(4, 5), b in sparse_matrix(4, 5)) {
        let p = CsrMatrix::from_dense(&a).plus(&CsrMatrix::from_dense(&b)).to_dense();
        for i in 0..4 {
            for j in 0..5 {
                prop_assert_eq!(p[i][j], a[i][j] + b[i][j]);
            }
        }
    }

    #[test]
    fn transpose_is_an_involution(a in sparse_matrix(3, 6)) {
        let m = CsrMatrix::from_dense(&a);
        prop_assert_eq!(m.transpose().transpose().to_dense(), a);
    }
}

fn random_dominant(n: usize, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        for _ in 0..4 {
            t.push((i, rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
        }
        t.push((i, i, 6.0));
    }
    CsrMatrix::from_triplets(n, n, &t)
}

fn plain(rtol: f64) -> SolverConfig {
    SolverConfig { rtol, preconditioner: PreconditionerKind::None, ..Default::default() }
}

#[test]
fn gmres_matches_direct_solve() {
    for seed in 0..5 {
        let a = random_dominant(80, seed);
        let b: Vec<f64> = (0..80).map(|i| (i as f64 * 0.37).sin()).collect();
        let direct = sparse_solve(&a, &b).unwrap();
        let out = gmres(&a, &b, None, &SolverConfig { restart: 10, ..plain(1e-12) }).unwrap();
        for (x, y) in out.x.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn gmres_reports_failure_with_best_iterate() {
    let a = random_dominant(60, 7);
    let b = vec![1.0; 60];
    let cfg = SolverConfig { max_iterations: 2, restart: 2, ..plain(1e-14) };
    match gmres(&a, &b, None, &cfg) {
        Err(Error::LinearSolver { best, residual, .. }) => {
            assert_eq!(best.len(), 60);
            assert!(residual < (60f64).sqrt());
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(gmres(&a, &[1.0], None, &plain(1e-8)).is_err());
    assert!(gmres(&a, &b, None, &SolverConfig { restart: 0, ..plain(1e-8) }).is_err());
}

#[test]
fn exact_schur_needs_one_iteration() {
    // (I 0; 0 σM): zero coupling, Schur approximation equal to the pressure block
    let (nv, np) = (6, 4);
    let mut t: Vec<(usize, usize, f64)> = (0..nv).map(|i| (i, i, 1.0)).collect();
    let mp = CsrMatrix::from_dense(&[
        vec![4.0, 1.0, 0.0, 0.0],
        vec![1.0, 4.0, 1.0, 0.0],
        vec![0.0, 1.0, 4.0, 1.0],
        vec![0.0, 0.0, 1.0, 4.0],
    ])
    .scaled(0.3);
    for i in 0..np {
        let (cols, vals) = mp.row(i);
        t.extend(cols.iter().zip(vals).map(|(&c, &v)| (nv + i, nv + c, v)));
    }
    let a = CsrMatrix::from_triplets(nv + np, nv + np, &t);
    let layout = SaddleLayout {
        row_ops: Vec::new(),
        stages: vec![SaddleStage {
            velocity: 0..nv,
            pressure: nv..nv + np,
            momentum_rows: 0..nv,
            divergence_rows: nv..nv + np,
            schur: SchurApprox::Matrix(mp),
        }],
    };
    let pre = BlockSchurPreconditioner::new(&a, &layout).unwrap();
    let b: Vec<f64> = (0..nv + np).map(|i| 1.0 + i as f64).collect();
    let out = gmres(&a, &b, Some(&pre), &plain(1e-12)).unwrap();
    assert_eq!(out.iterations, 1);
    let r: Vec<f64> = a.matvec(&out.x).iter().zip(&b).map(|(x, y)| x - y).collect();
    assert!(r.iter().all(|v| v.abs() < 1e-11));
}

fn flow_data(nu: f64) -> ProblemData {
    let g: VectorField = Arc::new(|x, t| ([x[1] * (0.41 - x[1]) * (1.0 + t), 0.0], [x[1] * (0.41 - x[1]), 0.0]));
    let f: VectorField = Arc::new(|x, _| ([x[1], -x[0]], [0.0, 0.0]));
    ProblemData::new(nu, f, g).unwrap()
}

/// Condensed Newton matrix of one slab at a random state, with its layout.
fn newton_matrix(mesh: Mesh, params: NitscheParams, scheme: Scheme, nu: f64, tau: f64) -> (CsrMatrix, SaddleLayout) {
    let pair = TaylorHoodPair::new(mesh, 2).unwrap();
    let model = NsModel::new(NsProblem::new(pair, flow_data(nu), params).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = model.problem.slot_dim();
    let known: Vec<Vec<f64>> = (0..scheme.known_slots()).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let sys = model.system(scheme, 0.0, tau, &known).unwrap();
    let x: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let block = BlockSystem { matrix: sys.jacobian(&x), residual: sys.residual(&x), rhs: vec![1.0; sys.dim()], offsets: vec![0, sys.dim()] };
    let cond = condense_dirichlet(&block, sys.constraints()).unwrap();
    (cond.matrix, sys.saddle_layout().unwrap().clone())
}

fn compare(matrix: &CsrMatrix, layout: &SaddleLayout) -> (usize, Option<usize>) {
    let b: Vec<f64> = (0..matrix.nrows).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
    let direct = sparse_solve(matrix, &b).unwrap();
    let cfg = SolverConfig { max_iterations: 1000, ..Default::default() };
    let pre = BlockSchurPreconditioner::new(matrix, layout).unwrap();
    let with = gmres(matrix, &b, Some(&pre), &cfg).unwrap();
    let scale = direct.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let err = with.x.iter().zip(&direct).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(err <= 1e-6 * scale, "error {err:e} against direct solution (scale {scale:e})");
    let without = gmres(matrix, &b, None, &SolverConfig { preconditioner: PreconditionerKind::None, ..cfg }).ok();
    (with.iterations, without.map(|o| o.iterations))
}

#[test]
fn preconditioner_reduces_iterations() {
    let cases = [
        (generate_unit_square(4).unwrap(), NitscheParams::default(), Scheme::Cgp1, 0.01, 0.05),
        (generate_unit_square(4).unwrap(), NitscheParams::strong(), Scheme::Gcc13, 0.01, 0.05),
        (generate_channel_cylinder(&ChannelGeometry::dfg(), 0).unwrap(), NitscheParams::default(), Scheme::Gcc13, 0.001, 0.01),
        (generate_channel_cylinder(&ChannelGeometry::dfg(), 0).unwrap(), NitscheParams::strong(), Scheme::Cgp1, 0.001, 0.01),
    ];
    for (mesh, params, scheme, nu, tau) in cases {
        let (m, layout) = newton_matrix(mesh, params, scheme, nu, tau);
        let (with, without) = compare(&m, &layout);
        if let Some(w) = without {
            assert!(with < w, "{scheme:?}: {with} preconditioned vs {w} plain");
        }
    }
}
