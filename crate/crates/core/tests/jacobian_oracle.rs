use std::sync::Arc;

use galcol::assembly::{NsProblem, Scheme};
use galcol::fem::TaylorHoodPair;
use galcol::forms::{NitscheParams, ProblemData, VectorField};
use galcol::mesh::{generate_channel_cylinder, generate_unit_square, ChannelGeometry, Mesh};
use galcol::stepper::NsModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(nu: f64) -> ProblemData {
    let force: VectorField = Arc::new(|x, t| {
        ([x[1] * (1.0 + t), -x[0] * x[0] + t], [x[1], 1.0])
    });
    let g: VectorField = Arc::new(|x, t| {
        ([x[1] * x[1] * (1.0 + t), x[0] * t], [x[1] * x[1], x[0]])
    });
    ProblemData::new(nu, force, g).unwrap()
}

fn model(mesh: Mesh, params: NitscheParams) -> NsModel {
    let pair = TaylorHoodPair::new(mesh, 2).unwrap();
    NsModel::new(NsProblem::new(pair, data(0.37), params).unwrap())
}

/// Central-difference check of every Jacobian column on random states.
fn check(model: &NsModel, scheme: Scheme, states: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.problem.slot_dim();
    let tau = 0.1;
    for _ in 0..states {
        let known: Vec<Vec<f64>> = (0..scheme.known_slots())
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let sys = model.system(scheme, 0.3, tau, &known).unwrap();
        let x: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jac = sys.jacobian(&x).to_dense();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let scale = jac.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        for k in 0..sys.dim() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let (qp, qm) = (sys.residual(&xp), sys.residual(&xm));
            for i in 0..sys.dim() {
                let fd = (qp[i] - qm[i]) / (2.0 * h);
                worst = worst.max((fd - jac[i][k]).abs());
            }
        }
        assert!(worst <= 1e-6 * scale.max(1.0), "Jacobian mismatch {worst:e} (scale {scale:e})");
    }
}

#[test]
fn jacobian_matches_finite_differences_nitsche() {
    let m = model(generate_unit_square(2).unwrap(), NitscheParams::default());
    check(&m, Scheme::Gcc13, 10, 1);
    check(&m, Scheme::Cgp1, 10, 2);
}

#[test]
fn jacobian_matches_finite_differences_strong() {
    let m = model(generate_unit_square(2).unwrap(), NitscheParams::strong());
    check(&m, Scheme::Gcc13, 10, 3);
    check(&m, Scheme::Cgp1, 10, 4);
}

#[test]
fn jacobian_matches_finite_differences_with_outflow() {
    let mesh = generate_channel_cylinder(&ChannelGeometry::dfg(), 0).unwrap();
    let m = model(mesh, NitscheParams::default());
    check(&m, Scheme::Gcc13, 1, 5);
}
