use std::sync::Arc;

use bandit_lds::harness::simulate;
use bandit_lds::lds::{CostKind, LinearSystem, SystemPreset, Trajectory};
use bandit_lds::policies::{lqr_gain, Controller, ControllerContext, ControllerRegistry, ControllerSettings, StepFeedback};
use bandit_lds::rng::seeded;
use bandit_lds::sysid::{
    default_explore_steps, estimate_moments, explore, least_squares_id, recover, ExploreThenCommit, IdMethod,
    IdentificationReport, MomentEstimates, SysIdConfig, SysIdSettings,
};
use bandit_lds::Error;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn exact_moments(sys: &LinearSystem, gain: &DMatrix<f64>, k: usize) -> MomentEstimates {
    let closed = sys.a() - sys.b() * gain;
    let mut n = Vec::with_capacity(k + 1);
    let mut pow = DMatrix::<f64>::identity(sys.state_dim(), sys.state_dim());
    for _ in 0..=k {
        n.push(&pow * sys.b());
        pow = &closed * pow;
    }
    MomentEstimates::from_moments(n).unwrap()
}

fn upper_triangular() -> LinearSystem {
    LinearSystem::new(DMatrix::from_row_slice(2, 2, &[0.9, 0.5, 0.0, 0.8]), DMatrix::identity(2, 2)).unwrap()
}

fn zeros(n: usize, len: usize) -> Vec<DVector<f64>> {
    vec![DVector::zeros(n); len]
}

#[test]
fn analytic_moments_recover_every_preset() {
    for preset in SystemPreset::ALL {
        let sys = preset.build();
        for gain in [DMatrix::zeros(sys.input_dim(), sys.state_dim()), lqr_gain(sys.a(), sys.b()).unwrap().gain] {
            let closed = LinearSystem::new(sys.a() - sys.b() * &gain, sys.b().clone()).unwrap();
            let k = closed.controllability_index().unwrap();
            let id = recover(&exact_moments(&sys, &gain, k), &gain).unwrap();
            assert!((&id.a - sys.a()).norm() < 1e-10, "{}", preset.name());
            assert!((&id.b - sys.b()).norm() < 1e-10, "{}", preset.name());
            assert_eq!(id.method, IdMethod::Moments);
        }
    }
}

#[test]
fn square_inputs_with_index_one_collapse() {
    // n = m, k = 1: A = N_1 N_0^{-1} + N_0 K
    let sys = upper_triangular();
    let gain = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.1, 0.3]);
    let est = exact_moments(&sys, &gain, 1);
    let direct = &est.n[1] * est.n[0].clone().try_inverse().unwrap() + &est.n[0] * &gain;
    let id = recover(&est, &gain).unwrap();
    assert!((&id.a - &direct).norm() < 1e-12);
    assert!((&id.a - sys.a()).norm() < 1e-12);
}

#[test]
fn moment_layout_stacks_columns() {
    let n: Vec<DMatrix<f64>> = (0..3).map(|j| DMatrix::from_element(2, 1, j as f64)).collect();
    let est = MomentEstimates::from_moments(n).unwrap();
    assert_eq!(est.k(), 2);
    assert_eq!(est.c0, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]));
    assert_eq!(est.c1, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]));
    assert!(MomentEstimates::from_moments(vec![DMatrix::zeros(2, 1)]).is_err());
}

#[test]
fn constant_excitation_on_zero_states_gives_zero_moments() {
    let states = zeros(3, 11);
    let xis = vec![DVector::from_element(2, 1.0); 10];
    let est = estimate_moments(&states, &xis, 2).unwrap();
    assert!(est.n.iter().all(|n| n.iter().all(|&x| x == 0.0)));
}

#[test]
fn moment_estimator_matches_direct_sum() {
    let mut rng = seeded(71);
    let states: Vec<DVector<f64>> = (0..21).map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0))).collect();
    let xis: Vec<DVector<f64>> = (0..20).map(|_| DVector::from_fn(1, |_, _| rng.random_range(-1.0..1.0))).collect();
    let est = estimate_moments(&states, &xis, 3).unwrap();
    for j in 0..=3 {
        for r in 0..2 {
            let sum: f64 = (0..17).map(|t| states[t + j + 1][r] * xis[t][0]).sum();
            assert!((est.n[j][(r, 0)] - sum / 17.0).abs() < 1e-14);
        }
    }
    assert!(estimate_moments(&states[..20], &xis, 3).is_err());
    assert!(estimate_moments(&states, &xis[..3], 3).is_err());
    assert!(estimate_moments(&states, &xis, 0).is_err());
}

#[test]
fn estimation_error_shrinks_with_exploration() {
    let sys = upper_triangular();
    let gain = DMatrix::zeros(2, 2);
    let error = |t0: usize| -> f64 {
        (0..5u64)
            .map(|s| {
                let cfg = SysIdConfig { explore_steps: t0, explore_gain: gain.clone(), k: 1 };
                let mut wr = seeded(300 + s);
                let w: Vec<DVector<f64>> =
                    (0..t0).map(|_| DVector::from_fn(2, |_, _| 0.1 * wr.sample::<f64, _>(StandardNormal))).collect();
                let (traj, xis) = explore(&sys, &cfg, &w, CostKind::Quadratic, &mut seeded(400 + s)).unwrap();
                let id = recover(&estimate_moments(&traj.states, &xis, 1).unwrap(), &gain).unwrap();
                (&id.a - sys.a()).norm()
            })
            .sum::<f64>()
            / 5.0
    };
    let e = [error(1_000), error(10_000), error(100_000)];
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    assert!(e[0] / e[2] > 5.0, "{e:?}");
}

#[test]
fn excitation_statistics() {
    let sys = SystemPreset::Sparse5x3.build();
    let t0 = 10_000;
    let cfg = SysIdConfig { explore_steps: t0, explore_gain: lqr_gain(sys.a(), sys.b()).unwrap().gain, k: 2 };
    let (_, xis) = explore(&sys, &cfg, &zeros(5, t0), CostKind::Quadratic, &mut seeded(72)).unwrap();
    let tol = 4.0 / (t0 as f64).sqrt();
    let mut second = DMatrix::<f64>::zeros(3, 3);
    let mut lagged = DMatrix::<f64>::zeros(3, 3);
    for t in 0..t0 {
        assert!(xis[t].iter().all(|&x| x == 1.0 || x == -1.0));
        second += &xis[t] * xis[t].transpose();
        if t + 1 < t0 {
            lagged += &xis[t + 1] * xis[t].transpose();
        }
    }
    second /= t0 as f64;
    lagged /= (t0 - 1) as f64;
    assert!((second - DMatrix::<f64>::identity(3, 3)).amax() < tol);
    assert!(lagged.amax() < tol);
}

#[test]
fn pure_input_dynamics_echo_excitation() {
    let sys = LinearSystem::new(DMatrix::zeros(3, 3), DMatrix::identity(3, 3)).unwrap();
    let cfg = SysIdConfig { explore_steps: 200, explore_gain: DMatrix::zeros(3, 3), k: 1 };
    let (traj, xis) = explore(&sys, &cfg, &zeros(3, 200), CostKind::Quadratic, &mut seeded(73)).unwrap();
    assert_eq!(traj.states.len(), 201);
    for t in 0..200 {
        assert_eq!(traj.states[t + 1], xis[t]);
    }
}

#[test]
fn input_moment_converges_on_upper_triangular() {
    let sys = upper_triangular();
    let t0 = 100_000;
    let cfg = SysIdConfig { explore_steps: t0, explore_gain: DMatrix::zeros(2, 2), k: 1 };
    let (traj, xis) = explore(&sys, &cfg, &zeros(2, t0), CostKind::Quadratic, &mut seeded(74)).unwrap();
    let est = estimate_moments(&traj.states, &xis, 1).unwrap();
    assert!((&est.n[0] - sys.b()).norm() < 0.05);
}

fn traj_from(states: Vec<DVector<f64>>, inputs: Vec<DVector<f64>>) -> Trajectory {
    let mut traj = Trajectory::with_initial_state(states[0].clone());
    traj.states = states;
    traj.costs = vec![0.0; inputs.len()];
    traj.disturbances = vec![DVector::zeros(traj.states[0].len()); inputs.len()];
    traj.inputs = inputs;
    traj
}

#[test]
fn least_squares_recovers_noiseless_dynamics() {
    let sys = SystemPreset::Sparse5x3.build();
    let mut rng = seeded(75);
    let mut states = vec![DVector::zeros(5)];
    let mut inputs = Vec::new();
    for t in 0..200 {
        let u = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        states.push(sys.step(&states[t], &u, &DVector::zeros(5)).unwrap());
        inputs.push(u);
    }
    let id = least_squares_id(&traj_from(states, inputs)).unwrap();
    assert!((&id.a - sys.a()).norm() < 1e-8);
    assert!((&id.b - sys.b()).norm() < 1e-8);
    assert!(!id.fallback);
    assert_eq!(id.method, IdMethod::LeastSquares);
}

#[test]
fn least_squares_degenerate_cases() {
    let sys = SystemPreset::DoubleIntegrator.build();
    let u = DVector::from_element(1, 1.0);
    let x1 = sys.step(&DVector::zeros(2), &u, &DVector::zeros(2)).unwrap();
    let one = least_squares_id(&traj_from(vec![DVector::zeros(2), x1], vec![u])).unwrap();
    assert!(one.fallback);
    let ridge = 1.0 / (1.0 + bandit_lds::sysid::RIDGE);
    assert!((&one.b - sys.b() * ridge).norm() < 1e-12);

    let flat = least_squares_id(&traj_from(zeros(2, 11), zeros(1, 10))).unwrap();
    assert!(flat.fallback);
    assert_eq!(flat.a.norm() + flat.b.norm(), 0.0);

    assert!(matches!(
        least_squares_id(&Trajectory::with_initial_state(DVector::zeros(2))),
        Err(Error::InsufficientData(_))
    ));
}

#[test]
fn ill_conditioned_moments_are_rejected() {
    let n = vec![DMatrix::from_row_slice(2, 1, &[1.0, 0.0]), DMatrix::from_row_slice(2, 1, &[2.0, 0.0])];
    let est = MomentEstimates::from_moments(n).unwrap();
    assert!(matches!(recover(&est, &DMatrix::zeros(1, 2)), Err(Error::Controllability(_))));
    assert!(matches!(recover(&est, &DMatrix::zeros(2, 2)), Err(Error::Shape(_))));
}

#[test]
fn default_budget_formula() {
    for t in [10usize, 1000, 6000, 100_000] {
        let tf = t as f64;
        assert_eq!(default_explore_steps(t), (tf.powf(2.0 / 3.0) * tf.ln()).ceil() as usize);
    }
    assert_eq!(default_explore_steps(1000), 691);
    assert_eq!(SysIdSettings::default().explore_steps_for(1000), 691);
    assert_eq!(SysIdSettings { explore_steps: Some(7), ..Default::default() }.explore_steps_for(1000), 7);
}

#[test]
fn exploration_stays_bounded_on_stable_preset() {
    let sys = SystemPreset::ScaledDoubleIntegrator.build();
    let cfg = SysIdConfig { explore_steps: 5_000, explore_gain: DMatrix::zeros(1, 2), k: 2 };
    let mut wr = seeded(76);
    let w: Vec<DVector<f64>> = (0..5_000).map(|_| DVector::from_fn(2, |_, _| wr.sample::<f64, _>(StandardNormal))).collect();
    let (traj, _) = explore(&sys, &cfg, &w, CostKind::Quadratic, &mut seeded(77)).unwrap();
    assert!(traj.states.iter().all(|x| x.norm() < 100.0));
}

#[test]
fn exploration_errors() {
    let unstable = LinearSystem::new(DMatrix::from_element(1, 1, 3.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
    let cfg = SysIdConfig { explore_steps: 100, explore_gain: DMatrix::zeros(1, 1), k: 1 };
    let err = explore(&unstable, &cfg, &zeros(1, 100), CostKind::Quadratic, &mut seeded(78)).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }));

    let short = explore(&unstable, &cfg, &zeros(1, 50), CostKind::Quadratic, &mut seeded(78)).unwrap_err();
    assert!(matches!(short, Error::InsufficientData(_)));
    let bad_k = SysIdConfig { k: 100, ..cfg.clone() };
    assert!(explore(&unstable, &bad_k, &zeros(1, 100), CostKind::Quadratic, &mut seeded(78)).is_err());
    let bad_gain = SysIdConfig { explore_gain: DMatrix::zeros(2, 1), ..cfg };
    assert!(matches!(
        explore(&unstable, &bad_gain, &zeros(1, 100), CostKind::Quadratic, &mut seeded(78)),
        Err(Error::Shape(_))
    ));
}

fn context(sys: &LinearSystem, horizon: usize, t0: usize, seed: u64) -> ControllerContext {
    let mut settings = ControllerSettings::default();
    settings.sysid.explore_steps = Some(t0);
    ControllerContext { nominal: sys.clone(), cost: CostKind::Quadratic, horizon, settings, loss_bound: None, seed }
}

fn committed_bpc(reg: &ControllerRegistry, ctx: &ControllerContext, method: IdMethod) -> ExploreThenCommit {
    let reg = reg.clone();
    let factory = Arc::new(move |c: &ControllerContext| reg.create("bpc", c));
    ExploreThenCommit::new("bpc-sysid", ctx, method, factory).unwrap()
}

#[test]
fn commit_phase_matches_a_fresh_controller() {
    let sys = SystemPreset::ScaledDoubleIntegrator.build();
    let (horizon, t0) = (400, 150);
    let ctx = context(&sys, horizon, t0, 5);
    let reg = ControllerRegistry::with_builtins();
    let mut etc = committed_bpc(&reg, &ctx, IdMethod::LeastSquares);
    let w: Vec<DVector<f64>> = (0..=horizon).map(|t| DVector::from_element(2, 0.3 * (t as f64 / 7.0).sin())).collect();
    let traj = simulate(&sys, &mut etc, &w, CostKind::Quadratic).unwrap();

    let id = etc.identified().unwrap().clone();
    let mut explored = Trajectory::with_initial_state(DVector::zeros(2));
    explored.states = traj.states[..=t0].to_vec();
    explored.inputs = traj.inputs[..t0].to_vec();
    explored.costs = traj.costs[..t0].to_vec();
    assert_eq!(least_squares_id(&explored).unwrap(), id);

    let mut inner_ctx = ctx.clone();
    inner_ctx.nominal = id.to_system().unwrap();
    inner_ctx.horizon = horizon - t0;
    inner_ctx.loss_bound = Some(traj.costs[..t0].iter().cloned().fold(1.0, f64::max));
    let mut fresh = reg.create("bpc", &inner_ctx).unwrap();
    for t in t0..=horizon {
        let u = fresh.act(t - t0, &traj.states[t]).unwrap();
        assert_eq!(u, traj.inputs[t], "t = {t}");
        let mut fb = StepFeedback::new(t - t0, &traj.states[t], &traj.inputs[t], traj.costs[t], &traj.states[t + 1]);
        if t == t0 {
            fb.recorded_disturbance = Some(&traj.states[t + 1]);
        }
        fresh.observe(&fb).unwrap();
    }
    let (a, b) = (etc.snapshot(), fresh.snapshot());
    assert_eq!(a.tensor, b.tensor);
    assert_eq!(a.params["inner"], b.params);
    assert_eq!(etc.inner().unwrap().snapshot().tensor, b.tensor);
}

#[test]
fn recorded_disturbance_error_is_bounded_by_model_error() {
    let sys = SystemPreset::ScaledDoubleIntegrator.build();
    let (horizon, t0) = (3000, 2000);
    let ctx = context(&sys, horizon, t0, 8);
    let reg = ControllerRegistry::with_builtins();
    let mut etc = committed_bpc(&reg, &ctx, IdMethod::Moments);
    let mut wr = seeded(79);
    let w: Vec<DVector<f64>> =
        (0..=horizon).map(|_| DVector::from_fn(2, |_, _| 0.5 * wr.sample::<f64, _>(StandardNormal))).collect();
    let mut x = DVector::zeros(2);
    for t in 0..=horizon {
        let u = etc.act(t, &x).unwrap();
        let next = sys.step(&x, &u, &w[t]).unwrap();
        etc.observe(&StepFeedback::new(t, &x, &u, CostKind::Quadratic.eval(&x, &u), &next)).unwrap();
        if t > t0 {
            let id = etc.identified().unwrap();
            let w_hat = etc.last_disturbance().unwrap();
            let bound = (&id.a - sys.a()).norm() * x.norm() + (&id.b - sys.b()).norm() * u.norm();
            assert!((w_hat - &w[t]).norm() <= bound + 1e-9, "t = {t}");
        }
        x = next;
        assert!(x.norm() < 1e3);
    }
}

#[test]
fn identification_report_round_trips() {
    let sys = SystemPreset::ScaledDoubleIntegrator.build();
    let mut ctx = context(&sys, 300, 120, 9);
    ctx.settings.bpc.delta_scale = 0.3;
    let reg = ControllerRegistry::with_builtins();
    let mut etc = committed_bpc(&reg, &ctx, IdMethod::Moments);
    assert!(etc.snapshot().params["identification"].is_null());
    let w = zeros(2, 301);
    simulate(&sys, &mut etc, &w, CostKind::Quadratic).unwrap();
    let snap = etc.snapshot();
    assert_eq!(snap.algorithm, "bpc-sysid");
    let report: IdentificationReport = serde_json::from_value(snap.params["identification"].clone()).unwrap();
    assert_eq!(report.method, IdMethod::Moments);
    assert_eq!(report.explore_steps, 120);
    assert_eq!(report.k, Some(2));
    let id = etc.identified().unwrap();
    assert_eq!(report.a_error, Some((&id.a - sys.a()).norm()));
    let json = serde_json::to_string(&report).unwrap();
    assert!(json.contains("\"method\":\"moments\""));
    assert_eq!(serde_json::from_str::<IdentificationReport>(&json).unwrap(), report);
}

#[test]
fn commit_configuration_errors() {
    let sys = SystemPreset::DoubleIntegrator.build();
    let reg = ControllerRegistry::with_builtins();
    let too_long = context(&sys, 100, 100, 1);
    assert!(reg.create("bpc-sysid-moments", &too_long).err().unwrap().is_config());
    let mut bad_k = context(&sys, 100, 2, 1);
    bad_k.settings.sysid.controllability_index = Some(2);
    assert!(reg.create("bpc-sysid-moments", &bad_k).is_err());
    assert!(reg.create("bpc-sysid-lsq", &bad_k).is_ok());
    let mut bad_gain = context(&sys, 100, 50, 1);
    bad_gain.settings.sysid.explore_gain = Some(vec![vec![1.0]]);
    assert!(reg.create("lqr-sysid-lsq", &bad_gain).err().unwrap().is_config());

    let mut etc = committed_bpc(&reg, &context(&sys, 100, 20, 1), IdMethod::LeastSquares);
    assert!(matches!(etc.act(3, &DVector::zeros(2)), Err(Error::State(_))));
}
