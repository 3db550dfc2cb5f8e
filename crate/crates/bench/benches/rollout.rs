//! Rollout cost with and without sensitivity propagation, and the
//! finite-difference gradient it replaces.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;
use senstune_core::sensprop::assemble_gradient;
use senstune_core::types::layout::quadrotor as q;
use senstune_core::verify::fd_gradient;
use senstune_core::{
    rollout, DubinsCar, DubinsCurve, InitialCondition, L1Config, LossSpec, ParamVector, Quadrotor,
    QuadrotorCircle, QuadrotorParams, RolloutOptions, Scenario, SimConfig, SystemModel, Trajectory,
};

fn quad_gains() -> ParamVector {
    let mut theta = DVector::zeros(q::P);
    for (g, r) in [16.0, 5.6, 8.81, 2.54]
        .iter()
        .zip([q::K_P, q::K_V, q::K_R, q::K_OMEGA])
    {
        theta.rows_mut(r.start, r.len()).fill(*g);
    }
    theta
}

fn rollouts(c: &mut Criterion) {
    let car = DubinsCar::default();
    let quad = Quadrotor::new(QuadrotorParams::default()).unwrap();
    let car_loss = LossSpec::position(car.position_indices());
    let quad_loss = LossSpec::position(quad.position_indices());
    let sim = SimConfig {
        initial_condition: InitialCondition::AtRest,
        ..SimConfig::graph_consistent(0.01, 10.0)
    };
    let curve = DubinsCurve::test_set().remove(0);
    let circle = QuadrotorCircle::default();
    let l1 = L1Config::default();
    let car_theta = DVector::from_element(4, 5.0);
    let quad_theta = quad_gains();

    let cases: [(
        &str,
        &dyn SystemModel,
        &dyn Trajectory,
        &LossSpec,
        &ParamVector,
    ); 2] = [
        ("car", &car, &curve, &car_loss, &car_theta),
        ("quadrotor", &quad, &circle, &quad_loss, &quad_theta),
    ];
    let mut group = c.benchmark_group("rollout_10s");
    group.sample_size(20);
    for (name, model, trajectory, loss, theta) in cases {
        for (variant, l1) in [("nominal", None), ("l1", Some(&l1))] {
            let scenario = Scenario {
                model,
                trajectory,
                loss,
                sim: &sim,
                l1,
            };
            group.bench_function(
                BenchmarkId::new(format!("{name}_{variant}"), "gradient"),
                |b| {
                    b.iter(|| {
                        let record = rollout(&scenario, theta, RolloutOptions::default()).unwrap();
                        assemble_gradient(&record).unwrap()
                    })
                },
            );
        }
        let scenario = Scenario {
            model,
            trajectory,
            loss,
            sim: &sim,
            l1: None,
        };
        group.bench_function(
            BenchmarkId::new(format!("{name}_nominal"), "finite_difference"),
            |b| b.iter(|| fd_gradient(&scenario, theta, None, 1e-6).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, rollouts);
criterion_main!(benches);
