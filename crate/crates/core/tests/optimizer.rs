//! Batch projected gradient descent on the car.

use nalgebra::dvector;

use senstune_core::optim::{tune, StopReason, Termination, TuneConfig};
use senstune_core::trajgen::DubinsCurve;
use senstune_core::{
    DubinsCar, FeasibleBox, InitialCondition, LossSpec, Scenario, SimConfig, SystemModel,
};

fn config(max_iters: usize) -> TuneConfig {
    TuneConfig {
        step_size: 0.1,
        bounds: FeasibleBox::uniform(4, 1e-3, 1e3).unwrap(),
        termination: Termination {
            rel_tol: 1e-4,
            increase_tol: None,
            max_iters,
        },
        noise: Default::default(),
    }
}

#[test]
fn circle_loss_drops_within_ten_iterations() {
    let car = DubinsCar::default();
    let loss = LossSpec::position(car.position_indices());
    let sim = SimConfig {
        initial_condition: InitialCondition::AtRest,
        ..SimConfig::default()
    };
    let curve = DubinsCurve::Circle {
        radius: 1.0,
        rate: 1.0,
    };
    let scenario = Scenario {
        model: &car,
        trajectory: &curve,
        loss: &loss,
        sim: &sim,
        l1: None,
    };
    let cfg = config(10);
    let out = tune(&[scenario], &dvector![2.0, 2.0, 2.0, 2.0], &cfg).unwrap();
    assert_eq!(out.history.len(), 11);
    assert_eq!(out.stop, StopReason::MaxIters);
    assert!(out.history[10].loss < out.history[0].loss);
    for it in &out.history {
        assert!(cfg.bounds.contains(&it.theta));
    }
}

#[test]
fn batch_tuning_is_reproducible() {
    let car = DubinsCar::default();
    let loss = LossSpec::position(car.position_indices());
    let sim = SimConfig {
        initial_condition: InitialCondition::AtRest,
        noise: senstune_core::sim::NoiseSpec {
            position: 0.02,
            velocity: 0.02,
            angular_velocity: 0.02,
        },
        seed: 3,
        ..SimConfig::default()
    };
    let curves = DubinsCurve::training_set();
    let scenarios: Vec<Scenario> = curves
        .iter()
        .map(|c| Scenario {
            model: &car,
            trajectory: c,
            loss: &loss,
            sim: &sim,
            l1: None,
        })
        .collect();
    let a = tune(&scenarios, &dvector![2.0, 2.0, 2.0, 2.0], &config(5)).unwrap();
    let b = tune(&scenarios, &dvector![2.0, 2.0, 2.0, 2.0], &config(5)).unwrap();
    assert_eq!(a, b);
    let best = a
        .history
        .iter()
        .map(|it| it.loss)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(a.history[a.best_iteration.unwrap()].loss, best);
}

#[test]
fn initial_gains_outside_the_box_are_rejected() {
    let car = DubinsCar::default();
    let loss = LossSpec::position(car.position_indices());
    let sim = SimConfig::default();
    let curve = DubinsCurve::Circle {
        radius: 1.0,
        rate: 1.0,
    };
    let scenario = Scenario {
        model: &car,
        trajectory: &curve,
        loss: &loss,
        sim: &sim,
        l1: None,
    };
    assert!(tune(&[scenario], &dvector![0.0, 2.0, 2.0, 2.0], &config(3)).is_err());
}
