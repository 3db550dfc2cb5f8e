//! Every Jacobian oracle against central differences.

mod common;

use nalgebra::DVector;
use rand::Rng;

use senstune_core::systems::{discrete_jacobians, discrete_step};
use senstune_core::trajgen::{DubinsCurve, QuadrotorCircle, Trajectory};
use senstune_core::types::layout::quadrotor as q;
use senstune_core::types::DesiredState;
use senstune_core::verify::{fd_jacobian, jacobian_mismatch};
use senstune_core::{DubinsCar, Quadrotor, QuadrotorParams, SystemModel};

const EPS: f64 = 1e-6;
const TOL: f64 = 1e-5;
const POINTS: usize = 100;

fn check_all(
    model: &dyn SystemModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    d: &DesiredState,
    theta: &DVector<f64>,
) {
    let dt = 0.01;
    let (jx_f, ju_f) = discrete_jacobians(model, x, u, dt);
    let fd_x = fd_jacobian(|xs| discrete_step(model, xs, u, dt), x, EPS);
    let fd_u = fd_jacobian(|us| discrete_step(model, x, us, dt), u, EPS);
    assert!(
        jacobian_mismatch(&jx_f, &fd_x) < TOL,
        "df/dx: {}",
        jacobian_mismatch(&jx_f, &fd_x)
    );
    assert!(
        jacobian_mismatch(&ju_f, &fd_u) < TOL,
        "df/du: {}",
        jacobian_mismatch(&ju_f, &fd_u)
    );

    let (jx_h, jt_h) = model.control_jacobians(x, d, theta).unwrap();
    let fd_hx = fd_jacobian(|xs| model.control(xs, d, theta).unwrap(), x, EPS);
    let fd_ht = fd_jacobian(|th| model.control(x, d, th).unwrap(), theta, EPS);
    assert!(
        jacobian_mismatch(&jx_h, &fd_hx) < TOL,
        "dh/dx: {}",
        jacobian_mismatch(&jx_h, &fd_hx)
    );
    assert!(
        jacobian_mismatch(&jt_h, &fd_ht) < TOL,
        "dh/dtheta: {}",
        jacobian_mismatch(&jt_h, &fd_ht)
    );
}

#[test]
fn car_oracles_match_finite_differences() {
    let car = DubinsCar::new(1.3, 0.7).unwrap();
    let mut rng = common::rng(11);
    let curves = DubinsCurve::test_set();
    for i in 0..POINTS {
        let curve = curves[i % curves.len()];
        let d = curve.desired(rng.random_range(0.0..10.0)).unwrap();
        let x = &d.state + DVector::from_fn(5, |_, _| rng.random_range(-0.5..0.5));
        let u = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
        let theta = common::random_car_gains(&mut rng);
        check_all(&car, &x, &u, &d, &theta);
    }
}

#[test]
fn quadrotor_oracles_match_finite_differences() {
    let quad = Quadrotor::new(QuadrotorParams::default()).unwrap();
    let circle = QuadrotorCircle::default();
    let mut rng = common::rng(12);
    for _ in 0..POINTS {
        let mut d = circle.desired(rng.random_range(0.0..10.0)).unwrap();
        d.feedforward[q::FF_YAW] = rng.random_range(-1.0..1.0);
        let mut x = common::random_quad_state(&mut rng);
        for i in q::POSITION.chain(q::VELOCITY) {
            x[i] += d.state[i];
        }
        let hover = quad.mass() * quad.gravity();
        let u = DVector::from_fn(4, |i, _| {
            if i == 0 {
                hover * rng.random_range(0.5..1.5)
            } else {
                rng.random_range(-1.0..1.0)
            }
        });
        let theta = common::random_quad_gains(&mut rng);
        check_all(&quad, &x, &u, &d, &theta);
    }
}

#[test]
fn car_parameter_jacobian_is_independent_of_gains() {
    let car = DubinsCar::default();
    let mut rng = common::rng(13);
    let d = DubinsCurve::PEANUT.desired(3.0).unwrap();
    let x = &d.state + DVector::from_fn(5, |_, _| rng.random_range(-0.5..0.5));
    let a = common::random_car_gains(&mut rng);
    let b = common::random_car_gains(&mut rng);
    let (_, ja) = car.control_jacobians(&x, &d, &a).unwrap();
    let (_, jb) = car.control_jacobians(&x, &d, &b).unwrap();
    assert_eq!(ja, jb);
}
