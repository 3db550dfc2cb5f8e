//! Reference trajectories with analytically differentiated feedforward.

use nalgebra::{Complex, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::flatten_rotation;
use crate::types::layout::{dubins, quadrotor};
use crate::types::DesiredState;

pub trait Trajectory: Send + Sync {
    fn desired(&self, t: f64) -> Result<DesiredState>;
}

/// Planar reference curves for the car. Every family starts at `t = 0` and
/// is differentiated in closed form up to the third derivative, which the
/// angular-acceleration feedforward needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DubinsCurve {
    /// `(r sin wt, r (1 - cos wt))`
    Circle { radius: f64, rate: f64 },
    /// `(a sin wt, b (1 - cos wt))`
    Ellipse { semi_x: f64, semi_y: f64, rate: f64 },
    /// `(a sin st, b sin st cos st)`
    Lemon { a: f64, b: f64, time_scale: f64 },
    /// Polar `r = a + b cos 2phi`, `phi = wt`.
    Peanut { a: f64, b: f64, rate: f64 },
    /// Archimedean `r = a + b t`, `phi = wt`.
    Spiral { a: f64, b: f64, rate: f64 },
    /// Lissajous `(a sin 2st, b sin 3st)`.
    Twist { a: f64, b: f64, time_scale: f64 },
}

/// Position and its first three time derivatives.
#[derive(Debug, Clone, Copy)]
struct Jet {
    p: Vector2<f64>,
    d1: Vector2<f64>,
    d2: Vector2<f64>,
    d3: Vector2<f64>,
}

fn c2v(z: Complex<f64>) -> Vector2<f64> {
    Vector2::new(z.re, z.im)
}

/// Derivatives of `r(t) e^{i w t}` given `r` and its derivatives.
fn polar_jet(r: [f64; 4], w: f64, t: f64) -> Jet {
    let [r0, r1, r2, r3] = r;
    let e = Complex::from_polar(1.0, w * t);
    let i = Complex::i();
    let z0 = Complex::from(r0);
    let z1 = Complex::from(r1) + i * (r0 * w);
    let z2 = Complex::from(r2 - r0 * w * w) + i * (2.0 * r1 * w);
    let z3 = Complex::from(r3 - 3.0 * r1 * w * w) + i * (3.0 * r2 * w - r0 * w * w * w);
    Jet {
        p: c2v(z0 * e),
        d1: c2v(z1 * e),
        d2: c2v(z2 * e),
        d3: c2v(z3 * e),
    }
}

impl DubinsCurve {
    /// Peanut-shaped test curve: peak speed 2 m/s, peak turn rate 1.3 rad/s.
    pub const PEANUT: Self = Self::Peanut {
        a: 2.3503,
        b: 0.9678,
        rate: 0.6,
    };
    /// Figure-eight test curve: peak speed 2 m/s, peak turn rate 1 rad/s.
    pub const LEMON: Self = Self::Lemon {
        a: 3.939,
        b: 1.970,
        time_scale: 0.4542,
    };
    /// Tight outward spiral: peak speed 1 m/s, turn rate near 5 rad/s at start.
    pub const SPIRAL: Self = Self::Spiral {
        a: 1e-3,
        b: 0.04,
        rate: 2.5,
    };
    /// Lissajous test curve: peak speed 2 m/s, peak turn rate 3.4 rad/s.
    pub const TWIST: Self = Self::Twist {
        a: 1.6806,
        b: 1.2339,
        time_scale: 0.4,
    };

    pub fn name(&self) -> &'static str {
        match self {
            Self::Circle { .. } => "circle",
            Self::Ellipse { .. } => "ellipse",
            Self::Lemon { .. } => "lemon",
            Self::Peanut { .. } => "peanut",
            Self::Spiral { .. } => "spiral",
            Self::Twist { .. } => "twist",
        }
    }

    /// The four held-out test curves.
    pub fn test_set() -> Vec<Self> {
        vec![Self::PEANUT, Self::LEMON, Self::SPIRAL, Self::TWIST]
    }

    /// Nine circles and ellipses with peak speed <= 1 m/s and peak turn rate
    /// <= 1 rad/s.
    pub fn training_set() -> Vec<Self> {
        vec![
            Self::Circle {
                radius: 1.0,
                rate: 1.0,
            },
            Self::Circle {
                radius: 1.0,
                rate: -0.8,
            },
            Self::Circle {
                radius: 1.5,
                rate: 0.6,
            },
            Self::Circle {
                radius: 2.0,
                rate: -0.5,
            },
            Self::Circle {
                radius: 3.0,
                rate: 0.3,
            },
            Self::Ellipse {
                semi_x: 1.0,
                semi_y: 0.8,
                rate: 0.8,
            },
            Self::Ellipse {
                semi_x: 1.5,
                semi_y: 1.0,
                rate: -0.6,
            },
            Self::Ellipse {
                semi_x: 0.8,
                semi_y: 1.2,
                rate: 0.6,
            },
            Self::Ellipse {
                semi_x: 2.0,
                semi_y: 1.5,
                rate: 0.5,
            },
        ]
    }

    fn jet(&self, t: f64) -> Jet {
        match *self {
            Self::Circle { radius, rate } => Self::Ellipse {
                semi_x: radius,
                semi_y: radius,
                rate,
            }
            .jet(t),
            Self::Ellipse {
                semi_x: a,
                semi_y: b,
                rate: w,
            } => {
                let (s, c) = (w * t).sin_cos();
                let w2 = w * w;
                Jet {
                    p: Vector2::new(a * s, b * (1.0 - c)),
                    d1: Vector2::new(a * w * c, b * w * s),
                    d2: Vector2::new(-a * w2 * s, b * w2 * c),
                    d3: Vector2::new(-a * w2 * w * c, -b * w2 * w * s),
                }
            }
            Self::Lemon {
                a,
                b,
                time_scale: s,
            } => {
                // y = (b / 2) sin 2st
                let (s1, c1) = (s * t).sin_cos();
                let (s2, c2) = (2.0 * s * t).sin_cos();
                let h = 0.5 * b;
                let q = 2.0 * s;
                Jet {
                    p: Vector2::new(a * s1, h * s2),
                    d1: Vector2::new(a * s * c1, h * q * c2),
                    d2: Vector2::new(-a * s * s * s1, -h * q * q * s2),
                    d3: Vector2::new(-a * s * s * s * c1, -h * q * q * q * c2),
                }
            }
            Self::Twist {
                a,
                b,
                time_scale: s,
            } => {
                let (qa, qb) = (2.0 * s, 3.0 * s);
                let (sa, ca) = (qa * t).sin_cos();
                let (sb, cb) = (qb * t).sin_cos();
                Jet {
                    p: Vector2::new(a * sa, b * sb),
                    d1: Vector2::new(a * qa * ca, b * qb * cb),
                    d2: Vector2::new(-a * qa * qa * sa, -b * qb * qb * sb),
                    d3: Vector2::new(-a * qa.powi(3) * ca, -b * qb.powi(3) * cb),
                }
            }
            Self::Peanut { a, b, rate: w } => {
                let (s, c) = (2.0 * w * t).sin_cos();
                let q = 2.0 * w;
                polar_jet(
                    [a + b * c, -b * q * s, -b * q * q * c, b * q * q * q * s],
                    w,
                    t,
                )
            }
            Self::Spiral { a, b, rate: w } => polar_jet([a + b * t, b, 0.0, 0.0], w, t),
        }
    }

    pub fn position(&self, t: f64) -> Vector2<f64> {
        self.jet(t).p
    }
}

impl Trajectory for DubinsCurve {
    fn desired(&self, t: f64) -> Result<DesiredState> {
        let Jet { p, d1, d2, d3 } = self.jet(t);
        let speed_sq = d1.norm_squared();
        let speed = speed_sq.sqrt();
        if !(speed > 1e-9) {
            return Err(Error::SingularHeading { t });
        }
        let cross = d1.x * d2.y - d1.y * d2.x;
        let yaw_rate = cross / speed_sq;
        let cross_dot = d1.x * d3.y - d1.y * d3.x;
        let yaw_accel = cross_dot / speed_sq - cross * 2.0 * d1.dot(&d2) / (speed_sq * speed_sq);

        let mut state = DVector::zeros(dubins::N);
        state[dubins::X] = p.x;
        state[dubins::Y] = p.y;
        state[dubins::YAW] = d1.y.atan2(d1.x);
        state[dubins::SPEED] = speed;
        state[dubins::YAW_RATE] = yaw_rate;
        let mut feedforward = DVector::zeros(dubins::FF_LEN);
        feedforward[dubins::FF_ACCEL.start] = d2.x;
        feedforward[dubins::FF_ACCEL.start + 1] = d2.y;
        feedforward[dubins::FF_YAW_ACCEL] = yaw_accel;
        Ok(DesiredState { state, feedforward })
    }
}

/// `p(t) = (A (1 - cos wt), A (cos wt - 1), 0)` with constant zero yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrotorCircle {
    #[serde(default = "QuadrotorCircle::default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "QuadrotorCircle::default_rate")]
    pub rate: f64,
}

impl Default for QuadrotorCircle {
    fn default() -> Self {
        Self {
            amplitude: Self::default_amplitude(),
            rate: Self::default_rate(),
        }
    }
}

impl QuadrotorCircle {
    fn default_amplitude() -> f64 {
        2.0
    }

    fn default_rate() -> f64 {
        1.0
    }
}

impl Trajectory for QuadrotorCircle {
    fn desired(&self, t: f64) -> Result<DesiredState> {
        let (a, w) = (self.amplitude, self.rate);
        let (s, c) = (w * t).sin_cos();
        let mut state = DVector::zeros(quadrotor::N);
        let pos = [a * (1.0 - c), a * (c - 1.0), 0.0];
        let vel = [a * w * s, -a * w * s, 0.0];
        state.as_mut_slice()[quadrotor::POSITION].copy_from_slice(&pos);
        state.as_mut_slice()[quadrotor::VELOCITY].copy_from_slice(&vel);
        state.as_mut_slice()[quadrotor::ROTATION]
            .copy_from_slice(&flatten_rotation(&nalgebra::Matrix3::identity()));
        let mut feedforward = DVector::zeros(quadrotor::FF_LEN);
        let acc = [a * w * w * c, -a * w * w * c, 0.0];
        feedforward.as_mut_slice()[quadrotor::FF_ACCEL].copy_from_slice(&acc);
        feedforward[quadrotor::FF_YAW] = 0.0;
        Ok(DesiredState { state, feedforward })
    }
}

/// Peak speed and peak `|turn rate|` of a car reference over `[0, horizon]`.
pub fn speed_envelope(curve: &DubinsCurve, horizon: f64, samples: usize) -> Result<(f64, f64)> {
    let mut max_speed: f64 = 0.0;
    let mut max_rate: f64 = 0.0;
    for i in 0..=samples {
        let d = curve.desired(horizon * i as f64 / samples as f64)?;
        max_speed = max_speed.max(d.state[dubins::SPEED]);
        max_rate = max_rate.max(d.state[dubins::YAW_RATE].abs());
    }
    Ok((max_speed, max_rate))
}
