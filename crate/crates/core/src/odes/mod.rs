//! Benchmark systems, an adaptive Dormand-Prince integrator that samples
//! onto a uniform grid, and seeded measurement noise.

mod dopri;
mod noise;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dopri::{integrate, integrate_fn, integrate_with, IntegratorSettings};
pub use noise::add_noise;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    /// Damped linear harmonic oscillator.
    Lho,
    /// Damped nonlinear sink with a cubic restoring force.
    Dnls,
    /// `x' = x - x^3, y' = -y`: sinks at `(+-1, 0)`, saddle at the origin.
    TwoAttractor,
    /// Asymmetric damped double well.
    DoubleWell,
    /// Mean-field cylinder dynamics (3 states, one periodic orbit).
    Mfcd,
    /// Stable cycle at r=2, unstable cycle at r=1, stable origin.
    DualLimitCycle,
    Lorenz,
}

impl SystemId {
    pub const ALL: [SystemId; 7] = [
        SystemId::Lho,
        SystemId::Dnls,
        SystemId::TwoAttractor,
        SystemId::DoubleWell,
        SystemId::Mfcd,
        SystemId::DualLimitCycle,
        SystemId::Lorenz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::Lho => "lho",
            SystemId::Dnls => "dnls",
            SystemId::TwoAttractor => "two_attractor",
            SystemId::DoubleWell => "double_well",
            SystemId::Mfcd => "mfcd",
            SystemId::DualLimitCycle => "dual_limit_cycle",
            SystemId::Lorenz => "lorenz",
        }
    }

    pub fn state_dim(self) -> usize {
        match self {
            SystemId::Mfcd | SystemId::Lorenz => 3,
            _ => 2,
        }
    }

    fn default_params(self) -> &'static [(&'static str, f64)] {
        match self {
            SystemId::Lho => &[("delta", 1.0)],
            SystemId::Dnls => &[("delta", 1.0)],
            SystemId::TwoAttractor => &[],
            SystemId::DoubleWell => &[("delta", 0.5), ("lambda", 1.3)],
            SystemId::Mfcd => &[("mu", 0.1), ("omega", 2.0), ("lambda", 6.0), ("a", -0.1)],
            SystemId::DualLimitCycle => &[],
            SystemId::Lorenz => &[("sigma", 10.0), ("rho", 28.0), ("beta", 8.0 / 3.0)],
        }
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown system `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttractorKind {
    Point(Vec<f64>),
    /// A circular orbit of `radius` about the origin of the `axes` plane,
    /// optionally sitting at a fixed height on a third axis.
    Cycle {
        radius: f64,
        axes: (usize, usize),
        height: Option<(usize, f64)>,
        period: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attractor {
    pub name: String,
    pub kind: AttractorKind,
}

impl Attractor {
    fn point(name: &str, at: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind: AttractorKind::Point(at),
        }
    }
}

/// A catalog entry: right-hand side, parameters and known attractors.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSystem {
    id: SystemId,
    params: BTreeMap<String, f64>,
    coeffs: [f64; 4],
}

impl BenchmarkSystem {
    pub fn new(id: SystemId) -> Self {
        let params: BTreeMap<String, f64> = id
            .default_params()
            .iter()
            .map(|&(k, v)| (k.to_string(), v))
            .collect();
        let mut sys = Self {
            id,
            params,
            coeffs: [0.0; 4],
        };
        sys.refresh();
        sys
    }

    /// Overrides one named parameter; unknown names are rejected.
    pub fn with_param(mut self, name: &str, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("parameter `{name}` must be finite")));
        }
        match self.params.get_mut(name) {
            Some(slot) => *slot = value,
            None => {
                return Err(Error::InvalidArgument(format!(
                    "system `{}` has no parameter `{name}`",
                    self.id
                )))
            }
        }
        self.refresh();
        Ok(self)
    }

    fn refresh(&mut self) {
        let names = self.id.default_params();
        for (slot, (name, _)) in self.coeffs.iter_mut().zip(names) {
            *slot = self.params[*name];
        }
    }

    pub fn id(&self) -> SystemId {
        self.id
    }

    pub fn state_dim(&self) -> usize {
        self.id.state_dim()
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn rhs(&self, x: &[f64], dx: &mut [f64]) {
        let c = &self.coeffs;
        match self.id {
            SystemId::Lho => {
                dx[0] = x[1];
                dx[1] = -x[0] - c[0] * x[1];
            }
            SystemId::Dnls => {
                dx[0] = x[1];
                dx[1] = -x[0] * x[0] * x[0] - c[0] * x[1];
            }
            SystemId::TwoAttractor => {
                dx[0] = x[0] - x[0] * x[0] * x[0];
                dx[1] = -x[1];
            }
            SystemId::DoubleWell => {
                let (delta, lambda) = (c[0], c[1]);
                dx[0] = x[1];
                dx[1] = -x[0] * (-1.0 + lambda * x[0] + x[0] * x[0]) - delta * x[1];
            }
            SystemId::Mfcd => {
                let (mu, omega, lambda, a) = (c[0], c[1], c[2], c[3]);
                dx[0] = mu * x[0] - omega * x[1] + a * x[0] * x[2];
                dx[1] = omega * x[0] + mu * x[1] + a * x[1] * x[2];
                dx[2] = -lambda * (x[2] - x[0] * x[0] - x[1] * x[1]);
            }
            SystemId::DualLimitCycle => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let g = (r2 - 1.0) * (4.0 - r2);
                dx[0] = x[0] * g - x[1];
                dx[1] = x[1] * g + x[0];
            }
            SystemId::Lorenz => {
                let (sigma, rho, beta) = (c[0], c[1], c[2]);
                dx[0] = sigma * (x[1] - x[0]);
                dx[1] = x[0] * (rho - x[2]) - x[1];
                dx[2] = x[0] * x[1] - beta * x[2];
            }
        }
    }

    /// Known attractors for the current parameters, in a fixed order.
    pub fn attractors(&self) -> Vec<Attractor> {
        let c = &self.coeffs;
        match self.id {
            SystemId::Lho | SystemId::Dnls => {
                if c[0] > 0.0 {
                    vec![Attractor::point("origin", vec![0.0, 0.0])]
                } else {
                    vec![]
                }
            }
            SystemId::TwoAttractor => vec![
                Attractor::point("left_sink", vec![-1.0, 0.0]),
                Attractor::point("right_sink", vec![1.0, 0.0]),
            ],
            SystemId::DoubleWell => {
                let (delta, lambda) = (c[0], c[1]);
                if delta <= 0.0 {
                    return vec![];
                }
                let root = (lambda * lambda + 4.0).sqrt();
                vec![
                    Attractor::point("left_sink", vec![(-lambda - root) / 2.0, 0.0]),
                    Attractor::point("right_sink", vec![(-lambda + root) / 2.0, 0.0]),
                ]
            }
            SystemId::Mfcd => {
                let (mu, omega, _, a) = (c[0], c[1], c[2], c[3]);
                let z = -mu / a;
                if a != 0.0 && z > 0.0 {
                    vec![Attractor {
                        name: "periodic_orbit".into(),
                        kind: AttractorKind::Cycle {
                            radius: z.sqrt(),
                            axes: (0, 1),
                            height: Some((2, z)),
                            period: 2.0 * PI / omega.abs(),
                        },
                    }]
                } else if mu < 0.0 {
                    vec![Attractor::point("origin", vec![0.0, 0.0, 0.0])]
                } else {
                    vec![]
                }
            }
            SystemId::DualLimitCycle => vec![
                Attractor::point("origin", vec![0.0, 0.0]),
                Attractor {
                    name: "outer_cycle".into(),
                    kind: AttractorKind::Cycle {
                        radius: 2.0,
                        axes: (0, 1),
                        height: None,
                        period: 2.0 * PI,
                    },
                },
            ],
            SystemId::Lorenz => vec![],
        }
    }
}
