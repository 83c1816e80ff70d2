use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::special::{normal_cdf, normal_pdf};
use crate::Error;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Elu,
    /// Exact `x Φ(x)` form, not the tanh approximation.
    Gelu,
}

impl Activation {
    /// Ensemble member order.
    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::Elu, Activation::Gelu];

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Elu => "elu",
            Activation::Gelu => "gelu",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Activation::Relu => "ReLU",
            Activation::Elu => "ELU",
            Activation::Gelu => "GELU",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "elu" => Ok(Activation::Elu),
            "gelu" => Ok(Activation::Gelu),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

#[inline]
pub fn activate(kind: Activation, alpha: f64, x: f64) -> f64 {
    match kind {
        Activation::Relu => x.max(0.0),
        Activation::Elu => {
            if x > 0.0 {
                x
            } else {
                alpha * x.exp_m1()
            }
        }
        Activation::Gelu => x * normal_cdf(x),
    }
}

/// Derivative of [`activate`]. ReLU'(0) is taken as 0.
#[inline]
pub fn activate_derivative(kind: Activation, alpha: f64, x: f64) -> f64 {
    match kind {
        Activation::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Elu => {
            if x > 0.0 {
                1.0
            } else {
                alpha * x.exp()
            }
        }
        Activation::Gelu => normal_cdf(x) + x * normal_pdf(x),
    }
}
