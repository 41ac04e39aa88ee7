//! Which of the four Markov ID stationary reversible families a given
//! `(r_0, r_1, r_2, theta_1)` describes.
//!
//! Here `r_i` is the probability-generating sequence of the offspring law
//! `p(s) = sum_i r_i s^i` of the branching representation and `theta_1` the
//! Levy mass at 1 of the univariate marginal. Past the two degenerate cases
//! the offspring sequence must be geometric, `r_i = r_1 (r_2 / r_1)^{i-1}`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MistiFamily {
    /// `X_t = X_0` for all `t`, arbitrary ID marginal.
    Constant,
    /// iid with arbitrary ID marginal.
    Iid,
    BranchingPoisson { theta: f64, rho: f64 },
    BranchingNb { alpha: f64, p: f64, rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RSequence {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub theta1: f64,
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

pub fn misti_classify(r0: f64, r1: f64, r2: f64, theta1: f64) -> Result<MistiFamily> {
    for (name, v) in [("r0", r0), ("r1", r1), ("r2", r2)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(name, format!("{v} must be nonnegative")));
        }
    }
    if r0 + r1 > 1.0 + REL_TOL {
        return Err(invalid("r1", format!("r0 + r1 = {} exceeds 1", r0 + r1)));
    }
    if !(theta1 > 0.0 && theta1.is_finite()) {
        return Err(invalid("theta1", format!("{theta1} must be positive")));
    }
    if r0 == 0.0 {
        if !near(r1, 1.0) {
            return Err(Error::Infeasible(format!("r0 = 0 forces r1 = 1, got {r1}")));
        }
        return Ok(MistiFamily::Constant);
    }
    if r1 == 0.0 {
        if !near(r0, 1.0) {
            return Err(Error::Infeasible(format!("r1 = 0 forces r0 = 1, got {r0}")));
        }
        return Ok(MistiFamily::Iid);
    }
    if r2 == 0.0 {
        if !near(r0 + r1, 1.0) {
            return Err(Error::Infeasible(format!(
                "r2 = 0 leaves offspring mass r0 + r1 = {} != 1",
                r0 + r1
            )));
        }
        if !(r1 < 1.0) {
            return Err(Error::Infeasible("rho = r1 must lie in (0,1)".into()));
        }
        return Ok(MistiFamily::BranchingPoisson { theta: theta1, rho: r1 });
    }
    let q = (1.0 - r0 - r1) / (r0 * (1.0 - r0));
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Infeasible(format!(
            "q = {q} outside (0,1); total Levy mass would diverge"
        )));
    }
    if !near(r2, r1 * q * r0) {
        return Err(Error::Infeasible(format!(
            "r2 = {r2} is not on the geometric sequence (expected {})",
            r1 * q * r0
        )));
    }
    let rho = (1.0 - r0) * (1.0 - r0) / r1;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Infeasible(format!("rho = {rho} outside (0,1)")));
    }
    Ok(MistiFamily::BranchingNb {
        alpha: theta1 / q,
        p: 1.0 - q,
        rho,
    })
}

impl MistiFamily {
    /// Offspring sequence head for the nondegenerate families.
    pub fn r_sequence(&self) -> Option<RSequence> {
        match *self {
            MistiFamily::BranchingPoisson { theta, rho } => Some(RSequence {
                r0: 1.0 - rho,
                r1: rho,
                r2: 0.0,
                theta1: theta,
            }),
            MistiFamily::BranchingNb { alpha, p, rho } => {
                let q = 1.0 - p;
                let r0 = (1.0 - rho) / (1.0 - rho * q);
                let r1 = (1.0 - r0) * (1.0 - q * r0);
                Some(RSequence {
                    r0,
                    r1,
                    r2: r1 * q * r0,
                    theta1: alpha * q,
                })
            }
            MistiFamily::Constant | MistiFamily::Iid => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MistiFamily::Constant => "constant",
            MistiFamily::Iid => "iid",
            MistiFamily::BranchingPoisson { .. } => "branching-poisson",
            MistiFamily::BranchingNb { .. } => "branching-nb",
        }
    }
}
