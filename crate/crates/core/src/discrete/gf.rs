//! Closed-form bivariate and conditional generating functions.

use statrs::function::gamma::ln_gamma;

use super::branching::{check_alpha, check_p};
use super::thinning::{check_rho, check_theta};
use crate::error::{invalid, Result};

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} not in [0,1]")))
    }
}

/// `E[s^{X_1} z^{X_2}]` for the branching (and thinning) Poisson chain.
pub fn pgf2_poisson(s: f64, z: f64, theta: f64, rho: f64) -> Result<f64> {
    check_unit("s", s)?;
    check_unit("z", z)?;
    check_theta(theta)?;
    check_rho(rho)?;
    let a = theta * (1.0 - rho);
    Ok((a * (s - 1.0) + a * (z - 1.0) + theta * rho * (s * z - 1.0)).exp())
}

/// `p^{2 alpha} [(1 - q rho) - q (1 - rho)(s + z) + q (q - rho) s z]^{-alpha}`.
pub fn pgf2_nb_branching(s: f64, z: f64, alpha: f64, p: f64, rho: f64) -> Result<f64> {
    check_unit("s", s)?;
    check_unit("z", z)?;
    check_alpha(alpha)?;
    check_p(p)?;
    check_rho(rho)?;
    let q = 1.0 - p;
    let base = (1.0 - q * rho) - q * (1.0 - rho) * (s + z) + q * (q - rho) * s * z;
    Ok(p.powf(2.0 * alpha) * base.powf(-alpha))
}

/// `p^{theta (2 - rho)} (1 - q s)^{-theta(1-rho)} (1 - q z)^{-theta(1-rho)} (1 - q s z)^{-theta rho}`.
pub fn pgf2_nb_thinning(s: f64, z: f64, theta: f64, p: f64, rho: f64) -> Result<f64> {
    check_unit("s", s)?;
    check_unit("z", z)?;
    check_theta(theta)?;
    check_p(p)?;
    check_rho(rho)?;
    let q = 1.0 - p;
    let outer = -theta * (1.0 - rho);
    Ok(p.powf(theta * (2.0 - rho))
        * (1.0 - q * s).powf(outer)
        * (1.0 - q * z).powf(outer)
        * (1.0 - q * s * z).powf(-theta * rho))
}

/// Terminating Gauss hypergeometric `2F1(a, -n; c; w)`, a polynomial of
/// degree `n` in `w`.
pub fn hyp2f1_terminating(a: f64, n: u64, c: f64, w: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..n {
        let kf = k as f64;
        term *= (a + kf) * (kf - n as f64) / ((c + kf) * (kf + 1.0)) * w;
        sum += term;
    }
    sum
}

/// `E[z^{X_t} | X_{t-1} = x]` for the NB thinning chain:
/// `(p / (1 - q z))^{theta (1-rho)} 2F1(theta rho, -x; theta; 1 - z)`.
pub fn cond_pgf_nb_thinning(z: f64, x: u64, theta: f64, p: f64, rho: f64) -> Result<f64> {
    check_unit("z", z)?;
    check_p(p)?;
    check_rho(rho)?;
    if !(theta > 0.0) {
        return Err(invalid("theta", "conditional pgf needs theta > 0"));
    }
    let q = 1.0 - p;
    Ok((p / (1.0 - q * z)).powf(theta * (1.0 - rho)) * hyp2f1_terminating(theta * rho, x, theta, 1.0 - z))
}

/// Negative trinomial pmf, the `rho = q` member of the branching NB family:
/// `Gamma(alpha+i+j) / (Gamma(alpha) i! j!) ((1-q)/(1+q))^alpha (q/(1+q))^{i+j}`.
pub fn negtrinomial_pmf(i: u64, j: u64, alpha: f64, q: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid("q", format!("{q} not in (0,1)")));
    }
    let (fi, fj) = (i as f64, j as f64);
    let log = ln_gamma(alpha + fi + fj) - ln_gamma(alpha) - ln_gamma(fi + 1.0) - ln_gamma(fj + 1.0)
        + alpha * ((1.0 - q) / (1.0 + q)).ln()
        + (fi + fj) * (q / (1.0 + q)).ln();
    Ok(log.exp())
}

/// `P[X_1 = 0, X_3 = 0 | X_2 = 2]` for the NB thinning chain:
/// `[p^{theta(1-rho)} (1-rho)]^2 [(1 + theta(1-rho)) / (1 + theta)]^2`.
pub fn thinning_nb_zero_two_zero(theta: f64, p: f64, rho: f64) -> f64 {
    let a = p.powf(theta * (1.0 - rho)) * (1.0 - rho);
    let b = (1.0 + theta * (1.0 - rho)) / (1.0 + theta);
    a * a * b * b
}

/// `P[X_1 = 0, X_3 = 0 | X_2 = 2]` for the NB random-measure process:
/// `[p^{theta(1-rho)} (1-rho)]^2 (1 + theta (1-rho)^2) / (1 + theta)`.
pub fn random_measure_nb_zero_two_zero(theta: f64, p: f64, rho: f64) -> f64 {
    let a = p.powf(theta * (1.0 - rho)) * (1.0 - rho);
    a * a * (1.0 + theta * (1.0 - rho) * (1.0 - rho)) / (1.0 + theta)
}
