//! Branching Poisson and branching negative binomial chains.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::thinning::{binomial_pmf, check_rho, check_theta};
use crate::error::{invalid, Result};
use crate::idlaw::{nb_pmf, sample_nb, sample_poisson};

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(invalid("p", format!("{p} not in (0,1)")))
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("{alpha} must be positive")))
    }
}

/// `Binomial(x, rho) + Po(theta (1 - rho))`.
pub fn branching_step_poisson<R: Rng + ?Sized>(x: u64, theta: f64, rho: f64, rng: &mut R) -> Result<u64> {
    check_theta(theta)?;
    check_rho(rho)?;
    let survivors = if x == 0 { 0 } else { Binomial::new(x, rho).expect("valid").sample(rng) };
    Ok(survivors + sample_poisson(theta * (1.0 - rho), rng))
}

/// Survival probability and innovation success probability of the branching
/// NB update: `(rho p / (1 - rho q), p / (1 - rho q))`.
pub fn nb_branching_probs(p: f64, rho: f64) -> (f64, f64) {
    let denom = 1.0 - rho * (1.0 - p);
    (rho * p / denom, p / denom)
}

/// `Y ~ Binomial(x, rho p / (1 - rho q))`, then `Y + NB(alpha + Y, p / (1 - rho q))`.
pub fn branching_step_nb<R: Rng + ?Sized>(x: u64, alpha: f64, p: f64, rho: f64, rng: &mut R) -> Result<u64> {
    check_alpha(alpha)?;
    check_p(p)?;
    check_rho(rho)?;
    let (survive, p_innov) = nb_branching_probs(p, rho);
    let y = if x == 0 { 0 } else { Binomial::new(x, survive).expect("valid").sample(rng) };
    Ok(y + sample_nb(alpha + y as f64, p_innov, rng))
}

/// Exact transition rows of the branching Poisson chain on `0..=k`.
pub fn branching_poisson_matrix(theta: f64, rho: f64, k: usize) -> Array2<f64> {
    let innov = crate::idlaw::IdLaw::Poisson.pmf(theta * (1.0 - rho), k);
    let mut m = Array2::zeros((k + 1, k + 1));
    for x in 0..=k {
        let surv = binomial_pmf(x as u64, rho);
        for y in 0..=k {
            m[[x, y]] = (0..=x.min(y)).map(|j| surv[j] * innov[y - j]).sum();
        }
    }
    m
}

/// Exact transition rows of the branching NB chain on `0..=k`:
/// `q(y|x) = sum_j Bin(j; x, s) NB(y - j; alpha + j, p')`.
pub fn branching_nb_matrix(alpha: f64, p: f64, rho: f64, k: usize) -> Array2<f64> {
    let (survive, p_innov) = nb_branching_probs(p, rho);
    let innov: Vec<Vec<f64>> = (0..=k).map(|j| nb_pmf(alpha + j as f64, p_innov, k)).collect();
    let mut m = Array2::zeros((k + 1, k + 1));
    for x in 0..=k {
        let surv = binomial_pmf(x as u64, survive);
        for y in 0..=k {
            m[[x, y]] = (0..=x.min(y)).map(|j| surv[j] * innov[j][y - j]).sum();
        }
    }
    m
}
