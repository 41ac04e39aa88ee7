//! The thinning construction: consecutive states share an ID component,
//! `X_{t-1} = xi + eta`, `X_t = xi + zeta`, with `xi ~ mu^{rho theta}` and
//! `eta, zeta ~ mu^{(1-rho) theta}` independent.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution};
use statrs::function::gamma::ln_gamma;

use super::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::idlaw::IdLaw;

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else if rho == 0.0 {
        Err(invalid("rho", "rho = 0 is the iid process; use the iid construction"))
    } else if rho == 1.0 {
        Err(invalid("rho", "rho = 1 is the constant process; use the constant construction"))
    } else {
        Err(invalid("rho", format!("{rho} not in (0,1)")))
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta >= 0.0 {
        Ok(())
    } else {
        Err(invalid("theta", format!("{theta} is not a finite nonnegative scale")))
    }
}

/// Binomial(n, prob) pmf on `0..=n`.
pub fn binomial_pmf(n: u64, prob: f64) -> Vec<f64> {
    if prob <= 0.0 || prob >= 1.0 {
        let mut v = vec![0.0; n as usize + 1];
        v[if prob >= 1.0 { n as usize } else { 0 }] = 1.0;
        return v;
    }
    let (lp, lq) = (prob.ln(), (1.0 - prob).ln());
    let lgn = ln_gamma(n as f64 + 1.0);
    (0..=n)
        .map(|k| {
            let (kf, rf) = (k as f64, (n - k) as f64);
            (lgn - ln_gamma(kf + 1.0) - ln_gamma(rf + 1.0) + kf * lp + rf * lq).exp()
        })
        .collect()
}

/// Beta-binomial BB(n; a, b) pmf on `0..=n`, via log-gamma.
pub fn beta_binomial_pmf(n: u64, a: f64, b: f64) -> Vec<f64> {
    let nf = n as f64;
    let norm = ln_gamma(nf + 1.0) + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) - ln_gamma(nf + a + b);
    (0..=n)
        .map(|k| {
            let (kf, rf) = (k as f64, (n - k) as f64);
            (norm - ln_gamma(kf + 1.0) - ln_gamma(rf + 1.0) + ln_gamma(kf + a) + ln_gamma(rf + b)).exp()
        })
        .collect()
}

/// Conditional law of the shared component `xi` given `X = x`:
/// `mu^{rho theta}(xi) mu^{(1-rho) theta}(x - xi) / mu^theta(x)`.
///
/// Poisson gives Binomial(x, rho), negative binomial gives
/// BB(x; theta rho, theta (1-rho)); other laws use the ratio directly.
pub fn thinning_conditional(law: &IdLaw, theta: f64, rho: f64, x: u64) -> Result<Vec<f64>> {
    check_theta(theta)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(invalid("rho", format!("{rho} not in [0,1]")));
    }
    if x == 0 {
        return Ok(vec![1.0]);
    }
    if theta == 0.0 {
        return Err(Error::ZeroProbability(x));
    }
    match law {
        IdLaw::Poisson => Ok(binomial_pmf(x, rho)),
        IdLaw::NegBinomial { .. } if rho > 0.0 && rho < 1.0 => {
            Ok(beta_binomial_pmf(x, theta * rho, theta * (1.0 - rho)))
        }
        _ => thinning_conditional_by_ratio(law, theta, rho, x),
    }
}

/// The defining ratio, evaluated from the semigroup pmfs for any law.
pub fn thinning_conditional_by_ratio(law: &IdLaw, theta: f64, rho: f64, x: u64) -> Result<Vec<f64>> {
    let xs = x as usize;
    let denom = law.pmf(theta, xs)[xs];
    if !(denom > 0.0) {
        return Err(Error::ZeroProbability(x));
    }
    let shared = law.pmf(rho * theta, xs);
    let rest = law.pmf((1.0 - rho) * theta, xs);
    Ok((0..=xs).map(|k| shared[k] * rest[xs - k] / denom).collect())
}

/// One-step transition probability `q(y | x)`.
pub fn thinning_transition(law: &IdLaw, theta: f64, rho: f64, x: u64, y: u64) -> Result<f64> {
    let cond = thinning_conditional(law, theta, rho, x)?;
    let innov = law.pmf((1.0 - rho) * theta, y as usize);
    Ok((0..=x.min(y) as usize).map(|k| cond[k] * innov[y as usize - k]).sum())
}

/// Rows `q(. | x)` for `x, y` in `0..=k`. Rows whose conditioning value has
/// zero probability are left at zero.
pub fn thinning_transition_matrix(law: &IdLaw, theta: f64, rho: f64, k: usize) -> Array2<f64> {
    let innov = law.pmf((1.0 - rho) * theta, k);
    let mut m = Array2::zeros((k + 1, k + 1));
    for x in 0..=k {
        let Ok(cond) = thinning_conditional(law, theta, rho, x as u64) else {
            continue;
        };
        for y in 0..=k {
            m[[x, y]] = (0..=x.min(y)).map(|j| cond[j] * innov[y - j]).sum();
        }
    }
    m
}

/// Draws the shared component given `X = x`.
pub fn sample_thinned<R: Rng + ?Sized>(law: &IdLaw, theta: f64, rho: f64, x: u64, rng: &mut R) -> Result<u64> {
    if x == 0 {
        return Ok(0);
    }
    match law {
        IdLaw::Poisson => Ok(Binomial::new(x, rho).expect("valid binomial").sample(rng)),
        IdLaw::NegBinomial { .. } => {
            let pi = Beta::new(theta * rho, theta * (1.0 - rho))
                .map_err(|e| invalid("theta", e.to_string()))?
                .sample(rng);
            Ok(Binomial::new(x, pi.clamp(0.0, 1.0)).expect("valid binomial").sample(rng))
        }
        IdLaw::GenericLevy { .. } => {
            let cond = thinning_conditional(law, theta, rho, x)?;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, p) in cond.iter().enumerate() {
                acc += p;
                if u < acc {
                    return Ok(k as u64);
                }
            }
            Ok(x)
        }
    }
}

/// Stationary thinning path started at `t0` with `X_{t0} ~ mu^theta`.
pub fn simulate_thinning<R: Rng + ?Sized>(
    law: &IdLaw,
    theta: f64,
    rho: f64,
    t0: i64,
    n: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    check_theta(theta)?;
    check_rho(rho)?;
    if n == 0 {
        return Err(invalid("n", "trajectory needs at least one step"));
    }
    let mut values = Vec::with_capacity(n);
    let mut x = law.sample(theta, rng);
    values.push(x);
    for _ in 1..n {
        let xi = sample_thinned(law, theta, rho, x, rng)?;
        x = xi + law.sample((1.0 - rho) * theta, rng);
        values.push(x);
    }
    Ok(Trajectory { t0, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nb(p: f64) -> IdLaw {
        IdLaw::neg_binomial(p).unwrap()
    }

    #[test]
    fn poisson_conditional_is_binomial() {
        let c = thinning_conditional(&IdLaw::poisson(), 1.3, 0.5, 2).unwrap();
        for (a, b) in c.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(thinning_conditional(&IdLaw::poisson(), 1.0, 0.5, 0).unwrap(), vec![1.0]);
    }

    #[test]
    fn nb_conditional_is_beta_binomial() {
        let c = thinning_conditional(&nb(0.5), 1.0, 0.5, 1).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-14 && (c[1] - 0.5).abs() < 1e-14);
        for x in [1u64, 4, 17] {
            let closed = thinning_conditional(&nb(0.35), 2.2, 0.3, x).unwrap();
            let ratio = thinning_conditional_by_ratio(&nb(0.35), 2.2, 0.3, x).unwrap();
            for (a, b) in closed.iter().zip(&ratio) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((closed.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_probability_conditioning() {
        assert!(matches!(
            thinning_conditional(&IdLaw::poisson(), 0.0, 0.5, 2),
            Err(Error::ZeroProbability(2))
        ));
        let even = IdLaw::generic_lattice([(2, 1.0)]).unwrap();
        assert!(matches!(
            thinning_conditional(&even, 1.0, 0.5, 3),
            Err(Error::ZeroProbability(3))
        ));
    }

    #[test]
    fn transition_examples() {
        let q00 = thinning_transition(&IdLaw::poisson(), 1.0, 0.5, 0, 0).unwrap();
        assert!((q00 - (-0.5f64).exp()).abs() < 1e-15);

        let law = nb(0.5);
        let row: f64 = (0..=40).map(|y| thinning_transition(&law, 1.0, 0.5, 2, y).unwrap()).sum();
        let tail = 1.0 - row;
        assert!(tail > 0.0 && tail < 1e-8, "tail={tail}");
    }

    #[test]
    fn detailed_balance_on_grid() {
        for law in [IdLaw::poisson(), nb(0.4), IdLaw::generic([(1, 0.6), (3, 0.2)]).unwrap()] {
            let theta = 1.2;
            let p = law.pmf(theta, 10);
            let q = thinning_transition_matrix(&law, theta, 0.35, 10);
            for x in 0..=10 {
                for y in 0..=10 {
                    let lhs = p[x] * q[[x, y]];
                    let rhs = p[y] * q[[y, x]];
                    assert!((lhs - rhs).abs() < 1e-12, "{law:?} ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn zero_scale_path_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = simulate_thinning(&nb(0.5), 0.0, 0.5, 0, 50, &mut rng).unwrap();
        assert!(t.values.iter().all(|&v| v == 0));
        assert!(simulate_thinning(&nb(0.5), 1.0, 0.5, 0, 0, &mut rng).is_err());
        assert!(simulate_thinning(&nb(0.5), 1.0, 1.0, 0, 5, &mut rng).is_err());
    }

    #[test]
    fn poisson_path_mean_and_autocorrelation() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let t = simulate_thinning(&IdLaw::poisson(), 1.0, 0.5, 0, n, &mut rng).unwrap();
        let xs: Vec<f64> = t.values.iter().map(|&v| v as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        // Var of the mean of an AR(1)-like series: sigma^2 (1+rho)/((1-rho) n)
        let se = (1.0 * 3.0 / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean={mean}");

        let t = simulate_thinning(&IdLaw::poisson(), 5.0, 0.9, 0, n, &mut rng).unwrap();
        let r1 = crate::verify::autocorr_mc(&t, 1).unwrap();
        // Bartlett: Var(r1) ~ (1 - rho^2) / n
        assert!((r1 - 0.9).abs() < 3.0 * ((1.0 - 0.81) / n as f64).sqrt(), "r1={r1}");
    }
}
