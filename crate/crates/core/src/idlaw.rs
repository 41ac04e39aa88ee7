//! Infinitely divisible convolution semigroups `{mu^theta}` on the nonnegative
//! integers.
//!
//! Every law here is compound Poisson: `mu^theta` has pgf
//! `exp(theta * sum_j (z^j - 1) nu_j)` for a finite Levy measure `nu` on
//! `{1, 2, ...}`. The scale `theta` is passed per call so that the semigroup
//! property `mu^a * mu^b = mu^(a+b)` is explicit at every call site.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

/// Levy masses below this are treated as the end of the negative binomial
/// series when a finite truncation is needed.
pub const NB_LEVY_CUTOFF: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub enum IdLaw {
    /// `mu^theta = Po(theta)`; Levy measure is a unit point mass at 1.
    Poisson,
    /// `mu^theta = NB(theta, p)` with pmf `Gamma(theta+k)/(Gamma(theta) k!) p^theta q^k`.
    NegBinomial { p: f64 },
    /// Compound Poisson with Levy masses `theta * nu[j]`.
    GenericLevy { nu: BTreeMap<u64, f64> },
}

impl IdLaw {
    pub fn poisson() -> Self {
        IdLaw::Poisson
    }

    pub fn neg_binomial(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid("p", format!("{p} not in (0,1)")));
        }
        Ok(IdLaw::NegBinomial { p })
    }

    /// Generic compound-Poisson law with full support on the nonnegative
    /// integers. Rejects measures with `nu({1}) = 0`.
    pub fn generic(nu: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let law = Self::generic_lattice(nu)?;
        if law.unit_mass() <= 0.0 {
            return Err(invalid("nu", "mass at 1 must be positive"));
        }
        Ok(law)
    }

    /// Like [`IdLaw::generic`] but allows `nu({1}) = 0` (lattice laws such as
    /// ones supported on the even integers, or the point mass at 0). Such laws
    /// are valid semigroups but violate the full-support assumption, so the
    /// process constructors reject them.
    pub fn generic_lattice(nu: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (j, m) in nu {
            if j == 0 {
                return Err(invalid("nu", "jump sizes start at 1"));
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(invalid("nu", format!("mass {m} at {j} is not a finite nonnegative number")));
            }
            if m > 0.0 {
                *map.entry(j).or_insert(0.0) += m;
            }
        }
        Ok(IdLaw::GenericLevy { nu: map })
    }

    /// Levy mass at jump size 1 for `theta = 1`.
    pub fn unit_mass(&self) -> f64 {
        match self {
            IdLaw::Poisson => 1.0,
            IdLaw::NegBinomial { p } => 1.0 - p,
            IdLaw::GenericLevy { nu } => nu.get(&1).copied().unwrap_or(0.0),
        }
    }

    pub fn has_full_support(&self) -> bool {
        self.unit_mass() > 0.0
    }

    /// `[nu_1, ..., nu_J]` scaled by `theta`.
    pub fn levy_masses(&self, theta: f64, max_jump: usize) -> Vec<f64> {
        match self {
            IdLaw::Poisson => {
                let mut v = vec![0.0; max_jump];
                if max_jump > 0 {
                    v[0] = theta;
                }
                v
            }
            IdLaw::NegBinomial { p } => {
                let q = 1.0 - p;
                let mut qj = 1.0;
                (1..=max_jump)
                    .map(|j| {
                        qj *= q;
                        theta * qj / j as f64
                    })
                    .collect()
            }
            IdLaw::GenericLevy { nu } => (1..=max_jump as u64)
                .map(|j| theta * nu.get(&j).copied().unwrap_or(0.0))
                .collect(),
        }
    }

    /// Smallest `J` with `theta q^J / J` below [`NB_LEVY_CUTOFF`]; for other
    /// laws the largest atom of the Levy measure.
    pub fn levy_truncation(&self, theta: f64) -> usize {
        match self {
            IdLaw::Poisson => 1,
            IdLaw::NegBinomial { p } => {
                let q = 1.0 - p;
                let mut j = 1usize;
                let mut qj = q;
                while theta * qj / j as f64 >= NB_LEVY_CUTOFF {
                    j += 1;
                    qj *= q;
                }
                j
            }
            IdLaw::GenericLevy { nu } => nu.keys().next_back().copied().unwrap_or(1) as usize,
        }
    }

    /// Total Levy mass `nu_+` at scale `theta`, so that `P(X = 0) = exp(-nu_+)`.
    pub fn total_levy_mass(&self, theta: f64) -> f64 {
        match self {
            IdLaw::Poisson => theta,
            IdLaw::NegBinomial { p } => -theta * p.ln(),
            IdLaw::GenericLevy { nu } => theta * nu.values().sum::<f64>(),
        }
    }

    /// `P(0..=k_max)` under `mu^theta`. Poisson and negative binomial use their
    /// closed forms, generic laws the compound-Poisson recursion.
    pub fn pmf(&self, theta: f64, k_max: usize) -> Vec<f64> {
        if theta == 0.0 {
            return delta0(k_max);
        }
        match self {
            IdLaw::Poisson => (0..=k_max)
                .map(|k| {
                    let k = k as f64;
                    (k * theta.ln() - theta - ln_gamma(k + 1.0)).exp()
                })
                .collect(),
            IdLaw::NegBinomial { p } => nb_pmf(theta, *p, k_max),
            IdLaw::GenericLevy { .. } => self.pmf_recursive(theta, k_max),
        }
    }

    /// `P(0) = exp(-nu_+)`, `k P(k) = sum_{j=1..k} j nu_j P(k-j)`.
    ///
    /// Exact on `0..=k_max` since only masses up to `k_max` enter.
    pub fn pmf_recursive(&self, theta: f64, k_max: usize) -> Vec<f64> {
        let nu = self.levy_masses(theta, k_max);
        let mut probs = Vec::with_capacity(k_max + 1);
        probs.push((-self.total_levy_mass(theta)).exp());
        for k in 1..=k_max {
            let acc: f64 = (1..=k).map(|j| j as f64 * nu[j - 1] * probs[k - j]).sum();
            probs.push(acc / k as f64);
        }
        probs
    }

    /// Mass beyond `k_max`, i.e. `1 - sum P(0..=k_max)`, clamped at 0.
    pub fn tail_mass(&self, theta: f64, k_max: usize) -> f64 {
        (1.0 - self.pmf(theta, k_max).iter().sum::<f64>()).max(0.0)
    }

    /// Smallest `K` whose tail mass beyond `K` is below `eps` (capped at
    /// `cap`).
    pub fn support_bound(&self, theta: f64, eps: f64, cap: usize) -> usize {
        let probs = self.pmf(theta, cap);
        let mut acc = 0.0;
        for (k, pk) in probs.iter().enumerate() {
            acc += pk;
            if 1.0 - acc < eps {
                return k;
            }
        }
        cap
    }

    /// `E[z^X]` for `X ~ mu^theta`, `z` in `[0, 1]`.
    pub fn pgf(&self, theta: f64, z: f64) -> f64 {
        match self {
            IdLaw::Poisson => (theta * (z - 1.0)).exp(),
            IdLaw::NegBinomial { p } => (p / (1.0 - (1.0 - p) * z)).powf(theta),
            IdLaw::GenericLevy { nu } => {
                let expo: f64 = nu
                    .iter()
                    .map(|(&j, &m)| (z.powi(j as i32) - 1.0) * m)
                    .sum();
                (theta * expo).exp()
            }
        }
    }

    pub fn mean(&self, theta: f64) -> f64 {
        match self {
            IdLaw::Poisson => theta,
            IdLaw::NegBinomial { p } => theta * (1.0 - p) / p,
            IdLaw::GenericLevy { nu } => theta * nu.iter().map(|(&j, &m)| j as f64 * m).sum::<f64>(),
        }
    }

    pub fn variance(&self, theta: f64) -> f64 {
        match self {
            IdLaw::Poisson => theta,
            IdLaw::NegBinomial { p } => theta * (1.0 - p) / (p * p),
            IdLaw::GenericLevy { nu } => {
                theta * nu.iter().map(|(&j, &m)| (j * j) as f64 * m).sum::<f64>()
            }
        }
    }

    /// One draw from `mu^theta`.
    pub fn sample<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> u64 {
        if theta <= 0.0 {
            return 0;
        }
        match self {
            IdLaw::Poisson => sample_poisson(theta, rng),
            IdLaw::NegBinomial { p } => sample_nb(theta, *p, rng),
            IdLaw::GenericLevy { nu } => {
                let total: f64 = nu.values().sum();
                if total <= 0.0 {
                    return 0;
                }
                let jumps = sample_poisson(theta * total, rng);
                if jumps == 0 {
                    return 0;
                }
                let sizes: Vec<u64> = nu.keys().copied().collect();
                let pick = WeightedIndex::new(nu.values().copied()).expect("positive weights");
                (0..jumps).map(|_| sizes[pick.sample(rng)]).sum()
            }
        }
    }

    /// One jump size from the normalized Levy measure `nu / nu_+`.
    ///
    /// Negative binomial jumps follow the logarithmic series law
    /// `q^j / (j log(1/p))`, drawn by inversion.
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            IdLaw::Poisson => 1,
            IdLaw::NegBinomial { p } => {
                let q = 1.0 - p;
                let norm = -p.ln();
                let u: f64 = rng.random::<f64>() * norm;
                let (mut j, mut qj, mut acc) = (1u64, q, q);
                while acc < u && qj > 0.0 {
                    j += 1;
                    qj *= q;
                    acc += qj / j as f64;
                }
                j
            }
            IdLaw::GenericLevy { nu } => {
                let total: f64 = nu.values().sum();
                let u: f64 = rng.random::<f64>() * total;
                let mut acc = 0.0;
                for (&j, &m) in nu {
                    acc += m;
                    if u < acc {
                        return j;
                    }
                }
                nu.keys().next_back().copied().unwrap_or(1)
            }
        }
    }
}

fn delta0(k_max: usize) -> Vec<f64> {
    let mut v = vec![0.0; k_max + 1];
    v[0] = 1.0;
    v
}

/// `NB(shape, p)` pmf on `0..=k_max` via log-gamma.
pub fn nb_pmf(shape: f64, p: f64, k_max: usize) -> Vec<f64> {
    if shape == 0.0 {
        return delta0(k_max);
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let lg_shape = ln_gamma(shape);
    (0..=k_max)
        .map(|k| {
            let k = k as f64;
            (ln_gamma(shape + k) - lg_shape - ln_gamma(k + 1.0) + shape * lp + k * lq).exp()
        })
        .collect()
}

pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// `NB(shape, p)` as a gamma-mixed Poisson.
pub fn sample_nb<R: Rng + ?Sized>(shape: f64, p: f64, rng: &mut R) -> u64 {
    if shape <= 0.0 {
        return 0;
    }
    let rate = Gamma::new(shape, (1.0 - p) / p)
        .expect("positive shape and scale")
        .sample(rng);
    sample_poisson(rate, rng)
}
