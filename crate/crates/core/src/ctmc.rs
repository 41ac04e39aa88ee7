//! Continuous-time linear birth-death chains with immigration.
//!
//! * Poisson model: immigration `lambda theta`, per-capita death `lambda`;
//!   stationary law `Po(theta)`.
//! * Negative binomial model: births `lambda (alpha + j)(1-p)/p`, deaths
//!   `lambda j / p`; stationary law `NB(alpha, p)`.
//!
//! Both have autocorrelation `exp(-lambda |t - s|)` and their integer-time
//! skeletons are the branching chains with `rho = exp(-lambda)`.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

/// Poisson weights below this tail are dropped from the uniformization sum.
pub const UNIFORMIZATION_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum BdModel {
    Poisson { theta: f64, lambda: f64 },
    NegBinomial { alpha: f64, p: f64, lambda: f64 },
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(invalid("lambda", format!("{lambda} must be finite and nonnegative")))
    }
}

impl BdModel {
    pub fn poisson(theta: f64, lambda: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(invalid("theta", format!("{theta} must be positive")));
        }
        check_lambda(lambda)?;
        Ok(BdModel::Poisson { theta, lambda })
    }

    pub fn neg_binomial(alpha: f64, p: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("{alpha} must be positive")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid("p", format!("{p} not in (0,1)")));
        }
        check_lambda(lambda)?;
        Ok(BdModel::NegBinomial { alpha, p, lambda })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            BdModel::Poisson { lambda, .. } | BdModel::NegBinomial { lambda, .. } => lambda,
        }
    }

    /// Same model with a different time scale.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        match *self {
            BdModel::Poisson { theta, .. } => BdModel::Poisson { theta, lambda },
            BdModel::NegBinomial { alpha, p, .. } => BdModel::NegBinomial { alpha, p, lambda },
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            BdModel::Poisson { theta, .. } => theta,
            BdModel::NegBinomial { alpha, p, .. } => alpha * (1.0 - p) / p,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            BdModel::Poisson { theta, .. } => theta,
            BdModel::NegBinomial { alpha, p, .. } => alpha * (1.0 - p) / (p * p),
        }
    }
}

/// `(birth, death)` rates in state `j`.
pub fn bd_rates(model: &BdModel, j: u64) -> (f64, f64) {
    let jf = j as f64;
    match *model {
        BdModel::Poisson { theta, lambda } => (lambda * theta, lambda * jf),
        BdModel::NegBinomial { alpha, p, lambda } => (lambda * (alpha + jf) * (1.0 - p) / p, lambda * jf / p),
    }
}

/// Event-driven path stored as change points `(times[i], states[i])` on
/// `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<u64>,
    pub horizon: f64,
}

impl CtTrajectory {
    pub fn n_events(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state_at(&self, t: f64) -> u64 {
        let i = self.times.partition_point(|&s| s <= t);
        self.states[i.saturating_sub(1)]
    }

    /// The path read at `0, dt, 2 dt, ...` up to the horizon.
    pub fn grid(&self, dt: f64) -> impl Iterator<Item = (f64, u64)> + '_ {
        let n = (self.horizon / dt).floor() as usize;
        (0..=n).map(move |i| {
            let t = i as f64 * dt;
            (t, self.state_at(t))
        })
    }

    /// Fraction of `[0, horizon]` spent in each state `0..=k`.
    pub fn occupancy(&self, k: usize) -> Vec<f64> {
        let mut occ = vec![0.0; k + 1];
        for (i, &s) in self.states.iter().enumerate() {
            let end = self.times.get(i + 1).copied().unwrap_or(self.horizon);
            if (s as usize) <= k {
                occ[s as usize] += end - self.times[i];
            }
        }
        occ.iter_mut().for_each(|v| *v /= self.horizon);
        occ
    }

    /// Completed sojourn lengths in state `j` (the final, censored one is
    /// excluded).
    pub fn holding_times(&self, j: u64) -> Vec<f64> {
        (0..self.n_events())
            .filter(|&i| self.states[i] == j)
            .map(|i| self.times[i + 1] - self.times[i])
            .collect()
    }
}

pub fn gillespie<R: Rng + ?Sized>(model: &BdModel, x0: u64, horizon: f64, rng: &mut R) -> Result<CtTrajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", format!("{horizon} must be positive")));
    }
    let mut times = vec![0.0];
    let mut states = vec![x0];
    let (mut t, mut x) = (0.0, x0);
    loop {
        let (birth, death) = bd_rates(model, x);
        let total = birth + death;
        if total <= 0.0 {
            break;
        }
        t += Exp::new(total).expect("positive rate").sample(rng);
        if t > horizon {
            break;
        }
        let u: f64 = rng.random::<f64>() * total;
        x = if u < birth { x + 1 } else { x - 1 };
        times.push(t);
        states.push(x);
    }
    Ok(CtTrajectory { times, states, horizon })
}

/// Stationary pmf on `0..=k` with the mass beyond `k` in `tail`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryPmf {
    pub probs: Vec<f64>,
    pub tail: f64,
}

/// Detailed balance: `pi_i ∝ prod_{j<i} birth_j / death_{j+1}`.
///
/// Weights are accumulated past `k` until they are negligible, so the
/// returned entries carry the exact normalization rather than a
/// renormalization over `0..=k`.
pub fn stationary_bd(model: &BdModel, k: usize) -> StationaryPmf {
    let mut weights = vec![1.0f64];
    let mut i = 0u64;
    loop {
        let (birth, _) = bd_rates(model, i);
        let (_, death) = bd_rates(model, i + 1);
        let w = weights[i as usize] * birth / death;
        let past_mode = w <= weights[i as usize];
        weights.push(w);
        i += 1;
        let total: f64 = weights.iter().sum();
        if (i as usize) > k && past_mode && w < 1e-20 * total {
            break;
        }
        if i > 1_000_000 {
            break;
        }
    }
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights[..=k].iter().map(|w| w / total).collect();
    let tail = weights[k + 1..].iter().sum::<f64>() / total;
    StationaryPmf { probs, tail }
}

/// Residual of the balance equations `(pi Q)_j` on the truncated space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    /// `max_{j<k} |(pi Q)_j|`.
    pub interior: f64,
    /// `|(pi Q)_k|`, which lacks the inflow from `k + 1`.
    pub boundary: f64,
}

pub fn generator_residual(model: &BdModel, pmf: &[f64]) -> Residual {
    let k = pmf.len() - 1;
    let flow = |j: usize| {
        let (b, d) = bd_rates(model, j as u64);
        let mut r = -pmf[j] * (b + d);
        if j > 0 {
            r += pmf[j - 1] * bd_rates(model, j as u64 - 1).0;
        }
        if j < k {
            r += pmf[j + 1] * bd_rates(model, j as u64 + 1).1;
        }
        r
    };
    let interior = (0..k).map(|j| flow(j).abs()).fold(0.0, f64::max);
    Residual { interior, boundary: flow(k).abs() }
}

/// Truncated generator on `0..=k`; births out of state `k` leave the space.
pub fn generator(model: &BdModel, k: usize) -> Array2<f64> {
    let mut q = Array2::zeros((k + 1, k + 1));
    for j in 0..=k {
        let (b, d) = bd_rates(model, j as u64);
        q[[j, j]] = -(b + d);
        if j < k {
            q[[j, j + 1]] = b;
        }
        if j > 0 {
            q[[j, j - 1]] = d;
        }
    }
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uniformized {
    pub matrix: Array2<f64>,
    /// `max_x (1 - sum_y P_t(x, y))`.
    pub leakage: f64,
    /// Number of uniformization terms used.
    pub terms: usize,
}

fn uniformize(q: &Array2<f64>, t: f64) -> (Array2<f64>, usize) {
    let n = q.nrows();
    let rate = (0..n).map(|j| -q[[j, j]]).fold(0.0, f64::max);
    if t == 0.0 || rate == 0.0 {
        return (Array2::eye(n), 0);
    }
    let step = Array2::<f64>::eye(n) + q / rate;
    let mean = rate * t;
    let log_w = |m: usize| -mean + m as f64 * mean.ln() - ln_gamma(m as f64 + 1.0);
    let mut out = Array2::<f64>::zeros((n, n));
    let mut power = Array2::<f64>::eye(n);
    let mut cum = 0.0;
    let mut m = 0usize;
    loop {
        let w = log_w(m).exp();
        if w > 0.0 {
            out.scaled_add(w, &power);
        }
        cum += w;
        // past the mean the remaining Poisson tail is below the current term
        // times a geometric factor
        if m as f64 > mean && 1.0 - cum < UNIFORMIZATION_TAIL {
            break;
        }
        power = power.dot(&step);
        m += 1;
    }
    (out, m + 1)
}

fn leakage(m: &Array2<f64>) -> f64 {
    m.rows()
        .into_iter()
        .map(|r| 1.0 - r.sum())
        .fold(0.0, f64::max)
        .max(0.0)
}

/// `exp(t Q)` for the generator truncated to `0..=k`.
pub fn transition_uniformized_truncated(model: &BdModel, t: f64, k: usize) -> Result<Uniformized> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("{t} must be finite and nonnegative")));
    }
    let (matrix, terms) = uniformize(&generator(model, k), t);
    let leakage = leakage(&matrix);
    Ok(Uniformized { matrix, leakage, terms })
}

/// Extra states simulated above `k` so that paths briefly leaving `0..=k`
/// still return.
pub fn working_bound(k: usize) -> usize {
    2 * k + 20
}

/// Transition probabilities `P_t(x, y)` for `x, y` in `0..=k`.
///
/// Computed on `0..=working_bound(k)` and restricted, so entries are not
/// biased by the truncation; `leakage` is the largest row mass that falls
/// outside `0..=k` (never renormalized).
pub fn transition_uniformized(model: &BdModel, t: f64, k: usize) -> Result<Uniformized> {
    let wide = transition_uniformized_truncated(model, t, working_bound(k))?;
    let matrix = wide.matrix.slice(ndarray::s![..=k, ..=k]).to_owned();
    let leakage = leakage(&matrix);
    Ok(Uniformized { matrix, leakage, terms: wide.terms })
}

/// `Corr(X_0, X_t)` under the stationary law, from the exact transition
/// matrix on `0..=k`.
pub fn ct_autocorr(model: &BdModel, t: f64, k: usize) -> Result<f64> {
    let pi = stationary_bd(model, k).probs;
    let p = transition_uniformized(model, t, k)?.matrix;
    let mut m0 = 0.0;
    let mut s0 = 0.0;
    let mut mt = 0.0;
    let mut st = 0.0;
    let mut cross = 0.0;
    for x in 0..=k {
        let xf = x as f64;
        m0 += pi[x] * xf;
        s0 += pi[x] * xf * xf;
        for y in 0..=k {
            let w = pi[x] * p[[x, y]];
            let yf = y as f64;
            mt += w * yf;
            st += w * yf * yf;
            cross += w * xf * yf;
        }
    }
    let v0 = s0 - m0 * m0;
    let vt = st - mt * mt;
    if !(v0 > 0.0 && vt > 0.0) {
        return Err(crate::error::Error::DegenerateVariance);
    }
    Ok((cross - m0 * mt) / (v0 * vt).sqrt())
}
