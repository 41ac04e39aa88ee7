//! Executable checks of stationarity, time reversibility, the Markov property
//! and multivariate infinite divisibility on exact truncated tables, plus the
//! correlation and goodness-of-fit helpers used by the Monte Carlo tests.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use twofloat::TwoFloat;

use crate::discrete::{rm_joint_pmf, ProcessSpec, Trajectory, DEFAULT_BUDGET};
use crate::error::{invalid, Error, Result};
use crate::joint::JointPmf;
use crate::series::{Scalar, TruncSeries};

pub const STATIONARITY_TOL: f64 = 1e-9;
pub const REVERSIBILITY_TOL: f64 = 1e-10;
pub const MARKOV_TOL: f64 = 1e-9;
pub const MVID_TOL_STANDARD: f64 = 1e-8;
pub const MVID_TOL_EXTENDED: f64 = 1e-12;
/// Conditioning values rarer than this are skipped.
pub const CONDITIONING_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub name: String,
    pub violation: f64,
    pub witness: Vec<usize>,
    pub tolerance: f64,
    pub pass: bool,
    /// Signed statistic behind `violation` where that differs (the smallest
    /// log coefficient for the infinite-divisibility check).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Conditioning rows skipped for having negligible probability.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<usize>,
}

impl VerifyReport {
    pub fn new(name: impl Into<String>, violation: f64, witness: Vec<usize>, tolerance: f64) -> Self {
        VerifyReport {
            name: name.into(),
            violation,
            witness,
            tolerance,
            pass: violation <= tolerance,
            value: None,
            skipped: None,
        }
    }

    /// One JSON object, no trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report fields are plain data")
    }
}

fn check_times(times: &[i64]) -> Result<()> {
    if times.is_empty() {
        return Err(invalid("times", "at least one time is required"));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::UnsortedTimes);
    }
    Ok(())
}

/// Exact joint pmf of `(X_t)_{t in times}` on `{0..=k}^n`.
///
/// Markov constructions use forward products of the marginal and the
/// transition rows (the chain is started at time 0 for tabulated chains);
/// the random-measure process convolves its cells.
pub fn chain_joint_pmf(spec: &ProcessSpec, times: &[i64], k: usize) -> Result<JointPmf> {
    spec.validate()?;
    check_times(times)?;
    if let ProcessSpec::RandomMeasure { law, theta, rho } = spec {
        return rm_joint_pmf(law, *theta, *rho, times, k);
    }
    let side = k + 1;
    let n = times.len();
    match side.checked_pow(n as u32) {
        Some(c) if c <= DEFAULT_BUDGET => {}
        _ => {
            return Err(Error::BudgetExceeded {
                cells: side.saturating_pow(n as u32),
                budget: DEFAULT_BUDGET,
            })
        }
    }
    let mut table = match spec {
        ProcessSpec::Tabulated(chain) => {
            if times[0] < 0 {
                return Err(invalid("times", "a tabulated chain starts at time 0"));
            }
            let m = chain.states().max(side);
            let mut law = chain.initial.clone();
            law.resize(m, 0.0);
            let step = spec.transition_lag(m - 1, 1)?;
            for _ in 0..times[0] {
                law = step.t().dot(&ndarray::Array1::from(law)).to_vec();
            }
            law.truncate(side);
            law
        }
        _ => spec.marginal_pmf(k),
    };
    for w in times.windows(2) {
        let step = spec.transition_lag(k, (w[1] - w[0]) as u64)?;
        let mut next = Vec::with_capacity(table.len() * side);
        for (pos, &mass) in table.iter().enumerate() {
            let x = pos % side;
            next.extend(step.row(x).iter().map(|q| mass * q));
        }
        table = next;
    }
    JointPmf::new(times.to_vec(), k, table)
}

/// Compares the tables at `window` and at `window + s` for `s in {1, 2}`.
pub fn check_stationarity(spec: &ProcessSpec, window: &[i64], k: usize) -> Result<VerifyReport> {
    let base = chain_joint_pmf(spec, window, k)?;
    let mut worst = (0.0, vec![0; window.len()]);
    for s in [1, 2] {
        let shifted: Vec<i64> = window.iter().map(|t| t + s).collect();
        let other = chain_joint_pmf(spec, &shifted, k)?;
        let (d, at) = base.sup_diff(&other)?;
        if d > worst.0 {
            worst = (d, at);
        }
    }
    Ok(VerifyReport::new("stationarity", worst.0, worst.1, STATIONARITY_TOL))
}

/// `sup |p(x) q(y|x) - p(y) q(x|y)|` for Markov constructions; for the
/// random-measure process the trivariate table against its time reversal.
pub fn check_reversibility(spec: &ProcessSpec, k: usize) -> Result<VerifyReport> {
    if !spec.is_markov() {
        let j = chain_joint_pmf(spec, &[0, 1, 2], k)?;
        let (d, at) = j.sup_diff(&j.reflected())?;
        return Ok(VerifyReport::new("reversibility", d, at, REVERSIBILITY_TOL));
    }
    let pi = spec.marginal_pmf(k);
    let q = spec.transition_matrix(k)?;
    let mut worst = (0.0, vec![0, 0]);
    for x in 0..=k {
        for y in x + 1..=k {
            let d = (pi[x] * q[[x, y]] - pi[y] * q[[y, x]]).abs();
            if d > worst.0 {
                worst = (d, vec![x, y]);
            }
        }
    }
    Ok(VerifyReport::new("reversibility", worst.0, worst.1, REVERSIBILITY_TOL))
}

struct TripleConditionals {
    middle: Vec<f64>,
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
}

fn triple_conditionals(j3: &JointPmf) -> Result<TripleConditionals> {
    if j3.dim() != 3 {
        return Err(Error::ShapeMismatch(format!("expected 3 times, got {}", j3.dim())));
    }
    let side = j3.k() + 1;
    let mut middle = vec![0.0; side];
    let mut left = vec![vec![0.0; side]; side];
    let mut right = vec![vec![0.0; side]; side];
    for a in 0..side {
        for b in 0..side {
            for c in 0..side {
                let p = j3.get(&[a, b, c]);
                middle[b] += p;
                left[b][a] += p;
                right[b][c] += p;
            }
        }
    }
    Ok(TripleConditionals { middle, left, right })
}

/// `|P[a, c | b] - P[a | b] P[c | b]|` at one lattice point.
pub fn markov_gap_at(j3: &JointPmf, a: usize, b: usize, c: usize) -> Result<f64> {
    let t = triple_conditionals(j3)?;
    let pb = t.middle[b];
    if pb < CONDITIONING_FLOOR {
        return Err(Error::ZeroProbability(b as u64));
    }
    Ok((j3.get(&[a, b, c]) / pb - (t.left[b][a] / pb) * (t.right[b][c] / pb)).abs())
}

/// Conditional independence of the outer coordinates given the middle one:
/// `max_b sup_{a,c} |P[a, c | b] - P[a | b] P[c | b]|`.
///
/// The conditionals are read off the table, so the lattice must carry
/// essentially all the mass of the rows it conditions on.
pub fn check_markov_triple(j3: &JointPmf) -> Result<VerifyReport> {
    let t = triple_conditionals(j3)?;
    let side = j3.k() + 1;
    let mut worst = (0.0, vec![0, 0, 0]);
    let mut skipped = 0;
    for b in 0..side {
        let pb = t.middle[b];
        if pb < CONDITIONING_FLOOR {
            skipped += 1;
            continue;
        }
        for a in 0..side {
            let pa = t.left[b][a] / pb;
            for c in 0..side {
                let d = (j3.get(&[a, b, c]) / pb - pa * t.right[b][c] / pb).abs();
                if d > worst.0 {
                    worst = (d, vec![a, b, c]);
                }
            }
        }
    }
    let mut r = VerifyReport::new("markov-triple", worst.0, worst.1, MARKOV_TOL);
    r.skipped = Some(skipped);
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Standard,
    Extended,
}

impl Precision {
    pub fn tolerance(self) -> f64 {
        match self {
            Precision::Standard => MVID_TOL_STANDARD,
            Precision::Extended => MVID_TOL_EXTENDED,
        }
    }
}

/// Bound on how far the lattice truncation can move the log coefficients of
/// degree `<= maxdeg`.
///
/// With `k >= maxdeg` every pgf coefficient of degree `<= maxdeg` is a full
/// table entry, so the log coefficients up to that degree are exact. With a
/// smaller lattice missing entries of mass at most `leaked` shift each
/// coefficient by at most `leaked / P[0]`.
pub fn mvid_leak_bound(j: &JointPmf, maxdeg: u32) -> f64 {
    if j.k() >= maxdeg as usize {
        0.0
    } else {
        j.leaked() / j.get(&vec![0; j.dim()]).max(f64::MIN_POSITIVE)
    }
}

fn min_log_coefficient<T: Scalar>(pgf: &TruncSeries<T>) -> Result<(Vec<u32>, f64)> {
    let log = pgf.log()?;
    let (idx, c) = log
        .min_nonconstant()
        .ok_or_else(|| invalid("degree", "no non-constant coefficients at degree 0"))?;
    Ok((idx, c.to_f64()))
}

/// Multivariate infinite divisibility: every non-constant coefficient of the
/// log-pgf, up to total degree `maxdeg`, must be nonnegative.
pub fn check_mvid(j: &JointPmf, maxdeg: u32, precision: Precision) -> Result<VerifyReport> {
    let pgf = TruncSeries::<f64>::from_joint_pmf(j, maxdeg)?;
    let c0 = pgf.constant_term();
    if !(c0 > 0.0) {
        return Err(Error::NonPositiveConstant(c0));
    }
    let (idx, min) = match precision {
        Precision::Standard => min_log_coefficient(&pgf)?,
        Precision::Extended => min_log_coefficient(&pgf.cast::<TwoFloat>())?,
    };
    let tol = precision.tolerance() + mvid_leak_bound(j, maxdeg);
    let witness = idx.iter().map(|&i| i as usize).collect();
    let mut r = VerifyReport::new("mvid", (-min).max(0.0), witness, tol);
    r.value = Some(min);
    Ok(r)
}

/// `Corr(X_0, X_lag)` from the exact bivariate table on `{0..=k}^2`.
pub fn autocorr_exact(spec: &ProcessSpec, lag: u64, k: usize) -> Result<f64> {
    if lag == 0 {
        return Ok(1.0);
    }
    let j = chain_joint_pmf(spec, &[0, lag as i64], k)?;
    let (mut m0, mut m1, mut s0, mut s1, mut cross, mut tot) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for x in 0..=k {
        for y in 0..=k {
            let p = j.get(&[x, y]);
            let (xf, yf) = (x as f64, y as f64);
            tot += p;
            m0 += p * xf;
            m1 += p * yf;
            s0 += p * xf * xf;
            s1 += p * yf * yf;
            cross += p * xf * yf;
        }
    }
    let (m0, m1, s0, s1, cross) = (m0 / tot, m1 / tot, s0 / tot, s1 / tot, cross / tot);
    let v0 = s0 - m0 * m0;
    let v1 = s1 - m1 * m1;
    if v0 <= 1e-14 || v1 <= 1e-14 {
        return Err(Error::DegenerateVariance);
    }
    Ok((cross - m0 * m1) / (v0 * v1).sqrt())
}

/// Sample autocorrelation `c_lag / c_0` with the overall mean.
pub fn autocorr_mc(path: &Trajectory, lag: usize) -> Result<f64> {
    let n = path.values.len();
    if lag >= n {
        return Err(invalid("lag", format!("{lag} is not below the path length {n}")));
    }
    let xs: Vec<f64> = path.values.iter().map(|&v| v as f64).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    if c0 <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let ck: f64 = xs.iter().zip(&xs[lag..]).map(|(a, b)| (a - mean) * (b - mean)).sum();
    Ok(ck / c0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of `samples` against `probs` on `0..probs.len()`
/// (remaining mass forms one extra bin). Bins are pooled from the top until
/// each expects at least `min_expected` counts.
pub fn chi_square_gof(samples: &[u64], probs: &[f64], min_expected: f64) -> Result<ChiSquareResult> {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return Err(invalid("samples", "no samples"));
    }
    let m = probs.len();
    let mut counts = vec![0.0f64; m + 1];
    for &s in samples {
        counts[(s as usize).min(m)] += 1.0;
    }
    let mut expected: Vec<f64> = probs.iter().map(|p| p * n).collect();
    expected.push((1.0 - probs.iter().sum::<f64>()).max(0.0) * n);

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for i in (0..=m).rev() {
        obs += counts[i];
        exp += expected[i];
        if exp >= min_expected {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => bins.push((obs, exp)),
        }
    }
    if bins.len() < 2 {
        return Err(invalid("probs", "fewer than two bins after pooling"));
    }
    let statistic = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len() - 1;
    let p_value = 1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic);
    Ok(ChiSquareResult { statistic, dof, p_value })
}

/// `E[s^{X_1} | X_2 = j]` from the first two axes of a table.
pub fn conditional_pgf(j: &JointPmf, cond: usize, s: f64) -> Result<f64> {
    if j.dim() < 2 {
        return Err(Error::ShapeMismatch("need at least two times".into()));
    }
    let side = j.k() + 1;
    let mut num = 0.0;
    let mut den = 0.0;
    for (cell, &p) in j.table().iter().enumerate() {
        let idx = j.unravel(cell);
        if idx[1] == cond {
            num += p * s.powi(idx[0] as i32);
            den += p;
        }
    }
    if den < CONDITIONING_FLOOR || cond >= side {
        return Err(Error::ZeroProbability(cond as u64));
    }
    Ok(num / den)
}

/// Largest `|phi(s|j+1) phi(s|j-1) - phi(s|j)^2|` over `j in 1..=max_j` and
/// the grid, where `phi(s|j) = E[s^{X_1} | X_2 = j]`. Zero for chains whose
/// conditional pgf is a fixed function times a `j`-th power.
pub fn psi_ratio_violation(j: &JointPmf, max_j: usize, grid: &[f64]) -> Result<(f64, Vec<usize>)> {
    let mut worst = (0.0, vec![0, 0]);
    for (gi, &s) in grid.iter().enumerate() {
        let phi: Vec<f64> = (0..=max_j + 1).map(|c| conditional_pgf(j, c, s)).collect::<Result<_>>()?;
        for c in 1..=max_j {
            let d = (phi[c + 1] * phi[c - 1] - phi[c] * phi[c]).abs();
            if d > worst.0 {
                worst = (d, vec![c, gi]);
            }
        }
    }
    Ok(worst)
}
