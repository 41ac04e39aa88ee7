//! The random-measure construction `X_t = N(G_t)`.
//!
//! For times `t_1 < ... < t_n` the tent sets `G_t` (with
//! `|G_s ∩ G_t| = theta rho^{|s-t|}`) cut the plane into one finite cell per
//! index interval `[i..j]`: the points lying in exactly `G_{t_i}, ..., G_{t_j}`.
//! Each cell carries an independent `mu^{area}` count and `X_{t_m}` is the sum
//! over the cells whose interval contains `m`.

use rand::Rng;

use super::thinning::{check_rho, check_theta};
use crate::error::{Error, Result};
use crate::idlaw::IdLaw;
use crate::joint::JointPmf;

/// Default upper bound on lattice cells for exact tables.
pub const DEFAULT_BUDGET: usize = 50_000_000;

/// One cell: zero-based inclusive index interval and its area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub first: usize,
    pub last: usize,
    pub area: f64,
}

impl Cell {
    pub fn contains(&self, m: usize) -> bool {
        self.first <= m && m <= self.last
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDecomposition {
    pub times: Vec<i64>,
    pub theta: f64,
    pub rho: f64,
    /// Ordered by `first`, then `last`.
    pub cells: Vec<Cell>,
}

impl CellDecomposition {
    /// Area of the cell for the zero-based interval `[first..=last]`.
    pub fn area(&self, first: usize, last: usize) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.first == first && c.last == last)
            .map(|c| c.area)
    }

    /// Total area over cells containing time index `m` (equals `theta`).
    pub fn time_total(&self, m: usize) -> f64 {
        self.cells.iter().filter(|c| c.contains(m)).map(|c| c.area).sum()
    }

    /// `|G_{t_a} ∩ G_{t_b}|` from the cells (equals `theta rho^{|t_b - t_a|}`).
    pub fn pair_total(&self, a: usize, b: usize) -> f64 {
        let (lo, hi) = (a.min(b), a.max(b));
        self.cells
            .iter()
            .filter(|c| c.first <= lo && c.last >= hi)
            .map(|c| c.area)
            .sum()
    }
}

/// Cell areas for the given strictly increasing times:
/// `theta rho^{t_j - t_i} (1 - rho^{t_i - t_{i-1}}) (1 - rho^{t_{j+1} - t_j})`,
/// a missing neighbour contributing a factor 1.
pub fn cell_measures(times: &[i64], theta: f64, rho: f64) -> Result<CellDecomposition> {
    check_theta(theta)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(crate::error::invalid("rho", format!("{rho} not in [0,1]")));
    }
    if times.is_empty() {
        return Err(crate::error::invalid("times", "at least one time is required"));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::UnsortedTimes);
    }
    let n = times.len();
    let pow = |d: i64| rho.powi(d as i32);
    let mut cells = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        let left = if i == 0 { 1.0 } else { 1.0 - pow(times[i] - times[i - 1]) };
        for j in i..n {
            let right = if j + 1 == n { 1.0 } else { 1.0 - pow(times[j + 1] - times[j]) };
            cells.push(Cell {
                first: i,
                last: j,
                area: theta * pow(times[j] - times[i]) * left * right,
            });
        }
    }
    Ok(CellDecomposition {
        times: times.to_vec(),
        theta,
        rho,
        cells,
    })
}

/// One joint draw of `(X_{t_1}, ..., X_{t_n})`.
pub fn rm_simulate<R: Rng + ?Sized>(
    law: &IdLaw,
    theta: f64,
    rho: f64,
    times: &[i64],
    rng: &mut R,
) -> Result<Vec<u64>> {
    check_rho(rho)?;
    let cells = cell_measures(times, theta, rho)?;
    Ok(rm_sample_cells(law, &cells, rng))
}

/// Draw from a prepared decomposition; reuse it for repeated draws.
pub fn rm_sample_cells<R: Rng + ?Sized>(law: &IdLaw, cells: &CellDecomposition, rng: &mut R) -> Vec<u64> {
    let mut values = vec![0u64; cells.times.len()];
    for c in &cells.cells {
        let z = law.sample(c.area, rng);
        if z > 0 {
            for v in &mut values[c.first..=c.last] {
                *v += z;
            }
        }
    }
    values
}

/// A path of the random-measure process at the consecutive times
/// `t0, ..., t0 + n - 1`.
///
/// Works with the points of the underlying compound Poisson measure instead
/// of the `n (n + 1) / 2` cells: the cells `[i..j]` opening at `i` carry total
/// area `theta` (or `theta (1 - rho)` past the first time), and given a point
/// opens at `i` its span `j - i` is geometric with ratio `rho`, capped at the
/// last time. Each point adds a jump drawn from the normalized Levy measure
/// to every time it covers.
pub fn rm_simulate_path<R: Rng + ?Sized>(
    law: &IdLaw,
    theta: f64,
    rho: f64,
    t0: i64,
    n: usize,
    rng: &mut R,
) -> Result<super::Trajectory> {
    check_theta(theta)?;
    check_rho(rho)?;
    if n == 0 {
        return Err(crate::error::invalid("n", "trajectory needs at least one step"));
    }
    let rate_first = law.total_levy_mass(theta);
    let rate_rest = law.total_levy_mass(theta * (1.0 - rho));
    let log_rho = rho.ln();
    // difference array: +z at the opening index, -z one past the closing one
    let mut diff = vec![0i64; n + 1];
    for i in 0..n {
        let rate = if i == 0 { rate_first } else { rate_rest };
        let points = crate::idlaw::sample_poisson(rate, rng);
        for _ in 0..points {
            let u: f64 = 1.0 - rng.random::<f64>();
            let span = (u.ln() / log_rho).floor();
            let last = if span >= (n - 1 - i) as f64 { n - 1 } else { i + span as usize };
            let z = law.sample_jump(rng) as i64;
            diff[i] += z;
            diff[last + 1] -= z;
        }
    }
    let mut acc = 0i64;
    let values = diff[..n]
        .iter()
        .map(|d| {
            acc += d;
            acc as u64
        })
        .collect();
    Ok(super::Trajectory { t0, values })
}

/// Exact joint pmf on `{0..=k}^n` by convolving the independent cell laws.
///
/// A cell value larger than `k` pushes every coordinate it touches off the
/// lattice, so per-cell pmfs truncated at `k` give exact entries.
pub fn rm_joint_pmf(law: &IdLaw, theta: f64, rho: f64, times: &[i64], k: usize) -> Result<JointPmf> {
    rm_joint_pmf_with_budget(law, theta, rho, times, k, DEFAULT_BUDGET)
}

pub fn rm_joint_pmf_with_budget(
    law: &IdLaw,
    theta: f64,
    rho: f64,
    times: &[i64],
    k: usize,
    budget: usize,
) -> Result<JointPmf> {
    let dec = cell_measures(times, theta, rho)?;
    let n = times.len();
    let side = k + 1;
    let size = side
        .checked_pow(n as u32)
        .filter(|&s| s <= budget)
        .ok_or(Error::BudgetExceeded {
            cells: side.saturating_pow(n as u32),
            budget,
        })?;

    // stride of each axis in the row-major table
    let strides: Vec<usize> = (0..n).map(|a| side.pow((n - 1 - a) as u32)).collect();
    let mut table = vec![0.0; size];
    table[0] = 1.0;
    let mut next = vec![0.0; size];
    let mut idx = vec![0usize; n];
    for cell in &dec.cells {
        let pmf = law.pmf(cell.area, k);
        let step: usize = (cell.first..=cell.last).map(|a| strides[a]).sum();
        next.iter_mut().for_each(|v| *v = 0.0);
        for (pos, &mass) in table.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            // largest shift keeping every touched coordinate on the lattice
            let mut rem = pos;
            for a in 0..n {
                idx[a] = rem / strides[a];
                rem %= strides[a];
            }
            let top = (cell.first..=cell.last).map(|a| idx[a]).max().unwrap_or(0);
            for (v, &pv) in pmf.iter().enumerate().take(side - top) {
                next[pos + v * step] += mass * pv;
            }
        }
        std::mem::swap(&mut table, &mut next);
    }
    JointPmf::new(times.to_vec(), k, table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn three_consecutive_times() {
        let d = cell_measures(&[1, 2, 3], 1.0, 0.5).unwrap();
        assert_eq!(d.cells.len(), 6);
        assert!(approx(d.area(0, 0).unwrap(), 0.5));
        assert!(approx(d.area(2, 2).unwrap(), 0.5));
        assert!(approx(d.area(1, 1).unwrap(), 0.25));
        assert!(approx(d.area(0, 1).unwrap(), 0.25));
        assert!(approx(d.area(1, 2).unwrap(), 0.25));
        assert!(approx(d.area(0, 2).unwrap(), 0.25));
    }

    #[test]
    fn single_time_and_gap() {
        let d = cell_measures(&[7], 2.5, 0.3).unwrap();
        assert_eq!(d.cells, vec![Cell { first: 0, last: 0, area: 2.5 }]);
        let d = cell_measures(&[0, 2], 1.0, 0.5).unwrap();
        assert!(approx(d.area(0, 0).unwrap(), 0.75));
        assert!(approx(d.area(0, 1).unwrap(), 0.25));
        assert!(approx(d.area(1, 1).unwrap(), 0.75));
    }

    #[test]
    fn unsorted_times_rejected() {
        assert!(matches!(cell_measures(&[1, 1], 1.0, 0.5), Err(Error::UnsortedTimes)));
        assert!(matches!(cell_measures(&[3, 2], 1.0, 0.5), Err(Error::UnsortedTimes)));
    }

    #[test]
    fn all_zero_event_factorizes() {
        let law = IdLaw::neg_binomial(0.5).unwrap();
        let j = rm_joint_pmf(&law, 1.0, 0.5, &[1, 2, 3], 4).unwrap();
        let dec = cell_measures(&[1, 2, 3], 1.0, 0.5).unwrap();
        let prod: f64 = dec.cells.iter().map(|c| law.pmf(c.area, 0)[0]).product();
        assert!((j.get(&[0, 0, 0]) - prod).abs() < 1e-15);
        // the areas sum to theta (1 + 2 (1 - rho)) = 2, so this is p^2
        assert!((prod - 0.25).abs() < 1e-15);
    }

    #[test]
    fn budget_guard() {
        let law = IdLaw::poisson();
        let r = rm_joint_pmf_with_budget(&law, 1.0, 0.5, &[1, 2, 3, 4], 20, 1000);
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn path_simulation_moments() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let law = IdLaw::neg_binomial(0.5).unwrap();
        let (theta, rho, n) = (1.5, 0.6, 100_000);
        let path = rm_simulate_path(&law, theta, rho, 0, n, &mut rng).unwrap();
        let xs: Vec<f64> = path.values.iter().map(|&v| v as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        // lag-1 correlation rho inflates the variance of the mean by (1+rho)/(1-rho)
        let se = (law.variance(theta) * (1.0 + rho) / (1.0 - rho) / n as f64).sqrt();
        assert!((mean - law.mean(theta)).abs() < 3.0 * se, "mean={mean}");
        let r1 = crate::verify::autocorr_mc(&path, 1).unwrap();
        let r2 = crate::verify::autocorr_mc(&path, 2).unwrap();
        assert!((r1 - rho).abs() < 0.02, "r1={r1}");
        assert!((r2 - rho * rho).abs() < 0.02, "r2={r2}");
    }
}
