use serde::Serialize;

use crate::error::{Error, Result};

/// Exact joint pmf of `(X_t)_{t in times}` restricted to the lattice
/// `{0..=k}^n`, stored row-major with the first time most significant.
/// `leaked` is the probability outside the lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointPmf {
    times: Vec<i64>,
    k: usize,
    table: Vec<f64>,
    leaked: f64,
}

impl JointPmf {
    pub fn new(times: Vec<i64>, k: usize, table: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidParameter {
                name: "times",
                reason: "at least one time is required".into(),
            });
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedTimes);
        }
        let cells = (k + 1).pow(times.len() as u32);
        if table.len() != cells {
            return Err(Error::ShapeMismatch(format!(
                "table of {} entries for {} cells",
                table.len(),
                cells
            )));
        }
        if let Some(bad) = table.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "table",
                reason: format!("entry {bad} is not a probability"),
            });
        }
        let leaked = (1.0 - table.iter().sum::<f64>()).max(0.0);
        Ok(JointPmf { times, k, table, leaked })
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.times.len()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn leaked(&self) -> f64 {
        self.leaked
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * (self.k + 1) + i)
    }

    pub fn unravel_into(&self, mut cell: usize, out: &mut [u32]) {
        for slot in out.iter_mut().rev() {
            *slot = (cell % (self.k + 1)) as u32;
            cell /= self.k + 1;
        }
    }

    pub fn unravel(&self, cell: usize) -> Vec<usize> {
        let mut idx = vec![0u32; self.dim()];
        self.unravel_into(cell, &mut idx);
        idx.into_iter().map(|i| i as usize).collect()
    }

    /// Probability at a lattice point; zero outside the lattice.
    pub fn get(&self, idx: &[usize]) -> f64 {
        if idx.len() != self.dim() || idx.iter().any(|&i| i > self.k) {
            return 0.0;
        }
        self.table[self.ravel(idx)]
    }

    /// Captured univariate marginal along `axis`.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.k + 1];
        let mut idx = vec![0u32; self.dim()];
        for (cell, &p) in self.table.iter().enumerate() {
            self.unravel_into(cell, &mut idx);
            out[idx[axis] as usize] += p;
        }
        out
    }

    /// Same table with the time axis reversed: the law of `X_{-T}` read in
    /// increasing time order.
    pub fn reflected(&self) -> JointPmf {
        let mut table = vec![0.0; self.table.len()];
        let mut idx = vec![0u32; self.dim()];
        for (cell, &p) in self.table.iter().enumerate() {
            self.unravel_into(cell, &mut idx);
            let rev: Vec<usize> = idx.iter().rev().map(|&i| i as usize).collect();
            table[self.ravel(&rev)] = p;
        }
        let last = *self.times.last().expect("nonempty");
        let times = self.times.iter().rev().map(|t| last - t + self.times[0]).collect();
        JointPmf { times, k: self.k, table, leaked: self.leaked }
    }

    /// Largest absolute entrywise difference and where it occurs.
    pub fn sup_diff(&self, other: &JointPmf) -> Result<(f64, Vec<usize>)> {
        if self.k != other.k || self.dim() != other.dim() {
            return Err(Error::ShapeMismatch("joint pmfs on different lattices".into()));
        }
        let (cell, diff) = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (a - b).abs())
            .enumerate()
            .fold((0, 0.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
        Ok((diff, self.unravel(cell)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let table: Vec<f64> = (0..27).map(|i| i as f64 / 351.0).collect();
        let j = JointPmf::new(vec![1, 2, 3], 2, table).unwrap();
        for cell in 0..27 {
            assert_eq!(j.ravel(&j.unravel(cell)), cell);
        }
        assert_eq!(j.get(&[1, 0, 2]), j.table()[9 + 2] );
        assert_eq!(j.get(&[3, 0, 0]), 0.0);
        assert!(j.leaked() < 1e-15);
    }

    #[test]
    fn reflection_reverses_axes() {
        let mut table = vec![0.0; 9];
        table[1] = 0.25; // (0,1)
        table[5] = 0.75; // (1,2)
        let j = JointPmf::new(vec![0, 4], 2, table).unwrap();
        let r = j.reflected();
        assert_eq!(r.get(&[1, 0]), 0.25);
        assert_eq!(r.get(&[2, 1]), 0.75);
        assert_eq!(r.times(), &[0, 4]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(JointPmf::new(vec![2, 1], 1, vec![0.25; 4]), Err(Error::UnsortedTimes)));
        assert!(JointPmf::new(vec![1, 2], 1, vec![0.25; 3]).is_err());
        assert!(JointPmf::new(vec![1], 1, vec![-0.1, 1.1]).is_err());
    }
}
