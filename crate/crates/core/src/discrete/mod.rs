//! Discrete-time stationary integer-valued processes: thinning, random
//! measure, the branching chains, and the two degenerate cases.

mod branching;
mod classify;
mod gf;
mod measure;
mod thinning;

pub use branching::*;
pub use classify::*;
pub use gf::*;
pub use measure::*;
pub use thinning::*;

use ndarray::{s, Array2};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::Serialize;

use crate::ctmc::{self, BdModel};
use crate::error::{invalid, Result};
use crate::idlaw::{nb_pmf, sample_nb, sample_poisson, IdLaw};

/// Values `X_{t0}, X_{t0+1}, ...` on consecutive integer times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub t0: i64,
    pub values: Vec<u64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.t0 + i as i64, v))
    }
}

/// A Markov chain on `{0..m-1}` given by its initial law and transition
/// matrix. Not required to be stationary or reversible.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    pub initial: Vec<f64>,
    pub transition: Array2<f64>,
}

impl FiniteChain {
    pub fn new(initial: Vec<f64>, transition: Array2<f64>) -> Result<Self> {
        let m = initial.len();
        if m == 0 || transition.dim() != (m, m) {
            return Err(crate::error::Error::ShapeMismatch(format!(
                "initial law has {m} states, transition is {:?}",
                transition.dim()
            )));
        }
        if initial.iter().chain(transition.iter()).any(|v| !(*v >= 0.0)) {
            return Err(invalid("transition", "entries must be nonnegative"));
        }
        for row in transition.rows() {
            if (row.sum() - 1.0).abs() > 1e-12 {
                return Err(invalid("transition", "rows must sum to 1"));
            }
        }
        Ok(FiniteChain { initial, transition })
    }

    pub fn states(&self) -> usize {
        self.initial.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProcessSpec {
    Thinning { law: IdLaw, theta: f64, rho: f64 },
    RandomMeasure { law: IdLaw, theta: f64, rho: f64 },
    BranchingPoisson { theta: f64, rho: f64 },
    BranchingNb { alpha: f64, p: f64, rho: f64 },
    Constant { law: IdLaw, theta: f64 },
    Iid { law: IdLaw, theta: f64 },
    /// A birth-death chain observed at integer times.
    BirthDeath(BdModel),
    /// An explicit finite chain, used for counterexamples.
    Tabulated(FiniteChain),
}

fn check_law(law: &IdLaw) -> Result<()> {
    if law.has_full_support() {
        Ok(())
    } else {
        Err(invalid("law", "needs positive Levy mass at 1"))
    }
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Thinning { law, theta, rho } | ProcessSpec::RandomMeasure { law, theta, rho } => {
                check_law(law)?;
                check_theta(*theta)?;
                check_rho(*rho)
            }
            ProcessSpec::BranchingPoisson { theta, rho } => {
                check_theta(*theta)?;
                check_rho(*rho)
            }
            ProcessSpec::BranchingNb { alpha, p, rho } => {
                branching::check_alpha(*alpha)?;
                branching::check_p(*p)?;
                check_rho(*rho)
            }
            ProcessSpec::Constant { law, theta } | ProcessSpec::Iid { law, theta } => {
                check_law(law)?;
                check_theta(*theta)
            }
            ProcessSpec::BirthDeath(_) | ProcessSpec::Tabulated(_) => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProcessSpec::Thinning { .. } => "thinning",
            ProcessSpec::RandomMeasure { .. } => "random-measure",
            ProcessSpec::BranchingPoisson { .. } => "branching-poisson",
            ProcessSpec::BranchingNb { .. } => "branching-nb",
            ProcessSpec::Constant { .. } => "constant",
            ProcessSpec::Iid { .. } => "iid",
            ProcessSpec::BirthDeath(BdModel::Poisson { .. }) => "poisson-bd",
            ProcessSpec::BirthDeath(BdModel::NegBinomial { .. }) => "nb-bd",
            ProcessSpec::Tabulated(_) => "tabulated",
        }
    }

    /// Whether the construction is a Markov chain by definition (the
    /// random-measure process is handled through its cell tables).
    pub fn is_markov(&self) -> bool {
        !matches!(self, ProcessSpec::RandomMeasure { .. })
    }

    /// Law of `X_t` on `0..=k` (the initial law for tabulated chains).
    pub fn marginal_pmf(&self, k: usize) -> Vec<f64> {
        match self {
            ProcessSpec::Thinning { law, theta, .. }
            | ProcessSpec::RandomMeasure { law, theta, .. }
            | ProcessSpec::Constant { law, theta }
            | ProcessSpec::Iid { law, theta } => law.pmf(*theta, k),
            ProcessSpec::BranchingPoisson { theta, .. } => IdLaw::Poisson.pmf(*theta, k),
            ProcessSpec::BranchingNb { alpha, p, .. } => nb_pmf(*alpha, *p, k),
            ProcessSpec::BirthDeath(model) => ctmc::stationary_bd(model, k).probs,
            ProcessSpec::Tabulated(chain) => {
                let mut v = chain.initial.clone();
                v.resize(k + 1, 0.0);
                v
            }
        }
    }

    fn one_step(&self, k: usize) -> Result<Array2<f64>> {
        Ok(match self {
            ProcessSpec::Thinning { law, theta, rho } => thinning_transition_matrix(law, *theta, *rho, k),
            ProcessSpec::BranchingPoisson { theta, rho } => branching_poisson_matrix(*theta, *rho, k),
            ProcessSpec::BranchingNb { alpha, p, rho } => branching_nb_matrix(*alpha, *p, *rho, k),
            ProcessSpec::Constant { .. } => Array2::eye(k + 1),
            ProcessSpec::Iid { law, theta } => {
                let row = law.pmf(*theta, k);
                Array2::from_shape_fn((k + 1, k + 1), |(_, y)| row[y])
            }
            ProcessSpec::BirthDeath(model) => ctmc::transition_uniformized(model, 1.0, k)?.matrix,
            ProcessSpec::Tabulated(chain) => {
                let m = chain.states();
                Array2::from_shape_fn((k + 1, k + 1), |(x, y)| {
                    if x < m && y < m {
                        chain.transition[[x, y]]
                    } else {
                        0.0
                    }
                })
            }
            ProcessSpec::RandomMeasure { .. } => {
                return Err(invalid("spec", "the random-measure process has no transition matrix"))
            }
        })
    }

    /// One-step transition probabilities `q(y|x)` for `x, y` in `0..=k`.
    pub fn transition_matrix(&self, k: usize) -> Result<Array2<f64>> {
        self.validate()?;
        self.one_step(k)
    }

    /// `P[X_{t+lag} = y | X_t = x]` for `x, y` in `0..=k`.
    ///
    /// Powers are taken on a wider lattice and restricted, so paths that
    /// leave `0..=k` in between still count.
    pub fn transition_lag(&self, k: usize, lag: u64) -> Result<Array2<f64>> {
        self.validate()?;
        match (self, lag) {
            (_, 0) => Ok(Array2::eye(k + 1)),
            (ProcessSpec::BirthDeath(model), _) => Ok(ctmc::transition_uniformized(model, lag as f64, k)?.matrix),
            (_, 1) => self.one_step(k),
            (ProcessSpec::Thinning { law, theta, rho }, _) => {
                Ok(thinning_transition_matrix(law, *theta, rho.powi(lag.min(i32::MAX as u64) as i32), k))
            }
            (ProcessSpec::Constant { .. } | ProcessSpec::Iid { .. }, _) => self.one_step(k),
            _ => {
                let wide = match self {
                    ProcessSpec::Tabulated(c) => k.max(c.states() - 1),
                    _ => ctmc::working_bound(k),
                };
                let step = self.one_step(wide)?;
                let mut acc = step.clone();
                for _ in 1..lag {
                    acc = acc.dot(&step);
                }
                Ok(acc.slice(s![..=k, ..=k]).to_owned())
            }
        }
    }

    /// A path at `t0, ..., t0 + n - 1`, started from the marginal law.
    pub fn simulate<R: Rng + ?Sized>(&self, t0: i64, n: usize, rng: &mut R) -> Result<Trajectory> {
        self.validate()?;
        if n == 0 {
            return Err(invalid("n", "trajectory needs at least one step"));
        }
        let values = match self {
            ProcessSpec::Thinning { law, theta, rho } => return simulate_thinning(law, *theta, *rho, t0, n, rng),
            ProcessSpec::RandomMeasure { law, theta, rho } => {
                return rm_simulate_path(law, *theta, *rho, t0, n, rng)
            }
            ProcessSpec::BranchingPoisson { theta, rho } => {
                let mut x = sample_poisson(*theta, rng);
                let mut v = vec![x];
                for _ in 1..n {
                    x = branching_step_poisson(x, *theta, *rho, rng)?;
                    v.push(x);
                }
                v
            }
            ProcessSpec::BranchingNb { alpha, p, rho } => {
                let mut x = sample_nb(*alpha, *p, rng);
                let mut v = vec![x];
                for _ in 1..n {
                    x = branching_step_nb(x, *alpha, *p, *rho, rng)?;
                    v.push(x);
                }
                v
            }
            ProcessSpec::Constant { law, theta } => vec![law.sample(*theta, rng); n],
            ProcessSpec::Iid { law, theta } => (0..n).map(|_| law.sample(*theta, rng)).collect(),
            ProcessSpec::BirthDeath(model) => {
                let x0 = match *model {
                    BdModel::Poisson { theta, .. } => sample_poisson(theta, rng),
                    BdModel::NegBinomial { alpha, p, .. } => sample_nb(alpha, p, rng),
                };
                let path = ctmc::gillespie(model, x0, (n - 1).max(1) as f64, rng)?;
                path.grid(1.0).take(n).map(|(_, x)| x).collect()
            }
            ProcessSpec::Tabulated(chain) => {
                let pick = |w: &[f64], rng: &mut R| -> u64 {
                    WeightedIndex::new(w).expect("a row with positive mass").sample(rng) as u64
                };
                let mut x = pick(&chain.initial, rng);
                let mut v = vec![x];
                for _ in 1..n {
                    let row = chain.transition.row(x as usize).to_vec();
                    x = pick(&row, rng);
                    v.push(x);
                }
                v
            }
        };
        Ok(Trajectory { t0, values })
    }
}
