//! Command-line front end: `simulate`, `table`, `verify` and `classify`.
//!
//! Every option can also come from a `key = value` file given with
//! `--config`; flags on the command line win.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ctmc::{self, BdModel};
use crate::discrete::{
    misti_classify, random_measure_nb_zero_two_zero, thinning_nb_zero_two_zero, MistiFamily, ProcessSpec,
};
use crate::error::{Error, Result};
use crate::idlaw::IdLaw;
use crate::joint::JointPmf;
use crate::verify::{self, chain_joint_pmf, Precision, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_POLARITY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Lattice used for tables whose conditionals are read off directly.
pub const CONDITIONAL_LATTICE: usize = 40;

#[derive(Debug, Parser)]
#[command(name = "misti", version, about = "Stationary reversible integer-valued processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trajectory.
    Simulate(Invocation),
    /// Tabulate `P[X_1 = 0, X_3 = 0 | X_2 = 2]` for the two negative binomial
    /// constructions over a parameter grid.
    Table(Invocation),
    /// Run a verification suite.
    Verify(Invocation),
    /// Identify the family behind an offspring sequence head.
    Classify(Invocation),
}

#[derive(Debug, Args)]
pub struct Invocation {
    /// `key = value` file; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the merged configuration and exit.
    #[arg(long)]
    pub dump_config: bool,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct RunConfig {
    /// thinning, random-measure, branching-poisson, branching-nb, constant,
    /// iid, poisson-bd or nb-bd.
    #[arg(long)]
    pub process: Option<String>,
    /// Marginal family for thinning, random-measure, constant and iid: poisson or nb.
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of discrete time steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<i64>,
    /// Time horizon of a continuous-time path.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Initial state of a continuous-time path (stationary draw if absent).
    #[arg(long)]
    pub x0: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lattice bound.
    #[arg(long)]
    pub k: Option<usize>,
    /// Total degree of the log-pgf.
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// theorem1, theorem2, theorem3, poisson-coincidence, continuous-time or all.
    #[arg(long)]
    pub suite: Option<String>,
    /// Use double-double arithmetic for the infinite-divisibility check.
    #[arg(long)]
    pub extended: Option<bool>,
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long)]
    pub r1: Option<f64>,
    #[arg(long)]
    pub r2: Option<f64>,
    #[arg(long)]
    pub theta1: Option<f64>,
    /// Grid values for `table`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub thetas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub rhos: Option<Vec<f64>>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| config_err(format!("cannot parse `{v}` for `{key}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_value(key, s.trim())).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parses `key = value` lines; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "process" => self.process = Some(v.to_string()),
            "law" => self.law = Some(v.to_string()),
            "theta" => self.theta = Some(parse_value(key, v)?),
            "alpha" => self.alpha = Some(parse_value(key, v)?),
            "p" => self.p = Some(parse_value(key, v)?),
            "rho" => self.rho = Some(parse_value(key, v)?),
            "lambda" => self.lambda = Some(parse_value(key, v)?),
            "steps" => self.steps = Some(parse_value(key, v)?),
            "t0" => self.t0 = Some(parse_value(key, v)?),
            "horizon" => self.horizon = Some(parse_value(key, v)?),
            "x0" => self.x0 = Some(parse_value(key, v)?),
            "seed" => self.seed = Some(parse_value(key, v)?),
            "k" => self.k = Some(parse_value(key, v)?),
            "degree" => self.degree = Some(parse_value(key, v)?),
            "format" => {
                self.format = Some(Format::from_str(v, true).map_err(|_| config_err(format!("unknown format `{v}`")))?)
            }
            "out" => self.out = Some(PathBuf::from(v)),
            "suite" => self.suite = Some(v.to_string()),
            "extended" => self.extended = Some(parse_value(key, v)?),
            "r0" => self.r0 = Some(parse_value(key, v)?),
            "r1" => self.r1 = Some(parse_value(key, v)?),
            "r2" => self.r2 = Some(parse_value(key, v)?),
            "theta1" => self.theta1 = Some(parse_value(key, v)?),
            "thetas" => self.thetas = Some(parse_list(key, v)?),
            "ps" => self.ps = Some(parse_list(key, v)?),
            "rhos" => self.rhos = Some(parse_list(key, v)?),
            _ => return Err(config_err(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// The set fields as `key = value` lines, in a fixed order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                let _ = writeln!(out, "{k} = {v}");
            }
        };
        put("process", self.process.clone());
        put("law", self.law.clone());
        put("theta", self.theta.map(|v| v.to_string()));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("p", self.p.map(|v| v.to_string()));
        put("rho", self.rho.map(|v| v.to_string()));
        put("lambda", self.lambda.map(|v| v.to_string()));
        put("steps", self.steps.map(|v| v.to_string()));
        put("t0", self.t0.map(|v| v.to_string()));
        put("horizon", self.horizon.map(|v| v.to_string()));
        put("x0", self.x0.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("k", self.k.map(|v| v.to_string()));
        put("degree", self.degree.map(|v| v.to_string()));
        put("format", self.format.map(|v| v.name().to_string()));
        put("out", self.out.as_ref().map(|v| v.display().to_string()));
        put("suite", self.suite.clone());
        put("extended", self.extended.map(|v| v.to_string()));
        put("r0", self.r0.map(|v| v.to_string()));
        put("r1", self.r1.map(|v| v.to_string()));
        put("r2", self.r2.map(|v| v.to_string()));
        put("theta1", self.theta1.map(|v| v.to_string()));
        put("thetas", self.thetas.as_deref().map(join));
        put("ps", self.ps.as_deref().map(join));
        put("rhos", self.rhos.as_deref().map(join));
        out
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        RunConfig {
            process: self.process.or(base.process),
            law: self.law.or(base.law),
            theta: self.theta.or(base.theta),
            alpha: self.alpha.or(base.alpha),
            p: self.p.or(base.p),
            rho: self.rho.or(base.rho),
            lambda: self.lambda.or(base.lambda),
            steps: self.steps.or(base.steps),
            t0: self.t0.or(base.t0),
            horizon: self.horizon.or(base.horizon),
            x0: self.x0.or(base.x0),
            seed: self.seed.or(base.seed),
            k: self.k.or(base.k),
            degree: self.degree.or(base.degree),
            format: self.format.or(base.format),
            out: self.out.or(base.out),
            suite: self.suite.or(base.suite),
            extended: self.extended.or(base.extended),
            r0: self.r0.or(base.r0),
            r1: self.r1.or(base.r1),
            r2: self.r2.or(base.r2),
            theta1: self.theta1.or(base.theta1),
            thetas: self.thetas.or(base.thetas),
            ps: self.ps.or(base.ps),
            rhos: self.rhos.or(base.rhos),
        }
    }

    fn theta(&self) -> f64 {
        self.theta.unwrap_or(1.0)
    }
    fn p(&self) -> f64 {
        self.p.unwrap_or(0.5)
    }
    fn rho(&self) -> f64 {
        self.rho.unwrap_or(0.5)
    }
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn id_law(&self) -> Result<IdLaw> {
        match self.law.as_deref().unwrap_or("poisson") {
            "poisson" => Ok(IdLaw::poisson()),
            "nb" | "negative-binomial" => IdLaw::neg_binomial(self.p()),
            other => Err(config_err(format!("unknown law `{other}`"))),
        }
    }

    fn bd_model(&self) -> Result<Option<BdModel>> {
        let lambda = self.lambda.unwrap_or(1.0);
        Ok(match self.process.as_deref() {
            Some("poisson-bd") => Some(BdModel::poisson(self.theta(), lambda)?),
            Some("nb-bd") => Some(BdModel::neg_binomial(self.alpha.unwrap_or(1.0), self.p(), lambda)?),
            _ => None,
        })
    }

    /// The discrete-time process named by `process`.
    pub fn process_spec(&self) -> Result<ProcessSpec> {
        let name = self
            .process
            .as_deref()
            .ok_or_else(|| config_err("`process` is required"))?;
        let (theta, rho) = (self.theta(), self.rho());
        let spec = match name {
            "thinning" => ProcessSpec::Thinning { law: self.id_law()?, theta, rho },
            "random-measure" => ProcessSpec::RandomMeasure { law: self.id_law()?, theta, rho },
            "branching-poisson" => ProcessSpec::BranchingPoisson { theta, rho },
            "branching-nb" => ProcessSpec::BranchingNb {
                alpha: self.alpha.unwrap_or(1.0),
                p: self.p(),
                rho,
            },
            "constant" => ProcessSpec::Constant { law: self.id_law()?, theta },
            "iid" => ProcessSpec::Iid { law: self.id_law()?, theta },
            "poisson-bd" | "nb-bd" => ProcessSpec::BirthDeath(self.bd_model()?.expect("named above")),
            other => return Err(config_err(format!("unknown process `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses arguments, runs the command, and returns the process exit code.
/// Results go to `stdout` unless `out` is set; diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let (inv, cmd): (&Invocation, fn(&RunConfig) -> Result<Outcome>) = match &cli.command {
        Command::Simulate(i) => (i, cmd_simulate),
        Command::Table(i) => (i, cmd_table),
        Command::Verify(i) => (i, cmd_verify),
        Command::Classify(i) => (i, cmd_classify),
    };
    let merged = match &inv.config {
        Some(path) => RunConfig::load(path).map(|base| inv.run.clone().over(base)),
        None => Ok(inv.run.clone()),
    };
    let cfg = match merged {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    if inv.dump_config {
        let _ = stdout.write_all(cfg.dump().as_bytes());
        return EXIT_OK;
    }
    let outcome = match cmd(&cfg) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let written = match &cfg.out {
        Some(path) => std::fs::write(path, &outcome.text).map_err(|e| e.to_string()),
        None => stdout.write_all(outcome.text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write output: {e}");
        return EXIT_CONFIG;
    }
    outcome.code
}

/// Rendered output and exit code of a command.
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, code: EXIT_OK }
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let format = cfg.format.unwrap_or(Format::Csv);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let mut out = String::new();
    if let Some(model) = cfg.bd_model()? {
        let horizon = cfg.horizon.unwrap_or(100.0);
        let x0 = match (cfg.x0, model) {
            (Some(x), _) => x,
            (None, BdModel::Poisson { theta, .. }) => crate::idlaw::sample_poisson(theta, &mut rng),
            (None, BdModel::NegBinomial { alpha, p, .. }) => crate::idlaw::sample_nb(alpha, p, &mut rng),
        };
        let path = ctmc::gillespie(&model, x0, horizon, &mut rng)?;
        if format == Format::Csv {
            out.push_str("time,state\n");
        }
        for (t, x) in path.times.iter().zip(&path.states) {
            match format {
                Format::Csv => writeln!(out, "{t},{x}"),
                Format::Jsonl => writeln!(out, "{{\"time\":{t},\"state\":{x}}}"),
            }
            .expect("string write");
        }
        return Ok(Outcome::ok(out));
    }
    let spec = cfg.process_spec()?;
    let steps = cfg.steps.unwrap_or(1000);
    if steps == 0 {
        return Err(config_err("`steps` must be at least 1"));
    }
    let path = spec.simulate(cfg.t0.unwrap_or(0), steps, &mut rng)?;
    if format == Format::Csv {
        out.push_str("t,x\n");
    }
    for (t, x) in path.iter() {
        match format {
            Format::Csv => writeln!(out, "{t},{x}"),
            Format::Jsonl => writeln!(out, "{{\"t\":{t},\"x\":{x}}}"),
        }
        .expect("string write");
    }
    Ok(Outcome::ok(out))
}

/// One row of the discriminating-probability table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub theta: f64,
    pub p: f64,
    pub rho: f64,
    pub thinning_closed: f64,
    pub thinning_enum: f64,
    pub thinning_dev: f64,
    pub random_measure_closed: f64,
    pub random_measure_enum: f64,
    pub random_measure_dev: f64,
    pub gap: f64,
}

/// `P[X_1 = 0, X_3 = 0 | X_2 = 2]` from an exact trivariate table.
pub fn zero_two_zero(j: &JointPmf, marginal_at_two: f64) -> f64 {
    j.get(&[0, 2, 0]) / marginal_at_two
}

pub fn table_row(theta: f64, p: f64, rho: f64, k: usize) -> Result<TableRow> {
    let law = IdLaw::neg_binomial(p)?;
    let at_two = law.pmf(theta, 2)[2];
    let times = [0, 1, 2];
    let thin = chain_joint_pmf(&ProcessSpec::Thinning { law: law.clone(), theta, rho }, &times, k)?;
    let rm = chain_joint_pmf(&ProcessSpec::RandomMeasure { law, theta, rho }, &times, k)?;
    let (tc, te) = (thinning_nb_zero_two_zero(theta, p, rho), zero_two_zero(&thin, at_two));
    let (rc, re) = (random_measure_nb_zero_two_zero(theta, p, rho), zero_two_zero(&rm, at_two));
    Ok(TableRow {
        theta,
        p,
        rho,
        thinning_closed: tc,
        thinning_enum: te,
        thinning_dev: (tc - te).abs(),
        random_measure_closed: rc,
        random_measure_enum: re,
        random_measure_dev: (rc - re).abs(),
        gap: re - te,
    })
}

pub fn cmd_table(cfg: &RunConfig) -> Result<Outcome> {
    let thetas = cfg.thetas.clone().unwrap_or_else(|| vec![cfg.theta()]);
    let ps = cfg.ps.clone().unwrap_or_else(|| vec![cfg.p()]);
    let rhos = cfg.rhos.clone().unwrap_or_else(|| vec![cfg.rho()]);
    let k = cfg.k.unwrap_or(4);
    if k < 2 {
        return Err(config_err("`k` must be at least 2"));
    }
    let format = cfg.format.unwrap_or(Format::Csv);
    let mut out = String::new();
    if format == Format::Csv {
        out.push_str(
            "theta,p,rho,thinning_closed,thinning_enum,thinning_dev,\
             random_measure_closed,random_measure_enum,random_measure_dev,gap\n",
        );
    }
    for &theta in &thetas {
        for &p in &ps {
            for &rho in &rhos {
                let r = table_row(theta, p, rho, k)?;
                match format {
                    Format::Csv => writeln!(
                        out,
                        "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                        r.theta,
                        r.p,
                        r.rho,
                        r.thinning_closed,
                        r.thinning_enum,
                        r.thinning_dev,
                        r.random_measure_closed,
                        r.random_measure_enum,
                        r.random_measure_dev,
                        r.gap
                    )
                    .expect("string write"),
                    Format::Jsonl => {
                        out.push_str(&serde_json::to_string(&r).expect("plain data"));
                        out.push('\n');
                    }
                }
            }
        }
    }
    Ok(Outcome::ok(out))
}

/// A report with the outcome its suite expects.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteEntry {
    pub suite: String,
    #[serde(flatten)]
    pub report: VerifyReport,
    pub expected: bool,
}

impl SuiteEntry {
    pub fn as_expected(&self) -> bool {
        self.report.pass == self.expected
    }
}

struct Collector {
    suite: &'static str,
    entries: Vec<SuiteEntry>,
}

impl Collector {
    fn push(&mut self, label: &str, mut report: VerifyReport, expected: bool) {
        report.name = format!("{}/{}", label, report.name);
        self.entries.push(SuiteEntry {
            suite: self.suite.to_string(),
            report,
            expected,
        });
    }
}

struct SuiteParams {
    theta: f64,
    p: f64,
    rho: f64,
    k: usize,
    degree: u32,
    precision: Precision,
}

fn markov_lattice(k: usize) -> usize {
    k.max(CONDITIONAL_LATTICE)
}

fn all_checks(c: &mut Collector, label: &str, spec: &ProcessSpec, sp: &SuiteParams, mvid: bool) -> Result<()> {
    let wide = markov_lattice(sp.k);
    c.push(label, verify::check_stationarity(spec, &[0, 1, 2], sp.k)?, true);
    c.push(label, verify::check_reversibility(spec, wide)?, true);
    let j = chain_joint_pmf(spec, &[0, 1, 2], wide)?;
    c.push(label, verify::check_markov_triple(&j)?, true);
    let j = chain_joint_pmf(spec, &[0, 1, 2], sp.k)?;
    c.push(label, verify::check_mvid(&j, sp.degree, sp.precision)?, mvid);
    Ok(())
}

fn suite_theorem1(c: &mut Collector, sp: &SuiteParams) -> Result<()> {
    let nb = ProcessSpec::BranchingNb { alpha: sp.theta, p: sp.p, rho: sp.rho };
    let po = ProcessSpec::BranchingPoisson { theta: sp.theta, rho: sp.rho };
    all_checks(c, "branching-nb", &nb, sp, true)?;
    all_checks(c, "branching-poisson", &po, sp, true)?;
    // the degenerate members: constant with a shared value, independence
    for spec in [
        ProcessSpec::Constant { law: IdLaw::neg_binomial(sp.p)?, theta: sp.theta },
        ProcessSpec::Iid { law: IdLaw::neg_binomial(sp.p)?, theta: sp.theta },
    ] {
        let label = spec.name();
        all_checks(c, label, &spec, sp, true)?;
    }
    // the negative trinomial member rho = q
    let tri = ProcessSpec::BranchingNb { alpha: sp.theta, p: sp.p, rho: 1.0 - sp.p };
    let j = chain_joint_pmf(&tri, &[0, 1], markov_lattice(sp.k))?;
    let mut worst = (0.0, vec![0, 0]);
    for a in 0..=markov_lattice(sp.k) {
        for b in 0..=markov_lattice(sp.k) {
            let want = crate::discrete::negtrinomial_pmf(a as u64, b as u64, sp.theta, 1.0 - sp.p)?;
            let d = (j.get(&[a, b]) - want).abs();
            if d > worst.0 {
                worst = (d, vec![a, b]);
            }
        }
    }
    c.push("branching-nb", VerifyReport::new("negative-trinomial", worst.0, worst.1, 1e-12), true);
    Ok(())
}

fn suite_theorem2(c: &mut Collector, sp: &SuiteParams) -> Result<()> {
    let thin = ProcessSpec::Thinning {
        law: IdLaw::neg_binomial(sp.p)?,
        theta: sp.theta,
        rho: sp.rho,
    };
    all_checks(c, "thinning-nb", &thin, sp, false)?;
    let nb = ProcessSpec::BranchingNb { alpha: sp.theta, p: sp.p, rho: sp.rho };
    let j = chain_joint_pmf(&nb, &[0, 1, 2], sp.k)?;
    c.push("branching-nb", verify::check_mvid(&j, sp.degree, sp.precision)?, true);
    let po = ProcessSpec::BranchingPoisson { theta: sp.theta, rho: sp.rho };
    let j = chain_joint_pmf(&po, &[0, 1, 2], sp.k)?;
    c.push("branching-poisson", verify::check_mvid(&j, sp.degree, sp.precision)?, true);
    Ok(())
}

fn suite_theorem3(c: &mut Collector, sp: &SuiteParams) -> Result<()> {
    let law = IdLaw::neg_binomial(sp.p)?;
    let rm = ProcessSpec::RandomMeasure { law: law.clone(), theta: sp.theta, rho: sp.rho };
    let wide = markov_lattice(sp.k);
    c.push("random-measure-nb", verify::check_stationarity(&rm, &[0, 1, 2], sp.k)?, true);
    c.push("random-measure-nb", verify::check_reversibility(&rm, wide)?, true);
    let j = chain_joint_pmf(&rm, &[0, 1, 2], wide)?;
    c.push("random-measure-nb", verify::check_markov_triple(&j)?, false);
    let j = chain_joint_pmf(&rm, &[0, 1, 2], sp.k)?;
    c.push("random-measure-nb", verify::check_mvid(&j, sp.degree, sp.precision)?, true);

    let gap = verify::markov_gap_at(&chain_joint_pmf(&rm, &[0, 1, 2], wide)?, 0, 2, 0)?;
    c.push(
        "random-measure-nb",
        VerifyReport::new("markov-gap-0-2-0", gap, vec![0, 2, 0], verify::MARKOV_TOL),
        false,
    );
    let row = table_row(sp.theta, sp.p, sp.rho, sp.k.max(2))?;
    let closed_gap = row.random_measure_closed - row.thinning_closed;
    c.push(
        "random-measure-nb",
        VerifyReport::new(
            "zero-two-zero-closed-form",
            row.thinning_dev.max(row.random_measure_dev).max((gap - closed_gap).abs()),
            vec![0, 2, 0],
            1e-9,
        ),
        true,
    );
    Ok(())
}

fn suite_poisson(c: &mut Collector, sp: &SuiteParams) -> Result<()> {
    let law = IdLaw::poisson();
    let rm = ProcessSpec::RandomMeasure { law: law.clone(), theta: sp.theta, rho: sp.rho };
    let thin = ProcessSpec::Thinning { law, theta: sp.theta, rho: sp.rho };
    let bp = ProcessSpec::BranchingPoisson { theta: sp.theta, rho: sp.rho };
    let wide = markov_lattice(sp.k);
    for times in [&[0i64, 1, 2][..], &[0, 2, 3][..]] {
        let a = chain_joint_pmf(&rm, times, sp.k)?;
        let b = chain_joint_pmf(&thin, times, sp.k)?;
        let (d, at) = a.sup_diff(&b)?;
        c.push("random-measure-poisson", VerifyReport::new("equals-thinning", d, at, 1e-10), true);
    }
    let a = chain_joint_pmf(&thin, &[0, 1, 2], sp.k)?;
    let b = chain_joint_pmf(&bp, &[0, 1, 2], sp.k)?;
    let (d, at) = a.sup_diff(&b)?;
    c.push("thinning-poisson", VerifyReport::new("equals-branching", d, at, 1e-10), true);
    let j = chain_joint_pmf(&rm, &[0, 1, 2], wide)?;
    c.push("random-measure-poisson", verify::check_markov_triple(&j)?, true);
    // bivariate laws of the two negative binomial constructions agree
    let nb = IdLaw::neg_binomial(sp.p)?;
    let a = chain_joint_pmf(&ProcessSpec::RandomMeasure { law: nb.clone(), theta: sp.theta, rho: sp.rho }, &[0, 1], wide)?;
    let b = chain_joint_pmf(&ProcessSpec::Thinning { law: nb, theta: sp.theta, rho: sp.rho }, &[0, 1], wide)?;
    let (d, at) = a.sup_diff(&b)?;
    c.push("nb", VerifyReport::new("bivariate-coincidence", d, at, 1e-10), true);
    Ok(())
}

fn suite_continuous(c: &mut Collector, sp: &SuiteParams) -> Result<()> {
    let lambda = -sp.rho.ln();
    let k = 25;
    let pairs = [
        (
            BdModel::poisson(sp.theta, lambda)?,
            ProcessSpec::BranchingPoisson { theta: sp.theta, rho: sp.rho },
        ),
        (
            BdModel::neg_binomial(sp.theta, sp.p, lambda)?,
            ProcessSpec::BranchingNb { alpha: sp.theta, p: sp.p, rho: sp.rho },
        ),
    ];
    for (model, discrete) in pairs {
        let label = ProcessSpec::BirthDeath(model).name();
        let pi = ctmc::stationary_bd(&model, k);
        let want = discrete.marginal_pmf(k);
        let (d, at) = sup_vec(&pi.probs, &want);
        c.push(label, VerifyReport::new("stationary-law", d, vec![at], 1e-12), true);
        let r = ctmc::generator_residual(&model, &pi.probs);
        c.push(label, VerifyReport::new("generator-residual", r.interior, vec![], 1e-10), true);
        let p1 = ctmc::transition_uniformized(&model, 1.0, k)?.matrix;
        let q = discrete.transition_matrix(k)?;
        let mut worst = (0.0, vec![0, 0]);
        for x in 0..=k {
            for y in 0..=k {
                let d = (p1[[x, y]] - q[[x, y]]).abs();
                if d > worst.0 {
                    worst = (d, vec![x, y]);
                }
            }
        }
        c.push(label, VerifyReport::new("integer-skeleton", worst.0, worst.1, 1e-5), true);
        let mut worst = 0.0f64;
        for t in [0.5, 1.0, 2.0] {
            let r = ctmc::ct_autocorr(&model, t, 60)?;
            worst = worst.max((r - (-lambda * t).exp()).abs());
        }
        c.push(label, VerifyReport::new("autocorrelation", worst, vec![], 1e-4), true);
    }
    Ok(())
}

fn sup_vec(a: &[f64], b: &[f64]) -> (f64, usize) {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| ((x - y).abs(), i))
        .fold((0.0, 0), |m, v| if v.0 > m.0 { v } else { m })
}

pub const SUITES: [&str; 5] = ["theorem1", "theorem2", "theorem3", "poisson-coincidence", "continuous-time"];

/// Runs the named suite (or `all`).
pub fn run_suite(cfg: &RunConfig) -> Result<Vec<SuiteEntry>> {
    let sp = SuiteParams {
        theta: cfg.theta(),
        p: cfg.p(),
        rho: cfg.rho(),
        k: cfg.k.unwrap_or(12),
        degree: cfg.degree.unwrap_or(8),
        precision: if cfg.extended.unwrap_or(false) {
            Precision::Extended
        } else {
            Precision::Standard
        },
    };
    crate::discrete::check_rho(sp.rho)?;
    let name = cfg.suite.as_deref().unwrap_or("all");
    let chosen: Vec<&'static str> = match name {
        "all" => SUITES.to_vec(),
        other => vec![*SUITES
            .iter()
            .find(|s| **s == other)
            .ok_or_else(|| config_err(format!("unknown suite `{other}`")))?],
    };
    let mut entries = Vec::new();
    for suite in chosen {
        let mut c = Collector { suite, entries: Vec::new() };
        match suite {
            "theorem1" => suite_theorem1(&mut c, &sp)?,
            "theorem2" => suite_theorem2(&mut c, &sp)?,
            "theorem3" => suite_theorem3(&mut c, &sp)?,
            "poisson-coincidence" => suite_poisson(&mut c, &sp)?,
            _ => suite_continuous(&mut c, &sp)?,
        }
        entries.extend(c.entries);
    }
    Ok(entries)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let entries = run_suite(cfg)?;
    let format = cfg.format.unwrap_or(Format::Jsonl);
    let mut out = String::new();
    if format == Format::Csv {
        out.push_str("suite,name,violation,tolerance,pass,expected,witness\n");
    }
    for e in &entries {
        match format {
            Format::Jsonl => {
                out.push_str(&serde_json::to_string(e).expect("plain data"));
                out.push('\n');
            }
            Format::Csv => {
                let w: Vec<String> = e.report.witness.iter().map(|v| v.to_string()).collect();
                writeln!(
                    out,
                    "{},{},{:e},{:e},{},{},{}",
                    e.suite,
                    e.report.name,
                    e.report.violation,
                    e.report.tolerance,
                    e.report.pass,
                    e.expected,
                    w.join(" ")
                )
                .expect("string write");
            }
        }
    }
    let code = if entries.iter().all(SuiteEntry::as_expected) {
        EXIT_OK
    } else {
        EXIT_POLARITY
    };
    Ok(Outcome { text: out, code })
}

#[derive(Serialize)]
struct Classified {
    #[serde(flatten)]
    family: MistiFamily,
}

pub fn cmd_classify(cfg: &RunConfig) -> Result<Outcome> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| config_err(format!("`{name}` is required")));
    let fam = misti_classify(
        need(cfg.r0, "r0")?,
        need(cfg.r1, "r1")?,
        need(cfg.r2, "r2")?,
        need(cfg.theta1, "theta1")?,
    )?;
    let text = match cfg.format.unwrap_or(Format::Jsonl) {
        Format::Jsonl => format!("{}\n", serde_json::to_string(&Classified { family: fam }).expect("plain data")),
        Format::Csv => {
            let (a, p, rho, theta) = match fam {
                MistiFamily::BranchingNb { alpha, p, rho } => (alpha.to_string(), p.to_string(), rho.to_string(), String::new()),
                MistiFamily::BranchingPoisson { theta, rho } => (String::new(), String::new(), rho.to_string(), theta.to_string()),
                _ => Default::default(),
            };
            format!("family,theta,alpha,p,rho\n{},{theta},{a},{p},{rho}\n", fam.name())
        }
    };
    Ok(Outcome::ok(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let text = "process = branching-nb\nalpha = 2\np = 0.5 # success\n\nrho=0.25\nthetas = 0.5,1,2\nformat = jsonl\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.alpha, Some(2.0));
        assert_eq!(cfg.thetas, Some(vec![0.5, 1.0, 2.0]));
        assert_eq!(RunConfig::parse(&cfg.dump()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::parse("colour = red"), Err(Error::Config(_))));
        assert!(RunConfig::parse("theta = abc").is_err());
        assert!(RunConfig::parse("theta 1").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig::parse("theta = 2\nrho = 0.3").unwrap();
        let flags = RunConfig { theta: Some(5.0), ..Default::default() };
        let merged = flags.over(file);
        assert_eq!((merged.theta, merged.rho), (Some(5.0), Some(0.3)));
    }

    #[test]
    fn classify_reports_family() {
        let cfg = RunConfig {
            r0: Some(0.5),
            r1: Some(0.4),
            r2: Some(0.08),
            theta1: Some(0.4),
            ..Default::default()
        };
        let out = cmd_classify(&cfg).unwrap().text;
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        assert_eq!(v["family"], "branching-nb");
        assert!((v["rho"].as_f64().unwrap() - 0.625).abs() < 1e-12);
    }
}
