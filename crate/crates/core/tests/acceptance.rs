//! Acceptance criteria 1-7. Runs as a plain binary so that every criterion
//! prints its own PASS/FAIL line; exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use misti::cli::table_row;
use misti::ctmc::{self, BdModel};
use misti::discrete::{
    cell_measures, negtrinomial_pmf, pgf2_nb_branching, pgf2_nb_thinning, pgf2_poisson, ProcessSpec,
};
use misti::idlaw::IdLaw;
use misti::series::TruncSeries;
use misti::verify::{
    autocorr_mc, chain_joint_pmf, check_markov_triple, check_mvid, check_reversibility, check_stationarity,
    chi_square_gof, Precision,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// Independent closed-form pmfs.

fn nb_at(shape: f64, p: f64, k: u64) -> f64 {
    let k = k as f64;
    (ln_gamma(shape + k) - ln_gamma(shape) - ln_gamma(k + 1.0) + shape * p.ln() + k * (1.0 - p).ln()).exp()
}

fn poisson_at(mean: f64, k: u64) -> f64 {
    let k = k as f64;
    (k * mean.ln() - mean - ln_gamma(k + 1.0)).exp()
}

fn beta_binomial_at(n: u64, a: f64, b: f64, k: u64) -> f64 {
    let (n, k) = (n as f64, k as f64);
    let ln_beta = |x: f64, y: f64| ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y);
    (ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0) + ln_beta(k + a, n - k + b) - ln_beta(a, b)).exp()
}

fn criterion_1() -> Outcome {
    let (theta, p, rho) = (1.0, 0.5, 0.5);
    let at_two = nb_at(theta, p, 2);

    // chain enumeration: X_1 = 0, innovation 2, thinned back to 0, no innovation
    let innov = |k| nb_at(theta * (1.0 - rho), p, k);
    let thin_oracle = nb_at(theta, p, 0) * innov(2) * beta_binomial_at(2, theta * rho, theta * (1.0 - rho), 0) * innov(0)
        / at_two;
    // cell enumeration: every cell touching times 1 or 3 is empty, the middle
    // singleton holds 2
    let cells = cell_measures(&[1, 2, 3], theta, rho).expect("valid times");
    let mut rm_oracle = 1.0;
    for c in &cells.cells {
        rm_oracle *= if c.first == 1 && c.last == 1 { nb_at(c.area, p, 2) } else { nb_at(c.area, p, 0) };
    }
    rm_oracle /= at_two;

    let row = match table_row(theta, p, rho, 6) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("table failed: {e}")),
    };
    let checks = [
        (row.thinning_closed - 0.0703125).abs() < 1e-15,
        (row.random_measure_closed - 0.078125).abs() < 1e-15,
        (row.thinning_enum - row.thinning_closed).abs() < 1e-9,
        (row.random_measure_enum - row.random_measure_closed).abs() < 1e-9,
        (thin_oracle - row.thinning_enum).abs() < 1e-9,
        (rm_oracle - row.random_measure_enum).abs() < 1e-9,
        (row.gap - 0.0078125).abs() < 1e-9,
    ];
    verdict(
        checks.iter().all(|&c| c),
        format!(
            "thinning {:.10} (closed {:.10}), random-measure {:.10} (closed {:.10}), gap {:.10}",
            row.thinning_enum, row.thinning_closed, row.random_measure_enum, row.random_measure_closed, row.gap
        ),
    )
}

fn criterion_2() -> Outcome {
    let (k, d) = (12, 8);
    let times = [0, 1, 2];
    let table = |spec: ProcessSpec| chain_joint_pmf(&spec, &times, k).expect("table");
    let thin = table(ProcessSpec::Thinning { law: IdLaw::neg_binomial(0.5).unwrap(), theta: 1.0, rho: 0.5 });
    let bnb = table(ProcessSpec::BranchingNb { alpha: 1.0, p: 0.5, rho: 0.5 });
    let bp = table(ProcessSpec::BranchingPoisson { theta: 1.0, rho: 0.5 });
    let r_thin = check_mvid(&thin, d, Precision::Standard).expect("mvid");
    let r_bnb = check_mvid(&bnb, d, Precision::Standard).expect("mvid");
    let r_bp = check_mvid(&bp, d, Precision::Standard).expect("mvid");
    let (m_thin, m_bnb, m_bp) = (r_thin.value.unwrap(), r_bnb.value.unwrap(), r_bp.value.unwrap());
    verdict(
        m_thin < -1e-6 && m_bnb >= -1e-9 && m_bp >= -1e-9,
        format!(
            "thinning-nb min log coefficient {m_thin:.6e} at {:?}; branching-nb min {m_bnb:.3e}; branching-poisson min {m_bp:.3e}",
            r_thin.witness
        ),
    )
}

fn criterion_3() -> Outcome {
    let k = 40;
    let times = [0, 1, 2];
    let nb = chain_joint_pmf(
        &ProcessSpec::RandomMeasure { law: IdLaw::neg_binomial(0.5).unwrap(), theta: 1.0, rho: 0.5 },
        &times,
        k,
    )
    .expect("table");
    let po = chain_joint_pmf(
        &ProcessSpec::RandomMeasure { law: IdLaw::poisson(), theta: 1.0, rho: 0.5 },
        &times,
        k,
    )
    .expect("table");
    let r_nb = check_markov_triple(&nb).expect("triple");
    let r_po = check_markov_triple(&po).expect("triple");
    let pass = !r_nb.pass
        && r_nb.witness == vec![0, 2, 0]
        && (r_nb.violation - 0.0078125).abs() < 1e-8
        && r_po.pass
        && r_po.violation <= 1e-9;
    verdict(
        pass,
        format!(
            "random-measure nb: fails={} worst witness {:?} gap {:.10} (expected (0,2,0), 0.0078125); poisson: violation {:.3e}",
            !r_nb.pass, r_nb.witness, r_nb.violation, r_po.violation
        ),
    )
}

fn criterion_4() -> Outcome {
    let k = 60;
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let nb = || IdLaw::neg_binomial(0.5).unwrap();
    type Pgf = Box<dyn Fn(f64, f64) -> f64>;
    let cases: Vec<(&str, ProcessSpec, Pgf)> = vec![
        (
            "poisson",
            ProcessSpec::BranchingPoisson { theta: 1.0, rho: 0.5 },
            Box::new(|s, z| pgf2_poisson(s, z, 1.0, 0.5).unwrap()),
        ),
        (
            "nb-branching",
            ProcessSpec::BranchingNb { alpha: 1.0, p: 0.5, rho: 0.5 },
            Box::new(|s, z| pgf2_nb_branching(s, z, 1.0, 0.5, 0.5).unwrap()),
        ),
        (
            "nb-thinning",
            ProcessSpec::Thinning { law: nb(), theta: 1.0, rho: 0.5 },
            Box::new(|s, z| pgf2_nb_thinning(s, z, 1.0, 0.5, 0.5).unwrap()),
        ),
    ];
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (name, spec, pgf) in cases {
        let j = chain_joint_pmf(&spec, &[0, 1], k).expect("table");
        let series = TruncSeries::<f64>::from_joint_pmf(&j, 2 * k as u32).expect("series");
        let mut err = 0.0f64;
        for &s in &grid {
            for &z in &grid {
                err = err.max((series.eval(&[s, z]).unwrap() - pgf(s, z)).abs());
            }
        }
        lines.push(format!("{name} {err:.2e}"));
        worst = worst.max(err);
    }
    verdict(worst < 1e-8, format!("sup error {}", lines.join(", ")))
}

fn criterion_5() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let cases = [
        (BdModel::poisson(1.5, 0.7).unwrap(), ProcessSpec::BranchingPoisson { theta: 1.5, rho: (-0.7f64).exp() }),
        (
            BdModel::neg_binomial(2.0, 0.4, 0.7).unwrap(),
            ProcessSpec::BranchingNb { alpha: 2.0, p: 0.4, rho: (-0.7f64).exp() },
        ),
    ];
    for (model, discrete) in cases {
        let pi = ctmc::stationary_bd(&model, 30);
        let closed = |i: u64| match model {
            BdModel::Poisson { theta, .. } => poisson_at(theta, i),
            BdModel::NegBinomial { alpha, p, .. } => nb_at(alpha, p, i),
        };
        let law_err = (0..=30).map(|i| (pi.probs[i] - closed(i as u64)).abs()).fold(0.0, f64::max);
        let resid = ctmc::generator_residual(&model, &pi.probs).interior;
        let k = 25;
        let p1 = ctmc::transition_uniformized(&model, 1.0, k).unwrap().matrix;
        let q = discrete.transition_matrix(k).unwrap();
        let skel = (&p1 - &q).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lambda = model.lambda();
        let mut corr = 0.0f64;
        for t in [0.5, 1.0, 2.0] {
            let r = ctmc::ct_autocorr(&model, t, 60).unwrap();
            corr = corr.max((r - (-lambda * t).exp()).abs());
        }
        ok &= law_err < 1e-12 && resid < 1e-10 && skel < 1e-5 && corr < 1e-4;
        notes.push(format!(
            "{}: law {law_err:.1e}, residual {resid:.1e}, skeleton {skel:.1e}, autocorr {corr:.1e}",
            ProcessSpec::BirthDeath(model).name()
        ));
    }
    verdict(ok, notes.join("; "))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut failures: Vec<String> = Vec::new();
    let mut fail = |what: &str, detail: String| failures.push(format!("{what}: {detail}"));

    for _ in 0..8 {
        let theta = rng.random_range(0.2..3.0);
        let p = rng.random_range(0.3..0.8);
        let rho = rng.random_range(0.05..0.95);
        let nb = IdLaw::neg_binomial(p).unwrap();
        let specs = [
            ProcessSpec::Thinning { law: nb.clone(), theta, rho },
            ProcessSpec::Thinning { law: IdLaw::poisson(), theta, rho },
            ProcessSpec::BranchingPoisson { theta, rho },
            ProcessSpec::BranchingNb { alpha: theta, p, rho },
            ProcessSpec::RandomMeasure { law: nb.clone(), theta, rho },
        ];
        for spec in &specs {
            let r = check_reversibility(spec, 20).unwrap();
            if !r.pass {
                fail("reversibility", format!("{spec:?} {r:?}"));
            }
            let s = check_stationarity(spec, &[0, 1, 3], 10).unwrap();
            if !s.pass {
                fail("stationarity", format!("{spec:?} {s:?}"));
            }
        }

        // cell invariants on random increasing times
        let mut times = vec![rng.random_range(-5i64..5)];
        for _ in 0..rng.random_range(1..6) {
            let last = *times.last().unwrap();
            times.push(last + rng.random_range(1..4));
        }
        let dec = cell_measures(&times, theta, rho).unwrap();
        for (m, _) in times.iter().enumerate() {
            if (dec.time_total(m) - theta).abs() > 1e-12 {
                fail("cell time total", format!("{times:?} m={m}"));
            }
            for b in m..times.len() {
                let want = theta * rho.powi((times[b] - times[m]) as i32);
                if (dec.pair_total(m, b) - want).abs() > 1e-12 {
                    fail("cell pair total", format!("{times:?} {m} {b}"));
                }
            }
        }
        if dec.cells.iter().any(|c| c.area < 0.0) {
            fail("cell nonnegativity", format!("{times:?}"));
        }

        // semigroup convolution
        let (a, b) = (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
        for law in [IdLaw::poisson(), nb.clone(), IdLaw::generic([(1, 0.4), (3, 0.2)]).unwrap()] {
            let (pa, pb, pab) = (law.pmf(a, 30), law.pmf(b, 30), law.pmf(a + b, 30));
            for n in 0..=30 {
                let conv: f64 = (0..=n).map(|i| pa[i] * pb[n - i]).sum();
                if (conv - pab[n]).abs() > 1e-12 {
                    fail("semigroup", format!("{law:?} n={n}"));
                }
            }
        }

        // exp/log round trip on a trivariate series with positive constant
        let mut f = TruncSeries::<f64>::zeros(3, 6).unwrap();
        let idx: Vec<Vec<u32>> = f.terms().map(|(i, _)| i.to_vec()).collect();
        for i in &idx {
            let c = if i.iter().all(|&v| v == 0) { rng.random_range(0.5..2.0) } else { rng.random_range(-0.3..0.3) };
            f.set_coeff(i, c).unwrap();
        }
        let back = f.log().unwrap().exp();
        let err = f.sub(&back).unwrap().coeffs_f64().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if err > 1e-10 {
            fail("exp/log round trip", format!("{err:e}"));
        }

        // negative trinomial normalization and rows
        let q = rng.random_range(0.1..0.5);
        let alpha = rng.random_range(0.3..3.0);
        let total: f64 = (0..=40u64)
            .flat_map(|i| (0..=40u64).map(move |j| (i, j)))
            .map(|(i, j)| negtrinomial_pmf(i, j, alpha, q).unwrap())
            .sum();
        if (total - 1.0).abs() > 1e-8 {
            fail("negative trinomial normalization", format!("alpha={alpha} q={q} total={total}"));
        }
        for i in 0..5u64 {
            let row: Vec<f64> = (0..=60u64).map(|j| negtrinomial_pmf(i, j, alpha, q).unwrap()).collect();
            let mass: f64 = row.iter().sum();
            for (j, v) in row.iter().enumerate().take(15) {
                let want = nb_at(alpha + i as f64, 1.0 / (1.0 + q), j as u64);
                if (v / mass - want).abs() > 1e-10 {
                    fail("negative trinomial row", format!("i={i} j={j}"));
                }
            }
        }
    }
    verdict(failures.is_empty(), if failures.is_empty() { "all property checks green".into() } else { failures.join("; ") })
}

fn marginal_counts(values: &[u64], step: usize) -> Vec<u64> {
    values.iter().step_by(step).copied().collect()
}

fn criterion_7() -> Outcome {
    let n = 100_000;
    let rho = 0.5;
    let se = ((1.0 - rho * rho) / n as f64).sqrt();
    let cases = [
        (ProcessSpec::BranchingPoisson { theta: 2.0, rho }, 71u64),
        (ProcessSpec::BranchingNb { alpha: 2.0, p: 0.5, rho }, 72u64),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (spec, seed) in cases {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = spec.simulate(0, n, &mut rng).unwrap();
        let r1 = autocorr_mc(&path, 1).unwrap();
        // every 20th value: residual correlation rho^20 is below 1e-6
        let sample = marginal_counts(&path.values, 20);
        let chi = chi_square_gof(&sample, &spec.marginal_pmf(40), 5.0).unwrap();
        let pass = (r1 - rho).abs() < 3.0 * se && chi.p_value > 0.001;
        ok &= pass;
        notes.push(format!(
            "{}: lag-1 {r1:.4} ({:.2} se), chi2 p={:.3}",
            spec.name(),
            (r1 - rho) / se,
            chi.p_value
        ));
    }
    verdict(ok, notes.join("; "))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 7] = [
        (1, "discriminating probabilities", Duration::from_secs(10), criterion_1),
        (2, "thinning nb is not multivariate ID", Duration::from_secs(30), criterion_2),
        (3, "random-measure nb is not Markov", Duration::from_secs(10), criterion_3),
        (4, "bivariate generating functions", Duration::from_secs(5), criterion_4),
        (5, "continuous-time chains", Duration::from_secs(60), criterion_5),
        (6, "property suites", Duration::from_secs(60), criterion_6),
        (7, "Monte Carlo sanity", Duration::from_secs(30), criterion_7),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id} ({name}): {} [{:.2}s / {}s] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            out.detail
        );
    }
    println!("acceptance: {} of 7 criteria passed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
