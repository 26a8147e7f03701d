//! One function per subcommand: load the JSON config, run the library call,
//! serialize the result.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use sigdetect::config::*;
use sigdetect::harness::{self, Alternative, ScalingConfig};
use sigdetect::numeric::binomial_se;
use sigdetect::priors;
use sigdetect::quantiles::{self, QuantileMethod};
use sigdetect::rates::{self, RateResult, Side};
use sigdetect::rng::NoiseSource;
use sigdetect::Signal;

use crate::output::{fmt, Csv, Sink};

fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize)]
struct QuantileOutput {
    value: f64,
    method: &'static str,
    reps: Option<u64>,
    seed: Option<u64>,
}

pub fn quantile(config: &Path, sink: &Sink) -> Result<bool> {
    let cfg: QuantileConfig = load(config)?;
    let profile = cfg.profile.build()?;
    let method = match &cfg.quantile {
        Some(spec) => Some(spec.build()?),
        None => None,
    };
    let (value, method) = match cfg.target {
        QuantileTarget::WeightedChisq { d } => {
            let m = method.unwrap_or(QuantileMethod::MonteCarlo {
                reps: 1_000_000,
                seed: 0,
            });
            (
                quantiles::weighted_chisq_quantile(&profile, d, cfg.alpha, &m)?,
                m,
            )
        }
        QuantileTarget::MaxChisq { n } => {
            let m = method.unwrap_or(QuantileMethod::Exact);
            (quantiles::max_chisq_quantile(n, cfg.alpha, &m)?, m)
        }
        QuantileTarget::GaussianAbs { j } => (
            quantiles::gaussian_abs_quantile(profile.sigma_at(j)?, cfg.alpha)?,
            method.unwrap_or(QuantileMethod::Exact),
        ),
    };
    let (reps, seed) = match method {
        QuantileMethod::MonteCarlo { reps, seed } => (Some(reps), Some(seed)),
        _ => (None, None),
    };
    sink.write_json(&QuantileOutput {
        value,
        method: method.label(),
        reps,
        seed,
    })?;
    Ok(true)
}

pub fn test(config: &Path, data: &Path, sink: &Sink) -> Result<bool> {
    let cfg: TestConfig = load(config)?;
    let profile = cfg.profile.build()?;
    let procedure = cfg.test.build()?;
    let text =
        fs::read_to_string(data).with_context(|| format!("reading data {}", data.display()))?;
    let mut y = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        y.push(
            line.parse::<f64>()
                .with_context(|| format!("{}:{}: not a number", data.display(), i + 1))?,
        );
    }
    let outcome = procedure.prepare(&profile)?.evaluate(&y)?;
    sink.write_json(&outcome)?;
    Ok(true)
}

pub fn rates(config: &Path, sink: &Sink) -> Result<bool> {
    let cfg: RatesConfig = load(config)?;
    let profile = cfg.profile.build()?;
    let (alpha, beta) = (cfg.alpha, cfg.beta);
    let mut rows: Vec<RateResult> = Vec::new();
    rows.push(RateResult::new(
        "c_alpha_beta",
        Side::Lower,
        rates::c_alpha_beta(alpha, beta)?,
        format!("alpha={alpha},beta={beta}"),
    ));
    if let Some(d) = cfg.s_d {
        rows.push(RateResult::new(
            "rho_d_sq",
            Side::Lower,
            rates::rho_d_sq(&profile, d, alpha, beta)?,
            format!("d={d}"),
        ));
    }
    if let Some(SparseArgs { k, n }) = cfg.sparse {
        rows.push(RateResult::new(
            "rho_kn_sq",
            Side::Lower,
            rates::rho_kn_sq(&profile, k, n)?,
            format!("k={k},n={n}"),
        ));
        rows.push(RateResult::new(
            "rho_n_inf",
            Side::Lower,
            rates::rho_n_inf(&profile, n)?,
            format!("n={n}"),
        ));
        let upper = rates::sparse_upper_sq(&profile, k, n, alpha, beta)?;
        rows.push(RateResult::new(
            "sparse_upper_sq",
            Side::Upper,
            upper.value,
            format!(
                "k={k},n={n},l2_channel={},threshold_channel={},chisq_constant={},max_constant={}",
                fmt(upper.l2_channel),
                fmt(upper.threshold_channel),
                fmt(upper.chisq_constant),
                fmt(upper.max_constant)
            ),
        ));
    }
    if let Some(EllipsoidArgs { weights, radius }) = &cfg.ellipsoid {
        let w = weights.build()?;
        let bounds = rates::ellipsoid_rate_bounds(&w, *radius, &profile, alpha, beta)?;
        rows.push(RateResult::new(
            "ellipsoid_lower_sq",
            Side::Lower,
            bounds.lower,
            format!("radius={radius},arg_d={}", bounds.lower_arg_d),
        ));
        rows.push(RateResult::new(
            "ellipsoid_upper_sq",
            Side::Upper,
            bounds.upper,
            format!(
                "radius={radius},arg_d={},constant_multiplier={}",
                bounds.upper_arg_d,
                fmt(bounds.constant_multiplier)
            ),
        ));
    }
    if let Some(lp) = &cfg.lp_body {
        let w = lp.weights.build()?;
        let n = profile.horizon();
        let d = lp.d.unwrap_or(n);
        let lower = rates::lp_lower_bound(&w, lp.p, lp.radius, &profile, d)?;
        rows.push(RateResult::new(
            "lp_rho1",
            Side::Lower,
            lower.rho1,
            format!("d={d},p={},radius={}", lp.p, lp.radius),
        ));
        rows.push(RateResult::new(
            "lp_rho2",
            Side::Lower,
            lower.rho2,
            format!("d={d},p={},radius={}", lp.p, lp.radius),
        ));
        let combined = rates::lp_rate_combined(&w, lp.p, lp.radius, &profile)?;
        rows.push(RateResult::new(
            "lp_rate_combined_sq",
            Side::Lower,
            combined.value,
            format!("arg_d={},p={},radius={}", combined.arg_d, lp.p, lp.radius),
        ));
        let dagger = rates::d_dagger(&w, lp.p, lp.radius, &profile, n)?;
        rows.push(RateResult::new(
            "d_dagger",
            Side::Upper,
            dagger as f64,
            format!("n={n},p={},radius={}", lp.p, lp.radius),
        ));
        if let Some(regime) = &lp.regime {
            rows.push(RateResult::new(
                "lp_lambda",
                Side::Upper,
                rates::lp_lambda(&regime.build(), n, dagger, lp.p)?,
                format!("n={n},d_dagger={dagger},p={}", lp.p),
            ));
        }
    }
    if let Some(RateTableArgs { case, sigma }) = cfg.rate_table {
        rows.push(RateResult::new(
            "rate_table_entry",
            Side::Upper,
            rates::rate_table_entry(&case.build(), sigma, alpha, beta)?,
            format!("sigma={sigma}"),
        ));
    }
    let mut csv = Csv::new("name,side,value,args");
    for row in rows {
        csv.row(&[
            row.name.clone(),
            format!("{:?}", row.side).to_lowercase(),
            fmt(row.value),
            format!("\"{}\"", row.args),
        ]);
    }
    sink.write_primary(&csv.finish())?;
    Ok(true)
}

pub fn lower_bound(config: &Path, sink: &Sink) -> Result<bool> {
    let cfg: LowerBoundConfig = load(config)?;
    let profile = cfg.profile.build()?;
    let spec = cfg.prior.build()?;
    let check = priors::divergence_criterion(&spec, &profile, cfg.alpha, cfg.beta)?;
    let mc = match cfg.mc {
        Some(McArgs { reps, seed }) => {
            let noise = NoiseSource::new(seed);
            let mut l_sum = 0.0;
            let mut l2_sum = 0.0;
            let mut l_vals = Vec::with_capacity(reps as usize);
            let mut l2_vals = Vec::with_capacity(reps as usize);
            for r in 0..reps {
                let obs = profile.sample(&Signal::zero(), &noise, r)?;
                let l = priors::likelihood_ratio(&obs.values, &spec, &profile)?;
                l_sum += l;
                l2_sum += l * l;
                l_vals.push(l);
                l2_vals.push(l * l);
            }
            let n = reps as f64;
            let l_mean = l_sum / n;
            let l2_mean = l2_sum / n;
            let var = l_vals
                .iter()
                .map(|v| (v - l_mean) * (v - l_mean))
                .sum::<f64>()
                / n;
            let var2 = l2_vals
                .iter()
                .map(|v| (v - l2_mean) * (v - l2_mean))
                .sum::<f64>()
                / n;
            Some(json!({
                "reps": reps,
                "seed": seed,
                "e0_l_mean": l_mean,
                "e0_l_se": (var / n).sqrt(),
                "e0_l2_mean": l2_mean,
                "e0_l2_se": (var2 / n).sqrt(),
            }))
        }
        None => None,
    };
    sink.write_json(&json!({
        "divergence": check.divergence,
        "threshold": check.threshold,
        "margin": check.margin,
        "satisfied": check.satisfied,
        "mc": mc,
    }))?;
    Ok(true)
}

pub fn concentration(config: &Path, sink: &Sink) -> Result<bool> {
    let cfg: ConcentrationConfig = load(config)?;
    let profile = cfg.profile.build()?;
    let signal = cfg.signal.build()?;
    let rows = sigdetect::concentration::verify_tail(
        &profile,
        &signal,
        cfg.d,
        &cfg.x_grid,
        cfg.reps,
        cfg.seed,
    )?;
    let mut csv = Csv::new("x,threshold_up,threshold_down,emp_up,emp_down,bound");
    let mut pass = true;
    for row in &rows {
        pass &= row.emp_up <= row.bound + 3.0 * row.se && row.emp_down <= row.bound + 3.0 * row.se;
        csv.row(&[
            fmt(row.x),
            fmt(row.upper_threshold),
            fmt(row.lower_threshold),
            fmt(row.emp_up),
            fmt(row.emp_down),
            fmt(row.bound),
        ]);
    }
    sink.write_primary(&csv.finish())?;
    sink.write_summary(&json!({ "rows": rows.len(), "pass": pass }))?;
    Ok(pass)
}

pub fn verify_level(config: &Path, sink: &Sink) -> Result<bool> {
    let cfg: LevelConfig = load(config)?;
    let profile = cfg.profile.build()?;
    let test = cfg.test.build()?;
    let report = harness::estimate_level(&profile, &test, cfg.reps, cfg.seed)?;
    let pass = if cfg.two_sided {
        (report.estimate - report.alpha).abs() <= 3.0 * report.se
    } else {
        report.pass
    };
    let mut csv = Csv::new("alpha,estimate,ci_low,ci_high,se,reps,pass");
    csv.row(&[
        fmt(report.alpha),
        fmt(report.estimate),
        fmt(report.ci_low),
        fmt(report.ci_high),
        fmt(report.se),
        report.reps.to_string(),
        pass.to_string(),
    ]);
    sink.write_primary(&csv.finish())?;
    sink.write_summary(&json!({
        "alpha": report.alpha,
        "estimate": report.estimate,
        "ci": [report.ci_low, report.ci_high],
        "two_sided": cfg.two_sided,
        "pass": pass,
    }))?;
    Ok(pass)
}

pub fn verify_power(config: &Path, sink: &Sink) -> Result<bool> {
    let cfg: PowerConfig = load(config)?;
    let profile = cfg.profile.build()?;
    let test = cfg.test.build()?;
    let alternative = match (&cfg.signal, &cfg.prior) {
        (Some(signal), None) => Alternative::Fixed(signal.build()?),
        (None, Some(prior)) => Alternative::Prior(prior.build()?),
        (None, None) => bail!("verify-power needs a signal or a prior"),
        (Some(_), Some(_)) => bail!("verify-power takes a signal or a prior, not both"),
    };
    let (level, power) = harness::verified_power(
        &profile,
        &test,
        &alternative,
        cfg.reps,
        cfg.seed,
        cfg.prior_seed,
    )?;
    let pass = match cfg.min_power {
        Some(min) => power.estimate >= min - 3.0 * binomial_se(min.clamp(0.01, 0.99), cfg.reps),
        None => true,
    };
    let mut csv = Csv::new("power,ci_low,ci_high,se,reps,level_estimate,pass");
    csv.row(&[
        fmt(power.estimate),
        fmt(power.ci_low),
        fmt(power.ci_high),
        fmt(power.se),
        power.reps.to_string(),
        fmt(level.estimate),
        pass.to_string(),
    ]);
    sink.write_primary(&csv.finish())?;
    sink.write_summary(&json!({
        "power": power.estimate,
        "ci": [power.ci_low, power.ci_high],
        "level_estimate": level.estimate,
        "min_power": cfg.min_power,
        "pass": pass,
    }))?;
    Ok(pass)
}

pub fn separation(config: &Path, sink: &Sink) -> Result<bool> {
    let cfg: SeparationConfig = load(config)?;
    let profile = cfg.profile.build()?;
    let test = cfg.test.build()?;
    let class = cfg.class.build()?;
    let report = harness::empirical_separation(
        &profile,
        &test,
        &class,
        cfg.beta,
        &cfg.placement.build(),
        &cfg.bisection.build(),
        (cfg.rho_lo, cfg.rho_hi),
        cfg.seed,
        cfg.prior_seed,
    )?;
    let mut csv = Csv::new("rho,power,half_width");
    for p in &report.curve {
        csv.row(&[fmt(p.rho), fmt(p.power), fmt(p.half_width)]);
    }
    sink.write_primary(&csv.finish())?;
    sink.write_summary(&json!({
        "rho_hat": report.rho_hat,
        "rho_hat_sq": report.rho_hat * report.rho_hat,
        "target_power": report.target_power,
        "iterations": report.iterations,
    }))?;
    Ok(true)
}

pub fn scaling(config: &Path, sink: &Sink) -> Result<bool> {
    let cfg: ScalingConfigSpec = load(config)?;
    let mut sc = ScalingConfig::new(cfg.family.build(), cfg.sigma_grid.clone());
    sc.radius = cfg.radius;
    sc.alpha = cfg.alpha;
    sc.beta = cfg.beta;
    sc.bisection = cfg.bisection.build();
    sc.data_seed = cfg.seed;
    if let Some(threshold) = &cfg.threshold {
        sc.threshold = threshold.build()?;
    }
    let report = harness::scaling_experiment(&sc)?;
    let mut csv = Csv::new("sigma,d_bar,rho_hat_sq,iterations");
    for p in &report.points {
        csv.row(&[
            fmt(p.sigma),
            p.d_bar.to_string(),
            fmt(p.rho_hat_sq),
            p.iterations.to_string(),
        ]);
    }
    sink.write_primary(&csv.finish())?;
    let pass = report.relative_error <= cfg.slope_tolerance;
    sink.write_summary(&json!({
        "slope": report.slope,
        "intercept": report.intercept,
        "theoretical_slope": report.theoretical_slope,
        "relative_error": report.relative_error,
        "tolerance": cfg.slope_tolerance,
        "pass": pass,
    }))?;
    Ok(pass)
}
