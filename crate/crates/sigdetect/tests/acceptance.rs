//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (run with `--nocapture` to see them).
//!
//! Monte Carlo assertions use 3 binomial standard errors. Cross-check
//! criteria re-derive every formula with naive loops that share no code with
//! the library implementation.

use sigdetect::concentration::verify_tail;
use sigdetect::harness::{
    estimate_level, estimate_power, scaling_experiment, Alternative, BisectionSettings, RateFamily,
    ScalingConfig,
};
use sigdetect::model::{LpBody, Signal, VarianceProfile, WeightSeq};
use sigdetect::numeric::{binomial_se, pairwise_mean};
use sigdetect::priors::{
    chi2_divergence, empirical_indistinguishability, likelihood_ratio, PriorSpec,
};
use sigdetect::procedures::{TestKind, TestProcedure};
use sigdetect::quantiles::{max_chisq_quantile, QuantileMethod};
use sigdetect::rates::{d_dagger, lp_lower_bound, rho_d_sq, rho_kn_sq};
use sigdetect::rng::NoiseSource;

const ALPHA: f64 = 0.05;
const BETA: f64 = 0.05;

/// The three benchmark noise profiles: constant, σ_j = j, σ_j = e^{0.3 j}.
fn benchmark_profiles(n: usize) -> Vec<(&'static str, VarianceProfile)> {
    vec![
        ("constant", VarianceProfile::constant(1.0, n).unwrap()),
        ("linear", VarianceProfile::polynomial(1.0, 1.0, n).unwrap()),
        (
            "exponential",
            VarianceProfile::exponential(1.0, 0.3, n).unwrap(),
        ),
    ]
}

fn mc(reps: u64, seed: u64) -> QuantileMethod {
    QuantileMethod::monte_carlo(reps, seed).unwrap()
}

#[test]
fn criterion_1_level_suite() {
    let n = 30;
    let reps = 100_000u64;
    let se = binomial_se(ALPHA, reps);
    let lp_class = LpBody::new(WeightSeq::polynomial(1.0).unwrap(), 1.0, 1.0).unwrap();
    let kinds: Vec<(&str, TestKind, bool)> = vec![
        ("chisq", TestKind::Chisq { d: n }, true),
        ("max", TestKind::Max { n }, true),
        ("local", TestKind::Local { j: 17 }, true),
        ("combined", TestKind::Combined { n }, false),
        (
            "sparse-dagger",
            TestKind::SparseDagger {
                class: lp_class.clone(),
            },
            false,
        ),
    ];
    for (pi, (pname, profile)) in benchmark_profiles(n).into_iter().enumerate() {
        for (ki, (kname, kind, two_sided)) in kinds.iter().enumerate() {
            let cell_seed = 1000 + (pi * 10 + ki) as u64;
            let mut test = TestProcedure::new(kind.clone(), ALPHA).unwrap();
            if matches!(
                kind,
                TestKind::Chisq { .. } | TestKind::Combined { .. } | TestKind::SparseDagger { .. }
            ) {
                test = test.with_quantile(mc(1_000_000, cell_seed));
            }
            let report = estimate_level(&profile, &test, reps, 5000 + cell_seed).unwrap();
            if *two_sided {
                assert!(
                    (report.estimate - ALPHA).abs() <= 3.0 * se,
                    "criterion 1 (level suite): FAIL {kname}/{pname}: level {} vs {ALPHA} ± {}",
                    report.estimate,
                    3.0 * se
                );
            } else {
                assert!(
                    report.estimate <= ALPHA + 3.0 * se,
                    "criterion 1 (level suite): FAIL {kname}/{pname}: level {} > {ALPHA} + {}",
                    report.estimate,
                    3.0 * se
                );
            }
            println!(
                "criterion 1 (level suite): PASS {kname}/{pname}: level {:.5} (alpha {ALPHA}, 3se {:.5})",
                report.estimate,
                3.0 * se
            );
        }
    }
    println!("criterion 1 (level suite): PASS");
}

/// ‖θ‖² = 8 [max σ² (x_α + x_β) + (Σσ⁴)^{1/2} (√x_α + √x_β)], the proved
/// power radius of the χ² test, placed along the least-favorable direction
/// θ_j ∝ σ_j².
fn proved_radius_signal(profile: &VarianceProfile, d: usize) -> Signal {
    let sigmas = profile.sigmas(d).unwrap();
    let x_a = (1.0 / ALPHA).ln();
    let x_b = (1.0 / BETA).ln();
    let sum4: f64 = sigmas.iter().map(|s| s.powi(4)).sum();
    let max_sq = sigmas.iter().map(|s| s * s).fold(0.0, f64::max);
    let radius_sq = 8.0 * (max_sq * (x_a + x_b) + sum4.sqrt() * (x_a.sqrt() + x_b.sqrt()));
    let scale = radius_sq.sqrt() / sum4.sqrt();
    Signal::from_entries(
        sigmas
            .iter()
            .enumerate()
            .map(|(i, s)| (i + 1, s * s * scale)),
    )
    .unwrap()
}

#[test]
fn criterion_2_power_at_proved_radius() {
    let reps = 20_000u64;
    for (pname, profile) in benchmark_profiles(30) {
        for (di, d) in [5usize, 20].into_iter().enumerate() {
            let seed = 2000 + di as u64;
            let test = TestProcedure::new(TestKind::Chisq { d }, ALPHA)
                .unwrap()
                .with_quantile(mc(1_000_000, seed));
            let signal = proved_radius_signal(&profile, d);
            let power = estimate_power(
                &profile,
                &test,
                &Alternative::Fixed(signal),
                reps,
                seed + 100,
                0,
            )
            .unwrap();
            assert!(
                power.estimate >= 1.0 - BETA,
                "criterion 2 (power at proved radius): FAIL {pname}/D={d}: power {}",
                power.estimate
            );
            println!(
                "criterion 2 (power at proved radius): PASS {pname}/D={d}: power {:.4}",
                power.estimate
            );
        }
    }
    println!("criterion 2 (power at proved radius): PASS");
}

#[test]
fn criterion_3_max_test_power_condition() {
    let n = 30;
    let reps = 20_000u64;
    let q_beta = sigdetect::numeric::std_normal_quantile(1.0 - BETA / 2.0);
    let q_n = max_chisq_quantile(n, ALPHA, &QuantileMethod::Exact).unwrap();
    for (pi, (pname, profile)) in benchmark_profiles(n).into_iter().enumerate() {
        let j = n; // largest noise level on the monotone benchmark profiles
        let sigma_j = profile.sigma_at(j).unwrap();
        let theta_j = 1.01 * sigma_j * (q_beta + q_n.sqrt());
        let signal = Signal::from_entries([(j, theta_j)]).unwrap();
        let test = TestProcedure::new(TestKind::Max { n }, ALPHA).unwrap();
        let power = estimate_power(
            &profile,
            &test,
            &Alternative::Fixed(signal),
            reps,
            3000 + pi as u64,
            0,
        )
        .unwrap();
        let floor = 1.0 - BETA - 3.0 * binomial_se(1.0 - BETA, reps);
        assert!(
            power.estimate >= floor,
            "criterion 3 (max-test power condition): FAIL {pname}: power {} < {floor}",
            power.estimate
        );
        println!(
            "criterion 3 (max-test power condition): PASS {pname}: power {:.4} (floor {:.4})",
            power.estimate, floor
        );
    }
    println!("criterion 3 (max-test power condition): PASS");
}

/// Monte Carlo mean and standard error of f(L) over null draws.
fn null_mc_moments(
    profile: &VarianceProfile,
    spec: &PriorSpec,
    reps: u64,
    seed: u64,
    f: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let noise = NoiseSource::new(seed);
    let vals: Vec<f64> = (0..reps)
        .map(|r| {
            let obs = profile.sample(&Signal::zero(), &noise, r).unwrap();
            f(likelihood_ratio(&obs.values, spec, profile).unwrap())
        })
        .collect();
    let mean = pairwise_mean(&vals);
    let var = pairwise_mean(
        &vals
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .collect::<Vec<_>>(),
    );
    (mean, (var / reps as f64).sqrt())
}

#[test]
fn criterion_4_divergence_identities() {
    let reps = 100_000u64;

    // Rademacher prior on S_D, D ≤ 10, at the detection radius.
    let profile = VarianceProfile::polynomial(1.0, 0.5, 10).unwrap();
    let rho = rho_d_sq(&profile, 8, ALPHA, BETA).unwrap().sqrt();
    let spec = PriorSpec::rademacher_sd(8, rho).unwrap();
    let (l_mean, l_se) = null_mc_moments(&profile, &spec, reps, 41, |l| l);
    assert!(
        (l_mean - 1.0).abs() <= 3.0 * l_se,
        "criterion 4 (divergence identities): FAIL rademacher E0[L]={l_mean} se={l_se}"
    );
    let exact = chi2_divergence(&spec, &profile).unwrap().value;
    let (l2_mean, l2_se) = null_mc_moments(&profile, &spec, reps, 42, |l| l * l);
    assert!(
        (l2_mean - exact).abs() <= 3.0 * l2_se,
        "criterion 4 (divergence identities): FAIL rademacher E0[L^2]={l2_mean} exact={exact} se={l2_se}"
    );
    println!(
        "criterion 4 (divergence identities): PASS rademacher-sd: E0[L]={l_mean:.4}±{l_se:.4}, E0[L²]={l2_mean:.4} vs exact {exact:.4}"
    );

    // Sparse subset prior with C(n-l, k) = C(12,2) = 66 ≤ 100.
    let profile =
        VarianceProfile::explicit((1..=12).map(|j| 0.5 + 0.25 * j as f64).collect::<Vec<_>>())
            .unwrap();
    let block = profile.sigma_block(0, 2, 12).unwrap();
    let spec = PriorSpec::sparse_subset(2, 12, 0, (0.8 * block).sqrt()).unwrap();
    let (l_mean, l_se) = null_mc_moments(&profile, &spec, reps, 43, |l| l);
    assert!(
        (l_mean - 1.0).abs() <= 3.0 * l_se,
        "criterion 4 (divergence identities): FAIL sparse E0[L]={l_mean} se={l_se}"
    );
    let exact = chi2_divergence(&spec, &profile).unwrap().value;
    let (l2_mean, l2_se) = null_mc_moments(&profile, &spec, reps, 44, |l| l * l);
    assert!(
        (l2_mean - exact).abs() <= 3.0 * l2_se,
        "criterion 4 (divergence identities): FAIL sparse E0[L^2]={l2_mean} exact={exact} se={l2_se}"
    );
    println!(
        "criterion 4 (divergence identities): PASS sparse-subset: E0[L]={l_mean:.4}±{l_se:.4}, E0[L²]={l2_mean:.4} vs exact {exact:.4}"
    );
    println!("criterion 4 (divergence identities): PASS");
}

#[test]
fn criterion_5_divergence_boundary() {
    let profile = VarianceProfile::explicit(vec![1.0, 2.0, 1.7, 0.9, 3.0]).unwrap();
    let rho = rho_d_sq(&profile, 5, ALPHA, BETA).unwrap().sqrt();
    let spec = PriorSpec::rademacher_sd(5, rho).unwrap();
    let report = chi2_divergence(&spec, &profile).unwrap();
    let threshold = 1.0 + 4.0 * (1.0 - ALPHA - BETA) * (1.0 - ALPHA - BETA);
    assert!(
        (report.upper_bound - threshold).abs() < 1e-9,
        "criterion 5 (lower-bound boundary): FAIL bound {} vs threshold {threshold}",
        report.upper_bound
    );

    let test = TestProcedure::new(TestKind::Chisq { d: 5 }, ALPHA)
        .unwrap()
        .with_quantile(mc(1_000_000, 51));
    let reps = 100_000u64;
    let report2 = empirical_indistinguishability(&spec, &profile, &test, reps, 52, 53).unwrap();
    let floor = BETA - 3.0 * report2.se.max(binomial_se(BETA, reps));
    assert!(
        report2.avg_type_ii >= floor,
        "criterion 5 (lower-bound boundary): FAIL avg type II {} < {floor}",
        report2.avg_type_ii
    );
    println!(
        "criterion 5 (lower-bound boundary): PASS bound {:.10} = threshold {:.10}, avg type II {:.4} >= {:.4}",
        report.upper_bound, threshold, report2.avg_type_ii, floor
    );
}

#[test]
fn criterion_6_concentration_suite() {
    let x_grid = [0.25, 0.5, 1.0, 2.0, 3.0];
    let reps = 100_000u64;
    let configs: Vec<(&str, VarianceProfile, Signal, usize)> = vec![
        (
            "null/constant",
            VarianceProfile::constant(1.0, 5).unwrap(),
            Signal::zero(),
            5,
        ),
        (
            "spiky/heteroscedastic",
            VarianceProfile::explicit(vec![1.0, 2.0, 4.0]).unwrap(),
            Signal::from_entries([(1, 1.0), (3, 1.0)]).unwrap(),
            3,
        ),
        (
            "dense/linear",
            VarianceProfile::polynomial(1.0, 1.0, 8).unwrap(),
            Signal::from_entries([(2, 2.0), (5, -1.5), (8, 4.0)]).unwrap(),
            8,
        ),
    ];
    for (i, (name, profile, signal, d)) in configs.into_iter().enumerate() {
        let rows = verify_tail(&profile, &signal, d, &x_grid, reps, 600 + i as u64).unwrap();
        for row in &rows {
            assert!(
                row.emp_up <= row.bound + 3.0 * row.se,
                "criterion 6 (concentration suite): FAIL {name} x={}: up {} > {}",
                row.x,
                row.emp_up,
                row.bound + 3.0 * row.se
            );
            assert!(
                row.emp_down <= row.bound + 3.0 * row.se,
                "criterion 6 (concentration suite): FAIL {name} x={}: down {} > {}",
                row.x,
                row.emp_down,
                row.bound + 3.0 * row.se
            );
        }
        println!(
            "criterion 6 (concentration suite): PASS {name}: all {} exceedances within e^-x + 3se",
            2 * rows.len()
        );
    }
    println!("criterion 6 (concentration suite): PASS");
}

#[test]
fn criterion_7_scaling_reproduction() {
    let mut config = ScalingConfig::new(
        RateFamily::PolyPoly { s: 2.0, t: 1.0 },
        vec![0.2, 0.1, 0.05, 0.025, 0.0125],
    );
    config.bisection = BisectionSettings {
        max_iter: 24,
        rel_tol: 0.01,
        point_reps: 40_000,
    };
    config.data_seed = 700;
    let report = scaling_experiment(&config).unwrap();
    assert!(
        report.relative_error <= 0.15,
        "criterion 7 (scaling reproduction): FAIL slope {} vs {} (relative error {})",
        report.slope,
        report.theoretical_slope,
        report.relative_error
    );
    println!(
        "criterion 7 (scaling reproduction): PASS slope {:.4} vs theoretical {:.4} (relative error {:.3}), D-levels {:?}",
        report.slope,
        report.theoretical_slope,
        report.relative_error,
        report.points.iter().map(|p| p.d_bar).collect::<Vec<_>>()
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: brute-force oracles, written with naive loops and no shared
// helpers. Floating-point outputs must agree to 1e-12 relative (the oracle
// sums in a different order); integer outputs must match exactly.
// ---------------------------------------------------------------------------

fn brute_sorted(sigmas: &[f64]) -> Vec<f64> {
    let mut v = sigmas.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn brute_block(sorted: &[f64], l: usize, k: usize) -> f64 {
    let mut total = 0.0;
    for j in l..l + k {
        total += sorted[j] * sorted[j];
    }
    total
}

fn brute_rho_kn_sq(sigmas: &[f64], k: usize) -> f64 {
    let n = sigmas.len();
    let sorted = brute_sorted(sigmas);
    let mut best = f64::NEG_INFINITY;
    for l in 0..=n - k {
        let u = (n - l) as f64 / (k * k) as f64;
        let arg = if u > u.sqrt() { u } else { u.sqrt() };
        let candidate = brute_block(&sorted, l, k) * (1.0 + arg).ln();
        if candidate > best {
            best = candidate;
        }
    }
    let mut tail = 0.0;
    for j in n - k..n {
        tail += sorted[j].powi(4);
    }
    if tail.sqrt() > best {
        best = tail.sqrt();
    }
    best
}

fn brute_ceil_sqrt(d: usize) -> usize {
    let mut s = 0;
    while (s + 1) * (s + 1) <= d {
        s += 1;
    }
    s + 1
}

fn brute_lp_bias(a_d: f64, p: f64, radius: f64, d: usize) -> f64 {
    (d as f64).sqrt().powf(1.0 - 2.0 / p) * radius * radius / (a_d * a_d)
}

fn brute_d_dagger(weights: &[f64], p: f64, radius: f64, sigmas: &[f64], n: usize) -> usize {
    for d in 2..=n {
        let k = brute_ceil_sqrt(d);
        if brute_lp_bias(weights[d - 1], p, radius, d) <= brute_rho_kn_sq(&sigmas[..d], k) {
            return d;
        }
    }
    n
}

fn brute_lp_lower(weights: &[f64], p: f64, radius: f64, sigmas: &[f64], d: usize) -> (f64, f64) {
    let k = brute_ceil_sqrt(d);
    let sorted = brute_sorted(&sigmas[..d]);
    let bias = brute_lp_bias(weights[d - 1], p, radius, d);
    let top = brute_block(&sorted, d - k, k);
    let mut rho1 = f64::NEG_INFINITY;
    for l in 0..=d - k {
        let block = brute_block(&sorted, l, k);
        let spread = block * (1.0 + (1.0 - l as f64 / d as f64).sqrt()).ln();
        let ratio_term = bias * block / top;
        let candidate = if ratio_term < spread {
            ratio_term
        } else {
            spread
        };
        if candidate > rho1 {
            rho1 = candidate;
        }
    }
    let mut tail = 0.0;
    for j in d - k..d {
        tail += sorted[j].powi(4);
    }
    let rho2 = if bias < tail.sqrt() {
        bias
    } else {
        tail.sqrt()
    };
    (rho1, rho2)
}

#[test]
fn criterion_8_brute_force_cross_checks() {
    use rand_core::RngCore;
    let noise = NoiseSource::new(880);
    let mut rng = noise.replicate_rng(0);
    let mut unif = |lo: f64, hi: f64| lo + (hi - lo) * sigdetect::rng::unit_open(rng.next_u64());
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    for instance in 0..50 {
        let n = 2 + (instance % 29);
        let sigmas: Vec<f64> = (0..n).map(|_| unif(0.1, 5.0)).collect();
        let mut weights: Vec<f64> = (0..n).map(|_| unif(0.1, 5.0)).collect();
        weights.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p = unif(0.3, 1.9);
        let radius = unif(0.1, 10.0);
        let k = 1 + (instance * 7) % n;

        let profile = VarianceProfile::explicit(sigmas.clone()).unwrap();
        let wseq = WeightSeq::explicit(weights.clone()).unwrap();

        let lib = rho_kn_sq(&profile, k, n).unwrap();
        let oracle = brute_rho_kn_sq(&sigmas, k);
        assert!(
            rel(lib, oracle) < 1e-12,
            "criterion 8 (cross-checks): FAIL rho_kn instance {instance}: {lib} vs {oracle}"
        );

        let lib = d_dagger(&wseq, p, radius, &profile, n).unwrap();
        let oracle = brute_d_dagger(&weights, p, radius, &sigmas, n);
        assert_eq!(
            lib, oracle,
            "criterion 8 (cross-checks): FAIL d_dagger instance {instance}"
        );

        let d = n; // deepest level exercises every l
        let lib = lp_lower_bound(&wseq, p, radius, &profile, d).unwrap();
        let (o1, o2) = brute_lp_lower(&weights, p, radius, &sigmas, d);
        assert!(
            rel(lib.rho1, o1) < 1e-12 && rel(lib.rho2, o2) < 1e-12,
            "criterion 8 (cross-checks): FAIL lp_lower instance {instance}: ({}, {}) vs ({o1}, {o2})",
            lib.rho1,
            lib.rho2
        );
    }
    println!("criterion 8 (cross-checks): PASS 50 instances, rho_kn/d_dagger/lp_lower all match");
}
