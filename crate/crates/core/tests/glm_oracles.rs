use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use streetrisk_core::glm::{
    deviance, fit_poisson, log_likelihood, normal_cdf, predict, two_sided_p_value, wald_tests,
    DesignMatrix, FitOptions, INTERCEPT,
};

struct Instance {
    design: DesignMatrix,
    y: Vec<u32>,
    offsets: Vec<f64>,
}

fn random_instance(seed: u64, n: usize, features: usize) -> Instance {
    random_instance_scaled(seed, n, features, 0.3)
}

fn random_instance_scaled(seed: u64, n: usize, features: usize, offset_scale: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = vec![INTERCEPT.to_string()];
    let mut columns = vec![vec![1.0; n]];
    let beta: Vec<f64> = (0..features).map(|_| rng.random_range(-0.5..0.5)).collect();
    for k in 0..features {
        names.push(format!("x{k}"));
        columns.push((0..n).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect());
    }
    let offsets: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0) * offset_scale).collect();
    let y = (0..n)
        .map(|i| {
            let eta: f64 = (0..features).map(|k| beta[k] * columns[k + 1][i]).sum();
            let mean = offsets[i] * eta.exp();
            Poisson::new(mean).unwrap().sample(&mut rng) as u32
        })
        .collect();
    Instance {
        design: DesignMatrix::from_columns(names, columns).unwrap(),
        y,
        offsets,
    }
}

fn mu_at(inst: &Instance, beta: &[f64]) -> Vec<f64> {
    (0..inst.design.n_rows())
        .map(|i| {
            let eta: f64 = inst.design.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
            inst.offsets[i] * eta.exp()
        })
        .collect()
}

#[test]
fn intercept_only_is_log_ratio() {
    let y = [0u32, 2, 1, 0, 5, 1];
    let o = [0.3, 1.0, 0.5, 0.25, 2.0, 0.7];
    let design = DesignMatrix::from_columns(vec![INTERCEPT.into()], vec![vec![1.0; 6]]).unwrap();
    let m = fit_poisson(&design, &y, &o, &FitOptions::default()).unwrap();
    let expected = (9.0f64 / o.iter().sum::<f64>()).ln();
    assert!((m.coefficients[0] - expected).abs() < 1e-8);
}

#[test]
fn single_binary_covariate_matches_group_ratios() {
    for seed in 0..10 {
        let inst = random_instance(seed, 400, 1);
        let x = inst.design.column(1);
        let (mut y0, mut o0, mut y1, mut o1) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..400 {
            if x[i] == 1.0 {
                y1 += f64::from(inst.y[i]);
                o1 += inst.offsets[i];
            } else {
                y0 += f64::from(inst.y[i]);
                o0 += inst.offsets[i];
            }
        }
        let b0 = (y0 / o0).ln();
        let b1 = (y1 / o1).ln() - b0;
        let m = fit_poisson(&inst.design, &inst.y, &inst.offsets, &FitOptions::default()).unwrap();
        assert!((m.coefficients[0] - b0).abs() < 1e-8, "seed {seed}: {} vs {b0} after {} iterations", m.coefficients[0], m.iterations);
        assert!((m.coefficients[1] - b1).abs() < 1e-8, "seed {seed}: {} vs {b1} after {} iterations", m.coefficients[1], m.iterations);
    }
}

#[test]
fn score_equations_and_total_balance() {
    for seed in 0..10 {
        let inst = random_instance(100 + seed, 800, 4);
        let m = fit_poisson(&inst.design, &inst.y, &inst.offsets, &FitOptions::default()).unwrap();
        assert!(m.converged);
        let mu = predict(&m, &inst.design, &inst.offsets).unwrap();
        let n = inst.y.len() as f64;
        for j in 0..inst.design.n_cols() {
            let score: f64 = (0..inst.y.len())
                .map(|i| inst.design.get(i, j) * (f64::from(inst.y[i]) - mu[i]))
                .sum();
            assert!((score / n).abs() < 1e-6, "column {j}: {score}");
        }
        let total_y: f64 = inst.y.iter().map(|&v| f64::from(v)).sum();
        let total_mu: f64 = mu.iter().sum();
        assert!(((total_mu - total_y) / total_y).abs() < 1e-6);
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    for seed in 0..5 {
        let inst = random_instance_scaled(200 + seed, 60, 3, 4.0);
        let m = fit_poisson(&inst.design, &inst.y, &inst.offsets, &FitOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // at the optimum and at perturbed points
        for trial in 0..4 {
            let beta: Vec<f64> = m
                .coefficients
                .iter()
                .map(|b| if trial == 0 { *b } else { b + rng.random_range(-0.3..0.3) })
                .collect();
            let mu = mu_at(&inst, &beta);
            for j in 0..beta.len() {
                let analytic: f64 = (0..inst.y.len())
                    .map(|i| inst.design.get(i, j) * (f64::from(inst.y[i]) - mu[i]))
                    .sum();
                let h = 1e-5;
                let mut up = beta.clone();
                up[j] += h;
                let mut down = beta.clone();
                down[j] -= h;
                let numeric = (log_likelihood(&inst.y, &mu_at(&inst, &up))
                    - log_likelihood(&inst.y, &mu_at(&inst, &down)))
                    / (2.0 * h);
                let scale = analytic.abs().max(1.0);
                assert!(
                    (numeric - analytic).abs() / scale < 1e-5,
                    "seed {seed} trial {trial} column {j}: {numeric} vs {analytic}"
                );
            }
        }
    }
}

#[test]
fn offset_scaling_shifts_only_the_intercept() {
    let inst = random_instance(300, 600, 3);
    let base = fit_poisson(&inst.design, &inst.y, &inst.offsets, &FitOptions::default()).unwrap();
    let base_p = wald_tests(&base).unwrap();
    let base_mu = predict(&base, &inst.design, &inst.offsets).unwrap();
    for c in [0.01, 0.5, 3.0, 250.0] {
        let scaled: Vec<f64> = inst.offsets.iter().map(|o| o * c).collect();
        let m = fit_poisson(&inst.design, &inst.y, &scaled, &FitOptions::default()).unwrap();
        assert!((m.coefficients[0] - (base.coefficients[0] - f64::ln(c))).abs() < 1e-8);
        for j in 1..m.coefficients.len() {
            assert!((m.coefficients[j] - base.coefficients[j]).abs() < 1e-8);
        }
        let p = wald_tests(&m).unwrap();
        for j in 1..p.len() {
            assert!((p[j].p_value.unwrap() - base_p[j].p_value.unwrap()).abs() < 1e-8);
        }
        let mu = predict(&m, &inst.design, &scaled).unwrap();
        for (a, b) in mu.iter().zip(&base_mu) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn deviance_equals_resummed_terms_and_never_rises() {
    for seed in 0..5 {
        let inst = random_instance(400 + seed, 500, 4);
        let m = fit_poisson(&inst.design, &inst.y, &inst.offsets, &FitOptions::default()).unwrap();
        let mu = predict(&m, &inst.design, &inst.offsets).unwrap();
        let mut by_hand = 0.0;
        for (y, mu) in inst.y.iter().zip(&mu) {
            let y = f64::from(*y);
            by_hand += if y > 0.0 { 2.0 * (y * (y / mu).ln() - (y - mu)) } else { 2.0 * mu };
        }
        let yf: Vec<f64> = inst.y.iter().map(|&v| f64::from(v)).collect();
        assert!((deviance(&yf, &mu) - by_hand).abs() < 1e-8 * by_hand.max(1.0));
        assert!((m.deviance - by_hand).abs() < 1e-6 * by_hand.max(1.0));
        for w in m.deviance_trace.windows(2).skip(1) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{:?}", m.deviance_trace);
        }
    }
}

#[test]
fn fit_is_bit_deterministic() {
    let inst = random_instance(500, 300, 3);
    let a = fit_poisson(&inst.design, &inst.y, &inst.offsets, &FitOptions::default()).unwrap();
    let b = fit_poisson(&inst.design, &inst.y, &inst.offsets, &FitOptions::default()).unwrap();
    assert_eq!(a, b);
}

/// `Φ(x) = 1/2 + φ(x) Σ x^{2k+1} / (2k+1)!!`, summed until the terms vanish.
fn cdf_series(x: f64) -> f64 {
    let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    while term.abs() > 1e-18 * sum.abs() {
        k += 1.0;
        term *= x * x / (2.0 * k + 1.0);
        sum += term;
    }
    0.5 + phi * sum
}

#[test]
fn normal_cdf_matches_series() {
    let mut x = -4.0;
    while x <= 4.0 {
        let (a, b) = (normal_cdf(x), cdf_series(x));
        assert!((a - b).abs() < 1e-13, "x = {x}: {a} vs {b}");
        x += 0.125;
    }
}

#[test]
fn critical_value_gives_five_percent() {
    assert!((two_sided_p_value(1.959964) - 0.05).abs() < 1e-6);
    assert!((two_sided_p_value(-1.959964) - 0.05).abs() < 1e-6);
    assert_eq!(two_sided_p_value(0.0), 1.0);
}
