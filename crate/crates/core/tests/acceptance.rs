use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::Instant;
use trigzeros::coeffgen::{standardized_functional, CoefficientModel, FunctionalSpec, InnovationFamily};
use trigzeros::oracle::{kac_rice_expected_zeros, kac_rice_iid, sigma_n_sq, sinc_quadratic_form, KacRiceSpec, SincSampler};
use trigzeros::rng::StreamId;
use trigzeros::spectral::{density_from_finite_covariance, CovarianceSequence, DEFAULT_GRID};
use trigzeros::stats::{
    clt_samples, empirical_small_ball, exponent_ledger, factorial_radius, kolmogorov_distance,
    mc_expected_zero_density, sinc_zero_intensity, universal_limit, SmallBallMode,
};
use trigzeros::trigpoly::{evaluate_on_grid, sobolev_norm_sq, tightness_exact, TrigPolynomial};
use trigzeros::tvbound::truncation_sweep;
use trigzeros::zeros::rademacher_smallball_exact;
use trigzeros::Result;

const SEED: u64 = 20_240_611;

fn ma1() -> CoefficientModel {
    CoefficientModel::MovingAverage { kernel: vec![0.8f64.sqrt(), 0.2f64.sqrt()], innovation: InnovationFamily::Rademacher }
}

fn universality_ma() -> Result<(bool, String)> {
    let e = mc_expected_zero_density(&ma1(), 1024, 1000, SEED)?;
    let rel = (e.mean - universal_limit()).abs() / universal_limit();
    Ok((rel < 0.02, format!("mean {:.5} +- {:.5}, relative error {rel:.4}", e.mean, e.stderr)))
}

fn universality_sign() -> Result<(bool, String)> {
    let model = CoefficientModel::GaussianFunctional {
        covariance: CovarianceSequence::bargmann_fock(12),
        functional: standardized_functional(&FunctionalSpec::sign())?,
    };
    let e = mc_expected_zero_density(&model, 1024, 500, SEED)?;
    let rel = (e.mean - universal_limit()).abs() / universal_limit();
    Ok((rel < 0.02, format!("mean {:.5} +- {:.5}, relative error {rel:.4}", e.mean, e.stderr)))
}

fn gaussian_oracle() -> Result<(bool, String)> {
    let n = 256;
    let kr = kac_rice_expected_zeros(&KacRiceSpec::new(CovarianceSequence::white(), n))? / n as f64;
    let closed = kac_rice_iid(n) / n as f64;
    let e = mc_expected_zero_density(&CoefficientModel::Iid(InnovationFamily::Gaussian), n, 2000, SEED)?;
    let z = e.z_score(kr);
    let rel = (kr - closed).abs() / closed;
    Ok((z <= 3.0 && rel < 0.002, format!("mean {:.5}, Kac-Rice {kr:.6}, z = {z:.2}, closed form gap {rel:.2e}", e.mean)))
}

fn sinc_limit() -> Result<(bool, String)> {
    let e = sinc_zero_intensity(&SincSampler::native()?, 100_000, SEED)?;
    let z = e.z_score(universal_limit());
    Ok((z <= 3.0, format!("mean {:.5} +- {:.5}, z = {z:.2}", e.mean, e.stderr)))
}

fn exact_identities() -> Result<(bool, String)> {
    let mut worst = [0.0f64; 4];
    let mut rng = StreamId::new(SEED, 0).rng();
    for n in [5usize, 32, 100] {
        let (a, b): (Vec<f64>, Vec<f64>) =
            (0..n).map(|_| (rand::Rng::random::<f64>(&mut rng) - 0.5, rand::Rng::random::<f64>(&mut rng) - 0.5)).unzip();
        let p = TrigPolynomial::new(a, b)?;
        for order in 0..3 {
            let size = (8 * n).next_power_of_two();
            let v = evaluate_on_grid(&p.derivative(order), size)?;
            let ms = v.iter().map(|x| x * x).sum::<f64>() / size as f64;
            let direct = ms / (n as f64).powi(2 * order as i32 + 1);
            let s = sobolev_norm_sq(&p, order);
            worst[0] = worst[0].max((direct - s).abs() / s);
        }
    }
    let mut tight_ok = true;
    for n in [1usize, 7, 64, 1000] {
        for delta in [0.01, 0.5, 1.0, PI, TAU, 10.0] {
            let nf = n as f64;
            let direct: f64 = (1..=n)
                .map(|k| {
                    let (s, c) = (k as f64 * delta / nf).sin_cos();
                    ((1.0 - c).powi(2) + s * s) / nf
                })
                .sum();
            let exact = tightness_exact(n, delta);
            worst[1] = worst[1].max((direct - exact).abs());
            tight_ok &= exact <= delta * delta * (1.0 + 1e-12);
        }
    }
    for k in [1usize, 3, 17] {
        let kf = k as f64;
        let checks = [
            (TrigPolynomial::cosine(k, 1.0).derivative(1), TrigPolynomial::sine(k, -kf)),
            (TrigPolynomial::sine(k, 1.0).derivative(1), TrigPolynomial::cosine(k, kf)),
            (TrigPolynomial::cosine(k, 1.0).derivative(4), TrigPolynomial::cosine(k, kf.powi(4))),
        ];
        for (d, want) in checks {
            let err = d.a().iter().zip(want.a()).chain(d.b().iter().zip(want.b())).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            worst[2] = worst[2].max(err);
        }
    }
    for k in [1usize, 5, 17, 64] {
        let rho = CovarianceSequence::from_fn(k, |h| {
            (1.0 - h as f64 / (k + 1) as f64) * 0.6f64.powi(h as i32) * (0.3 * h as f64).cos()
        })?;
        let back = density_from_finite_covariance(&rho, DEFAULT_GRID)?.grid_coefficients();
        for (h, b) in back.iter().enumerate() {
            let want = if h <= k { rho.at(h as i64) } else { 0.0 };
            worst[3] = worst[3].max((b - want).abs());
        }
    }
    let ok = worst[0] < 1e-8 && worst[1] < 1e-12 && tight_ok && worst[2] == 0.0 && worst[3] < 1e-9;
    Ok((
        ok,
        format!(
            "Sobolev {:.1e}, tightness {:.1e} (bound held: {tight_ok}), derivative {:.1e}, round trip {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    ))
}

fn anti_concentration() -> Result<(bool, String)> {
    let kernel = [0.8f64.sqrt(), 0.2f64.sqrt()];
    let triples = [(0.3, 0.7, 0.0), (0.1, 1.3, 2.0), (0.5, 0.2, 4.5), (0.05, 2.9, 1.0), (0.8, 5.0, 3.3)];
    let mut worst = 0.0f64;
    for n in [4usize, 8] {
        for &(delta, x, t) in &triples {
            let exact = rademacher_smallball_exact(n, x, t, delta, &kernel)?;
            let e = empirical_small_ball(&ma1(), n, delta, SmallBallMode::AtPoint { t, x }, 20_000, SEED)?;
            worst = worst.max(e.z_score(exact));
        }
    }
    let delta = factorial_radius(128, 0.5);
    let sup = empirical_small_ball(&ma1(), 128, delta, SmallBallMode::SupNorm, 2000, SEED)?;
    Ok((
        worst <= 5.0 && sup.mean < 0.01,
        format!("worst z = {worst:.2} over 10 cases, sup-norm frequency {:.4} at delta {delta:.2e}", sup.mean),
    ))
}

fn clt_trend() -> Result<(bool, String)> {
    let mut d = Vec::new();
    for n in [64usize, 256, 1024, 4096] {
        d.push(kolmogorov_distance(&clt_samples(&ma1(), n, 20_000, SEED)?)?);
    }
    let inversions = d.windows(2).filter(|w| w[1] >= w[0]).count();
    Ok((inversions <= 1, format!("distances {d:.4?}, {inversions} inversion(s)")))
}

fn sigma_convergence() -> Result<(bool, String)> {
    let rho = CovarianceSequence::moving_average(&[0.8f64.sqrt(), 0.2f64.sqrt()])?;
    let configs: [(f64, &[f64], &[f64]); 3] = [
        (0.4, &[0.0], &[1.0]),
        (1.7, &[0.0, 2.0], &[1.0, 0.5]),
        (3.0, &[-1.0, 0.5, 4.0], &[0.3, -1.0, 0.8]),
    ];
    let mut worst = 0.0f64;
    for (x, t, xi) in configs {
        worst = worst.max((sigma_n_sq(x, t, xi, &rho, 8192)? - sinc_quadratic_form(t, xi)).abs());
    }
    Ok((worst < 0.02, format!("worst gap {worst:.2e}")))
}

fn tv_truncation() -> Result<(bool, String)> {
    let rho = CovarianceSequence::bargmann_fock(12);
    let ms = [2usize, 4, 6, 8, 10, 12, 14];
    let rows = truncation_sweep(&rho, 256, &ms, None)?;
    let at10 = rows.iter().find(|r| r.m == 10).map(|r| r.tv_bound).unwrap_or(f64::NAN);
    let below = rows.iter().all(|r| r.tv_bound <= r.trace_bound);
    let zero = rows.iter().filter(|r| r.m >= rho.support()).all(|r| r.tv_bound == 0.0);
    Ok((at10 < 1e-6 && below && zero, format!("bound(10) = {at10:.2e}, below trace: {below}, zero past support: {zero}")))
}

fn exponents() -> Result<(bool, String)> {
    let g = exponent_ledger(1e6, 0.0)?.gamma0;
    let d0 = exponent_ledger(1.0, 0.0)?.d0;
    Ok(((g - 1.0 / 14.0).abs() < 1e-5 && d0 == 48.5, format!("gamma0(1e6) = {g:.8}, D0(1) = {d0}")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<(bool, String)>); 10] = [
        ("universality, Rademacher MA(1), n=1024", universality_ma),
        ("universality, sign of Bargmann-Fock Gaussian, n=1024", universality_sign),
        ("Gaussian i.i.d. against Kac-Rice, n=256", gaussian_oracle),
        ("sinc process zero intensity", sinc_limit),
        ("exact identities", exact_identities),
        ("anti-concentration against exact enumeration", anti_concentration),
        ("Kolmogorov distance trend", clt_trend),
        ("variance convergence to the sinc form, n=8192", sigma_convergence),
        ("total-variation truncation bounds", tv_truncation),
        ("exponent ledger", exponents),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "[{}] criterion {}: {name}: {detail} ({:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
