//! Deterministic geometry checks and the Monte Carlo ball volume.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checks::CheckSummary;
use super::{Estimate, BAND};
use crate::error::{domain, Result};
use crate::hypgeom::{
    ball_volume, ball_volume_asymptotic, distance_raw, horodistance_defect, hyp_distance, window_measure,
    GeometryContext, HPoint,
};
use crate::ppp::sample_ordinate;

/// Monte Carlo volume of the ball of radius `rho` around `(0, 1)`: sample the
/// Euclidean bounding box `[-sinh ρ, sinh ρ]^d × [e^-ρ, e^ρ]` under the
/// hyperbolic measure and count hits.
pub fn ball_volume_mc(ctx: &GeometryContext, rho: f64, samples: usize, seed: u64) -> Result<Estimate> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(domain(format!("radius must be finite and non-negative, got {rho}")));
    }
    if samples == 0 {
        return Err(domain("need at least one sample"));
    }
    if rho == 0.0 {
        return Ok(Estimate { mean: 0.0, std_error: 0.0, n: samples, censored_fraction: 0.0 });
    }
    let d = ctx.dim();
    let half = rho.sinh();
    let (y_lo, y_hi) = ((-rho).exp(), rho.exp());
    let measure = window_measure(half, y_lo, y_hi, ctx)?;
    let origin = vec![0.0; d];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; d];
    let mut hits = 0usize;
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = rng.random_range(-half..=half);
        }
        let u: f64 = rng.random();
        let y = sample_ordinate(u, y_lo, y_hi, d)?;
        if distance_raw(&x, y, &origin, 1.0) < rho {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    Ok(Estimate {
        mean: measure * p,
        std_error: measure * (p * (1.0 - p) / samples as f64).sqrt(),
        n: samples,
        censored_fraction: 0.0,
    })
}

fn check(name: &str, params: &[(&str, f64)], estimate: f64, std_error: f64, bound: f64, pass: bool) -> CheckSummary {
    CheckSummary {
        check: name.into(),
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        estimate,
        std_error,
        bound,
        pass,
    }
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> HPoint<f64> {
    let x = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
    let y = rng.random_range(-5.0f64..5.0).exp();
    HPoint::new(x, y).expect("positive ordinate")
}

/// Distance oracles, horodistance limit and ball volumes.
pub fn geometry_checks(seed: u64) -> Result<Vec<CheckSummary>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let pairs = 100_000;

    // cosh d = 1 + (|Δx|² + Δy²) / (2 y₁ y₂)
    let mut worst = 0.0f64;
    for k in 0..pairs {
        let dim = 1 + k % 3;
        let (a, b) = (random_point(&mut rng, dim), random_point(&mut rng, dim));
        let dx2: f64 = a.abscissa().iter().zip(b.abscissa()).map(|(p, q)| (p - q) * (p - q)).sum();
        let dy = a.ordinate() - b.ordinate();
        let oracle = (1.0 + (dx2 + dy * dy) / (2.0 * a.ordinate() * b.ordinate())).acosh();
        let got = hyp_distance(&a, &b)?;
        worst = worst.max((got - oracle).abs() / oracle);
    }
    out.push(check("distance_oracle", &[("pairs", pairs as f64)], worst, 0.0, 1e-10, worst <= 1e-10));

    let mut vertical = 0.0f64;
    let mut horizontal = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let z = random_point(&mut rng, 1);
        let y2 = rng.random_range(-5.0f64..5.0).exp();
        let w = HPoint::new(z.abscissa().to_vec(), y2)?;
        let exact = (y2 / z.ordinate()).ln().abs();
        let err = (hyp_distance(&z, &w)? - exact).abs() / (f64::EPSILON * exact.max(1.0));
        vertical = vertical.max(err);

        let r = rng.random_range(0.0..20.0);
        let side = HPoint::new(vec![z.abscissa()[0] + r], z.ordinate())?;
        horizontal = horizontal.max(hyp_distance(&z, &side)? - r / z.ordinate() * (1.0 + 4.0 * f64::EPSILON));
    }
    out.push(check("vertical_distance_ulps", &[("pairs", pairs as f64)], vertical, 0.0, 8.0, vertical <= 8.0));
    out.push(check("horizontal_bound", &[("pairs", pairs as f64)], horizontal, 0.0, 0.0, horizontal <= 0.0));

    let origin = HPoint::new(vec![0.0], 1.0)?;
    let probes = [1e3, 1e4, 1e5, 1e6];
    let zs: Vec<HPoint<f64>> = (0..100)
        .map(|_| HPoint::new(vec![rng.random_range(-5.0..5.0)], rng.random_range(-3.0f64..3.0).exp()))
        .collect::<Result<_>>()?;
    let mut errors = Vec::new();
    for &p in &probes {
        let probe = HPoint::new(vec![0.0], p)?;
        let mut worst = 0.0f64;
        for z in &zs {
            worst = worst.max((horodistance_defect(z, &probe, &origin)? + z.ordinate().ln()).abs());
        }
        errors.push(worst);
    }
    let last = *errors.last().expect("probes");
    out.push(check("horodistance_limit", &[("probe", 1e6)], last, 0.0, 1e-3, last <= 1e-3));
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    out.push(check("horodistance_convergence", &[("probe_first", 1e3), ("error_first", errors[0])], last, 0.0, errors[0], decreasing));

    let line = GeometryContext::new(1)?;
    for (k, rho) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let est = ball_volume_mc(&line, rho, 1_000_000, seed.wrapping_add(k as u64 + 1))?;
        let exact = 2.0 * std::f64::consts::PI * (rho.cosh() - 1.0);
        let pass = (est.mean - exact).abs() <= BAND * est.std_error;
        out.push(check("ball_volume_mc", &[("dim", 1.0), ("rho", rho), ("target", exact)], est.mean, est.std_error, BAND * est.std_error, pass));
    }
    let plane = GeometryContext::new(2)?;
    let est = ball_volume_mc(&plane, 1.0, 1_000_000, seed.wrapping_add(7))?;
    let quad = ball_volume(1.0, &plane)?;
    let pass = (est.mean - quad).abs() <= BAND * est.std_error;
    out.push(check("ball_volume_mc", &[("dim", 2.0), ("rho", 1.0), ("target", quad)], est.mean, est.std_error, BAND * est.std_error, pass));

    for dim in 1..=3 {
        let ctx = GeometryContext::new(dim)?;
        let ratio = ball_volume(20.0, &ctx)? / ball_volume_asymptotic(20.0, &ctx);
        let dev = (ratio - 1.0).abs();
        out.push(check("volume_asymptotic", &[("dim", dim as f64), ("rho", 20.0)], ratio, 0.0, 1e-4, dev <= 1e-4));
    }
    Ok(out)
}
