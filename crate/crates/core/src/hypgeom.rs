//! Geometry of the upper half-space model `{(x, y) : x ∈ ℝ^d, y > 0}` with
//! metric `(|dx|² + dy²) / y²`.
//!
//! Distances use the cosh identity
//! `cosh d = 1 + (|x₁ - x₂|² + (y₁ - y₂)²) / (2 y₁ y₂)`, evaluated through
//! `ln1p` so short distances keep full relative precision. The atanh form
//! ([`phi`] applied to [`phi_argument`]) is kept as an independent route.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::Real;

/// A point of the half-space model: abscissa `x ∈ ℝ^d` and ordinate `y > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HPoint<T> {
    abscissa: Vec<T>,
    ordinate: T,
}

impl<T: Real> HPoint<T> {
    pub fn new(abscissa: Vec<T>, ordinate: T) -> Result<Self> {
        if abscissa.is_empty() {
            return Err(domain("abscissa must have at least one coordinate"));
        }
        if !(ordinate > T::zero()) || !ordinate.is_finite() {
            return Err(domain(format!("ordinate must be positive and finite, got {ordinate}")));
        }
        if abscissa.iter().any(|c| !c.is_finite()) {
            return Err(domain("abscissa coordinates must be finite"));
        }
        Ok(Self { abscissa, ordinate })
    }

    /// Planar shorthand for `d = 1`.
    pub fn planar(x: T, y: T) -> Result<Self> {
        Self::new(vec![x], y)
    }

    pub fn dim(&self) -> usize {
        self.abscissa.len()
    }

    pub fn abscissa(&self) -> &[T] {
        &self.abscissa
    }

    pub fn ordinate(&self) -> T {
        self.ordinate
    }

    pub fn into_parts(self) -> (Vec<T>, T) {
        (self.abscissa, self.ordinate)
    }
}

/// Per-dimension constants for abscissa dimension `d`.
///
/// `sphere_surface` is `S(d)`, the surface of the unit sphere of `ℝ^d`, and
/// `unit_ball_volume` is `ϑ(d) = S(d) / d`. Hyperbolic balls live in the
/// `(d+1)`-dimensional space, so their polar-coordinate constant is the
/// surface of the unit sphere of `ℝ^{d+1}`, `S(d+1)` ([`Self::polar_surface`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryContext {
    dim: usize,
    sphere_surface: f64,
    unit_ball_volume: f64,
    polar_surface: f64,
}

/// `S(n) = n π^{n/2} / Γ(n/2 + 1)`.
fn unit_sphere_surface(n: usize) -> f64 {
    let n = n as f64;
    n * std::f64::consts::PI.powf(n / 2.0) / statrs::function::gamma::gamma(n / 2.0 + 1.0)
}

impl GeometryContext {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        let sphere_surface = unit_sphere_surface(dim);
        Ok(Self {
            dim,
            sphere_surface,
            unit_ball_volume: sphere_surface / dim as f64,
            polar_surface: unit_sphere_surface(dim + 1),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sphere_surface(&self) -> f64 {
        self.sphere_surface
    }

    pub fn unit_ball_volume(&self) -> f64 {
        self.unit_ball_volume
    }

    /// Constant in `∫ f(d(z, z₀)) dμ(z) = S(d+1) ∫ f(ρ) sinh(ρ)^d dρ`.
    pub fn polar_surface(&self) -> f64 {
        self.polar_surface
    }
}

/// `Φ(t) = 2 atanh(√(1 - 4/t))` on `[4, ∞)`.
pub fn phi<T: Real>(t: T) -> Result<T> {
    let four = T::lit(4.0);
    if !(t >= four) {
        return Err(domain(format!("phi requires t >= 4, got {t}")));
    }
    let s = (T::one() - four / t).sqrt();
    Ok(T::lit(2.0) * s.atanh())
}

/// Argument of [`phi`] for a pair of points: `(κ² + (v + 1)²) / v` with
/// `κ = |x₁ - x₂| / y₁` and `v = y₂ / y₁`.
pub fn phi_argument<T: Real>(z1: &HPoint<T>, z2: &HPoint<T>) -> Result<T> {
    check_dims(z1, z2)?;
    let kappa2 = squared_gap(z1.abscissa(), z2.abscissa()) / (z1.ordinate * z1.ordinate);
    let v = z2.ordinate / z1.ordinate;
    Ok((kappa2 + (v + T::one()) * (v + T::one())) / v)
}

/// Hyperbolic distance between two points of the same dimension.
pub fn hyp_distance<T: Real>(z1: &HPoint<T>, z2: &HPoint<T>) -> Result<T> {
    check_dims(z1, z2)?;
    Ok(distance_raw(z1.abscissa(), z1.ordinate, z2.abscissa(), z2.ordinate))
}

/// `cosh(d) - 1` for raw coordinates. Monotone in the distance, so argmin
/// searches compare this instead of the distance itself.
#[inline]
pub fn cosh_gap<T: Real>(x1: &[T], y1: T, x2: &[T], y2: T) -> T {
    let dy = y1 - y2;
    (squared_gap(x1, x2) + dy * dy) / (T::lit(2.0) * y1 * y2)
}

/// `arccosh(1 + u)` without cancellation for small `u`.
#[inline]
pub fn acosh1p<T: Real>(u: T) -> T {
    (u + (u * (u + T::lit(2.0))).sqrt()).ln_1p()
}

/// Distance on raw coordinates; caller guarantees equal dimensions.
#[inline]
pub fn distance_raw<T: Real>(x1: &[T], y1: T, x2: &[T], y2: T) -> T {
    acosh1p(cosh_gap(x1, y1, x2, y2))
}

#[inline]
pub(crate) fn squared_gap<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&p, &q)| {
        let g = p - q;
        acc + g * g
    })
}

fn check_dims<T>(z1: &HPoint<T>, z2: &HPoint<T>) -> Result<()> {
    if z1.abscissa.len() != z2.abscissa.len() {
        return Err(Error::DimensionMismatch { expected: z1.abscissa.len(), got: z2.abscissa.len() });
    }
    Ok(())
}

/// Height `h(z) = ln y`.
pub fn height<T: Real>(z: &HPoint<T>) -> T {
    z.ordinate.ln()
}

/// Horodistance to the point at infinity, normalised so that it vanishes on `y = 1`.
pub fn horodistance_inf<T: Real>(z: &HPoint<T>) -> T {
    -z.ordinate.ln()
}

/// `d(z, probe) - d(origin, probe)`: a finite-probe approximation of the
/// horodistance, converging to `-ln y` when `origin = (0, 1)` and the probe
/// goes to infinity.
pub fn horodistance_defect<T: Real>(z: &HPoint<T>, probe: &HPoint<T>, origin: &HPoint<T>) -> Result<T> {
    Ok(hyp_distance(z, probe)? - hyp_distance(origin, probe)?)
}

/// Horizontal translation `(x, y) ↦ (x + s, y)`.
pub fn translate<T: Real>(z: &HPoint<T>, shift: &[T]) -> Result<HPoint<T>> {
    if shift.len() != z.dim() {
        return Err(Error::DimensionMismatch { expected: z.dim(), got: shift.len() });
    }
    let abscissa = z.abscissa.iter().zip(shift).map(|(&a, &s)| a + s).collect();
    HPoint::new(abscissa, z.ordinate)
}

/// Dilation `(x, y) ↦ (αx, αy)`, `α > 0`.
pub fn dilate<T: Real>(z: &HPoint<T>, alpha: T) -> Result<HPoint<T>> {
    if !(alpha > T::zero()) {
        return Err(domain(format!("dilation factor must be positive, got {alpha}")));
    }
    let abscissa = z.abscissa.iter().map(|&a| a * alpha).collect();
    HPoint::new(abscissa, z.ordinate * alpha)
}

/// Euclidean description of the hyperbolic ball `B(center, ρ)`: Euclidean centre
/// `(x, y cosh ρ)` and radius `y sinh ρ`. Its top is `(x, y e^ρ)` and its bottom
/// `(x, y e^{-ρ})`.
pub fn ball_euclidean_params<T: Real>(center: &HPoint<T>, rho: T) -> Result<(HPoint<T>, T)> {
    if !(rho >= T::zero()) {
        return Err(domain(format!("radius must be non-negative, got {rho}")));
    }
    let y = center.ordinate;
    Ok((HPoint { abscissa: center.abscissa.clone(), ordinate: y * rho.cosh() }, y * rho.sinh()))
}

/// Open upper semi-ball membership: `d(z, q) < ρ` and `q` strictly above `z`.
pub fn in_upper_semiball<T: Real>(z: &HPoint<T>, rho: T, q: &HPoint<T>) -> Result<bool> {
    if !(rho >= T::zero()) {
        return Err(domain(format!("radius must be non-negative, got {rho}")));
    }
    Ok(q.ordinate > z.ordinate && hyp_distance(z, q)? < rho)
}

/// Hyperbolic volume of a ball of radius `ρ`: `S(d+1) ∫₀^ρ sinh(u)^d du`.
///
/// Closed form `2π (cosh ρ - 1)` for `d = 1`, adaptive Simpson (relative
/// tolerance 1e-10) otherwise.
pub fn ball_volume(rho: f64, ctx: &GeometryContext) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(domain(format!("radius must be non-negative, got {rho}")));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    if ctx.dim == 1 {
        // cosh ρ - 1 = 2 sinh²(ρ/2), exact near 0
        let s = (rho / 2.0).sinh();
        return Ok(ctx.polar_surface * 2.0 * s * s);
    }
    let d = ctx.dim as i32;
    let integral = adaptive_simpson(|u| u.sinh().powi(d), 0.0, rho, 1e-10);
    Ok(ctx.polar_surface * integral)
}

/// Leading asymptotic of [`ball_volume`]: `S(d+1) / (d 2^d) e^{dρ}`.
pub fn ball_volume_asymptotic(rho: f64, ctx: &GeometryContext) -> f64 {
    let d = ctx.dim as f64;
    ctx.polar_surface / (d * 2f64.powf(d)) * (d * rho).exp()
}

/// Hyperbolic volume of the box `[-R, R]^d × [y_lo, y_hi]`:
/// `(2R)^d (y_lo^{-d} - y_hi^{-d}) / d`. `y_hi = ∞` is allowed.
pub fn window_measure(half_width: f64, y_lo: f64, y_hi: f64, ctx: &GeometryContext) -> Result<f64> {
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(domain(format!("window half-width must be positive and finite, got {half_width}")));
    }
    if !(y_lo > 0.0) || !(y_hi > y_lo) {
        return Err(domain(format!("window needs 0 < y_lo < y_hi, got y_lo={y_lo}, y_hi={y_hi}")));
    }
    let d = ctx.dim as i32;
    let inv_hi = if y_hi.is_infinite() { 0.0 } else { y_hi.powi(-d) };
    Ok((2.0 * half_width).powi(d) * (y_lo.powi(-d) - inv_hi) / ctx.dim as f64)
}

/// Adaptive Simpson quadrature with a relative tolerance on the whole integral.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    struct Panel {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }
    let simpson = |a: f64, b: f64, fa: f64, fm: f64, fb: f64| (b - a) / 6.0 * (fa + 4.0 * fm + fb);

    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let coarse = simpson(a, b, fa, fm, fb);
    // Seed the absolute tolerance from a refined estimate so a single
    // lucky coarse panel cannot set it.
    let scale = {
        let n = 64;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        (s * h / 3.0).abs().max(coarse.abs())
    };
    let mut stack = vec![Panel { a, b, fa, fm, fb, whole: coarse, tol: rel_tol * scale, depth: 0 }];
    let mut total = 0.0;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let flm = f(0.5 * (p.a + m));
        let frm = f(0.5 * (m + p.b));
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let delta = left + right - p.whole;
        if p.depth >= 48 || delta.abs() <= 15.0 * p.tol {
            total += left + right + delta / 15.0;
        } else {
            let tol = 0.5 * p.tol;
            let depth = p.depth + 1;
            stack.push(Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left, tol, depth });
            stack.push(Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right, tol, depth });
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> HPoint<f64> {
        HPoint::planar(x, y).unwrap()
    }

    // Cosh identity evaluated the plain way, independent of acosh1p.
    fn cosh_oracle(z1: &HPoint<f64>, z2: &HPoint<f64>) -> f64 {
        let dx2: f64 = z1.abscissa().iter().zip(z2.abscissa()).map(|(a, b)| (a - b) * (a - b)).sum();
        let dy = z1.ordinate() - z2.ordinate();
        (1.0 + (dx2 + dy * dy) / (2.0 * z1.ordinate() * z2.ordinate())).acosh()
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi(4.0f64).unwrap(), 0.0);
        assert_relative_eq!(phi(8.0f64).unwrap(), 3.0f64.acosh(), max_relative = 1e-12);
        assert_relative_eq!(phi(8.0f64).unwrap(), 1.762747174039086, max_relative = 1e-12);
        assert!(phi(8.0f64).unwrap() < phi(16.0f64).unwrap());
        assert!(matches!(phi(3.9f64), Err(Error::Domain(_))));
        assert!(phi(f64::NAN).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_relative_eq!(hyp_distance(&p(0.0, 1.0), &p(0.0, 1f64.exp())).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(hyp_distance(&p(0.0, 1.0), &p(2.0, 1.0)).unwrap(), 3f64.acosh(), max_relative = 1e-13);
        let z = p(0.3, 0.7);
        assert_eq!(hyp_distance(&z, &z).unwrap(), 0.0);
        let w = HPoint::new(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(hyp_distance(&z, &w), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn phi_route_matches_cosh_route() {
        let (z1, z2) = (p(0.2, 0.5), p(-1.3, 2.5));
        let via_phi = phi(phi_argument(&z1, &z2).unwrap()).unwrap();
        assert_relative_eq!(via_phi, hyp_distance(&z1, &z2).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn generic_in_f32() {
        let a = HPoint::<f32>::planar(0.0, 1.0).unwrap();
        let b = HPoint::<f32>::planar(0.0, std::f32::consts::E).unwrap();
        assert!((hyp_distance(&a, &b).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn height_and_horodistance() {
        assert_eq!(height(&p(5.0, 1.0)), 0.0);
        assert_relative_eq!(height(&p(5.0, 2f64.exp())), 2.0, max_relative = 1e-15);
        assert_eq!(horodistance_inf(&p(1.0, 1.0)), 0.0);
        assert_relative_eq!(horodistance_inf(&p(1.0, 1f64.exp())), -1.0, max_relative = 1e-15);
        assert!(horodistance_inf(&p(0.0, 3.0)) < horodistance_inf(&p(0.0, 2.0)));
        let (a, b) = (p(1.5, 0.3), p(1.5, 4.0));
        assert_relative_eq!(
            (height(&a) - height(&b)).abs(),
            hyp_distance(&a, &b).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn horodistance_defect_limit() {
        let origin = p(0.0, 1.0);
        assert_eq!(horodistance_defect(&origin, &p(4.0, 9.0), &origin).unwrap(), 0.0);
        let z = p(0.0, 1f64.exp());
        let v = horodistance_defect(&z, &p(0.0, 1e6), &origin).unwrap();
        assert!((v + 1.0).abs() < 1e-4, "{v}");

        let z = p(3.0, 2.0);
        let errs: Vec<f64> = [1e3, 1e4, 1e5]
            .iter()
            .map(|&y| (horodistance_defect(&z, &p(0.0, y), &origin).unwrap() + 2f64.ln()).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn isometries() {
        let t = translate(&p(0.0, 1.0), &[5.0]).unwrap();
        assert_eq!(t, p(5.0, 1.0));
        let e = 1f64.exp();
        assert_eq!(dilate(&p(2.0, 1.0), e).unwrap(), p(2.0 * e, e));
        assert!(dilate(&p(2.0, 1.0), 0.0).is_err());
        assert!(dilate(&p(2.0, 1.0), -1.0).is_err());
        assert!(translate(&p(2.0, 1.0), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ball_params() {
        let (c, r) = ball_euclidean_params(&p(0.0, 1.0), 0.0).unwrap();
        assert_eq!((c, r), (p(0.0, 1.0), 0.0));
        let (c, r) = ball_euclidean_params(&p(0.0, 1.0), 2f64.ln()).unwrap();
        assert_relative_eq!(c.ordinate(), 1.25, max_relative = 1e-14);
        assert_relative_eq!(r, 0.75, max_relative = 1e-14);
        assert_relative_eq!(c.ordinate() + r, 2.0, max_relative = 1e-14);
        assert_relative_eq!(c.ordinate() - r, 0.5, max_relative = 1e-14);
        assert!(ball_euclidean_params(&p(0.0, 1.0), -0.1).is_err());
    }

    #[test]
    fn semiball_membership() {
        let z = p(0.0, 1.0);
        assert!(!in_upper_semiball(&z, 5.0, &p(0.0, 0.9)).unwrap());
        assert!(in_upper_semiball(&z, 1.0, &p(0.0, 2.0)).unwrap());
        assert!(!in_upper_semiball(&z, 1.0, &p(0.0, 3.0)).unwrap());
    }

    #[test]
    fn volumes() {
        let c1 = GeometryContext::new(1).unwrap();
        assert_relative_eq!(c1.sphere_surface(), 2.0, max_relative = 1e-14);
        let c2 = GeometryContext::new(2).unwrap();
        assert_relative_eq!(c2.sphere_surface(), 2.0 * std::f64::consts::PI, max_relative = 1e-12);
        assert_relative_eq!(c2.unit_ball_volume(), std::f64::consts::PI, max_relative = 1e-12);
        let c3 = GeometryContext::new(3).unwrap();
        assert_relative_eq!(c3.sphere_surface(), 4.0 * std::f64::consts::PI, max_relative = 1e-12);

        assert_eq!(ball_volume(0.0, &c1).unwrap(), 0.0);
        assert_relative_eq!(ball_volume(1.0, &c1).unwrap(), 2.0 * std::f64::consts::PI * (1f64.cosh() - 1.0), max_relative = 1e-13);
        assert_relative_eq!(ball_volume(1.0, &c1).unwrap(), 3.4122762652849, max_relative = 1e-12);
        let r = ball_volume(20.0, &c1).unwrap() / ball_volume_asymptotic(20.0, &c1);
        assert!((r - 1.0).abs() < 1e-6);
        assert_relative_eq!(c1.polar_surface(), 2.0 * std::f64::consts::PI, max_relative = 1e-12);
        // three-dimensional hyperbolic ball: π (sinh 2ρ - 2ρ)
        let exact = std::f64::consts::PI * ((2.0f64).sinh() - 2.0);
        assert_relative_eq!(ball_volume(1.0, &c2).unwrap(), exact, max_relative = 1e-9);
    }

    #[test]
    fn window_measures() {
        let c1 = GeometryContext::new(1).unwrap();
        let c2 = GeometryContext::new(2).unwrap();
        assert_relative_eq!(
            window_measure(1.0, 1.0, 1f64.exp(), &c1).unwrap(),
            2.0 * (1.0 - (-1f64).exp()),
            max_relative = 1e-14
        );
        assert_relative_eq!(window_measure(1.0, 1.0, 2.0, &c2).unwrap(), 1.5, max_relative = 1e-14);
        assert_relative_eq!(window_measure(3.0, 0.5, f64::INFINITY, &c2).unwrap(), 36.0 * 4.0 / 2.0);
        assert!(window_measure(1.0, 0.0, 2.0, &c1).is_err());
        assert!(window_measure(1.0, 2.0, 2.0, &c1).is_err());
        assert!(window_measure(-1.0, 1.0, 2.0, &c1).is_err());
    }

    fn arb_point() -> impl Strategy<Value = HPoint<f64>> {
        (-10.0f64..10.0, -3.0f64..3.0).prop_map(|(x, h)| p(x, h.exp()))
    }

    proptest! {
        #[test]
        fn symmetric_and_matches_oracle(a in arb_point(), b in arb_point()) {
            let d = hyp_distance(&a, &b).unwrap();
            prop_assert_eq!(d, hyp_distance(&b, &a).unwrap());
            let o = cosh_oracle(&a, &b);
            prop_assert!((d - o).abs() <= 1e-10 * o.max(1e-3));
        }

        #[test]
        fn triangle_inequality(a in arb_point(), b in arb_point(), c in arb_point()) {
            let ab = hyp_distance(&a, &b).unwrap();
            let bc = hyp_distance(&b, &c).unwrap();
            let ac = hyp_distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-10);
        }

        #[test]
        fn isometry_invariance(a in arb_point(), b in arb_point(), s in -50.0f64..50.0, la in -4.0f64..4.0) {
            let d = hyp_distance(&a, &b).unwrap();
            let alpha = la.exp();
            let dd = hyp_distance(&dilate(&a, alpha).unwrap(), &dilate(&b, alpha).unwrap()).unwrap();
            let dt = hyp_distance(&translate(&a, &[s]).unwrap(), &translate(&b, &[s]).unwrap()).unwrap();
            let tol = 1e-10 * d.max(1.0);
            prop_assert!((d - dd).abs() <= tol);
            // translation of a large |x| costs absolute precision in the gap
            prop_assert!((d - dt).abs() <= 1e-9 * d.max(1.0));
        }

        #[test]
        fn euclidean_ball_membership(c in arb_point(), rho in 0.01f64..3.0, q in arb_point()) {
            let (ec, er) = ball_euclidean_params(&c, rho).unwrap();
            let dx = q.abscissa()[0] - ec.abscissa()[0];
            let dy = q.ordinate() - ec.ordinate();
            let e2 = dx * dx + dy * dy;
            let d = hyp_distance(&c, &q).unwrap();
            // skip razor-thin boundary cases
            prop_assume!((d - rho).abs() > 1e-9);
            prop_assert_eq!(e2 < er * er, d < rho);
        }

        #[test]
        fn aligned_points_monotone(a in arb_point(), c in arb_point(), s in 0.0f64..1.0) {
            let b = p(
                a.abscissa()[0] + s * (c.abscissa()[0] - a.abscissa()[0]),
                a.ordinate() + s * (c.ordinate() - a.ordinate()),
            );
            prop_assert!(hyp_distance(&a, &b).unwrap() <= hyp_distance(&a, &c).unwrap() + 1e-12);
        }

        #[test]
        fn horizontal_bound(x1 in -10.0f64..10.0, x2 in -10.0f64..10.0, h in -3.0f64..3.0) {
            let y = h.exp();
            let d = hyp_distance(&p(x1, y), &p(x2, y)).unwrap();
            prop_assert!(d <= (x1 - x2).abs() / y + 1e-12);
        }
    }
}
