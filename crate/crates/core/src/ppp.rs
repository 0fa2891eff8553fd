//! Homogeneous Poisson point processes in a finite window of the half-space.
//!
//! The intensity is taken with respect to the hyperbolic volume
//! `dμ = dx dy / y^{d+1}`, so the abscissa is uniform on the box and the
//! ordinate has density proportional to `y^{-(d+1)}` on `[y_lo, y_hi]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hypgeom::{self, GeometryContext, HPoint};
use crate::scalar::Real;

/// Refuse to sample when the expected number of points exceeds this.
pub const DEFAULT_POINT_CAP: f64 = 1e7;

/// The box `c + [-R, R]^d × [y_lo, y_hi]`. The offset `c` is zero for sampled
/// windows and only moves under [`PointCloud::translate`] / [`PointCloud::dilate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWindow {
    #[serde(rename = "R")]
    pub half_width: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub center: Vec<f64>,
}

impl SampleWindow {
    pub fn new(half_width: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        let w = Self { half_width, y_lo, y_hi, center: Vec::new() };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(domain(format!("window half-width R must be positive, got {}", self.half_width)));
        }
        if !(self.y_lo > 0.0) || !(self.y_hi > self.y_lo) || !self.y_hi.is_finite() {
            return Err(domain(format!(
                "window needs 0 < y_lo < y_hi < inf, got y_lo={}, y_hi={}",
                self.y_lo, self.y_hi
            )));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(domain("window center must be finite"));
        }
        Ok(())
    }

    /// Centre coordinate along axis `k`.
    pub fn center_at(&self, k: usize) -> f64 {
        self.center.get(k).copied().unwrap_or(0.0)
    }

    /// Hyperbolic volume of the window.
    pub fn measure(&self, ctx: &GeometryContext) -> Result<f64> {
        hypgeom::window_measure(self.half_width, self.y_lo, self.y_hi, ctx)
    }

    /// Closed abscissa bounds, strict ordinate bounds.
    pub fn contains<T: Real>(&self, z: &HPoint<T>) -> bool {
        let y = z.ordinate().to_f64_lossy();
        y > self.y_lo
            && y < self.y_hi
            && z.abscissa().iter().enumerate().all(|(k, x)| (x.to_f64_lossy() - self.center_at(k)).abs() <= self.half_width)
    }
}

/// A Poisson realisation inside a window, sorted by strictly increasing ordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    dim: usize,
    points: Vec<HPoint<T>>,
    lambda: f64,
    window: SampleWindow,
    seed: u64,
}

impl<T: Real> PointCloud<T> {
    /// Assemble a cloud from explicit points; they are sorted here and every
    /// invariant is checked.
    pub fn from_points(
        dim: usize,
        mut points: Vec<HPoint<T>>,
        lambda: f64,
        window: SampleWindow,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(domain(format!("intensity must be positive, got {lambda}")));
        }
        window.validate()?;
        if !window.center.is_empty() && window.center.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: window.center.len() });
        }
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
            }
            if !window.contains(p) {
                return Err(domain(format!("points[{i}] lies outside the window")));
            }
        }
        points.sort_by(|a, b| a.ordinate().partial_cmp(&b.ordinate()).expect("finite ordinates"));
        if let Some(i) = points.windows(2).position(|w| w[0].ordinate() == w[1].ordinate()) {
            return Err(domain(format!("points {i} and {} share an ordinate", i + 1)));
        }
        Ok(Self { dim, points, lambda, window, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[HPoint<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn window(&self) -> &SampleWindow {
        &self.window
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Image of the cloud (and its window) under `(x, y) ↦ (αx, αy)`.
    pub fn dilate(&self, alpha: T) -> Result<Self> {
        let points = self.points.iter().map(|p| hypgeom::dilate(p, alpha)).collect::<Result<Vec<_>>>()?;
        let a = alpha.to_f64_lossy();
        let window = SampleWindow {
            half_width: self.window.half_width * a,
            y_lo: self.window.y_lo * a,
            y_hi: self.window.y_hi * a,
            center: self.window.center.iter().map(|c| c * a).collect(),
        };
        Ok(Self { dim: self.dim, points, lambda: self.lambda, window, seed: self.seed })
    }

    /// Image of the cloud (and its window) under `(x, y) ↦ (x + s, y)`.
    pub fn translate(&self, shift: &[T]) -> Result<Self> {
        let points = self.points.iter().map(|p| hypgeom::translate(p, shift)).collect::<Result<Vec<_>>>()?;
        let center = (0..self.dim).map(|k| self.window.center_at(k) + shift[k].to_f64_lossy()).collect();
        let window = SampleWindow { center, ..self.window.clone() };
        Ok(Self { dim: self.dim, points, lambda: self.lambda, window, seed: self.seed })
    }

    /// Serialise to the cloud JSON document.
    pub fn to_json(&self) -> String {
        crate::json::to_string(&CloudDoc::from(self)).expect("cloud documents always serialise")
    }

    /// Parse and validate a cloud JSON document.
    pub fn from_json(text: &str) -> Result<Self, CloudParseError> {
        let doc: CloudDoc = serde_json::from_str(text)?;
        doc.into_cloud().map_err(CloudParseError::Invalid)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CloudParseError {
    #[error("malformed cloud JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid cloud: {0}")]
    Invalid(Error),
}

/// Wire form: `{dim, lambda, seed, window: {R, y_lo, y_hi}, points: [[x.., y], ..]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct CloudDoc {
    pub dim: usize,
    pub lambda: f64,
    pub seed: u64,
    pub window: SampleWindow,
    pub points: Vec<Vec<f64>>,
}

impl<T: Real> From<&PointCloud<T>> for CloudDoc {
    fn from(c: &PointCloud<T>) -> Self {
        let points = c
            .points
            .iter()
            .map(|p| {
                let mut row: Vec<f64> = p.abscissa().iter().map(|x| x.to_f64_lossy()).collect();
                row.push(p.ordinate().to_f64_lossy());
                row
            })
            .collect();
        Self { dim: c.dim, lambda: c.lambda, seed: c.seed, window: c.window.clone(), points }
    }
}

impl CloudDoc {
    pub(crate) fn into_cloud<T: Real>(self) -> Result<PointCloud<T>> {
        let mut points = Vec::with_capacity(self.points.len());
        for (i, row) in self.points.into_iter().enumerate() {
            if row.len() != self.dim + 1 {
                return Err(domain(format!("points[{i}] has {} coordinates, expected {}", row.len(), self.dim + 1)));
            }
            let y = T::lit(row[self.dim]);
            let x = row[..self.dim].iter().map(|&v| T::lit(v)).collect();
            points.push(HPoint::new(x, y).map_err(|e| domain(format!("points[{i}]: {e}")))?);
        }
        let sorted = points.windows(2).all(|w| w[0].ordinate() < w[1].ordinate());
        if !sorted {
            return Err(domain("points must be sorted by strictly increasing ordinate"));
        }
        PointCloud::from_points(self.dim, points, self.lambda, self.window, self.seed)
    }
}

/// Inverse CDF of the ordinate marginal on `[y_lo, y_hi]`:
/// `(y_lo^{-d} - u (y_lo^{-d} - y_hi^{-d}))^{-1/d}`, written relative to `y_lo`.
pub fn sample_ordinate(u: f64, y_lo: f64, y_hi: f64, dim: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(domain(format!("u must lie in [0, 1], got {u}")));
    }
    if !(y_lo > 0.0) || !(y_hi > y_lo) {
        return Err(domain(format!("need 0 < y_lo < y_hi, got y_lo={y_lo}, y_hi={y_hi}")));
    }
    if u == 0.0 {
        return Ok(y_lo);
    }
    if u == 1.0 {
        return Ok(y_hi);
    }
    let span = 1.0 - (y_lo / y_hi).powi(dim as i32);
    Ok(y_lo * (-(-u * span).ln_1p() / dim as f64).exp())
}

/// Sample a homogeneous Poisson process of intensity `lambda` in `window`.
pub fn sample<T: Real>(dim: usize, window: &SampleWindow, lambda: f64, seed: u64) -> Result<PointCloud<T>> {
    sample_with_cap(dim, window, lambda, seed, DEFAULT_POINT_CAP)
}

pub fn sample_with_cap<T: Real>(
    dim: usize,
    window: &SampleWindow,
    lambda: f64,
    seed: u64,
    cap: f64,
) -> Result<PointCloud<T>> {
    let ctx = GeometryContext::new(dim)?;
    window.validate()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(domain(format!("intensity must be positive, got {lambda}")));
    }
    let expected = lambda * window.measure(&ctx)?;
    if expected > cap {
        return Err(Error::TooManyPoints { expected, cap });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = if expected > 0.0 { Poisson::new(expected).map_err(|e| domain(e.to_string()))?.sample(&mut rng) as usize } else { 0 };

    let draw_ordinate = |rng: &mut ChaCha8Rng| -> T {
        loop {
            let u: f64 = Open01.sample(rng);
            let y = T::lit(sample_ordinate(u, window.y_lo, window.y_hi, dim).expect("validated window"));
            let yf = y.to_f64_lossy();
            if yf > window.y_lo && yf < window.y_hi {
                return y;
            }
        }
    };

    let r = window.half_width;
    let mut points: Vec<HPoint<T>> = Vec::with_capacity(count);
    for _ in 0..count {
        let x: Vec<T> = (0..dim).map(|k| T::lit(window.center_at(k) + rng.random_range(-r..=r))).collect();
        let y = draw_ordinate(&mut rng);
        points.push(HPoint::new(x, y)?);
    }
    let by_ordinate = |a: &HPoint<T>, b: &HPoint<T>| a.ordinate().partial_cmp(&b.ordinate()).expect("finite");
    points.sort_by(by_ordinate);
    // Ties have probability zero in f64; redraw the later ordinate until none remain.
    while let Some(i) = points.windows(2).position(|w| w[0].ordinate() == w[1].ordinate()) {
        let (x, _) = points[i + 1].clone().into_parts();
        points[i + 1] = HPoint::new(x, draw_ordinate(&mut rng))?;
        points.sort_by(by_ordinate);
    }
    Ok(PointCloud { dim, points, lambda, window: window.clone(), seed })
}
