//! Aggregation of replicate observations into estimates, and the pass/fail
//! checks of each verification suite.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::geometry::geometry_checks;
use super::observe::{
    observe, palm_sample, Needs, Observation, PalmSample, SurvivorSample, Transport, Weight,
    backward_moment, forward_moment, transport_balance,
};
use super::{binomial_upper, replicate_seed, run_replicates, Estimate, BAND};
use crate::error::{Error, Result};
use crate::forest::{build, verify_noncrossing, verify_structure, Forest};
use crate::hypgeom::{distance_raw, GeometryContext};
use crate::ppp::{sample, SampleWindow};
use crate::traversal::{Cube, Exposure, Tau};

/// A group of checks runnable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Geometry,
    Structure,
    Identities,
    Fluctuations,
    Coalescence,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["geometry", "structure", "identities", "fluctuations", "coalescence", "all"];

    fn parts(self) -> &'static [Suite] {
        match self {
            Suite::All => &[Suite::Geometry, Suite::Structure, Suite::Identities, Suite::Fluctuations, Suite::Coalescence],
            Suite::Geometry => &[Suite::Geometry],
            Suite::Structure => &[Suite::Structure],
            Suite::Identities => &[Suite::Identities],
            Suite::Fluctuations => &[Suite::Fluctuations],
            Suite::Coalescence => &[Suite::Coalescence],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "geometry" => Suite::Geometry,
            "structure" => Suite::Structure,
            "identities" => Suite::Identities,
            "fluctuations" => Suite::Fluctuations,
            "coalescence" => Suite::Coalescence,
            "all" => Suite::All,
            other => return Err(Error::Config(format!("unknown suite {other:?}, expected one of {}", Suite::NAMES.join(", ")))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [Suite::Geometry, Suite::Structure, Suite::Identities, Suite::Fluctuations, Suite::Coalescence, Suite::All]
            .iter()
            .position(|s| s == self)
            .expect("listed");
        f.write_str(Suite::NAMES[i])
    }
}

/// Knobs that only exist to prove the harness can fail.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CheckOptions {
    /// Added to the dimension in the exponents `e^{d t}` of the identities suite.
    pub exponent_shift: f64,
}

/// One line of the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub check: String,
    pub params: BTreeMap<String, f64>,
    pub estimate: f64,
    pub std_error: f64,
    /// Threshold the check compares against; its meaning is per check.
    pub bound: f64,
    pub pass: bool,
}

fn summary(check: &str, params: &[(&str, f64)], estimate: f64, std_error: f64, bound: f64, pass: bool) -> CheckSummary {
    CheckSummary {
        check: check.to_string(),
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        estimate,
        std_error,
        bound,
        pass,
    }
}

/// `|estimate - target| ≤ 3 se`, reported with `bound = 3 se`.
fn band_check(check: &str, params: &[(&str, f64)], est: &Estimate, target: f64, extra_se: f64) -> CheckSummary {
    let se = est.std_error.hypot(extra_se);
    let mut p = params.to_vec();
    p.push(("target", target));
    p.push(("censored_fraction", est.censored_fraction));
    summary(check, &p, est.mean, se, BAND * se, (est.mean - target).abs() <= BAND * se)
}

/// One CSV row: a statistic of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatRow {
    pub seed: u64,
    pub replicate: usize,
    pub statistic: &'static str,
    pub level: Option<f64>,
    pub lower_level: Option<f64>,
    pub half_width: Option<f64>,
    pub value: Option<f64>,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SuiteReport {
    pub summaries: Vec<CheckSummary>,
    #[serde(skip)]
    pub rows: Vec<StatRow>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.summaries.iter().all(|s| s.pass)
    }

    pub fn get(&self, check: &str) -> impl Iterator<Item = &CheckSummary> {
        let check = check.to_string();
        self.summaries.iter().filter(move |s| s.check == check)
    }
}

/// Intensity `α₀` of the level-0 crossings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaZero {
    pub estimate: Estimate,
}

/// `α̂_t e^{d t} / α̂₀` at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRatio {
    pub level: f64,
    pub ratio: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportBalance {
    pub outflow: Estimate,
    pub inflow: Estimate,
    /// Paired replicate differences `outflow - inflow`.
    pub difference: Estimate,
}

/// Empirical `P[τ > t]` with censored replicates counted as exceedances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub level: f64,
    pub exceedances: usize,
    pub trials: usize,
    pub probability: f64,
    /// One-sided 99% Clopper–Pearson upper bound.
    pub upper: f64,
    /// `2 a α̂₀ e^{-t} (1 + 3 relative error of α̂₀)`.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Level `t` (forward) or depth `h` (backward).
    pub grid: f64,
    pub estimate: Estimate,
    /// False when more than half of the crossings were censored.
    pub valid: bool,
}

fn region_volume(a: f64, dim: usize) -> f64 {
    (2.0 * a).powi(dim as i32)
}

/// `α̂₀ = mean #(L₀ ∩ [-a, a]^d) / (2a)^d` over replicates with complete level sets.
pub fn alpha0_from(observations: &[Observation], config: &ExperimentConfig) -> Result<AlphaZero> {
    let vol = region_volume(config.intensity.half_width, config.dim);
    let counts: Vec<f64> = observations.iter().filter_map(|o| o.level_counts[0]).map(|c| c as f64 / vol).collect();
    let censored = observations.len() - counts.len();
    if counts.is_empty() {
        return Err(Error::Estimation("every replicate has an incomplete level-0 set".into()));
    }
    Ok(AlphaZero { estimate: Estimate::from_samples(&counts, censored)? })
}

pub fn estimate_alpha0(config: &ExperimentConfig) -> Result<AlphaZero> {
    let obs = run_replicates(config, |r, f| observe(config, Needs::default(), r, f))?;
    alpha0_from(&obs, config)
}

/// Ratios `α̂_t e^{(d + shift) t} / α̂₀` from paired replicates.
pub fn intensity_from(observations: &[Observation], config: &ExperimentConfig, shift: f64) -> Result<Vec<LevelRatio>> {
    let d = config.dim as f64 + shift;
    config
        .intensity
        .levels
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let pairs: Vec<(f64, f64)> = observations
                .iter()
                .filter_map(|o| match (o.level_counts[k + 1], o.level_counts[0]) {
                    (Some(ct), Some(c0)) => Some((ct as f64 * (d * t).exp(), c0 as f64)),
                    _ => None,
                })
                .collect();
            let censored = observations.len() - pairs.len();
            Ok(LevelRatio { level: t, ratio: Estimate::ratio_of_sums(&pairs, censored)? })
        })
        .collect()
}

pub fn check_intensity_scaling(config: &ExperimentConfig, levels: &[f64]) -> Result<Vec<LevelRatio>> {
    let mut config = config.clone();
    config.intensity.levels = levels.to_vec();
    config.intensity.dilation_checks = 0;
    config.validate()?;
    let needs = Needs { identities: true, ..Needs::default() };
    let obs = run_replicates(&config, |r, f| observe(&config, needs, r, f))?;
    intensity_from(&obs, &config, 0.0)
}

/// Ratio-of-sums Palm estimate over replicates whose level set was complete.
pub fn palm_from<'a>(samples: impl IntoIterator<Item = &'a PalmSample>) -> Result<Estimate> {
    let mut pairs = Vec::new();
    let (mut skipped, mut used, mut censored) = (0usize, 0usize, 0usize);
    for s in samples {
        censored += s.censored;
        if s.complete {
            used += s.count;
            pairs.push((s.sum, s.count as f64));
        } else {
            skipped += 1;
        }
    }
    let mut est = Estimate::ratio_of_sums(&pairs, skipped)?;
    est.censored_fraction = if used + censored > 0 { censored as f64 / (used + censored) as f64 } else { 0.0 };
    Ok(est)
}

/// Palm mean of `weight` over level-`t` crossings in the intensity region.
pub fn palm_mean(config: &ExperimentConfig, t: f64, weight: &Weight<'_>) -> Result<Estimate> {
    let samples = run_replicates(config, |_, f| {
        let ex = Exposure::of(f);
        palm_sample(f, &ex, t, &Cube::centered(f, config.intensity.half_width), weight)
    })?;
    palm_from(&samples)
}

pub fn transport_from(flows: &[Option<(f64, f64)>]) -> Result<TransportBalance> {
    let done: Vec<(f64, f64)> = flows.iter().flatten().copied().collect();
    let censored = flows.len() - done.len();
    if done.is_empty() {
        return Err(Error::Estimation("every replicate censored the transport".into()));
    }
    let outs: Vec<f64> = done.iter().map(|p| p.0).collect();
    let ins: Vec<f64> = done.iter().map(|p| p.1).collect();
    let diffs: Vec<f64> = done.iter().map(|p| p.0 - p.1).collect();
    Ok(TransportBalance {
        outflow: Estimate::from_samples(&outs, censored)?,
        inflow: Estimate::from_samples(&ins, censored)?,
        difference: Estimate::from_samples(&diffs, censored)?,
    })
}

/// Outflow and inflow of `transport` through `[-a, a]^d`, sources collected
/// over `[-(a + margin), a + margin]^d`.
pub fn check_mass_transport(
    config: &ExperimentConfig,
    transport: &Transport<'_>,
    half_width: f64,
    margin: f64,
) -> Result<TransportBalance> {
    let flows = run_replicates(config, |_, f| {
        let ex = Exposure::of(f);
        let collect = Cube::centered(f, (half_width + margin).min(config.window.half_width));
        transport_balance(f, &ex, transport, &Cube::centered(f, half_width), &collect)
    })?;
    let censored = flows.iter().filter(|f| f.is_none()).count();
    if 2 * censored > flows.len() {
        return Err(Error::Estimation(format!("{censored} of {} replicates censored the transport", flows.len())));
    }
    transport_from(&flows)
}

pub fn tail_from(taus: &[Tau<f64>], a: f64, levels: &[f64], alpha0: &Estimate) -> Result<Vec<TailPoint>> {
    let n = taus.len();
    levels
        .iter()
        .map(|&t| {
            let k = taus
                .iter()
                .filter(|tau| match tau {
                    Tau::Finite(v) => *v > t,
                    Tau::CensoredAbove(_) => true,
                })
                .count();
            Ok(TailPoint {
                level: t,
                exceedances: k,
                trials: n,
                probability: k as f64 / n as f64,
                upper: binomial_upper(k, n, 0.99)?,
                bound: 2.0 * a * alpha0.mean * (-t).exp() * (1.0 + BAND * alpha0.relative_error()),
            })
        })
        .collect()
}

/// Empirical tail of the coalescing height of `[-a, a]` (`d = 1`).
pub fn coalescence_tail(config: &ExperimentConfig, a: f64, levels: &[f64]) -> Result<Vec<TailPoint>> {
    if config.dim != 1 {
        return Err(Error::UnsupportedDimension(config.dim));
    }
    let mut config = config.clone();
    config.coalescence.half_width = a;
    config.coalescence.levels = levels.to_vec();
    config.validate()?;
    let needs = Needs { coalescence: true, ..Needs::default() };
    let obs = run_replicates(&config, |r, f| {
        let mut o = observe(&config, needs, r, f)?;
        o.separation.clear();
        Ok(o)
    })?;
    let alpha = alpha0_from(&obs, &config)?;
    let taus: Vec<Tau<f64>> = obs.iter().map(|o| o.coalescence.expect("observed")).collect();
    tail_from(&taus, a, levels, &alpha.estimate)
}

fn curve_from(grid: &[f64], samples: &[Vec<PalmSample>]) -> Result<Vec<CurvePoint>> {
    grid.iter()
        .enumerate()
        .map(|(k, &g)| {
            let est = palm_from(samples.iter().map(|s| &s[k]))?;
            Ok(CurvePoint { grid: g, estimate: est, valid: est.censored_fraction <= 0.5 })
        })
        .collect()
}

/// Palm moments of `e^{-t} CFD_0^t` over a grid of levels (forward) or of
/// `MBD_{-h}^0` over a grid of depths (backward).
pub fn moment_curves(config: &ExperimentConfig, order: f64, direction: Direction, grid: &[f64]) -> Result<Vec<CurvePoint>> {
    let fp = &config.fluctuations;
    let samples = run_replicates(config, |_, f| {
        let ex = Exposure::of(f);
        let cube = Cube::centered(f, fp.half_width);
        grid.iter()
            .map(|&g| match direction {
                Direction::Forward => palm_sample(f, &ex, 0.0, &cube, &forward_moment(g, order)),
                Direction::Backward => palm_sample(f, &ex, fp.top_level, &cube, &backward_moment(g, order)),
            })
            .collect::<Result<Vec<_>>>()
    })?;
    curve_from(grid, &samples)
}

/// Pooled surviving fraction `Σ surviving / Σ total`.
pub fn survivors_from<'a>(samples: impl IntoIterator<Item = &'a SurvivorSample>) -> Result<Estimate> {
    let mut pairs = Vec::new();
    let mut skipped = 0;
    for s in samples {
        if s.complete {
            pairs.push((s.surviving as f64, s.total as f64));
        } else {
            skipped += 1;
        }
    }
    Estimate::ratio_of_sums(&pairs, skipped)
}

fn brute_force_parents(forest: &Forest<f64>) -> Vec<Option<usize>> {
    let pts = forest.cloud().points();
    (0..pts.len())
        .map(|i| {
            let (xi, yi) = (pts[i].abscissa(), pts[i].ordinate());
            let mut best: Option<(usize, f64)> = None;
            for (j, q) in pts.iter().enumerate().skip(i + 1) {
                let dist = distance_raw(xi, yi, q.abscissa(), q.ordinate());
                if best.is_none_or(|(_, b)| dist < b) {
                    best = Some((j, dist));
                }
            }
            best.map(|b| b.0)
        })
        .collect()
}

/// Small clouds for the brute-force comparison: mixed dimensions, shapes and
/// sizes up to `max_points`.
fn oracle_cloud(k: usize, seed: u64, max_points: usize) -> Result<Forest<f64>> {
    let dim = 1 + k % 3;
    let window = match dim {
        1 => SampleWindow::new(10.0, (-3f64).exp(), 3f64.exp())?,
        2 => SampleWindow::new(3.0, (-1.5f64).exp(), 1.5f64.exp())?,
        _ => SampleWindow::new(1.5, (-1f64).exp(), 1f64.exp())?,
    };
    let fill = [0.1, 0.3, 0.6, 0.85][k % 4];
    let lambda = fill * max_points as f64 / window.measure(&GeometryContext::new(dim)?)?;
    let mut salt = 0;
    loop {
        let cloud = sample::<f64>(dim, &window, lambda, replicate_seed(seed, k * 64 + salt))?;
        if cloud.len() <= max_points {
            return Ok(build(cloud));
        }
        salt += 1;
    }
}

fn structure_checks(config: &ExperimentConfig) -> Result<Vec<CheckSummary>> {
    use rayon::prelude::*;
    let sp = &config.structure;
    let per_cloud: Vec<(usize, usize, usize)> = (0..sp.oracle_clouds)
        .into_par_iter()
        .map(|k| {
            let forest = oracle_cloud(k, config.seed, sp.oracle_max_points)?;
            let oracle = brute_force_parents(&forest);
            let mismatches = oracle.iter().zip(forest.parents()).filter(|(o, p)| **o != p.index()).count();
            let report = verify_structure(&forest);
            Ok((forest.len(), mismatches, report.failures.len()))
        })
        .collect::<Result<_>>()?;
    let points: usize = per_cloud.iter().map(|c| c.0).sum();
    let mismatches: usize = per_cloud.iter().map(|c| c.1).sum();
    let failures: usize = per_cloud.iter().map(|c| c.2).sum();
    let clouds = sp.oracle_clouds as f64;
    let mut out = vec![
        summary("forest_oracle", &[("clouds", clouds), ("points", points as f64)], mismatches as f64, 0.0, 0.0, mismatches == 0),
        summary("structure_verified", &[("clouds", clouds)], failures as f64, 0.0, 0.0, failures == 0),
    ];
    if config.dim == 1 {
        let mut c = config.clone();
        c.replicates = sp.noncrossing_replicates.min(config.replicates);
        let crossings: Vec<usize> = run_replicates(&c, |_, f| Ok(verify_noncrossing(f)?.crossings.len()))?;
        let total: usize = crossings.iter().sum();
        out.push(summary("noncrossing", &[("replicates", c.replicates as f64)], total as f64, 0.0, 0.0, total == 0));
    }
    Ok(out)
}

fn needs_of(parts: &[Suite]) -> Needs {
    Needs {
        identities: parts.contains(&Suite::Identities),
        coalescence: parts.contains(&Suite::Coalescence),
        fluctuations: parts.contains(&Suite::Fluctuations),
    }
}

/// Run `suite`, building every replicate once for all statistical parts.
pub fn run_suite(config: &ExperimentConfig, suite: Suite, options: CheckOptions) -> Result<SuiteReport> {
    config.validate()?;
    let parts = suite.parts();
    let mut report = SuiteReport::default();
    if parts.contains(&Suite::Geometry) {
        report.summaries.extend(geometry_checks(config.seed)?);
    }
    if parts.contains(&Suite::Structure) {
        report.summaries.extend(structure_checks(config)?);
    }
    let needs = needs_of(parts);
    if needs == Needs::default() {
        return Ok(report);
    }
    if needs.coalescence && config.dim != 1 {
        return Err(Error::UnsupportedDimension(config.dim));
    }
    let obs = run_replicates(config, |r, f| observe(config, needs, r, f))?;
    report.rows = rows_of(config, needs, &obs);
    let alpha = alpha0_from(&obs, config)?;
    if needs.identities {
        report.summaries.extend(identity_checks(config, &obs, &alpha, options)?);
    }
    if needs.fluctuations {
        report.summaries.extend(fluctuation_checks(config, &obs)?);
    }
    if needs.coalescence {
        report.summaries.extend(coalescence_checks(config, &obs, &alpha)?);
    }
    Ok(report)
}

fn identity_checks(
    config: &ExperimentConfig,
    obs: &[Observation],
    alpha: &AlphaZero,
    options: CheckOptions,
) -> Result<Vec<CheckSummary>> {
    let mut out = Vec::new();
    let a0 = alpha.estimate;
    let ip = &config.intensity;
    out.push(summary(
        "alpha0_positive",
        &[("half_width", ip.half_width), ("censored_fraction", a0.censored_fraction)],
        a0.mean,
        a0.std_error,
        0.0,
        a0.mean > 0.0,
    ));
    for lr in intensity_from(obs, config, options.exponent_shift)? {
        out.push(band_check("intensity_ratio", &[("level", lr.level), ("half_width", ip.half_width)], &lr.ratio, 1.0, 0.0));
    }
    let checked: Vec<&Vec<bool>> = obs.iter().map(|o| &o.dilation).filter(|d| !d.is_empty()).collect();
    if !checked.is_empty() {
        let bad = checked.iter().flat_map(|d| d.iter()).filter(|ok| !**ok).count();
        out.push(summary("dilation_identity", &[("replicates", checked.len() as f64)], bad as f64, 0.0, 0.0, bad == 0));
    }
    let moved: Vec<bool> = obs.iter().filter_map(|o| o.translation).collect();
    if !moved.is_empty() {
        let bad = moved.iter().filter(|ok| !**ok).count();
        out.push(summary("translation_identity", &[("replicates", moved.len() as f64)], bad as f64, 0.0, 0.0, bad == 0));
    }

    let unit: Vec<PalmSample> = obs
        .iter()
        .map(|o| match o.level_counts[0] {
            Some(c) => PalmSample { sum: c as f64, count: c, censored: 0, complete: true },
            None => PalmSample::default(),
        })
        .collect();
    let u = palm_from(&unit)?;
    out.push(summary("palm_unit_weight", &[("level", 0.0)], u.mean, u.std_error, 0.0, u.mean == 1.0));

    let dp = &config.descendants;
    let d = config.dim as f64 + options.exponent_shift;
    for (k, &h) in dp.depths.iter().enumerate() {
        let est = palm_from(obs.iter().map(|o| &o.descendants[k]))?;
        out.push(band_check(
            "descendant_count",
            &[("level", dp.level), ("depth", h), ("half_width", dp.half_width)],
            &est,
            (d * h).exp(),
            0.0,
        ));
    }
    if config.dim == 1 {
        let cells = palm_from(obs.iter().filter_map(|o| o.cells.as_ref()))?;
        let target = a0.reciprocal();
        out.push(band_check(
            "voronoi_cell",
            &[("level", 0.0), ("half_width", config.cells.half_width)],
            &cells,
            target.mean,
            target.std_error,
        ));
    }
    let tp = &config.transport;
    let flows: Vec<Option<(f64, f64)>> = obs.iter().map(|o| o.transport).collect();
    let bal = transport_from(&flows)?;
    let mut c = band_check(
        "mass_transport_ancestor",
        &[
            ("lower", tp.lower),
            ("upper", tp.upper),
            ("half_width", tp.half_width),
            ("outflow", bal.outflow.mean),
            ("inflow", bal.inflow.mean),
        ],
        &bal.difference,
        0.0,
        0.0,
    );
    c.params.insert("censored_fraction".into(), bal.difference.censored_fraction);
    out.push(c);
    Ok(out)
}

fn fluctuation_checks(config: &ExperimentConfig, obs: &[Observation]) -> Result<Vec<CheckSummary>> {
    let fp = &config.fluctuations;
    let p = fp.order;
    let mut out = Vec::new();
    let forward = curve_from(&fp.forward_levels, &obs.iter().map(|o| o.forward.clone()).collect::<Vec<_>>())?;
    let backward = curve_from(&fp.backward_depths, &obs.iter().map(|o| o.backward.clone()).collect::<Vec<_>>())?;
    for c in &forward {
        let e = c.estimate;
        out.push(summary("forward_moment", &[("level", c.grid), ("order", p), ("censored_fraction", e.censored_fraction)], e.mean, e.std_error, 0.5, c.valid));
    }
    for c in &backward {
        let e = c.estimate;
        out.push(summary("backward_moment", &[("depth", c.grid), ("order", p), ("censored_fraction", e.censored_fraction)], e.mean, e.std_error, 0.5, c.valid));
    }
    if let [.., prev, last] = forward.as_slice() {
        let ratio = last.estimate.mean / prev.estimate.mean;
        out.push(summary(
            "forward_bounded",
            &[("level", last.grid), ("previous_level", prev.grid)],
            ratio,
            0.0,
            2.0,
            ratio <= 2.0,
        ));
    }
    if backward.len() >= 3 {
        let steps: Vec<f64> = backward.windows(2).map(|w| (w[1].estimate.mean - w[0].estimate.mean).abs()).collect();
        let shrinking = steps.windows(2).all(|w| w[1] < w[0]);
        let (first, last) = (steps[0], *steps.last().expect("non-empty"));
        out.push(summary("backward_tightness", &[("depth", backward[backward.len() - 1].grid)], last, 0.0, first, shrinking));
    }

    let fractions: Vec<Estimate> = (0..fp.backward_depths.len())
        .map(|k| survivors_from(obs.iter().map(|o| &o.survivors[k])))
        .collect::<Result<_>>()?;
    for (e, &h) in fractions.iter().zip(&fp.backward_depths) {
        out.push(summary(
            "survivor_fraction",
            &[("level", fp.top_level), ("depth", h), ("censored_fraction", e.censored_fraction)],
            e.mean,
            e.std_error,
            0.0,
            e.mean > 0.0,
        ));
    }
    if fractions.len() >= 3 {
        let drops: Vec<f64> = fractions.windows(2).map(|w| w[0].mean - w[1].mean).collect();
        let shrinking = drops.windows(2).all(|w| w[1] <= w[0]);
        out.push(summary(
            "survivor_plateau",
            &[("first_decrement", drops[0])],
            *drops.last().expect("non-empty"),
            0.0,
            drops[0],
            shrinking,
        ));
    }
    Ok(out)
}

fn coalescence_checks(config: &ExperimentConfig, obs: &[Observation], alpha: &AlphaZero) -> Result<Vec<CheckSummary>> {
    let cp = &config.coalescence;
    let a0 = alpha.estimate;
    let mut out = Vec::new();
    let taus: Vec<Tau<f64>> = obs.iter().map(|o| o.coalescence.expect("observed")).collect();
    let tail = tail_from(&taus, cp.half_width, &cp.levels, &a0)?;
    for p in &tail {
        let se = (p.probability * (1.0 - p.probability) / p.trials as f64).sqrt();
        out.push(summary(
            "coalescence_tail",
            &[("level", p.level), ("half_width", cp.half_width), ("upper99", p.upper), ("alpha0", a0.mean)],
            p.probability,
            se,
            p.bound,
            p.upper <= p.bound,
        ));
    }
    let monotone = tail.windows(2).all(|w| w[1].probability <= w[0].probability);
    out.push(summary("coalescence_tail_monotone", &[], tail.len() as f64, 0.0, 0.0, monotone));

    let sp = &config.separation;
    for (k, &t) in sp.levels.iter().enumerate() {
        let flows: Vec<Option<(f64, f64)>> = obs.iter().map(|o| o.separation[k]).collect();
        let bal = transport_from(&flows)?;
        let s = bal.inflow;
        // Both sides are estimated: widen by the combined relative error.
        let rel = a0.relative_error().hypot(s.relative_error());
        let bound = 2.0 * sp.half_width * a0.mean * (-t).exp() * (1.0 + BAND * rel);
        out.push(summary(
            "separating_points",
            &[("level", t), ("half_width", sp.half_width), ("alpha0", a0.mean), ("censored_fraction", s.censored_fraction)],
            s.mean,
            s.std_error,
            bound,
            s.mean <= bound,
        ));
        out.push(band_check(
            "mass_transport_separating",
            &[("level", t), ("half_width", sp.half_width), ("outflow", bal.outflow.mean), ("inflow", bal.inflow.mean)],
            &bal.difference,
            0.0,
            0.0,
        ));
    }
    Ok(out)
}

fn rows_of(config: &ExperimentConfig, needs: Needs, obs: &[Observation]) -> Vec<StatRow> {
    let mut rows = Vec::new();
    for o in obs {
        let mut push = |statistic, level, lower_level, half_width, value: Option<f64>, censored| {
            rows.push(StatRow { seed: o.seed, replicate: o.replicate, statistic, level, lower_level, half_width, value, censored })
        };
        let palm = |s: &PalmSample| (s.mean(), !s.complete);
        let ip = &config.intensity;
        let levels: Vec<f64> = std::iter::once(0.0).chain(ip.levels.iter().copied()).collect();
        for (c, &t) in o.level_counts.iter().zip(&levels) {
            push("level_count", Some(t), None, Some(ip.half_width), c.map(|c| c as f64), c.is_none());
        }
        for (ok, &t) in o.dilation.iter().zip(&ip.levels) {
            push("dilation_identity", Some(t), None, Some(ip.half_width), Some(f64::from(u8::from(*ok))), false);
        }
        if let Some(ok) = o.translation {
            push("translation_identity", Some(config.descendants.level), None, None, Some(f64::from(u8::from(ok))), false);
        }
        let dp = &config.descendants;
        for (s, &h) in o.descendants.iter().zip(&dp.depths) {
            let (v, c) = palm(s);
            push("descendant_count", Some(dp.level), Some(dp.level - h), Some(dp.half_width), v, c);
        }
        if let Some(s) = &o.cells {
            let (v, c) = palm(s);
            push("voronoi_cell", Some(0.0), None, Some(config.cells.half_width), v, c);
        }
        if needs.identities {
            let tp = &config.transport;
            push("transport_outflow", Some(tp.upper), Some(tp.lower), Some(tp.half_width), o.transport.map(|t| t.0), o.transport.is_none());
            push("transport_inflow", Some(tp.upper), Some(tp.lower), Some(tp.half_width), o.transport.map(|t| t.1), o.transport.is_none());
        }
        if let Some(tau) = o.coalescence {
            let (v, c) = match tau {
                Tau::Finite(v) => (Some(v), false),
                Tau::CensoredAbove(_) => (None, true),
            };
            push("coalescing_height", None, Some(0.0), Some(config.coalescence.half_width), v, c);
        }
        for (s, &t) in o.separation.iter().zip(&config.separation.levels) {
            push("separating_points", Some(t), Some(0.0), Some(config.separation.half_width), s.map(|s| s.1), s.is_none());
        }
        let fp = &config.fluctuations;
        for (s, &t) in o.forward.iter().zip(&fp.forward_levels) {
            let (v, c) = palm(s);
            push("forward_moment", Some(t), Some(0.0), Some(fp.half_width), v, c);
        }
        for (s, &h) in o.backward.iter().zip(&fp.backward_depths) {
            let (v, c) = palm(s);
            push("backward_moment", Some(fp.top_level), Some(fp.top_level - h), Some(fp.half_width), v, c);
        }
        for (s, &h) in o.survivors.iter().zip(&fp.backward_depths) {
            let v = (s.total > 0).then(|| s.surviving as f64 / s.total as f64);
            push("survivor_fraction", Some(fp.top_level), Some(fp.top_level - h), Some(fp.half_width), v, !s.complete);
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::observe::unit_weight;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::desk();
        c.replicates = 12;
        c.window.half_width = 30.0;
        c.intensity.dilation_checks = 2;
        c.structure = crate::stats::StructureParams { oracle_clouds: 6, oracle_max_points: 500, noncrossing_replicates: 3 };
        c
    }

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().to_string(), name);
        }
        assert!(matches!("bogus".parse::<Suite>(), Err(Error::Config(_))));
    }

    #[test]
    fn palm_unit_weight_is_exactly_one() {
        let e = palm_mean(&tiny(), 0.5, &unit_weight).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn degenerate_transport_balances_exactly() {
        let cfg = tiny();
        let t = crate::stats::observe::identity_transport(0.0);
        let b = check_mass_transport(&cfg, &t, 5.0, 5.0).unwrap();
        assert_eq!(b.outflow.mean, b.inflow.mean);
        assert_eq!(b.difference.mean, 0.0);
    }

    #[test]
    fn intensity_ratio_at_level_zero_is_exactly_one() {
        let r = check_intensity_scaling(&tiny(), &[0.0, 0.5]).unwrap();
        assert_eq!(r[0].ratio.mean, 1.0);
        assert!(r[1].ratio.mean > 0.0);
    }

    #[test]
    fn tail_is_monotone_and_counts_censoring() {
        let alpha = Estimate { mean: 1.0, std_error: 0.0, n: 1, censored_fraction: 0.0 };
        let taus = [Tau::Finite(0.0), Tau::Finite(1.5), Tau::Finite(2.5), Tau::CensoredAbove(4.9)];
        let tail = tail_from(&taus, 1.0, &[0.0, 1.0, 2.0, 3.0], &alpha).unwrap();
        let k: Vec<usize> = tail.iter().map(|p| p.exceedances).collect();
        assert_eq!(k, vec![3, 3, 2, 1]);
        assert!((tail[1].bound - 2.0 * (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn forward_curve_is_zero_at_level_zero() {
        let c = moment_curves(&tiny(), 1.0, Direction::Forward, &[0.0, 1.0]).unwrap();
        assert_eq!(c[0].estimate.mean, 0.0);
        assert!(c[1].estimate.mean > 0.0);
        let b = moment_curves(&tiny(), 1.0, Direction::Backward, &[0.0]).unwrap();
        assert_eq!(b[0].estimate.mean, 0.0);
    }

    #[test]
    fn small_suites_run_and_are_reproducible() {
        let cfg = tiny();
        let a = run_suite(&cfg, Suite::All, CheckOptions::default()).unwrap();
        let b = run_suite(&cfg, Suite::All, CheckOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.get("forest_oracle").all(|s| s.pass));
        assert!(a.get("noncrossing").all(|s| s.pass));
        assert!(a.get("dilation_identity").all(|s| s.pass));
        assert!(a.get("translation_identity").all(|s| s.pass));
        assert!(a.get("palm_unit_weight").all(|s| s.pass));
        assert!(!a.rows.is_empty());
    }

    #[test]
    fn coalescence_needs_the_line() {
        let mut cfg = ExperimentConfig::desk_plane();
        cfg.replicates = 2;
        assert!(matches!(run_suite(&cfg, Suite::Coalescence, CheckOptions::default()), Err(Error::UnsupportedDimension(2))));
        assert!(matches!(coalescence_tail(&cfg, 1.0, &[1.0]), Err(Error::UnsupportedDimension(2))));
    }

    #[test]
    fn brute_force_agrees_with_build_on_small_clouds() {
        for k in 0..6 {
            let f = oracle_cloud(k, 99, 400).unwrap();
            let idx: Vec<Option<usize>> = f.parents().iter().map(|p| p.index()).collect();
            assert_eq!(brute_force_parents(&f), idx);
        }
    }
}
