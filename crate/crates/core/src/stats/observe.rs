//! Per-replicate measurements. Each replicate is built once and every
//! statistic a run needs is read off the same forest.

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::forest::{build, Forest};
use crate::traversal::{
    ancestor, cfd, coalescing_height_with, descendants_with, level_complete, level_points, mbd_with, Cube, Exposure,
    LevelPoint, LevelSet, Tau, Traced,
};

/// Sum of a weight over the crossings of one region in one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PalmSample {
    pub sum: f64,
    /// Crossings whose weight entered `sum`.
    pub count: usize,
    /// Crossings whose weight was censored.
    pub censored: usize,
    /// False when the level set itself may be missing crossings in the region;
    /// the replicate is then left out entirely.
    pub complete: bool,
}

impl PalmSample {
    pub fn mean(&self) -> Option<f64> {
        (self.complete && self.count > 0).then(|| self.sum / self.count as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SurvivorSample {
    pub surviving: usize,
    pub total: usize,
    pub complete: bool,
}

/// What a weight function may look at.
pub struct PalmContext<'a> {
    pub forest: &'a Forest<f64>,
    pub exposure: &'a Exposure<f64>,
    pub level: &'a LevelSet<f64>,
}

/// Weight of a crossing, or censored.
pub type Weight<'w> = dyn Fn(&PalmContext<'_>, &LevelPoint<f64>) -> Result<Traced<f64>> + Sync + 'w;

/// Evaluate `weight` on every level-`t` crossing in `cube`.
pub fn palm_sample(
    forest: &Forest<f64>,
    exposure: &Exposure<f64>,
    t: f64,
    cube: &Cube<f64>,
    weight: &Weight<'_>,
) -> Result<PalmSample> {
    let level = level_points(forest, t)?;
    let inside: Vec<&LevelPoint<f64>> = level.in_cube(cube).collect();
    if !level_complete(forest, exposure, t, cube) {
        return Ok(PalmSample { sum: 0.0, count: 0, censored: inside.len(), complete: false });
    }
    let ctx = PalmContext { forest, exposure, level: &level };
    let mut out = PalmSample { complete: true, ..PalmSample::default() };
    for x in inside {
        match weight(&ctx, x)? {
            Traced::Value(w) => {
                out.sum += w;
                out.count += 1;
            }
            Traced::Censored => out.censored += 1,
        }
    }
    Ok(out)
}

pub fn unit_weight(_: &PalmContext<'_>, _: &LevelPoint<f64>) -> Result<Traced<f64>> {
    Ok(Traced::Value(1.0))
}

/// Number of descendants `depth` levels below.
pub fn descendant_count(depth: f64) -> impl Fn(&PalmContext<'_>, &LevelPoint<f64>) -> Result<Traced<f64>> + Sync {
    move |ctx, x| {
        let t = ctx.level.level;
        let set = descendants_with(ctx.forest, ctx.exposure, x, t, t - depth)?;
        Ok(if set.complete { Traced::Value(set.points.len() as f64) } else { Traced::Censored })
    }
}

/// Length of the Voronoi cell of a crossing within its own level set (`d = 1`).
pub fn voronoi_cell(ctx: &PalmContext<'_>, x: &LevelPoint<f64>) -> Result<Traced<f64>> {
    if ctx.forest.dim() != 1 {
        return Err(Error::UnsupportedDimension(ctx.forest.dim()));
    }
    let here = x.abscissa[0];
    let mut prev = f64::NEG_INFINITY;
    let mut next = f64::INFINITY;
    for c in &ctx.level.crossings {
        let v = c.abscissa[0];
        if v < here {
            prev = prev.max(v);
        } else if v > here {
            next = next.min(v);
        }
    }
    if !prev.is_finite() || !next.is_finite() {
        return Ok(Traced::Censored);
    }
    // An unseen crossing between the neighbours would split the cell.
    let span = Cube { center: vec![(prev + next) / 2.0], half: (next - prev) / 2.0 };
    if !level_complete(ctx.forest, ctx.exposure, ctx.level.level, &span) {
        return Ok(Traced::Censored);
    }
    Ok(Traced::Value((next - prev) / 2.0))
}

/// `(e^{-span} CFD)^p` from the crossing's level up `span` levels.
///
/// Dividing by `e^{level + span}` instead maps the law back to a start at level 0.
pub fn forward_moment(span: f64, order: f64) -> impl Fn(&PalmContext<'_>, &LevelPoint<f64>) -> Result<Traced<f64>> + Sync {
    move |ctx, x| {
        let t = ctx.level.level;
        Ok(match cfd(ctx.forest, x, t, t + span)? {
            Traced::Value(v) => Traced::Value(((-(t + span)).exp() * v).powf(order)),
            Traced::Censored => Traced::Censored,
        })
    }
}

/// `(e^{-t} MBD_{t-depth}^{t})^p`, which has the law of `MBD_{-depth}^0` to the power `p`.
pub fn backward_moment(depth: f64, order: f64) -> impl Fn(&PalmContext<'_>, &LevelPoint<f64>) -> Result<Traced<f64>> + Sync {
    move |ctx, x| {
        let t = ctx.level.level;
        Ok(match mbd_with(ctx.forest, ctx.exposure, x, t, t - depth)? {
            Traced::Value(v) => Traced::Value(((-t).exp() * v).powf(order)),
            Traced::Censored => Traced::Censored,
        })
    }
}

/// A unit of mass moved between two abscissas.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub mass: f64,
}

/// Mass flows of one replicate, or `None` when some flow near the region is unknown.
/// Transfers of one replicate; `None` when the replicate is censored.
pub type Transfers = Result<Option<Vec<Transfer>>>;

pub type Transport<'t> = dyn Fn(&Forest<f64>, &Exposure<f64>, &Cube<f64>) -> Transfers + Sync + 't;

/// Each crossing at `lower` within `cube` sends unit mass to its ancestor at `upper`.
pub fn ancestor_transport(
    lower: f64,
    upper: f64,
) -> impl Fn(&Forest<f64>, &Exposure<f64>, &Cube<f64>) -> Transfers + Sync {
    move |forest, exposure, cube| {
        if !level_complete(forest, exposure, lower, cube) {
            return Ok(None);
        }
        let mut out = Vec::new();
        for x in level_points(forest, lower)?.in_cube(cube) {
            match ancestor(forest, x, lower, upper)? {
                Traced::Value(a) => out.push(Transfer { source: x.abscissa.clone(), target: a.abscissa, mass: 1.0 }),
                Traced::Censored => return Ok(None),
            }
        }
        Ok(Some(out))
    }
}

/// Each level-`t` crossing with descendants at level 0 sends unit mass to its
/// leftmost descendant, a separating point (`d = 1`).
pub fn separating_transport(t: f64) -> impl Fn(&Forest<f64>, &Exposure<f64>, &Cube<f64>) -> Transfers + Sync {
    move |forest, exposure, cube| {
        if forest.dim() != 1 {
            return Err(Error::UnsupportedDimension(forest.dim()));
        }
        if !level_complete(forest, exposure, t, cube) || !level_complete(forest, exposure, 0.0, cube) {
            return Ok(None);
        }
        let mut out = Vec::new();
        for x in level_points(forest, t)?.in_cube(cube) {
            let set = descendants_with(forest, exposure, x, t, 0.0)?;
            if !set.complete {
                return Ok(None);
            }
            if let Some(m) = set.points.iter().map(|d| d.abscissa[0]).reduce(f64::min) {
                out.push(Transfer { source: x.abscissa.clone(), target: vec![m], mass: 1.0 });
            }
        }
        Ok(Some(out))
    }
}

/// Every crossing at `t` keeps its own mass.
pub fn identity_transport(t: f64) -> impl Fn(&Forest<f64>, &Exposure<f64>, &Cube<f64>) -> Transfers + Sync {
    move |forest, exposure, cube| {
        if !level_complete(forest, exposure, t, cube) {
            return Ok(None);
        }
        Ok(Some(
            level_points(forest, t)?
                .in_cube(cube)
                .map(|x| Transfer { source: x.abscissa.clone(), target: x.abscissa.clone(), mass: 1.0 })
                .collect(),
        ))
    }
}

/// Mass leaving and entering `region`, collected from sources in `collect`.
pub fn transport_balance(
    forest: &Forest<f64>,
    exposure: &Exposure<f64>,
    transport: &Transport<'_>,
    region: &Cube<f64>,
    collect: &Cube<f64>,
) -> Result<Option<(f64, f64)>> {
    Ok(transport(forest, exposure, collect)?.map(|flows| {
        let outflow = flows.iter().filter(|f| region.contains(&f.source)).map(|f| f.mass).sum();
        let inflow = flows.iter().filter(|f| region.contains(&f.target)).map(|f| f.mass).sum();
        (outflow, inflow)
    }))
}

/// Which groups of statistics a run needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Needs {
    pub identities: bool,
    pub coalescence: bool,
    pub fluctuations: bool,
}

/// Everything measured on one replicate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Observation {
    pub replicate: usize,
    pub seed: u64,
    pub points: usize,
    pub certified: usize,
    /// Crossings in the intensity region at level 0, then at each configured
    /// level; `None` when the level set is incomplete there.
    pub level_counts: Vec<Option<usize>>,
    /// Exact dilation identity per configured level (checked replicates only).
    pub dilation: Vec<bool>,
    /// Descendant-count sample unchanged by translating the cloud (checked replicates only).
    pub translation: Option<bool>,
    pub descendants: Vec<PalmSample>,
    pub cells: Option<PalmSample>,
    pub transport: Option<(f64, f64)>,
    pub coalescence: Option<Tau<f64>>,
    /// Per separation level: (level-t crossings with descendants in A, separating points in A).
    pub separation: Vec<Option<(f64, f64)>>,
    pub forward: Vec<PalmSample>,
    pub backward: Vec<PalmSample>,
    pub survivors: Vec<SurvivorSample>,
}

fn region_count(forest: &Forest<f64>, exposure: &Exposure<f64>, t: f64, cube: &Cube<f64>) -> Result<Option<usize>> {
    if !level_complete(forest, exposure, t, cube) {
        return Ok(None);
    }
    Ok(Some(level_points(forest, t)?.in_cube(cube).count()))
}

fn survivor_sample(forest: &Forest<f64>, exposure: &Exposure<f64>, t: f64, h: f64, cube: &Cube<f64>) -> Result<SurvivorSample> {
    let level = level_points(forest, t)?;
    let mut out = SurvivorSample { complete: level_complete(forest, exposure, t, cube), ..SurvivorSample::default() };
    for x in level.in_cube(cube) {
        out.total += 1;
        let set = descendants_with(forest, exposure, x, t, t - h)?;
        out.complete &= set.complete;
        if !set.points.is_empty() {
            out.surviving += 1;
        }
    }
    Ok(out)
}

fn cube(forest: &Forest<f64>, half: f64) -> Cube<f64> {
    Cube::centered(forest, half)
}

/// Measure replicate `r` of `config`.
pub fn observe(config: &ExperimentConfig, needs: Needs, r: usize, forest: &Forest<f64>) -> Result<Observation> {
    let exposure = Exposure::of(forest);
    let ex = &exposure;
    let one_d = forest.dim() == 1;
    let mut obs = Observation {
        replicate: r,
        seed: forest.cloud().seed(),
        points: forest.len(),
        certified: forest.certified_count(),
        ..Observation::default()
    };

    let ip = &config.intensity;
    let a_int = cube(forest, ip.half_width);
    obs.level_counts.push(region_count(forest, ex, 0.0, &a_int)?);

    if needs.identities {
        for &t in &ip.levels {
            obs.level_counts.push(region_count(forest, ex, t, &a_int)?);
        }
        if r < ip.dilation_checks {
            for (k, &t) in ip.levels.iter().enumerate() {
                // The law of the level-t set is that of e^t times the level-0 set.
                let shrunk = build(forest.cloud().dilate((-t).exp())?);
                let shrunk_ex = Exposure::of(&shrunk);
                let direct = obs.level_counts[k + 1];
                let via = region_count(&shrunk, &shrunk_ex, 0.0, &cube(&shrunk, ip.half_width * (-t).exp()))?;
                obs.dilation.push(direct == via);
            }
        }

        let dp = &config.descendants;
        let a_desc = cube(forest, dp.half_width);
        for &h in &dp.depths {
            obs.descendants.push(palm_sample(forest, ex, dp.level, &a_desc, &descendant_count(h))?);
        }
        if r < ip.dilation_checks {
            if let Some(&h) = dp.depths.first() {
                let shift = vec![0.375 * config.window.half_width; forest.dim()];
                let moved = build(forest.cloud().translate(&shift)?);
                let moved_ex = Exposure::of(&moved);
                let again = palm_sample(&moved, &moved_ex, dp.level, &cube(&moved, dp.half_width), &descendant_count(h))?;
                obs.translation = Some(again == obs.descendants[0]);
            }
        }
        if one_d {
            obs.cells = Some(palm_sample(forest, ex, 0.0, &cube(forest, config.cells.half_width), &voronoi_cell)?);
        }
        let tp = &config.transport;
        obs.transport = transport_balance(
            forest,
            ex,
            &ancestor_transport(tp.lower, tp.upper),
            &cube(forest, tp.half_width),
            &cube(forest, (tp.half_width + tp.margin).min(config.window.half_width)),
        )?;
    }

    if needs.coalescence {
        let cp = &config.coalescence;
        obs.coalescence = Some(coalescing_height_with(forest, ex, cp.half_width, cp.t_max)?.tau);
        if one_d {
            let sp = &config.separation;
            let region = cube(forest, sp.half_width);
            let collect = cube(forest, (sp.half_width + sp.margin).min(config.window.half_width));
            for &t in &sp.levels {
                obs.separation.push(transport_balance(forest, ex, &separating_transport(t), &region, &collect)?);
            }
        }
    }

    if needs.fluctuations {
        let fp = &config.fluctuations;
        let a_fl = cube(forest, fp.half_width);
        for &t in &fp.forward_levels {
            obs.forward.push(palm_sample(forest, ex, 0.0, &a_fl, &forward_moment(t, fp.order))?);
        }
        for &h in &fp.backward_depths {
            obs.backward.push(palm_sample(forest, ex, fp.top_level, &a_fl, &backward_moment(h, fp.order))?);
            obs.survivors.push(survivor_sample(forest, ex, fp.top_level, h, &a_fl)?);
        }
    }
    Ok(obs)
}
