//! Directed spanning forest construction.
//!
//! Every point is joined by a Euclidean segment to its parent: the nearest
//! point (hyperbolic metric) among the points of strictly larger ordinate.
//! Inside a finite window the computed parent is only trusted when the open
//! upper semi-ball `B₊(z, ρ*)` fits in the window; such vertices are
//! *certified*. The topmost point has no candidate at all and is *censored*.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hypgeom::{self, cosh_gap, HPoint};
use crate::ppp::{CloudDoc, PointCloud, SampleWindow};
use crate::scalar::Real;

/// Parent of a vertex, or `Censored` when no point of the window lies above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParentEntry<T> {
    Parent { index: usize, rho: T },
    Censored,
}

impl<T: Copy> ParentEntry<T> {
    pub fn index(&self) -> Option<usize> {
        match *self {
            ParentEntry::Parent { index, .. } => Some(index),
            ParentEntry::Censored => None,
        }
    }

    pub fn rho(&self) -> Option<T> {
        match *self {
            ParentEntry::Parent { rho, .. } => Some(rho),
            ParentEntry::Censored => None,
        }
    }
}

/// A forest edge, drawn as the Euclidean segment from child to parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge<T> {
    pub child: HPoint<T>,
    pub parent: HPoint<T>,
}

impl<T: Real> Edge<T> {
    pub fn new(child: HPoint<T>, parent: HPoint<T>) -> Result<Self> {
        if child.dim() != parent.dim() {
            return Err(Error::DimensionMismatch { expected: child.dim(), got: parent.dim() });
        }
        if !(parent.ordinate() > child.ordinate()) {
            return Err(domain("edge parent must lie strictly above its child"));
        }
        Ok(Self { child, parent })
    }

    /// Abscissa where the segment meets the horizontal hyperplane at `ordinate`,
    /// if it straddles it strictly.
    pub fn crossing_at(&self, ordinate: T) -> Option<Vec<T>> {
        crossing_abscissa(self.child.abscissa(), self.child.ordinate(), self.parent.abscissa(), self.parent.ordinate(), ordinate)
    }
}

pub(crate) fn crossing_abscissa<T: Real>(xc: &[T], yc: T, xp: &[T], yp: T, level: T) -> Option<Vec<T>> {
    if !(yc < level && level < yp) {
        return None;
    }
    let s = (level - yc) / (yp - yc);
    Some(xc.iter().zip(xp).map(|(&a, &b)| a + s * (b - a)).collect())
}

/// The forest over a cloud, with certification flags and a child adjacency.
#[derive(Debug, Clone)]
pub struct Forest<T> {
    cloud: PointCloud<T>,
    parents: Vec<ParentEntry<T>>,
    certified: Vec<bool>,
    ties: Vec<usize>,
    child_offsets: Vec<usize>,
    child_list: Vec<usize>,
}

impl<T: Real> Forest<T> {
    fn assemble(cloud: PointCloud<T>, parents: Vec<ParentEntry<T>>, certified: Vec<bool>, ties: Vec<usize>) -> Self {
        let n = parents.len();
        let mut counts = vec![0usize; n + 1];
        for p in parents.iter().filter_map(|e| e.index()) {
            counts[p + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut child_list = vec![0usize; counts[n]];
        for (c, e) in parents.iter().enumerate() {
            if let Some(p) = e.index() {
                child_list[fill[p]] = c;
                fill[p] += 1;
            }
        }
        Self { cloud, parents, certified, ties, child_offsets: counts, child_list }
    }

    pub fn cloud(&self) -> &PointCloud<T> {
        &self.cloud
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn point(&self, i: usize) -> &HPoint<T> {
        &self.cloud.points()[i]
    }

    pub fn ordinate(&self, i: usize) -> T {
        self.cloud.points()[i].ordinate()
    }

    pub fn parent(&self, i: usize) -> ParentEntry<T> {
        self.parents[i]
    }

    pub fn parents(&self) -> &[ParentEntry<T>] {
        &self.parents
    }

    pub fn is_certified(&self, i: usize) -> bool {
        self.certified[i]
    }

    pub fn certified_count(&self) -> usize {
        self.certified.iter().filter(|&&c| c).count()
    }

    /// Vertices whose parent search hit an exact distance tie.
    pub fn ties(&self) -> &[usize] {
        &self.ties
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.child_list[self.child_offsets[i]..self.child_offsets[i + 1]]
    }

    /// Edge from `i` to its parent.
    pub fn edge(&self, i: usize) -> Option<Edge<T>> {
        let p = self.parents[i].index()?;
        Some(Edge { child: self.point(i).clone(), parent: self.point(p).clone() })
    }

    /// Euclidean bounding box of the closed semi-ball `B₊(i, ρ*)` as
    /// `(abscissa half-width, top ordinate)`. The true parent of `i` in the
    /// unbounded process lies inside it; infinite for censored vertices.
    pub fn reach(&self, i: usize) -> (T, T) {
        match self.parents[i] {
            ParentEntry::Parent { rho, .. } => {
                let y = self.ordinate(i);
                (y * rho.sinh(), y * rho.exp())
            }
            ParentEntry::Censored => (T::infinity(), T::infinity()),
        }
    }

    /// Replace a parent entry without any check. Only meant for building
    /// negative-control fixtures for [`verify_structure`].
    #[doc(hidden)]
    pub fn with_parent_override(self, child: usize, entry: ParentEntry<T>) -> Self {
        let mut parents = self.parents;
        parents[child] = entry;
        Self::assemble(self.cloud, parents, self.certified, self.ties)
    }

    /// Serialise as `{cloud, parents: [{child, parent, rho, certified}]}`.
    pub fn to_json(&self) -> String {
        crate::json::to_string(&self.document(None)).expect("forest documents always serialise")
    }

    /// Same as [`Self::to_json`] with an extra `verification` member.
    pub fn to_json_with<V: Serialize>(&self, verification: &V) -> String {
        let v = serde_json::to_value(verification).expect("verification reports serialise");
        crate::json::to_string(&self.document(Some(v))).expect("forest documents always serialise")
    }

    fn document(&self, verification: Option<serde_json::Value>) -> ForestDoc {
        let parents = self
            .parents
            .iter()
            .enumerate()
            .map(|(child, e)| ParentRow {
                child,
                parent: e.index(),
                rho: e.rho().map(|r| r.to_f64_lossy()),
                certified: self.certified[child],
            })
            .collect();
        ForestDoc { cloud: CloudDoc::from(&self.cloud), parents, verification }
    }

    /// Parse a forest document. Rows are validated against the inline cloud.
    pub fn from_json(text: &str) -> Result<Self, ForestParseError> {
        let doc: ForestDoc = serde_json::from_str(text)?;
        let cloud: PointCloud<T> = doc.cloud.into_cloud().map_err(ForestParseError::Invalid)?;
        let n = cloud.len();
        if doc.parents.len() != n {
            return Err(ForestParseError::Invalid(domain(format!(
                "parents has {} rows for {n} points",
                doc.parents.len()
            ))));
        }
        let mut parents = Vec::with_capacity(n);
        let mut certified = Vec::with_capacity(n);
        for (i, row) in doc.parents.into_iter().enumerate() {
            let bad = |msg: &str| ForestParseError::Invalid(domain(format!("parents[{i}]: {msg}")));
            if row.child != i {
                return Err(bad("child index out of order"));
            }
            let entry = match (row.parent, row.rho) {
                (Some(p), Some(rho)) => {
                    if p >= n {
                        return Err(bad("parent index out of range"));
                    }
                    ParentEntry::Parent { index: p, rho: T::lit(rho) }
                }
                (None, _) => {
                    if row.certified {
                        return Err(bad("censored vertex cannot be certified"));
                    }
                    ParentEntry::Censored
                }
                (Some(_), None) => return Err(bad("rho missing")),
            };
            parents.push(entry);
            certified.push(row.certified);
        }
        Ok(Self::assemble(cloud, parents, certified, Vec::new()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ForestParseError {
    #[error("malformed forest JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid forest: {0}")]
    Invalid(Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct ParentRow {
    child: usize,
    parent: Option<usize>,
    rho: Option<f64>,
    certified: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ForestDoc {
    cloud: CloudDoc,
    parents: Vec<ParentRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    verification: Option<serde_json::Value>,
}

/// Pruned linear scan for the parent of an arbitrary point `z`.
///
/// Candidates are visited in increasing ordinate. A candidate outside the
/// Euclidean ball of the current best radius cannot improve it, and the scan
/// stops once ordinates pass the top of that ball. Returns the index and the
/// hyperbolic distance of the nearest point strictly above `z`.
pub fn find_parent_shell_search<T: Real>(z: &HPoint<T>, cloud: &PointCloud<T>) -> Option<(usize, T)> {
    let pts = cloud.points();
    let y = z.ordinate();
    let start = pts.partition_point(|p| p.ordinate() <= y);
    let two = T::lit(2.0);
    let mut best: Option<(usize, T)> = None;
    // Euclidean ball of the current best: centre height y cosh ρ, radius y sinh ρ.
    let mut ball: Option<(T, T, T)> = None; // (centre ordinate, radius², top)
    for (j, q) in pts.iter().enumerate().skip(start) {
        if let Some((cy, r2, top)) = ball {
            if q.ordinate() >= top {
                break;
            }
            let dy = q.ordinate() - cy;
            if hypgeom::squared_gap(z.abscissa(), q.abscissa()) + dy * dy >= r2 {
                continue;
            }
        }
        let g = cosh_gap(z.abscissa(), y, q.abscissa(), q.ordinate());
        if best.is_none_or(|(_, bg)| g < bg) {
            best = Some((j, g));
            let sinh = (g * (g + two)).sqrt();
            let radius = y * sinh;
            ball = Some((y * (T::one() + g), radius * radius, y * (T::one() + g + sinh)));
        }
    }
    best.map(|(j, g)| (j, hypgeom::acosh1p(g)))
}

/// Band index over a sorted cloud: bands of width `BAND` in `ln y`, each
/// sorted by the first abscissa coordinate.
struct BandIndex<T> {
    log_lo: T,
    band_start: Vec<usize>,
    order: Vec<usize>,
    keys: Vec<T>,
    y_max: T,
    x0_min: T,
    x0_max: T,
}

const BAND: f64 = 0.5;

impl<T: Real> BandIndex<T> {
    fn new(points: &[HPoint<T>]) -> Self {
        let n = points.len();
        let log_lo = points.first().map_or(T::zero(), |p| p.ordinate().ln());
        let width = T::lit(BAND);
        let band_of = |y: T| ((y.ln() - log_lo) / width).floor().to_usize().unwrap_or(0);
        let mut band_start = vec![0usize];
        let mut current = 0usize;
        for (i, p) in points.iter().enumerate() {
            let b = band_of(p.ordinate()).max(current);
            while current < b {
                band_start.push(i);
                current += 1;
            }
        }
        band_start.push(n);
        let mut order: Vec<usize> = (0..n).collect();
        for w in band_start.windows(2) {
            order[w[0]..w[1]].sort_by(|&a, &b| {
                points[a].abscissa()[0].partial_cmp(&points[b].abscissa()[0]).expect("finite").then(a.cmp(&b))
            });
        }
        let keys = order.iter().map(|&i| points[i].abscissa()[0]).collect();
        let (x0_min, x0_max) = points.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
            let x = p.abscissa()[0];
            (lo.min(x), hi.max(x))
        });
        let y_max = points.last().map_or(T::zero(), |p| p.ordinate());
        Self { log_lo, band_start, order, keys, y_max, x0_min, x0_max }
    }

    fn bands(&self) -> usize {
        self.band_start.len() - 1
    }

    fn band_of(&self, y: T) -> usize {
        let b = ((y.ln() - self.log_lo) / T::lit(BAND)).floor();
        if b.is_nan() || b < T::zero() {
            0
        } else {
            b.to_usize().unwrap_or(usize::MAX).min(self.bands().saturating_sub(1))
        }
    }

    /// Exact parent of point `i`, with a tie flag.
    fn parent_of(&self, points: &[HPoint<T>], i: usize) -> (Option<(usize, T)>, bool) {
        let z = &points[i];
        let y = z.ordinate();
        let x0 = z.abscissa()[0];
        let slack = T::one() + T::lit(1e-9);
        let two = T::lit(2.0);
        // start from ρ = 0.75: cosh ρ - 1
        let mut query = T::lit(0.75f64.cosh() - 1.0);
        loop {
            let sinh = (query * (query + two)).sqrt();
            let half = y * sinh * slack;
            let top = y * (T::one() + query + sinh) * slack;
            let (lo, hi) = (x0 - half, x0 + half);
            let mut best: Option<(usize, T)> = None;
            let mut tie = false;
            let last = self.band_of(top.min(self.y_max));
            for b in self.band_of(y)..=last {
                let (s, e) = (self.band_start[b], self.band_start[b + 1]);
                let keys = &self.keys[s..e];
                let from = keys.partition_point(|&k| k < lo);
                let to = keys.partition_point(|&k| k <= hi);
                for &j in &self.order[s + from..s + to] {
                    if j <= i {
                        continue;
                    }
                    let q = &points[j];
                    let g = cosh_gap(z.abscissa(), y, q.abscissa(), q.ordinate());
                    match best {
                        Some((bj, bg)) if g == bg => {
                            tie = true;
                            if j < bj {
                                best = Some((j, g));
                            }
                        }
                        Some((_, bg)) if g > bg => {}
                        _ => {
                            best = Some((j, g));
                            tie = false;
                        }
                    }
                }
            }
            match best {
                Some((_, g)) if g <= query => return (best, tie),
                Some((_, g)) => query = g,
                None => {
                    let covers = top >= self.y_max && lo <= self.x0_min && hi >= self.x0_max;
                    if covers {
                        return (None, false);
                    }
                    // cosh 2ρ - 1 = 2 (1 + g)² - 2
                    query = two * (T::one() + query) * (T::one() + query) - two;
                }
            }
        }
    }
}

/// Semi-ball `B₊(z, ρ)` inside the window: `y e^ρ ≤ y_hi` and
/// `|x_k - c_k| + y sinh ρ ≤ R` on every axis.
pub(crate) fn semiball_inside<T: Real>(z: &HPoint<T>, rho: T, window: &SampleWindow) -> bool {
    let y = z.ordinate().to_f64_lossy();
    let rho = rho.to_f64_lossy();
    if y * rho.exp() > window.y_hi {
        return false;
    }
    let reach = y * rho.sinh();
    z.abscissa()
        .iter()
        .enumerate()
        .all(|(k, x)| (x.to_f64_lossy() - window.center_at(k)).abs() + reach <= window.half_width)
}

/// Build the forest over `cloud`.
pub fn build<T: Real>(cloud: PointCloud<T>) -> Forest<T> {
    let points = cloud.points();
    let n = points.len();
    let index = BandIndex::new(points);
    let mut parents = Vec::with_capacity(n);
    let mut certified = Vec::with_capacity(n);
    let mut ties = Vec::new();
    for i in 0..n {
        let (found, tie) = index.parent_of(points, i);
        if tie {
            log::warn!("distance tie while searching the parent of vertex {i}; smallest index kept");
            ties.push(i);
        }
        match found {
            Some((j, g)) => {
                let rho = hypgeom::acosh1p(g);
                certified.push(semiball_inside(&points[i], rho, cloud.window()));
                parents.push(ParentEntry::Parent { index: j, rho });
            }
            None => {
                certified.push(false);
                parents.push(ParentEntry::Censored);
            }
        }
    }
    Forest::assemble(cloud, parents, certified, ties)
}

/// Structural defect found by [`verify_structure`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureFailure {
    Cycle { vertices: Vec<usize> },
    ParentNotAbove { vertex: usize, parent: usize },
    NonEmptySemiball { vertex: usize, intruder: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub vertices: usize,
    pub certified: usize,
    pub censored: usize,
    pub ties: usize,
    /// Number of vertices having `k` children, keyed by `k`.
    pub child_histogram: BTreeMap<usize, usize>,
    pub failures: Vec<StructureFailure>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Check acyclicity, parent ordering, emptiness of certified semi-balls (by
/// exhaustive scan with the distance function) and report the degree histogram.
pub fn verify_structure<T: Real>(forest: &Forest<T>) -> StructureReport {
    let n = forest.len();
    let mut failures = Vec::new();

    // iterative three-colour walk along parent pointers
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = Some(start);
        while let Some(u) = v {
            match state[u] {
                0 => {
                    state[u] = 1;
                    path.push(u);
                    v = forest.parent(u).index().filter(|&p| p < n);
                }
                1 => {
                    let at = path.iter().position(|&w| w == u).expect("on current path");
                    failures.push(StructureFailure::Cycle { vertices: path[at..].to_vec() });
                    break;
                }
                _ => break,
            }
        }
        for u in path {
            state[u] = 2;
        }
    }

    for i in 0..n {
        if let Some(p) = forest.parent(i).index() {
            if !(forest.ordinate(p) > forest.ordinate(i)) {
                failures.push(StructureFailure::ParentNotAbove { vertex: i, parent: p });
            }
        }
    }

    let points = forest.cloud().points();
    for i in 0..n {
        if !forest.is_certified(i) {
            continue;
        }
        let Some(rho) = forest.parent(i).rho() else { continue };
        let z = &points[i];
        let top = z.ordinate() * rho.exp();
        let half = z.ordinate() * rho.sinh() * T::lit(1.0 + 1e-9);
        for (j, q) in points.iter().enumerate().skip(i + 1) {
            if q.ordinate() >= top {
                break;
            }
            if (q.abscissa()[0] - z.abscissa()[0]).abs() > half {
                continue;
            }
            if hypgeom::hyp_distance(z, q).map(|d| d < rho).unwrap_or(false) {
                failures.push(StructureFailure::NonEmptySemiball { vertex: i, intruder: j });
                break;
            }
        }
    }

    let mut child_histogram = BTreeMap::new();
    for i in 0..n {
        *child_histogram.entry(forest.children(i).len()).or_insert(0) += 1;
    }
    StructureReport {
        vertices: n,
        certified: forest.certified_count(),
        censored: forest.parents().iter().filter(|e| e.index().is_none()).count(),
        ties: forest.ties().len(),
        child_histogram,
        failures,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingReport {
    pub edges_checked: usize,
    /// Pairs of child vertices whose edges properly intersect.
    pub crossings: Vec<(usize, usize)>,
}

impl CrossingReport {
    pub fn passed(&self) -> bool {
        self.crossings.is_empty()
    }
}

/// Pairwise proper-intersection test over the certified edges (`d = 1`).
pub fn verify_noncrossing<T: Real>(forest: &Forest<T>) -> Result<CrossingReport> {
    if forest.dim() != 1 {
        return Err(Error::UnsupportedDimension(forest.dim()));
    }
    let ids: Vec<usize> = (0..forest.len()).filter(|&i| forest.is_certified(i)).collect();
    let edges: Vec<Edge<T>> = ids.iter().map(|&i| forest.edge(i).expect("certified vertices have parents")).collect();
    let crossings = find_crossings(&edges)?.into_iter().map(|(a, b)| (ids[a], ids[b])).collect();
    Ok(CrossingReport { edges_checked: edges.len(), crossings })
}

/// Proper crossings among planar segments, as index pairs into `edges`.
/// Segments sharing an endpoint never count as crossing.
pub fn find_crossings<T: Real>(edges: &[Edge<T>]) -> Result<Vec<(usize, usize)>> {
    let seg: Vec<[f64; 4]> = edges
        .iter()
        .map(|e| {
            if e.child.dim() != 1 {
                return Err(Error::UnsupportedDimension(e.child.dim()));
            }
            Ok([
                e.child.abscissa()[0].to_f64_lossy(),
                e.child.ordinate().to_f64_lossy(),
                e.parent.abscissa()[0].to_f64_lossy(),
                e.parent.ordinate().to_f64_lossy(),
            ])
        })
        .collect::<Result<_>>()?;
    let mut by_left: Vec<usize> = (0..seg.len()).collect();
    let left = |s: &[f64; 4]| s[0].min(s[2]);
    let right = |s: &[f64; 4]| s[0].max(s[2]);
    by_left.sort_by(|&a, &b| left(&seg[a]).partial_cmp(&left(&seg[b])).expect("finite").then(a.cmp(&b)));

    let orient = |ax: f64, ay: f64, bx: f64, by: f64, cx: f64, cy: f64| (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    let mut out = Vec::new();
    for (k, &a) in by_left.iter().enumerate() {
        let sa = seg[a];
        for &b in &by_left[k + 1..] {
            let sb = seg[b];
            if left(&sb) > right(&sa) {
                break;
            }
            let shares = |p: (f64, f64)| p == (sb[0], sb[1]) || p == (sb[2], sb[3]);
            if shares((sa[0], sa[1])) || shares((sa[2], sa[3])) {
                continue;
            }
            let o1 = orient(sa[0], sa[1], sa[2], sa[3], sb[0], sb[1]);
            let o2 = orient(sa[0], sa[1], sa[2], sa[3], sb[2], sb[3]);
            let o3 = orient(sb[0], sb[1], sb[2], sb[3], sa[0], sa[1]);
            let o4 = orient(sb[0], sb[1], sb[2], sb[3], sa[2], sa[3]);
            if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
                out.push((a.min(b), a.max(b)));
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}
