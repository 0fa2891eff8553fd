use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ppp::SampleWindow;

/// Simulation box `[-R, R]^d × [e^{ln_y_lo}, e^{ln_y_hi}]`, given in heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    #[serde(rename = "R")]
    pub half_width: f64,
    pub ln_y_lo: f64,
    pub ln_y_hi: f64,
}

impl WindowConfig {
    pub fn to_sample_window(&self) -> Result<SampleWindow> {
        SampleWindow::new(self.half_width, self.ln_y_lo.exp(), self.ln_y_hi.exp())
    }
}

/// Level-set intensity checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntensityParams {
    /// Region half-width `a`.
    pub half_width: f64,
    pub levels: Vec<f64>,
    /// Replicates on which the exact dilation identity is checked.
    pub dilation_checks: usize,
}

impl Default for IntensityParams {
    fn default() -> Self {
        Self { half_width: 20.0, levels: vec![0.5, 1.0, 1.5], dilation_checks: 25 }
    }
}

/// Palm mean of descendant counts over each depth below `level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescendantParams {
    pub level: f64,
    pub depths: Vec<f64>,
    pub half_width: f64,
}

impl Default for DescendantParams {
    fn default() -> Self {
        Self { level: 1.0, depths: vec![1.0, 2.0], half_width: 20.0 }
    }
}

/// Voronoi cells of level-0 crossings (`d = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellParams {
    pub half_width: f64,
}

impl Default for CellParams {
    fn default() -> Self {
        Self { half_width: 20.0 }
    }
}

/// Unit mass from each crossing at `lower` to its ancestor at `upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportParams {
    pub lower: f64,
    pub upper: f64,
    pub half_width: f64,
    /// Sources are collected over `[-(a + margin), a + margin]^d`.
    pub margin: f64,
}

impl Default for TransportParams {
    fn default() -> Self {
        Self { lower: 0.0, upper: 1.0, half_width: 5.0, margin: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoalescenceParams {
    pub half_width: f64,
    pub levels: Vec<f64>,
    pub t_max: f64,
}

impl Default for CoalescenceParams {
    fn default() -> Self {
        Self { half_width: 1.0, levels: vec![1.0, 2.0, 3.0, 4.0], t_max: 4.9 }
    }
}

/// Separating points in `[-a, a]` (`d = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparationParams {
    pub levels: Vec<f64>,
    pub half_width: f64,
    pub margin: f64,
}

impl Default for SeparationParams {
    fn default() -> Self {
        Self { levels: vec![1.0, 2.0], half_width: 5.0, margin: 10.0 }
    }
}

/// Moment curves and survivor fractions.
///
/// Backward statistics are computed below `top_level` and mapped to level 0
/// by the scaling law, which keeps the deepest level away from the bottom of
/// the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluctuationParams {
    /// Moment order `p`.
    pub order: f64,
    pub forward_levels: Vec<f64>,
    pub backward_depths: Vec<f64>,
    pub top_level: f64,
    pub half_width: f64,
}

impl Default for FluctuationParams {
    fn default() -> Self {
        Self {
            order: 1.0,
            forward_levels: vec![1.0, 2.0, 3.0],
            backward_depths: vec![1.0, 2.0, 3.0, 4.0],
            top_level: 1.5,
            half_width: 20.0,
        }
    }
}

/// Forest oracle checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureParams {
    /// Small clouds compared against the quadratic brute force.
    pub oracle_clouds: usize,
    pub oracle_max_points: usize,
    /// Configured replicates checked for crossing edges (`d = 1`).
    pub noncrossing_replicates: usize,
}

impl Default for StructureParams {
    fn default() -> Self {
        Self { oracle_clouds: 200, oracle_max_points: 2000, noncrossing_replicates: 100 }
    }
}

/// Everything a verification run depends on besides the code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub lambda: f64,
    pub replicates: usize,
    pub seed: u64,
    pub window: WindowConfig,
    #[serde(default)]
    pub intensity: IntensityParams,
    #[serde(default)]
    pub descendants: DescendantParams,
    #[serde(default)]
    pub cells: CellParams,
    #[serde(default)]
    pub transport: TransportParams,
    #[serde(default)]
    pub coalescence: CoalescenceParams,
    #[serde(default)]
    pub separation: SeparationParams,
    #[serde(default)]
    pub fluctuations: FluctuationParams,
    #[serde(default)]
    pub structure: StructureParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// `d = 1`, `λ = 1`, `R = 60`, `y ∈ [e^-5, e^5]`, 400 replicates.
    pub fn desk() -> Self {
        Self {
            dim: 1,
            lambda: 1.0,
            replicates: 400,
            seed: 20_240_611,
            window: WindowConfig { half_width: 60.0, ln_y_lo: -5.0, ln_y_hi: 5.0 },
            intensity: IntensityParams::default(),
            descendants: DescendantParams::default(),
            cells: CellParams::default(),
            transport: TransportParams::default(),
            coalescence: CoalescenceParams::default(),
            separation: SeparationParams::default(),
            fluctuations: FluctuationParams::default(),
            structure: StructureParams::default(),
        }
    }

    /// `d = 2` intensity spot check: `R = 10`, `y ∈ [e^-2, e^2.5]`.
    pub fn desk_plane() -> Self {
        Self {
            dim: 2,
            replicates: 200,
            window: WindowConfig { half_width: 10.0, ln_y_lo: -2.0, ln_y_hi: 2.5 },
            intensity: IntensityParams { half_width: 3.0, levels: vec![0.5], dilation_checks: 10 },
            descendants: DescendantParams { level: 1.0, depths: vec![1.0], half_width: 3.0 },
            cells: CellParams { half_width: 3.0 },
            separation: SeparationParams { levels: vec![0.5], half_width: 2.0, margin: 4.0 },
            transport: TransportParams { lower: 0.0, upper: 1.0, half_width: 2.0, margin: 4.0 },
            fluctuations: FluctuationParams {
                forward_levels: vec![0.5, 1.0],
                backward_depths: vec![0.5, 1.0],
                top_level: 1.0,
                half_width: 3.0,
                ..FluctuationParams::default()
            },
            coalescence: CoalescenceParams { half_width: 1.0, levels: vec![0.5, 1.0, 1.5], t_max: 2.4 },
            ..Self::desk()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialise")
    }

    /// Check that every level and region fits the window.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        let w = &self.window;
        if !(w.ln_y_lo < w.ln_y_hi) || !w.ln_y_lo.is_finite() || !w.ln_y_hi.is_finite() {
            return bad(format!("window needs ln_y_lo < ln_y_hi, got {} and {}", w.ln_y_lo, w.ln_y_hi));
        }
        self.window.to_sample_window().map_err(|e| Error::Config(e.to_string()))?;

        let level = |name: &str, t: f64| -> Result<()> {
            if !(t > w.ln_y_lo && t < w.ln_y_hi) {
                return bad(format!("{name} level {t} lies outside the window heights ({}, {})", w.ln_y_lo, w.ln_y_hi));
            }
            Ok(())
        };
        let region = |name: &str, a: f64| -> Result<()> {
            if !(a > 0.0) || a > w.half_width {
                return bad(format!("{name} half-width {a} must lie in (0, R = {}]", w.half_width));
            }
            Ok(())
        };
        let depth = |name: &str, h: f64| -> Result<()> {
            if !(h >= 0.0) || !h.is_finite() {
                return bad(format!("{name} depth {h} must be non-negative"));
            }
            Ok(())
        };

        level("intensity", 0.0)?;
        region("intensity", self.intensity.half_width)?;
        for &t in &self.intensity.levels {
            level("intensity", t)?;
        }
        let d = &self.descendants;
        region("descendants", d.half_width)?;
        for &h in &d.depths {
            depth("descendants", h)?;
            level("descendants", d.level - h)?;
        }
        level("descendants", d.level)?;
        region("cells", self.cells.half_width)?;
        let t = &self.transport;
        level("transport", t.lower)?;
        level("transport", t.upper)?;
        if t.upper < t.lower {
            return bad("transport upper level is below the lower level".into());
        }
        region("transport", t.half_width)?;
        let c = &self.coalescence;
        region("coalescence", c.half_width)?;
        level("coalescence", c.t_max)?;
        for &t in &c.levels {
            if !(0.0..=c.t_max).contains(&t) {
                return bad(format!("coalescence level {t} must lie in [0, t_max = {}]", c.t_max));
            }
        }
        let s = &self.separation;
        region("separation", s.half_width)?;
        for &t in &s.levels {
            level("separation", t)?;
        }
        let f = &self.fluctuations;
        region("fluctuation", f.half_width)?;
        if !(f.order > 0.0) {
            return bad(format!("moment order must be positive, got {}", f.order));
        }
        for &t in &f.forward_levels {
            depth("forward", t)?;
            level("forward", t)?;
        }
        level("backward top", f.top_level)?;
        for &h in &f.backward_depths {
            depth("backward", h)?;
            level("backward", f.top_level - h)?;
        }
        let lowest = f
            .backward_depths
            .iter()
            .map(|h| f.top_level - h)
            .chain(d.depths.iter().map(|h| d.level - h))
            .chain([0.0, t.lower])
            .fold(f64::INFINITY, f64::min);
        if lowest - w.ln_y_lo < 2.0 {
            log::warn!(
                "lowest level {lowest} is within 2 of the window bottom {}; crossings from unsampled points may bias it",
                w.ln_y_lo
            );
        }
        Ok(())
    }
}
