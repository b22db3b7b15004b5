use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CURVE_RESOLUTION: usize = 8;

/// Closed parameter interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.max - self.min)
    }

    pub(crate) fn check(&self, field: impl Into<String>, v: f64) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::range(field, v, self.min, self.max))
        }
    }
}

pub const SHARPNESS_RANGE: Range = Range::new(-2.0, 2.0);
pub const EXPOSURE_RANGE: Range = Range::new(-3.0, 3.0);
pub const CONTRAST_RANGE: Range = Range::new(-1.0, 1.0);
/// Curve knots are bounded away from zero so the normalising sum never vanishes.
pub const CURVE_RANGE: Range = Range::new(0.01, 3.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Sharpen,
    Exposure,
    Contrast,
    Tone,
    Color,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Sharpen,
        Stage::Exposure,
        Stage::Contrast,
        Stage::Tone,
        Stage::Color,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Sharpen => "sharpen",
            Stage::Exposure => "exposure",
            Stage::Contrast => "contrast",
            Stage::Tone => "tone",
            Stage::Color => "color",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidOrder(format!("unknown stage {s:?}")))
    }
}

/// A permutation of the five stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PipelineOrder([Stage; 5]);

impl PipelineOrder {
    pub fn new(stages: &[Stage]) -> Result<Self> {
        if stages.len() != 5 {
            return Err(Error::InvalidOrder(format!(
                "expected 5 stages, got {}",
                stages.len()
            )));
        }
        for st in Stage::ALL {
            if !stages.contains(&st) {
                return Err(Error::InvalidOrder(format!("stage {st} is missing")));
            }
        }
        let mut arr = [Stage::Sharpen; 5];
        arr.copy_from_slice(stages);
        Ok(PipelineOrder(arr))
    }

    pub fn stages(&self) -> &[Stage; 5] {
        &self.0
    }

    pub fn position(&self, stage: Stage) -> usize {
        self.0
            .iter()
            .position(|&s| s == stage)
            .expect("permutation")
    }
}

impl Default for PipelineOrder {
    fn default() -> Self {
        PipelineOrder(Stage::ALL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Increase,
    Decrease,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Increase => "increase",
            Mode::Decrease => "decrease",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "increase" => Ok(Mode::Increase),
            "decrease" => Ok(Mode::Decrease),
            other => Err(Error::InvalidConfig(format!(
                "mode must be increase or decrease, got {other:?}"
            ))),
        }
    }
}

/// Global edit parameters for one image region.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub sharpness: f64,
    pub exposure: f64,
    pub contrast: f64,
    /// Tone curve shared by all channels.
    pub tone: Vec<f64>,
    /// Per-channel colour curves, R, G, B.
    pub color: [Vec<f64>; 3],
}

impl ParamSet {
    /// Parameters under which every stage is the identity map.
    pub fn identity(curve_resolution: usize) -> Self {
        assert!(curve_resolution >= 2, "curve resolution must be at least 2");
        let ones = vec![1.0; curve_resolution];
        ParamSet {
            sharpness: 0.0,
            exposure: 0.0,
            contrast: 0.0,
            tone: ones.clone(),
            color: [ones.clone(), ones.clone(), ones],
        }
    }

    pub fn curve_resolution(&self) -> usize {
        self.tone.len()
    }

    /// Number of scalar parameters (3 scalars and four curves).
    pub fn dimension(&self) -> usize {
        3 + 4 * self.curve_resolution()
    }

    /// Checks every value against its range. `prefix` is prepended to field
    /// paths in errors, e.g. `"foreground."`.
    pub fn validate_with_prefix(&self, prefix: &str) -> Result<()> {
        let l = self.tone.len();
        if l < 2 {
            return Err(Error::InvalidConfig(format!(
                "{prefix}tone: curve resolution must be at least 2, got {l}"
            )));
        }
        for (ch, curve) in ["r", "g", "b"].iter().zip(&self.color) {
            if curve.len() != l {
                return Err(Error::InvalidConfig(format!(
                    "{prefix}color.{ch}: expected {l} values, got {}",
                    curve.len()
                )));
            }
        }
        SHARPNESS_RANGE.check(format!("{prefix}sharpness"), self.sharpness)?;
        EXPOSURE_RANGE.check(format!("{prefix}exposure"), self.exposure)?;
        CONTRAST_RANGE.check(format!("{prefix}contrast"), self.contrast)?;
        for (i, &v) in self.tone.iter().enumerate() {
            CURVE_RANGE.check(format!("{prefix}tone[{i}]"), v)?;
        }
        for (ch, curve) in ["r", "g", "b"].iter().zip(&self.color) {
            for (i, &v) in curve.iter().enumerate() {
                CURVE_RANGE.check(format!("{prefix}color.{ch}[{i}]"), v)?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_prefix("")
    }

    /// Clamps every value into its legal range.
    pub fn project(&mut self) {
        self.sharpness = SHARPNESS_RANGE.clamp(self.sharpness);
        self.exposure = EXPOSURE_RANGE.clamp(self.exposure);
        self.contrast = CONTRAST_RANGE.clamp(self.contrast);
        for v in self
            .tone
            .iter_mut()
            .chain(self.color.iter_mut().flat_map(|c| c.iter_mut()))
        {
            *v = CURVE_RANGE.clamp(*v);
        }
    }

    /// Flattened view: sharpness, exposure, contrast, tone, then R, G, B curves.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dimension());
        v.push(self.sharpness);
        v.push(self.exposure);
        v.push(self.contrast);
        v.extend_from_slice(&self.tone);
        for c in &self.color {
            v.extend_from_slice(c);
        }
        v
    }

    pub fn from_slice(values: &[f64], curve_resolution: usize) -> Result<Self> {
        let l = curve_resolution;
        if values.len() != 3 + 4 * l {
            return Err(Error::InvalidConfig(format!(
                "parameter vector needs {} values, got {}",
                3 + 4 * l,
                values.len()
            )));
        }
        let curve = |k: usize| values[3 + k * l..3 + (k + 1) * l].to_vec();
        Ok(ParamSet {
            sharpness: values[0],
            exposure: values[1],
            contrast: values[2],
            tone: curve(0),
            color: [curve(1), curve(2), curve(3)],
        })
    }

    /// Range of the flattened element at `index`.
    pub fn range_at(index: usize) -> Range {
        match index {
            0 => SHARPNESS_RANGE,
            1 => EXPOSURE_RANGE,
            2 => CONTRAST_RANGE,
            _ => CURVE_RANGE,
        }
    }

    /// Identity value of the flattened element at `index`.
    pub fn identity_at(index: usize) -> f64 {
        if index < 3 {
            0.0
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub total: f64,
    pub attention: f64,
    pub fidelity: f64,
    pub regularization: f64,
    /// Lowest total seen up to and including this iteration.
    pub best_total: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub seed: u64,
    pub iterations: usize,
    pub trace: Option<Vec<TraceEntry>>,
}

/// Foreground and background parameter sets plus the pipeline they run in.
#[derive(Debug, Clone, PartialEq)]
pub struct EditRecipe {
    pub foreground: ParamSet,
    pub background: ParamSet,
    pub order: PipelineOrder,
    pub mode: Mode,
    pub provenance: Provenance,
}

impl EditRecipe {
    pub fn identity(curve_resolution: usize) -> Self {
        EditRecipe {
            foreground: ParamSet::identity(curve_resolution),
            background: ParamSet::identity(curve_resolution),
            order: PipelineOrder::default(),
            mode: Mode::Increase,
            provenance: Provenance::default(),
        }
    }

    pub fn curve_resolution(&self) -> usize {
        self.foreground.curve_resolution()
    }

    pub fn validate(&self) -> Result<()> {
        self.foreground.validate_with_prefix("foreground.")?;
        self.background.validate_with_prefix("background.")?;
        if self.background.curve_resolution() != self.foreground.curve_resolution() {
            return Err(Error::InvalidConfig(
                "foreground and background curve resolutions differ".into(),
            ));
        }
        Ok(())
    }

    pub fn project(&mut self) {
        self.foreground.project();
        self.background.project();
    }

    /// Foreground values followed by background values.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.foreground.to_vec();
        v.extend(self.background.to_vec());
        v
    }

    /// Replaces both parameter sets from a flattened vector, keeping the rest.
    pub fn with_vec(&self, values: &[f64]) -> Result<Self> {
        let l = self.curve_resolution();
        let half = 3 + 4 * l;
        if values.len() != 2 * half {
            return Err(Error::InvalidConfig(format!(
                "recipe vector needs {} values, got {}",
                2 * half,
                values.len()
            )));
        }
        Ok(EditRecipe {
            foreground: ParamSet::from_slice(&values[..half], l)?,
            background: ParamSet::from_slice(&values[half..], l)?,
            order: self.order,
            mode: self.mode,
            provenance: self.provenance.clone(),
        })
    }

    pub fn is_identity(&self) -> bool {
        let id = ParamSet::identity(self.curve_resolution());
        self.foreground == id && self.background == id
    }
}

/// Moves every parameter from identity toward the recipe by `alpha`
/// (`alpha > 1` extrapolates), then projects back into range.
pub fn interpolate_params(recipe: &EditRecipe, alpha: f64) -> Result<EditRecipe> {
    if !(0.0..=1.5).contains(&alpha) {
        return Err(Error::range("alpha", alpha, 0.0, 1.5));
    }
    if alpha == 1.0 {
        return Ok(recipe.clone());
    }
    let blend = |p: &ParamSet| -> ParamSet {
        let values: Vec<f64> = p
            .to_vec()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let id = ParamSet::identity_at(i);
                (1.0 - alpha) * id + alpha * v
            })
            .collect();
        let mut out = ParamSet::from_slice(&values, p.curve_resolution()).expect("same layout");
        out.project();
        out
    };
    Ok(EditRecipe {
        foreground: blend(&recipe.foreground),
        background: blend(&recipe.background),
        order: recipe.order,
        mode: recipe.mode,
        provenance: recipe.provenance.clone(),
    })
}
