//! Versioned JSON persistence for edit recipes.

use attnshift_core::imaging::{EditRecipe, Mode, ParamSet, PipelineOrder, Provenance, Stage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ToolError};

pub const RECIPE_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeDocument {
    pub version: u32,
    pub curve_resolution: usize,
    pub pipeline_order: Vec<Stage>,
    pub mode: Mode,
    pub foreground: ParamDocument,
    pub background: ParamDocument,
    pub provenance: ProvenanceDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDocument {
    pub sharpness: f64,
    pub exposure: f64,
    pub contrast: f64,
    pub tone: Vec<f64>,
    pub color: ColorCurves,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorCurves {
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvenanceDocument {
    pub seed: u64,
    pub iterations: usize,
    pub tool_version: String,
}

impl From<&ParamSet> for ParamDocument {
    fn from(p: &ParamSet) -> Self {
        let [r, g, b] = p.color.clone();
        ParamDocument {
            sharpness: p.sharpness,
            exposure: p.exposure,
            contrast: p.contrast,
            tone: p.tone.clone(),
            color: ColorCurves { r, g, b },
        }
    }
}

impl From<&ParamDocument> for ParamSet {
    fn from(d: &ParamDocument) -> Self {
        ParamSet {
            sharpness: d.sharpness,
            exposure: d.exposure,
            contrast: d.contrast,
            tone: d.tone.clone(),
            color: [d.color.r.clone(), d.color.g.clone(), d.color.b.clone()],
        }
    }
}

impl RecipeDocument {
    pub fn from_recipe(recipe: &EditRecipe) -> Self {
        RecipeDocument {
            version: RECIPE_VERSION,
            curve_resolution: recipe.curve_resolution(),
            pipeline_order: recipe.order.stages().to_vec(),
            mode: recipe.mode,
            foreground: (&recipe.foreground).into(),
            background: (&recipe.background).into(),
            provenance: ProvenanceDocument {
                seed: recipe.provenance.seed,
                iterations: recipe.provenance.iterations,
                tool_version: TOOL_VERSION.to_string(),
            },
        }
    }

    /// Validates the document and converts it. The optimization trace is not
    /// persisted, so the result carries none.
    pub fn to_recipe(&self) -> Result<EditRecipe> {
        if self.version != RECIPE_VERSION {
            return Err(recipe_err(
                "version",
                format!("unsupported version {}, expected {RECIPE_VERSION}", self.version),
            ));
        }
        let l = self.curve_resolution;
        if l < 2 {
            return Err(recipe_err("curve_resolution", format!("must be at least 2, got {l}")));
        }
        for (region, p) in [("foreground", &self.foreground), ("background", &self.background)] {
            let curves = [("tone", &p.tone), ("color.r", &p.color.r), ("color.g", &p.color.g), ("color.b", &p.color.b)];
            for (name, c) in curves {
                if c.len() != l {
                    return Err(recipe_err(
                        format!("{region}.{name}"),
                        format!("expected {l} values (curve_resolution), got {}", c.len()),
                    ));
                }
            }
        }
        let order = PipelineOrder::new(&self.pipeline_order)
            .map_err(|e| recipe_err("pipeline_order", e.to_string()))?;
        let recipe = EditRecipe {
            foreground: (&self.foreground).into(),
            background: (&self.background).into(),
            order,
            mode: self.mode,
            provenance: Provenance {
                seed: self.provenance.seed,
                iterations: self.provenance.iterations,
                trace: None,
            },
        };
        recipe.validate().map_err(|e| match e {
            attnshift_core::Error::RangeViolation {
                field,
                value,
                min,
                max,
            } => recipe_err(field, format!("{value} is outside [{min}, {max}]")),
            other => ToolError::Core(other),
        })?;
        Ok(recipe)
    }

    /// Parses and validates one document.
    pub fn parse(json: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(json);
        let doc: RecipeDocument = serde_path_to_error::deserialize(&mut de).map_err(path_err)?;
        de.end().map_err(|e| recipe_err("<document>", e.to_string()))?;
        doc.to_recipe()?;
        Ok(doc)
    }

    /// Like [`Self::parse`] for an already-decoded JSON value.
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let doc: RecipeDocument = serde_path_to_error::deserialize(value).map_err(path_err)?;
        doc.to_recipe()?;
        Ok(doc)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("documents always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    /// Compact serialization with fields in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("documents always serialize")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

pub fn recipe_hash(recipe: &EditRecipe) -> String {
    RecipeDocument::from_recipe(recipe).hash()
}

pub fn recipe_to_json(recipe: &EditRecipe) -> String {
    RecipeDocument::from_recipe(recipe).to_json_pretty()
}

pub fn parse_recipe(json: &str) -> Result<EditRecipe> {
    RecipeDocument::parse(json)?.to_recipe()
}

/// Serializes several recipes as a JSON array of documents.
pub fn recipes_to_json(recipes: &[EditRecipe]) -> String {
    let docs: Vec<RecipeDocument> = recipes.iter().map(RecipeDocument::from_recipe).collect();
    serde_json::to_string_pretty(&docs).expect("documents always serialize")
}

/// Accepts a single document or an array of documents.
pub fn parse_recipes(json: &str) -> Result<Vec<EditRecipe>> {
    let value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| recipe_err("<document>", e.to_string()))?;
    match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                RecipeDocument::from_value(v)
                    .and_then(|d| d.to_recipe())
                    .map_err(|e| match e {
                        ToolError::Recipe { field, message } => recipe_err(format!("[{i}].{field}"), message),
                        other => other,
                    })
            })
            .collect(),
        single => Ok(vec![RecipeDocument::from_value(single)?.to_recipe()?]),
    }
}

fn recipe_err(field: impl Into<String>, message: impl Into<String>) -> ToolError {
    ToolError::Recipe {
        field: field.into(),
        message: message.into(),
    }
}

fn path_err(e: serde_path_to_error::Error<serde_json::Error>) -> ToolError {
    let path = e.path().to_string();
    let field = if path == "." { "<document>".to_string() } else { path };
    recipe_err(field, e.into_inner().to_string())
}
