//! Transfers one recipe across a directory of frames.

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use attnshift_core::imaging::{composite, EditRecipe};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, ToolError};
use crate::io::{fit_mask, load_image, load_mask, save_image, MaskFit};
use crate::recipe::recipe_hash;

/// Frame and mask paths in playback order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pairs: Vec<(PathBuf, PathBuf)>,
}

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "ppm", "pgm", "jpg", "jpeg"];

impl FrameSequence {
    pub fn new(pairs: Vec<(PathBuf, PathBuf)>) -> Self {
        FrameSequence { pairs }
    }

    /// Pairs the image files of two directories in natural-sort order
    /// (`frame2` before `frame10`).
    pub fn from_dirs(frames: impl AsRef<Path>, masks: impl AsRef<Path>) -> Result<Self> {
        let f = list_images(frames.as_ref())?;
        let m = list_images(masks.as_ref())?;
        if f.len() != m.len() {
            return Err(ToolError::format(
                masks.as_ref().display().to_string(),
                format!("{} frames but {} masks", f.len(), m.len()),
            ));
        }
        if f.is_empty() {
            return Err(ToolError::format(
                frames.as_ref().display().to_string(),
                "no image files found",
            ));
        }
        Ok(FrameSequence::new(f.into_iter().zip(m).collect()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(PathBuf, PathBuf)] {
        &self.pairs
    }
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| ToolError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| ToolError::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| natural_cmp(a, b));
    Ok(files)
}

fn natural_cmp(a: &Path, b: &Path) -> Ordering {
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    natord::compare(&name(a), &name(b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameRecord {
    pub index: usize,
    pub frame: PathBuf,
    pub mask: PathBuf,
    pub output: PathBuf,
    /// Hash of the recipe this frame was rendered with.
    pub recipe_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoReport {
    pub recipe_hash: String,
    pub frames: Vec<FrameRecord>,
}

impl VideoReport {
    pub fn count(&self) -> usize {
        self.frames.len()
    }
}

/// Output name: the input's file name, with JPEG inputs written as PNG.
fn output_name(frame: &Path) -> PathBuf {
    let ext = frame
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let name = PathBuf::from(frame.file_name().unwrap_or_default());
    match ext.as_deref() {
        Some("png") | Some("ppm") => name,
        _ => name.with_extension("png"),
    }
}

/// Applies `recipe` to every frame with that frame's mask and writes the
/// results plus `manifest.json` into `out_dir`. Frames are processed in
/// parallel; if any fail, the error names the lowest failing index.
pub fn video_apply(frames: &FrameSequence, recipe: &EditRecipe, out_dir: impl AsRef<Path>) -> Result<VideoReport> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| ToolError::io(out_dir, e))?;
    recipe.validate()?;

    let results: Vec<Result<FrameRecord>> = frames
        .pairs
        .par_iter()
        .enumerate()
        .map(|(index, (frame, mask))| {
            let output = out_dir.join(output_name(frame));
            render_frame(frame, mask, &output, recipe)
                .map(|hash| FrameRecord {
                    index,
                    frame: frame.clone(),
                    mask: mask.clone(),
                    output,
                    recipe_hash: hash,
                })
                .map_err(|e| ToolError::Frame {
                    index,
                    path: frame.clone(),
                    source: Box::new(e),
                })
        })
        .collect();
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;

    let report = VideoReport {
        recipe_hash: recipe_hash(recipe),
        frames: records,
    };
    let manifest = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&manifest, json).map_err(|e| ToolError::io(&manifest, e))?;
    Ok(report)
}

fn render_frame(frame: &Path, mask: &Path, output: &Path, recipe: &EditRecipe) -> Result<String> {
    let image = load_image(frame)?;
    let mask = fit_mask(load_mask(mask)?, image.width(), image.height(), MaskFit::Resize)?;
    let edited = composite(&image, &mask, recipe)?;
    save_image(&edited, output)?;
    Ok(recipe_hash(recipe))
}
