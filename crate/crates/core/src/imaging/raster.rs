use crate::error::{Error, Result};

/// A single-channel real-valued map in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidBuffer(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::InvalidBuffer(format!(
                "grid {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(Grid {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Grid::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Planar RGB image with channel values nominally in `[0, 1]`.
///
/// Storage is three consecutive row-major planes (R, then G, then B).
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub const CHANNELS: usize = 3;

    /// Builds an image from planar data. Values must be finite and in `[0, 1]`.
    pub fn from_planar(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidBuffer(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidBuffer(format!(
                "image {width}x{height} needs {} values, got {}",
                width * height * 3,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidBuffer(format!(
                "pixel value {bad} is outside [0, 1]"
            )));
        }
        Ok(RasterImage {
            width,
            height,
            data,
        })
    }

    /// Builds an image from interleaved RGB triples.
    pub fn from_interleaved(width: usize, height: usize, rgb: &[f64]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::InvalidBuffer(format!(
                "image {width}x{height} needs {} interleaved values, got {}",
                width * height * 3,
                rgb.len()
            )));
        }
        let n = width * height;
        let mut data = vec![0.0; n * 3];
        for (i, px) in rgb.chunks_exact(3).enumerate() {
            data[i] = px[0];
            data[n + i] = px[1];
            data[2 * n + i] = px[2];
        }
        RasterImage::from_planar(width, height, data)
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let n = width * height;
        let mut data = Vec::with_capacity(n * 3);
        for c in rgb {
            data.extend(std::iter::repeat_n(c, n));
        }
        RasterImage::from_planar(width, height, data)
    }

    /// Wraps a buffer produced by a stage that has already clamped its output.
    pub(crate) fn from_clamped(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * 3);
        RasterImage {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let n = self.pixel_count();
        let i = y * self.width + x;
        [self.data[i], self.data[n + i], self.data[2 * n + i]]
    }

    /// Interleaved RGB copy, convenient for encoders.
    pub fn to_interleaved(&self) -> Vec<f64> {
        let n = self.pixel_count();
        let mut out = Vec::with_capacity(n * 3);
        for i in 0..n {
            out.push(self.data[i]);
            out.push(self.data[n + i]);
            out.push(self.data[2 * n + i]);
        }
        out
    }
}

/// Per-pixel foreground weights in `[0, 1]`; `>= 0.5` counts as foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskLayer {
    grid: Grid,
}

impl MaskLayer {
    pub const THRESHOLD: f64 = 0.5;

    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(width, height, weights)?;
        if let Some(bad) = grid.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidBuffer(format!(
                "mask weight {bad} is outside [0, 1]"
            )));
        }
        Ok(MaskLayer { grid })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut w = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                w.push(f(x, y));
            }
        }
        MaskLayer::new(width, height, w)
    }

    pub fn filled(width: usize, height: usize, weight: f64) -> Result<Self> {
        MaskLayer::new(width, height, vec![weight; width * height])
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    pub fn weights(&self) -> &[f64] {
        self.grid.values()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_foreground(&self, index: usize) -> bool {
        self.grid.values()[index] >= Self::THRESHOLD
    }

    /// Binarized view: 1.0 where weight >= 0.5, else 0.0.
    pub fn binarized(&self) -> MaskLayer {
        let values = self
            .grid
            .values()
            .iter()
            .map(|&w| if w >= Self::THRESHOLD { 1.0 } else { 0.0 })
            .collect();
        MaskLayer {
            grid: Grid {
                width: self.width(),
                height: self.height(),
                values,
            },
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.grid
            .values()
            .iter()
            .filter(|&&w| w >= Self::THRESHOLD)
            .count()
    }

    /// Errors unless the binarized mask has at least one foreground and one
    /// background pixel.
    pub fn ensure_partial(&self) -> Result<()> {
        let fg = self.foreground_count();
        if fg == 0 {
            Err(Error::EmptyMask)
        } else if fg == self.grid.len() {
            Err(Error::FullMask)
        } else {
            Ok(())
        }
    }

    /// Nearest-neighbour resampling; preserves binary masks.
    pub fn resample_nearest(&self, width: usize, height: usize) -> MaskLayer {
        if (width, height) == self.dims() {
            return self.clone();
        }
        let (sw, sh) = self.dims();
        let xs: Vec<usize> = (0..width)
            .map(|x| (((x as f64 + 0.5) * sw as f64 / width as f64) as usize).min(sw - 1))
            .collect();
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = (((y as f64 + 0.5) * sh as f64 / height as f64) as usize).min(sh - 1);
            let row = &self.grid.values()[sy * sw..(sy + 1) * sw];
            values.extend(xs.iter().map(|&sx| row[sx]));
        }
        MaskLayer {
            grid: Grid {
                width,
                height,
                values,
            },
        }
    }
}

pub(crate) fn ensure_same_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(Error::Shape { expected, found });
    }
    Ok(())
}
