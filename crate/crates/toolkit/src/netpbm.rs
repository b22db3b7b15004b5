//! Binary PGM reading and writing, including 16-bit samples and comments.
//!
//! Saliency maps travel as 16-bit PGM with a `# scale S` comment: a sample
//! `q` stands for the value `q / 65535 * S`.

use attnshift_core::imaging::Grid;
use attnshift_core::saliency::SaliencyMap;

/// A decoded P5 image.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
    /// Header comments without the leading `#`, trimmed.
    pub comments: Vec<String>,
}

impl Pgm {
    /// Samples divided by `maxval`.
    pub fn normalized(&self) -> Grid {
        let m = f64::from(self.maxval);
        let values = self.samples.iter().map(|&q| f64::from(q) / m).collect();
        Grid::new(self.width, self.height, values).expect("sample count checked at parse")
    }

    /// Value of a `# key value` comment.
    pub fn comment_value(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| {
            let (k, v) = c.split_once(char::is_whitespace)?;
            (k == key).then(|| v.trim())
        })
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Pgm, String> {
    let mut pos = 0;
    let mut comments = Vec::new();
    let magic = header_token(bytes, &mut pos, &mut comments)?;
    if magic != "P5" {
        return Err(format!("expected binary PGM (P5), found {magic:?}"));
    }
    let mut number = |what: &str| -> Result<usize, String> {
        let tok = header_token(bytes, &mut pos, &mut comments)?;
        tok.parse::<usize>().map_err(|_| format!("bad {what} {tok:?}"))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if width == 0 || height == 0 {
        return Err("zero-sized PGM".into());
    }
    if !(1..=65535).contains(&maxval) {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing whitespace after maxval".into());
    }
    pos += 1;
    let n = width * height;
    let body = &bytes[pos..];
    let samples: Vec<u16> = if maxval < 256 {
        if body.len() < n {
            return Err(format!("raster truncated: {} of {n} bytes", body.len()));
        }
        body[..n].iter().map(|&b| u16::from(b)).collect()
    } else {
        if body.len() < 2 * n {
            return Err(format!("raster truncated: {} of {} bytes", body.len(), 2 * n));
        }
        body[..2 * n]
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]))
            .collect()
    };
    if let Some(&q) = samples.iter().find(|&&q| usize::from(q) > maxval) {
        return Err(format!("sample {q} exceeds maxval {maxval}"));
    }
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        samples,
        comments,
    })
}

fn header_token(bytes: &[u8], pos: &mut usize, comments: &mut Vec<String>) -> Result<String, String> {
    loop {
        match bytes.get(*pos) {
            None => return Err("truncated PGM header".into()),
            Some(b'#') => {
                let start = *pos + 1;
                let end = bytes[start..]
                    .iter()
                    .position(|&b| b == b'\n' || b == b'\r')
                    .map_or(bytes.len(), |e| start + e);
                comments.push(String::from_utf8_lossy(&bytes[start..end]).trim().to_string());
                *pos = end;
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
        *pos += 1;
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

/// Writes a P5 image; 16-bit samples are used when `maxval > 255`.
pub fn write_pgm(width: usize, height: usize, maxval: u16, samples: &[u16], comments: &[String]) -> Vec<u8> {
    assert_eq!(samples.len(), width * height, "sample count");
    let mut out = b"P5\n".to_vec();
    for c in comments {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    out.extend_from_slice(format!("{width} {height}\n{maxval}\n").as_bytes());
    if maxval > 255 {
        for &q in samples {
            out.extend_from_slice(&q.to_be_bytes());
        }
    } else {
        out.extend(samples.iter().map(|&q| q as u8));
    }
    out
}

/// Quantizes nonnegative values against their maximum into a 16-bit PGM with
/// a `# scale` comment. An all-zero grid is written with scale 0.
pub fn grid_to_pgm16(grid: &Grid) -> Vec<u8> {
    let max = grid.values().iter().copied().fold(0.0_f64, f64::max);
    let samples: Vec<u16> = grid
        .values()
        .iter()
        .map(|&v| if max > 0.0 { (v / max * 65535.0).round() as u16 } else { 0 })
        .collect();
    write_pgm(grid.width(), grid.height(), 65535, &samples, &[format!("scale {max:e}")])
}

pub fn saliency_to_pgm(map: &SaliencyMap) -> Vec<u8> {
    grid_to_pgm16(map.grid())
}

/// Inverse of [`grid_to_pgm16`] up to quantization. Without a scale comment
/// the samples are divided by maxval.
pub fn pgm_to_grid(pgm: &Pgm) -> Result<Grid, String> {
    let unit = pgm.normalized();
    match pgm.comment_value("scale") {
        None => Ok(unit),
        Some(s) => {
            let scale: f64 = s.parse().map_err(|_| format!("bad scale comment {s:?}"))?;
            let values = unit.values().iter().map(|v| v * scale).collect();
            Ok(Grid::new(pgm.width, pgm.height, values).expect("same length"))
        }
    }
}
