//! External saliency providers.
//!
//! A provider receives one image and answers with a raw map as binary PGM at
//! any resolution with the image's aspect ratio. The raw map is then
//! normalized exactly like the built-in proxy's.
//!
//! - `exec:<command>` runs `sh -c <command>` with a P6 image on stdin.
//! - `http:<url>` POSTs a PNG to `<url>/saliency` and expects a 200 PGM body.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::thread;
use std::time::Duration;

use attnshift_core::imaging::{Grid, RasterImage};
use attnshift_core::saliency::{normalize_softmax, ProxySaliency, SaliencyMap, SaliencySource};
use attnshift_core::{Error, Result};
use wait_timeout::ChildExt;

use crate::io::{encode_image, encode_png, OutputFormat};
use crate::netpbm::{parse_pgm, pgm_to_grid};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// Parsed `--saliency-provider` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Builtin,
    Exec(String),
    Http(String),
}

impl FromStr for ProviderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "builtin" || s == "proxy" {
            return Ok(ProviderSpec::Builtin);
        }
        if let Some(cmd) = s.strip_prefix("exec:") {
            if cmd.trim().is_empty() {
                return Err(Error::InvalidConfig("exec provider needs a command".into()));
            }
            return Ok(ProviderSpec::Exec(cmd.to_string()));
        }
        if let Some(rest) = s.strip_prefix("http:") {
            // Accept both `http:host:port` style and a full `http://` URL.
            let url = if rest.starts_with("//") {
                format!("http:{rest}")
            } else {
                rest.to_string()
            };
            if url.is_empty() {
                return Err(Error::InvalidConfig("http provider needs a URL".into()));
            }
            return Ok(ProviderSpec::Http(url));
        }
        Err(Error::InvalidConfig(format!(
            "saliency provider must be exec:<command>, http:<url> or builtin, got {s:?}"
        )))
    }
}

impl ProviderSpec {
    pub fn into_source(self) -> Box<dyn SaliencySource> {
        match self {
            ProviderSpec::Builtin => Box::new(ProxySaliency::default()),
            ProviderSpec::Exec(cmd) => Box::new(ExecProvider::new(cmd)),
            ProviderSpec::Http(url) => Box::new(HttpProvider::new(url)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExecProvider {
    pub command: String,
    pub timeout: Duration,
    pub temperature: f64,
}

impl ExecProvider {
    pub fn new(command: impl Into<String>) -> Self {
        ExecProvider {
            command: command.into(),
            timeout: DEFAULT_TIMEOUT,
            temperature: 1.0,
        }
    }

    fn run(&self, input: Vec<u8>) -> Result<Vec<u8>> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| provider_err(format!("cannot start {:?}: {e}", self.command)))?;

        let mut stdin = child.stdin.take().expect("piped");
        let writer = thread::spawn(move || {
            // A provider may exit without reading everything.
            let _ = stdin.write_all(&input);
        });
        let mut stdout = child.stdout.take().expect("piped");
        let reader = thread::spawn(move || {
            let mut buf = Vec::new();
            stdout.read_to_end(&mut buf).map(|_| buf)
        });
        let mut stderr = child.stderr.take().expect("piped");
        let err_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });

        let status = match child
            .wait_timeout(self.timeout)
            .map_err(|e| provider_err(format!("wait failed: {e}")))?
        {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(provider_err(format!(
                    "{:?} timed out after {:?}",
                    self.command, self.timeout
                )));
            }
        };
        let _ = writer.join();
        let out = reader
            .join()
            .expect("reader thread")
            .map_err(|e| provider_err(format!("reading provider output: {e}")))?;
        let err = err_reader.join().expect("reader thread");
        if !status.success() {
            let msg = String::from_utf8_lossy(&err);
            return Err(provider_err(format!(
                "{:?} exited with {status}: {}",
                self.command,
                msg.trim()
            )));
        }
        Ok(out)
    }
}

impl SaliencySource for ExecProvider {
    fn saliency(&self, image: &RasterImage) -> Result<SaliencyMap> {
        let ppm = encode_image(image, OutputFormat::Ppm).map_err(|e| provider_err(e.to_string()))?;
        let body = self.run(ppm)?;
        raw_map_to_saliency(&body, image, self.temperature)
    }
}

#[derive(Debug, Clone)]
pub struct HttpProvider {
    pub url: String,
    pub timeout: Duration,
    pub temperature: f64,
}

impl HttpProvider {
    pub fn new(url: impl Into<String>) -> Self {
        HttpProvider {
            url: url.into(),
            timeout: DEFAULT_TIMEOUT,
            temperature: 1.0,
        }
    }

    pub fn endpoint(&self) -> String {
        let base = self.url.trim_end_matches('/');
        if base.ends_with("/saliency") {
            base.to_string()
        } else {
            format!("{base}/saliency")
        }
    }
}

impl SaliencySource for HttpProvider {
    fn saliency(&self, image: &RasterImage) -> Result<SaliencyMap> {
        let png = encode_png(image).map_err(|e| provider_err(e.to_string()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let url = self.endpoint();
        let mut resp = agent
            .post(&url)
            .header("Content-Type", "image/png")
            .send(&png[..])
            .map_err(|e| provider_err(format!("POST {url}: {e}")))?;
        let status = resp.status();
        if status.as_u16() != 200 {
            return Err(provider_err(format!("POST {url}: status {status}")));
        }
        let body = resp
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| provider_err(format!("POST {url}: {e}")))?;
        raw_map_to_saliency(&body, image, self.temperature)
    }
}

/// Decodes a provider's PGM answer and normalizes it for `image`.
pub fn raw_map_to_saliency(body: &[u8], image: &RasterImage, temperature: f64) -> Result<SaliencyMap> {
    let pgm = parse_pgm(body).map_err(|e| provider_err(format!("bad PGM: {e}")))?;
    let raw = pgm_to_grid(&pgm).map_err(provider_err)?;
    check_aspect(&raw, image)?;
    normalize_softmax(&raw, temperature)
}

/// The map may have any resolution, but its aspect ratio must match the
/// image's to within one pixel of rounding.
fn check_aspect(raw: &Grid, image: &RasterImage) -> Result<()> {
    let (pw, ph) = (raw.width() as f64, raw.height() as f64);
    let (w, h) = (image.width() as f64, image.height() as f64);
    let ok_h = (ph - (pw * h / w).round()).abs() <= 1.0;
    let ok_w = (pw - (ph * w / h).round()).abs() <= 1.0;
    if ok_h || ok_w {
        Ok(())
    } else {
        Err(provider_err(format!(
            "map is {}x{}, which does not match the {}x{} image's aspect ratio",
            raw.width(),
            raw.height(),
            image.width(),
            image.height()
        )))
    }
}

fn provider_err(msg: impl Into<String>) -> Error {
    Error::Provider(msg.into())
}
