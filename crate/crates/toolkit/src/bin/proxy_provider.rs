//! Saliency provider speaking the exec protocol with the built-in proxy.
//!
//! Reads one binary PPM/PGM from stdin and writes the raw centre-surround map
//! as a 16-bit PGM to stdout. Useful for exercising the provider path and as
//! a template for wrapping other models.

use std::io::{self, Read, Write};
use std::process::ExitCode;

use attnshift_core::saliency::{proxy_raw_map, ProxySaliencyConfig};
use attnshift_toolkit::io::decode_image;
use attnshift_toolkit::netpbm::grid_to_pgm16;

fn main() -> ExitCode {
    let mut input = Vec::new();
    if let Err(e) = io::stdin().read_to_end(&mut input) {
        eprintln!("reading stdin: {e}");
        return ExitCode::from(2);
    }
    let result = decode_image(&input, "stdin")
        .map_err(|e| e.to_string())
        .and_then(|img| proxy_raw_map(&img, &ProxySaliencyConfig::default()).map_err(|e| e.to_string()));
    match result {
        Ok(raw) => {
            let mut out = io::stdout().lock();
            if out.write_all(&grid_to_pgm16(&raw)).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
