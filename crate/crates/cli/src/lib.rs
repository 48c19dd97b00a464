//! Command line and HTTP front ends.

pub mod chat;
pub mod server;

use std::path::Path;

use anyhow::{bail, Context};
use vismanip_core::demo;
use vismanip_core::ChartSpec;

/// A bundled sample name or the path of a chart spec JSON file.
pub fn load_spec(arg: &str) -> anyhow::Result<ChartSpec> {
    if let Some(spec) = demo::sample(arg) {
        return Ok(spec);
    }
    let path = Path::new(arg);
    if !path.exists() {
        bail!("`{arg}` is neither a sample ({}) nor a file", demo::SAMPLES.join(", "));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
    Ok(ChartSpec::from_json_str(&text)?)
}
