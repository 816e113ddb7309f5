//! Files, instance generation, benchmarks and the command-line front end.

pub mod bench;
pub mod catalog;
pub mod error;
pub mod format;
pub mod generator;
pub mod inp;

use std::path::Path;

use wdsflow_core::{Network, WfInput};

pub use error::{CliError, Result};

/// A network plus a default instance, from a native file, an INP file or a
/// catalog name.
pub fn load_any(spec: &str) -> Result<(Network, Option<WfInput>, String)> {
    if let Some(net) = catalog::by_name(spec) {
        return Ok((net?, None, spec.to_string()));
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(spec)
        .to_string();
    let is_inp = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("inp"));
    if is_inp {
        let n = inp::parse_inp(&text)?;
        let input = WfInput::new(&n.net, n.injections, n.reference_head)?;
        return Ok((n.net, Some(input), name));
    }
    let file = format::NativeFile::parse(&text)?;
    let (net, input) = file.load()?;
    Ok((net, Some(input), name))
}
