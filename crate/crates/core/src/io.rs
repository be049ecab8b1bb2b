//! Versioned JSON format for configurations.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::lattice::BoxSpec;
use crate::sampler::Configuration;

pub const CONFIGURATION_FORMAT: &str = "lrp-configuration";
pub const CONFIGURATION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigurationFile {
    format: String,
    version: u32,
    d: usize,
    n: usize,
    origin: Vec<i64>,
    family: KernelFamily,
    beta: f64,
    seed: u64,
    edges: Vec<(usize, usize)>,
}

pub fn write_configuration(config: &Configuration, mut out: impl Write) -> Result<()> {
    let file = ConfigurationFile {
        format: CONFIGURATION_FORMAT.to_string(),
        version: CONFIGURATION_VERSION,
        d: config.box_spec.d,
        n: config.box_spec.n,
        origin: config.box_spec.origin.clone(),
        family: config.kernel.family,
        beta: config.kernel.beta,
        seed: config.seed,
        edges: config.edges().to_vec(),
    };
    serde_json::to_writer(&mut out, &file)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads a configuration, revalidating every edge.
pub fn read_configuration(input: impl Read) -> Result<Configuration> {
    let file: ConfigurationFile = serde_json::from_reader(input)?;
    if file.format != CONFIGURATION_FORMAT {
        return Err(Error::Format(format!("expected format `{CONFIGURATION_FORMAT}`, found `{}`", file.format)));
    }
    if file.version != CONFIGURATION_VERSION {
        return Err(Error::Format(format!(
            "unsupported configuration version {} (expected {CONFIGURATION_VERSION})",
            file.version
        )));
    }
    if file.origin.len() != file.d {
        return Err(Error::DimensionMismatch {
            expected: file.d,
            got: file.origin.len(),
        });
    }
    let box_spec = BoxSpec::with_origin(file.n, file.origin)?;
    let kernel = KernelSpec::new(file.family, file.beta)?;
    Configuration::from_edges(box_spec, kernel, file.seed, file.edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::sample_box;

    #[test]
    fn round_trip() {
        let c = sample_box(&KernelSpec::truncated(2.0), &BoxSpec::new(2, 9).unwrap(), 4).unwrap();
        let mut buf = Vec::new();
        write_configuration(&c, &mut buf).unwrap();
        assert_eq!(read_configuration(buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn rejects_other_versions_and_short_edges() {
        let bad = r#"{"format":"lrp-configuration","version":2,"d":1,"n":4,"origin":[0],"family":"exact_cube","beta":1.0,"seed":0,"edges":[]}"#;
        assert!(matches!(read_configuration(bad.as_bytes()), Err(Error::Format(_))));
        let short = r#"{"format":"lrp-configuration","version":1,"d":1,"n":4,"origin":[0],"family":"exact_cube","beta":1.0,"seed":0,"edges":[[0,1]]}"#;
        assert!(read_configuration(short.as_bytes()).is_err());
    }
}
