//! Network ingestion: a subset of the Hugin NET text format and a native
//! JSON format (`.bn.json`).

mod native;
mod net;

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::BayesianNetwork;

pub use native::{parse_native, parse_native_document, serialize_native};
pub use net::{parse_net, parse_net_document};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Net,
    NativeJson,
}

impl SourceFormat {
    /// `.net` is NET; anything ending in `.json` is native JSON.
    pub fn from_path(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_str()?;
        if name.ends_with(".net") {
            Some(SourceFormat::Net)
        } else if name.ends_with(".json") {
            Some(SourceFormat::NativeJson)
        } else {
            None
        }
    }
}

/// A parsed network plus what the source told us beyond the network itself.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDocument {
    pub format: SourceFormat,
    pub network: BayesianNetwork,
    /// Declaration site `(line, col)` of each variable, by name.
    pub locations: BTreeMap<String, (usize, usize)>,
    /// State labels per variable id; numeric labels when the source has none.
    pub state_labels: Vec<Vec<String>>,
}

pub fn parse_document(text: &str, format: SourceFormat) -> Result<NetworkDocument> {
    match format {
        SourceFormat::Net => parse_net_document(text),
        SourceFormat::NativeJson => parse_native_document(text),
    }
}

pub fn load_document(path: &Path) -> Result<NetworkDocument> {
    let format = SourceFormat::from_path(path)
        .ok_or_else(|| Error::UnsupportedFeature(format!("file extension of {}", path.display())))?;
    let bytes = std::fs::read(path)?;
    parse_document(&String::from_utf8_lossy(&bytes), format)
}

pub(crate) fn numeric_labels(net: &BayesianNetwork) -> Vec<Vec<String>> {
    net.variables().iter().map(|v| (0..v.cardinality).map(|s| s.to_string()).collect()).collect()
}
