use std::path::Path;

use serde::Deserialize;

use crate::Failure;

/// Keys accepted in a `--config` file. Command-line flags win over these.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub max_iter: Option<usize>,
    pub epsilon_grid_step: Option<f64>,
    pub seed: Option<u64>,
    /// `"9-20"` or 24 characters of `0`/`1`.
    pub schedule: Option<String>,
    /// Comma-separated view names.
    pub views: Option<String>,
    pub window_seconds: Option<i64>,
    pub rate_search: Option<bool>,
    pub stop_on_negative_phi: Option<bool>,
    pub sample_unlabeled: Option<bool>,
    /// Seconds east of UTC for the schedule's hours.
    pub utc_offset: Option<i64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1).unwrap_or(1);
            Failure::Usage(format!("{}:{line}: {}", path.display(), e.message()))
        })
    }
}
