//! Sample files, CSV output and run manifests.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use armagg::forecast::Preset;
use armagg::ArmaModel;
use serde::Serialize;

/// Observations plus the optional preset read from a sample file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleFile {
    pub presample: Vec<f64>,
    pub preinnovations: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampleFile {
    /// Preset for `model`; a file without preset lines means a zero preset.
    pub fn preset(&self, model: &ArmaModel) -> Result<Preset> {
        if self.presample.is_empty() && self.preinnovations.is_empty() {
            return Ok(Preset::zeros(model));
        }
        Ok(Preset::new(model, self.presample.clone(), self.preinnovations.clone())?)
    }
}

fn parse_list(text: &str, line: usize) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .with_context(|| format!("line {line}: invalid number {v:?}"))
        })
        .collect()
}

/// Parses a sample file.
///
/// Values are separated by newlines or commas, oldest first. Lines
/// `# presample: a, b` and `# preinnovations: c` give the preset (oldest
/// first); other `#` lines are comments. A first line that is not numeric
/// is taken as a header.
pub fn parse_sample(text: &str) -> Result<SampleFile> {
    let mut out = SampleFile::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(comment) = s.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("presample:") {
                out.presample = parse_list(v, line)?;
            } else if let Some(v) = comment.strip_prefix("preinnovations:") {
                out.preinnovations = parse_list(v, line)?;
            }
            continue;
        }
        match parse_list(s, line) {
            Ok(v) => out.values.extend(v),
            Err(_) if out.values.is_empty() && s.chars().any(char::is_alphabetic) => continue,
            Err(e) => return Err(e),
        }
    }
    if out.values.is_empty() {
        bail!(armagg::Error::InvalidInput("sample file contains no values".into()));
    }
    Ok(out)
}

pub fn read_sample(path: &Path) -> Result<SampleFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_sample(&text).with_context(|| format!("parsing {}", path.display()))
}

/// 17 significant digits, enough to round-trip an f64.
pub fn fmt_f64(v: f64) -> String {
    armagg::predictors::fmt_f64(v)
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `out.csv` → `out.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}

/// Provenance written next to every report; contains no timestamps so that
/// reruns are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub model: &'a ArmaModel,
    #[serde(rename = "T")]
    pub t: usize,
    pub sigma2: f64,
    pub settings: &'a C,
    pub output: Option<String>,
}

impl<'a, C: Serialize> Manifest<'a, C> {
    pub fn new(command: &'a str, model: &'a ArmaModel, t: usize, settings: &'a C, output: Option<&Path>) -> Self {
        Self {
            tool: "armagg",
            version: env!("CARGO_PKG_VERSION"),
            command,
            model,
            t,
            sigma2: model.sigma2(),
            settings,
            output: output.map(|p| p.display().to_string()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_with_preset() {
        let s = parse_sample("# presample: 1.0\n# preinnovations: 0.2\nx\n0.8, 0.1\n-0.3\n").unwrap();
        assert_eq!(s.presample, vec![1.0]);
        assert_eq!(s.preinnovations, vec![0.2]);
        assert_eq!(s.values, vec![0.8, 0.1, -0.3]);
    }

    #[test]
    fn bad_line_is_reported() {
        let err = parse_sample("1.0\n2.0\nabc\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 3"));
    }

    #[test]
    fn manifest_name() {
        assert_eq!(manifest_path(Path::new("out/a.csv")), PathBuf::from("out/a.manifest.json"));
    }
}
