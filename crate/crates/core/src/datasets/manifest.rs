//! Flat text manifest, one record per line:
//!
//! ```text
//! # chunkvqa-manifest v1
//! name=KoNViD-1k
//! uri=videos/0001.y4m	mos=3.42	mos_std=0.61	resolution=960x540	duration=8.0
//! ```
//!
//! Fields are tab-separated `key=value` pairs. `uri`, `mos`, `resolution`
//! and `duration` are required; `mos_std` is optional and any other keys are
//! kept verbatim as extras. Relative uris resolve against the manifest's
//! directory. Blank lines and lines starting with `#` are ignored.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Result, VqaError};

pub const MANIFEST_HEADER: &str = "# chunkvqa-manifest v1";

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRecord {
    pub uri: String,
    pub mos: f64,
    pub mos_std: Option<f64>,
    pub width: usize,
    pub height: usize,
    pub duration: f64,
    pub extras: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub records: Vec<ManifestRecord>,
    /// Directory that relative uris are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn resolve(&self, uri: &str) -> PathBuf {
        let p = Path::new(uri);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn video_path(&self, index: usize) -> PathBuf {
        self.resolve(&self.records[index].uri)
    }

    pub fn mos(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mos).collect()
    }

    /// A manifest holding only `ids`, in the given order.
    pub fn subset(&self, ids: &[usize]) -> DatasetManifest {
        DatasetManifest {
            name: self.name.clone(),
            records: ids.iter().map(|&i| self.records[i].clone()).collect(),
            base_dir: self.base_dir.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.records.is_empty() {
            problems.push("manifest has no records".to_string());
        }
        let mut seen = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            if !seen.insert(r.uri.as_str()) {
                problems.push(format!("record {i}: duplicate uri '{}'", r.uri));
            }
            if !r.mos.is_finite() {
                problems.push(format!("record {i}: mos is not finite"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(VqaError::Validation(problems))
        }
    }
}

fn parse_resolution(v: &str) -> Option<(usize, usize)> {
    let (w, h) = v.split_once('x')?;
    let (w, h) = (w.parse().ok()?, h.parse().ok()?);
    (w > 0 && h > 0).then_some((w, h))
}

/// Parse manifest text. Every problem found is reported, not just the first.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<DatasetManifest> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MANIFEST_HEADER) {
        return Err(VqaError::Validation(vec![format!(
            "first line must be '{MANIFEST_HEADER}'"
        )]));
    }
    let mut name = None;
    let mut records = Vec::new();
    let mut problems = Vec::new();
    for (lineno, line) in lines.enumerate().map(|(i, l)| (i + 2, l)) {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(n) = line.strip_prefix("name=") {
            if !line.contains('\t') {
                name = Some(n.trim().to_string());
                continue;
            }
        }
        let record_no = records.len();
        let mut fields = BTreeMap::new();
        let mut bad = Vec::new();
        for field in line.split('\t') {
            match field.split_once('=') {
                Some((k, v)) => {
                    fields.insert(k.trim().to_string(), v.trim().to_string());
                }
                None => bad.push(format!("malformed field '{field}'")),
            }
        }
        let mut take = |k: &str| fields.remove(k);
        let uri = take("uri");
        let mos = take("mos");
        let mos_std = take("mos_std");
        let resolution = take("resolution");
        let duration = take("duration");
        for (key, val) in [("uri", &uri), ("mos", &mos), ("resolution", &resolution), ("duration", &duration)] {
            if val.is_none() {
                bad.push(format!("missing field '{key}'"));
            }
        }
        let mos_v = mos.as_deref().and_then(|m| match m.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                bad.push(format!("mos '{m}' is not a finite number"));
                None
            }
        });
        let std_v = mos_std.as_deref().and_then(|m| match m.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Some(v),
            _ => {
                bad.push(format!("mos_std '{m}' is not a non-negative number"));
                None
            }
        });
        let res_v = resolution.as_deref().and_then(|r| {
            let parsed = parse_resolution(r);
            if parsed.is_none() {
                bad.push(format!("resolution '{r}' is not WIDTHxHEIGHT"));
            }
            parsed
        });
        let dur_v = duration.as_deref().and_then(|d| match d.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Some(v),
            _ => {
                bad.push(format!("duration '{d}' is not a positive number"));
                None
            }
        });
        if bad.is_empty() {
            let (width, height) = res_v.expect("checked");
            records.push(ManifestRecord {
                uri: uri.expect("checked"),
                mos: mos_v.expect("checked"),
                mos_std: std_v,
                width,
                height,
                duration: dur_v.expect("checked"),
                extras: fields,
            });
        } else {
            for b in bad {
                problems.push(format!("record {record_no} (line {lineno}): {b}"));
            }
            // keep record numbering aligned with the file
            records.push(ManifestRecord {
                uri: String::new(),
                mos: f64::NAN,
                mos_std: None,
                width: 0,
                height: 0,
                duration: 0.0,
                extras: BTreeMap::new(),
            });
        }
    }
    let mut manifest = DatasetManifest {
        name: name.unwrap_or_else(|| "unnamed".into()),
        records,
        base_dir: base_dir.to_path_buf(),
    };
    let mut messages = problems;
    if messages.is_empty() {
        manifest.validate()?;
    } else {
        let mut seen = HashSet::new();
        for (i, r) in manifest.records.iter().enumerate() {
            if !r.uri.is_empty() && !seen.insert(r.uri.as_str()) {
                messages.push(format!("record {i}: duplicate uri '{}'", r.uri));
            }
        }
        manifest.records.clear();
        return Err(VqaError::Validation(messages));
    }
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| VqaError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, &base)
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{MANIFEST_HEADER}");
    let _ = writeln!(out, "name={}", manifest.name);
    for r in &manifest.records {
        let _ = write!(
            out,
            "uri={}\tmos={}\tresolution={}x{}\tduration={}",
            r.uri, r.mos, r.width, r.height, r.duration
        );
        if let Some(s) = r.mos_std {
            let _ = write!(out, "\tmos_std={s}");
        }
        for (k, v) in &r.extras {
            let _ = write!(out, "\t{k}={v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| VqaError::io(path, e))
}
