//! Dataset ingestion: scanning, splitting, augmentation, pruning and reports.

mod augment;
mod split;
mod stats;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::codec::FileKind;
use crate::error::{Error, Result};
use crate::format::EnvFormat;
use crate::skylabel::solar_position;

pub use augment::{augment, flip_horizontal, rotate, rotate_quarter, Augmentation};
pub use split::{split, Split, SplitSpec, Subset};
pub use stats::{
    compute_stats, mean_images, mean_skydome, stats_report, CacheEntry, StatsCache, StatsOutcome, StatsReport,
};

pub const DEFAULT_PATTERN: &str = "YYYYMMDD_HHMMSS";
pub const DEFAULT_MIN_ELEVATION: f64 = 10.0;

/// Dataset description, typically read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub root: PathBuf,
    pub pattern: String,
    pub latitude: f64,
    pub longitude: f64,
    pub format: Option<EnvFormat>,
    pub split: SplitSpec,
    pub exclusions: Option<PathBuf>,
    pub min_elevation: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            root: PathBuf::from("."),
            pattern: DEFAULT_PATTERN.to_string(),
            latitude: 0.0,
            longitude: 0.0,
            format: None,
            split: SplitSpec::default(),
            exclusions: None,
            min_elevation: DEFAULT_MIN_ELEVATION,
        }
    }
}

impl DatasetConfig {
    pub fn load(path: &Path) -> Result<DatasetConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: DatasetConfig = serde_json::from_str(&text)?;
        // relative roots are resolved against the config file's directory
        if cfg.root.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.root = dir.join(&cfg.root);
            }
        }
        if let Some(ex) = &cfg.exclusions {
            if ex.is_relative() {
                cfg.exclusions = path.parent().map(|d| d.join(ex));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latitude.abs() > 90.0 || self.longitude.abs() > 180.0 {
            return Err(Error::param("dataset latitude/longitude out of range"));
        }
        TimestampPattern::new(&self.pattern)?;
        self.split.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub path: PathBuf,
    pub timestamp: DateTime<Utc>,
    pub latitude: f64,
    pub longitude: f64,
    pub ev: Option<f64>,
    pub ii: Option<f64>,
    /// Why the sample was excluded, if it was.
    pub exclusion: Option<String>,
}

impl SampleRecord {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }

    pub fn file_name(&self) -> String {
        self.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    }
}

/// Filename timestamp template: `YYYY`, `MM`, `DD`, `HH`, `MM` (minutes once
/// an hour field has been seen) and `SS`; anything else matches literally.
#[derive(Debug, Clone)]
pub struct TimestampPattern {
    regex: Regex,
}

impl TimestampPattern {
    pub fn new(template: &str) -> Result<TimestampPattern> {
        let mut re = String::new();
        let mut rest = template;
        let mut seen_hour = false;
        let mut fields = HashSet::new();
        while !rest.is_empty() {
            let (token, group) = if rest.starts_with("YYYY") {
                ("YYYY", "(?P<year>\\d{4})")
            } else if rest.starts_with("MM") && !seen_hour {
                ("MM", "(?P<month>\\d{2})")
            } else if rest.starts_with("MM") {
                ("MM", "(?P<minute>\\d{2})")
            } else if rest.starts_with("DD") {
                ("DD", "(?P<day>\\d{2})")
            } else if rest.starts_with("HH") {
                seen_hour = true;
                ("HH", "(?P<hour>\\d{2})")
            } else if rest.starts_with("SS") {
                ("SS", "(?P<second>\\d{2})")
            } else {
                let c = rest.chars().next().expect("non-empty");
                re.push_str(&regex::escape(&c.to_string()));
                rest = &rest[c.len_utf8()..];
                continue;
            };
            if !fields.insert(group) {
                return Err(Error::param(format!("timestamp template repeats {token}: {template}")));
            }
            re.push_str(group);
            rest = &rest[token.len()..];
        }
        for need in ["year", "month", "day"] {
            if !re.contains(&format!("<{need}>")) {
                return Err(Error::param(format!("timestamp template lacks {need}: {template}")));
            }
        }
        let regex = Regex::new(&re).map_err(|e| Error::param(e.to_string()))?;
        Ok(TimestampPattern { regex })
    }

    /// Parses the first match in `name`; missing time fields default to 0.
    pub fn parse(&self, name: &str) -> Option<DateTime<Utc>> {
        let caps = self.regex.captures(name)?;
        let field = |n: &str| caps.name(n).map_or(Some(0), |m| m.as_str().parse::<u32>().ok());
        let date = NaiveDate::from_ymd_opt(field("year")? as i32, field("month")?, field("day")?)?;
        let time = NaiveTime::from_hms_opt(field("hour")?, field("minute")?, field("second")?)?;
        Some(NaiveDateTime::new(date, time).and_utc())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub records: Vec<SampleRecord>,
    /// One line per skipped image file.
    pub warnings: Vec<String>,
}

fn is_image(path: &Path) -> bool {
    matches!(FileKind::from_path(path), Some(FileKind::Pfm | FileKind::Rgbe))
}

/// Collects every image file under `root` whose name carries a timestamp.
/// Records are ordered by timestamp, then path.
pub fn scan(root: &Path, pattern: &str, latitude: f64, longitude: f64) -> Result<ScanResult> {
    let pat = TimestampPattern::new(pattern)?;
    fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                warnings.push(format!("unreadable entry: {e}"));
                continue;
            }
        };
        let path = entry.path();
        if !entry.file_type().is_file() || !is_image(path) {
            continue;
        }
        let name = path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
        match pat.parse(&name) {
            Some(timestamp) => records.push(SampleRecord {
                path: path.to_path_buf(),
                timestamp,
                latitude,
                longitude,
                ev: None,
                ii: None,
                exclusion: None,
            }),
            None => warnings.push(format!("{}: no timestamp matching {pattern}", path.display())),
        }
    }
    records.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.path.cmp(&b.path)));
    Ok(ScanResult { records, warnings })
}

/// Reads an exclusion list: one file name or path per line, `#` comments.
pub fn read_exclusions(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    pub kept: Vec<SampleRecord>,
    /// Dropped records with `exclusion` set to `"manual"` or `"elevation"`.
    pub dropped: Vec<SampleRecord>,
}

/// Drops manually excluded samples and those taken with the sun below
/// `min_elevation` degrees.
pub fn prune(records: &[SampleRecord], min_elevation: f64, exclusions: &HashSet<String>) -> Result<Pruned> {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for r in records {
        let listed = exclusions.contains(&r.file_name()) || exclusions.contains(&r.path.to_string_lossy().into_owned());
        let reason = if listed {
            Some("manual")
        } else if solar_position(r.timestamp, r.latitude, r.longitude)?.elevation < min_elevation {
            Some("elevation")
        } else {
            None
        };
        match reason {
            Some(why) => dropped.push(SampleRecord {
                exclusion: Some(why.to_string()),
                ..r.clone()
            }),
            None => kept.push(r.clone()),
        }
    }
    Ok(Pruned { kept, dropped })
}
