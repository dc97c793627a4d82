//! Per-sample exposure statistics, their cache, reports and mean skydomes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use chrono::Timelike;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::augment::{augment, Augmentation};
use super::split::{Split, Subset};
use super::SampleRecord;
use crate::codec;
use crate::error::{Error, Result};
use crate::format::{solid_angles, EnvFormat};
use crate::image::EnvMap;
use crate::metrics::format_g;
use crate::radiometry::{exposure_value, integrated_illumination};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub size: u64,
    pub mtime_ns: u64,
    pub sha256: String,
    pub ev: f64,
    pub ii: f64,
}

/// EV and integrated illumination per file, keyed by path. Entries are
/// reused when size and mtime match, or failing that when the content hash
/// matches.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsCache {
    pub entries: BTreeMap<String, CacheEntry>,
}

impl StatsCache {
    /// Loads a cache file; a missing file yields an empty cache.
    pub fn load(path: &Path) -> Result<StatsCache> {
        match fs::read_to_string(path) {
            Ok(text) => Ok(serde_json::from_str(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(StatsCache::default()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StatsOutcome {
    /// Size and mtime matched the cache.
    Cached,
    /// Metadata changed but the content hash matched.
    Rehashed,
    Computed,
    Failed(String),
}

fn file_meta(path: &Path) -> Result<(u64, u64)> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let mtime = meta
        .modified()
        .ok()
        .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
        .map_or(0, |d| d.as_nanos() as u64);
    Ok((meta.len(), mtime))
}

fn file_hash(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn measure(path: &Path, format: Option<EnvFormat>) -> Result<(f64, f64)> {
    let img = codec::load(path, format)?;
    let omega = solid_angles(img.format(), img.width(), img.height())?;
    Ok((exposure_value(&img)?, integrated_illumination(&img, &omega, None)?))
}

fn stats_for(path: &Path, format: Option<EnvFormat>, cached: Option<&CacheEntry>) -> Result<(CacheEntry, StatsOutcome)> {
    let (size, mtime_ns) = file_meta(path)?;
    if let Some(c) = cached {
        if c.size == size && c.mtime_ns == mtime_ns {
            return Ok((c.clone(), StatsOutcome::Cached));
        }
    }
    let sha256 = file_hash(path)?;
    if let Some(c) = cached {
        if c.sha256 == sha256 {
            let entry = CacheEntry {
                size,
                mtime_ns,
                ..c.clone()
            };
            return Ok((entry, StatsOutcome::Rehashed));
        }
    }
    let (ev, ii) = measure(path, format)?;
    Ok((
        CacheEntry {
            size,
            mtime_ns,
            sha256,
            ev,
            ii,
        },
        StatsOutcome::Computed,
    ))
}

/// Fills `ev` and `ii` on every readable record, in parallel per file.
/// Failed records keep `None` and report the error in their outcome.
pub fn compute_stats(
    records: &mut [SampleRecord],
    format: Option<EnvFormat>,
    cache: &mut StatsCache,
) -> Vec<StatsOutcome> {
    let results: Vec<Result<(CacheEntry, StatsOutcome)>> = records
        .par_iter()
        .map(|r| stats_for(&r.path, format, cache.entries.get(&key(&r.path))))
        .collect();
    let mut outcomes = Vec::with_capacity(records.len());
    for (r, res) in records.iter_mut().zip(results) {
        match res {
            Ok((entry, outcome)) => {
                r.ev = Some(entry.ev);
                r.ii = Some(entry.ii);
                cache.entries.insert(key(&r.path), entry);
                outcomes.push(outcome);
            }
            Err(e) => {
                r.ev = None;
                r.ii = None;
                outcomes.push(StatsOutcome::Failed(e.to_string()));
            }
        }
    }
    outcomes
}

fn key(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub timestamp: String,
    pub path: String,
    pub ev: f64,
    pub ii: f64,
    pub subset: Option<Subset>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleBin {
    pub hour: u32,
    pub count: usize,
    pub mean_ev: f64,
    pub mean_ii: f64,
}

/// Per-sample rows sorted by timestamp, plus summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub rows: Vec<ReportRow>,
    pub unreadable: Vec<(String, String)>,
    pub summary: Vec<(String, f64)>,
    /// Means per UTC hour of capture, for hours with samples.
    pub day_cycle: Vec<CycleBin>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Builds the report. Records without statistics are listed as unreadable
/// with `reasons` (same order as `records`) when given. Paths are shown
/// relative to `root` when possible.
pub fn stats_report(
    records: &[SampleRecord],
    reasons: Option<&[StatsOutcome]>,
    root: Option<&Path>,
    split: Option<&Split>,
) -> StatsReport {
    let show = |p: &Path| -> String {
        let rel = root.and_then(|r| p.strip_prefix(r).ok()).unwrap_or(p);
        rel.to_string_lossy().replace('\\', "/")
    };
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|a, b| {
        let (ra, rb) = (&records[*a], &records[*b]);
        ra.timestamp.cmp(&rb.timestamp).then_with(|| ra.path.cmp(&rb.path))
    });
    let mut rows = Vec::new();
    let mut unreadable = Vec::new();
    for i in order {
        let r = &records[i];
        match (r.ev, r.ii) {
            (Some(ev), Some(ii)) => rows.push(ReportRow {
                timestamp: r.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
                path: show(&r.path),
                ev,
                ii,
                subset: split.and_then(|s| s.subset_of(&r.path)),
            }),
            _ => {
                let why = match reasons.and_then(|o| o.get(i)) {
                    Some(StatsOutcome::Failed(msg)) => msg.clone(),
                    _ => "no statistics".to_string(),
                };
                unreadable.push((show(&r.path), why));
            }
        }
    }

    let mut summary = vec![
        ("samples".to_string(), rows.len() as f64),
        ("unreadable".to_string(), unreadable.len() as f64),
        ("mean_ev".to_string(), mean(rows.iter().map(|r| r.ev))),
        ("mean_ii".to_string(), mean(rows.iter().map(|r| r.ii))),
    ];
    if split.is_some() {
        for s in Subset::ALL {
            let sub = || rows.iter().filter(move |r| r.subset == Some(s));
            summary.push((format!("samples_{}", s.name()), sub().count() as f64));
            summary.push((format!("mean_ev_{}", s.name()), mean(sub().map(|r| r.ev))));
            summary.push((format!("mean_ii_{}", s.name()), mean(sub().map(|r| r.ii))));
        }
    }

    let mut bins: BTreeMap<u32, Vec<&ReportRow>> = BTreeMap::new();
    for (row, rec) in rows.iter().zip(records_sorted(records)) {
        bins.entry(rec.timestamp.hour()).or_default().push(row);
    }
    let day_cycle = bins
        .into_iter()
        .map(|(hour, rs)| CycleBin {
            hour,
            count: rs.len(),
            mean_ev: mean(rs.iter().map(|r| r.ev)),
            mean_ii: mean(rs.iter().map(|r| r.ii)),
        })
        .collect();

    StatsReport {
        rows,
        unreadable,
        summary,
        day_cycle,
    }
}

/// Readable records in report order.
fn records_sorted(records: &[SampleRecord]) -> Vec<&SampleRecord> {
    let mut v: Vec<&SampleRecord> = records.iter().filter(|r| r.ev.is_some() && r.ii.is_some()).collect();
    v.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.path.cmp(&b.path)));
    v
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn json_num(v: f64) -> Value {
    if v.is_finite() {
        let rounded: f64 = format_g(v).parse().unwrap_or(v);
        json!(rounded)
    } else {
        json!(format_g(v))
    }
}

impl StatsReport {
    pub fn to_csv(&self, meta: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in meta {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        for (k, v) in &self.summary {
            out.push_str(&format!("# {k}: {}\n", format_g(*v)));
        }
        for (p, why) in &self.unreadable {
            out.push_str(&format!("# unreadable_file: {p}: {}\n", why.replace('\n', " ")));
        }
        for b in &self.day_cycle {
            out.push_str(&format!(
                "# cycle_hour_{:02}: count={} mean_ev={} mean_ii={}\n",
                b.hour,
                b.count,
                format_g(b.mean_ev),
                format_g(b.mean_ii)
            ));
        }
        let with_subset = self.rows.iter().any(|r| r.subset.is_some());
        out.push_str(if with_subset {
            "timestamp,path,ev,ii,subset\n"
        } else {
            "timestamp,path,ev,ii\n"
        });
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}",
                r.timestamp,
                csv_field(&r.path),
                format_g(r.ev),
                format_g(r.ii)
            ));
            if with_subset {
                out.push(',');
                out.push_str(r.subset.map_or("", Subset::name));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, meta: &[(String, String)]) -> String {
        let meta: serde_json::Map<String, Value> = meta.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let summary: serde_json::Map<String, Value> =
            self.summary.iter().map(|(k, v)| (k.clone(), json_num(*v))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut o = json!({
                    "timestamp": r.timestamp,
                    "path": r.path,
                    "ev": json_num(r.ev),
                    "ii": json_num(r.ii),
                });
                if let Some(s) = r.subset {
                    o["subset"] = json!(s.name());
                }
                o
            })
            .collect();
        let cycle: Vec<Value> = self
            .day_cycle
            .iter()
            .map(|b| json!({"hour": b.hour, "count": b.count, "mean_ev": json_num(b.mean_ev), "mean_ii": json_num(b.mean_ii)}))
            .collect();
        let unreadable: Vec<Value> = self
            .unreadable
            .iter()
            .map(|(p, why)| json!({"path": p, "reason": why}))
            .collect();
        let doc = json!({
            "meta": meta,
            "summary": summary,
            "unreadable": unreadable,
            "day_cycle": cycle,
            "rows": rows,
        });
        serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
    }
}

/// Per-pixel mean accumulated in the given order.
pub fn mean_images(images: &[EnvMap]) -> Result<EnvMap> {
    let first = images.first().ok_or_else(|| Error::param("no images to average"))?;
    let mut acc = vec![[0.0f64; 3]; first.len()];
    for img in images {
        if img.grid() != first.grid() {
            return Err(Error::DimensionMismatch(format!(
                "{} {}x{} vs {} {}x{}",
                img.format(),
                img.width(),
                img.height(),
                first.format(),
                first.width(),
                first.height()
            )));
        }
        img.require_linear()?;
        for (a, p) in acc.iter_mut().zip(img.pixels()) {
            for c in 0..3 {
                a[c] += p[c] as f64;
            }
        }
    }
    let n = images.len() as f64;
    let pixels = acc.iter().map(|a| a.map(|v| (v / n) as f32)).collect();
    let out = EnvMap::new(first.format(), first.width(), first.height(), pixels)?;
    match first.valid_mask_raw() {
        Some(_) => out.with_valid_mask(first.valid_mask()),
        None => Ok(out),
    }
}

/// Mean of the files at `paths`, visited in sorted path order. With
/// `augmented`, each SkyAngular input contributes its eight dihedral variants.
pub fn mean_skydome(paths: &[PathBuf], format: Option<EnvFormat>, augmented: bool) -> Result<EnvMap> {
    let mut sorted: Vec<&PathBuf> = paths.iter().collect();
    sorted.sort();
    sorted.dedup();
    let mut acc: Option<(EnvMap, Vec<[f64; 3]>, usize)> = None;
    for p in sorted {
        let img = codec::load(p, format)?;
        let variants = if augmented {
            augment(&img, &Augmentation::dihedral())?
        } else {
            vec![img]
        };
        for v in variants {
            let (first, sums, count) = acc.get_or_insert_with(|| (v.clone(), vec![[0.0; 3]; v.len()], 0));
            if v.grid() != first.grid() {
                return Err(Error::DimensionMismatch(format!(
                    "{} is {} {}x{}, expected {} {}x{}",
                    p.display(),
                    v.format(),
                    v.width(),
                    v.height(),
                    first.format(),
                    first.width(),
                    first.height()
                )));
            }
            for (a, px) in sums.iter_mut().zip(v.pixels()) {
                for c in 0..3 {
                    a[c] += px[c] as f64;
                }
            }
            *count += 1;
        }
    }
    let (first, sums, count) = acc.ok_or_else(|| Error::param("no images to average"))?;
    let pixels = sums.iter().map(|a| a.map(|v| (v / count as f64) as f32)).collect();
    EnvMap::new(first.format(), first.width(), first.height(), pixels)
}

#[cfg(test)]
mod tests {
    use chrono::{TimeZone, Utc};

    use super::*;

    fn write(dir: &Path, name: &str, img: &EnvMap) -> PathBuf {
        let p = dir.join(name);
        codec::save(&p, img).unwrap();
        p
    }

    fn rec(path: PathBuf, h: u32) -> SampleRecord {
        SampleRecord {
            path,
            timestamp: Utc.with_ymd_and_hms(2020, 5, 1, h, 0, 0).unwrap(),
            latitude: 0.0,
            longitude: 0.0,
            ev: None,
            ii: None,
            exclusion: None,
        }
    }

    #[test]
    fn cache_hits_and_hash_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let img = EnvMap::constant(EnvFormat::LatLong, 16, 8, [2.0; 3]).unwrap();
        let p = write(dir.path(), "a.pfm", &img);
        let mut recs = vec![rec(p.clone(), 12), rec(dir.path().join("missing.pfm"), 13)];
        let mut cache = StatsCache::default();
        let out = compute_stats(&mut recs, None, &mut cache);
        assert_eq!(out[0], StatsOutcome::Computed);
        assert!(matches!(out[1], StatsOutcome::Failed(_)));
        assert_eq!(recs[0].ev, Some(0.0));
        assert!((recs[0].ii.unwrap() - 4.0 * std::f64::consts::PI * 2.0).abs() < 0.01 * 8.0 * std::f64::consts::PI);
        assert_eq!(compute_stats(&mut recs, None, &mut cache)[0], StatsOutcome::Cached);
        cache.entries.get_mut(&key(&p)).unwrap().mtime_ns += 1;
        assert_eq!(compute_stats(&mut recs, None, &mut cache)[0], StatsOutcome::Rehashed);
        let cpath = dir.path().join("cache.json");
        cache.save(&cpath).unwrap();
        assert_eq!(StatsCache::load(&cpath).unwrap(), cache);
        assert!(StatsCache::load(&dir.path().join("none.json")).unwrap().entries.is_empty());
    }

    #[test]
    fn report_rows_sorted_and_flagged() {
        let mut recs = vec![rec(PathBuf::from("/d/b.pfm"), 15), rec(PathBuf::from("/d/a.pfm"), 9), rec(PathBuf::from("/d/c.pfm"), 11)];
        recs[0].ev = Some(10.0);
        recs[0].ii = Some(3.0);
        recs[1].ev = Some(12.0);
        recs[1].ii = Some(5.0);
        let outcomes = vec![StatsOutcome::Computed, StatsOutcome::Computed, StatsOutcome::Failed("bad magic".into())];
        let rep = stats_report(&recs, Some(&outcomes), Some(Path::new("/d")), None);
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.rows[0].path, "a.pfm");
        assert_eq!(rep.unreadable, vec![("c.pfm".to_string(), "bad magic".to_string())]);
        assert_eq!(rep.summary[2], ("mean_ev".to_string(), 11.0));
        assert_eq!(rep.day_cycle.len(), 2);
        assert_eq!(rep.day_cycle[0].hour, 9);
        let csv = rep.to_csv(&[]);
        assert!(csv.contains("timestamp,path,ev,ii\n2020-05-01T09:00:00Z,a.pfm,12,5\n"));
        let json: Value = serde_json::from_str(&rep.to_json(&[])).unwrap();
        assert_eq!(json["rows"][1]["ev"], 10.0);
        assert_eq!(json["summary"]["unreadable"], 1.0);
    }

    #[test]
    fn means_of_images() {
        let a = EnvMap::constant(EnvFormat::SkyLatLong, 16, 4, [1.0, 2.0, 3.0]).unwrap();
        let b = EnvMap::constant(EnvFormat::SkyLatLong, 16, 4, [3.0, 2.0, 1.0]).unwrap();
        let m = mean_images(&[a.clone(), b]).unwrap();
        assert_eq!(m.pixel(3, 2), [2.0, 2.0, 2.0]);
        assert_eq!(mean_images(&[a.clone(), a.clone(), a.clone()]).unwrap(), a);
        let c = EnvMap::constant(EnvFormat::SkyLatLong, 8, 2, [1.0; 3]).unwrap();
        assert!(mean_images(&[a, c]).is_err());
    }

    #[test]
    fn mean_skydome_ignores_order() {
        let dir = tempfile::tempdir().unwrap();
        let paths: Vec<PathBuf> = (0..4)
            .map(|k| {
                let img = EnvMap::from_fn(EnvFormat::SkyAngular, 16, 16, |x, y| {
                    [0.1 * k as f32 + x as f32 * 0.013, 0.7 / (1 + k) as f32, y as f32 * 0.31]
                })
                .unwrap();
                write(dir.path(), &format!("{k}.pfm"), &img)
            })
            .collect();
        let a = mean_skydome(&paths, None, false).unwrap();
        let rev: Vec<PathBuf> = paths.iter().rev().cloned().collect();
        assert_eq!(mean_skydome(&rev, None, false).unwrap(), a);
        let aug = mean_skydome(&paths, None, true).unwrap();
        // the augmented mean is symmetric under a quarter turn
        assert_eq!(super::super::rotate_quarter(&aug, 1).unwrap().pixels(), aug.pixels());
        let other = write(dir.path(), "z.pfm", &EnvMap::constant(EnvFormat::SkyAngular, 8, 8, [1.0; 3]).unwrap());
        assert!(mean_skydome(&[paths[0].clone(), other], None, false).is_err());
    }
}
