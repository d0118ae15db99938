//! Multi-channel record container and its CSV file format.
//!
//! ```text
//! # fs=1000
//! # channels=ecg,ppg,abp
//! # units=mV,a.u.,mmHg
//! # segments=rest:0:60000,drug:60000:120000
//! t,ecg,ppg,abp
//! 0,0.01,10.2,80.0
//! ```
//!
//! Segment bounds are sample indices, end exclusive. The `abp` column is
//! optional.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::SampledSignal;

/// Labeled half-open sample range.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Segment {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn contains(&self, i: usize) -> bool {
        i >= self.start && i < self.end
    }
}

/// Synchronized ECG, PPG, and optional ABP channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub ecg: SampledSignal<T>,
    pub ppg: SampledSignal<T>,
    pub abp: Option<SampledSignal<T>>,
    pub segments: Vec<Segment>,
}

const UNITS: [&str; 3] = ["mV", "a.u.", "mmHg"];

impl<T: Real> Record<T> {
    /// Builds a record after checking channel lengths, rates, and segments.
    pub fn new(
        ecg: SampledSignal<T>,
        ppg: SampledSignal<T>,
        abp: Option<SampledSignal<T>>,
        segments: Vec<Segment>,
    ) -> Result<Self> {
        let n = ecg.len();
        let same = |s: &SampledSignal<T>| s.len() == n && s.fs() == ecg.fs();
        if !same(&ppg) || abp.as_ref().is_some_and(|a| !same(a)) {
            return Err(Error::InvalidInput(
                "record channels differ in length or sampling rate".into(),
            ));
        }
        for s in &segments {
            if s.start >= s.end || s.end > n || s.label.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "segment '{}' {}..{} invalid for {n} samples",
                    s.label, s.start, s.end
                )));
            }
            if s.label.contains([',', ':', '\n']) {
                return Err(Error::InvalidInput(format!(
                    "segment label '{}' may not contain ',', ':' or newlines",
                    s.label
                )));
            }
        }
        Ok(Self {
            ecg,
            ppg,
            abp,
            segments,
        })
    }

    pub fn fs(&self) -> T {
        self.ecg.fs()
    }

    pub fn len(&self) -> usize {
        self.ecg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ecg.is_empty()
    }

    /// Converts every channel to another scalar type.
    pub fn cast<U: Real>(&self) -> Record<U> {
        Record {
            ecg: self.ecg.cast(),
            ppg: self.ppg.cast(),
            abp: self.abp.as_ref().map(|a| a.cast()),
            segments: self.segments.clone(),
        }
    }

    /// Serializes to the record CSV format.
    pub fn to_csv(&self) -> String {
        let fs = self.fs().as_f64();
        let has_abp = self.abp.is_some();
        let mut s = String::with_capacity(self.len() * 40);
        s.push_str(&format!("# fs={fs}\n"));
        if has_abp {
            s.push_str("# channels=ecg,ppg,abp\n");
            s.push_str(&format!("# units={}\n", UNITS.join(",")));
        } else {
            s.push_str("# channels=ecg,ppg\n");
            s.push_str(&format!("# units={}\n", UNITS[..2].join(",")));
        }
        if !self.segments.is_empty() {
            let segs: Vec<String> = self
                .segments
                .iter()
                .map(|g| format!("{}:{}:{}", g.label, g.start, g.end))
                .collect();
            s.push_str(&format!("# segments={}\n", segs.join(",")));
        }
        s.push_str(if has_abp {
            "t,ecg,ppg,abp\n"
        } else {
            "t,ecg,ppg\n"
        });
        let (e, p) = (self.ecg.samples(), self.ppg.samples());
        for i in 0..self.len() {
            let t = i as f64 / fs;
            match &self.abp {
                Some(a) => s.push_str(&format!(
                    "{t},{},{},{}\n",
                    e[i].as_f64(),
                    p[i].as_f64(),
                    a.samples()[i].as_f64()
                )),
                None => s.push_str(&format!("{t},{},{}\n", e[i].as_f64(), p[i].as_f64())),
            }
        }
        s
    }

    /// Writes the record atomically.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads and validates a record file.
pub fn parse_record(path: &Path) -> Result<Record<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_record_str(&text, path)
}

/// Parses record CSV text; `path` is used only in error messages.
pub fn parse_record_str(text: &str, path: &Path) -> Result<Record<f64>> {
    let mut fs: Option<(f64, usize)> = None;
    let mut declared: Option<Vec<String>> = None;
    let mut segments_raw: Option<(String, usize)> = None;
    let mut columns: Option<Vec<String>> = None;
    let mut cols_idx = [usize::MAX; 4];
    let mut data: [Vec<f64>; 4] = Default::default();
    let mut t0 = 0.0;
    let mut first_data_line = 0;

    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if columns.is_some() {
                continue;
            }
            let Some((k, v)) = rest.trim().split_once('=') else {
                continue;
            };
            match k.trim() {
                "fs" => {
                    let f: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(path, ln, format!("invalid fs '{}'", v.trim())))?;
                    if !(f.is_finite() && f > 0.0) {
                        return Err(parse_err(path, ln, "fs must be positive"));
                    }
                    fs = Some((f, ln));
                }
                "channels" => {
                    declared = Some(
                        v.split(',')
                            .map(|c| c.trim().to_ascii_lowercase())
                            .collect(),
                    )
                }
                "segments" => segments_raw = Some((v.trim().to_string(), ln)),
                _ => {}
            }
            continue;
        }
        let Some(cols) = &columns else {
            let names: Vec<String> = line
                .split(',')
                .map(|c| c.trim().to_ascii_lowercase())
                .collect();
            for (slot, want) in ["t", "ecg", "ppg", "abp"].iter().enumerate() {
                if let Some(p) = names.iter().position(|n| n == want) {
                    cols_idx[slot] = p;
                } else if slot < 3 {
                    return Err(parse_err(
                        path,
                        ln,
                        format!("missing channel column '{want}'"),
                    ));
                }
            }
            if let Some(decl) = &declared {
                for d in decl {
                    if !names.contains(d) {
                        return Err(parse_err(
                            path,
                            ln,
                            format!("declared channel '{d}' has no column"),
                        ));
                    }
                }
            }
            columns = Some(names);
            first_data_line = ln + 1;
            continue;
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(parse_err(
                path,
                ln,
                format!("expected {} fields, found {}", cols.len(), fields.len()),
            ));
        }
        for slot in 0..4 {
            if cols_idx[slot] == usize::MAX {
                continue;
            }
            let f = fields[cols_idx[slot]].trim();
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(path, ln, format!("invalid number '{f}'")))?;
            if !v.is_finite() {
                return Err(parse_err(path, ln, format!("non-finite value '{f}'")));
            }
            data[slot].push(v);
        }
        let (rate, _) = fs.ok_or_else(|| parse_err(path, ln, "missing '# fs=' header"))?;
        let i = data[0].len() - 1;
        if i == 0 {
            t0 = data[0][0];
        } else {
            let expect = t0 + i as f64 / rate;
            if (data[0][i] - expect).abs() > 1e-6 / rate {
                return Err(parse_err(
                    path,
                    ln,
                    format!(
                        "non-uniform timestamp {} (expected {expect} at spacing 1/{rate})",
                        data[0][i]
                    ),
                ));
            }
        }
    }
    let Some(_) = columns else {
        return Err(parse_err(
            path,
            text.lines().count().max(1),
            "missing column header row",
        ));
    };
    let (rate, _) = fs.ok_or_else(|| parse_err(path, 1, "missing '# fs=' header"))?;
    let n = data[0].len();
    if n < 2 {
        return Err(parse_err(
            path,
            first_data_line,
            format!("need at least 2 data rows, got {n}"),
        ));
    }
    let [_, ecg, ppg, abp] = data;
    let mk = |v: Vec<f64>, name: &str| SampledSignal::new(v, rate, name);
    let abp = (cols_idx[3] != usize::MAX)
        .then(|| mk(abp, "abp"))
        .transpose()?;
    let mut segments = Vec::new();
    if let Some((spec, ln)) = segments_raw {
        for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
            let bits: Vec<&str> = part.trim().rsplitn(3, ':').collect();
            if bits.len() != 3 {
                return Err(parse_err(
                    path,
                    ln,
                    format!("segment '{part}' is not name:start:end"),
                ));
            }
            let end: usize = bits[0]
                .parse()
                .map_err(|_| parse_err(path, ln, format!("bad segment end in '{part}'")))?;
            let start: usize = bits[1]
                .parse()
                .map_err(|_| parse_err(path, ln, format!("bad segment start in '{part}'")))?;
            if start >= end || end > n {
                return Err(parse_err(
                    path,
                    ln,
                    format!("segment '{part}' outside 0..{n}"),
                ));
            }
            segments.push(Segment {
                label: bits[2].to_string(),
                start,
                end,
            });
        }
    }
    Record::new(mk(ecg, "ecg")?, mk(ppg, "ppg")?, abp, segments)
}
