//! CSV and JSON result files, and readers for the tabular ones.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bp::BpComponent;
use crate::error::{Error, Result};
use crate::features::{catalog, FeatureVector, FEATURE_COUNT};
use crate::fiducials::Fiducial;
use crate::metrics::{AssociationResult, AssociationScores};
use crate::pipeline::{Analysis, PipelineResult, PipelineSummary};
use crate::ranking::{top_k, RankEntry, RankingTable};
use crate::record::write_atomic;
use crate::scalar::Real;
use crate::segmentation::Beat;

/// Header of `association.csv`.
pub const ASSOCIATION_HEADER: &str =
    "feature_index,feature_name,component,cc,cse_raw,cse_norm,mi_raw,mi_norm,n_beats";

const BEAT_COLUMNS: [&str; 6] = ["beat", "r_peak", "onset", "next_onset", "rri", "plausible"];

/// Contents of `ranking.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub top_k: usize,
    pub n_beats: usize,
    pub rankings: Vec<RankingTable<f64>>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct SummaryFile<'a> {
    fs: f64,
    beats_extracted: usize,
    #[serde(flatten)]
    summary: &'a PipelineSummary,
    association_cells: usize,
    segments: Vec<SegmentSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SegmentSummary {
    label: String,
    start: usize,
    end: usize,
    n_beats: usize,
    analyzed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    notice: Option<String>,
}

/// One row of `features.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub beat: Beat<f64>,
    pub plausible: bool,
    pub features: FeatureVector<f64>,
}

/// Shortest representation that parses back to the same `f64`.
fn num<T: Real>(v: T) -> String {
    format!("{:?}", v.as_f64())
}

fn opt<T: Real>(v: Option<T>) -> String {
    v.map(num).unwrap_or_default()
}

fn safe_label(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Per-beat beat timing, plausibility, 222 feature columns, and a missing
/// mask (`1` marks a missing value).
pub fn features_csv<T: Real>(result: &PipelineResult<T>) -> String {
    let mut out = BEAT_COLUMNS.join(",");
    for spec in catalog().iter() {
        out.push(',');
        out.push_str(&spec.key);
    }
    out.push_str(",mask\n");
    for (i, b) in result.beats.iter().enumerate() {
        let beat = &b.beat;
        let _ = write!(
            out,
            "{i},{},{},{},{},{}",
            beat.r_peak,
            beat.onset,
            beat.next_onset,
            num(beat.rri),
            u8::from(beat.is_plausible())
        );
        for v in b.features.values() {
            out.push(',');
            out.push_str(&opt(*v));
        }
        out.push(',');
        out.extend(
            b.features
                .missing_mask()
                .iter()
                .map(|m| if *m { '1' } else { '0' }),
        );
        out.push('\n');
    }
    out
}

fn fiducials_csv<T: Real>(result: &PipelineResult<T>) -> String {
    let mut out = String::from("beat");
    for f in Fiducial::ALL {
        let _ = write!(out, ",{}", f.to_string().to_lowercase());
    }
    out.push('\n');
    for (i, b) in result.beats.iter().enumerate() {
        let _ = write!(out, "{i}");
        for f in Fiducial::ALL {
            out.push(',');
            if let Some(p) = b.fiducials.get(f) {
                let _ = write!(out, "{p}");
            }
        }
        out.push('\n');
    }
    out
}

fn bp_csv<T: Real>(result: &PipelineResult<T>) -> String {
    let mut out = String::from("beat,sbp,dbp,mbp,pp\n");
    for (i, b) in result.beats.iter().enumerate() {
        let _ = write!(out, "{i}");
        for c in BpComponent::ALL {
            out.push(',');
            out.push_str(&opt(b.bp.map(|p| p.component(c))));
        }
        out.push('\n');
    }
    out
}

/// One row per populated (feature, component) cell.
pub fn association_csv<T: Real>(assoc: Option<&AssociationResult<T>>) -> String {
    let mut out = format!("{ASSOCIATION_HEADER}\n");
    let cat = catalog();
    for (k, c, s) in assoc.into_iter().flat_map(|a| a.iter()) {
        let name = cat.get(k).map(|f| f.name.as_str()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{k},\"{}\",{c},{},{},{},{},{},{}",
            name.replace('"', "\"\""),
            num(s.cc),
            num(s.cse_raw),
            num(s.cse_norm),
            num(s.mi_raw),
            num(s.mi_norm),
            s.n_beats
        );
    }
    out
}

fn plot_csv<T: Real>(assoc: Option<&AssociationResult<T>>, c: BpComponent) -> String {
    let mut out = String::from("feature_index,cc,cse_norm,mi_norm\n");
    for k in 1..=FEATURE_COUNT {
        let s = assoc.and_then(|a| a.get(k, c));
        let _ = writeln!(
            out,
            "{k},{},{},{}",
            opt(s.map(|s| s.cc)),
            opt(s.map(|s| s.cse_norm)),
            opt(s.map(|s| s.mi_norm))
        );
    }
    out
}

fn to_f64_table<T: Real>(t: &RankingTable<T>) -> RankingTable<f64> {
    RankingTable {
        component: t.component,
        entries: t
            .entries
            .iter()
            .map(|e| RankEntry {
                feature_index: e.feature_index,
                name: e.name.clone(),
                cc: e.cc.as_f64(),
                cse_norm: e.cse_norm.as_f64(),
                mi_norm: e.mi_norm.as_f64(),
                score: e.score.as_f64(),
            })
            .collect(),
        diagnostics: t.diagnostics.clone(),
    }
}

/// Top-`k` rankings per component.
pub fn ranking_report<T: Real>(analysis: Option<&Analysis<T>>, k: usize) -> Result<RankingReport> {
    let rankings = match analysis {
        Some(a) => a
            .rankings
            .iter()
            .map(|t| top_k(t, k).map(|t| to_f64_table(&t)))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    Ok(RankingReport {
        top_k: k,
        n_beats: analysis.map_or(0, |a| a.n_beats),
        rankings,
    })
}

fn json<S: Serialize>(value: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize results: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn emit_analysis<T: Real>(
    dir: &Path,
    analysis: Option<&Analysis<T>>,
    k: usize,
    plots: bool,
) -> Result<()> {
    let assoc = analysis.map(|a| &a.association);
    write_file(&dir.join("association.csv"), &association_csv(assoc))?;
    write_file(
        &dir.join("ranking.json"),
        &json(&ranking_report(analysis, k)?)?,
    )?;
    if plots {
        let plot_dir = dir.join("plotdata");
        create_dir(&plot_dir)?;
        for c in BpComponent::ALL {
            let name = format!("{}.csv", c.code().to_lowercase());
            write_file(&plot_dir.join(name), &plot_csv(assoc, c))?;
        }
    }
    Ok(())
}

fn emit_summary<T: Real>(dir: &Path, result: &PipelineResult<T>) -> Result<()> {
    let file = SummaryFile {
        fs: result.fs,
        beats_extracted: result.beats.len(),
        summary: &result.summary,
        association_cells: result
            .analysis
            .as_ref()
            .map_or(0, |a| a.association.populated()),
        segments: result
            .segments
            .iter()
            .map(|s| SegmentSummary {
                label: s.segment.label.clone(),
                start: s.segment.start,
                end: s.segment.end,
                n_beats: s.n_beats,
                analyzed: s.analysis.is_some(),
                notice: s.notice.clone(),
            })
            .collect(),
    };
    write_file(&dir.join("summary.json"), &json(&file)?)
}

/// Writes per-beat outputs only: `features.csv`, `fiducials.csv`, `bp.csv`,
/// and `summary.json`.
pub fn emit_beats<T: Real>(result: &PipelineResult<T>, outdir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(outdir)?;
    write_file(&outdir.join("features.csv"), &features_csv(result))?;
    write_file(&outdir.join("fiducials.csv"), &fiducials_csv(result))?;
    write_file(&outdir.join("bp.csv"), &bp_csv(result))?;
    emit_summary(outdir, result)?;
    Ok(["features.csv", "fiducials.csv", "bp.csv", "summary.json"]
        .iter()
        .map(|f| outdir.join(f))
        .collect())
}

/// Writes every result file, including association, rankings, plot data,
/// and per-segment subdirectories.
pub fn emit_results<T: Real>(result: &PipelineResult<T>, outdir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = emit_beats(result, outdir)?;
    emit_analysis(outdir, result.analysis.as_ref(), result.top_k, true)?;
    written.extend(
        ["association.csv", "ranking.json", "plotdata"]
            .iter()
            .map(|f| outdir.join(f)),
    );
    for seg in &result.segments {
        let dir = outdir.join("segments").join(safe_label(&seg.segment.label));
        create_dir(&dir)?;
        emit_analysis(&dir, seg.analysis.as_ref(), result.top_k, false)?;
        written.push(dir);
    }
    Ok(written)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<F: std::str::FromStr>(path: &Path, line: usize, name: &str, s: &str) -> Result<F> {
    s.parse()
        .map_err(|_| parse_err(path, line, format!("invalid {name} '{s}'")))
}

/// Reads `features.csv` back.
pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?
        .1;
    let expected = BEAT_COLUMNS.len() + FEATURE_COUNT + 1;
    if header.split(',').count() != expected {
        return Err(parse_err(path, 1, format!("expected {expected} columns")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != expected {
            return Err(parse_err(
                path,
                n,
                format!("expected {expected} fields, found {}", cols.len()),
            ));
        }
        let beat = Beat {
            r_peak: field(path, n, "r_peak", cols[1])?,
            onset: field(path, n, "onset", cols[2])?,
            next_onset: field(path, n, "next_onset", cols[3])?,
            rri: field(path, n, "rri", cols[4])?,
        };
        let plausible = match cols[5] {
            "1" => true,
            "0" => false,
            other => {
                return Err(parse_err(
                    path,
                    n,
                    format!("invalid plausible flag '{other}'"),
                ))
            }
        };
        let values = cols[6..6 + FEATURE_COUNT]
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    field(path, n, "feature value", s).map(Some)
                }
            })
            .collect::<Result<Vec<Option<f64>>>>()?;
        let features = FeatureVector::from_values(values)
            .ok_or_else(|| parse_err(path, n, "wrong feature count"))?;
        rows.push(FeatureRow {
            beat,
            plausible,
            features,
        });
    }
    Ok(rows)
}

/// Splits one CSV line, honouring double-quoted fields.
fn split_quoted(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

/// Reads `association.csv` back into a full 222-row table.
pub fn read_association_csv(path: &Path) -> Result<AssociationResult<f64>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == ASSOCIATION_HEADER => {}
        _ => return Err(parse_err(path, 1, "missing association header")),
    }
    let mut cells: Vec<[Option<AssociationScores<f64>>; 4]> = vec![[None; 4]; FEATURE_COUNT];
    for (i, line) in lines {
        let n = i + 1;
        let cols = split_quoted(line);
        if cols.len() != 9 {
            return Err(parse_err(
                path,
                n,
                format!("expected 9 fields, found {}", cols.len()),
            ));
        }
        let k: usize = field(path, n, "feature_index", &cols[0])?;
        if !(1..=FEATURE_COUNT).contains(&k) {
            return Err(parse_err(
                path,
                n,
                format!("feature index {k} out of range"),
            ));
        }
        let c = BpComponent::parse(&cols[2])
            .ok_or_else(|| parse_err(path, n, format!("unknown component '{}'", cols[2])))?;
        cells[k - 1][c as usize] = Some(AssociationScores {
            cc: field(path, n, "cc", &cols[3])?,
            cse_raw: field(path, n, "cse_raw", &cols[4])?,
            cse_norm: field(path, n, "cse_norm", &cols[5])?,
            mi_raw: field(path, n, "mi_raw", &cols[6])?,
            mi_norm: field(path, n, "mi_norm", &cols[7])?,
            n_beats: field(path, n, "n_beats", &cols[8])?,
        });
    }
    Ok(AssociationResult::from_cells(cells))
}

/// Reads `ranking.json` back.
pub fn read_ranking_json(path: &Path) -> Result<RankingReport> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

/// Markdown table of the top-ranked features per component.
pub fn ranking_markdown(report: &RankingReport) -> String {
    let mut out = String::from("| Component | Rank | Index | Feature | CC | CSE | MI |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for t in &report.rankings {
        for (r, e) in t.entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:.3} | {:.3} | {:.3} |",
                t.component,
                r + 1,
                e.feature_index,
                e.name,
                e.cc,
                e.cse_norm,
                e.mi_norm
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoted_split() {
        assert_eq!(
            split_quoted(r#"1,"a, ""b""",c"#),
            vec!["1", r#"a, "b""#, "c"]
        );
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1f64, 1.0 / 3.0, -2.5e-9, 1234567.891, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(opt::<f64>(None), "");
    }

    #[test]
    fn labels_are_sanitized() {
        assert_eq!(safe_label("rest 1/a"), "rest_1_a");
    }
}
