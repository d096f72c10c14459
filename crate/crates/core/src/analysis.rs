//! Category-level statistics over epitome-scores: medians with standard-error
//! bars, threshold-exceedance curves, headline fractions, and CSV/SVG reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epitome::EpitomeResult;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no epitomizable results")]
    Empty,
    #[error("invalid thresholds: {0}")]
    BadThresholds(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub category: String,
    pub n: usize,
    #[serde(rename = "median")]
    pub median_score: f64,
    pub stderr: f64,
    pub bar_low: f64,
    pub bar_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceCurve {
    pub category: String,
    pub thresholds: Vec<f64>,
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineFraction {
    pub cutoff: f64,
    pub below: usize,
    pub total: usize,
    pub fraction: f64,
}

fn by_category(results: &[EpitomeResult]) -> Result<BTreeMap<&str, Vec<f64>>, AnalysisError> {
    if results.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in results {
        groups.entry(r.category.as_str()).or_default().push(r.score);
    }
    Ok(groups)
}

/// Median of a non-empty slice; even counts average the two middle values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Sample standard deviation over `sqrt(n)`; zero for a single value.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
}

/// Per-category median score with a `median +/- stderr` bar clamped to [0, 1].
/// Categories come out sorted by name.
pub fn category_stats(results: &[EpitomeResult]) -> Result<Vec<CategoryStats>, AnalysisError> {
    Ok(by_category(results)?
        .into_iter()
        .map(|(category, scores)| {
            let median_score = median(&scores);
            let stderr = standard_error(&scores);
            CategoryStats {
                category: category.to_string(),
                n: scores.len(),
                median_score,
                stderr,
                bar_low: (median_score - stderr).clamp(0.0, 1.0),
                bar_high: (median_score + stderr).clamp(0.0, 1.0),
            }
        })
        .collect())
}

/// Fraction of each category's scores strictly above each threshold.
pub fn exceedance_curves(
    results: &[EpitomeResult],
    thresholds: &[f64],
) -> Result<Vec<ExceedanceCurve>, AnalysisError> {
    check_thresholds(thresholds)?;
    Ok(by_category(results)?
        .into_iter()
        .map(|(category, scores)| ExceedanceCurve {
            category: category.to_string(),
            thresholds: thresholds.to_vec(),
            fractions: thresholds
                .iter()
                .map(|&t| scores.iter().filter(|&&s| s > t).count() as f64 / scores.len() as f64)
                .collect(),
        })
        .collect())
}

fn check_thresholds(t: &[f64]) -> Result<(), AnalysisError> {
    if t.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(AnalysisError::BadThresholds("thresholds must lie in [0, 1]".into()));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::BadThresholds("thresholds must be strictly ascending".into()));
    }
    Ok(())
}

/// For each cutoff, how many categories have a median strictly below it.
pub fn headline_fractions(stats: &[CategoryStats], cutoffs: &[f64]) -> Vec<HeadlineFraction> {
    let total = stats.len();
    cutoffs
        .iter()
        .map(|&cutoff| {
            let below = stats.iter().filter(|s| s.median_score < cutoff).count();
            HeadlineFraction {
                cutoff,
                below,
                total,
                fraction: if total == 0 { 0.0 } else { below as f64 / total as f64 },
            }
        })
        .collect()
}

/// Parses `start:stop:step` into an inclusive ascending list.
pub fn parse_threshold_range(spec: &str) -> Result<Vec<f64>, AnalysisError> {
    let bad = || AnalysisError::BadThresholds(format!("expected start:stop:step, got `{spec}`"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let t: Vec<f64> = (0..count).map(|i| (start + i as f64 * step).min(stop)).collect();
    check_thresholds(&t)?;
    Ok(t)
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub stats_csv: PathBuf,
    pub exceedance_csv: PathBuf,
    pub fig3: PathBuf,
    pub fig4: PathBuf,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), AnalysisError> {
    fs::write(path, contents).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> AnalysisError + '_ {
    move |source| AnalysisError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `category_stats.csv`, `exceedance.csv`, `fig3.svg` and `fig4.svg`.
/// Floats use the shortest representation that parses back to the same value.
pub fn emit_report(
    stats: &[CategoryStats],
    curves: &[ExceedanceCurve],
    out_dir: &Path,
) -> Result<ReportFiles, AnalysisError> {
    fs::create_dir_all(out_dir).map_err(|source| AnalysisError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let files = ReportFiles {
        stats_csv: out_dir.join("category_stats.csv"),
        exceedance_csv: out_dir.join("exceedance.csv"),
        fig3: out_dir.join("fig3.svg"),
        fig4: out_dir.join("fig4.svg"),
    };

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["category", "n", "median", "stderr", "bar_low", "bar_high"])
        .map_err(csv_err(&files.stats_csv))?;
    for s in stats {
        w.write_record([
            s.category.clone(),
            s.n.to_string(),
            s.median_score.to_string(),
            s.stderr.to_string(),
            s.bar_low.to_string(),
            s.bar_high.to_string(),
        ])
        .map_err(csv_err(&files.stats_csv))?;
    }
    write_file(&files.stats_csv, &w.into_inner().expect("in-memory writer"))?;

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["category", "threshold", "fraction"])
        .map_err(csv_err(&files.exceedance_csv))?;
    for c in curves {
        for (t, f) in c.thresholds.iter().zip(&c.fractions) {
            w.write_record([c.category.clone(), t.to_string(), f.to_string()])
                .map_err(csv_err(&files.exceedance_csv))?;
        }
    }
    write_file(&files.exceedance_csv, &w.into_inner().expect("in-memory writer"))?;

    write_file(&files.fig3, fig3_svg(stats).as_bytes())?;
    write_file(&files.fig4, fig4_svg(curves).as_bytes())?;
    Ok(files)
}

/// Reads a `category_stats.csv` written by [`emit_report`].
pub fn read_category_stats(path: &Path) -> Result<Vec<CategoryStats>, AnalysisError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<Vec<_>, _>>().map_err(csv_err(path))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const PLOT_H: f64 = 300.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 110.0;

fn y_axis(svg: &mut String, x0: f64, x1: f64, label: &str) {
    let y_of = |v: f64| MARGIN_T + (1.0 - v) * PLOT_H;
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{x0}" y1="{t}" x2="{x0}" y2="{b}" stroke="black"/>"#,
        t = MARGIN_T,
        b = MARGIN_T + PLOT_H
    );
    for i in 0..=4 {
        let v = i as f64 * 0.25;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line class="grid" x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#ddd"/><text x="{tx}" y="{ty}" font-size="11" text-anchor="end">{v:.2}</text>"##,
            tx = x0 - 6.0,
            ty = y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{cy}" font-size="12" transform="rotate(-90 14 {cy})" text-anchor="middle">{label}</text>"#,
        cy = MARGIN_T + PLOT_H / 2.0
    );
}

/// Median scores as filled circles with clamped error bars, one column per
/// category.
pub fn fig3_svg(stats: &[CategoryStats]) -> String {
    let step = 22.0;
    let width = MARGIN_L + step * stats.len().max(1) as f64 + 20.0;
    let height = MARGIN_T + PLOT_H + MARGIN_B;
    let y_of = |v: f64| MARGIN_T + (1.0 - v) * PLOT_H;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">
<rect width="100%" height="100%" fill="white"/>"#
    );
    y_axis(&mut svg, MARGIN_L, width - 10.0, "median epitome-score");
    for (i, s) in stats.iter().enumerate() {
        let x = MARGIN_L + step * (i as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<line class="errorbar" x1="{x}" y1="{lo}" x2="{x}" y2="{hi}" stroke="steelblue" stroke-width="1.5"/>"#,
            lo = y_of(s.bar_low),
            hi = y_of(s.bar_high)
        );
        let _ = writeln!(
            svg,
            r#"<circle class="median" cx="{x}" cy="{cy}" r="4" fill="black"><title>{name}: {m}</title></circle>"#,
            cy = y_of(s.median_score),
            name = escape(&s.category),
            m = s.median_score
        );
        let ty = MARGIN_T + PLOT_H + 8.0;
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{ty}" font-size="11" transform="rotate(60 {x} {ty})">{}</text>"#,
            escape(&s.category)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

/// Exceedance fraction against threshold, one polyline per category.
pub fn fig4_svg(curves: &[ExceedanceCurve]) -> String {
    let plot_w = 400.0;
    let legend_w = 160.0;
    let width = MARGIN_L + plot_w + legend_w;
    let height = MARGIN_T + PLOT_H + 50.0;
    let x_of = |t: f64| MARGIN_L + t * plot_w;
    let y_of = |v: f64| MARGIN_T + (1.0 - v) * PLOT_H;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">
<rect width="100%" height="100%" fill="white"/>"#
    );
    y_axis(&mut svg, MARGIN_L, MARGIN_L + plot_w, "fraction above threshold");
    for i in 0..=4 {
        let t = i as f64 * 0.25;
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="11" text-anchor="middle">{t:.2}</text>"#,
            x = x_of(t),
            y = MARGIN_T + PLOT_H + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">epitome-score threshold</text>"#,
        x = MARGIN_L + plot_w / 2.0,
        y = MARGIN_T + PLOT_H + 36.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = c
            .thresholds
            .iter()
            .zip(&c.fractions)
            .map(|(&t, &f)| format!("{},{}", x_of(t), y_of(f)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="curve" fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(&c.category)
        );
        let ly = MARGIN_T + 14.0 * i as f64 + 6.0;
        let lx = MARGIN_L + plot_w + 16.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{tx}" y="{ty}" font-size="11">{}</text>"#,
            escape(&c.category),
            x2 = lx + 18.0,
            tx = lx + 24.0,
            ty = ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epitome::{epitome_from_labels, LabelSequence};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Builds a result whose score equals `e / n` (or 0 for e = 1).
    fn result(category: &str, e: usize, n: usize) -> EpitomeResult {
        let mut bits = vec![1u8; n];
        if e > 1 {
            bits[e - 2] = 0;
        }
        epitome_from_labels("x", category, LabelSequence::new(bits).unwrap())
            .unwrap()
            .epitome()
            .unwrap()
            .clone()
    }

    fn with_score(category: &str, score: f64) -> EpitomeResult {
        EpitomeResult {
            score,
            ..result(category, 1, 1)
        }
    }

    #[test]
    fn median_of_three() {
        let rs: Vec<_> = [0.2, 0.6, 0.4].iter().map(|&s| with_score("a", s)).collect();
        let st = category_stats(&rs).unwrap();
        assert_eq!(st[0].median_score, 0.4);
        assert_eq!(st[0].n, 3);
    }

    #[test]
    fn all_first_stroke_epitomes() {
        let rs: Vec<_> = (2..8).map(|n| result("apple", 1, n)).collect();
        let st = category_stats(&rs).unwrap();
        assert_eq!((st[0].median_score, st[0].stderr), (0.0, 0.0));
        assert_eq!((st[0].bar_low, st[0].bar_high), (0.0, 0.0));
    }

    #[test]
    fn even_count_median_and_single_stderr() {
        assert_eq!(median(&[0.1, 0.9, 0.3, 0.5]), 0.4);
        assert_eq!(standard_error(&[0.7]), 0.0);
    }

    #[test]
    fn bars_are_clamped() {
        let rs: Vec<_> = [0.0, 0.0, 0.0, 1.0, 1.0].iter().map(|&s| with_score("a", s)).collect();
        let st = &category_stats(&rs).unwrap()[0];
        assert!(st.stderr > 0.0);
        assert_eq!(st.bar_low, 0.0);
        let rs: Vec<_> = [1.0, 1.0, 1.0, 0.0].iter().map(|&s| with_score("a", s)).collect();
        assert_eq!(category_stats(&rs).unwrap()[0].bar_high, 1.0);
    }

    #[test]
    fn random_scores_match_sorted_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scores: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..1.0)).collect();
        let rs: Vec<_> = scores.iter().map(|&s| with_score("a", s)).collect();
        let st = &category_stats(&rs).unwrap()[0];
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want_median = 0.5 * (sorted[49] + sorted[50]);
        let mean = sorted.iter().sum::<f64>() / 100.0;
        let var = sorted.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / 99.0;
        assert!((st.median_score - want_median).abs() < 1e-12);
        assert!((st.stderr - (var / 100.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exceedance_edges() {
        let rs = vec![result("a", 2, 4), result("a", 4, 4), result("b", 3, 5)];
        let cs = exceedance_curves(&rs, &[0.0, 1.0]).unwrap();
        for c in &cs {
            assert_eq!(c.fractions, vec![1.0, 0.0]);
        }
        assert!(exceedance_curves(&rs, &[0.5, 0.2]).is_err());
        assert!(matches!(exceedance_curves(&[], &[0.5]).unwrap_err(), AnalysisError::Empty));
    }

    #[test]
    fn exceedance_counts_match_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rs: Vec<_> = (0..300)
            .map(|i| with_score(["a", "b", "c"][i % 3], (rng.gen_range(0..=20) as f64) / 20.0))
            .collect();
        let ts = [0.0, 0.25, 0.5, 0.75, 1.0];
        for c in exceedance_curves(&rs, &ts).unwrap() {
            let own: Vec<f64> = rs.iter().filter(|r| r.category == c.category).map(|r| r.score).collect();
            for (t, f) in ts.iter().zip(&c.fractions) {
                let count = own.iter().filter(|&&s| s > *t).count();
                assert_eq!(*f, count as f64 / own.len() as f64);
            }
            assert!(c.fractions.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    fn stats_with_medians(m: &[f64]) -> Vec<CategoryStats> {
        m.iter()
            .enumerate()
            .map(|(i, &v)| CategoryStats {
                category: format!("c{i}"),
                n: 1,
                median_score: v,
                stderr: 0.0,
                bar_low: v,
                bar_high: v,
            })
            .collect()
    }

    #[test]
    fn headline_cases() {
        let st = stats_with_medians(&[0.1, 0.4, 0.6, 0.9]);
        let h = headline_fractions(&st, &[0.5, 0.0]);
        assert_eq!((h[0].below, h[0].total, h[0].fraction), (2, 4, 0.5));
        assert_eq!(h[1].below, 0);
        let mut fifty = vec![0.3; 21];
        fifty.extend(vec![0.6; 29]);
        let h = headline_fractions(&stats_with_medians(&fifty), &[0.5]);
        assert_eq!((h[0].below, h[0].total), (21, 50));
        assert_eq!(h[0].fraction, 0.42);
    }

    #[test]
    fn threshold_ranges() {
        let t = parse_threshold_range("0:1:0.05").unwrap();
        assert_eq!(t.len(), 21);
        assert_eq!(t[20], 1.0);
        assert_eq!(parse_threshold_range("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_threshold_range("0:1").is_err());
        assert!(parse_threshold_range("0:1:0").is_err());
    }

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let rs = vec![result("a", 2, 4), result("a", 1, 3), result("b", 5, 5), result("b", 3, 7)];
        let st = category_stats(&rs).unwrap();
        let files = emit_report(&st, &[], dir.path()).unwrap();
        assert_eq!(fs::read_to_string(&files.exceedance_csv).unwrap(), "category,threshold,fraction\n");
        let fig3 = fs::read_to_string(&files.fig3).unwrap();
        assert_eq!(fig3.matches(r#"class="median""#).count(), 2);
        assert_eq!(fig3.matches(r#"class="errorbar""#).count(), 2);
        assert!(roxmltree::Document::parse(&fig3).is_ok());
        let back = read_category_stats(&files.stats_csv).unwrap();
        assert_eq!(back.len(), st.len());
        for (a, b) in back.iter().zip(&st) {
            assert_eq!(a.category, b.category);
            assert!((a.median_score - b.median_score).abs() < 1e-9);
            assert!((a.stderr - b.stderr).abs() < 1e-9);
        }
        let curves = exceedance_curves(&rs, &[0.0, 0.5, 1.0]).unwrap();
        let files = emit_report(&st, &curves, dir.path()).unwrap();
        let fig4 = fs::read_to_string(&files.fig4).unwrap();
        assert_eq!(fig4.matches(r#"class="curve""#).count(), 2);
        assert!(roxmltree::Document::parse(&fig4).is_ok());
        assert_eq!(fs::read_to_string(&files.exceedance_csv).unwrap().lines().count(), 7);
    }
}
