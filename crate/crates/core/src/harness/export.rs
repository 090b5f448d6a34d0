//! Result files. Every file is written to a sibling temp file and renamed.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::regret::RegretReport;
use super::run::RunRecord;
use super::stats::CostSummary;
use crate::error::{Error, Result};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let res = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = res {
        let _ = fs::remove_file(&tmp);
        return Err(Error::Io(format!("{}: {e}", path.display())));
    }
    Ok(())
}

/// `t` then `{alg}_mean,{alg}_ci,{alg}_avg_mean,{alg}_avg_ci` per algorithm.
pub fn summary_csv(record: &RunRecord) -> Result<String> {
    let algs = record.algorithms();
    let sums: Vec<CostSummary> = algs.iter().map(|a| record.summary(a)).collect::<Result<_>>()?;
    let mut out = String::from("t");
    for a in algs {
        write!(out, ",{a}_mean,{a}_ci,{a}_avg_mean,{a}_avg_ci").unwrap();
    }
    out.push('\n');
    let len = sums.first().map_or(0, |s| s.mean.len());
    for t in 0..len {
        write!(out, "{t}").unwrap();
        for s in &sums {
            write!(out, ",{},{},{},{}", s.mean[t], s.ci[t], s.avg_mean[t], s.avg_ci[t]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn results_json(record: &RunRecord, regret: Option<&RegretReport>) -> Result<serde_json::Value> {
    let mut costs = Vec::new();
    for a in record.algorithms() {
        let (m, ci) = record.total_cost(a)?;
        let s = record.summary(a)?;
        costs.push(json!({
            "algorithm": a,
            "total_cost_mean": m,
            "total_cost_ci": ci,
            "final_average_cost_mean": s.avg_mean.last(),
            "final_average_cost_ci": s.avg_ci.last(),
        }));
    }
    Ok(json!({
        "name": record.config.name,
        "horizon": record.config.horizon,
        "runs": record.seeds.len(),
        "seeds": record.seeds.iter().map(|s| s.seed).collect::<Vec<_>>(),
        "disturbance_hashes": record.seeds.iter().map(|s| s.disturbance_hash.clone()).collect::<Vec<_>>(),
        "oracle_enabled": regret.is_some(),
        "costs": costs,
        "regret": regret,
    }))
}

pub fn policies_json(record: &RunRecord) -> serde_json::Value {
    json!(record
        .seeds
        .iter()
        .map(|s| json!({
            "seed": s.seed,
            "loss_bound": s.loss_bound,
            "policies": s.runs.iter().map(|r| &r.snapshot).collect::<Vec<_>>(),
        }))
        .collect::<Vec<_>>())
}

/// Writes `summary.csv`, `regret.json`, `policies.json`, and optionally
/// `raw/<alg>/<seed>.csv` and `plot.svg`. Returns the written paths.
pub fn write_outputs(record: &RunRecord, regret: Option<&RegretReport>, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = vec![
        (dir.join("summary.csv"), summary_csv(record)?.into_bytes()),
        (dir.join("regret.json"), pretty(&results_json(record, regret)?)),
        (dir.join("policies.json"), pretty(&policies_json(record))),
    ];
    if record.config.output.raw {
        for s in &record.seeds {
            for r in &s.runs {
                files.push((
                    dir.join("raw").join(&r.algorithm).join(format!("{}.csv", s.seed)),
                    r.trajectory.to_csv().into_bytes(),
                ));
            }
        }
    }
    if record.config.output.plot {
        files.push((dir.join("plot.svg"), plot_svg(record)?.into_bytes()));
    }
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

fn pretty(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s.into_bytes()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Mean running-average cost per algorithm with 95% bands.
pub fn plot_svg(record: &RunRecord) -> Result<String> {
    let (w, h, left, right, top, bottom) = (720.0, 440.0, 70.0, 160.0, 30.0, 50.0);
    let algs = record.algorithms();
    let sums: Vec<CostSummary> = algs.iter().map(|a| record.summary(a)).collect::<Result<_>>()?;
    let len = sums.first().map_or(0, |s| s.avg_mean.len());
    let skip = len / 20;
    let mut ymax = 0.0f64;
    for s in &sums {
        for t in skip..len {
            let v = s.avg_mean[t] + s.avg_ci[t];
            if v.is_finite() {
                ymax = ymax.max(v);
            }
        }
    }
    if ymax <= 0.0 {
        ymax = 1.0;
    }
    ymax *= 1.05;
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |t: usize| left + pw * t as f64 / (len.max(2) - 1) as f64;
    let sy = |v: f64| top + ph * (1.0 - (v / ymax).clamp(0.0, 1.0));
    let stride = (len / 600).max(1);
    let idx: Vec<usize> = (0..len).step_by(stride).chain((len > 0).then(|| len - 1)).collect();

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, left + pw / 2.0, escape(&record.config.name)).unwrap();
    writeln!(out, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        let y = sy(v);
        writeln!(out, r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, left + pw).unwrap();
        writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{:.3}</text>"#, left - 6.0, y + 4.0, v).unwrap();
        let t = (len.saturating_sub(1)) * k / 4;
        writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{t}</text>"#, sx(t), top + ph + 18.0).unwrap();
    }
    writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#, left + pw / 2.0, h - 10.0).unwrap();
    writeln!(out, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">average cost</text>"#, top + ph / 2.0, top + ph / 2.0).unwrap();
    for (k, (a, s)) in algs.iter().zip(&sums).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut band = String::new();
        for &t in &idx {
            write!(band, "{:.2},{:.2} ", sx(t), sy(s.avg_mean[t] + s.avg_ci[t])).unwrap();
        }
        for &t in idx.iter().rev() {
            write!(band, "{:.2},{:.2} ", sx(t), sy(s.avg_mean[t] - s.avg_ci[t])).unwrap();
        }
        writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end()).unwrap();
        let line: Vec<String> = idx.iter().map(|&t| format!("{:.2},{:.2}", sx(t), sy(s.avg_mean[t]))).collect();
        writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" ")).unwrap();
        let ly = top + 14.0 + 18.0 * k as f64;
        writeln!(out, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, left + pw + 12.0, left + pw + 32.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, left + pw + 38.0, ly + 4.0, escape(a)).unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
