use std::fmt::Write as _;

use hydrotier::{Error, Result};

use super::ReportDoc;
use crate::config::PipelineConfig;
use crate::provenance::{Outputs, Provenance};

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bars: accuracy and AUC per evaluation.
fn metrics_svg(docs: &[(String, ReportDoc)]) -> String {
    let bar = 18.0;
    let group = 2.0 * bar + 24.0;
    let (left, top, height) = (50.0, 20.0, 220.0);
    let width = left + group * docs.len() as f64 + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" font-family="sans-serif" font-size="10">"#,
        top + height + 110.0
    );
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let y = top + height * (1.0 - v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" x2="{}" y1="{y}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{v:.2}</text>"##,
            width - 10.0,
            left - 4.0,
            y + 3.0
        );
    }
    for (i, (_, d)) in docs.iter().enumerate() {
        let x0 = left + 12.0 + group * i as f64;
        for (j, (v, color)) in [(d.report.mean_accuracy, "#4c72b0"), (d.report.mean_auc, "#dd8452")]
            .iter()
            .enumerate()
        {
            let v = if v.is_finite() { *v } else { 0.0 };
            let h = height * v;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{bar}" height="{h}" fill="{color}"><title>{v:.4}</title></rect>"#,
                x0 + bar * j as f64,
                top + height - h
            );
        }
        let label = esc(&format!("{} / {}", d.setting, d.report.learner));
        let (lx, ly) = (x0 + bar, top + height + 10.0);
        let _ = writeln!(
            s,
            r#"<text x="{lx}" y="{ly}" transform="rotate(40 {lx} {ly})">{label}</text>"#
        );
    }
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="4" width="10" height="10" fill="#4c72b0"/><text x="{}" y="13">accuracy</text>"##,
        left + 14.0
    );
    let _ = writeln!(
        s,
        r##"<rect x="{}" y="4" width="10" height="10" fill="#dd8452"/><text x="{}" y="13">macro AUC</text>"##,
        left + 80.0,
        left + 94.0
    );
    s.push_str("</svg>\n");
    s
}

fn confusion_svg(d: &ReportDoc) -> String {
    let m = &d.report.confusion.normalized;
    let k = m.len();
    let cell = 48.0;
    let off = 90.0;
    let size = off + cell * k as f64 + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="10">"#
    );
    for (i, row) in m.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            off - 4.0,
            off + cell * (i as f64 + 0.5),
            esc(&d.report.classes[i])
        );
        for (j, &v) in row.iter().enumerate() {
            let shade = (255.0 * (1.0 - v)).round() as u8;
            let (x, y) = (off + cell * j as f64, off + cell * i as f64);
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="white"/><text x="{}" y="{}" text-anchor="middle">{v:.2}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 3.0
            );
        }
    }
    for j in 0..k {
        let (x, y) = (off + cell * (j as f64 + 0.5), off - 6.0);
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" transform="rotate(-40 {x} {y})">{}</text>"#,
            esc(&d.report.classes[j])
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Markdown summary plus SVG charts for every `report_*.json` in the output
/// directory.
pub fn report(cfg: &PipelineConfig, prov: &Provenance) -> Result<Outputs> {
    let dir = &cfg.out_dir;
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("report_") && n.ends_with(".json"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no report_*.json in {} (run `evaluate` first)",
            dir.display()
        )));
    }
    let docs = files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let doc: ReportDoc =
                serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", p.display())))?;
            let stem = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("report")
                .trim_start_matches("report_")
                .to_string();
            Ok((stem, doc))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut md = String::new();
    let _ = writeln!(md, "<!-- {} -->\n", prov.comment());
    let _ = writeln!(md, "# Evaluation summary\n");
    let _ = writeln!(md, "| setting | learner | accuracy | AUC | best fold accuracy | rows |");
    let _ = writeln!(md, "|---|---|---|---|---|---|");
    for (_, d) in &docs {
        let r = &d.report;
        let _ = writeln!(
            md,
            "| {} | {} | {:.3} ± {:.3} | {:.3} ± {:.3} | {:.3} | {} |",
            d.setting,
            r.learner,
            r.mean_accuracy,
            r.std_accuracy,
            r.mean_auc,
            r.std_auc,
            r.best_fold.accuracy,
            r.n_rows
        );
    }
    let _ = writeln!(md, "\n![accuracy and AUC](metrics.svg)\n");
    let mut outputs = Outputs::new();
    for (stem, d) in &docs {
        let _ = writeln!(md, "## {} / {}\n", d.setting, d.report.learner);
        if !d.report.importances.is_empty() {
            let _ = writeln!(md, "Top features by gain share:\n");
            for (name, share) in &d.report.importances {
                let _ = writeln!(md, "- `{name}` {share:.3}");
            }
            md.push('\n');
        }
        for w in &d.report.warnings {
            let _ = writeln!(md, "> {w}\n");
        }
        let svg = format!("confusion_{stem}.svg");
        let _ = writeln!(md, "![confusion matrix]({svg})\n");
        outputs.write(&dir.join(&svg), confusion_svg(d).as_bytes())?;
    }
    outputs.write(&dir.join("metrics.svg"), metrics_svg(&docs).as_bytes())?;
    outputs.write(&dir.join("report.md"), md.as_bytes())?;
    Ok(outputs)
}
