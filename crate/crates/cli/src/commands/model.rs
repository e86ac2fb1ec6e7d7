use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use hydrotier::dataset::io::fmt_cell;
use hydrotier::dataset::FeatureSource;
use hydrotier::evaluation::{accuracy, cross_validate, EvalOptions};
use hydrotier::ordinal::{argmax, fit_ordinal};
use hydrotier::tuning::grid_search;
use hydrotier::{Error, Result};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{load_features, load_labeled, ModelDoc, ReportDoc};
use crate::config::PipelineConfig;
use crate::provenance::{Outputs, Provenance};

pub const SUMMARY_FILE: &str = "summary.csv";

fn csv_bytes(comment: &str, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "# {comment}").expect("write to Vec");
    let mut w = csv::Writer::from_writer(&mut buf);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().expect("write to Vec");
    drop(w);
    Ok(buf)
}

pub fn train(cfg: &PipelineConfig, prov: &Provenance) -> Result<Outputs> {
    let data = load_labeled(cfg, &cfg.sources)?;
    let model = fit_ordinal(&data, &cfg.learner, cfg.smote.as_ref(), cfg.seed)?;
    let train_acc = accuracy(data.labels(), &model.predict_class(data.features())?)?;
    info!(
        "trained {} on {} rows, training accuracy {train_acc:.4}",
        cfg.learner.label(),
        data.len()
    );
    let doc = ModelDoc {
        provenance: prov.clone(),
        target: cfg.target,
        sources: cfg.sources.clone(),
        config: cfg.clone(),
        model,
    };
    let mut outputs = Outputs::new();
    outputs.write_json(cfg.paths.model.as_ref().expect("resolved"), &doc)?;
    Ok(outputs)
}

pub fn report_file_name(setting: &str, learner: &str) -> String {
    format!("report_{setting}_{learner}.json")
}

pub fn evaluate(cfg: &PipelineConfig, prov: &Provenance) -> Result<Outputs> {
    let mut outputs = Outputs::new();
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for setting in &cfg.settings {
        let data = load_labeled(cfg, &setting.sources)?;
        let profile_features: Vec<String> = cfg
            .profile_features
            .iter()
            .filter(|f| {
                let present = data.features().column_index(f).is_some();
                if !present {
                    info!("setting {}: profile feature {f} not present, skipped", setting.name);
                }
                present
            })
            .cloned()
            .collect();
        let opts = EvalOptions { profile_features };
        for learner in &cfg.learners {
            let label = learner.label();
            if !seen.insert((setting.name.clone(), label.clone())) {
                return Err(Error::Config(format!(
                    "duplicate setting/learner pair {}/{label}",
                    setting.name
                )));
            }
            let report = cross_validate(&data, learner, cfg.smote.as_ref(), cfg.cv_folds, cfg.seed, &opts)?;
            info!(
                "{} / {label}: accuracy {:.4} ± {:.4}, AUC {:.4} ± {:.4}",
                setting.name, report.mean_accuracy, report.std_accuracy, report.mean_auc, report.std_auc
            );
            rows.push(vec![
                setting.name.clone(),
                label.clone(),
                fmt_cell(report.mean_accuracy),
                fmt_cell(report.std_accuracy),
                fmt_cell(report.mean_auc),
                fmt_cell(report.std_auc),
                fmt_cell(report.best_fold.accuracy),
                fmt_cell(report.best_fold.auc.unwrap_or(f64::NAN)),
                fmt_cell(report.pooled_accuracy),
                report.n_rows.to_string(),
            ]);
            let doc = ReportDoc {
                provenance: prov.clone(),
                setting: setting.name.clone(),
                sources: setting.sources.clone(),
                target: cfg.target,
                config: cfg.clone(),
                report,
            };
            outputs.write_json(&cfg.out_dir.join(report_file_name(&setting.name, &label)), &doc)?;
        }
    }
    let header = [
        "setting",
        "learner",
        "mean_accuracy",
        "std_accuracy",
        "mean_auc",
        "std_auc",
        "best_fold_accuracy",
        "best_fold_auc",
        "pooled_accuracy",
        "rows",
    ];
    outputs.write(
        &cfg.out_dir.join(SUMMARY_FILE),
        &csv_bytes(&prov.comment(), &header, &rows)?,
    )?;
    Ok(outputs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestSpecDoc {
    pub provenance: Provenance,
    pub trial: usize,
    pub mean_accuracy: f64,
    pub mean_auc: f64,
    pub spec: hydrotier::BinaryLearnerSpec,
}

pub fn tune(cfg: &PipelineConfig, prov: &Provenance) -> Result<Outputs> {
    let grid = cfg
        .grid
        .as_ref()
        .ok_or_else(|| Error::Config("`tune` needs a `grid` section in the config".into()))?;
    let mut grid = grid.clone();
    grid.seed = cfg.seed;
    let data = load_labeled(cfg, &cfg.sources)?;
    let result = grid_search(&data, &grid, &cfg.learner, cfg.smote.as_ref())?;
    let failed = result.trials.iter().filter(|t| !t.ok()).count();
    if failed > 0 {
        warn!("{failed} of {} trials failed", result.trials.len());
    }
    let best = &result.trials[result.best];
    info!(
        "best trial {} of {}: accuracy {:.4}, AUC {:.4}",
        best.index,
        result.trials.len(),
        best.mean_accuracy,
        best.mean_auc
    );
    let mut outputs = Outputs::new();
    let mut buf = Vec::new();
    result.write_csv(&mut buf, Some(&prov.comment()))?;
    outputs.write(&cfg.out_dir.join("tuning_trials.csv"), &buf)?;
    outputs.write_json(
        &cfg.out_dir.join("best_spec.json"),
        &BestSpecDoc {
            provenance: prov.clone(),
            trial: best.index,
            mean_accuracy: best.mean_accuracy,
            mean_auc: best.mean_auc,
            spec: result.best_spec.clone(),
        },
    )?;
    Ok(outputs)
}

pub fn load_model(path: &Path) -> Result<ModelDoc> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let doc: ModelDoc = serde_json::from_str(&text)?;
    // re-validate the embedded model through the core loader
    hydrotier::ordinal::OrdinalModel::from_json(&serde_json::to_string(&doc.model)?)?;
    Ok(doc)
}

pub fn predict(cfg: &PipelineConfig, prov: &Provenance) -> Result<Outputs> {
    let doc = load_model(cfg.paths.model.as_ref().expect("resolved"))?;
    let sources: Vec<FeatureSource> = doc.sources.clone();
    let features = load_features(cfg, &sources)?;
    let proba = doc.model.predict_proba(&features)?;
    let labels = doc.model.binning.class_labels();
    let mut header = vec!["id".to_string(), "class_index".into(), "class_label".into()];
    header.extend((0..doc.model.classes).map(|k| format!("prob_{k}")));
    let rows: Vec<Vec<String>> = features
        .row_ids()
        .iter()
        .zip(&proba)
        .map(|(id, p)| {
            let c = argmax(p);
            let mut r = vec![id.clone(), c.to_string(), labels[c].clone()];
            r.extend(p.iter().map(|&v| fmt_cell(v)));
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut outputs = Outputs::new();
    outputs.write(
        &cfg.out_dir.join("predictions.csv"),
        &csv_bytes(&prov.comment(), &header, &rows)?,
    )?;
    info!("wrote {} predictions", rows.len());
    Ok(outputs)
}
