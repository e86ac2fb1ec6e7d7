//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use hydrotier::evaluation::{
    cross_validate_with_folds, roc_auc_binary, roc_auc_macro_ovr, stratified_kfold, EvalOptions,
};
use hydrotier::geoimagery::mock::{MockResponse, MockServer};
use hydrotier::geoimagery::{
    point_to_tile, segmentation_proportions, tile_center, ClassIndexImage, GeoPoint, TileCoord, NUM_SEG_CLASSES,
};
use hydrotier::learners::histogram::BinnedMatrix;
use hydrotier::learners::{
    fit_binary, fit_gbdt, fit_tree, logistic_gradient, logistic_objective, split_gain, Node, TreeParams,
};
use hydrotier::ordinal::{monotonize, reconstruct};
use hydrotier::resampling::smote;
use hydrotier::tuning::grid_search;
use hydrotier::{seed, BinaryLearnerSpec, DenseMatrix, GridSpec, Growth, SmoteSpec};
use hydrotier_cli::commands::{load_labeled, ReportDoc};
use hydrotier_cli::{resolve_config, run, Cli};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

type Check = Result<String, String>;
type Criterion = (&'static str, Option<f64>, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn cli_run(dir: &Path, config: &Path, args: &[&str]) -> Result<Vec<PathBuf>, String> {
    let mut v = vec!["hydrotier".to_string()];
    v.extend(args.iter().map(|s| s.to_string()));
    v.extend([
        "--out".into(),
        dir.display().to_string(),
        "--config".into(),
        config.display().to_string(),
    ]);
    let cli = Cli::try_parse_from(&v).map_err(|e| e.to_string())?;
    run(&cli).map_err(|e| format!("{}: {e}", args.join(" ")))
}

fn write(path: &Path, text: &str) -> PathBuf {
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

// ---------------------------------------------------------------------------

fn reconstruction() -> Check {
    let mut rng = seed::rng(1);
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let k = 2 + i % 5;
        let c: Vec<f64> = (0..k - 1).map(|_| rng.random::<f64>()).collect();
        let mut m = c.clone();
        monotonize(&mut m);
        let mut again = m.clone();
        monotonize(&mut again);
        ensure(again == m, || format!("vector {i}: monotonization not idempotent"))?;
        let mut run_min = f64::INFINITY;
        for (j, (&a, &b)) in c.iter().zip(&m).enumerate() {
            run_min = run_min.min(a);
            ensure(b == run_min, || {
                format!("vector {i}: entry {j} is {b}, running minimum {run_min}")
            })?;
        }
        let p = reconstruct(&c);
        ensure(p.len() == k, || {
            format!("vector {i}: {} classes, expected {k}", p.len())
        })?;
        ensure(p.iter().all(|&v| v >= 0.0), || {
            format!("vector {i}: negative mass {p:?}")
        })?;
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst <= 1e-9, || format!("max |sum - 1| = {worst:e}"))?;
    Ok(format!("10000 vectors, max |sum - 1| = {worst:.1e}"))
}

fn brute_auc(y: &[bool], s: &[f64]) -> Option<f64> {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, &yi) in y.iter().enumerate() {
        if !yi {
            continue;
        }
        for (j, &yj) in y.iter().enumerate() {
            if yj {
                continue;
            }
            pairs += 1.0;
            if s[i] > s[j] {
                num += 1.0;
            } else if s[i] == s[j] {
                num += 0.5;
            }
        }
    }
    (pairs > 0.0).then(|| num / pairs)
}

fn auc_oracle() -> Check {
    let mut rng = seed::rng(2);
    let mut worst = 0.0f64;
    let mut macro_checked = 0;
    for inst in 0..1000 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(2..=12);
        let y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let s: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / 4.0).collect();
        match (roc_auc_binary(&y, &s), brute_auc(&y, &s)) {
            (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
            (None, None) => {}
            (a, b) => return Err(format!("instance {inst}: {a:?} vs oracle {b:?}")),
        }
        if inst % 5 == 0 {
            let k = 4;
            let yk: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let proba: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let w: Vec<f64> = (0..k).map(|_| f64::from(rng.random_range(1..6u8))).collect();
                    let t: f64 = w.iter().sum();
                    w.iter().map(|v| v / t).collect()
                })
                .collect();
            let per: Vec<f64> = (0..k)
                .filter_map(|c| {
                    let yc: Vec<bool> = yk.iter().map(|&v| v == c).collect();
                    let sc: Vec<f64> = proba.iter().map(|p| p[c]).collect();
                    brute_auc(&yc, &sc)
                })
                .collect();
            let present = (0..k).filter(|c| yk.contains(c)).count();
            match roc_auc_macro_ovr(&yk, &proba, k) {
                Ok(m) => {
                    let oracle = per.iter().sum::<f64>() / per.len() as f64;
                    worst = worst.max((m.value - oracle).abs());
                    macro_checked += 1;
                }
                Err(_) => ensure(present < 2, || {
                    format!("instance {inst}: macro AUC failed with {present} classes")
                })?,
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!(
        "1000 binary + {macro_checked} macro instances, max deviation {worst:.1e}"
    ))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn smote_geometry() -> Check {
    let mut rng = seed::rng(3);
    let mut synthetic = 0usize;
    for inst in 0..500u64 {
        let m = rng.random_range(2..25);
        let maj = rng.random_range(m + 1..80);
        let d = rng.random_range(1..5);
        let minority_label: u8 = rng.random_range(0..2);
        let n = m + maj;
        let data: Vec<f64> = (0..n * d)
            .map(|_| {
                if rng.random_bool(0.2) {
                    f64::from(rng.random_range(0..3u8))
                } else {
                    normal(&mut rng)
                }
            })
            .collect();
        let x = DenseMatrix::new(n, d, data).unwrap();
        let mut y = vec![1 - minority_label; n];
        for i in rand::seq::index::sample(&mut rng, n, m) {
            y[i] = minority_label;
        }
        let spec = SmoteSpec {
            k_neighbors: rng.random_range(1..8),
            target_ratio: [0.5, 0.75, 1.0][rng.random_range(0..3)],
            seed: inst,
        };
        let out = smote(&x, &y, &spec).map_err(|e| format!("instance {inst}: {e}"))?;
        let target = (spec.target_ratio * maj as f64).round() as usize;
        let expect = target.saturating_sub(m);
        ensure(out.x.rows() == n + expect, || {
            format!("instance {inst}: {} rows, expected {}", out.x.rows(), n + expect)
        })?;
        ensure(out.x.as_slice()[..n * d] == *x.as_slice(), || {
            format!("instance {inst}: originals changed")
        })?;
        let k = spec.k_neighbors.min(m - 1);
        let pool: Vec<usize> = (0..n).filter(|&i| y[i] == minority_label).collect();
        // exhaustive k-NN radius of every minority point
        let radius: Vec<f64> = pool
            .iter()
            .map(|&r| {
                let mut ds: Vec<f64> = pool
                    .iter()
                    .filter(|&&q| q != r)
                    .map(|&q| sq_dist(x.row(r), x.row(q)))
                    .collect();
                ds.sort_by(f64::total_cmp);
                ds[k - 1]
            })
            .collect();
        for s_idx in n..out.x.rows() {
            ensure(out.y[s_idx] == minority_label, || {
                format!("instance {inst}: synthetic label")
            })?;
            let s = out.x.row(s_idx);
            let on_segment = pool.iter().enumerate().any(|(ri, &r)| {
                pool.iter().any(|&q| {
                    if q == r || sq_dist(x.row(r), x.row(q)) > radius[ri] {
                        return false;
                    }
                    let (a, b) = (x.row(r), x.row(q));
                    let len = sq_dist(a, b);
                    if len == 0.0 {
                        return sq_dist(s, a) <= 1e-18;
                    }
                    let lambda: f64 = s
                        .iter()
                        .zip(a)
                        .zip(b)
                        .map(|((si, ai), bi)| (si - ai) * (bi - ai))
                        .sum::<f64>()
                        / len;
                    let proj: Vec<f64> = a.iter().zip(b).map(|(ai, bi)| ai + lambda * (bi - ai)).collect();
                    (-1e-12..=1.0 + 1e-12).contains(&lambda) && sq_dist(s, &proj) <= 1e-18
                })
            });
            ensure(on_segment, || {
                format!("instance {inst}: synthetic row {s_idx} is off every k-NN segment")
            })?;
            synthetic += 1;
        }
    }
    Ok(format!("500 instances, {synthetic} synthetic points verified"))
}

fn exhaustive_root(x: &DenseMatrix, g: &[f64], h: &[f64], lambda: f64, min_child: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    for f in 0..x.cols() {
        let mut vals = x.column(f);
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let (mut gl, mut hl, mut gr, mut hr, mut nl) = (0.0, 0.0, 0.0, 0.0, 0);
            for i in 0..x.rows() {
                if x.get(i, f) <= w[0] {
                    gl += g[i];
                    hl += h[i];
                    nl += 1;
                } else {
                    gr += g[i];
                    hr += h[i];
                }
            }
            if nl < min_child || x.rows() - nl < min_child {
                continue;
            }
            let gain = split_gain(gl, hl, gr, hr, lambda);
            if gain > 0.0 && best.is_none_or(|b| gain > b) {
                best = Some(gain);
            }
        }
    }
    best
}

fn learner_correctness() -> Check {
    let mut rng = seed::rng(4);
    let n = 80;
    let x = DenseMatrix::new(n, 5, (0..n * 5).map(|_| normal(&mut rng)).collect()).unwrap();
    let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let mut fd_worst = 0.0f64;
    for _ in 0..25 {
        let theta: Vec<f64> = (0..6).map(|_| 2.0 * normal(&mut rng)).collect();
        let l2 = rng.random_range(0.0..1.0);
        let g = logistic_gradient(&theta, &x, &y, l2);
        for j in 0..theta.len() {
            let (mut p, mut m) = (theta.clone(), theta.clone());
            p[j] += 1e-5;
            m[j] -= 1e-5;
            let fd = (logistic_objective(&p, &x, &y, l2) - logistic_objective(&m, &x, &y, l2)) / 2e-5;
            fd_worst = fd_worst.max((fd - g[j]).abs());
        }
    }
    ensure(fd_worst < 1e-6, || format!("finite-difference gap {fd_worst:e}"))?;

    let n = 600;
    let x = DenseMatrix::new(n, 4, (0..n * 4).map(|_| normal(&mut rng)).collect()).unwrap();
    let y: Vec<u8> = (0..n)
        .map(|i| u8::from(x.get(i, 0) * x.get(i, 1) + 0.4 * normal(&mut rng) > 0.0))
        .collect();
    for growth in [Growth::LeafWise, Growth::LevelWise] {
        let mut spec = BinaryLearnerSpec::gbdt_leaf_wise();
        spec.growth = growth;
        spec.n_estimators = 100;
        let m = fit_gbdt(&x, &y, &spec, 0).map_err(|e| e.to_string())?;
        ensure(m.training_loss.len() == 101, || {
            format!("{growth:?}: {} loss entries", m.training_loss.len())
        })?;
        if let Some(w) = m.training_loss.windows(2).find(|w| w[1] > w[0]) {
            return Err(format!("{growth:?}: loss rose {} -> {}", w[0], w[1]));
        }
    }

    for trial in 0..100u64 {
        let mut r = seed::rng(1000 + trial);
        let rows = r.random_range(20..200);
        let cols = r.random_range(1..5);
        let distinct = r.random_range(2..=256u32);
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| f64::from(r.random_range(0..distinct)) * 0.37 - 5.0)
            .collect();
        let x = DenseMatrix::new(rows, cols, data).unwrap();
        let g: Vec<f64> = (0..rows).map(|_| normal(&mut r)).collect();
        let h: Vec<f64> = (0..rows).map(|_| r.random_range(0.05..1.0)).collect();
        let params = TreeParams {
            growth: Growth::LeafWise,
            max_depth: 1,
            num_leaves: 2,
            min_child_samples: 3,
            lambda: 1.0,
            ..TreeParams::default()
        };
        let all: Vec<usize> = (0..rows).collect();
        let tree = fit_tree(&BinnedMatrix::fit(&x), &all, &g, &h, &params, &mut seed::rng(0));
        match (&tree.nodes()[0], exhaustive_root(&x, &g, &h, 1.0, 3)) {
            (Node::Leaf { .. }, None) => {}
            (Node::Split { gain, .. }, Some(o)) if (gain - o).abs() <= 1e-9 * o.max(1.0) => {}
            (node, o) => return Err(format!("split trial {trial}: {node:?} vs exhaustive {o:?}")),
        }
    }

    let n = 400;
    let x = DenseMatrix::new(n, 3, (0..n * 3).map(|_| normal(&mut rng)).collect()).unwrap();
    let y: Vec<u8> = (0..n)
        .map(|i| u8::from(x.get(i, 0) + 0.5 * x.get(i, 1) > 0.1))
        .collect();
    let mut warped = x.clone();
    for i in 0..n {
        warped.set(i, 0, x.get(i, 0).exp());
        warped.set(i, 1, 2.0 * x.get(i, 1).powi(3) - 9.0);
        warped.set(i, 2, x.get(i, 2).atan());
    }
    for base in [
        BinaryLearnerSpec::gbdt_leaf_wise(),
        BinaryLearnerSpec::gbdt_level_wise(),
        BinaryLearnerSpec::random_forest(),
    ] {
        let mut spec = base;
        spec.n_estimators = 30;
        let a = fit_binary(&x, &y, &spec, 9)
            .map_err(|e| e.to_string())?
            .predict_proba(&x);
        let b = fit_binary(&warped, &y, &spec, 9)
            .map_err(|e| e.to_string())?
            .predict_proba(&warped);
        ensure(a == b, || {
            format!("{} predictions change under monotone rescaling", spec.label())
        })?;
    }
    Ok(format!(
        "finite-difference gap {fd_worst:.1e}, loss monotone, 100 split trials, rescaling invariant"
    ))
}

const E2E: &str = r#"{"target": "water", "cv_folds": 5,
  "learner": {"kind": "gbdt", "growth": "leaf_wise"},
  "synth": {"size": 2000, "classes": 4, "signal_strength": SIGNAL}}"#;

fn e2e(signal: f64) -> Result<(f64, f64, f64), String> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("config.json"),
        &E2E.replace("SIGNAL", &signal.to_string()),
    );
    let t = Instant::now();
    for c in ["synth", "ingest", "evaluate"] {
        cli_run(dir.path(), &cfg, &[c])?;
    }
    let secs = t.elapsed().as_secs_f64();
    let text = std::fs::read_to_string(dir.path().join("report_survey+seg+geo_gbdt_leaf_wise.json"))
        .map_err(|e| e.to_string())?;
    let doc: ReportDoc = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(
        doc.report.k == 5 && doc.report.n_rows == 2000 && doc.report.classes.len() == 4,
        || "unexpected report shape".into(),
    )?;
    Ok((doc.report.mean_accuracy, doc.report.mean_auc, secs))
}

fn end_to_end() -> Check {
    let (acc, auc, secs) = e2e(0.9)?;
    let (null_acc, _, null_secs) = e2e(0.0)?;
    let detail =
        format!("s=0.9: accuracy {acc:.4}, AUC {auc:.4} in {secs:.1}s; s=0: accuracy {null_acc:.4} in {null_secs:.1}s");
    ensure(acc >= 0.80 && auc >= 0.90, || detail.clone())?;
    ensure((0.20..=0.30).contains(&null_acc), || detail.clone())?;
    ensure(secs < 120.0 && null_secs < 120.0, || detail.clone())?;
    Ok(detail)
}

fn png_bytes(w: u32, h: u32) -> Vec<u8> {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("img.png");
    ClassIndexImage::new(w, h, (0..w * h).map(|i| (i % 150) as u8).collect())
        .unwrap()
        .save_png(&p)
        .unwrap();
    std::fs::read(p).unwrap()
}

fn fetch_config(base: &str, manifest: &Path) -> String {
    serde_json::json!({
        "paths": {"image_manifest": manifest},
        "fetch": {
            "satellite_endpoint": format!("{base}/sat?c={{lat}},{{lng}}&z={{zoom}}&id={{id}}"),
            "streetview_endpoint": format!("{base}/gsv?c={{lat}},{{lng}}{{heading_param}}&id={{id}}"),
            "backoff_ms": 1,
            "parallelism": 4,
            "api_key_env": "HYDROTIER_ACCEPTANCE_NO_KEY"
        }
    })
    .to_string()
}

/// Row `i` of the manifest gets a kind and location fixed by `i`, so dropping
/// ids leaves the remaining requests unchanged.
fn write_manifest(path: &Path, ids: &[&str], skip: &[&str]) {
    let mut s = String::from("id,kind,lat,lng,heading\n");
    for (i, id) in ids.iter().enumerate().filter(|(_, id)| !skip.contains(id)) {
        let kind = if i % 2 == 0 { "satellite" } else { "streetview" };
        s.push_str(&format!(
            "{id},{kind},{},{},{}\n",
            15.3 + i as f64 * 1e-3,
            75.1,
            90 * (i % 4)
        ));
    }
    std::fs::write(path, s).unwrap();
}

fn flaky_server() -> MockServer {
    let body = png_bytes(40, 40);
    MockServer::start(move |target, hit| {
        if target.contains("id=dead") {
            MockResponse {
                status: 500,
                body: Vec::new(),
            }
        } else if target.contains("id=flaky") && hit % 3 != 0 {
            // two failures before every success
            MockResponse {
                status: 503,
                body: Vec::new(),
            }
        } else {
            MockResponse {
                status: 200,
                body: body.clone(),
            }
        }
    })
    .unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_file()
            && p.extension().is_some_and(|x| x == "json" || x == "csv")
            && p.file_name().unwrap() != "config.json"
        {
            out.insert(
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            );
        }
    }
    out
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let server = flaky_server();
    let manifest = dir.path().join("images.csv");
    write_manifest(&manifest, &["a", "flaky", "b", "c"], &[]);
    let mut cfg: serde_json::Value = serde_json::from_str(&fetch_config(&server.base_url(), &manifest)).unwrap();
    let extra: serde_json::Value = serde_json::from_str(
        r#"{"synth": {"size": 600}, "learners": [{"kind": "gbdt"}, {"kind": "random_forest", "n_estimators": 30}, {"kind": "logistic"}],
  "grid": {"n_estimators": [20, 40], "max_depth": [4], "learning_rate": [0.1], "num_leaves": [7, 15],
           "min_child_samples": [10], "feature_fraction": [0.8], "row_fraction": [0.8], "k": 3}}"#,
    )
    .unwrap();
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let cfg = write(&dir.path().join("config.json"), &cfg.to_string());
    let commands = [
        "synth", "ingest", "evaluate", "train", "predict", "tune", "report", "fetch",
    ];
    let mut runs = Vec::new();
    for jobs in ["1", "4", "3"] {
        // the fetch log records cache hits, so each pass starts cold
        let _ = std::fs::remove_dir_all(dir.path().join("cache"));
        for c in commands {
            cli_run(dir.path(), &cfg, &[c, "--jobs", jobs])?;
        }
        runs.push(snapshot(dir.path()));
    }
    let first = &runs[0];
    ensure(first.len() >= 12, || {
        format!("only {} output files: {:?}", first.len(), first.keys())
    })?;
    for (i, other) in runs.iter().enumerate().skip(1) {
        ensure(other.keys().eq(first.keys()), || {
            format!("run {i} wrote a different file set")
        })?;
        for (name, bytes) in first {
            ensure(&other[name] == bytes, || format!("{name} differs between --jobs runs"))?;
        }
    }
    Ok(format!(
        "{} commands, {} JSON/CSV files byte-identical across --jobs 1/4/3",
        commands.len(),
        first.len()
    ))
}

fn grid_consistency() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write(
        &dir.path().join("config.json"),
        r#"{"synth": {"size": 500}, "sources": ["survey", "geo"]}"#,
    );
    cli_run(dir.path(), &cfg_path, &["synth"])?;
    cli_run(dir.path(), &cfg_path, &["ingest"])?;
    let cli = Cli::try_parse_from([
        "hydrotier",
        "evaluate",
        "--out",
        dir.path().to_str().unwrap(),
        "--config",
        cfg_path.to_str().unwrap(),
    ])
    .map_err(|e| e.to_string())?;
    let cfg = resolve_config(&cli).map_err(|e| e.to_string())?;
    let data = load_labeled(&cfg, &cfg.sources).map_err(|e| e.to_string())?;
    let grid: GridSpec = serde_json::from_str(
        r#"{"n_estimators": [10, 40], "max_depth": [3, 6], "learning_rate": [0.05, 0.2], "num_leaves": [4, 31],
            "min_child_samples": [10], "feature_fraction": [1.0], "row_fraction": [1.0], "k": 4, "seed": 11}"#,
    )
    .map_err(|e| e.to_string())?;
    let base = BinaryLearnerSpec::gbdt_leaf_wise();
    let smote_spec = SmoteSpec::default();
    let result = grid_search(&data, &grid, &base, Some(&smote_spec)).map_err(|e| e.to_string())?;
    let winner = &result.trials[result.best];
    for t in result.trials.iter().filter(|t| t.ok()) {
        ensure(winner.mean_accuracy >= t.mean_accuracy, || {
            format!("trial {} beats the winner", t.index)
        })?;
    }
    let folds = stratified_kfold(data.labels(), grid.k, grid.seed).map_err(|e| e.to_string())?;
    ensure(folds == result.folds, || {
        "reported folds differ from the stratified split".into()
    })?;
    // every trial's metrics are reproduced exactly on the shared folds
    for t in &result.trials {
        let r = cross_validate_with_folds(
            &data,
            &t.params.apply(&base),
            Some(&smote_spec),
            &folds,
            grid.seed,
            &EvalOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        ensure(r.mean_accuracy == t.mean_accuracy && r.mean_auc == t.mean_auc, || {
            format!("trial {} not reproducible on the shared folds", t.index)
        })?;
    }
    Ok(format!(
        "{} trials, winner {} accuracy {:.4}",
        result.trials.len(),
        winner.index,
        winner.mean_accuracy
    ))
}

fn segmentation_and_tiles() -> Check {
    let mut rng = seed::rng(8);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (w, h) = (rng.random_range(1..96u32), rng.random_range(1..96u32));
        let used = rng.random_range(1..=NUM_SEG_CLASSES as u8);
        let mut px: Vec<u8> = (0..w * h)
            .map(|_| {
                if rng.random_bool(0.1) {
                    255
                } else {
                    rng.random_range(0..used)
                }
            })
            .collect();
        px[0] = 0;
        let img = ClassIndexImage::new(w, h, px.clone()).map_err(|e| e.to_string())?;
        let s = segmentation_proportions(&format!("img{i}"), &img).map_err(|e| e.to_string())?;
        ensure(s.proportions.len() == NUM_SEG_CLASSES, || {
            format!("image {i}: {} classes", s.proportions.len())
        })?;
        worst = worst.max((s.proportions.iter().sum::<f64>() - 1.0).abs());
        let labelled = px.iter().filter(|&&p| p != 255).count() as f64;
        for c in 0..NUM_SEG_CLASSES {
            let count = px.iter().filter(|&&p| usize::from(p) == c).count() as f64;
            ensure(s.proportions[c] == count / labelled, || {
                format!("image {i} class {c}: {} vs {}", s.proportions[c], count / labelled)
            })?;
        }
    }
    ensure(worst <= 1e-9, || format!("max |sum - 1| = {worst:e}"))?;

    for i in 0..1000 {
        let lat = rng.random_range(-85.0..85.0);
        let lng = rng.random_range(-180.0..180.0);
        let zoom = rng.random_range(0..=22u8);
        let t = point_to_tile(GeoPoint::new(lat, lng).unwrap(), zoom).map_err(|e| e.to_string())?;
        // inverse: tile corner coordinates from the closed-form Mercator inverse
        let n = f64::from(1u32 << zoom);
        let west = f64::from(t.x) / n * 360.0 - 180.0;
        let east = f64::from(t.x + 1) / n * 360.0 - 180.0;
        let lat_of = |y: f64| (std::f64::consts::PI * (1.0 - 2.0 * y / n)).sinh().atan().to_degrees();
        let (north, south) = (lat_of(f64::from(t.y)), lat_of(f64::from(t.y + 1)));
        let eps = 1e-9;
        ensure(
            west - eps <= lng && lng <= east + eps && south - eps <= lat && lat <= north + eps,
            || format!("point {i} ({lat}, {lng}) outside tile {t:?}"),
        )?;
        let c = tile_center(t);
        let back: TileCoord = point_to_tile(c, zoom).map_err(|e| e.to_string())?;
        ensure(back == t, || format!("point {i}: centre of {t:?} maps to {back:?}"))?;
    }
    Ok(format!(
        "100 images (max |sum - 1| = {worst:.1e}), 1000 tile round trips"
    ))
}

fn fetcher_resilience() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let server = flaky_server();
    let manifest = dir.path().join("images.csv");
    let ids = ["a", "flaky", "dead", "b", "c", "d"];
    write_manifest(&manifest, &ids, &[]);
    let cfg = write(
        &dir.path().join("config.json"),
        &fetch_config(&server.base_url(), &manifest),
    );
    cli_run(dir.path(), &cfg, &["fetch"])?;
    let log = std::fs::read_to_string(dir.path().join("fetch_log.csv")).map_err(|e| e.to_string())?;
    let rows = log.lines().filter(|l| !l.starts_with('#')).count() - 1;
    ensure(rows == ids.len(), || format!("fetch log has {rows} rows"))?;
    let per_target = server.max_requests_per_target();
    ensure(per_target <= 3, || format!("{per_target} requests for one image"))?;
    ensure(server.requests_matching("id=dead") == 3, || {
        "dead image not tried three times".into()
    })?;
    ensure(log.contains("flaky") && log.contains(",failed,"), || log.clone())?;
    let before = server.total_requests();

    let good: Vec<&str> = ids.iter().copied().filter(|&i| i != "dead").collect();
    write_manifest(&manifest, &ids, &["dead"]);
    cli_run(dir.path(), &cfg, &["fetch"])?;
    let after = server.total_requests() - before;
    ensure(after == 0, || format!("warm rerun made {after} requests"))?;
    let log = std::fs::read_to_string(dir.path().join("fetch_log.csv")).map_err(|e| e.to_string())?;
    let cached = log.lines().filter(|l| l.contains(",cached,")).count();
    ensure(cached == good.len(), || format!("{cached} cached entries on rerun"))?;
    Ok(format!(
        "{} images, {before} requests, max {per_target} per image, warm rerun 0 requests",
        ids.len()
    ))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("ordinal reconstruction validity", Some(5.0), reconstruction),
        ("AUC oracle equivalence", Some(10.0), auc_oracle),
        ("SMOTE geometry", Some(10.0), smote_geometry),
        ("learner correctness", None, learner_correctness),
        ("synthetic end-to-end", None, end_to_end),
        ("determinism", None, determinism),
        ("grid-search self-consistency", None, grid_consistency),
        ("segmentation proportions and tile math", None, segmentation_and_tiles),
        ("fetcher resilience", None, fetcher_resilience),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        let outcome = match (outcome, budget) {
            (Ok(d), Some(b)) if secs >= b => Err(format!("{d}; took {secs:.2}s, limit {b}s")),
            (o, _) => o,
        };
        match outcome {
            Ok(d) => println!("PASS  {name} ({secs:.2}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.2}s): {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all criteria passed");
        ExitCode::SUCCESS
    }
}
