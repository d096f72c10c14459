use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use epitome_core::analysis::{
    category_stats, emit_report, exceedance_curves, headline_fractions, parse_threshold_range,
};
use epitome_core::classifier::{ClassifierModel, KernelKind};
use epitome_core::epitome::{epitome_from_labels, extract_epitome, BatchRecord, LabelSequence, Outcome};
use epitome_core::pipeline::{evaluate_sketches, render, train_pipeline_with_progress, PipelineConfig};
use epitome_core::raster::{augment as expand, dilate, rasterize, Battery};
use epitome_core::selftest;
use epitome_core::sketch_io::{list_sketch_files, load_dataset, load_sketch_file, Dataset, Sketch};
use epitome_core::synthetic::{generate, SyntheticSpec};

use crate::error::CliError;
use crate::{Overrides, Subset};

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// `results.ndjson` -> `results.ndjson.config.json`.
fn beside(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn write_echo(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    write(path, text + "\n")
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    match path {
        Some(p) => Ok(PipelineConfig::from_json(&read(p)?)?),
        None => Ok(PipelineConfig::default()),
    }
}

/// Keeps file names portable whatever the sketch id contains.
fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub fn convert(input: &Path, out: &Path) -> Result<(), CliError> {
    let files = list_sketch_files(input)?;
    if files.is_empty() {
        return Err(CliError::Data(format!("{}: no sketch files found", input.display())));
    }
    let sketches = files
        .par_iter()
        .map(|(category, path)| load_sketch_file(category, path))
        .collect::<Result<Vec<_>, _>>()?;
    for s in &sketches {
        let path = out.join(&s.category).join(format!("{}.json", file_stem_for(&s.id)));
        write(&path, s.to_json() + "\n")?;
    }
    write_echo(
        &out.join("config.json"),
        &json!({"command": "convert", "in": input, "sketches": sketches.len()}),
    )?;
    eprintln!("converted {} sketches into {}", sketches.len(), out.display());
    Ok(())
}

pub fn augment(
    data: &Path,
    out: &Path,
    config: Option<&Path>,
    battery: Option<&Path>,
    manifest_only: bool,
) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    if let Some(p) = battery {
        cfg.battery = Battery::from_manifest(&read(p)?).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let dataset = load_dataset(data)?;
    create_dir(out)?;
    write(&out.join("battery.json"), cfg.battery.to_manifest() + "\n")?;
    let index: Vec<_> = dataset
        .sketches
        .iter()
        .map(|s| json!({"id": s.id, "category": s.category, "dir": format!("{}/{}", s.category, file_stem_for(&s.id))}))
        .collect();
    write_echo(&out.join("index.json"), &index)?;
    if !manifest_only {
        dataset.sketches.par_iter().try_for_each(|s| -> Result<(), CliError> {
            let dir = out.join(&s.category).join(file_stem_for(&s.id));
            for (k, c) in expand(&render(s, cfg.side)?, &cfg.battery).iter().enumerate() {
                write(&dir.join(format!("{k:02}.pgm")), c.to_pgm())?;
            }
            Ok(())
        })?;
    }
    write_echo(
        &out.join("config.json"),
        &json!({"command": "augment", "data": data, "manifest_only": manifest_only, "pipeline": cfg}),
    )?;
    eprintln!(
        "{} sketches x {} transforms -> {}",
        dataset.len(),
        cfg.battery.transforms().len(),
        out.display()
    );
    Ok(())
}

fn apply_overrides(cfg: &mut PipelineConfig, o: &Overrides) {
    if let Some(v) = o.side {
        cfg.side = v;
    }
    if let Some(v) = o.train_fraction {
        cfg.train_fraction = v;
    }
    if let Some(v) = o.split_seed {
        cfg.split_seed = v;
    }
    if let Some(v) = o.feature_seed {
        cfg.feature_seed = v;
    }
    if let Some(k) = &o.kernel {
        cfg.train.kernel = if k == "rbf" { KernelKind::Rbf } else { KernelKind::Linear };
    }
    if let Some(v) = o.folds {
        cfg.train.folds = v;
    }
    if o.no_augment {
        cfg.augment = false;
    }
}

pub fn train(data: &Path, config: Option<&Path>, out: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    apply_overrides(&mut cfg, overrides);
    cfg.validate()?;
    let dataset = load_dataset(data)?;
    let outcome = train_pipeline_with_progress(&dataset, &cfg, &|m| eprintln!("{m}"))?;
    outcome.model.save(out)?;
    write(&beside(out, ".config.json"), cfg.to_json() + "\n")?;
    write_echo(
        &beside(out, ".report.json"),
        &json!({"cv": outcome.cv, "test": outcome.test, "train_examples": outcome.train_examples}),
    )?;

    println!("cross-validation ({} folds, mean accuracy):", cfg.train.folds);
    for (cand, acc) in &outcome.cv.table {
        let gamma = cand.gamma.map_or("-".to_string(), |g| g.to_string());
        let mark = if *cand == outcome.cv.best { "  <- selected" } else { "" };
        println!("  C={:<8} gamma={:<12} {:.4}{mark}", cand.c, gamma, acc);
    }
    let correct: usize = (0..outcome.test.categories.len()).map(|i| outcome.test.confusion[i][i]).sum();
    println!(
        "test accuracy: {:.4} ({correct}/{})",
        outcome.test.accuracy, outcome.test.total
    );
    Ok(())
}

fn select(dataset: Dataset, cfg: &PipelineConfig, subset: Subset) -> Result<Dataset, CliError> {
    Ok(match subset {
        Subset::All => dataset,
        Subset::Train => cfg.split(&dataset)?.0,
        Subset::Test => cfg.split(&dataset)?.1,
    })
}

fn subset_name(s: Subset) -> &'static str {
    match s {
        Subset::All => "all",
        Subset::Train => "train",
        Subset::Test => "test",
    }
}

pub fn eval(model_path: &Path, data: &Path, subset: Subset) -> Result<(), CliError> {
    let model = ClassifierModel::load(model_path)?;
    let dataset = select(load_dataset(data)?, &model.config, subset)?;
    let report = evaluate_sketches(&model, &dataset.sketches)?;
    let out = json!({
        "model": model_path,
        "subset": subset_name(subset),
        "config": model.config,
        "report": report,
    });
    println!("{}", serde_json::to_string_pretty(&out).map_err(|e| CliError::Internal(e.to_string()))?);
    Ok(())
}

pub struct EpitomeArgs<'a> {
    pub model: Option<&'a Path>,
    pub data: &'a Path,
    pub out: &'a Path,
    pub dump_canvases: bool,
    pub stub_labels: Option<&'a Path>,
    pub side: usize,
    pub subset: Subset,
}

fn stub_outcome(stubs: &BTreeMap<String, Vec<u8>>, s: &Sketch) -> Result<Outcome, CliError> {
    let bits = stubs
        .get(&s.id)
        .ok_or_else(|| CliError::Data(format!("no stub labels for sketch `{}`", s.id)))?;
    if bits.len() != s.len() {
        return Err(CliError::Data(format!(
            "sketch `{}` has {} strokes but {} stub labels",
            s.id,
            s.len(),
            bits.len()
        )));
    }
    Ok(epitome_from_labels(&s.id, &s.category, LabelSequence::new(bits.clone())?)?)
}

pub fn epitome(a: EpitomeArgs) -> Result<(), CliError> {
    let model = a.model.map(ClassifierModel::load).transpose()?;
    let stubs: Option<BTreeMap<String, Vec<u8>>> = a
        .stub_labels
        .map(|p| {
            serde_json::from_str(&read(p)?)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        })
        .transpose()?;
    let dataset = load_dataset(a.data)?;
    let (dataset, side) = match &model {
        Some(m) => (select(dataset, &m.config, a.subset)?, m.side()),
        None if a.subset == Subset::All => (dataset, a.side),
        None => return Err(CliError::Usage("--subset needs --model to recompute the split".into())),
    };

    let outcomes = dataset
        .sketches
        .par_iter()
        .map(|s| match (&stubs, &model) {
            (Some(st), _) => stub_outcome(st, s),
            (None, Some(m)) => Ok(extract_epitome(m, s)?),
            (None, None) => unreachable!("clap requires --model or --stub-labels"),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let file = fs::File::create(a.out).map_err(|e| CliError::io(a.out, e))?;
    let mut w = BufWriter::new(file);
    for o in &outcomes {
        if let Some(r) = o.epitome() {
            r.check().map_err(|v| CliError::Internal(format!("{}: {v}", r.id)))?;
        }
        writeln!(w, "{}", o.to_record()).map_err(|e| CliError::io(a.out, e))?;
    }
    w.flush().map_err(|e| CliError::io(a.out, e))?;

    if a.dump_canvases {
        let dir = beside(a.out, ".canvases");
        create_dir(&dir)?;
        for (s, o) in dataset.sketches.iter().zip(&outcomes) {
            if let Some(r) = o.epitome() {
                let c = dilate(&rasterize(s, r.e, side)?);
                write(&dir.join(format!("{}_S{}.pgm", file_stem_for(&r.id), r.e)), c.to_pgm())?;
            }
        }
    }

    let epitomes = outcomes.iter().filter(|o| o.epitome().is_some()).count();
    write_echo(
        &beside(a.out, ".config.json"),
        &json!({
            "command": "epitome",
            "data": a.data,
            "model": a.model,
            "stub_labels": a.stub_labels,
            "subset": subset_name(a.subset),
            "side": side,
            "pipeline": model.as_ref().map(|m| &m.config),
        }),
    )?;
    eprintln!(
        "{} sketches: {} epitomizable, {} not epitomizable",
        outcomes.len(),
        epitomes,
        outcomes.len() - epitomes
    );
    Ok(())
}

pub fn analyze(results: &Path, out: &Path, cutoffs: &[f64], thresholds: &str) -> Result<(), CliError> {
    let thresholds = parse_threshold_range(thresholds)?;
    let text = read(results)?;
    let mut epitomes = Vec::new();
    let mut skipped = 0;
    for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let record: BatchRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Data(format!("{}:{}: {e}", results.display(), line_no + 1)))?;
        let outcome = record
            .to_outcome()
            .map_err(|e| CliError::Data(format!("{}:{}: {e}", results.display(), line_no + 1)))?;
        match outcome {
            Outcome::Epitome(r) => epitomes.push(r),
            Outcome::NotEpitomizable { .. } => skipped += 1,
        }
    }
    let stats = category_stats(&epitomes)?;
    let curves = exceedance_curves(&epitomes, &thresholds)?;
    let files = emit_report(&stats, &curves, out)?;
    let headline = headline_fractions(&stats, cutoffs);
    write_echo(
        &out.join("headline.json"),
        &json!({"headline": headline, "epitomizable": epitomes.len(), "not_epitomizable": skipped}),
    )?;
    write_echo(
        &out.join("config.json"),
        &json!({"command": "analyze", "results": results, "cutoffs": cutoffs, "thresholds": thresholds}),
    )?;
    for h in &headline {
        println!(
            "median below {}: {}/{} categories ({})",
            h.cutoff, h.below, h.total, h.fraction
        );
    }
    eprintln!(
        "{} epitomizable results in {} categories ({} skipped) -> {}, {}, {}, {}",
        epitomes.len(),
        stats.len(),
        skipped,
        files.stats_csv.display(),
        files.exceedance_csv.display(),
        files.fig3.display(),
        files.fig4.display()
    );
    Ok(())
}

pub fn selftest() -> Result<(), CliError> {
    let results = selftest::run_all();
    for r in &results {
        println!("{}: {} ({})", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
    }
    match results.iter().find(|r| !r.passed) {
        Some(r) => Err(CliError::Internal(format!("selftest {} failed: {}", r.name, r.detail))),
        None => Ok(()),
    }
}

pub fn synth(out: &Path, per_category: usize, seed: u64, jitter: f64) -> Result<(), CliError> {
    if per_category == 0 || !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(CliError::Usage("per-category must be positive and jitter non-negative".into()));
    }
    let spec = SyntheticSpec {
        per_category,
        seed,
        jitter,
        ..Default::default()
    };
    let dataset = generate(&spec);
    for s in &dataset.sketches {
        write(&out.join(&s.category).join(format!("{}.json", s.id)), s.to_json() + "\n")?;
    }
    write_echo(
        &out.join("config.json"),
        &json!({"command": "synth", "per_category": per_category, "seed": seed, "jitter": jitter, "extent": spec.extent}),
    )?;
    eprintln!("wrote {} sketches to {}", dataset.len(), out.display());
    Ok(())
}
