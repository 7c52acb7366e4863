use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use cxr_core::eval::{run_cv, CvConfig, MetricsReport};
use cxr_core::features::FEATURE_DIM;
use cxr_core::preprocess::{preprocess, read_manifest, ManifestEntry};
use cxr_core::resnet::{build_resnet50, ModelWeights, ResNet50Graph};
use cxr_core::{FeatureMatrix, Tensor};

use crate::config::{KernelName, PipelineConfig, WeightsSource};
use crate::error::CliError;
use crate::features_io::{load_features, save_features};

fn load_weights(graph: &ResNet50Graph, source: &WeightsSource) -> Result<ModelWeights, CliError> {
    match source {
        WeightsSource::Random(seed) => Ok(ModelWeights::random(graph, *seed)),
        WeightsSource::File(path) => {
            ModelWeights::load(graph, path).map_err(|e| CliError::data(format!("weights {}", path.display()), e))
        }
    }
}

fn load_image(entry: &ManifestEntry, cfg: &PipelineConfig) -> Result<Tensor, CliError> {
    let bytes = fs::read(&entry.path).map_err(|e| CliError::data(entry.path.display(), e))?;
    preprocess(&bytes, &cfg.preprocess).map_err(|e| CliError::data(entry.path.display(), e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    if dir.as_os_str().is_empty() {
        return Ok(());
    }
    fs::create_dir_all(dir).map_err(|e| CliError::data(dir.display(), e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::data(path.display(), e))
}

/// Runs every manifest image through ResNet-50 and writes the feature file.
/// Nothing is left at the destination if any sample fails.
pub fn cmd_extract(cfg: &PipelineConfig) -> Result<PathBuf, CliError> {
    let manifest = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| CliError::Usage("extract needs --manifest".into()))?;
    let source = cfg
        .weights
        .as_ref()
        .ok_or_else(|| CliError::Usage("extract needs --weights".into()))?;
    let entries = read_manifest(manifest).map_err(|e| CliError::Data(e.to_string()))?;
    let graph = build_resnet50();
    let weights = load_weights(&graph, source)?;

    let dest = cfg.features.clone();
    ensure_dir(dest.parent().unwrap_or(Path::new("")))?;
    let partial = dest.with_extension("csv.partial");
    let result = extract_rows(&graph, &weights, &entries, cfg).and_then(|fm| {
        save_features(&partial, &fm)?;
        fs::rename(&partial, &dest).map_err(|e| CliError::data(dest.display(), e))
    });
    if result.is_err() {
        let _ = fs::remove_file(&partial);
    }
    result.map(|_| dest)
}

fn extract_rows(
    graph: &ResNet50Graph,
    weights: &ModelWeights,
    entries: &[ManifestEntry],
    cfg: &PipelineConfig,
) -> Result<FeatureMatrix, CliError> {
    let mut fm = FeatureMatrix::new(FEATURE_DIM);
    for chunk in entries.chunks(cfg.batch_size) {
        let inputs = chunk
            .par_iter()
            .map(|e| load_image(e, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        let batch = Tensor::stack(&inputs).map_err(|e| CliError::data(chunk[0].path.display(), e))?;
        let out = graph
            .forward(weights, &batch)
            .map_err(|e| CliError::data(chunk[0].path.display(), e))?;
        for (entry, row) in chunk.iter().zip(out.data().chunks_exact(FEATURE_DIM)) {
            fm.push_row(entry.id.clone(), entry.label.index(), row)
                .map_err(|e| CliError::data(entry.path.display(), e))?;
        }
    }
    Ok(fm)
}

pub fn report_path(out: &Path, kernel: KernelName) -> PathBuf {
    out.join(format!("report_{kernel}.json"))
}

/// Cross-validates every configured kernel on the feature file. Writes
/// `report_<kernel>.json`, `confusion_<kernel>.csv`, `roc_<kernel>.csv` and
/// the combined `table.csv`, returning the report paths.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
    let fm = load_features(&cfg.features)?;
    if fm.is_empty() {
        return Err(CliError::Data(format!("{}: no samples", cfg.features.display())));
    }
    ensure_dir(&cfg.out)?;
    let mut table = csv::Writer::from_writer(Vec::new());
    table
        .write_record(["Method", "Class", "SEN", "SPE", "ACC"])
        .expect("in-memory write");
    let mut written = Vec::new();
    for &kernel in &cfg.kernels {
        let cv = CvConfig {
            kernel: cfg.kernel_spec(kernel, fm.dim())?,
            params: cfg.svm_params(),
            k: cfg.folds,
            repeats: cfg.repeats,
            seed: cfg.seed,
        };
        let report = run_cv(&fm, &cv).map_err(|e| CliError::from_eval(kernel.method(), e))?;
        let json = serde_json::to_vec_pretty(&report).expect("report serialises");
        let path = report_path(&cfg.out, kernel);
        write_file(&path, &json)?;
        write_file(&cfg.out.join(format!("confusion_{kernel}.csv")), report.confusion_csv().as_bytes())?;
        write_file(&cfg.out.join(format!("roc_{kernel}.csv")), report.roc_csv().as_bytes())?;
        for name in &report.config.classes {
            let m = &report.mean[name];
            table
                .write_record([
                    kernel.method().to_string(),
                    name.clone(),
                    format!("{:.2}", m.sen),
                    format!("{:.2}", m.spe),
                    format!("{:.2}", m.acc),
                ])
                .expect("in-memory write");
        }
        written.push(path);
    }
    write_file(&cfg.out.join("table.csv"), &table.into_inner().expect("in-memory flush"))?;
    Ok(written)
}

fn method_name(report: &MetricsReport) -> String {
    report
        .config
        .kernel_name
        .parse::<KernelName>()
        .map(|k| k.method().to_string())
        .unwrap_or_else(|_| report.config.kernel_name.clone())
}

/// Report files named on the command line; directories expand to their
/// `report_*.json` files in name order.
pub fn collect_reports(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::data(p.display(), e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("report_") && n.ends_with(".json"))
                })
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no report files given".into()));
    }
    Ok(out)
}

pub fn load_report(path: &Path) -> Result<MetricsReport, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::data(path.display(), e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::data(path.display(), e))
}

/// Prints the per-kernel, per-class table (mean ± std over repeats) and the
/// pooled AUCs. With `roc_out`, also writes one `roc_<kernel>.csv` polyline
/// file per report there.
pub fn cmd_report<W: Write>(inputs: &[PathBuf], roc_out: Option<&Path>, w: &mut W) -> Result<(), CliError> {
    let reports = collect_reports(inputs)?
        .iter()
        .map(|p| load_report(p))
        .collect::<Result<Vec<_>, _>>()?;
    let io = |e: std::io::Error| CliError::Data(format!("writing summary: {e}"));
    writeln!(w, "{:<15} {:<16} {:>15} {:>15} {:>15}", "Method", "Class", "SEN", "SPE", "ACC").map_err(io)?;
    for r in &reports {
        let method = method_name(r);
        for name in &r.config.classes {
            let (m, s) = (&r.mean[name], &r.std[name]);
            let cell = |a: f64, b: f64| format!("{a:.2} ± {b:.2}");
            writeln!(
                w,
                "{:<15} {:<16} {:>15} {:>15} {:>15}",
                method,
                name,
                cell(m.sen, s.sen),
                cell(m.spe, s.spe),
                cell(m.acc, s.acc)
            )
            .map_err(io)?;
        }
    }
    writeln!(w).map_err(io)?;
    writeln!(w, "{:<15} {:<16} {:>8}", "Method", "Class", "AUC").map_err(io)?;
    for r in &reports {
        let method = method_name(r);
        for name in &r.config.classes {
            writeln!(w, "{:<15} {:<16} {:>8.4}", method, name, r.auc[name]).map_err(io)?;
        }
    }
    if let Some(dir) = roc_out {
        ensure_dir(dir)?;
        for r in &reports {
            write_file(&dir.join(format!("roc_{}.csv", r.config.kernel_name)), r.roc_csv().as_bytes())?;
        }
    }
    Ok(())
}
