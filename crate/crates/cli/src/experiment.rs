use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::Value;
use spectral_bench::data::{format_value, load_csv, LabeledDataset};
use spectral_bench::embed::{tsne_embed, TsneConfig};
use spectral_bench::eval::{
    cross_validate, nested_search, CvOptions, CvOutcome, CvReport, ParamSet, Trainer,
};
use spectral_bench::{apply_sg, Checkpoint};

use crate::config::{ExperimentConfig, Mode, Preprocessing};
use crate::error::{CliError, CliResult};
use crate::report::{ConfigEcho, DatasetSummary, ExperimentReport, ReportBody, RunInfo, SCHEMA_VERSION};

pub const REPORT_FILE: &str = "report.json";
pub const FOLDS_FILE: &str = "folds.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const EMBED_FILE: &str = "embed.csv";

pub fn confusion_file(fold: usize) -> String {
    format!("confusion_fold{fold}.csv")
}

/// Load the dataset, apply the positive-class choice and preprocessing.
pub fn prepare_dataset(
    path: &Path,
    positive: Option<&str>,
    preprocessing: &Preprocessing,
) -> CliResult<LabeledDataset> {
    let dataset_err = |source| CliError::Dataset {
        path: path.to_path_buf(),
        source,
    };
    let mut data = load_csv(path).map_err(dataset_err)?;
    if let Some(name) = positive {
        data = data
            .with_positive_class(name)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match preprocessing.spec()? {
        Some(spec) => apply_sg(&data, &spec).map_err(dataset_err),
        None => Ok(data),
    }
}

/// Perplexity used for automatic embeddings: 30, or less for small sets.
pub fn auto_perplexity(n: usize) -> f64 {
    30.0f64.min((n as f64 - 1.0) / 3.0)
}

/// `x,y,label` rows preceded by `#` lines describing the run.
pub fn embed_csv(data: &LabeledDataset, config: &TsneConfig) -> CliResult<String> {
    let result = tsne_embed(data.rows(), config)?;
    let mut s = String::new();
    writeln!(
        s,
        "# t-SNE perplexity={} iterations={} learning_rate={} early_exaggeration={} exaggeration_iterations={} seed={}",
        config.perplexity,
        config.iterations,
        config.learning_rate,
        config.early_exaggeration,
        config.exaggeration_iterations,
        config.seed
    )
    .unwrap();
    let kl: Vec<String> = result
        .kl_trace
        .iter()
        .map(|k| format!("{}:{}", k.iteration, format_value(k.kl)))
        .collect();
    writeln!(s, "# kl {}", kl.join(" ")).unwrap();
    s.push_str("x,y,label\n");
    for (c, &l) in result.coords.iter().zip(data.labels()) {
        writeln!(
            s,
            "{},{},{}",
            format_value(c[0]),
            format_value(c[1]),
            data.class_names()[l]
        )
        .unwrap();
    }
    Ok(s)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or(String::new(), format_value)
}

pub fn folds_csv(report: &CvReport) -> String {
    let mut s = String::from("fold,test_size,accuracy,specificity,sensitivity,train_seconds,params\n");
    for (f, secs) in report.folds.iter().zip(&report.train_seconds) {
        let params = f.params.as_ref().map_or(String::new(), ParamSet::to_string);
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            f.fold,
            f.test_size,
            format_value(f.accuracy),
            opt_cell(f.metrics.specificity),
            opt_cell(f.metrics.sensitivity),
            format_value(*secs),
            params
        )
        .unwrap();
    }
    s
}

fn run_cv(config: &ExperimentConfig, mode: Mode, data: &LabeledDataset) -> CliResult<CvOutcome> {
    let opts = CvOptions {
        k: config.k,
        seed: config.seed,
        stratified: config.stratified,
        parallel: true,
    };
    match mode {
        Mode::Cv => Ok(cross_validate(&config.algorithm, data, &opts)?),
        Mode::NestedCv => {
            let grid = config
                .grid
                .as_ref()
                .ok_or_else(|| CliError::Config("nested cross-validation needs a grid".into()))?;
            let candidates = match config.search_samples {
                Some(m) => grid.sample(m, config.seed),
                None => grid.combinations(),
            };
            let base = &config.algorithm;
            let factory = |p: &ParamSet| -> spectral_bench::Result<Box<dyn Trainer>> {
                Ok(Box::new(base.with_params(p)?))
            };
            Ok(nested_search(&factory, &candidates, data, &opts)?)
        }
    }
}

/// Tag a model checkpoint with what `predict` needs to reuse it.
pub fn annotate_checkpoint(
    ck: &mut Checkpoint,
    data: &LabeledDataset,
    preprocessing: &Preprocessing,
    params: Option<&ParamSet>,
) {
    let meta = &mut ck.metadata;
    meta.insert("class_names".into(), serde_json::to_value(data.class_names()).unwrap());
    meta.insert("grid".into(), serde_json::to_value(data.grid()).unwrap());
    meta.insert("preprocessing".into(), serde_json::to_value(preprocessing).unwrap());
    if let Some(p) = params {
        meta.insert("params".into(), serde_json::to_value(p).unwrap());
    }
    meta.insert("tool_version".into(), Value::from(env!("CARGO_PKG_VERSION")));
}

fn check_output_dir(out: &Path, force: bool) -> CliResult<()> {
    if out.exists() && !force {
        return Err(CliError::Config(format!(
            "output directory {} already exists (use --force to replace it)",
            out.display()
        )));
    }
    Ok(())
}

/// Write `files` into a fresh directory next to `out`, then move it into place.
pub fn write_atomically(out: &Path, force: bool, files: &[(String, Vec<u8>)]) -> CliResult<()> {
    check_output_dir(out, force)?;
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => Path::new(".").to_path_buf(),
    };
    fs::create_dir_all(&parent).map_err(|e| CliError::io(&parent, e))?;
    let tmp = tempfile::Builder::new()
        .prefix(".spectral-bench-")
        .tempdir_in(&parent)
        .map_err(|e| CliError::io(&parent, e))?;
    for (name, bytes) in files {
        let path = tmp.path().join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    }
    if out.exists() {
        fs::remove_dir_all(out).map_err(|e| CliError::io(out, e))?;
    }
    let staged = tmp.keep();
    fs::rename(&staged, out).map_err(|e| {
        let _ = fs::remove_dir_all(&staged);
        CliError::io(out, e)
    })
}

/// Load, preprocess, cross-validate and write the run directory.
pub fn run_experiment(config: &ExperimentConfig, mode: Mode, force: bool) -> CliResult<ExperimentReport> {
    let start = Instant::now();
    config.validate(mode)?;
    check_output_dir(&config.out, force)?;
    let data = prepare_dataset(&config.dataset, config.positive.as_deref(), &config.preprocessing)?;
    let outcome = run_cv(config, mode, &data)?;
    let results = outcome.report;

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    if let Some(mut ck) = outcome.representative.checkpoint() {
        annotate_checkpoint(
            &mut ck,
            &data,
            &config.preprocessing,
            results.representative_params.as_ref(),
        );
        ck.metadata
            .insert("representative_fold".into(), Value::from(results.representative_fold));
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes)?;
        files.push((CHECKPOINT_FILE.into(), bytes));
    }
    files.push((FOLDS_FILE.into(), folds_csv(&results).into_bytes()));
    for f in &results.folds {
        files.push((confusion_file(f.fold), f.confusion.to_csv(data.class_names()).into_bytes()));
    }
    if config.embed {
        let tsne = TsneConfig {
            perplexity: auto_perplexity(data.len()),
            seed: config.seed,
            ..TsneConfig::default()
        };
        files.push((EMBED_FILE.into(), embed_csv(&data, &tsne)?.into_bytes()));
    }

    let path = config.dataset.display().to_string();
    let name = config
        .dataset
        .file_stem()
        .map_or_else(|| path.clone(), |s| s.to_string_lossy().into_owned());
    let train_seconds = results.train_seconds.clone();
    let mut report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        body: ReportBody {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: ConfigEcho::new(config, mode),
            dataset: DatasetSummary {
                path,
                name,
                samples: data.len(),
                features: data.num_features(),
                class_names: data.class_names().to_vec(),
                class_counts: data.class_counts(),
            },
            results,
            checkpoint: CHECKPOINT_FILE.into(),
        },
        run: RunInfo {
            output_dir: config.out.display().to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            train_seconds,
            total_seconds: 0.0,
        },
    };
    report.run.total_seconds = start.elapsed().as_secs_f64();
    files.push((REPORT_FILE.into(), report.to_json().into_bytes()));
    write_atomically(&config.out, force, &files)?;
    Ok(report)
}
