use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use spectral_bench::data::{format_value, load_csv, save_csv, LabeledDataset, SampleView};
use spectral_bench::embed::TsneConfig;
use spectral_bench::eval::Trainer;
use spectral_bench::{apply_sg, Algorithm, Checkpoint, Rng, SgFilterSpec, TrainedModel};

use crate::config::Preprocessing;
use crate::error::{CliError, CliResult};
use crate::experiment::{annotate_checkpoint, embed_csv, prepare_dataset};

fn load(path: &Path) -> CliResult<LabeledDataset> {
    load_csv(path).map_err(|source| CliError::Dataset {
        path: path.to_path_buf(),
        source,
    })
}

pub fn preprocess_file(input: &Path, output: &Path, spec: &SgFilterSpec) -> CliResult<()> {
    let data = load(input)?;
    let filtered = apply_sg(&data, spec).map_err(|source| CliError::Dataset {
        path: input.to_path_buf(),
        source,
    })?;
    save_csv(&filtered, output)?;
    Ok(())
}

pub fn embed_file(input: &Path, output: &Path, config: &TsneConfig) -> CliResult<()> {
    let data = load(input)?;
    let text = embed_csv(&data, config)?;
    fs::write(output, text).map_err(|e| CliError::io(output, e))
}

pub struct TrainRequest<'a> {
    pub dataset: &'a Path,
    pub preprocessing: Preprocessing,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub positive: Option<&'a str>,
    pub model: &'a Path,
}

/// Fit on the whole dataset and write the checkpoint.
pub fn train_file(req: &TrainRequest<'_>) -> CliResult<()> {
    req.algorithm
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let data = prepare_dataset(req.dataset, req.positive, &req.preprocessing)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let model = req
        .algorithm
        .fit(SampleView::new(&data, &all), &mut Rng::new(req.seed))?;
    let mut ck = model
        .checkpoint()
        .ok_or_else(|| CliError::Other("model cannot be checkpointed".into()))?;
    annotate_checkpoint(&mut ck, &data, &req.preprocessing, None);
    ck.save(req.model)?;
    Ok(())
}

pub struct PredictRequest<'a> {
    pub model: &'a Path,
    pub dataset: &'a Path,
    /// Skip the preprocessing recorded in the checkpoint.
    pub raw: bool,
    pub output: Option<&'a Path>,
    pub dump_features: Option<&'a Path>,
}

pub struct PredictSummary {
    pub samples: usize,
    /// Fraction of rows whose label matches the prediction, when every input
    /// label is one of the model's classes.
    pub accuracy: Option<f64>,
    pub csv: String,
}

pub fn predict_file(req: &PredictRequest<'_>) -> CliResult<PredictSummary> {
    let ck = Checkpoint::load(req.model)?;
    let model = TrainedModel::from_checkpoint(&ck)?;
    let class_names: Vec<String> = match ck.metadata.get("class_names") {
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| CliError::Other(format!("bad class_names in checkpoint: {e}")))?,
        None => (0..model.num_classes()).map(|i| i.to_string()).collect(),
    };
    let preprocessing: Preprocessing = match ck.metadata.get("preprocessing") {
        Some(v) if !req.raw => serde_json::from_value(v.clone())
            .map_err(|e| CliError::Other(format!("bad preprocessing in checkpoint: {e}")))?,
        _ => Preprocessing::None,
    };
    let data = prepare_dataset(req.dataset, None, &preprocessing)?;
    let (classes, scores) = model.predict_scores(data.rows())?;

    let mut csv = String::from("index,label,predicted");
    for name in &class_names {
        write!(csv, ",score_{name}").unwrap();
    }
    csv.push('\n');
    let mut correct = 0;
    let mut comparable = true;
    for (i, (&pred, s)) in classes.iter().zip(&scores).enumerate() {
        let truth = &data.class_names()[data.labels()[i]];
        comparable &= class_names.contains(truth);
        correct += usize::from(*truth == class_names[pred]);
        write!(csv, "{i},{truth},{}", class_names[pred]).unwrap();
        for v in s {
            write!(csv, ",{}", format_value(*v)).unwrap();
        }
        csv.push('\n');
    }
    if let Some(out) = req.output {
        fs::write(out, &csv).map_err(|e| CliError::io(out, e))?;
    }
    if let Some(path) = req.dump_features {
        let TrainedModel::Cnn(cnn) = &model else {
            return Err(CliError::Config(format!(
                "--dump-features needs a CNN checkpoint, got {}",
                model.algorithm()
            )));
        };
        let features = cnn.features(data.rows())?;
        let width = features.first().map_or(0, Vec::len);
        let dumped = LabeledDataset::new(
            (0..width).map(|j| j as f64).collect(),
            features,
            data.labels().to_vec(),
            data.class_names().to_vec(),
        )?;
        save_csv(&dumped, path)?;
    }
    Ok(PredictSummary {
        samples: data.len(),
        accuracy: comparable.then(|| correct as f64 / data.len() as f64),
        csv,
    })
}
