use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dcunet_core::arch::{
    count_params, relative_error, summarize, sweep_conventions, ArchBuilder, Architecture, Convention, CountConvention,
    GraphSpec,
};
use dcunet_core::checkpoint;
use dcunet_core::data::{
    load_batch, load_gray, save_gray, synth_blobs, tensor_to_images, DatasetManifest, SynthConfig, MANIFEST_NAME,
};
use dcunet_core::metrics::{mean_std, robustness_experiment, tanimoto, CompareOptions, Measure, MetricReport};
use dcunet_core::train::{cross_validate, kfold_split, select, train, AdamConfig, TrainConfig};
use dcunet_core::kernels::NormMode;
use dcunet_core::{Error, Model};

use crate::args::*;

/// Failure carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    /// Training stopped early; the partial outputs were still written.
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_data_error() => 2,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(_) => 1,
            CliError::Diverged(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Diverged(m) => write!(f, "training diverged: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Treats any failure while reading `path` as a data error.
fn as_data(path: &Path, e: Error) -> CliError {
    if e.is_data_error() {
        CliError::Core(e)
    } else {
        CliError::Core(Error::Data {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?,
        None => print!("{text}"),
    }
    Ok(())
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Core(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

fn architecture(a: ArchChoice) -> Architecture {
    match a {
        ArchChoice::Unet => Architecture::UNet,
        ArchChoice::Multires => Architecture::MultiResUNet,
        ArchChoice::Dcunet => Architecture::DcUNet,
    }
}

/// Builds the graph up front so that bad widths fail before any file is touched.
fn build_spec(m: &ModelArgs) -> CliResult<GraphSpec> {
    let arch = architecture(m.arch);
    let convention = Convention {
        conv_norm_scale: m.bn_scale,
        ..Convention::reference()
    };
    let filters = m.filters.clone().unwrap_or_else(|| arch.reference_filters().to_vec());
    ArchBuilder::with_convention(convention)
        .build(arch, &filters, 1)
        .map_err(|e| usage(e.to_string()))
}

fn new_model(spec: &GraphSpec, seed: u64, momentum: f64) -> dcunet_core::Result<Model<f32>> {
    let mut model = Model::new(spec.clone(), seed)?;
    model.norm.momentum = momentum;
    Ok(model)
}

fn train_config(o: &OptimArgs) -> CliResult<TrainConfig> {
    let config = TrainConfig {
        adam: AdamConfig {
            learning_rate: o.lr,
            ..AdamConfig::default()
        },
        epochs: o.epochs,
        batch_size: o.batch,
        per_pixel_mean: o.per_pixel_mean,
        shuffle: !o.no_shuffle,
        seed: o.seed,
        checkpoint: None,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    if !(o.bn_momentum >= 0.0 && o.bn_momentum < 1.0) {
        return Err(usage(format!("--bn-momentum must lie in [0, 1), got {}", o.bn_momentum)));
    }
    Ok(config)
}

pub fn params(a: &ParamsArgs) -> CliResult {
    let mut s = String::new();
    match a.convention {
        ConventionMode::Sweep => {
            if a.filters.is_some() {
                return Err(usage("--filters applies to fixed mode; the sweep uses the published widths"));
            }
            let sweep = sweep_conventions(&ArchBuilder::default())?;
            writeln!(s, "best,convention,counting,unet,multires,dcunet,max_rel_error").unwrap();
            for (i, e) in sweep.entries.iter().enumerate() {
                let CountConvention { structure, counting } = e.convention;
                writeln!(
                    s,
                    "{},{structure},{counting},{},{},{},{:.6e}",
                    if i == sweep.best { "*" } else { "" },
                    e.totals[0],
                    e.totals[1],
                    e.totals[2],
                    e.max_rel_error
                )
                .unwrap();
            }
        }
        ConventionMode::Fixed => {
            let archs: Vec<Architecture> = match a.arch {
                Some(c) => vec![architecture(c)],
                None => Architecture::ALL.to_vec(),
            };
            if a.filters.is_some() && archs.len() != 1 {
                return Err(usage("--filters needs a single --arch"));
            }
            let builder = ArchBuilder::default();
            let counting = CountConvention::reference().counting;
            let mut specs = Vec::new();
            for &arch in &archs {
                let filters = a.filters.clone().unwrap_or_else(|| arch.reference_filters().to_vec());
                let spec = builder.build(arch, &filters, 1).map_err(|e| usage(e.to_string()))?;
                specs.push((arch, filters, spec));
            }
            for (arch, filters, spec) in specs {
                let ledger = count_params(&spec, counting)?;
                writeln!(s, "# {arch} filters {filters:?}").unwrap();
                writeln!(s, "path,kind,trainable,moving").unwrap();
                for r in &ledger.rows {
                    writeln!(s, "{},{},{},{}", r.path, r.kind, r.trainable, r.moving).unwrap();
                }
                let (total, trainable) = (ledger.total(), ledger.trainable());
                writeln!(s, "# total {total} (trainable {trainable}, moving {})", total - trainable).unwrap();
                if filters == arch.reference_filters() {
                    let published = arch.published_total();
                    let err = relative_error(total, published);
                    writeln!(s, "# published {published} relative error {err:.6e}").unwrap();
                }
            }
        }
    }
    emit(a.out.as_deref(), &s)
}

pub fn summarize_cmd(a: &SummarizeArgs) -> CliResult {
    let spec = build_spec(&a.model)?;
    let text = match a.format {
        SummaryFormat::Table => summarize(&spec)?,
        SummaryFormat::Graph => spec.to_text()?,
    };
    emit(a.out.as_deref(), &text)
}

fn load_manifest(path: &Path) -> CliResult<DatasetManifest> {
    Ok(DatasetManifest::load(path)?)
}

pub fn train_cmd(a: &TrainArgs) -> CliResult {
    let spec = build_spec(&a.model)?;
    let mut config = train_config(&a.optim)?;
    let manifest = load_manifest(&a.manifest)?;
    if a.holdout >= manifest.len() {
        return Err(usage(format!(
            "--holdout {} leaves no training items out of {}",
            a.holdout,
            manifest.len()
        )));
    }
    let all: Vec<usize> = (0..manifest.len()).collect();
    let data = load_batch::<f32>(&manifest, &all)?;
    let cut = manifest.len() - a.holdout;
    let train_set = select(&data, &all[..cut])?;
    let val = if a.holdout > 0 {
        Some(select(&data, &all[cut..])?)
    } else {
        None
    };
    let mut model = new_model(&spec, a.optim.seed, a.optim.bn_momentum)?;
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        config.checkpoint = Some(dir.join("model.ckpt"));
    }
    let outcome = train(&mut model, &train_set, val.as_ref(), &config)?;
    let log = outcome.log.to_csv();
    match &a.out {
        Some(dir) => emit(Some(&dir.join("train_log.csv")), &log)?,
        None => emit(None, &log)?,
    }
    match outcome.diverged {
        Some(msg) => Err(CliError::Diverged(msg)),
        None => Ok(()),
    }
}

pub fn cv_cmd(a: &CvArgs) -> CliResult {
    let spec = build_spec(&a.model)?;
    let config = train_config(&a.optim)?;
    if a.k < 2 {
        return Err(usage(format!("--k must be at least 2, got {}", a.k)));
    }
    let manifest = load_manifest(&a.manifest)?;
    let groups = if a.by_group {
        Some(manifest.groups().ok_or_else(|| usage("--by-group needs a manifest with group labels"))?)
    } else {
        None
    };
    let plan = kfold_split(manifest.len(), a.k, a.optim.seed, groups.as_deref()).map_err(|e| usage(e.to_string()))?;
    let all: Vec<usize> = (0..manifest.len()).collect();
    let data = load_batch::<f32>(&manifest, &all)?;
    let momentum = a.optim.bn_momentum;
    let report = cross_validate(|seed| new_model(&spec, seed, momentum), &data, &plan, &config)?;
    emit(a.out.as_deref(), &report.to_csv())
}

pub fn eval_cmd(a: &EvalArgs) -> CliResult {
    let spec = build_spec(&a.model)?;
    if a.batch == 0 {
        return Err(usage("--batch must be at least 1"));
    }
    let manifest = load_manifest(&a.manifest)?;
    let mut model = Model::<f32>::new(spec, 0)?;
    let records = checkpoint::load(&a.checkpoint)?;
    model.load_records(&records).map_err(|e| as_data(&a.checkpoint, e))?;
    let all: Vec<usize> = (0..manifest.len()).collect();
    let data = load_batch::<f32>(&manifest, &all)?;

    let mut preds = Vec::with_capacity(all.len());
    for chunk in all.chunks(a.batch) {
        let part = select(&data, chunk)?;
        let p = model
            .predict(&part.images, NormMode::Inference)
            .map_err(|e| as_data(&a.checkpoint, e))?;
        preds.extend(tensor_to_images(&p)?);
    }
    let truths = tensor_to_images(&data.masks)?;
    let mut csv = String::from("item,tanimoto\n");
    let mut scores = Vec::with_capacity(preds.len());
    for ((item, p), t) in manifest.items.iter().zip(&preds).zip(&truths) {
        let v = tanimoto(p, t)?;
        scores.push(v);
        writeln!(csv, "{},{v:.6}", item.image.display()).unwrap();
    }
    let (mean, std) = mean_std(&scores);
    writeln!(csv, "# mean,{mean:.6}\n# std,{std:.6}").unwrap();
    match &a.out {
        Some(dir) => {
            create_dir(dir)?;
            for (i, p) in preds.iter().enumerate() {
                save_gray(&dir.join(format!("pred_{i:04}.pgm")), p)?;
            }
            emit(Some(&dir.join("eval.csv")), &csv)
        }
        None => emit(None, &csv),
    }
}

fn parse_measures(s: &str) -> CliResult<Vec<Measure>> {
    if s == "all" {
        return Ok(Measure::ALL.to_vec());
    }
    s.split(',')
        .map(|m| Measure::parse(m.trim()).ok_or_else(|| usage(format!("unknown measure `{m}`"))))
        .collect()
}

/// Pairs files by name when both paths are directories.
fn metric_pairs(pred: &Path, truth: &Path) -> CliResult<Vec<(String, PathBuf, PathBuf)>> {
    if pred.is_dir() && truth.is_dir() {
        let entries = fs::read_dir(pred).map_err(|e| Error::Io {
            path: pred.to_path_buf(),
            source: e,
        })?;
        let mut names: Vec<String> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".pgm"))
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(CliError::Core(Error::Data {
                path: pred.to_path_buf(),
                message: "no .pgm files".into(),
            }));
        }
        Ok(names.into_iter().map(|n| (n.clone(), pred.join(&n), truth.join(&n))).collect())
    } else {
        let label = pred.file_name().map_or_else(|| "pred".into(), |n| n.to_string_lossy().into_owned());
        Ok(vec![(label, pred.to_path_buf(), truth.to_path_buf())])
    }
}

pub fn metrics_cmd(a: &MetricsArgs) -> CliResult {
    let measures = parse_measures(&a.measure)?;
    let options = CompareOptions {
        otsu: a.otsu,
        ..CompareOptions::default()
    };
    let mut pairs = Vec::new();
    for (label, p, t) in metric_pairs(&a.pred, &a.truth)? {
        let (pi, ti) = (load_gray(&p)?, load_gray(&t)?);
        if !pi.same_size(&ti) {
            return Err(CliError::Core(Error::Data {
                path: p,
                message: format!(
                    "{}×{} prediction against {}×{} truth",
                    pi.width(),
                    pi.height(),
                    ti.width(),
                    ti.height()
                ),
            }));
        }
        pairs.push((label, pi, ti));
    }
    let report = MetricReport::evaluate(&pairs, &measures, &options)?;
    emit(a.out.as_deref(), &report.to_csv())
}

pub fn robustness_cmd(a: &RobustnessArgs) -> CliResult {
    if a.sizes.contains(&0) {
        return Err(usage("--sizes must be positive"));
    }
    if a.ratios.iter().any(|&r| !(r >= 1.0 && r.is_finite())) {
        return Err(usage("--ratios must be finite and at least 1"));
    }
    let manifest = load_manifest(&a.pairs)?;
    let mut pairs = Vec::with_capacity(manifest.len());
    for item in &manifest.items {
        let p = load_gray(&manifest.resolve(&item.image))?;
        let t = load_gray(&manifest.resolve(&item.mask))?;
        if !p.same_size(&t) {
            return Err(as_data(&a.pairs, Error::InvalidArgument(format!("{} and {} differ in size", item.image.display(), item.mask.display()))));
        }
        pairs.push((p, t));
    }
    let table = robustness_experiment(&pairs, &a.sizes, &a.ratios).map_err(|e| match e {
        Error::InvalidArgument(m) => usage(m),
        other => CliError::Core(other),
    })?;
    emit(a.out.as_deref(), &table.to_csv())
}

pub fn synth_cmd(a: &SynthArgs) -> CliResult {
    let config = SynthConfig {
        count: a.count,
        width: a.width,
        height: a.height,
        seed: a.seed,
        groups: a.groups,
    };
    if a.count == 0 || a.groups.is_some_and(|g| g == 0 || g > a.count) {
        return Err(usage("--count must be positive and --groups within 1..=count"));
    }
    dcunet_core::arch::check_spatial(a.height, a.width).map_err(|e| usage(e.to_string()))?;
    let manifest = synth_blobs(&a.out, &config)?;
    eprintln!("wrote {} pairs and {}", manifest.len(), a.out.join(MANIFEST_NAME).display());
    Ok(())
}
