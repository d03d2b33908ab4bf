//! Compression-ratio sweeps: fit every grid point on a training set, measure
//! test error, and tabulate against the storage each model needs.
//!
//! Configuration is flat `key = value` text. `[section]` headers and `#`
//! comments are allowed and ignored; keys are the long CLI flag names with
//! `_` or `-`. Grids are `;`-separated, rank vectors `,`-separated.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{add_noise, load_csv, load_idx, LabeledDataset};
use crate::error::{Error, Result};
use crate::model::storage::{storage_pca, storage_tnpe, storage_ttnpe, storage_ttpca};
use crate::ttnpe::{fit_prepared, knn_vote, EpsMode, PreparedTarget, TtNpeConfig};
use crate::ttpca::{fit_classifier, PcaClassModel, TtPcaConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    TtPca,
    TtNpe,
    Pca,
    Knn,
    /// Storage curve only; no classifier is fitted.
    Tnpe,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::TtPca => "ttpca",
            Method::TtNpe => "ttnpe",
            Method::Pca => "pca",
            Method::Knn => "knn",
            Method::Tnpe => "tnpe",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "").as_str() {
            "ttpca" => Ok(Method::TtPca),
            "ttnpe" => Ok(Method::TtNpe),
            "pca" => Ok(Method::Pca),
            "knn" => Ok(Method::Knn),
            "tnpe" => Ok(Method::Tnpe),
            _ => Err(Error::InvalidConfig(format!(
                "unknown method {s:?} (expected ttpca, ttnpe, pca, knn or tnpe)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Label files for IDX inputs; derived from the image path when absent.
    pub train_labels: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub dims: Option<Vec<usize>>,
    pub methods: Vec<Method>,
    pub taus: Vec<f64>,
    pub ranks: Vec<Vec<usize>>,
    pub knn_k: Vec<usize>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub classes: Vec<i64>,
    pub train_cap: Option<usize>,
    pub test_cap: Option<usize>,
    /// Share of samples held out when no test file is given.
    pub test_fraction: f64,
    pub eps: EpsMode,
    pub row_normalize: bool,
    pub center: bool,
    pub max_sweeps: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            train_labels: None,
            test_labels: None,
            dims: None,
            methods: vec![Method::TtPca],
            taus: Vec::new(),
            ranks: Vec::new(),
            knn_k: vec![5],
            noise_sigma: 0.0,
            seed: 0,
            classes: Vec::new(),
            train_cap: None,
            test_cap: None,
            test_fraction: 0.5,
            eps: EpsMode::Auto,
            row_normalize: false,
            center: false,
            max_sweeps: 20,
            out: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str, sep: char) -> Result<Vec<T>> {
    v.split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

/// `4x7x4x7` (also accepts `,`).
pub fn parse_dims(v: &str) -> Result<Vec<usize>> {
    let dims: Vec<usize> = parse_list("dims", &v.replace(',', "x"), 'x')?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidConfig(format!("dims: bad value {v:?}")));
    }
    Ok(dims)
}

/// `2,3,2;4,4,4` into one rank vector per grid point.
pub fn parse_rank_grid(v: &str) -> Result<Vec<Vec<usize>>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_list("ranks", s, ','))
        .collect()
}

impl ExperimentConfig {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "train" => self.train = Some(v.into()),
            "test" => self.test = Some(v.into()),
            "train_labels" => self.train_labels = Some(v.into()),
            "test_labels" => self.test_labels = Some(v.into()),
            "dims" => self.dims = Some(parse_dims(v)?),
            "method" | "methods" => {
                self.methods = v
                    .split([';', ','])
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "tau" => self.taus = parse_list("tau", v, ';')?,
            "ranks" => self.ranks = parse_rank_grid(v)?,
            "knn_k" | "k" => self.knn_k = parse_list("knn_k", v, ';')?,
            "noise_sigma" => self.noise_sigma = parse_num(&key, v)?,
            "seed" => self.seed = parse_num(&key, v)?,
            "classes" => self.classes = parse_list("classes", v, ',')?,
            "train_cap" => self.train_cap = Some(parse_num(&key, v)?),
            "test_cap" => self.test_cap = Some(parse_num(&key, v)?),
            "test_fraction" => self.test_fraction = parse_num(&key, v)?,
            "eps" => {
                self.eps = if v.eq_ignore_ascii_case("auto") {
                    EpsMode::Auto
                } else {
                    EpsMode::Explicit(parse_num(&key, v)?)
                }
            }
            "row_normalize" => self.row_normalize = parse_bool(&key, v)?,
            "center" => self.center = parse_bool(&key, v)?,
            "max_sweeps" => self.max_sweeps = parse_num(&key, v)?,
            "out" => self.out = Some(v.into()),
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_key_values(text)? {
            cfg.set(&key, &value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text).map_err(|e| e.context(path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no method selected".into()));
        }
        for m in &self.methods {
            let ok = match m {
                Method::TtPca => !self.taus.is_empty() || !self.ranks.is_empty(),
                Method::TtNpe | Method::Pca | Method::Tnpe => !self.ranks.is_empty(),
                Method::Knn => true,
            };
            if !ok {
                return Err(Error::InvalidConfig(format!("{m}: empty parameter grid")));
            }
            if matches!(m, Method::TtNpe | Method::Knn) && (self.knn_k.is_empty() || self.knn_k.contains(&0)) {
                return Err(Error::InvalidConfig(format!("{m}: K grid must be non-empty and positive")));
            }
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig("test_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Lines of `key = value`; blank lines, `#`/`;` comments and `[section]`
/// headers are skipped. Later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with(';') || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// `train-images.idx` -> `train-labels.idx` (also `images` -> `labels` anywhere
/// in the file name).
fn derived_labels_path(images: &Path) -> Result<PathBuf> {
    let name = images
        .file_name()
        .and_then(|n| n.to_str())
        .filter(|n| n.contains("images"))
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "cannot derive a label file for {}; pass it explicitly",
                images.display()
            ))
        })?;
    Ok(images.with_file_name(name.replacen("images", "labels", 1)))
}

/// CSV when the extension is `.csv`, otherwise an IDX image/label pair.
pub fn load_dataset(images: &Path, labels: Option<&Path>) -> Result<LabeledDataset> {
    let is_csv = images
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        return load_csv(images);
    }
    let labels = match labels {
        Some(p) => p.to_path_buf(),
        None => derived_labels_path(images)?,
    };
    load_idx(images, &labels)
}

fn noise_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Loads, filters, caps, reshapes and perturbs the train/test pair exactly as
/// a sweep does.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let train_path = cfg
        .train
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("no training data given".into()))?;
    let train = load_dataset(train_path, cfg.train_labels.as_deref())?;
    let (mut train, mut test) = match cfg.test.as_deref() {
        Some(p) => {
            let test = load_dataset(p, cfg.test_labels.as_deref())?;
            (train.shuffled(cfg.seed), test.shuffled(cfg.seed.wrapping_add(1)))
        }
        None => {
            let n_test = ((train.n_samples() as f64) * cfg.test_fraction).round() as usize;
            let n_train = train.n_samples().saturating_sub(n_test);
            train.split(n_train, cfg.seed)?
        }
    };
    if !cfg.classes.is_empty() {
        train = train.filter_classes(&cfg.classes).map_err(|e| e.context("training set"))?;
        test = test.filter_classes(&cfg.classes).map_err(|e| e.context("test set"))?;
    }
    if let Some(cap) = cfg.train_cap {
        train = train.cap_per_class(cap);
    }
    if let Some(cap) = cfg.test_cap {
        test = test.cap_per_class(cap);
    }
    if let Some(dims) = &cfg.dims {
        train = train.reshape(dims.clone())?;
        test = test.reshape(dims.clone())?;
    }
    let (train, test) = LabeledDataset::harmonize(&train, &test)?;
    let train = add_noise(&train, cfg.noise_sigma, noise_seed(cfg.seed, 1))?;
    let test = add_noise(&test, cfg.noise_sigma, noise_seed(cfg.seed, 2))?;
    if test.n_samples() == 0 {
        return Err(Error::EmptyData("test set is empty".into()));
    }
    Ok((train, test))
}

/// Training data alone, with the same filtering, caps, reshape and noise
/// stream as [`prepare_data`]; the whole file is used.
pub fn prepare_train(cfg: &ExperimentConfig) -> Result<LabeledDataset> {
    let train_path = cfg
        .train
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("no training data given".into()))?;
    let mut train = load_dataset(train_path, cfg.train_labels.as_deref())?.shuffled(cfg.seed);
    if !cfg.classes.is_empty() {
        train = train.filter_classes(&cfg.classes)?;
    }
    if let Some(cap) = cfg.train_cap {
        train = train.cap_per_class(cap);
    }
    if let Some(dims) = &cfg.dims {
        train = train.reshape(dims.clone())?;
    }
    if train.n_samples() == 0 {
        return Err(Error::EmptyData("training set is empty".into()));
    }
    add_noise(&train, cfg.noise_sigma, noise_seed(cfg.seed, 1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    /// Grid point, e.g. `tau=0.1` or `ranks=2,3,2`.
    pub param: String,
    pub k: Option<usize>,
    pub compression_ratio: f64,
    /// Test error in `[0, 1]`; `None` for storage-only rows.
    pub error: Option<f64>,
    /// Relative training reconstruction error `||D - U U^T D|| / ||D||`.
    pub reconstruction_error: Option<f64>,
    pub wall_ms: f64,
}

impl SweepRow {
    pub fn storage_only(&self) -> bool {
        self.error.is_none()
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn error_rate(test: &LabeledDataset, predict: impl Fn(usize) -> Result<usize> + Sync) -> Result<f64> {
    let wrong = (0..test.n_samples())
        .into_par_iter()
        .map(|i| Ok(usize::from(predict(i)? != test.labels()[i])))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(wrong as f64 / test.n_samples() as f64)
}

fn ttpca_row(train: &LabeledDataset, test: &LabeledDataset, tt: TtPcaConfig, param: String) -> Result<SweepRow> {
    let start = Instant::now();
    let model = fit_classifier(train, &tt)?;
    let error = error_rate(test, |i| model.classify_vector(test.sample_slice(i)))?;
    let mut storage = 0u64;
    let (mut res, mut total) = (0.0, 0.0);
    for (c, class) in model.classes().iter().enumerate() {
        storage += storage_ttpca(train.dims(), &class.ranks()[1..], 1)?.subspace_dim;
        let data = train.class_data(c);
        res += (&data - class.reconstruction()).norm_squared();
        total += data.norm_squared();
    }
    Ok(SweepRow {
        method: Method::TtPca,
        param,
        k: None,
        compression_ratio: storage as f64 / (train.n_samples() * train.dim()) as f64,
        error: Some(error),
        reconstruction_error: Some((res / total).sqrt()),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn pca_row(train: &LabeledDataset, test: &LabeledDataset, r: usize) -> Result<SweepRow> {
    let start = Instant::now();
    let model = PcaClassModel::fit(train, r)?;
    let error = error_rate(test, |i| Ok(model.classify_vector(test.sample_slice(i))))?;
    let mut storage = 0u64;
    let (mut res, mut total) = (0.0, 0.0);
    for (c, class) in model.classes.iter().enumerate() {
        storage += storage_pca(train.dim() as u64, r as u64, 1)?.subspace_dim;
        let data = train.class_data(c);
        res += (&data - &class.basis * &class.coefficients).norm_squared();
        total += data.norm_squared();
    }
    Ok(SweepRow {
        method: Method::Pca,
        param: format!("r={r}"),
        k: None,
        compression_ratio: storage as f64 / (train.n_samples() * train.dim()) as f64,
        error: Some(error),
        reconstruction_error: Some((res / total).sqrt()),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn ttnpe_rows(train: &LabeledDataset, test: &LabeledDataset, cfg: &ExperimentConfig, k: usize) -> Result<Vec<SweepRow>> {
    let start = Instant::now();
    let prepared = PreparedTarget::new(train.data(), k, cfg.eps, cfg.row_normalize)?;
    let prep_ms = start.elapsed().as_secs_f64() * 1e3;
    cfg.ranks
        .par_iter()
        .map(|ranks| {
            let start = Instant::now();
            let mut npe = TtNpeConfig::new(ranks.clone(), k);
            npe.eps = cfg.eps;
            npe.row_normalize = cfg.row_normalize;
            npe.max_sweeps = cfg.max_sweeps;
            let model = fit_prepared(train, &prepared, &npe)
                .map_err(|e| e.context(format!("ttnpe ranks={} K={k}", join(ranks))))?;
            let error = error_rate(test, |i| model.classify_knn_vector(test.sample_slice(i), k))?;
            let basis = model.subspace().basis();
            let recon = (train.data() - basis * model.embedded()).norm() / train.data().norm();
            let report = storage_ttnpe(train.dims(), ranks, train.n_samples() as u64)?;
            Ok(SweepRow {
                method: Method::TtNpe,
                param: format!("ranks={}", join(ranks)),
                k: Some(k),
                compression_ratio: report.compression_ratio,
                error: Some(error),
                reconstruction_error: Some(recon),
                wall_ms: prep_ms + start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

fn knn_row(train: &LabeledDataset, test: &LabeledDataset, k: usize) -> Result<SweepRow> {
    let start = Instant::now();
    let error = error_rate(test, |i| {
        knn_vote(train.data(), train.labels(), train.n_classes(), test.sample_slice(i), k)
    })?;
    Ok(SweepRow {
        method: Method::Knn,
        param: "raw".into(),
        k: Some(k),
        compression_ratio: 1.0,
        error: Some(error),
        reconstruction_error: None,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Evaluates every method over its grid on an already prepared train/test pair.
pub fn sweep_datasets(train: &LabeledDataset, test: &LabeledDataset, cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if test.n_samples() == 0 {
        return Err(Error::EmptyData("test set is empty".into()));
    }
    if train.n_samples() == 0 {
        return Err(Error::EmptyData("training set is empty".into()));
    }
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        let ctx = |e: Error| e.context(method);
        match method {
            Method::TtPca => {
                let grid: Vec<(TtPcaConfig, String)> = if cfg.ranks.is_empty() {
                    cfg.taus
                        .iter()
                        .map(|&t| (TtPcaConfig::threshold(t), format!("tau={t}")))
                        .collect()
                } else {
                    cfg.ranks
                        .iter()
                        .map(|r| (TtPcaConfig::fixed(r.clone()), format!("ranks={}", join(r))))
                        .collect()
                };
                let out = grid
                    .into_par_iter()
                    .map(|(tt, p)| ttpca_row(train, test, tt.centered(cfg.center), p))
                    .collect::<Result<Vec<_>>>()
                    .map_err(ctx)?;
                rows.extend(out);
            }
            Method::Pca => {
                let out = cfg
                    .ranks
                    .par_iter()
                    .map(|r| pca_row(train, test, *r.last().expect("non-empty rank vector")))
                    .collect::<Result<Vec<_>>>()
                    .map_err(ctx)?;
                rows.extend(out);
            }
            Method::TtNpe => {
                for &k in &cfg.knn_k {
                    rows.extend(ttnpe_rows(train, test, cfg, k).map_err(ctx)?);
                }
            }
            Method::Knn => {
                for &k in &cfg.knn_k {
                    rows.push(knn_row(train, test, k).map_err(ctx)?);
                }
            }
            Method::Tnpe => {
                for r in &cfg.ranks {
                    let report = storage_tnpe(train.dims(), r, train.n_samples() as u64).map_err(ctx)?;
                    rows.push(SweepRow {
                        method,
                        param: format!("ranks={}", join(r)),
                        k: None,
                        compression_ratio: report.compression_ratio,
                        error: None,
                        reconstruction_error: None,
                        wall_ms: 0.0,
                    });
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        a.compression_ratio
            .total_cmp(&b.compression_ratio)
            .then(a.method.cmp(&b.method))
            .then(a.k.cmp(&b.k))
            .then(a.param.cmp(&b.param))
    });
    Ok(rows)
}

/// Loads the data named in `cfg` and runs [`sweep_datasets`]; writes the
/// plot data when `cfg.out` is set.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let (train, test) = prepare_data(cfg)?;
    let rows = sweep_datasets(&train, &test, cfg)?;
    if let Some(out) = &cfg.out {
        emit_plotdata(&rows, out)?;
    }
    Ok(rows)
}

fn log10_cell(error: Option<f64>) -> String {
    match error {
        Some(e) if e > 0.0 => format!("{:?}", e.log10()),
        _ => String::new(),
    }
}

/// Writes `path` as CSV (`compression_ratio,error,method,log10_error`) and a
/// whitespace-separated copy next to it with extension `.dat` for gnuplot.
/// Storage-only rows leave the error cells empty (`NaN` in the `.dat` file).
pub fn emit_plotdata(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let wrap = |e: ::csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut w = ::csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(["compression_ratio", "error", "method", "log10_error"])
        .map_err(wrap)?;
    for row in rows {
        let label = match (row.storage_only(), row.k) {
            (true, _) => format!("{} (storage-only)", row.method),
            (false, Some(k)) => format!("{} K={k}", row.method),
            (false, None) => row.method.to_string(),
        };
        w.write_record([
            format!("{:?}", row.compression_ratio),
            row.error.map(|e| format!("{e:?}")).unwrap_or_default(),
            label,
            log10_cell(row.error),
        ])
        .map_err(wrap)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;

    let mut dat = String::from("# compression_ratio error log10_error method\n");
    for row in rows {
        let err = row.error.map_or("NaN".to_string(), |e| format!("{e:?}"));
        let log = match row.error {
            Some(e) if e > 0.0 => format!("{:?}", e.log10()),
            _ => "NaN".into(),
        };
        let tag = match row.k {
            Some(k) => format!("{}_K{k}", row.method),
            None => row.method.to_string(),
        };
        dat.push_str(&format!("{:?} {err} {log} {tag}\n", row.compression_ratio));
    }
    let dat_path = path.with_extension("dat");
    fs::write(&dat_path, dat).map_err(|e| Error::io(format!("writing {}", dat_path.display()), e))
}

/// Full sweep table including parameters and timings.
pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let wrap = |e: ::csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut w = ::csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record([
        "method",
        "param",
        "k",
        "compression_ratio",
        "error",
        "reconstruction_error",
        "wall_ms",
        "note",
    ])
    .map_err(wrap)?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.param.clone(),
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            format!("{:?}", r.compression_ratio),
            r.error.map(|e| format!("{e:?}")).unwrap_or_default(),
            r.reconstruction_error.map(|e| format!("{e:?}")).unwrap_or_default(),
            format!("{:.3}", r.wall_ms),
            if r.storage_only() { "storage-only".into() } else { String::new() },
        ])
        .map_err(wrap)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
