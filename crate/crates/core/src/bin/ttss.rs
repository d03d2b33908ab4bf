use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ttsubspace::experiment::{
    load_dataset, parse_dims, parse_rank_grid, prepare_train, run_sweep, write_sweep_csv,
    ExperimentConfig, Method,
};
use ttsubspace::model::format::SUBSPACE_MAGIC;
use ttsubspace::model::storage::{
    dim_pca, dim_ttpca, storage_embedding, storage_pca, storage_tnpe, storage_ttnpe, storage_ttpca,
    StorageMethod, StorageReport,
};
use ttsubspace::ttnpe::{self, FittedTtNpe, TtNpeConfig, EMBEDDING_MAGIC};
use ttsubspace::ttpca::{fit_classifier, ClassModel, TtPcaConfig, CLASSIFIER_MAGIC};
use ttsubspace::{Error, LabeledDataset, Result, TtSubspace};

#[derive(Parser)]
#[command(name = "ttss", version, about = "Tensor train subspace learning")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a TT-PCA classifier or a TT-NPE embedding and save it
    Fit(ExpArgs),
    /// Classify a data file with a saved model
    Classify(ClassifyArgs),
    /// Sweep a rank or tau grid and write error vs compression ratio
    Sweep(ExpArgs),
    /// Print storage and compression figures for a configuration
    Storage(StorageArgs),
    /// Dump model metadata
    Inspect { model: PathBuf },
}

/// Every flag mirrors a config-file key and overrides it.
#[derive(Args)]
struct ExpArgs {
    /// key=value config file ([sections] allowed)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<String>,
    #[arg(long)]
    test: Option<String>,
    #[arg(long)]
    train_labels: Option<String>,
    #[arg(long)]
    test_labels: Option<String>,
    /// e.g. 4x7x4x7
    #[arg(long)]
    dims: Option<String>,
    /// ttpca, ttnpe, pca, knn or tnpe (sweep accepts a ;-list)
    #[arg(long)]
    method: Option<String>,
    /// tau grid, e.g. "0.05;0.1;0.2"
    #[arg(long)]
    tau: Option<String>,
    /// rank grid, e.g. "2,3,2;4,4,4"
    #[arg(long)]
    ranks: Option<String>,
    /// K grid, e.g. "5;10"
    #[arg(long)]
    knn_k: Option<String>,
    #[arg(long)]
    noise_sigma: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// label filter, e.g. 1,2
    #[arg(long)]
    classes: Option<String>,
    #[arg(long)]
    train_cap: Option<String>,
    #[arg(long)]
    test_cap: Option<String>,
    #[arg(long)]
    test_fraction: Option<String>,
    /// auto or a number
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    row_normalize: Option<String>,
    #[arg(long)]
    center: Option<String>,
    #[arg(long)]
    max_sweeps: Option<String>,
    /// model file (fit) or plot CSV (sweep)
    #[arg(long)]
    out: Option<String>,
    /// sweep only: also write the full row table here
    #[arg(long)]
    rows: Option<PathBuf>,
}

impl ExpArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("train", &self.train),
            ("test", &self.test),
            ("train_labels", &self.train_labels),
            ("test_labels", &self.test_labels),
            ("dims", &self.dims),
            ("method", &self.method),
            ("tau", &self.tau),
            ("ranks", &self.ranks),
            ("knn_k", &self.knn_k),
            ("noise_sigma", &self.noise_sigma),
            ("seed", &self.seed),
            ("classes", &self.classes),
            ("train_cap", &self.train_cap),
            ("test_cap", &self.test_cap),
            ("test_fraction", &self.test_fraction),
            ("eps", &self.eps),
            ("row_normalize", &self.row_normalize),
            ("center", &self.center),
            ("max_sweeps", &self.max_sweeps),
            ("out", &self.out),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v).map_err(|e| e.context(format!("--{}", key.replace('_', "-"))))?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// IDX images or CSV
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// K for TT-NPE models
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
    /// write label,predicted per sample
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StorageArgs {
    /// e.g. 4x4
    #[arg(long)]
    dims: String,
    /// e.g. 2,2 (r_1..r_n)
    #[arg(long)]
    ranks: String,
    #[arg(long)]
    n_train: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let res = match cli.cmd {
        Cmd::Fit(a) => fit(&a),
        Cmd::Classify(a) => classify(&a),
        Cmd::Sweep(a) => sweep(&a),
        Cmd::Storage(a) => storage(&a),
        Cmd::Inspect { model } => inspect(&model),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("TTSS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("TTSS_THREADS: expected a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("TTSS_THREADS: {e}")))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn single<T: Clone>(what: &str, grid: &[T]) -> Result<T> {
    match grid {
        [one] => Ok(one.clone()),
        _ => Err(Error::InvalidConfig(format!(
            "fit takes exactly one {what} value, got {}",
            grid.len()
        ))),
    }
}

fn fit(a: &ExpArgs) -> Result<()> {
    let cfg = a.config()?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Error::InvalidConfig("fit needs --out".into()))?;
    let method = single("method", &cfg.methods)?;
    let train = prepare_train(&cfg)?;
    let bytes = match method {
        Method::TtPca => {
            let tt = if cfg.ranks.is_empty() {
                TtPcaConfig::threshold(single("tau", &cfg.taus)?)
            } else {
                TtPcaConfig::fixed(single("ranks", &cfg.ranks)?)
            };
            let model = fit_classifier(&train, &tt.centered(cfg.center))?;
            for (class, name) in model.classes().iter().zip(model.label_names()) {
                let flag = if class.rank_clamped { " (clamped)" } else { "" };
                println!("class {name}: ranks {:?}{flag}", class.ranks());
            }
            model.to_bytes()
        }
        Method::TtNpe => {
            let mut npe = TtNpeConfig::new(single("ranks", &cfg.ranks)?, single("knn_k", &cfg.knn_k)?);
            npe.eps = cfg.eps;
            npe.row_normalize = cfg.row_normalize;
            npe.max_sweeps = cfg.max_sweeps;
            let model = ttnpe::fit(&train, &npe)?;
            println!(
                "ranks {:?}, {} sweeps, relaxed objective {:.6e}",
                model.subspace().ranks(),
                model.sweeps,
                model.relaxed_objective()
            );
            model.to_bytes()
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "fit supports ttpca and ttnpe, not {other}"
            )))
        }
    };
    write_file(&out, &bytes)?;
    println!("wrote {} ({} samples)", out.display(), train.n_samples());
    Ok(())
}

enum Loaded {
    Classifier(ClassModel),
    Embedding(FittedTtNpe),
    Subspace(TtSubspace),
}

fn load_model(path: &Path) -> Result<Loaded> {
    let bytes = read_file(path)?;
    let ctx = |e: Error| e.context(path.display());
    match bytes.get(..4) {
        Some(m) if m == CLASSIFIER_MAGIC => ClassModel::from_bytes(&bytes).map(Loaded::Classifier).map_err(ctx),
        Some(m) if m == EMBEDDING_MAGIC => FittedTtNpe::from_bytes(&bytes).map(Loaded::Embedding).map_err(ctx),
        Some(m) if m == SUBSPACE_MAGIC => TtSubspace::from_bytes(&bytes).map(Loaded::Subspace).map_err(ctx),
        _ => Err(Error::Format(format!("{}: unknown model magic", path.display()))),
    }
}

fn classify(a: &ClassifyArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (dims, names): (Vec<usize>, Vec<i64>) = match &model {
        Loaded::Classifier(m) => (m.dims(), m.label_names().to_vec()),
        Loaded::Embedding(m) => (m.subspace().dims(), m.label_names().to_vec()),
        Loaded::Subspace(_) => {
            return Err(Error::InvalidConfig(
                "a bare TTSS subspace has no classes; fit a classifier first".into(),
            ))
        }
    };
    let test: LabeledDataset = load_dataset(&a.test, a.test_labels.as_deref())?.reshape(dims)?;
    let mut predicted = Vec::with_capacity(test.n_samples());
    for i in 0..test.n_samples() {
        let x = test.sample_slice(i);
        let c = match &model {
            Loaded::Classifier(m) => m.classify_vector(x)?,
            Loaded::Embedding(m) => m.classify_knn_vector(x, a.knn_k)?,
            Loaded::Subspace(_) => unreachable!(),
        };
        predicted.push(names[c]);
    }
    let wrong = (0..test.n_samples())
        .filter(|&i| predicted[i] != test.raw_label(i))
        .count();
    println!(
        "{} samples, {} misclassified, error {:.4}",
        test.n_samples(),
        wrong,
        wrong as f64 / test.n_samples().max(1) as f64
    );
    if let Some(out) = &a.out {
        let mut text = String::from("label,predicted\n");
        for (i, p) in predicted.iter().enumerate() {
            text.push_str(&format!("{},{p}\n", test.raw_label(i)));
        }
        write_file(out, text.as_bytes())?;
    }
    Ok(())
}

fn sweep(a: &ExpArgs) -> Result<()> {
    let cfg = a.config()?;
    let rows = run_sweep(&cfg)?;
    println!(
        "{:<6} {:<22} {:>4} {:>12} {:>8} {:>10} {:>10}",
        "method", "param", "K", "ratio", "error", "recon", "ms"
    );
    for r in &rows {
        println!(
            "{:<6} {:<22} {:>4} {:>12.6} {:>8} {:>10} {:>10.1}",
            r.method.as_str(),
            r.param,
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            r.compression_ratio,
            r.error.map_or("storage".into(), |e| format!("{e:.4}")),
            r.reconstruction_error.map_or(String::new(), |e| format!("{e:.4}")),
            r.wall_ms
        );
    }
    if let Some(out) = &cfg.out {
        println!("wrote {} and {}", out.display(), out.with_extension("dat").display());
    }
    if let Some(path) = &a.rows {
        write_sweep_csv(&rows, path)?;
    }
    Ok(())
}

fn storage(a: &StorageArgs) -> Result<()> {
    let dims = parse_dims(&a.dims)?;
    let ranks = single("rank vector", &parse_rank_grid(&a.ranks)?)?;
    let d: u64 = dims.iter().map(|&i| i as u64).product();
    let r_n = *ranks.last().expect("non-empty") as u64;
    println!("d = {d}, N_tr = {}", a.n_train);
    println!("dim(PCA, r={r_n}) = {}", dim_pca(d, r_n)?);
    println!("dim(TT-PCA) = {}", dim_ttpca(&dims, &ranks)?);
    let print = |r: StorageReport| {
        println!(
            "{:<7} subspace {:>10} total {:>12} ratio {:.6}",
            r.method.as_str(),
            r.subspace_dim,
            r.total_storage,
            r.compression_ratio
        )
    };
    print(storage_embedding(StorageMethod::Knn, d, dims.len() as u32, r_n, a.n_train)?);
    print(storage_pca(d, r_n, a.n_train)?);
    print(storage_ttpca(&dims, &ranks, a.n_train)?);
    print(storage_tnpe(&dims, &ranks, a.n_train)?);
    print(storage_ttnpe(&dims, &ranks, a.n_train)?);
    Ok(())
}

fn describe_subspace(s: &TtSubspace) {
    println!("  dims {:?}", s.dims());
    println!("  ranks {:?}", s.ranks());
    println!("  orthonormal flag {}", s.is_orthonormal());
    println!("  max core orthonormality error {:.3e}", s.max_core_orthonormality_error());
}

fn inspect(path: &Path) -> Result<()> {
    match load_model(path)? {
        Loaded::Subspace(s) => {
            println!("TTSS subspace");
            describe_subspace(&s);
        }
        Loaded::Classifier(m) => {
            println!("TTCL classifier, {} classes", m.classes().len());
            for (class, name) in m.classes().iter().zip(m.label_names()) {
                println!("class {name} (centered: {})", class.mean().is_some());
                describe_subspace(class.subspace());
                println!("  training samples {}", class.representation().ncols());
            }
        }
        Loaded::Embedding(m) => {
            println!("TTNE embedding, {} classes {:?}", m.label_names().len(), m.label_names());
            describe_subspace(m.subspace());
            println!("  training samples {}", m.labels().len());
            println!("  relaxed objective {:.6e}", m.relaxed_objective());
        }
    }
    Ok(())
}
