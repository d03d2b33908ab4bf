use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ttss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttss"))
        .args(args)
        .env("TTSS_THREADS", "2")
        .output()
        .expect("run ttss")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn storage_prints_the_small_example() {
    let o = ttss(&["storage", "--dims", "4x4", "--ranks", "2,2", "--n-train", "10"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("dim(PCA, r=2) = 29"));
    assert!(out.contains("dim(TT-PCA) = 18"));
    assert!(out.contains("total          160"));
    assert!(out.contains("total           38"));
}

#[test]
fn fit_classify_inspect_ttpca() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.ttcl");
    let train = fixture("mnist12-train-images.idx");
    let o = ttss(&[
        "fit", "--train", s(&train), "--dims", "4x7x4x7", "--method", "ttpca", "--tau", "0.1",
        "--out", s(&model),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(&std::fs::read(&model).unwrap()[..4], b"TTCL");

    let preds = dir.path().join("p.csv");
    let test = fixture("mnist12-test-images.idx");
    let o = ttss(&["classify", "--model", s(&model), "--test", s(&test), "--out", s(&preds)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&preds).unwrap();
    assert_eq!(text.lines().count(), 401);
    let wrong = text.lines().skip(1).filter(|l| {
        let (a, b) = l.split_once(',').unwrap();
        a != b
    });
    assert!(wrong.count() < 40);

    let o = ttss(&["inspect", s(&model)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("TTCL classifier, 2 classes"));
}

#[test]
fn config_file_with_overrides_drives_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.ini");
    std::fs::write(
        &cfg,
        format!(
            "[data]\ntrain = {}\ntest = {}\ndims = 4x7x4x7\n[sweep]\nmethod = ttnpe\nranks = 2,4,4,4\nknn_k = 5\n",
            s(&fixture("mnist12-train-images.idx")),
            s(&fixture("mnist12-test-images.idx")),
        ),
    )
    .unwrap();
    let out = dir.path().join("plot.csv");
    let o = ttss(&[
        "sweep", "--config", s(&cfg), "--method", "knn;ttpca", "--ranks", "2,4,4,4;4,7,4,7",
        "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("compression_ratio,error,method,log10_error"));
    let methods: Vec<&str> = lines.map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(methods, vec!["ttpca", "ttpca", "knn K=5"]);
    assert!(out.with_extension("dat").exists());
}

#[test]
fn exit_codes() {
    // usage
    assert_eq!(ttss(&["sweep", "--method", "bogus"]).status.code(), Some(1));
    assert_eq!(ttss(&["frobnicate"]).status.code(), Some(1));
    // data
    let o = ttss(&["fit", "--train", "/nonexistent.csv", "--method", "ttpca", "--tau", "0.1", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"nope").unwrap();
    assert_eq!(ttss(&["inspect", s(&junk)]).status.code(), Some(2));
}
