use std::fs;
use std::path::Path;
use std::process::Command;

fn fedcf(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fedcf"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_data_is_reproducible_and_reruns_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    assert_eq!(
        fedcf(&[
            "gen-data",
            "--preset",
            "simulated-small",
            "--seed",
            "7",
            "--out",
            p(&a)
        ])
        .0,
        0
    );
    assert_eq!(
        fedcf(&[
            "gen-data",
            "--preset",
            "simulated-small",
            "--seed",
            "7",
            "--out",
            p(&b)
        ])
        .0,
        0
    );
    let config = a.join("config.json");
    assert_eq!(
        fedcf(&["rerun", "--config", p(&config), "--out", p(&c)]).0,
        0
    );
    for f in ["interactions.csv", "dataset.json"] {
        let first = fs::read(a.join(f)).unwrap();
        assert_eq!(first, fs::read(b.join(f)).unwrap());
        assert_eq!(first, fs::read(c.join(f)).unwrap());
    }
}

#[test]
fn full_density_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = fedcf(&[
        "gen-data",
        "--users",
        "10",
        "--items",
        "10",
        "--density",
        "1.0",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.path().join("interactions.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let infeasible = [
        "gen-data",
        "--users",
        "10",
        "--items",
        "40",
        "--density",
        "0.1",
        "--min-views",
        "8",
        "--out",
        p(&out),
    ];
    assert_eq!(fedcf(&infeasible).0, fedcf_cli::exit::INFEASIBLE);

    assert_eq!(
        fedcf(&["train", "--model", "cf", "--out", p(&out)]).0,
        fedcf_cli::exit::USAGE
    );
    let bad_gamma = [
        "train",
        "--model",
        "fcf",
        "--preset",
        "simulated-small",
        "--gamma",
        "2",
        "--out",
        p(&out),
    ];
    assert_eq!(fedcf(&bad_gamma).0, fedcf_cli::exit::USAGE);
    assert_eq!(fedcf(&["train", "--model", "nope", "--out", p(&out)]).0, 2);

    let ratings = dir.path().join("ratings.dat");
    fs::write(&ratings, "1::1::5::0\nbroken\n").unwrap();
    let (code, stderr) = fedcf(&[
        "train",
        "--model",
        "cf",
        "--dataset",
        p(&ratings),
        "--out",
        p(&out),
    ]);
    assert_eq!(code, fedcf_cli::exit::BAD_INPUT);
    assert!(stderr.contains("ratings.dat:2:"), "{stderr}");

    let missing = dir.path().join("missing.dat");
    assert_eq!(
        fedcf(&[
            "train",
            "--model",
            "cf",
            "--dataset",
            p(&missing),
            "--out",
            p(&out)
        ])
        .0,
        fedcf_cli::exit::IO
    );

    let blowup = [
        "train",
        "--model",
        "fcf",
        "--preset",
        "simulated-small",
        "--alpha",
        "1000",
        "--gamma",
        "0.9",
        "--epochs",
        "1",
        "--gd-iters",
        "200",
        "--init-scale",
        "8",
        "--out",
        p(&out),
    ];
    assert_eq!(fedcf(&blowup).0, fedcf_cli::exit::DIVERGED);
}

#[test]
fn train_writes_model_and_monotone_costs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cf");
    assert_eq!(
        fedcf(&[
            "train",
            "--model",
            "cf",
            "--preset",
            "simulated-small",
            "--epochs",
            "20",
            "--out",
            p(&out)
        ])
        .0,
        0
    );
    let costs: Vec<f64> = fs::read_to_string(out.join("cost.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(costs.len(), 21);
    assert!(costs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    let model: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["epoch"], 20);

    let out = dir.path().join("fcf0");
    let args = [
        "train",
        "--model",
        "fcf",
        "--preset",
        "simulated-small",
        "--epochs",
        "0",
        "--round-log",
        "--out",
        p(&out),
    ];
    assert_eq!(fedcf(&args).0, 0);
    assert_eq!(
        fs::read_to_string(out.join("cost.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );
    assert_eq!(
        fs::read_to_string(out.join("rounds/index.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );

    let out = dir.path().join("fcf");
    let args = [
        "train",
        "--model",
        "fcf",
        "--preset",
        "simulated-small",
        "--optimizer",
        "adam",
        "--alpha",
        "10",
        "--gamma",
        "0.2",
        "--beta1",
        "0.4",
        "--beta2",
        "0.99",
        "--epochs",
        "2",
        "--gd-iters",
        "3",
        "--round-log",
        "--out",
        p(&out),
    ];
    assert_eq!(fedcf(&args).0, 0);
    let index = fs::read_to_string(out.join("rounds/index.csv")).unwrap();
    assert_eq!(index.lines().count(), 1 + 2 * 3 * 500);
}

#[test]
fn convergence_records_divergence_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "convergence",
        "--preset",
        "simulated-small",
        "--alpha",
        "1,1000",
        "--gamma",
        "0.9",
        "--epochs",
        "1",
        "--gd-iters",
        "200",
        "--out",
        p(dir.path()),
    ];
    assert_eq!(fedcf(&args).0, 0);
    let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert!(runs.starts_with("alpha,run,init_seed,status,epochs_completed,final_e_percent\n"));
    assert!(runs.contains(",diverged,"), "{runs}");
    let trace = fs::read_to_string(dir.path().join("trace_alpha1000_run0.csv")).unwrap();
    assert!(trace.starts_with("epoch,gd_iter,e_percent\n"));
}

#[test]
fn compare_with_grid_search() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "compare",
        "--preset",
        "simulated-small",
        "--rebuilds",
        "3",
        "--epochs",
        "2",
        "--gd-iters",
        "5",
        "--grid-search",
        "--out",
        p(dir.path()),
    ];
    assert_eq!(fedcf(&args).0, 0);
    assert_eq!(
        fs::read_to_string(dir.path().join("grid.csv"))
            .unwrap()
            .lines()
            .count(),
        28
    );
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 7);
    let post: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("posterior_f1.json")).unwrap()).unwrap();
    for key in ["metric", "mean_diff", "p_left", "p_rope", "p_right", "rope"] {
        assert!(post.get(key).is_some(), "{key}");
    }
    let config: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(config["command"], "compare");
    assert!(config["resolved"]["rebuilds"][2]["init"].is_u64());
}

#[test]
fn identical_models_are_practically_equivalent() {
    use fedcf::eval::{bayes_correlated_ttest, DEFAULT_RHO, DEFAULT_ROPE};
    let scores = [0.30, 0.31, 0.29, 0.30, 0.32];
    let s = bayes_correlated_ttest(&scores, &scores, DEFAULT_ROPE, DEFAULT_RHO).unwrap();
    assert_eq!(s.p_rope, 1.0);
}
