use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use linksched::config::ExperimentConfig;
use linksched::dataset::{DatasetFile, Split};
use linksched::gnn::{init_model, ModelCheckpoint};
use linksched::pipeline;
use linksched::seed::{self, tag};

const TINY: &str = r#"
seed = 5
k_list = [3, 4]

[model]
hidden_dims = [6, 6]

[training]
epochs = 3
ssl_epochs = 2
batch_size = 4
seeds = [0, 1]

[data]
n_train = 8
n_test = 6

[study]
sample_sizes = [4, 8]
sample_complexity_k = [3]
generalization_k_train = [3]

[bench]
k_values = [3, 4]
n_samples = 4
"#;

struct Env {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = root.join("tiny.toml");
        std::fs::write(&config, TINY).unwrap();
        Env { _dir: dir, root, config }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn cfg(&self, out: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::load(&self.config).unwrap();
        c.out_dir = self.out(out);
        c
    }

    fn run(&self, out: &str, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_linksched"))
            .arg("--config")
            .arg(&self.config)
            .arg("--out")
            .arg(self.out(out))
            .arg("--quiet")
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, out: &str, args: &[&str]) -> String {
        let o = self.run(out, args);
        assert!(
            o.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        String::from_utf8(o.stdout).unwrap()
    }

    fn prepare(&self, out: &str) {
        self.ok(out, &["generate"]);
        self.ok(out, &["label"]);
    }
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn results(root: &Path) -> Vec<(String, String)> {
    let dir = root.join("results");
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), read(&p)))
        .collect();
    out.sort();
    out
}

#[test]
fn generation_is_byte_identical_across_runs() {
    let env = Env::new();
    env.ok("a", &["generate", "--k", "4"]);
    env.ok("b", &["generate", "--k", "4"]);
    for split in ["train", "test"] {
        let f = format!("data/k4_{split}.jsonl");
        assert_eq!(read(&env.out("a").join(&f)), read(&env.out("b").join(&f)));
    }
    let text = read(&env.out("a").join("data/k4_train.jsonl"));
    let back = DatasetFile::parse(&text).unwrap();
    assert_eq!(back.to_text(), text);
    assert!(env.ok("a", &["validate", &env.out("a").join("data/k4_train.jsonl").to_string_lossy()]).contains("0 labeled"));
}

#[test]
fn labeling_resumes_and_is_idempotent() {
    let env = Env::new();
    env.ok("a", &["generate", "--k", "4"]);
    let path = env.out("a").join("data/k4_train.jsonl");
    let p = path.to_string_lossy().to_string();
    assert!(env.ok("a", &["label", &p, "--chunk", "3"]).contains("8 new labels"));
    let full = DatasetFile::read(&path).unwrap();
    let bytes = read(&path);
    assert!(env.ok("a", &["label", &p]).contains("0 new labels"));
    assert_eq!(read(&path), bytes);

    // Drop the second half of the labels as if the process had died.
    let mut partial = full.clone();
    for r in &mut partial.records[4..] {
        r.label = None;
    }
    partial.write(&path).unwrap();
    assert!(env.ok("a", &["label", &p]).contains("4 new labels"));
    let resumed = DatasetFile::read(&path).unwrap();
    for (a, b) in full.records.iter().zip(&resumed.records) {
        let (la, lb) = (a.label.as_ref().unwrap(), b.label.as_ref().unwrap());
        assert_eq!((&la.schedule, la.sum_rate, la.evaluated), (&lb.schedule, lb.sum_rate, lb.evaluated));
    }
    assert!(env.ok("a", &["validate", &p, "--full"]).contains("8 labeled"));
}

#[test]
fn negligible_interference_labels_every_link_on() {
    let env = Env::new();
    env.ok("a", &["generate", "--k", "4", "--split", "test"]);
    let path = env.out("a").join("data/k4_test.jsonl");
    let mut f = DatasetFile::read(&path).unwrap();
    for r in &mut f.records {
        for (i, row) in r.gain_sq.iter_mut().enumerate() {
            for (j, g) in row.iter_mut().enumerate() {
                if i != j {
                    *g *= 1e-9;
                }
            }
        }
    }
    f.write(&path).unwrap();
    env.ok("a", &["label", &path.to_string_lossy()]);
    let f = DatasetFile::read(&path).unwrap();
    assert!(f.records.iter().all(|r| r.label.as_ref().unwrap().schedule == vec![1; 4]));
}

#[test]
fn tampered_label_fails_validation() {
    let env = Env::new();
    env.prepare("a");
    let path = env.out("a").join("data/k3_test.jsonl");
    let mut f = DatasetFile::read(&path).unwrap();
    let l = f.records[2].label.as_mut().unwrap();
    l.schedule = l.schedule.iter().map(|b| 1 - b).collect();
    std::fs::write(&path, f.to_text()).unwrap();
    let o = env.run("a", &["validate", &path.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn zero_epoch_training_emits_initialisation() {
    let env = Env::new();
    env.prepare("a");
    env.ok("a", &["--epochs", "0", "train", "--k", "3", "--regime", "supervised", "--run-seed", "7"]);
    let cfg = {
        let mut c = env.cfg("a");
        c.training.epochs = 0;
        c
    };
    let dir = env.out("a").join("runs/k3_supervised_n8_s7");
    assert_eq!(read(&dir.join("log.csv")), "epoch,train_loss,test_norm_sum_rate\n");
    let init = init_model(&cfg.dims(), cfg.model.leaky_slope, &mut seed::rng_at(7, &[tag::INIT])).unwrap();
    for name in ["best.json", "final.json"] {
        let m = ModelCheckpoint::load(&dir.join(name)).unwrap().to_model().unwrap();
        assert_eq!(m, init);
    }
}

#[test]
fn training_logs_are_reproducible() {
    let env = Env::new();
    for out in ["a", "b"] {
        env.prepare(out);
        env.ok(out, &["train", "--k", "3", "--regime", "ssl_then_unsupervised", "--run-seed", "1"]);
    }
    let f = "runs/k3_ssl_then_unsupervised_n8_s1";
    for name in ["log.csv", "ssl_log.csv", "best.json", "final.json"] {
        assert_eq!(read(&env.out("a").join(f).join(name)), read(&env.out("b").join(f).join(name)), "{name}");
    }
}

#[test]
fn supervised_training_needs_labels() {
    let env = Env::new();
    env.ok("a", &["generate", "--k", "3"]);
    let o = env.run("a", &["train", "--k", "3", "--regime", "supervised"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("label"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let env = Env::new();
    let bad = env.out("bad.toml");
    std::fs::write(&bad, "[training]\nepoch = 3\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_linksched"))
        .args(["--config", &bad.to_string_lossy(), "print-config"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_linksched"))
        .args(["--config", &env.out("missing.toml").to_string_lossy(), "print-config"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_lists_all_missing_inputs_before_starting() {
    let env = Env::new();
    env.ok("a", &["generate", "--k", "3"]);
    let o = env.run("a", &["sweep"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("k4_test.jsonl") && err.contains("k3_test.jsonl has 0 of 6"), "{err}");
    assert!(!env.out("a").join("runs").exists());
}

#[test]
fn artifacts_from_another_configuration_are_refused() {
    let env = Env::new();
    env.prepare("a");
    env.ok("a", &["train", "--k", "3", "--regime", "unsupervised", "--run-seed", "0"]);
    let ckpt = env.out("a").join("runs/k3_unsupervised_n8_s0/best.json");
    let o = env.run("a", &["--epochs", "4", "eval", &ckpt.to_string_lossy(), "--k", "3"]);
    assert_eq!(o.status.code(), Some(3));
    let o = env.run("a", &["--seed", "9", "train", "--k", "3", "--regime", "unsupervised"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_is_resumable_and_consistent() {
    let env = Env::new();
    env.prepare("a");
    env.ok("a", &["sweep"]);
    let first = results(&env.out("a"));
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    for f in ["fig2a.csv", "fig2b.csv", "fig2c.csv", "fig2d.csv", "fig2d_per_seed.csv"] {
        assert!(names.contains(&f), "{names:?}");
    }

    // Interrupt: lose one finished cell, a partial cell and the results.
    std::fs::remove_dir_all(env.out("a").join("runs/k4_unsupervised_n8_s1")).unwrap();
    std::fs::remove_file(env.out("a").join("runs/k3_supervised_n4_s0/manifest.json")).unwrap();
    std::fs::remove_dir_all(env.out("a").join("results")).unwrap();
    env.ok("a", &["sweep"]);
    assert_eq!(results(&env.out("a")), first);

    // A fresh, uninterrupted run agrees byte for byte.
    env.prepare("b");
    env.ok("b", &["sweep"]);
    assert_eq!(results(&env.out("b")), first);

    let csv = |name: &str| first.iter().find(|(n, _)| n == name).unwrap().1.clone();
    let fig2b = csv("fig2b.csv");
    for r in ["supervised,0", "supervised,1", "unsupervised,0", "unsupervised,1"] {
        assert!(fig2b.contains(r), "{fig2b}");
    }

    // The full-size sample-complexity cell is the fig2a cell, and the
    // K_test = K_train generalization cell is plain evaluation.
    let row = |text: &str, prefix: &str| -> String {
        text.lines().find(|l| l.starts_with(prefix)).unwrap_or_else(|| panic!("{prefix} in {text}")).to_string()
    };
    let a = row(&csv("fig2a.csv"), "3,supervised,");
    let c = row(&csv("fig2c.csv"), "3,8,supervised,");
    assert_eq!(a.trim_start_matches("3,"), c.trim_start_matches("3,8,"));
    let d = row(&csv("fig2d.csv"), "3,3,supervised,");
    assert_eq!(a.trim_start_matches("3,"), d.trim_start_matches("3,3,"));

    // Per-seed metric equals a direct evaluation of the stored checkpoint.
    let ckpt = env.out("a").join("runs/k3_supervised_n8_s0/best.json");
    let eval = env.ok("a", &["eval", &ckpt.to_string_lossy(), "--k", "3"]);
    let direct: f64 = eval.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let per_seed = row(&csv("fig2a_per_seed.csv"), "3,8,supervised,0,");
    let recorded: f64 = per_seed.split(',').nth(5).unwrap().parse().unwrap();
    assert_eq!(direct, recorded);

    let manifest = read(&env.out("a").join("results/manifest.json"));
    assert!(manifest.contains(&env.cfg("a").run_digest()));
}

#[test]
fn nested_subsets_share_prefixes() {
    let env = Env::new();
    env.prepare("a");
    let cfg = env.cfg("a");
    let file = pipeline::load_dataset(&cfg, 3, Split::Train, true).unwrap();
    let ordered = pipeline::ordered_train_set(&cfg, &file).unwrap();
    let order = pipeline::subset_order(&cfg, 3, 8);
    for (pos, &i) in order.iter().enumerate() {
        assert_eq!(ordered[pos].channel.gain_sq, file.channel(i).unwrap().gain_sq);
    }
}

#[test]
fn bench_writes_one_row_per_size() {
    let env = Env::new();
    let out = env.ok("a", &["bench-labeling"]);
    let csv = read(&env.out("a").join("results/bench_labeling.csv"));
    assert_eq!(out, csv);
    let evals: Vec<&str> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(evals, vec!["8", "16"]);
}
