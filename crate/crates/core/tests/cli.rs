use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_latent-count");

const CONFIG: &str = r#"{
  "model": {"kind": "explicit", "coeffs": [[[0.4, 0.0, 0.2], [0.0, 0.3, 0.0], [0.0, -0.3, 0.4]]], "noise_cov": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
  "marginals": [
    {"family": "bernoulli", "p": 0.5},
    {"family": "poisson", "lambda": 1.5},
    {"family": "binomial", "n_trials": 3, "p": 0.4}
  ],
  "n_grid": [150, 300, 600],
  "replicates": 2,
  "master_seed": 5,
  "s": 3,
  "lambda": [0.0, 0.05, 0.2]
}"#;

fn write_config(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("cfg.json");
    std::fs::write(&p, CONFIG).unwrap();
    p
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> String {
    let status = Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success(), "{args:?} failed");
    std::fs::read_to_string(out).unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn every_subcommand_writes_its_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("o.csv");
    let cases: [(&[&str], &str); 7] = [
        (&["simulate", "--t", "50"], "t,x_1,x_2,x_3,z_1,z_2,z_3"),
        (&["estimate"], "l,d"),
        (
            &["lasso"],
            "lambda_index,lambda,lag,row,col,beta_hat,beta_true,objective,kkt_residual,iterations,converged",
        ),
        (
            &["link-table", "--points", "5"],
            "i,j,u,link,link_deriv,link_deriv2,inverse",
        ),
        (
            &["m3-check"],
            "column,family,partial_sum,converged,tail_ratio,tail_root_lhs,tail_root_rhs,variance,link_at_one",
        ),
        (&["constants"], "n,quantity,value"),
        (
            &["mc-run", "--threads", "2"],
            "config_hash,n,replicate,seed,lambda_index,lambda,status",
        ),
    ];
    for (args, header) in cases {
        let text = run(args, &cfg, &out);
        assert!(
            data_lines(&text)[0].starts_with(header),
            "{args:?}: {}",
            data_lines(&text)[0]
        );
    }
    let sim = run(&["simulate", "--t", "50"], &cfg, &out);
    assert_eq!(data_lines(&sim).len(), 51);
    // 6 pairs of 5 points
    let table = run(&["link-table", "--points", "5"], &cfg, &out);
    assert_eq!(data_lines(&table).len(), 31);
    // 3 lambdas x 9 coefficients
    let lasso = run(&["lasso", "--t", "400"], &cfg, &out);
    assert_eq!(data_lines(&lasso).len(), 28);
}

#[test]
fn mc_run_rows_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let summary = dir.path().join("summary.csv");
    let rows = run(
        &["mc-run", "--threads", "3", "--summary", summary.to_str().unwrap()],
        &cfg,
        &dir.path().join("rows.csv"),
    );
    let lines = data_lines(&rows);
    // header plus |N| x replicates x |lambda|
    assert_eq!(lines.len(), 1 + 3 * 2 * 3);
    assert!(rows.starts_with("# latent-count experiment\n# config_hash: "));
    let hash = lines[1].split(',').next().unwrap();
    assert_eq!(hash.len(), 16);
    assert!(lines[1..].iter().all(|l| l.starts_with(hash) && l.contains(",ok,")));
    assert!(data_lines(&std::fs::read_to_string(&summary).unwrap())[0].starts_with("config_hash,n,lambda_index,metric"));

    let replay = run(&["replay", "--cell", "300:1"], &cfg, &dir.path().join("replay.csv"));
    let replayed = data_lines(&replay);
    let expected: Vec<&str> = lines
        .iter()
        .copied()
        .filter(|l| l.split(',').nth(1) == Some("300") && l.split(',').nth(2) == Some("1"))
        .collect();
    assert_eq!(replayed[1..].to_vec(), expected);
}

#[test]
fn seed_override_and_toml_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("s.csv");
    let a = run(&["simulate", "--t", "30"], &cfg, &out);
    let b = run(&["simulate", "--t", "30", "--seed", "5"], &cfg, &out);
    let c = run(&["simulate", "--t", "30", "--seed", "6"], &cfg, &out);
    assert_eq!(a, b);
    assert_ne!(a, c);

    let toml_cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &toml_cfg,
        r#"
n_grid = [100, 200, 400]
replicates = 1
master_seed = 5
s = 2
marginals = [{ family = "bernoulli", p = 0.5 }, { family = "poisson", lambda = 2.0 }]

[model]
kind = "random_sparse"
d = 2
p = 1
nonzeros = 2
magnitude_min = 0.3
magnitude_max = 0.4
"#,
    )
    .unwrap();
    let text = run(&["m3-check"], &toml_cfg, &out);
    assert_eq!(data_lines(&text).len(), 3);
}

#[test]
fn invalid_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, CONFIG.replace("\"replicates\": 2", "\"replicates\": 0")).unwrap();
    let out = Command::new(BIN)
        .args(["constants", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicates"));

    let good = write_config(dir.path());
    let out = Command::new(BIN)
        .args(["replay", "--cell", "999:0", "--config"])
        .arg(&good)
        .output()
        .unwrap();
    assert!(!out.status.success());
}
