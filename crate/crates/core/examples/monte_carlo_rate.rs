//! Small Monte Carlo sweep: latent error against N with a log-log rate fit.
//! Pass a config path to run your own experiment.

use latent_count::harness::{rate_fit, run_experiment, ExperimentConfig};

const DEFAULT: &str = r#"{
  "model": {"kind": "random_sparse", "d": 4, "p": 1, "nonzeros": 4, "magnitude_min": 0.3, "magnitude_max": 0.5},
  "marginals": [
    {"family": "bernoulli", "p": 0.5}, {"family": "bernoulli", "p": 0.4},
    {"family": "bernoulli", "p": 0.6}, {"family": "bernoulli", "p": 0.5}
  ],
  "n_grid": [250, 500, 1000, 2000, 4000],
  "replicates": 10,
  "master_seed": 2024,
  "s": 4,
  "lambda": [0.02],
  "constants": false
}"#;

fn main() -> latent_count::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::from_path(path.as_ref())?,
        None => ExperimentConfig::from_json(DEFAULT)?,
    };
    let result = run_experiment(&cfg)?;
    for row in result.summary().iter().filter(|r| r.metric == "latent_max_norm") {
        println!(
            "N {:>6}: median {:.5}  IQR [{:.5}, {:.5}]",
            row.n, row.median, row.q25, row.q75
        );
    }
    let fit = rate_fit(&result, "latent_max_norm")?;
    println!("log-log slope {:.3} (intercept {:.3})", fit.slope, fit.intercept);
    println!("failed cells: {}", result.failed_cells().len());
    result.write_summary_csv(std::io::stdout().lock())?;
    Ok(())
}
