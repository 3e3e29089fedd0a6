// A small end-to-end run: every method at two correlation levels, then the
// metrics table and plot series.
//
// ```bash
// cargo run --release -p saliency-fairness --example experiment
// ```

use std::fs;

use saliency_fairness::data::SyntheticSpec;
use saliency_fairness::experiment::{cmd_run, DatasetSource, ExperimentConfig, Method};
use saliency_fairness::{MetricName, Result};

pub fn run_example() -> Result<()> {
    let cfg = ExperimentConfig {
        dataset: DatasetSource::Synthetic(SyntheticSpec {
            n_samples: 800,
            ..SyntheticSpec::default()
        }),
        phi_list: vec![0.2, 0.8],
        ig_steps: 16,
        seed: 1,
        ..ExperimentConfig::default()
    };
    let dir = std::env::temp_dir().join(format!("salfair-run-{}", std::process::id()));
    let summary = cmd_run(&cfg, &dir)?;

    println!("{:<12} {:>4} {:>8} {:>8} {:>8} {:>6}", "method", "phi", "RRF", "EO", "acc", "RDDT");
    for &phi in &cfg.phi_list {
        for method in Method::ALL {
            let r = summary.report(method, phi).expect("every method ran");
            let get = |m| r.get(m).map(|v| format!("{v}")).unwrap_or_else(|| "-".into());
            println!(
                "{:<12} {:>4} {:>8.8} {:>8.8} {:>8.8} {:>6}",
                method.as_str(),
                phi,
                get(MetricName::Rrf),
                get(MetricName::EqualizedOdds),
                get(MetricName::Accuracy),
                get(MetricName::Rddt)
            );
        }
    }
    println!("wrote {}", summary.run_dir.display());
    fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
