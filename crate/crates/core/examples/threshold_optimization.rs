// Group-specific decision thresholds fitted to minimize EqualizedOdds.
//
// Trains the default model on a strongly biased synthetic dataset, fits
// thresholds on the debias split and applies them to the test split.
//
// ```bash
// cargo run -p saliency-fairness --example threshold_optimization
// ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saliency_fairness::data::{self, LabeledImage, SplitFractions, SyntheticSpec};
use saliency_fairness::debias::{fit_shared_threshold, fit_thresholds, DEFAULT_GRID_SIZE};
use saliency_fairness::experiment::ModelConfig;
use saliency_fairness::fairness::{accuracy, equalized_odds, group_rates};
use saliency_fairness::nn::{self, Shape, TinyNet, TrainConfig};
use saliency_fairness::{Result, SampleRow, SampleTable};

fn table(net: &TinyNet, samples: &[LabeledImage]) -> Result<SampleTable> {
    let rows = samples
        .iter()
        .map(|s| {
            let score = net.score(&s.pixels)?;
            Ok(SampleRow {
                id: s.id.clone(),
                y_true: s.y,
                y_pred: (score >= 0.5) as u8,
                pa: s.pa,
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SampleTable::new(rows)
}

pub fn run_example() -> Result<()> {
    let spec = SyntheticSpec {
        n_samples: 1200,
        phi_target: 0.8,
        seed: 11,
        ..SyntheticSpec::default()
    };
    let pool = data::generate(&spec)?;
    let splits = data::split(&pool, SplitFractions::default(), 1)?;
    println!("train phi {:.3}, test phi {:.3}", data::empirical_phi(&splits.train)?, data::empirical_phi(&splits.test)?);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut net = ModelConfig::default()
        .builder(Shape::image(1, spec.image_size.0, spec.image_size.1))
        .build_random(&mut rng)?;
    let inputs: Vec<Vec<f64>> = splits.train.iter().map(|s| s.pixels.clone()).collect();
    let labels: Vec<u8> = splits.train.iter().map(|s| s.y).collect();
    let report = nn::train(&mut net, &inputs, &labels, &TrainConfig::default())?;
    println!("loss per epoch {:.4?}", report.epoch_losses);

    let debias = table(&net, &splits.debias)?;
    let test = table(&net, &splits.test)?;
    let show = |name: &str, t: &SampleTable| -> Result<()> {
        println!("{name:<10} EO {:.3}  accuracy {:.3}", equalized_odds(&group_rates(t)?), accuracy(t)?);
        Ok(())
    };
    show("vanilla", &test)?;

    let shared = fit_shared_threshold(&debias, DEFAULT_GRID_SIZE)?;
    show("shared", &shared.apply(&test))?;
    let per_group = fit_thresholds(&debias, DEFAULT_GRID_SIZE)?;
    println!("thresholds pa=0 {:.2}, pa=1 {:.2}", per_group.threshold_pa0, per_group.threshold_pa1);
    show("per-group", &per_group.apply(&test))?;
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
