// Removing a protected-attribute direction from a hidden layer.
//
// Fits a concept activation vector at the convolution output on a balanced
// sample, projects it out, then compares fairness and region relevance
// before and after.
//
// ```bash
// cargo run -p saliency-fairness --example cav_projection
// ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saliency_fairness::attribution::integrated_gradients_default;
use saliency_fairness::data::{self, LabeledImage, SplitFractions, SyntheticSpec};
use saliency_fairness::debias::{fit_cav, project_out};
use saliency_fairness::experiment::{paired_metrics, ModelConfig};
use saliency_fairness::fairness::{equalized_odds, group_rates};
use saliency_fairness::metrics::{rrf, DEFAULT_ALPHA};
use saliency_fairness::nn::{self, Shape, TinyNet, TrainConfig};
use saliency_fairness::{RelevanceMap, Result, SampleRow, SampleTable};

fn eo(net: &TinyNet, samples: &[LabeledImage]) -> Result<f64> {
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
    Ok(equalized_odds(&group_rates(&SampleTable::new(rows)?)?))
}

fn maps(net: &TinyNet, samples: &[LabeledImage]) -> Result<Vec<RelevanceMap>> {
    samples.iter().map(|s| Ok(integrated_gradients_default(net, &s.pixels, 1)?.map)).collect()
}

pub fn run_example() -> Result<()> {
    let spec = SyntheticSpec {
        n_samples: 1200,
        phi_target: 0.8,
        seed: 5,
        ..SyntheticSpec::default()
    };
    let splits = data::split(&data::generate(&spec)?, SplitFractions::default(), 1)?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = ModelConfig::default()
        .builder(Shape::image(1, spec.image_size.0, spec.image_size.1))
        .build_random(&mut rng)?;
    let inputs: Vec<Vec<f64>> = splits.train.iter().map(|s| s.pixels.clone()).collect();
    let labels: Vec<u8> = splits.train.iter().map(|s| s.y).collect();
    nn::train(&mut net, &inputs, &labels, &TrainConfig::default())?;

    // balance pa against y so the direction does not encode the label
    let balanced = data::undersample_equal_marginals(&splits.debias, 0.0, 9)?;
    let acts = balanced
        .iter()
        .map(|s| Ok((net.activation_at(&s.pixels, 0)?, s.pa)))
        .collect::<Result<Vec<_>>>()?;
    let cav = fit_cav(&acts, 0)?;
    let projected = project_out(&net, &cav)?;
    println!("cav over {} activations fitted on {} samples", cav.direction.len(), balanced.len());
    println!("EO vanilla {:.3}  projected {:.3}", eo(&net, &splits.test)?, eo(&projected, &splits.test)?);

    let sample = &splits.test[..40];
    let (vanilla, debiased) = (maps(&net, sample)?, maps(&projected, sample)?);
    let pairs: Vec<_> = vanilla.iter().zip(&debiased).map(|(v, d)| (v, d, spec.patch)).collect();
    let (adr, dif, test) = paired_metrics(&pairs, DEFAULT_ALPHA)?;
    let mean_rrf = |ms: &[RelevanceMap]| -> f64 { ms.iter().filter_map(|m| rrf(m, &spec.patch).ok()).sum::<f64>() / ms.len() as f64 };
    println!("patch RRF vanilla {:.3}  projected {:.3}", mean_rrf(&vanilla), mean_rrf(&debiased));
    println!("ADR {adr:+.4}  DIF {dif:.3}  RDDT p {:.2e} reject {}", test.p_value, test.decision);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
