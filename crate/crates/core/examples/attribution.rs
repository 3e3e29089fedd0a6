// Integrated Gradients and epsilon-LRP on a small random convolutional net.
//
// ```bash
// cargo run -p saliency-fairness --example attribution
// ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saliency_fairness::attribution::{integrated_gradients, lrp_epsilon, AttributionMeta, DEFAULT_LRP_EPSILON};
use saliency_fairness::nn::{NetBuilder, Shape};
use saliency_fairness::Result;

pub fn run_example() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut net = NetBuilder::new(Shape::image(1, 8, 8))
        .conv2d(3, 3, 1)
        .relu()
        .flatten()
        .dense(8)
        .relu()
        .dense(2)
        .build_random(&mut rng)?;
    // nonzero biases put ReLU kinks along the path, so the step count matters
    for layer in net.layers_mut() {
        layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.3..0.3));
    }
    let x: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
    let baseline = vec![0.0; 64];
    let gap = net.logits(&x)?[1] - net.logits(&baseline)?[1];

    // completeness: relevance sums to f(x) - f(baseline), up to quadrature error
    for steps in [8, 64, 256] {
        let ig = integrated_gradients(&net, &x, &baseline, 1, steps)?;
        let sum: f64 = ig.input_relevance.iter().sum();
        println!("IG {steps:>3} steps: sum {sum:+.6}  logit gap {gap:+.6}  error {:.1e}", (sum - gap).abs());
    }

    let lrp = lrp_epsilon(&net, &x, 1, DEFAULT_LRP_EPSILON)?;
    if let AttributionMeta::Lrp { bias_absorbed, layer_sums, .. } = &lrp.meta {
        println!("LRP relevance per activation (input first): {layer_sums:.4?}");
        println!("LRP relevance absorbed by biases: {bias_absorbed:+.4}");
    }
    let (h, w) = lrp.map.shape();
    println!("map {h}x{w}, top-left row: {:?}", &lrp.map.values()[..w]);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
