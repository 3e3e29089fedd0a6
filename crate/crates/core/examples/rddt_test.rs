// Relevance-drop t-test over a batch of paired maps.
//
// ```bash
// cargo run -p saliency-fairness --example rddt_test
// ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saliency_fairness::metrics::{rddt, rddt_from_differences, DEFAULT_ALPHA};
use saliency_fairness::{RelevanceMap, Result, Roi};

fn batch(rng: &mut ChaCha8Rng, drop: f64) -> Result<(Vec<RelevanceMap>, Vec<RelevanceMap>)> {
    let roi = Roi::new(2, 2, 3, 3);
    let mut vanilla = Vec::new();
    let mut debiased = Vec::new();
    for _ in 0..30 {
        let v: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
        let d: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let shift = if roi.contains(i / 8, i % 8) { drop } else { 0.0 };
                x - shift + rng.random_range(-0.2..0.2)
            })
            .collect();
        vanilla.push(RelevanceMap::from_f64(8, 8, &v)?);
        debiased.push(RelevanceMap::from_f64(8, 8, &d)?);
    }
    Ok((vanilla, debiased))
}

pub fn run_example() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let roi = Roi::new(2, 2, 3, 3);
    for drop in [0.0, 0.05, 0.2] {
        let (v, d) = batch(&mut rng, drop)?;
        let r = rddt(&v, &d, &roi, DEFAULT_ALPHA)?;
        println!(
            "drop {drop:.2}: mean diff {:+.4}  t {:+.3}  p {:.2e}  reject {}",
            r.mean_diff,
            r.t_statistic.unwrap_or(f64::NAN),
            r.p_value,
            r.decision
        );
    }

    let r = rddt_from_differences(&[1.0, 2.0, 3.0], 0.05)?;
    println!("[1, 2, 3]: p = {:.4}", r.p_value);
    let r = rddt_from_differences(&[0.5; 10], 0.05)?;
    println!("constant positive drop: p = {}, degenerate variance = {}", r.p_value, r.degenerate_variance);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
