// Synthetic images with a controllable attribute-label association, plus
// rebalancing an existing pool to a new target.
//
// ```bash
// cargo run -p saliency-fairness --example synthetic_data
// ```

use saliency_fairness::data::{self, SplitFractions, SyntheticSpec};
use saliency_fairness::Result;

pub fn run_example() -> Result<()> {
    for phi in [-0.5, 0.0, 0.5, 0.9] {
        let spec = SyntheticSpec {
            phi_target: phi,
            seed: 1,
            ..SyntheticSpec::default()
        };
        let samples = data::generate(&spec)?;
        let t = data::contingency(&samples);
        println!(
            "target {phi:+.1}: empirical {:+.3}  cells (pa,y) 00={} 01={} 10={} 11={}",
            data::empirical_phi(&samples)?,
            t.cell(0, 0),
            t.cell(0, 1),
            t.cell(1, 0),
            t.cell(1, 1)
        );
    }

    let spec = SyntheticSpec {
        phi_target: 0.6,
        ..SyntheticSpec::default()
    };
    let pool = data::generate(&spec)?;
    let subset = data::rebalance_to_phi(&pool, 0.2, 3)?;
    println!("rebalanced {} -> {} samples, phi {:+.3}", pool.len(), subset.len(), data::empirical_phi(&subset)?);

    let s = data::split(&pool, SplitFractions::default(), 0)?;
    println!(
        "split train {} (phi {:+.3})  debias {} (phi {:+.3})  test {} (phi {:+.3})",
        s.train.len(),
        data::empirical_phi(&s.train)?,
        s.debias.len(),
        data::empirical_phi(&s.debias)?,
        s.test.len(),
        data::empirical_phi(&s.test)?
    );

    // the artifact lives inside the patch for pa = 1 only
    let mean_in_patch = |pa: u8| {
        let (mut sum, mut n) = (0.0, 0.0);
        for x in pool.iter().filter(|x| x.pa == pa) {
            for (r, c) in spec.patch.cells() {
                sum += x.pixels[r * x.width + c];
                n += 1.0;
            }
        }
        sum / n
    };
    println!("mean patch intensity pa=0 {:.3}  pa=1 {:.3}", mean_in_patch(0), mean_in_patch(1));
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
