// ROI metrics on a pair of hand-written relevance maps.
//
// ```bash
// cargo run -p saliency-fairness --example saliency_metrics
// ```

use saliency_fairness::metrics::{adr, dif, rrf, rrf_abs};
use saliency_fairness::{RelevanceMap, Result, Roi};

pub fn run_example() -> Result<()> {
    let vanilla = RelevanceMap::from_rows(&[
        [0.1, 0.0, 0.0, 0.1],
        [0.0, 0.9, 0.7, 0.0],
        [0.0, 0.8, 0.6, 0.0],
        [0.1, -0.2, 0.0, 0.1],
    ])?;
    let debiased = RelevanceMap::from_rows(&[
        [0.3, 0.2, 0.2, 0.3],
        [0.2, 0.2, 0.1, 0.2],
        [0.2, 0.3, 0.1, 0.2],
        [0.3, 0.1, 0.2, 0.3],
    ])?;
    // the protected attribute sits in the centre 2x2 block
    let roi = Roi::new(1, 1, 2, 2);

    println!("roi {roi}");
    println!("RRF     vanilla {:.3}  debiased {:.3}", rrf(&vanilla, &roi)?, rrf(&debiased, &roi)?);
    println!("RRF abs vanilla {:.3}  debiased {:.3}", rrf_abs(&vanilla, &roi)?, rrf_abs(&debiased, &roi)?);
    println!("ADR {:.3}", adr(&vanilla, &debiased, &roi)?);
    println!("DIF {:.3}", dif(&vanilla, &debiased, &roi)?);

    // a region covering the whole map is rejected
    let whole = Roi::new(0, 0, 4, 4);
    println!("whole-map roi: {}", rrf(&vanilla, &whole).unwrap_err());
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
