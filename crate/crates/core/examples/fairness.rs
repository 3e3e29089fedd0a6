// Group rates, EqualizedOdds and Yule's phi on a small prediction table.
//
// ```bash
// cargo run -p saliency-fairness --example fairness
// ```

use saliency_fairness::fairness::{accuracy, equalized_odds, group_rates};
use saliency_fairness::stats::{yule_phi, ContingencyTable2x2};
use saliency_fairness::{Result, SampleRow, SampleTable};

pub fn run_example() -> Result<()> {
    // (y_true, y_pred, pa): the model over-predicts positives for pa = 1
    let rows = [
        (1, 1, 0), (1, 0, 0), (1, 1, 0), (0, 0, 0), (0, 0, 0), (0, 1, 0),
        (1, 1, 1), (1, 1, 1), (1, 1, 1), (0, 1, 1), (0, 1, 1), (0, 0, 1),
    ];
    let table = SampleTable::new(
        rows.iter()
            .enumerate()
            .map(|(i, &(y_true, y_pred, pa))| SampleRow {
                id: format!("s{i:02}"),
                y_true,
                y_pred,
                pa,
                score: y_pred as f64,
            })
            .collect(),
    )?;

    let rates = group_rates(&table)?;
    println!("TPR pa=0 {:.3}  pa=1 {:.3}", rates.tpr_pa0, rates.tpr_pa1);
    println!("FPR pa=0 {:.3}  pa=1 {:.3}", rates.fpr_pa0, rates.fpr_pa1);
    println!("EqualizedOdds {:.3}", equalized_odds(&rates));
    println!("Accuracy {:.3}", accuracy(&table)?);

    let pairs: Vec<(u8, u8)> = table.rows().iter().map(|r| (r.pa, r.y_true)).collect();
    println!("phi(pa, y) = {:.3}", yule_phi(&ContingencyTable2x2::from_pairs(pairs))?);
    let strong = ContingencyTable2x2::new(40, 10, 10, 40);
    println!("phi of [[40, 10], [10, 40]] = {:.3}", yule_phi(&strong)?);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
