//! Post-hoc debiasing baselines: per-group decision thresholds, and removal
//! of a concept direction from a layer's activation space.

use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::fairness::{confusion_by_group, equalized_odds, Confusion, GroupRates};
use crate::nn::TinyNet;
use crate::types::SampleTable;

pub const DEFAULT_GRID_SIZE: usize = 101;

const TIE_TOLERANCE: f64 = 1e-12;

/// Decision thresholds on the positive-class score, one per protected group.
/// A row is predicted positive when `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupThresholds {
    pub threshold_pa0: f64,
    pub threshold_pa1: f64,
}

impl GroupThresholds {
    pub fn shared(threshold: f64) -> Self {
        Self {
            threshold_pa0: threshold,
            threshold_pa1: threshold,
        }
    }

    pub fn for_group(&self, pa: u8) -> f64 {
        if pa == 0 {
            self.threshold_pa0
        } else {
            self.threshold_pa1
        }
    }

    pub fn predict(&self, score: f64, pa: u8) -> u8 {
        (score >= self.for_group(pa)) as u8
    }

    /// Re-predicts every row of `table` from its score.
    pub fn apply(&self, table: &SampleTable) -> SampleTable {
        table.with_predictions(|r| self.predict(r.score, r.pa))
    }
}

/// Uniform grid over `[0, 1]`; a single point sits at 0.5.
pub fn threshold_grid(grid_size: usize) -> Vec<f64> {
    match grid_size {
        0 => Vec::new(),
        1 => vec![0.5],
        n => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

struct GridEval {
    grid: Vec<f64>,
    /// `[pa][threshold index]`
    confusion: [Vec<Confusion>; 2],
    n: f64,
}

impl GridEval {
    fn new(table: &SampleTable, grid_size: usize) -> Result<Self> {
        if grid_size == 0 {
            return Err(Error::BadValue("grid_size must be positive".into()));
        }
        // fail early on empty cells, whatever the thresholds
        GroupRates::from_confusion(confusion_by_group(table.rows(), |r| r.y_pred))?;
        let grid = threshold_grid(grid_size);
        let confusion = [0u8, 1].map(|pa| {
            grid.iter()
                .map(|&t| {
                    let rows = table.rows().iter().filter(|r| r.pa == pa);
                    confusion_by_group(rows, |r| (r.score >= t) as u8)[pa as usize]
                })
                .collect()
        });
        Ok(Self {
            grid,
            confusion,
            n: table.len() as f64,
        })
    }

    /// `(equalized odds, accuracy)` for threshold indices `(i, j)`.
    fn score(&self, i: usize, j: usize) -> (f64, f64) {
        let c0 = self.confusion[0][i];
        let c1 = self.confusion[1][j];
        let rates = GroupRates::from_confusion([c0, c1]).expect("cells checked nonempty");
        let acc = (c0.tp + c0.tn + c1.tp + c1.tn) as f64 / self.n;
        (equalized_odds(&rates), acc)
    }

    fn search(&self, candidates: impl Iterator<Item = (usize, usize)>) -> GroupThresholds {
        let mut best: Option<((usize, usize), f64, f64)> = None;
        for (i, j) in candidates {
            let (eo, acc) = self.score(i, j);
            let better = match best {
                None => true,
                Some((_, best_eo, best_acc)) => {
                    eo < best_eo - TIE_TOLERANCE
                        || ((eo - best_eo).abs() <= TIE_TOLERANCE && acc > best_acc + TIE_TOLERANCE)
                }
            };
            if better {
                best = Some(((i, j), eo, acc));
            }
        }
        let ((i, j), _, _) = best.expect("grid is nonempty");
        GroupThresholds {
            threshold_pa0: self.grid[i],
            threshold_pa1: self.grid[j],
        }
    }
}

/// Exhaustive search over `grid_size` thresholds per group.
///
/// Minimizes equalized odds; ties go to higher accuracy, then to the
/// lexicographically smaller `(threshold_pa0, threshold_pa1)`.
pub fn fit_thresholds(table: &SampleTable, grid_size: usize) -> Result<GroupThresholds> {
    let eval = GridEval::new(table, grid_size)?;
    let n = eval.grid.len();
    Ok(eval.search((0..n).flat_map(|i| (0..n).map(move |j| (i, j)))))
}

/// Best single threshold shared by both groups, under the same objective.
pub fn fit_shared_threshold(table: &SampleTable, grid_size: usize) -> Result<GroupThresholds> {
    let eval = GridEval::new(table, grid_size)?;
    Ok(eval.search((0..eval.grid.len()).map(|i| (i, i))))
}

/// Concept activation vector at the output of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cav {
    /// Unit-norm direction from the `pa = 0` centroid toward the `pa = 1`
    /// centroid.
    pub direction: Vec<f64>,
    pub layer_index: usize,
    /// Centroid of the `pa = 0` activations.
    pub bias_point: Vec<f64>,
}

/// Fits a CAV as the normalized difference of group means.
pub fn fit_cav(activations_with_pa: &[(Vec<f64>, u8)], layer_index: usize) -> Result<Cav> {
    let dim = activations_with_pa.first().map(|(a, _)| a.len()).unwrap_or(0);
    let mut sums = [vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 2];
    for (a, pa) in activations_with_pa {
        if a.len() != dim {
            return Err(shape_mismatch(format!("{dim}-dim activations"), a.len()));
        }
        if *pa > 1 {
            return Err(Error::BadValue(format!("pa={pa} is not binary")));
        }
        counts[*pa as usize] += 1;
        for (s, v) in sums[*pa as usize].iter_mut().zip(a) {
            *s += v;
        }
    }
    for pa in 0..2 {
        if counts[pa] == 0 {
            return Err(Error::EmptyGroup(pa as u8));
        }
    }
    let [mean0, mean1] = [0, 1].map(|pa| {
        sums[pa].iter().map(|s| s / counts[pa] as f64).collect::<Vec<_>>()
    });
    let diff: Vec<f64> = mean1.iter().zip(&mean0).map(|(a, b)| a - b).collect();
    let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(Error::ZeroDirection);
    }
    Ok(Cav {
        direction: diff.iter().map(|d| d / norm).collect(),
        layer_index,
        bias_point: mean0,
    })
}

/// Returns a copy of `net` that, after layer `cav.layer_index`, replaces each
/// activation `a` with `a - <a - bias_point, direction> direction`.
///
/// Valid sites are the outputs of every layer except the last.
pub fn project_out(net: &TinyNet, cav: &Cav) -> Result<TinyNet> {
    let layers = net.layers().len();
    if cav.layer_index + 1 >= layers {
        return Err(Error::InvalidLayer {
            index: cav.layer_index,
            layers,
        });
    }
    let mut out = net.clone();
    out.insert_projection(cav.layer_index, cav.direction.clone(), cav.bias_point.clone())?;
    Ok(out)
}
