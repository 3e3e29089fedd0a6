//! Group-conditioned classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{SampleRow, SampleTable};

/// Confusion counts for one protected-attribute group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn record(&mut self, y_true: u8, y_pred: u8) {
        match (y_true, y_pred) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fn_ += 1,
            (_, 1) => self.fp += 1,
            _ => self.tn += 1,
        }
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }
}

/// True and false positive rates per protected-attribute group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub tpr_pa0: f64,
    pub tpr_pa1: f64,
    pub fpr_pa0: f64,
    pub fpr_pa1: f64,
    /// Indexed by `pa`.
    pub confusion: [Confusion; 2],
}

impl GroupRates {
    /// Rates from per-group confusion counts; every `(pa, y_true)` cell must
    /// be nonempty.
    pub fn from_confusion(confusion: [Confusion; 2]) -> Result<Self> {
        for (pa, c) in confusion.iter().enumerate() {
            if c.negatives() == 0 {
                return Err(Error::EmptyGroupCell { pa: pa as u8, y_true: 0 });
            }
            if c.positives() == 0 {
                return Err(Error::EmptyGroupCell { pa: pa as u8, y_true: 1 });
            }
        }
        let tpr = |c: &Confusion| c.tp as f64 / c.positives() as f64;
        let fpr = |c: &Confusion| c.fp as f64 / c.negatives() as f64;
        Ok(Self {
            tpr_pa0: tpr(&confusion[0]),
            tpr_pa1: tpr(&confusion[1]),
            fpr_pa0: fpr(&confusion[0]),
            fpr_pa1: fpr(&confusion[1]),
            confusion,
        })
    }
}

pub(crate) fn confusion_by_group<'a>(
    rows: impl IntoIterator<Item = &'a SampleRow>,
    mut predict: impl FnMut(&SampleRow) -> u8,
) -> [Confusion; 2] {
    let mut out = [Confusion::default(); 2];
    for row in rows {
        out[row.pa as usize].record(row.y_true, predict(row));
    }
    out
}

pub fn group_rates(table: &SampleTable) -> Result<GroupRates> {
    GroupRates::from_confusion(confusion_by_group(table.rows(), |r| r.y_pred))
}

/// Largest of the TPR gap and the FPR gap between the two groups.
pub fn equalized_odds(rates: &GroupRates) -> f64 {
    let tpr_gap = (rates.tpr_pa1 - rates.tpr_pa0).abs();
    let fpr_gap = (rates.fpr_pa1 - rates.fpr_pa0).abs();
    tpr_gap.max(fpr_gap)
}

pub fn accuracy(table: &SampleTable) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let correct = table.rows().iter().filter(|r| r.y_pred == r.y_true).count();
    Ok(correct as f64 / table.len() as f64)
}
