//! One-sample t-test machinery and Yule's phi for 2x2 tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CF_MAX_ITER: usize = 300;
const CF_EPS: f64 = 1e-12;
const CF_TINY: f64 = 1e-300;

/// Sample mean and n-1 standard deviation.
pub fn mean_std(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::BatchTooSmall(n));
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let ss: f64 = sample.iter().map(|x| (x - mean).powi(2)).sum();
    Ok((mean, (ss / (n - 1) as f64).sqrt()))
}

/// One-sample t statistic against a zero mean, with `n - 1` degrees of
/// freedom.
///
/// A sample whose values are all identical has no defined statistic and
/// yields [`Error::ZeroVariance`], even when rounding in the mean would make
/// the computed deviation slightly positive.
pub fn t_statistic(sample: &[f64]) -> Result<(f64, usize)> {
    let (mean, std) = mean_std(sample)?;
    if std == 0.0 || sample.iter().all(|&x| x == sample[0]) {
        return Err(Error::ZeroVariance);
    }
    let n = sample.len();
    Ok((mean / (std / (n as f64).sqrt()), n - 1))
}

/// Upper-tail probability `P(T > t)` of Student's t with `df` degrees of
/// freedom.
pub fn student_t_sf(t: f64, df: usize) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t == 0.0 {
        return 0.5;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let nu = df as f64;
    // P(|T| > |t|) = I_x(nu/2, 1/2) with x = nu / (nu + t^2)
    let x = nu / (nu + t * t);
    let tail = 0.5 * regularized_incomplete_beta(x, 0.5 * nu, 0.5);
    if t > 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // the continued fraction converges fast only below the mean-ish switch point
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let clamp = |v: f64| if v.abs() < CF_TINY { CF_TINY } else { v };

    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Natural log of the gamma function (Lanczos, g = 7, 9 terms), for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Counts of a binary protected attribute (first index) against a binary
/// target (second index).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable2x2 {
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
}

impl ContingencyTable2x2 {
    pub fn new(n00: u64, n01: u64, n10: u64, n11: u64) -> Self {
        Self { n00, n01, n10, n11 }
    }

    /// Tallies `(pa, y)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u8, u8)>) -> Self {
        let mut t = Self::default();
        for (pa, y) in pairs {
            *t.cell_mut(pa, y) += 1;
        }
        t
    }

    pub fn cell(&self, pa: u8, y: u8) -> u64 {
        match (pa, y) {
            (0, 0) => self.n00,
            (0, _) => self.n01,
            (_, 0) => self.n10,
            _ => self.n11,
        }
    }

    fn cell_mut(&mut self, pa: u8, y: u8) -> &mut u64 {
        match (pa, y) {
            (0, 0) => &mut self.n00,
            (0, _) => &mut self.n01,
            (_, 0) => &mut self.n10,
            _ => &mut self.n11,
        }
    }

    pub fn total(&self) -> u64 {
        self.n00 + self.n01 + self.n10 + self.n11
    }
}

/// Yule's phi coefficient of a 2x2 table.
pub fn yule_phi(table: &ContingencyTable2x2) -> Result<f64> {
    let (n00, n01, n10, n11) = (
        table.n00 as f64,
        table.n01 as f64,
        table.n10 as f64,
        table.n11 as f64,
    );
    let pa0 = n00 + n01;
    let pa1 = n10 + n11;
    let y0 = n00 + n10;
    let y1 = n01 + n11;
    if pa0 == 0.0 || pa1 == 0.0 || y0 == 0.0 || y1 == 0.0 {
        return Err(Error::DegenerateMarginal);
    }
    let phi = (n11 * n00 - n10 * n01) / (pa0 * pa1 * y0 * y1).sqrt();
    Ok(phi.clamp(-1.0, 1.0))
}
