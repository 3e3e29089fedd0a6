//! Synthetic images with a controllable protected-attribute/target
//! association, and undersampling to a target Yule's phi.
//!
//! Every random draw comes from `ChaCha8Rng::seed_from_u64(seed)`; Gaussian
//! noise uses `rand_distr::Normal`. Given the same crate versions, the same
//! seed reproduces the same images and splits on any platform.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{yule_phi, ContingencyTable2x2};
use crate::types::Roi;

/// Allowed distance between the achieved and requested phi.
pub const PHI_TOLERANCE: f64 = 0.01;
const PHI_SLACK: f64 = 1e-9;

/// Recipe for a synthetic dataset. Class 1 images carry a bright bar in
/// `signal_region`, class 0 a dark one; `pa = 1` images additionally carry a
/// bright artifact over `patch`. Everything sits on Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// `(height, width)`
    pub image_size: (usize, usize),
    /// Where the protected-attribute artifact is stamped.
    pub patch: Roi,
    /// Where the class pattern is drawn; must not overlap `patch`.
    pub signal_region: Roi,
    pub n_samples: usize,
    pub phi_target: f64,
    pub noise_sigma: f64,
    pub signal_amplitude: f64,
    pub artifact_intensity: f64,
    /// `P(pa = 1)`
    pub pa_rate: f64,
    /// `P(y = 1)`
    pub y_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            image_size: (16, 16),
            patch: Roi::new(10, 5, 5, 6),
            signal_region: Roi::new(3, 3, 3, 10),
            n_samples: 2000,
            phi_target: 0.0,
            noise_sigma: 1.0,
            signal_amplitude: 0.25,
            artifact_intensity: 1.5,
            pa_rate: 0.5,
            y_rate: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.image_size;
        self.patch.validate_for(h, w)?;
        self.signal_region.validate_for(h, w)?;
        if self.signal_region.cells().any(|(r, c)| self.patch.contains(r, c)) {
            return Err(Error::Config("signal_region overlaps the artifact patch".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be finite and nonnegative".into()));
        }
        for (name, rate) in [("pa_rate", self.pa_rate), ("y_rate", self.y_rate)] {
            if !(rate > 0.0 && rate < 1.0) {
                return Err(Error::Config(format!("{name}={rate} must lie in (0, 1)")));
            }
        }
        if !(-1.0..=1.0).contains(&self.phi_target) {
            return Err(Error::InfeasiblePhi {
                target: self.phi_target,
                reason: "phi must lie in [-1, 1]".into(),
            });
        }
        self.cell_probabilities().map(|_| ())
    }

    /// Joint probabilities `[[p00, p01], [p10, p11]]` indexed `[pa][y]`.
    pub fn cell_probabilities(&self) -> Result<[[f64; 2]; 2]> {
        let (p, q) = (self.pa_rate, self.y_rate);
        let p11 = p * q + self.phi_target * (p * (1.0 - p) * q * (1.0 - q)).sqrt();
        let cells = [[1.0 - p - q + p11, q - p11], [p - p11, p11]];
        if cells.iter().flatten().any(|&c| c < -1e-12) {
            return Err(Error::InfeasiblePhi {
                target: self.phi_target,
                reason: format!("marginals pa_rate={p}, y_rate={q} cannot reach it"),
            });
        }
        Ok(cells.map(|row| row.map(|c| c.max(0.0))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub id: String,
    pub height: usize,
    pub width: usize,
    /// Row-major, single channel; values are exactly representable as `f32`.
    pub pixels: Vec<f64>,
    pub y: u8,
    pub pa: u8,
}

/// Empirical contingency table of `(pa, y)`.
pub fn contingency(samples: &[LabeledImage]) -> ContingencyTable2x2 {
    ContingencyTable2x2::from_pairs(samples.iter().map(|s| (s.pa, s.y)))
}

pub fn empirical_phi(samples: &[LabeledImage]) -> Result<f64> {
    yule_phi(&contingency(samples))
}

/// Integer cell counts summing to `n`, by largest remainder.
fn allocate(n: usize, probs: &[f64; 4]) -> [usize; 4] {
    let raw: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let mut counts = [0usize; 4];
    for (c, r) in counts.iter_mut().zip(&raw) {
        *c = r.floor() as usize;
    }
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut missing = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if probs[i] > 0.0 {
            counts[i] += 1;
            missing -= 1;
        }
    }
    counts
}

/// Generates `spec.n_samples` images with `(pa, y)` cell counts fixed to the
/// nearest integers of the requested joint distribution, in shuffled order.
pub fn generate(spec: &SyntheticSpec) -> Result<Vec<LabeledImage>> {
    spec.validate()?;
    let [[p00, p01], [p10, p11]] = spec.cell_probabilities()?;
    let counts = allocate(spec.n_samples, &[p00, p01, p10, p11]);
    let mut labels: Vec<(u8, u8)> = Vec::with_capacity(spec.n_samples);
    for (cell, &count) in counts.iter().enumerate() {
        let (pa, y) = ((cell / 2) as u8, (cell % 2) as u8);
        labels.extend(std::iter::repeat_n((pa, y), count));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    labels.shuffle(&mut rng);

    let (h, w) = spec.image_size;
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let width = spec.n_samples.to_string().len();
    let samples = labels
        .into_iter()
        .enumerate()
        .map(|(i, (pa, y))| {
            let mut pixels: Vec<f64> = (0..h * w).map(|_| noise.sample(&mut rng)).collect();
            let sign = if y == 1 { 1.0 } else { -1.0 };
            for (r, c) in spec.signal_region.cells() {
                pixels[r * w + c] += sign * spec.signal_amplitude;
            }
            if pa == 1 {
                for (r, c) in spec.patch.cells() {
                    pixels[r * w + c] += spec.artifact_intensity;
                }
            }
            for p in &mut pixels {
                *p = *p as f32 as f64;
            }
            LabeledImage {
                id: format!("s{i:0width$}"),
                height: h,
                width: w,
                pixels,
                y,
                pa,
            }
        })
        .collect();
    Ok(samples)
}

fn cells_of(samples: &[LabeledImage]) -> [[Vec<usize>; 2]; 2] {
    let mut cells: [[Vec<usize>; 2]; 2] = Default::default();
    for (i, s) in samples.iter().enumerate() {
        cells[s.pa as usize][s.y as usize].push(i);
    }
    cells
}

/// Phi of a table with `a` samples in each diagonal cell and `b` in each
/// off-diagonal cell.
fn equal_marginal_phi(a: usize, b: usize) -> f64 {
    (a as f64 - b as f64) / (a + b) as f64
}

/// Largest `(a, b)` with `a <= max_diag`, `b <= max_off` whose
/// equal-marginal phi is within tolerance of `target`.
pub(crate) fn solve_equal_marginal_counts(max_diag: usize, max_off: usize, target: f64) -> Option<(usize, usize)> {
    let ok = |a: usize, b: usize| a + b > 0 && (equal_marginal_phi(a, b) - target).abs() <= PHI_TOLERANCE + PHI_SLACK;
    let mut best: Option<(usize, usize)> = None;
    let mut consider = |a: usize, b: usize| {
        if a <= max_diag && b <= max_off && ok(a, b) {
            let better = match best {
                None => true,
                Some((ba, bb)) => {
                    let (t, bt) = (a + b, ba + bb);
                    t > bt
                        || (t == bt
                            && (equal_marginal_phi(a, b) - target).abs()
                                < (equal_marginal_phi(ba, bb) - target).abs())
                }
            };
            if better {
                best = Some((a, b));
            }
        }
    };
    // b / a = (1 - phi) / (1 + phi); walk both axes so either bound can bind
    for a in 0..=max_diag {
        if target > -1.0 {
            let b = a as f64 * (1.0 - target) / (1.0 + target);
            for cand in [b.floor(), b.ceil()] {
                consider(a, (cand as usize).min(max_off));
            }
        }
        consider(a, max_off);
    }
    for b in 0..=max_off {
        if target < 1.0 {
            let a = b as f64 * (1.0 + target) / (1.0 - target);
            for cand in [a.floor(), a.ceil()] {
                consider((cand as usize).min(max_diag), b);
            }
        }
        consider(max_diag, b);
    }
    best
}

/// Undersamples to equal `pa` and `y` marginals: `a` samples in each
/// diagonal cell and `b` in each off-diagonal cell, choosing the largest such
/// table whose phi is within tolerance of `phi_target`.
pub fn undersample_equal_marginals(samples: &[LabeledImage], phi_target: f64, seed: u64) -> Result<Vec<LabeledImage>> {
    let cells = cells_of(samples);
    for pa in 0..2u8 {
        for y in 0..2u8 {
            if cells[pa as usize][y as usize].is_empty() {
                return Err(Error::EmptyGroupCell { pa, y_true: y });
            }
        }
    }
    let max_diag = cells[0][0].len().min(cells[1][1].len());
    let max_off = cells[0][1].len().min(cells[1][0].len());
    let (a, b) = solve_equal_marginal_counts(max_diag, max_off, phi_target).ok_or_else(|| Error::InfeasiblePhi {
        target: phi_target,
        reason: format!("no undersampled table of at most {max_diag} diagonal and {max_off} off-diagonal samples per cell gets within {PHI_TOLERANCE}"),
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; samples.len()];
    for pa in 0..2 {
        for y in 0..2 {
            let mut members = cells[pa][y].clone();
            members.shuffle(&mut rng);
            let quota = if pa == y { a } else { b };
            for &i in &members[..quota] {
                keep[i] = true;
            }
        }
    }
    Ok(samples
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(s, _)| s.clone())
        .collect())
}

/// Subset of `samples` whose empirical phi is within 0.01 of `phi_target`,
/// obtained by undersampling only.
///
/// Input already within tolerance is returned unchanged. Otherwise the
/// largest equal-marginal table reaching the target is drawn.
pub fn rebalance_to_phi(samples: &[LabeledImage], phi_target: f64, seed: u64) -> Result<Vec<LabeledImage>> {
    if !(-1.0..=1.0).contains(&phi_target) {
        return Err(Error::InfeasiblePhi {
            target: phi_target,
            reason: "phi must lie in [-1, 1]".into(),
        });
    }
    if let Ok(phi) = empirical_phi(samples) {
        if (phi - phi_target).abs() <= PHI_TOLERANCE {
            return Ok(samples.to_vec());
        }
    }
    undersample_equal_marginals(samples, phi_target, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub debias: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.5,
            debias: 0.2,
            test: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<LabeledImage>,
    pub debias: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
}

/// Disjoint train/debias/test splits.
///
/// Samples are interleaved across `(pa, y)` cells in proportion to cell size
/// before cutting, so train and debias keep the pool's association. The test
/// portion is then undersampled to equal cell counts (phi = 0).
pub fn split(samples: &[LabeledImage], fractions: SplitFractions, seed: u64) -> Result<Splits> {
    let SplitFractions { train, debias, test } = fractions;
    if !(train > 0.0 && debias > 0.0 && test > 0.0) || train + debias + test > 1.0 + 1e-9 {
        return Err(Error::Config(format!(
            "split fractions ({train}, {debias}, {test}) must be positive and sum to at most 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(samples.len());
    for (cell_index, members) in cells_of(samples).iter().flatten().enumerate() {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        let size = members.len() as f64;
        for (rank, &i) in members.iter().enumerate() {
            keyed.push(((rank as f64 + 0.5) / size, cell_index, i));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let order: Vec<usize> = keyed.into_iter().map(|(_, _, i)| i).collect();

    let n = samples.len();
    let n_train = (train * n as f64).round() as usize;
    let n_debias = ((debias * n as f64).round() as usize).min(n - n_train);
    let n_test = ((test * n as f64).round() as usize).min(n - n_train - n_debias);
    let take = |range: std::ops::Range<usize>| -> Vec<LabeledImage> {
        let mut idx: Vec<usize> = order[range].to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| samples[i].clone()).collect()
    };
    let test_pool = take(n_train + n_debias..n_train + n_debias + n_test);
    Ok(Splits {
        train: take(0..n_train),
        debias: take(n_train..n_train + n_debias),
        test: undersample_equal_marginals(&test_pool, 0.0, seed ^ 0x7e57)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn spec(phi: f64, n: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_samples: n,
            phi_target: phi,
            seed,
            ..SyntheticSpec::default()
        }
    }

    fn pool(counts: [usize; 4]) -> Vec<LabeledImage> {
        let mut out = Vec::new();
        for (cell, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                out.push(LabeledImage {
                    id: format!("p{}", out.len()),
                    height: 1,
                    width: 1,
                    pixels: vec![0.0],
                    pa: (cell / 2) as u8,
                    y: (cell % 2) as u8,
                });
            }
        }
        out
    }

    #[test]
    fn phi_zero_generates_independent_labels() {
        let data = generate(&spec(0.0, 2000, 1)).unwrap();
        assert_eq!(data.len(), 2000);
        assert!(empirical_phi(&data).unwrap().abs() <= 0.05);
    }

    #[test]
    fn phi_one_ties_pa_to_y() {
        let data = generate(&spec(1.0, 300, 2)).unwrap();
        assert!(data.iter().all(|s| s.pa == s.y));
    }

    #[test]
    fn generated_phi_tracks_target() {
        for phi in [-0.6, 0.2, 0.5, 0.8] {
            let data = generate(&spec(phi, 2000, 3)).unwrap();
            assert!((empirical_phi(&data).unwrap() - phi).abs() <= 0.02, "phi={phi}");
        }
    }

    #[test]
    fn artifact_only_on_protected_samples() {
        let s = spec(0.0, 2000, 4);
        let data = generate(&s).unwrap();
        let patch_mean = |img: &LabeledImage| {
            s.patch.cells().map(|(r, c)| img.pixels[r * img.width + c]).sum::<f64>() / s.patch.area() as f64
        };
        let outside_mean = |img: &LabeledImage| {
            let cells: Vec<_> = (0..16 * 16)
                .filter(|&i| !s.patch.contains(i / 16, i % 16) && !s.signal_region.contains(i / 16, i % 16))
                .collect();
            cells.iter().map(|&i| img.pixels[i]).sum::<f64>() / cells.len() as f64
        };
        let group_mean = |pa: u8, f: &dyn Fn(&LabeledImage) -> f64| {
            let g: Vec<_> = data.iter().filter(|d| d.pa == pa).collect();
            g.iter().map(|d| f(d)).sum::<f64>() / g.len() as f64
        };
        // pa = 0 patch looks like background; pa = 1 patch is shifted by the intensity
        let bg = group_mean(0, &outside_mean);
        assert!((group_mean(0, &patch_mean) - bg).abs() < 0.05);
        assert!((group_mean(1, &patch_mean) - bg - s.artifact_intensity).abs() < 0.05);
    }

    #[test]
    fn generation_is_reproducible() {
        let a = generate(&spec(0.5, 200, 9)).unwrap();
        let b = generate(&spec(0.5, 200, 9)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(&spec(0.5, 200, 10)).unwrap());
    }

    #[test]
    fn infeasible_marginals_are_rejected() {
        let s = SyntheticSpec {
            pa_rate: 0.1,
            y_rate: 0.9,
            phi_target: 0.9,
            ..spec(0.9, 100, 0)
        };
        assert!(matches!(generate(&s), Err(Error::InfeasiblePhi { .. })));
    }

    #[test]
    fn overlapping_signal_region_is_rejected() {
        let s = SyntheticSpec {
            signal_region: Roi::new(9, 4, 3, 3),
            ..SyntheticSpec::default()
        };
        assert!(matches!(s.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rebalance_keeps_input_already_on_target() {
        let p = pool([30, 10, 10, 30]);
        assert_eq!(rebalance_to_phi(&p, 0.5, 1).unwrap(), p);
    }

    #[test]
    fn rebalance_balanced_pool_to_half() {
        let p = pool([250; 4]);
        let out = rebalance_to_phi(&p, 0.5, 3).unwrap();
        assert!((empirical_phi(&out).unwrap() - 0.5).abs() <= 0.01);
        let t = contingency(&out);
        assert_eq!((t.n00, t.n11), (250, 250));
        assert_eq!((t.n01, t.n10), (85, 85));
        let ids: HashSet<_> = p.iter().map(|s| &s.id).collect();
        assert!(out.iter().all(|s| ids.contains(&s.id)));
    }

    #[test]
    fn rebalance_to_near_perfect_association() {
        let out = rebalance_to_phi(&pool([3, 2, 2, 3]), 0.99, 0).unwrap();
        let t = contingency(&out);
        assert_eq!((t.n01, t.n10), (0, 0));
        assert_eq!((t.n00, t.n11), (3, 3));
    }

    #[test]
    fn rebalance_reports_unreachable_targets() {
        assert!(matches!(
            rebalance_to_phi(&pool([1, 1, 1, 1]), 0.3, 0),
            Err(Error::InfeasiblePhi { .. })
        ));
        assert!(matches!(
            rebalance_to_phi(&pool([5, 0, 5, 5]), 0.3, 0),
            Err(Error::EmptyGroupCell { pa: 0, y_true: 1 })
        ));
    }

    #[test]
    fn split_sizes_disjointness_and_balance() {
        let data = generate(&spec(0.4, 1000, 5)).unwrap();
        let fractions = SplitFractions {
            train: 0.6,
            debias: 0.2,
            test: 0.2,
        };
        let s = split(&data, fractions, 7).unwrap();
        assert_eq!(s.train.len(), 600);
        assert_eq!(s.debias.len(), 200);
        assert!(s.test.len() <= 200);
        let mut seen = HashSet::new();
        for img in s.train.iter().chain(&s.debias).chain(&s.test) {
            assert!(seen.insert(img.id.clone()), "{} appears twice", img.id);
        }
        assert!(empirical_phi(&s.test).unwrap().abs() <= 0.05);
        assert!((empirical_phi(&s.train).unwrap() - 0.4).abs() <= 0.02);
        assert!((empirical_phi(&s.debias).unwrap() - 0.4).abs() <= 0.03);
        assert_eq!(split(&data, fractions, 7).unwrap(), s);
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let data = generate(&spec(0.0, 100, 5)).unwrap();
        let bad = SplitFractions {
            train: 0.8,
            debias: 0.2,
            test: 0.2,
        };
        assert!(split(&data, bad, 0).is_err());
    }
}
