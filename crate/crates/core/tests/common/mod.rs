//! Reference implementations used as test oracles. Written from the
//! definitions, sharing no code with the library.

#![allow(dead_code)]

use rand::Rng;
use saliency_fairness::nn::{LayerSpec, NetBuilder, Shape, TinyNet};
use saliency_fairness::{RelevanceMap, Roi};

pub fn grid(map: &RelevanceMap) -> Vec<Vec<f64>> {
    (0..map.height())
        .map(|r| (0..map.width()).map(|c| map.get(r, c)).collect())
        .collect()
}

fn inside(roi: &Roi, r: usize, c: usize) -> bool {
    r >= roi.top && r < roi.top + roi.height && c >= roi.left && c < roi.left + roi.width
}

pub fn oracle_rrf(m: &[Vec<f64>], roi: &Roi) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (r, row) in m.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            den += v;
            if inside(roi, r, c) {
                num += v;
            }
        }
    }
    num / den
}

pub fn oracle_rrf_abs(m: &[Vec<f64>], roi: &Roi) -> f64 {
    let abs: Vec<Vec<f64>> = m.iter().map(|row| row.iter().map(|v| v.abs()).collect()).collect();
    oracle_rrf(&abs, roi)
}

pub fn oracle_adr(v: &[Vec<f64>], d: &[Vec<f64>], roi: &Roi) -> f64 {
    let mut sum = 0.0;
    let mut n = 0.0;
    for r in roi.top..roi.top + roi.height {
        for c in roi.left..roi.left + roi.width {
            sum += v[r][c] - d[r][c];
            n += 1.0;
        }
    }
    sum / n
}

pub fn oracle_dif(v: &[Vec<f64>], d: &[Vec<f64>], roi: &Roi) -> f64 {
    let mut hits = 0.0;
    let mut n = 0.0;
    for r in roi.top..roi.top + roi.height {
        for c in roi.left..roi.left + roi.width {
            if d[r][c] < v[r][c] {
                hits += 1.0;
            }
            n += 1.0;
        }
    }
    hits / n
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Student-t upper tail by quadrature. Substituting `t = sqrt(df) tan(theta)`
/// turns the density into `cos(theta)^(df - 1)` on `(-pi/2, pi/2)`.
pub fn oracle_t_sf(t: f64, df: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let theta = (t / df.sqrt()).atan();
    let density = move |x: f64| x.cos().max(0.0).powf(df - 1.0);
    // the integrand is even, so integrate over [0, pi/2] pieces only
    let half = integrate(&density, 0.0, half_pi, 1e-14);
    let tail = if theta >= 0.0 {
        integrate(&density, theta, half_pi, 1e-14)
    } else {
        half + integrate(&density, 0.0, -theta, 1e-14)
    };
    tail / (2.0 * half)
}

/// One-sided one-sample t-test on `diffs`: `(t, p)`.
pub fn oracle_t_test(diffs: &[f64]) -> (f64, f64) {
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = mean / (var.sqrt() / n.sqrt());
    (t, oracle_t_sf(t, n - 1.0))
}

pub fn random_map(rng: &mut impl Rng, h: usize, w: usize) -> RelevanceMap {
    let values: Vec<f64> = (0..h * w).map(|_| rng.random_range(-1.0..1.0) + 0.3).collect();
    RelevanceMap::from_f64(h, w, &values).unwrap()
}

/// A random ROI strictly smaller than `h x w`.
pub fn random_roi(rng: &mut impl Rng, h: usize, w: usize) -> Roi {
    loop {
        let rh = rng.random_range(1..=h);
        let rw = rng.random_range(1..=w);
        if rh * rw == h * w {
            continue;
        }
        return Roi::new(rng.random_range(0..=h - rh), rng.random_range(0..=w - rw), rh, rw);
    }
}

/// Three affine layers, either dense-only or starting with a convolution.
pub fn random_three_layer_net(rng: &mut impl Rng, conv: bool) -> TinyNet {
    let builder = if conv {
        NetBuilder::new(Shape::image(2, 6, 6)).conv2d(3, 3, 1).relu().flatten().dense(8)
    } else {
        NetBuilder::new(Shape::Flat { len: 12 }).dense(10).relu().dense(8)
    };
    let mut net = builder.relu().dense(2).build_random(rng).unwrap();
    for layer in net.layers_mut() {
        for b in layer.bias.iter_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    net
}

pub fn zero_biases(net: &mut TinyNet) {
    for layer in net.layers_mut() {
        layer.bias.iter_mut().for_each(|b| *b = 0.0);
    }
}

pub fn random_input(rng: &mut impl Rng, net: &TinyNet) -> Vec<f64> {
    (0..net.input_shape().len()).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Smallest |pre-activation| over every ReLU input.
pub fn relu_margin(net: &TinyNet, x: &[f64]) -> f64 {
    let mut margin = f64::INFINITY;
    for (i, layer) in net.layers().iter().enumerate() {
        if matches!(layer.spec, LayerSpec::Relu) && i > 0 {
            for z in net.activation_at(x, i - 1).unwrap() {
                margin = margin.min(z.abs());
            }
        }
    }
    margin
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
