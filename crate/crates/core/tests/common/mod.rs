#![allow(dead_code)]

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wq_sysid::faer::Mat;
use wq_sysid::lti_model::spectral_radius;
use wq_sysid::StateSpaceModel64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Mat<f64> {
    let d = Uniform::new_inclusive(lo, hi);
    Mat::from_fn(r, c, |_, _| d.sample(rng))
}

/// Random dense plant with spectral radius drawn from `[rho_lo, rho_hi]`.
pub fn random_plant(
    rng: &mut ChaCha8Rng,
    n_x: usize,
    n_u: usize,
    n_y: usize,
    (rho_lo, rho_hi): (f64, f64),
    with_d: bool,
) -> StateSpaceModel64 {
    let raw = uniform_mat(rng, n_x, n_x, -1.0, 1.0);
    let probe = StateSpaceModel64::new(
        raw.clone(),
        Mat::zeros(n_x, 1),
        Mat::zeros(1, n_x),
        Mat::zeros(1, 1),
        1.0,
    )
    .unwrap();
    let rho = spectral_radius(&probe).unwrap().max(1e-3);
    let target = rng.gen_range(rho_lo..=rho_hi);
    let a = Mat::from_fn(n_x, n_x, |i, j| raw[(i, j)] * target / rho);
    let b = uniform_mat(rng, n_x, n_u, -1.0, 1.0);
    let c = uniform_mat(rng, n_y, n_x, -1.0, 1.0);
    let d = if with_d {
        uniform_mat(rng, n_y, n_u, -1.0, 1.0)
    } else {
        Mat::zeros(n_y, n_u)
    };
    StateSpaceModel64::new(a, b, c, d, 1.0).unwrap()
}

/// Dimensions in the acceptance family: n_x ∈ [2,10], n_u ∈ [1,2], n_y ∈ [1,3].
pub fn random_dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (rng.gen_range(2..=10), rng.gen_range(1..=2), rng.gen_range(1..=3))
}

/// Descending nonnegative spectrum with at least one positive entry.
pub fn random_spectrum(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len)
        .map(|_| rng.gen_range(0.0..10.0f64).powi(rng.gen_range(1..4)))
        .collect();
    v[0] += 1e-3;
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// Smallest `n` with `l(n) > g`, by direct summation.
pub fn linear_scan_order(sv: &[f64], g: f64) -> usize {
    let total: f64 = sv.iter().sum();
    let mut acc = 0.0;
    for (i, s) in sv.iter().enumerate() {
        acc += s;
        if i + 1 == sv.len() || acc / total > g {
            return i + 1;
        }
    }
    unreachable!()
}

/// Naive dense recursion `x ← Ax + Bu`, `y = Cx + Du`, columns are time.
pub fn dense_simulate(m: &StateSpaceModel64, u: &Mat<f64>, x0: &[f64]) -> Mat<f64> {
    let mut x = Mat::from_fn(m.n_x(), 1, |i, _| x0[i]);
    let mut y = Mat::zeros(m.n_y(), u.ncols());
    for k in 0..u.ncols() {
        let uk = Mat::from_fn(m.n_u(), 1, |i, _| u[(i, k)]);
        let yk = m.c() * &x + m.d() * &uk;
        for i in 0..m.n_y() {
            y[(i, k)] = yk[(i, 0)];
        }
        x = m.a() * &x + m.b() * &uk;
    }
    y
}

/// Local maxima of a sampled curve whose value is at least `frac` of the peak.
pub fn prominent_maxima(h: &[f64], frac: f64) -> Vec<usize> {
    let peak = h.iter().cloned().fold(f64::MIN, f64::max);
    (1..h.len().saturating_sub(1))
        .filter(|&k| h[k] > h[k - 1] && h[k] >= h[k + 1] && h[k] >= frac * peak)
        .collect()
}
