//! Model order from the singular-value spectrum: the energy level
//! `l(n_r) = Σ_{i≤n_r} σ_i / Σ_i σ_i` and a binary search for the smallest
//! order whose energy exceeds a goal.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default goal: keep more than 95% of the spectrum's energy.
pub const DEFAULT_ENERGY_GOAL: f64 = 0.95;

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyProfile<T> {
    pub singular_values: Vec<T>,
    pub total: T,
    /// `levels[i]` is the energy level at order `i + 1`.
    pub levels: Vec<T>,
}

fn check_spectrum<T: Real>(sv: &[T]) -> Result<T> {
    if sv.is_empty() {
        return Err(Error::arg("empty singular-value spectrum"));
    }
    if sv.iter().any(|s| !s.is_finite() || *s < T::zero()) {
        return Err(Error::arg("singular values must be finite and nonnegative"));
    }
    if sv.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::arg("singular values must be sorted descending"));
    }
    let total = sv.iter().fold(T::zero(), |a, &b| a + b);
    if total <= T::zero() {
        return Err(Error::arg("singular values sum to zero"));
    }
    Ok(total)
}

impl<T: Real> EnergyProfile<T> {
    pub fn new(sv: &[T]) -> Result<Self> {
        let total = check_spectrum(sv)?;
        let mut acc = T::zero();
        let mut levels: Vec<T> = sv
            .iter()
            .map(|&s| {
                acc += s;
                acc / total
            })
            .collect();
        // the partial sum that reaches the total is the total itself
        *levels.last_mut().expect("nonempty") = T::one();
        Ok(Self {
            singular_values: sv.to_vec(),
            total,
            levels,
        })
    }

    pub fn level(&self, n_r: usize) -> T {
        self.levels[n_r - 1]
    }
}

pub fn energy_level<T: Real>(sv: &[T], n_r: usize) -> Result<T> {
    let total = check_spectrum(sv)?;
    if n_r == 0 || n_r > sv.len() {
        return Err(Error::arg(format!("order {n_r} outside 1..={}", sv.len())));
    }
    if n_r == sv.len() {
        return Ok(T::one());
    }
    let head = sv[..n_r].iter().fold(T::zero(), |a, &b| a + b);
    Ok(head / total)
}

/// Smallest `n_r` with `energy_level(sv, n_r) > g`.
pub fn binary_search_order<T: Real>(sv: &[T], g: T) -> Result<usize> {
    if g.is_nan() || g >= T::one() {
        return Err(Error::arg(format!("energy goal {g} is unreachable (must be < 1)")));
    }
    let profile = EnergyProfile::new(sv)?;
    let n = sv.len();
    let l = |n_r: usize| profile.level(n_r);
    if g <= T::zero() || l(1) > g {
        return Ok(1);
    }
    // invariant: l(left) <= g < l(right)
    let (mut left, mut right) = (1usize, n);
    while right - left > 1 {
        let mid = (left + right) / 2;
        if l(mid) > g {
            right = mid;
        } else {
            left = mid;
        }
    }
    Ok(right)
}
