//! The unified subspace identification procedure.
//!
//! 1. Oblique projection `O_k` of the future outputs onto the past data along
//!    the future inputs.
//! 2. Weighting `W_1 O_k W_2`, which selects N4SID, MOESP or CVA.
//! 3. Truncated SVD; `Γ_k = W_1⁻¹ U_r Σ_r^{1/2}` and `X_k = Γ_k⁺ O_k`.
//! 4. `X_{k+1}` from the projection shifted one step, with `Γ_k` minus its
//!    last block row, then `(A, B, C, D)` by least squares.

use std::collections::BTreeMap;
use std::fmt;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti_model::{self, StateSpaceModel};
use crate::numerics::{frobenius, oblique_projection_with, scale_cols, vstack, PseudoInverse, RowComplement};
use crate::order_select;
use crate::scalar::Real;
use crate::signals::{block_hankel, SignalSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimVariant {
    N4sid,
    Moesp,
    Cva,
}

impl SimVariant {
    pub const ALL: [SimVariant; 3] = [SimVariant::N4sid, SimVariant::Moesp, SimVariant::Cva];
}

/// Every identification method the crate offers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    N4sid,
    Moesp,
    Cva,
    Era,
    OkidEra,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::N4sid, Method::Moesp, Method::Cva, Method::Era, Method::OkidEra];

    pub fn name(self) -> &'static str {
        match self {
            Method::N4sid => "n4sid",
            Method::Moesp => "moesp",
            Method::Cva => "cva",
            Method::Era => "era",
            Method::OkidEra => "okid-era",
        }
    }

    pub fn sim_variant(self) -> Option<SimVariant> {
        match self {
            Method::N4sid => Some(SimVariant::N4sid),
            Method::Moesp => Some(SimVariant::Moesp),
            Method::Cva => Some(SimVariant::Cva),
            _ => None,
        }
    }

    pub fn is_era_based(self) -> bool {
        matches!(self, Method::Era | Method::OkidEra)
    }
}

impl From<SimVariant> for Method {
    fn from(v: SimVariant) -> Self {
        match v {
            SimVariant::N4sid => Method::N4sid,
            SimVariant::Moesp => Method::Moesp,
            SimVariant::Cva => Method::Cva,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown method {s:?}")))
    }
}

/// Condition numbers, ranks and residuals collected along a pipeline.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub condition_numbers: BTreeMap<String, f64>,
    pub ranks: BTreeMap<String, usize>,
    pub residual_norms: BTreeMap<String, f64>,
    pub flags: Vec<String>,
    pub spectral_radius: f64,
    pub stable: bool,
}

impl Diagnostics {
    pub(crate) fn cond(&mut self, k: &str, v: f64) {
        self.condition_numbers.insert(k.to_string(), v);
    }
    pub(crate) fn rank(&mut self, k: &str, v: usize) {
        self.ranks.insert(k.to_string(), v);
    }
    pub(crate) fn residual(&mut self, k: &str, v: f64) {
        self.residual_norms.insert(k.to_string(), v);
    }
    pub(crate) fn flag(&mut self, f: impl Into<String>) {
        self.flags.push(f.into());
    }
    pub(crate) fn merge(&mut self, prefix: &str, other: Diagnostics) {
        for (k, v) in other.condition_numbers {
            self.condition_numbers.insert(format!("{prefix}{k}"), v);
        }
        for (k, v) in other.ranks {
            self.ranks.insert(format!("{prefix}{k}"), v);
        }
        for (k, v) in other.residual_norms {
            self.residual_norms.insert(format!("{prefix}{k}"), v);
        }
        self.flags
            .extend(other.flags.into_iter().map(|f| format!("{prefix}{f}")));
    }
}

#[derive(Clone, Debug)]
pub struct IdentifiedModel<T> {
    pub model: StateSpaceModel<T>,
    pub order: usize,
    /// Spectrum the order was truncated from.
    pub singular_values: Vec<T>,
    pub energy_level: T,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

/// Stamps the stability fields of the diagnostics. Instability is reported,
/// never treated as an error.
pub(crate) fn finish<T: Real>(
    model: StateSpaceModel<T>,
    singular_values: Vec<T>,
    method: Method,
    mut diagnostics: Diagnostics,
) -> Result<IdentifiedModel<T>> {
    let order = model.n_x();
    let rho = lti_model::spectral_radius(&model)?;
    diagnostics.spectral_radius = rho.to_f64_lossy();
    diagnostics.stable = rho < T::one();
    if !diagnostics.stable {
        diagnostics.flag("unstable");
    }
    let energy_level = order_select::energy_level(&singular_values, order)?;
    Ok(IdentifiedModel {
        model,
        order,
        singular_values,
        energy_level,
        method,
        diagnostics,
    })
}

/// `ceil(2 n_r / n_y)`, at least 2.
pub fn default_block_rows(n_r: usize, n_y: usize) -> usize {
    (2 * n_r).div_ceil(n_y.max(1)).max(2)
}

/// `W_1` and `W_2` of one variant, kept as actions rather than matrices.
#[derive(Clone, Debug)]
pub struct SimWeights<T> {
    pub variant: SimVariant,
    w1: Option<Mat<T>>,
    w1_inv: Option<Mat<T>>,
    w2: Option<RowComplement<T>>,
    /// CVA only: the output covariance was singular and a pseudo square root was used.
    pub cva_pseudo_sqrt: bool,
    pub cva_rank: Option<usize>,
}

impl<T: Real> SimWeights<T> {
    /// `W_1 O W_2`.
    pub fn apply(&self, o: MatRef<'_, T>) -> Result<Mat<T>> {
        let right = match &self.w2 {
            Some(pi) => pi.apply(o)?,
            None => o.to_owned(),
        };
        Ok(match &self.w1 {
            Some(w1) => w1 * &right,
            None => right,
        })
    }

    /// `W_1⁻¹ X` (pseudo-inverse when the CVA weight is singular).
    pub fn unweight(&self, x: MatRef<'_, T>) -> Mat<T> {
        match &self.w1_inv {
            Some(w) => w * x,
            None => x.to_owned(),
        }
    }

    pub fn w1(&self) -> Option<MatRef<'_, T>> {
        self.w1.as_ref().map(|m| m.as_ref())
    }
}

/// Weights for `variant`. `y_f` and `u_f` are the future output and input
/// Hankel blocks.
pub fn sim_weights<T: Real>(variant: SimVariant, y_f: MatRef<'_, T>, u_f: MatRef<'_, T>) -> Result<SimWeights<T>> {
    let pi = RowComplement::new(u_f)?;
    sim_weights_with(variant, y_f, &pi)
}

fn sim_weights_with<T: Real>(variant: SimVariant, y_f: MatRef<'_, T>, pi: &RowComplement<T>) -> Result<SimWeights<T>> {
    let mut w = SimWeights {
        variant,
        w1: None,
        w1_inv: None,
        w2: None,
        cva_pseudo_sqrt: false,
        cva_rank: None,
    };
    match variant {
        SimVariant::N4sid => {}
        SimVariant::Moesp => w.w2 = Some(pi.clone()),
        SimVariant::Cva => {
            w.w2 = Some(pi.clone());
            // S = (1/m)(Y_fΠ)(Y_fΠ)ᵀ, factored through the SVD of Y_fΠ so the
            // rank cutoff acts on singular values rather than their squares
            let y_pi = pi.apply(y_f)?;
            let svd = y_pi.thin_svd().map_err(|_| Error::NoConvergence("SVD"))?;
            let sig: Vec<T> = svd.S().column_vector().iter().copied().collect();
            let smax = sig.first().copied().unwrap_or(T::zero());
            let tol = T::of_usize(y_pi.nrows().max(y_pi.ncols())) * T::epsilon() * smax;
            let root_m = T::of_usize(y_f.ncols()).sqrt();
            let keep: Vec<bool> = sig.iter().map(|&x| x > tol).collect();
            let rank = keep.iter().filter(|&&k| k).count();
            if rank == 0 {
                return Err(Error::NotExciting(
                    "future outputs vanish after removing the future inputs".into(),
                ));
            }
            let v = svd.U();
            let inv_sqrt: Vec<T> = sig
                .iter()
                .zip(&keep)
                .map(|(&x, &k)| if k { root_m / x } else { T::zero() })
                .collect();
            let sqrt: Vec<T> = sig
                .iter()
                .zip(&keep)
                .map(|(&x, &k)| if k { x / root_m } else { T::zero() })
                .collect();
            w.w1 = Some(&scale_cols(v, &inv_sqrt) * v.transpose());
            w.w1_inv = Some(&scale_cols(v, &sqrt) * v.transpose());
            w.cva_pseudo_sqrt = rank < y_f.nrows();
            w.cva_rank = Some(rank);
        }
    }
    Ok(w)
}

/// Least-squares solution of `[X_{k+1}; Y_k] = [A B; C D] [X_k; U_k]`.
#[derive(Clone, Debug)]
pub struct Recovery<T> {
    pub a: Mat<T>,
    pub b: Mat<T>,
    pub c: Mat<T>,
    pub d: Mat<T>,
    pub residual: T,
    pub regressor_rank: usize,
    pub regressor_condition: f64,
    /// `[X_k; U_k]` lacks full row rank, so the minimum-norm solution was taken.
    pub underdetermined: bool,
}

pub fn recover_state_matrices<T: Real>(
    x_k: MatRef<'_, T>,
    x_k1: MatRef<'_, T>,
    u_k: MatRef<'_, T>,
    y_k: MatRef<'_, T>,
) -> Result<Recovery<T>> {
    let m = x_k.ncols();
    for (blk, name) in [(x_k1, "X_{k+1}"), (u_k, "U_k"), (y_k, "Y_k")] {
        if blk.ncols() != m {
            return Err(Error::dim(format!("columns of X_k vs {name}"), m, blk.ncols()));
        }
    }
    if x_k1.nrows() != x_k.nrows() {
        return Err(Error::dim("rows of X_k vs X_{k+1}", x_k.nrows(), x_k1.nrows()));
    }
    let n = x_k.nrows();
    let n_u = u_k.nrows();
    let reg = vstack(&[x_k, u_k]);
    let lhs = vstack(&[x_k1, y_k]);
    let pinv = PseudoInverse::new(reg.as_ref())?;
    let theta = pinv.apply_right(lhs.as_ref())?;
    let residual = frobenius((&lhs - &theta * &reg).as_ref());
    let ny = y_k.nrows();
    Ok(Recovery {
        a: theta.submatrix(0, 0, n, n).to_owned(),
        b: theta.submatrix(0, n, n, n_u).to_owned(),
        c: theta.submatrix(n, 0, ny, n).to_owned(),
        d: theta.submatrix(n, n, ny, n_u).to_owned(),
        residual,
        regressor_rank: pinv.rank,
        regressor_condition: pinv.condition(),
        underdetermined: !pinv.is_full_row_rank(),
    })
}

/// Everything in the pipeline up to the order choice, so the spectrum can be
/// inspected before committing to `n_r`.
#[derive(Clone, Debug)]
pub struct SimProblem<T> {
    pub variant: SimVariant,
    pub block_rows: usize,
    pub columns: usize,
    o_k: Mat<T>,
    o_k1: Mat<T>,
    weights: SimWeights<T>,
    u_svd: Mat<T>,
    sv: Vec<T>,
    u_k: Mat<T>,
    y_k: Mat<T>,
    n_y: usize,
    dt: T,
    diagnostics: Diagnostics,
}

/// Steps 1 and 2 plus the SVD, for block rows `k` and the largest `m` the
/// data allows (`m = N − 2k + 1`).
pub fn prepare_sim<T: Real>(
    u: &SignalSequence<T>,
    y: &SignalSequence<T>,
    k: usize,
    variant: SimVariant,
) -> Result<SimProblem<T>> {
    if u.len() != y.len() {
        return Err(Error::dim("input length vs output length", u.len(), y.len()));
    }
    if k < 2 {
        return Err(Error::arg("subspace identification needs at least 2 block rows"));
    }
    let n = u.len();
    if n < 2 * k {
        return Err(Error::short("subspace identification", 2 * k, n));
    }
    let m = n - 2 * k + 1;
    if u.peak() == T::zero() {
        return Err(Error::NotExciting("input is identically zero".into()));
    }
    let mut diag = Diagnostics::default();

    let u_p = block_hankel(u, 0, k, m)?;
    let y_p = block_hankel(y, 0, k, m)?;
    let u_f = block_hankel(u, k, k, m)?;
    let y_f = block_hankel(y, k, k, m)?;
    let w_p = vstack(&[u_p.as_ref(), y_p.as_ref()]);
    let pi = RowComplement::new(u_f.as_ref())?;
    let ob = oblique_projection_with(y_f.as_ref(), &pi, w_p.as_ref())?;
    diag.rank("future_inputs", pi.rank);
    diag.cond("future_inputs", pi.condition);
    diag.rank("past_data", ob.past_data_rank);
    diag.cond("past_data", ob.past_data_condition);
    if pi.rank < u_f.nrows() {
        diag.flag("future inputs rank deficient");
    }

    // one step later: k + 1 past block rows, k − 1 future ones
    let u_p1 = block_hankel(u, 0, k + 1, m)?;
    let y_p1 = block_hankel(y, 0, k + 1, m)?;
    let u_f1 = block_hankel(u, k + 1, k - 1, m)?;
    let y_f1 = block_hankel(y, k + 1, k - 1, m)?;
    let w_p1 = vstack(&[u_p1.as_ref(), y_p1.as_ref()]);
    let pi1 = RowComplement::new(u_f1.as_ref())?;
    let ob1 = oblique_projection_with(y_f1.as_ref(), &pi1, w_p1.as_ref())?;
    diag.rank("past_data_shifted", ob1.past_data_rank);
    diag.cond("past_data_shifted", ob1.past_data_condition);

    let weights = sim_weights_with(variant, y_f.as_ref(), &pi)?;
    if weights.cva_pseudo_sqrt {
        diag.flag("cva weight used a pseudo square root (singular output covariance)");
        diag.rank("cva_weight", weights.cva_rank.unwrap_or(0));
    }
    let weighted = weights.apply(ob.projection.as_ref())?;
    let svd = weighted.thin_svd().map_err(|_| Error::NoConvergence("SVD"))?;
    let sv: Vec<T> = svd.S().column_vector().iter().copied().collect();
    if sv.first().is_none_or(|s| *s == T::zero()) {
        return Err(Error::NotExciting(
            "oblique projection is zero; outputs carry no input response".into(),
        ));
    }
    Ok(SimProblem {
        variant,
        block_rows: k,
        columns: m,
        o_k: ob.projection,
        o_k1: ob1.projection,
        weights,
        u_svd: svd.U().to_owned(),
        sv,
        u_k: u.data().subcols(k, m).to_owned(),
        y_k: y.data().subcols(k, m).to_owned(),
        n_y: y.n_channels(),
        dt: u.dt(),
        diagnostics: diag,
    })
}

impl<T: Real> SimProblem<T> {
    /// Singular values of `W_1 O_k W_2`.
    pub fn singular_values(&self) -> &[T] {
        &self.sv
    }

    pub fn weights(&self) -> &SimWeights<T> {
        &self.weights
    }

    pub fn oblique_projection(&self) -> MatRef<'_, T> {
        self.o_k.as_ref()
    }

    /// Steps 3 and 4 at order `n_r`.
    pub fn realize(&self, n_r: usize) -> Result<IdentifiedModel<T>> {
        let k = self.block_rows;
        let smax = self.sv[0];
        let tol = T::of_usize(self.o_k.nrows().max(self.o_k.ncols())) * T::epsilon() * smax;
        let available = self.sv.iter().take_while(|&&s| s > tol).count();
        if n_r == 0 || n_r > k * self.n_y || n_r > available {
            return Err(Error::arg(format!(
                "order {n_r} exceeds the {available} nonzero singular values (k·n_y = {})",
                k * self.n_y
            )));
        }
        let mut diag = self.diagnostics.clone();
        let half: Vec<T> = self.sv[..n_r].iter().map(|s| s.sqrt()).collect();
        let ur = self.u_svd.subcols(0, n_r);
        let gamma = self.weights.unweight(scale_cols(ur, &half).as_ref());
        let discarded = self.sv[n_r..].iter().fold(T::zero(), |a, &s| a + s * s).sqrt();
        diag.residual("truncation", discarded.to_f64_lossy());

        let g_pinv = PseudoInverse::new(gamma.as_ref())?;
        let x_k = g_pinv.solve(self.o_k.as_ref())?;
        let top = gamma.subrows(0, (k - 1) * self.n_y);
        let top_pinv = PseudoInverse::new(top)?;
        let x_k1 = top_pinv.solve(self.o_k1.as_ref())?;
        diag.cond("observability", g_pinv.condition());
        diag.cond("observability_shifted", top_pinv.condition());
        if !top_pinv.is_full_column_rank() {
            diag.flag("shifted observability matrix rank deficient");
        }

        let rec = recover_state_matrices(x_k.as_ref(), x_k1.as_ref(), self.u_k.as_ref(), self.y_k.as_ref())?;
        diag.residual("least_squares", rec.residual.to_f64_lossy());
        diag.rank("state_regressor", rec.regressor_rank);
        diag.cond("state_regressor", rec.regressor_condition);
        if rec.underdetermined {
            diag.flag("state regressor rank deficient; minimum-norm solution");
        }
        let model = StateSpaceModel::new(rec.a, rec.b, rec.c, rec.d, self.dt)?;
        finish(model, self.sv.clone(), self.variant.into(), diag)
    }
}

/// Runs the whole procedure. `k` is the number of block rows.
pub fn identify_sim<T: Real>(
    u: &SignalSequence<T>,
    y: &SignalSequence<T>,
    k: usize,
    n_r: usize,
    variant: SimVariant,
) -> Result<IdentifiedModel<T>> {
    if n_r > k * y.n_channels() {
        return Err(Error::arg(format!(
            "order {n_r} exceeds k·n_y = {}",
            k * y.n_channels()
        )));
    }
    prepare_sim(u, y, k, variant)?.realize(n_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{gen_random, SignalKind};

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("foo".parse::<Method>().is_err());
    }

    #[test]
    fn default_block_rows_rounds_up() {
        assert_eq!(default_block_rows(15, 2), 15);
        assert_eq!(default_block_rows(5, 3), 4);
        assert_eq!(default_block_rows(1, 3), 2);
    }

    #[test]
    fn zero_input_is_not_exciting() {
        let u = SignalSequence::new(Mat::<f64>::zeros(1, 50), 1.0, SignalKind::Input).unwrap();
        let y = gen_random::<f64>(1, 50, (0.0, 1.0), 1, 1.0)
            .unwrap()
            .with_kind(SignalKind::Output);
        let e = identify_sim(&u, &y, 5, 1, SimVariant::N4sid).unwrap_err();
        assert!(matches!(e, Error::NotExciting(_)), "{e}");
    }

    #[test]
    fn single_column_recovery_is_minimum_norm() {
        let x = Mat::from_fn(1, 1, |_, _| 2.0f64);
        let x1 = Mat::from_fn(1, 1, |_, _| 1.0);
        let u = Mat::from_fn(1, 1, |_, _| 1.0);
        let y = Mat::from_fn(1, 1, |_, _| 3.0);
        let r = recover_state_matrices(x.as_ref(), x1.as_ref(), u.as_ref(), y.as_ref()).unwrap();
        assert!(r.underdetermined);
        assert!(r.residual < 1e-14);
        // minimum norm: [a b] = [1] [2 1]^T / 5
        assert!((r.a[(0, 0)] - 0.4).abs() < 1e-14 && (r.b[(0, 0)] - 0.2).abs() < 1e-14);
    }
}
