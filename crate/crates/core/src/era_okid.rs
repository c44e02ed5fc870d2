//! Eigensystem realization from Markov parameters, and OKID estimation of
//! those parameters from general input-output records.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti_model::StateSpaceModel;
use crate::numerics::{frobenius, scale_cols, scale_rows, PseudoInverse};
use crate::scalar::Real;
use crate::signals::{okid_input_matrix, MarkovSequence, SignalSequence};
use crate::subspace_id::{finish, Diagnostics, IdentifiedModel, Method};

/// Hankel shape and target order. The Hankel matrix has `m_o + 1` block rows
/// and `m_c + 1` block columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EraConfig {
    pub m_o: usize,
    pub m_c: usize,
    pub n_r: usize,
}

impl EraConfig {
    pub fn new(m_o: usize, m_c: usize, n_r: usize) -> Result<Self> {
        if m_o == 0 || m_c == 0 || n_r == 0 {
            return Err(Error::arg("m_o, m_c and n_r must all be at least 1"));
        }
        Ok(Self { m_o, m_c, n_r })
    }

    /// Markov parameters (including `h(0)`) consumed by this shape.
    pub fn markov_needed(&self) -> usize {
        self.m_o + self.m_c + 3
    }

    /// Uses all `h_len` parameters, splitting them so that the Hankel matrix
    /// is as close to square as possible in scalar rows and columns.
    pub fn near_square(h_len: usize, n_y: usize, n_u: usize, n_r: usize) -> Result<Self> {
        if h_len < 5 {
            return Err(Error::short("ERA Markov parameters", 5, h_len));
        }
        let span = h_len - 1;
        let rows = ((span * n_u) as f64 / (n_u + n_y) as f64).round() as usize;
        let rows = rows.clamp(2, span - 2);
        Self::new(rows - 1, span - rows - 1, n_r)
    }
}

fn block_hankel_markov<T: Real>(h: &MarkovSequence<T>, rows: usize, cols: usize, shift: usize) -> Mat<T> {
    let (ny, nu) = (h.n_y(), h.n_u());
    Mat::from_fn(rows * ny, cols * nu, |r, c| {
        h.get(r / ny + c / nu + shift)[(r % ny, c % nu)]
    })
}

/// The Hankel SVD, computed once so that several orders can be realized.
#[derive(Clone, Debug)]
pub struct EraProblem<T> {
    pub m_o: usize,
    pub m_c: usize,
    u: Mat<T>,
    sv: Vec<T>,
    v: Mat<T>,
    h_shift: Mat<T>,
    d: Mat<T>,
    dt: T,
    n_y: usize,
    n_u: usize,
}

pub fn prepare_era<T: Real>(h: &MarkovSequence<T>, m_o: usize, m_c: usize) -> Result<EraProblem<T>> {
    let need = m_o + m_c + 3;
    if h.len() < need {
        return Err(Error::short("ERA Markov parameters", need, h.len()));
    }
    let hm = block_hankel_markov(h, m_o + 1, m_c + 1, 1);
    let svd = hm.thin_svd().map_err(|_| Error::NoConvergence("SVD"))?;
    let sv: Vec<T> = svd.S().column_vector().iter().copied().collect();
    if sv[0] == T::zero() {
        return Err(Error::ZeroHankel);
    }
    Ok(EraProblem {
        m_o,
        m_c,
        u: svd.U().to_owned(),
        sv,
        v: svd.V().to_owned(),
        h_shift: block_hankel_markov(h, m_o + 1, m_c + 1, 2),
        d: h.get(0).to_owned(),
        dt: h.dt(),
        n_y: h.n_y(),
        n_u: h.n_u(),
    })
}

impl<T: Real> EraProblem<T> {
    /// Singular values of the Hankel matrix `H_m`.
    pub fn singular_values(&self) -> &[T] {
        &self.sv
    }

    /// Numerical rank of `H_m`.
    pub fn rank(&self) -> usize {
        let tol = T::of_usize(self.u.nrows().max(self.v.nrows())) * T::epsilon() * self.sv[0];
        self.sv.iter().take_while(|&&s| s > tol).count()
    }

    pub fn realize(&self, n_r: usize) -> Result<IdentifiedModel<T>> {
        let max = self.sv.len();
        if n_r == 0 || n_r > max {
            return Err(Error::arg(format!("ERA order {n_r} outside 1..={max}")));
        }
        let rank = self.rank();
        if n_r > rank {
            return Err(Error::RankDeficient(format!(
                "Hankel matrix has numerical rank {rank} < requested order {n_r}"
            )));
        }
        let sr = &self.sv[..n_r];
        let half: Vec<T> = sr.iter().map(|s| s.sqrt()).collect();
        let inv_half: Vec<T> = half.iter().map(|s| s.recip()).collect();
        let ur = self.u.subcols(0, n_r);
        let vr = self.v.subcols(0, n_r);

        let core = &(ur.transpose() * &self.h_shift) * vr;
        let a = scale_cols(scale_rows(core.as_ref(), &inv_half).as_ref(), &inv_half);
        let ctrb = scale_rows(vr.transpose(), &half);
        let b = ctrb.subcols(0, self.n_u).to_owned();
        let obsv = scale_cols(ur, &half);
        let c = obsv.subrows(0, self.n_y).to_owned();

        let mut diag = Diagnostics::default();
        diag.rank("hankel", rank);
        diag.cond("hankel", (self.sv[0] / sr[n_r - 1]).to_f64_lossy());
        let discarded = self.sv[n_r..].iter().fold(T::zero(), |a, &s| a + s * s).sqrt();
        diag.residual("truncation", discarded.to_f64_lossy());
        let model = StateSpaceModel::new(a, b, c, self.d.clone(), self.dt)?;
        finish(model, self.sv.clone(), Method::Era, diag)
    }
}

pub fn era<T: Real>(h: &MarkovSequence<T>, cfg: &EraConfig) -> Result<IdentifiedModel<T>> {
    prepare_era(h, cfg.m_o, cfg.m_c)?.realize(cfg.n_r)
}

/// Default Markov horizon: as many parameters as the record determines.
pub fn default_markov_horizon(len: usize, n_u: usize) -> usize {
    (len / n_u.max(1)).saturating_sub(1)
}

/// Markov parameters `h(0..=m)` solving `y = [h(0) … h(m)] U` in the least
/// squares sense, where `U` is the block Toeplitz input matrix over the whole
/// record. With `len = m + 1` this is the square triangular system.
pub fn okid_markov<T: Real>(u: &SignalSequence<T>, y: &SignalSequence<T>, m: usize) -> Result<MarkovSequence<T>> {
    Ok(okid_markov_diag(u, y, m)?.0)
}

pub(crate) fn okid_markov_diag<T: Real>(
    u: &SignalSequence<T>,
    y: &SignalSequence<T>,
    m: usize,
) -> Result<(MarkovSequence<T>, Diagnostics)> {
    if u.len() != y.len() {
        return Err(Error::dim("input length vs output length", u.len(), y.len()));
    }
    let (len, nu, ny) = (u.len(), u.n_channels(), y.n_channels());
    let rows = (m + 1) * nu;
    if len < m + 1 || len < rows {
        return Err(Error::short("OKID", rows.max(m + 1), len));
    }
    let big_u = okid_input_matrix(u, m, len)?;
    let pinv = PseudoInverse::new(big_u.as_ref())?;
    if pinv.rank < rows {
        return Err(Error::RankDeficient(format!(
            "OKID input matrix has rank {} < {rows}; use a richer or longer input, or a shorter Markov horizon",
            pinv.rank
        )));
    }
    let y_m = pinv.apply_right(y.data())?;
    let fit = frobenius((y.data() - &y_m * &big_u).as_ref());
    let params = (0..=m).map(|k| y_m.submatrix(0, k * nu, ny, nu).to_owned()).collect();
    let mut diag = Diagnostics::default();
    diag.rank("okid_input", pinv.rank);
    diag.cond("okid_input", pinv.condition());
    diag.residual("okid_fit", fit.to_f64_lossy());
    Ok((MarkovSequence::new(params)?.with_dt(u.dt()), diag))
}

/// OKID followed by ERA.
pub fn okid_era<T: Real>(
    u: &SignalSequence<T>,
    y: &SignalSequence<T>,
    cfg: &EraConfig,
    m: usize,
) -> Result<IdentifiedModel<T>> {
    let (h, okid_diag) = okid_markov_diag(u, y, m)?;
    let mut id = era(&h, cfg)?;
    id.method = Method::OkidEra;
    let era_diag = std::mem::take(&mut id.diagnostics);
    let mut diag = Diagnostics {
        spectral_radius: era_diag.spectral_radius,
        stable: era_diag.stable,
        ..Diagnostics::default()
    };
    diag.merge("", okid_diag);
    diag.merge("", era_diag);
    id.diagnostics = diag;
    Ok(id)
}

/// Exact Markov parameters from per-channel impulse experiments:
/// `outputs[j]` is the response to `amplitude` at input `j`, step 0.
pub fn markov_from_impulses<T: Real>(outputs: &[SignalSequence<T>], amplitude: T) -> Result<MarkovSequence<T>> {
    let first = outputs.first().ok_or_else(|| Error::arg("no impulse experiments"))?;
    if amplitude == T::zero() {
        return Err(Error::arg("impulse amplitude must be nonzero"));
    }
    let (len, ny) = (first.len(), first.n_channels());
    for y in outputs {
        if y.len() != len {
            return Err(Error::dim("impulse experiment lengths", len, y.len()));
        }
        if y.n_channels() != ny {
            return Err(Error::dim("impulse experiment channels", ny, y.n_channels()));
        }
    }
    let params = (0..len)
        .map(|k| Mat::from_fn(ny, outputs.len(), |i, j| outputs[j].at(i, k) / amplitude))
        .collect();
    Ok(MarkovSequence::new(params)?.with_dt(first.dt()))
}

/// ERA's balanced realization makes these sums approach `diag(Σ_r)`; exposed
/// for checks: `Σ_{k<len} (A^k B)(A^k B)ᵀ` and `Σ_{k<len} (C A^k)ᵀ(C A^k)`.
pub fn finite_gramians<T: Real>(model: &StateSpaceModel<T>, len: usize) -> (Mat<T>, Mat<T>) {
    let n = model.n_x();
    let mut wc = Mat::zeros(n, n);
    let mut wo = Mat::zeros(n, n);
    let mut akb = model.b().to_owned();
    let mut cak = model.c().to_owned();
    for _ in 0..len {
        wc += &akb * akb.transpose();
        wo += cak.transpose() * &cak;
        akb = model.a() * &akb;
        cak = &cak * model.a();
    }
    (wc, wo)
}

#[doc(hidden)]
pub fn hankel_of<T: Real>(h: &MarkovSequence<T>, m_o: usize, m_c: usize) -> Mat<T> {
    block_hankel_markov(h, m_o + 1, m_c + 1, 1)
}
