//! Discrete-time LTI state-space models: simulation, impulse response, poles,
//! series connection and output-error metrics.

use faer::{Mat, MatRef};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, check_finite};
use crate::scalar::Real;
use crate::signals::{MarkovSequence, SignalKind, SignalSequence};

/// `x(k+1) = A x(k) + B u(k)`, `y(k) = C x(k) + D u(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel<T> {
    a: Mat<T>,
    b: Mat<T>,
    c: Mat<T>,
    d: Mat<T>,
    dt: T,
}

impl<T: Real> StateSpaceModel<T> {
    pub fn new(a: Mat<T>, b: Mat<T>, c: Mat<T>, d: Mat<T>, dt: T) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::arg("state dimension must be at least 1"));
        }
        if a.ncols() != n {
            return Err(Error::dim("rows(A) vs cols(A)", n, a.ncols()));
        }
        if b.nrows() != n {
            return Err(Error::dim("rows(A) vs rows(B)", n, b.nrows()));
        }
        if c.ncols() != n {
            return Err(Error::dim("rows(A) vs cols(C)", n, c.ncols()));
        }
        if b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::arg("models need at least one input and one output"));
        }
        if d.nrows() != c.nrows() {
            return Err(Error::dim("rows(C) vs rows(D)", c.nrows(), d.nrows()));
        }
        if d.ncols() != b.ncols() {
            return Err(Error::dim("cols(B) vs cols(D)", b.ncols(), d.ncols()));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            check_finite(m.as_ref(), name)?;
        }
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(Error::arg("model time step must be positive"));
        }
        Ok(Self { a, b, c, d, dt })
    }

    pub fn a(&self) -> MatRef<'_, T> {
        self.a.as_ref()
    }
    pub fn b(&self) -> MatRef<'_, T> {
        self.b.as_ref()
    }
    pub fn c(&self) -> MatRef<'_, T> {
        self.c.as_ref()
    }
    pub fn d(&self) -> MatRef<'_, T> {
        self.d.as_ref()
    }
    pub fn dt(&self) -> T {
        self.dt
    }
    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    pub fn to_document(&self) -> ModelDocument {
        let rows = |m: &Mat<T>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)].to_f64_lossy()).collect())
                .collect()
        };
        ModelDocument {
            n_x: self.n_x(),
            n_u: self.n_u(),
            n_y: self.n_y(),
            dt: self.dt.to_f64_lossy(),
            a: rows(&self.a),
            b: rows(&self.b),
            c: rows(&self.c),
            d: rows(&self.d),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let mat = |rows: &[Vec<f64>], r: usize, c: usize, name: &str| -> Result<Mat<T>> {
            if rows.len() != r {
                return Err(Error::dim(format!("{name} rows"), r, rows.len()));
            }
            if let Some(bad) = rows.iter().find(|row| row.len() != c) {
                return Err(Error::dim(format!("{name} cols"), c, bad.len()));
            }
            Ok(Mat::from_fn(r, c, |i, j| T::of(rows[i][j])))
        };
        Self::new(
            mat(&doc.a, doc.n_x, doc.n_x, "A")?,
            mat(&doc.b, doc.n_x, doc.n_u, "B")?,
            mat(&doc.c, doc.n_y, doc.n_x, "C")?,
            mat(&doc.d, doc.n_y, doc.n_u, "D")?,
            T::of(doc.dt),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }
}

/// Serialized model: row-major arrays of arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub struct ModelDocument {
    #[serde(rename = "n_x")]
    pub n_x: usize,
    #[serde(rename = "n_u")]
    pub n_u: usize,
    #[serde(rename = "n_y")]
    pub n_y: usize,
    #[serde(rename = "dt")]
    pub dt: f64,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

/// Row-compressed copy of a dense matrix, so that simulating the large
/// (mostly shift-register) network plants costs O(nnz) per step.
struct SparseRows<T> {
    start: Vec<usize>,
    col: Vec<usize>,
    val: Vec<T>,
}

impl<T: Real> SparseRows<T> {
    fn new(m: MatRef<'_, T>) -> Self {
        let mut start = Vec::with_capacity(m.nrows() + 1);
        let (mut col, mut val) = (Vec::new(), Vec::new());
        start.push(0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != T::zero() {
                    col.push(j);
                    val.push(v);
                }
            }
            start.push(col.len());
        }
        Self { start, col, val }
    }

    /// `out = M x` (or `out += M x` when `accumulate`).
    fn apply(&self, x: &[T], out: &mut [T], accumulate: bool) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = if accumulate { *o } else { T::zero() };
            for p in self.start[i]..self.start[i + 1] {
                acc += self.val[p] * x[self.col[p]];
            }
            *o = acc;
        }
    }
}

/// Result of a simulation that stops once outputs blow up.
#[derive(Clone, Debug)]
pub struct GuardedSimulation<T> {
    /// Outputs up to (not including) the first sample exceeding the limit.
    pub output: SignalSequence<T>,
    /// Step at which the limit was first exceeded.
    pub diverged_at: Option<usize>,
}

fn check_sim_args<T: Real>(model: &StateSpaceModel<T>, u: &SignalSequence<T>, x0: &[T]) -> Result<()> {
    if u.kind() != SignalKind::Input {
        return Err(Error::arg("simulate expects an input signal"));
    }
    if u.n_channels() != model.n_u() {
        return Err(Error::dim("n_u vs input channels", model.n_u(), u.n_channels()));
    }
    if x0.len() != model.n_x() {
        return Err(Error::dim("n_x vs length(x0)", model.n_x(), x0.len()));
    }
    Ok(())
}

fn run<T: Real>(model: &StateSpaceModel<T>, u: &SignalSequence<T>, x0: &[T], limit: Option<T>) -> (Mat<T>, usize) {
    let (a, b) = (SparseRows::new(model.a()), SparseRows::new(model.b()));
    let (c, d) = (SparseRows::new(model.c()), SparseRows::new(model.d()));
    let m = u.len();
    let mut y = Mat::zeros(model.n_y(), m);
    let mut x = x0.to_vec();
    let mut xn = vec![T::zero(); model.n_x()];
    let mut uk = vec![T::zero(); model.n_u()];
    let mut yk = vec![T::zero(); model.n_y()];
    for k in 0..m {
        for (i, v) in uk.iter_mut().enumerate() {
            *v = u.at(i, k);
        }
        c.apply(&x, &mut yk, false);
        d.apply(&uk, &mut yk, true);
        if let Some(lim) = limit {
            if yk.iter().any(|v| v.is_nan() || v.abs() > lim) {
                return (y.subcols(0, k).to_owned(), k);
            }
        }
        for (i, v) in yk.iter().enumerate() {
            y[(i, k)] = *v;
        }
        a.apply(&x, &mut xn, false);
        b.apply(&uk, &mut xn, true);
        std::mem::swap(&mut x, &mut xn);
    }
    (y, m)
}

/// Output of `model` driven by `u` from state `x0`.
pub fn simulate<T: Real>(model: &StateSpaceModel<T>, u: &SignalSequence<T>, x0: &[T]) -> Result<SignalSequence<T>> {
    check_sim_args(model, u, x0)?;
    let (y, _) = run(model, u, x0, None);
    SignalSequence::new(y, u.dt(), SignalKind::Output)
}

/// Like [`simulate`], but stops at the first output sample with magnitude
/// above `limit` (or non-finite) and reports where.
pub fn simulate_guarded<T: Real>(
    model: &StateSpaceModel<T>,
    u: &SignalSequence<T>,
    x0: &[T],
    limit: T,
) -> Result<GuardedSimulation<T>> {
    check_sim_args(model, u, x0)?;
    let (mut y, done) = run(model, u, x0, Some(limit));
    let diverged_at = (done < u.len()).then_some(done);
    if y.ncols() == 0 {
        // keep at least one sample so the result is a valid signal
        y = Mat::zeros(model.n_y(), 1);
    }
    Ok(GuardedSimulation {
        output: SignalSequence::new(y, u.dt(), SignalKind::Output)?,
        diverged_at,
    })
}

/// `{D, CB, CAB, ..., CA^{m−1}B}`.
pub fn impulse_response<T: Real>(model: &StateSpaceModel<T>, m: usize) -> MarkovSequence<T> {
    let a = SparseRows::new(model.a());
    let mut params = Vec::with_capacity(m + 1);
    params.push(model.d.clone());
    let n = model.n_x();
    let mut ak_b: Vec<Vec<T>> = (0..model.n_u())
        .map(|j| (0..n).map(|i| model.b[(i, j)]).collect())
        .collect();
    let mut next = vec![T::zero(); n];
    for _ in 0..m {
        let h = Mat::from_fn(model.n_y(), model.n_u(), |i, j| {
            let mut acc = T::zero();
            for (p, v) in ak_b[j].iter().enumerate() {
                acc += model.c[(i, p)] * *v;
            }
            acc
        });
        params.push(h);
        for col in ak_b.iter_mut() {
            a.apply(col, &mut next, false);
            col.copy_from_slice(&next);
        }
    }
    MarkovSequence::new(params)
        .expect("finite model gives finite Markov parameters")
        .with_dt(model.dt)
}

/// Eigenvalues of `A` sorted by modulus (descending), then phase (ascending).
pub fn poles<T: Real>(model: &StateSpaceModel<T>) -> Result<Vec<Complex<T>>> {
    let mut p = numerics::eigenvalues(model.a())?;
    p.sort_by(|x, y| {
        y.norm()
            .partial_cmp(&x.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.arg().partial_cmp(&y.arg()).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(p)
}

pub fn spectral_radius<T: Real>(model: &StateSpaceModel<T>) -> Result<T> {
    Ok(numerics::eigenvalues(model.a())?
        .iter()
        .fold(T::zero(), |r, z| r.max(z.norm())))
}

/// Strict: a pole of modulus exactly 1 is not stable.
pub fn is_stable<T: Real>(model: &StateSpaceModel<T>) -> Result<bool> {
    Ok(spectral_radius(model)? < T::one())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleReport {
    /// `[re, im]` pairs in [`poles`] order.
    pub poles: Vec<[f64; 2]>,
    pub spectral_radius: f64,
    pub inside_unit_circle: usize,
    pub on_or_outside_unit_circle: usize,
    pub near_origin: usize,
}

/// Poles with unit-circle counts. `near_origin` counts poles of modulus below 0.05.
pub fn pole_zero_report<T: Real>(model: &StateSpaceModel<T>) -> Result<PoleReport> {
    let p = poles(model)?;
    let inside = p.iter().filter(|z| z.norm() < T::one()).count();
    Ok(PoleReport {
        spectral_radius: p.first().map_or(0.0, |z| z.norm().to_f64_lossy()),
        inside_unit_circle: inside,
        on_or_outside_unit_circle: p.len() - inside,
        near_origin: p.iter().filter(|z| z.norm() < T::of(0.05)).count(),
        poles: p.iter().map(|z| [z.re.to_f64_lossy(), z.im.to_f64_lossy()]).collect(),
    })
}

/// Series connection: the outputs of `first` drive the inputs of `second`.
pub fn cascade<T: Real>(first: &StateSpaceModel<T>, second: &StateSpaceModel<T>) -> Result<StateSpaceModel<T>> {
    if first.n_y() != second.n_u() {
        return Err(Error::dim("first n_y vs second n_u", first.n_y(), second.n_u()));
    }
    if first.dt != second.dt {
        return Err(Error::arg("cascaded models must share dt"));
    }
    let (n1, n2) = (first.n_x(), second.n_x());
    let b2c1 = &second.b * &first.c;
    let a = Mat::from_fn(n1 + n2, n1 + n2, |i, j| match (i < n1, j < n1) {
        (true, true) => first.a[(i, j)],
        (true, false) => T::zero(),
        (false, true) => b2c1[(i - n1, j)],
        (false, false) => second.a[(i - n1, j - n1)],
    });
    let b2d1 = &second.b * &first.d;
    let b = Mat::from_fn(n1 + n2, first.n_u(), |i, j| {
        if i < n1 {
            first.b[(i, j)]
        } else {
            b2d1[(i - n1, j)]
        }
    });
    let d2c1 = &second.d * &first.c;
    let c = Mat::from_fn(second.n_y(), n1 + n2, |i, j| {
        if j < n1 {
            d2c1[(i, j)]
        } else {
            second.c[(i, j - n1)]
        }
    });
    let d = &second.d * &first.d;
    StateSpaceModel::new(a, b, c, d, first.dt)
}

fn check_same_shape<T: Real>(y: &SignalSequence<T>, y_hat: &SignalSequence<T>) -> Result<()> {
    if y.n_channels() != y_hat.n_channels() {
        return Err(Error::dim("rmse channels", y.n_channels(), y_hat.n_channels()));
    }
    if y.len() != y_hat.len() {
        return Err(Error::dim("rmse samples", y.len(), y_hat.len()));
    }
    Ok(())
}

/// `sqrt((1/m) Σ_k ‖y(k) − ŷ(k)‖²)`.
pub fn rmse<T: Real>(y_true: &SignalSequence<T>, y_hat: &SignalSequence<T>) -> Result<T> {
    check_same_shape(y_true, y_hat)?;
    let mut acc = T::zero();
    for k in 0..y_true.len() {
        for i in 0..y_true.n_channels() {
            let e = y_true.at(i, k) - y_hat.at(i, k);
            acc += e * e;
        }
    }
    Ok((acc / T::of_usize(y_true.len())).sqrt())
}

/// The same measure restricted to each channel.
pub fn rmse_per_channel<T: Real>(y_true: &SignalSequence<T>, y_hat: &SignalSequence<T>) -> Result<Vec<T>> {
    check_same_shape(y_true, y_hat)?;
    let m = T::of_usize(y_true.len());
    Ok((0..y_true.n_channels())
        .map(|i| {
            let mut acc = T::zero();
            for k in 0..y_true.len() {
                let e = y_true.at(i, k) - y_hat.at(i, k);
                acc += e * e;
            }
            (acc / m).sqrt()
        })
        .collect())
}
