//! Multichannel signals, test-signal generators, and the data matrices that
//! identification starts from (block Hankel and block Toeplitz).

use std::io::{Read, Write};

use faer::{Mat, MatRef};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::check_finite;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Input,
    Output,
    State,
}

/// `n_channels × m` samples at a fixed step `dt` (seconds).
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSequence<T> {
    data: Mat<T>,
    dt: T,
    kind: SignalKind,
}

impl<T: Real> SignalSequence<T> {
    pub fn new(data: Mat<T>, dt: T, kind: SignalKind) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::arg("signal must have at least one sample"));
        }
        if data.nrows() == 0 {
            return Err(Error::arg("signal must have at least one channel"));
        }
        check_finite(data.as_ref(), "signal")?;
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(Error::arg("signal time step must be positive"));
        }
        Ok(Self { data, dt, kind })
    }

    /// Builds from per-channel rows.
    pub fn from_rows(rows: &[Vec<T>], dt: T, kind: SignalKind) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(Error::dim(
                format!("signal channel {i} length vs channel 0"),
                m,
                r.len(),
            ));
        }
        Self::new(Mat::from_fn(rows.len(), m, |i, j| rows[i][j]), dt, kind)
    }

    pub fn data(&self) -> MatRef<'_, T> {
        self.data.as_ref()
    }

    pub fn into_data(self) -> Mat<T> {
        self.data
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: SignalKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn at(&self, channel: usize, k: usize) -> T {
        self.data[(channel, k)]
    }

    pub fn channel(&self, channel: usize) -> Vec<T> {
        (0..self.len()).map(|k| self.data[(channel, k)]).collect()
    }

    /// Samples `[start, start + len)` of every channel.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.len() {
            return Err(Error::short("signal window", start + len.max(1), self.len()));
        }
        Ok(Self {
            data: self.data.subcols(start, len).to_owned(),
            ..*self
        })
    }

    /// Delays by `d` steps, zero-filling the front and keeping the length.
    pub fn delayed(&self, d: usize) -> Self {
        let m = self.len();
        let data = Mat::from_fn(self.n_channels(), m, |i, k| {
            if k >= d {
                self.data[(i, k - d)]
            } else {
                T::zero()
            }
        });
        Self { data, ..*self }
    }

    /// Maximum absolute sample.
    pub fn peak(&self) -> T {
        let mut p = T::zero();
        for k in 0..self.len() {
            for i in 0..self.n_channels() {
                p = p.max(self.data[(i, k)].abs());
            }
        }
        p
    }

    /// `sqrt((1/m) Σ_k ‖s(k)‖²)`.
    pub fn rms(&self) -> T {
        let mut acc = T::zero();
        for k in 0..self.len() {
            for i in 0..self.n_channels() {
                acc += self.data[(i, k)] * self.data[(i, k)];
            }
        }
        (acc / T::of_usize(self.len())).sqrt()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["step".to_string()];
        header.extend((0..self.n_channels()).map(|i| format!("ch{i}")));
        wr.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec = vec![k.to_string()];
            rec.extend((0..self.n_channels()).map(|i| format!("{}", self.data[(i, k)].to_f64_lossy())));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the `step,ch0,ch1,...` format. Rows must be in step order.
    pub fn read_csv<R: Read>(r: R, dt: T, kind: SignalKind) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let n_ch = rd.headers()?.len().saturating_sub(1);
        if n_ch == 0 {
            return Err(Error::arg("signal CSV needs a step column and at least one channel"));
        }
        let mut cols: Vec<Vec<T>> = Vec::new();
        for (k, rec) in rd.records().enumerate() {
            let rec = rec?;
            let step: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::arg(format!("bad step index on row {k}")))?;
            if step != k {
                return Err(Error::arg(format!("expected step {k}, found {step}")));
            }
            let mut sample = Vec::with_capacity(n_ch);
            for f in rec.iter().skip(1) {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::arg(format!("bad number {f:?} on row {k}")))?;
                sample.push(T::of(v));
            }
            if sample.len() != n_ch {
                return Err(Error::dim(format!("signal CSV row {k} fields"), n_ch, sample.len()));
            }
            cols.push(sample);
        }
        let data = Mat::from_fn(n_ch, cols.len(), |i, k| cols[k][i]);
        Self::new(data, dt, kind)
    }
}

/// Unit-impulse style input: `amplitude` at `(channel, 0)`.
pub fn gen_impulse<T: Real>(n_u: usize, m: usize, channel: usize, amplitude: T, dt: T) -> Result<SignalSequence<T>> {
    gen_rectangular(n_u, m, channel, amplitude, 0, 1, dt)
}

/// `amplitude` on steps `[start, start + width)` of one channel.
pub fn gen_rectangular<T: Real>(
    n_u: usize,
    m: usize,
    channel: usize,
    amplitude: T,
    start: usize,
    width: usize,
    dt: T,
) -> Result<SignalSequence<T>> {
    if channel >= n_u {
        return Err(Error::arg(format!("channel {channel} out of range for {n_u} inputs")));
    }
    if start + width > m {
        return Err(Error::arg(format!(
            "pulse window [{start}, {}) does not fit in {m} steps",
            start + width
        )));
    }
    let data = Mat::from_fn(n_u, m, |i, k| {
        if i == channel && k >= start && k < start + width {
            amplitude
        } else {
            T::zero()
        }
    });
    SignalSequence::new(data, dt, SignalKind::Input)
}

/// I.i.d. uniform samples on `[lo, hi]`, reproducible from `seed`.
pub fn gen_random<T: Real>(n_u: usize, m: usize, range: (f64, f64), seed: u64, dt: T) -> Result<SignalSequence<T>> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::arg(format!("empty amplitude range [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(lo, hi);
    let mut data = Mat::zeros(n_u, m);
    for k in 0..m {
        for i in 0..n_u {
            data[(i, k)] = T::of(dist.sample(&mut rng));
        }
    }
    SignalSequence::new(data, dt, SignalKind::Input)
}

/// `rows` block rows by `cols` columns; block row `r`, column `j` holds
/// `s(start + r + j)`.
pub fn block_hankel<T: Real>(s: &SignalSequence<T>, start: usize, rows: usize, cols: usize) -> Result<Mat<T>> {
    let need = start + rows + cols - 1;
    if rows > 0 && cols > 0 && need > s.len() {
        return Err(Error::short("block Hankel", need, s.len()));
    }
    let n = s.n_channels();
    Ok(Mat::from_fn(rows * n, cols, |r, j| s.data[(r % n, start + r / n + j)]))
}

/// Past/future block Hankel matrices of an input-output record.
#[derive(Clone, Debug)]
pub struct HankelData<T> {
    pub u_p: Mat<T>,
    pub u_f: Mat<T>,
    pub y_0: Mat<T>,
    pub y_k: Mat<T>,
    pub block_rows: usize,
    pub columns: usize,
}

/// `k` block rows, `m` columns. Both signals must cover `2k + m − 1` samples.
pub fn build_hankel<T: Real>(
    u: &SignalSequence<T>,
    y: &SignalSequence<T>,
    k: usize,
    m: usize,
) -> Result<HankelData<T>> {
    if k == 0 || m == 0 {
        return Err(Error::arg("Hankel block rows and columns must be positive"));
    }
    let need = 2 * k + m - 1;
    if u.len() < need {
        return Err(Error::short("Hankel input", need, u.len()));
    }
    if y.len() < need {
        return Err(Error::short("Hankel output", need, y.len()));
    }
    Ok(HankelData {
        u_p: block_hankel(u, 0, k, m)?,
        u_f: block_hankel(u, k, k, m)?,
        y_0: block_hankel(y, 0, k, m)?,
        y_k: block_hankel(y, k, k, m)?,
        block_rows: k,
        columns: m,
    })
}

/// Block upper-triangular Toeplitz input matrix with `m + 1` block rows and
/// `cols` columns: block `(i, j)` is `u(j − i)` for `j ≥ i`, zero otherwise.
pub fn okid_input_matrix<T: Real>(u: &SignalSequence<T>, m: usize, cols: usize) -> Result<Mat<T>> {
    if cols > u.len() {
        return Err(Error::short("OKID input matrix", cols, u.len()));
    }
    let n = u.n_channels();
    Ok(Mat::from_fn((m + 1) * n, cols, |r, j| {
        let i = r / n;
        if j >= i {
            u.data[(r % n, j - i)]
        } else {
            T::zero()
        }
    }))
}

/// The square `(m+1)·n_u × (m+1)` case of [`okid_input_matrix`].
pub fn build_okid_input_matrix<T: Real>(u: &SignalSequence<T>, m: usize) -> Result<Mat<T>> {
    if u.len() < m + 1 {
        return Err(Error::short("OKID input matrix", m + 1, u.len()));
    }
    okid_input_matrix(u, m, m + 1)
}

/// `{h(0) = D, h(1) = CB, h(2) = CAB, ...}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovSequence<T> {
    params: Vec<Mat<T>>,
    dt: T,
}

impl<T: Real> MarkovSequence<T> {
    pub fn new(params: Vec<Mat<T>>) -> Result<Self> {
        let first = params.first().ok_or_else(|| Error::arg("empty Markov sequence"))?;
        let (ny, nu) = (first.nrows(), first.ncols());
        for (k, p) in params.iter().enumerate() {
            if p.nrows() != ny {
                return Err(Error::dim(format!("Markov parameter {k} rows"), ny, p.nrows()));
            }
            if p.ncols() != nu {
                return Err(Error::dim(format!("Markov parameter {k} cols"), nu, p.ncols()));
            }
            check_finite(p.as_ref(), "Markov parameter")?;
        }
        Ok(Self { params, dt: T::one() })
    }

    /// Sampling step carried over to realized models (default 1 s).
    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = dt;
        self
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_y(&self) -> usize {
        self.params[0].nrows()
    }

    pub fn n_u(&self) -> usize {
        self.params[0].ncols()
    }

    pub fn get(&self, k: usize) -> MatRef<'_, T> {
        self.params[k].as_ref()
    }

    pub fn params(&self) -> &[Mat<T>] {
        &self.params
    }

    /// Entries `[0, len)`.
    pub fn truncated(&self, len: usize) -> Self {
        Self {
            params: self.params[..len.min(self.len())].to_vec(),
            dt: self.dt,
        }
    }

    /// `‖h − ĥ‖_F / ‖h‖_F` over entries `[from, to)`, with the blocks stacked.
    pub fn relative_error(&self, other: &Self, from: usize, to: usize) -> Result<T> {
        if to > self.len() || to > other.len() || from >= to {
            return Err(Error::short("Markov comparison", to, self.len().min(other.len())));
        }
        if self.n_y() != other.n_y() || self.n_u() != other.n_u() {
            return Err(Error::dim("Markov comparison n_y", self.n_y(), other.n_y()));
        }
        let (mut num, mut den) = (T::zero(), T::zero());
        for k in from..to {
            let (a, b) = (&self.params[k], &other.params[k]);
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    let e = a[(i, j)] - b[(i, j)];
                    num += e * e;
                    den += a[(i, j)] * a[(i, j)];
                }
            }
        }
        Ok((num / den).sqrt())
    }

    /// One row per `k`; columns are `h(k)` flattened row-major.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["k".to_string()];
        for i in 0..self.n_y() {
            for j in 0..self.n_u() {
                header.push(format!("h{i}_{j}"));
            }
        }
        wr.write_record(&header)?;
        for (k, p) in self.params.iter().enumerate() {
            let mut rec = vec![k.to_string()];
            for i in 0..p.nrows() {
                for j in 0..p.ncols() {
                    rec.push(format!("{}", p[(i, j)].to_f64_lossy()));
                }
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, n_y: usize, n_u: usize) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut params = Vec::new();
        for (k, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != 1 + n_y * n_u {
                return Err(Error::dim(
                    format!("Markov CSV row {k} fields"),
                    1 + n_y * n_u,
                    rec.len(),
                ));
            }
            let mut vals = Vec::with_capacity(n_y * n_u);
            for f in rec.iter().skip(1) {
                let v: f64 = f.trim().parse().map_err(|_| Error::arg(format!("bad number {f:?}")))?;
                vals.push(T::of(v));
            }
            params.push(Mat::from_fn(n_y, n_u, |i, j| vals[i * n_u + j]));
        }
        Self::new(params)
    }
}
