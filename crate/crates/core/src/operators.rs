//! Bounded linear operators `B: R^n -> R^m` with forward and adjoint actions.
//!
//! Images are flattened row-major: pixel `(r, c)` of a `rows x cols` image
//! lives at index `r * cols + c`.

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};

use crate::error::{check_len, Error, Result};
use crate::random::{self, streams};

pub type Vector = DVector<f64>;

/// Operator family, used for reporting and dispatch in tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    DenseMatrix,
    SparseMatrix,
    Difference1d,
    Gradient2d,
    GaussianBlur,
    DownsampleAverage,
    Composite,
    Identity,
    Scaled,
}

/// Compressed sparse row matrix. Used for ray-driven projection matrices,
/// which have `O(side)` nonzeros per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from per-row `(column, value)` lists. Duplicate
    /// columns within a row are kept as separate entries (they sum on apply).
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &rows {
            for &(c, v) in row {
                if c >= cols {
                    return Err(Error::InvalidArgument(format!(
                        "sparse column index {c} out of range for {cols} columns"
                    )));
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as `(column, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *o = acc;
        }
    }

    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (r, &yr) in y.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[k]] += self.values[k] * yr;
            }
        }
    }
}

/// Separable Gaussian blur on a `rows x cols` image with half-sample
/// symmetric boundary extension.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBlur {
    rows: usize,
    cols: usize,
    sigma: f64,
    kernel: Vec<f64>,
}

impl GaussianBlur {
    /// Kernel truncated at radius `ceil(3 sigma)` and normalized to sum 1.
    /// `sigma = 0` gives the identity.
    pub fn new(rows: usize, cols: usize, sigma: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "blur needs a non-empty image, got {rows}x{cols}"
            )));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "blur sigma must be finite and >= 0, got {sigma}"
            )));
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let mut kernel: Vec<f64> = if radius == 0 {
            vec![1.0]
        } else {
            (0..=2 * radius)
                .map(|k| {
                    let d = k as f64 - radius as f64;
                    (-d * d / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        };
        let total: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            rows,
            cols,
            sigma,
            kernel,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    fn radius(&self) -> isize {
        (self.kernel.len() / 2) as isize
    }

    /// 1D pass over `len` samples spaced `stride` apart starting at `offset`.
    fn pass(&self, src: &[f64], dst: &mut [f64], len: usize, stride: usize, offset: usize, adjoint: bool) {
        let r = self.radius();
        for i in 0..len {
            for (k, &w) in self.kernel.iter().enumerate() {
                let j = reflect(i as isize + k as isize - r, len);
                if adjoint {
                    dst[offset + j * stride] += w * src[offset + i * stride];
                } else {
                    dst[offset + i * stride] += w * src[offset + j * stride];
                }
            }
        }
    }

    fn apply_separable(&self, x: &[f64], out: &mut [f64], adjoint: bool) {
        let mut tmp = vec![0.0; x.len()];
        out.fill(0.0);
        // Forward: rows then columns. Adjoint: columns then rows.
        if adjoint {
            for c in 0..self.cols {
                self.pass(x, &mut tmp, self.rows, self.cols, c, true);
            }
            for r in 0..self.rows {
                self.pass(&tmp, out, self.cols, 1, r * self.cols, true);
            }
        } else {
            for r in 0..self.rows {
                self.pass(x, &mut tmp, self.cols, 1, r * self.cols, false);
            }
            for c in 0..self.cols {
                self.pass(&tmp, out, self.rows, self.cols, c, false);
            }
        }
    }
}

/// Half-sample symmetric index extension: `... c b a | a b c d | d c b ...`.
fn reflect(j: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = j.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LinearMap {
    Identity(usize),
    Scaled { factor: f64, inner: Box<LinearMap> },
    Dense(DMatrix<f64>),
    Sparse(SparseMatrix),
    /// `(n-1) x n` forward differences, `(Dx)_i = x_{i+1} - x_i`.
    Difference1d(usize),
    /// Stacked horizontal and vertical forward differences of a row-major
    /// image; the difference past the last pixel of each line is zero.
    Gradient2d { rows: usize, cols: usize },
    GaussianBlur(GaussianBlur),
    /// Mean over non-overlapping `factor x factor` blocks.
    DownsampleAverage { rows: usize, cols: usize, factor: usize },
    /// Product of operators, outermost first: `[D, S]` is `D * S`.
    Composite(Vec<LinearMap>),
}

impl LinearMap {
    pub fn kind(&self) -> OperatorKind {
        match self {
            Self::Identity(_) => OperatorKind::Identity,
            Self::Scaled { .. } => OperatorKind::Scaled,
            Self::Dense(_) => OperatorKind::DenseMatrix,
            Self::Sparse(_) => OperatorKind::SparseMatrix,
            Self::Difference1d(_) => OperatorKind::Difference1d,
            Self::Gradient2d { .. } => OperatorKind::Gradient2d,
            Self::GaussianBlur(_) => OperatorKind::GaussianBlur,
            Self::DownsampleAverage { .. } => OperatorKind::DownsampleAverage,
            Self::Composite(_) => OperatorKind::Composite,
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Self::Identity(n) => *n,
            Self::Scaled { inner, .. } => inner.in_dim(),
            Self::Dense(m) => m.ncols(),
            Self::Sparse(s) => s.ncols(),
            Self::Difference1d(n) => *n,
            Self::Gradient2d { rows, cols } => rows * cols,
            Self::GaussianBlur(b) => b.rows * b.cols,
            Self::DownsampleAverage { rows, cols, .. } => rows * cols,
            Self::Composite(ops) => ops.last().map_or(0, LinearMap::in_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Self::Identity(n) => *n,
            Self::Scaled { inner, .. } => inner.out_dim(),
            Self::Dense(m) => m.nrows(),
            Self::Sparse(s) => s.nrows(),
            Self::Difference1d(n) => n - 1,
            Self::Gradient2d { rows, cols } => 2 * rows * cols,
            Self::GaussianBlur(b) => b.rows * b.cols,
            Self::DownsampleAverage { rows, cols, factor } => (rows / factor) * (cols / factor),
            Self::Composite(ops) => ops.first().map_or(0, LinearMap::out_dim),
        }
    }

    /// `B x`.
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        check_len("LinearMap::apply", self.in_dim(), x.len())?;
        Ok(self.apply_unchecked(x))
    }

    /// `B^T y`.
    pub fn adjoint_apply(&self, y: &Vector) -> Result<Vector> {
        check_len("LinearMap::adjoint_apply", self.out_dim(), y.len())?;
        Ok(self.adjoint_unchecked(y))
    }

    pub(crate) fn apply_unchecked(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(self.out_dim());
        self.forward_into(x.as_slice(), out.as_mut_slice());
        out
    }

    pub(crate) fn adjoint_unchecked(&self, y: &Vector) -> Vector {
        let mut out = Vector::zeros(self.in_dim());
        self.adjoint_into(y.as_slice(), out.as_mut_slice());
        out
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Identity(_) => out.copy_from_slice(x),
            Self::Scaled { factor, inner } => {
                inner.forward_into(x, out);
                out.iter_mut().for_each(|v| *v *= factor);
            }
            Self::Dense(m) => {
                let xv = DVectorView::from_slice(x, m.ncols());
                let mut ov = DVectorViewMut::from_slice(out, m.nrows());
                m.mul_to(&xv, &mut ov);
            }
            Self::Sparse(s) => s.forward(x, out),
            Self::Difference1d(_) => {
                for (o, w) in out.iter_mut().zip(x.windows(2)) {
                    *o = w[1] - w[0];
                }
            }
            Self::Gradient2d { rows, cols } => {
                let (rows, cols) = (*rows, *cols);
                let n = rows * cols;
                let (horiz, vert) = out.split_at_mut(n);
                for r in 0..rows {
                    for c in 0..cols {
                        let i = r * cols + c;
                        horiz[i] = if c + 1 < cols { x[i + 1] - x[i] } else { 0.0 };
                        vert[i] = if r + 1 < rows { x[i + cols] - x[i] } else { 0.0 };
                    }
                }
            }
            Self::GaussianBlur(b) => b.apply_separable(x, out, false),
            Self::DownsampleAverage { rows, cols, factor } => {
                let (cols, f) = (*cols, *factor);
                let out_cols = cols / f;
                let scale = 1.0 / (f * f) as f64;
                out.fill(0.0);
                for r in 0..*rows {
                    for c in 0..cols {
                        out[(r / f) * out_cols + c / f] += scale * x[r * cols + c];
                    }
                }
            }
            Self::Composite(ops) => {
                let mut cur = x.to_vec();
                for op in ops.iter().rev() {
                    let mut next = vec![0.0; op.out_dim()];
                    op.forward_into(&cur, &mut next);
                    cur = next;
                }
                out.copy_from_slice(&cur);
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        match self {
            Self::Identity(_) => out.copy_from_slice(y),
            Self::Scaled { factor, inner } => {
                inner.adjoint_into(y, out);
                out.iter_mut().for_each(|v| *v *= factor);
            }
            Self::Dense(m) => {
                let yv = DVectorView::from_slice(y, m.nrows());
                let mut ov = DVectorViewMut::from_slice(out, m.ncols());
                m.tr_mul_to(&yv, &mut ov);
            }
            Self::Sparse(s) => s.adjoint(y, out),
            Self::Difference1d(n) => {
                let n = *n;
                for (i, o) in out.iter_mut().enumerate() {
                    let left = if i > 0 { y[i - 1] } else { 0.0 };
                    let right = if i + 1 < n { y[i] } else { 0.0 };
                    *o = left - right;
                }
            }
            Self::Gradient2d { rows, cols } => {
                let (rows, cols) = (*rows, *cols);
                let n = rows * cols;
                let (horiz, vert) = y.split_at(n);
                for r in 0..rows {
                    for c in 0..cols {
                        let i = r * cols + c;
                        let mut acc = 0.0;
                        if c + 1 < cols {
                            acc -= horiz[i];
                        }
                        if c > 0 {
                            acc += horiz[i - 1];
                        }
                        if r + 1 < rows {
                            acc -= vert[i];
                        }
                        if r > 0 {
                            acc += vert[i - cols];
                        }
                        out[i] = acc;
                    }
                }
            }
            Self::GaussianBlur(b) => b.apply_separable(y, out, true),
            Self::DownsampleAverage { rows, cols, factor } => {
                let (cols, f) = (*cols, *factor);
                let out_cols = cols / f;
                let scale = 1.0 / (f * f) as f64;
                for r in 0..*rows {
                    for c in 0..cols {
                        out[r * cols + c] = scale * y[(r / f) * out_cols + c / f];
                    }
                }
            }
            Self::Composite(ops) => {
                let mut cur = y.to_vec();
                for op in ops {
                    let mut next = vec![0.0; op.in_dim()];
                    op.adjoint_into(&cur, &mut next);
                    cur = next;
                }
                out.copy_from_slice(&cur);
            }
        }
    }

    /// Materializes the operator column by column.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (m, n) = (self.out_dim(), self.in_dim());
        let mut dense = DMatrix::zeros(m, n);
        let mut e = Vector::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            dense.set_column(j, &self.apply_unchecked(&e));
            e[j] = 0.0;
        }
        dense
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self::Scaled {
            factor,
            inner: Box::new(self),
        }
    }
}

pub fn make_identity(n: usize) -> Result<LinearMap> {
    if n == 0 {
        return Err(Error::InvalidArgument("identity needs n >= 1".into()));
    }
    Ok(LinearMap::Identity(n))
}

pub fn make_dense(m: DMatrix<f64>) -> Result<LinearMap> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidArgument("dense operator needs a non-empty matrix".into()));
    }
    Ok(LinearMap::Dense(m))
}

pub fn make_difference_1d(n: usize) -> Result<LinearMap> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "difference operator needs n >= 2, got {n}"
        )));
    }
    Ok(LinearMap::Difference1d(n))
}

pub fn make_gradient_2d(rows: usize, cols: usize) -> Result<LinearMap> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidArgument(format!(
            "gradient operator needs at least a 2x2 image, got {rows}x{cols}"
        )));
    }
    Ok(LinearMap::Gradient2d { rows, cols })
}

pub fn make_gaussian_blur(rows: usize, cols: usize, sigma: f64) -> Result<LinearMap> {
    Ok(LinearMap::GaussianBlur(GaussianBlur::new(rows, cols, sigma)?))
}

pub fn make_downsample_average(rows: usize, cols: usize, factor: usize) -> Result<LinearMap> {
    if factor == 0 || rows == 0 || cols == 0 || rows % factor != 0 || cols % factor != 0 {
        return Err(Error::InvalidArgument(format!(
            "image {rows}x{cols} is not divisible by downsampling factor {factor}"
        )));
    }
    Ok(LinearMap::DownsampleAverage { rows, cols, factor })
}

/// Blur followed by block averaging, the forward model `DS` of the
/// super-resolution problem.
pub fn make_blur_downsample(rows: usize, cols: usize, sigma: f64, factor: usize) -> Result<LinearMap> {
    let down = make_downsample_average(rows, cols, factor)?;
    let blur = make_gaussian_blur(rows, cols, sigma)?;
    make_composite(vec![down, blur])
}

/// `ops[0] * ops[1] * ... * ops[k-1]`.
pub fn make_composite(ops: Vec<LinearMap>) -> Result<LinearMap> {
    if ops.is_empty() {
        return Err(Error::InvalidArgument("composite needs at least one operator".into()));
    }
    for pair in ops.windows(2) {
        check_len("make_composite", pair[0].in_dim(), pair[1].out_dim())?;
    }
    Ok(LinearMap::Composite(ops))
}

/// Nearest-neighbour upsampling of a `rows x cols` image by `factor`.
pub fn upsample_nearest(img: &Vector, rows: usize, cols: usize, factor: usize) -> Result<Vector> {
    check_len("upsample_nearest", rows * cols, img.len())?;
    let big_cols = cols * factor;
    Ok(Vector::from_fn(rows * factor * big_cols, |i, _| {
        let (r, c) = (i / big_cols, i % big_cols);
        img[(r / factor) * cols + c / factor]
    }))
}

/// Power-iteration defaults.
pub const NORM_TOL: f64 = 1e-8;
pub const NORM_MAX_ITERS: usize = 5000;

/// Estimates `||B|| = sqrt(lambda_max(B^T B))` by power iteration on `B^T B`
/// from a seeded Gaussian start. Stops once the relative change of the
/// Rayleigh quotient drops below `tol`.
pub fn estimate_norm(op: &LinearMap, tol: f64, max_iters: usize, seed: u64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("power iteration tol must be > 0, got {tol}")));
    }
    let mut rng = random::stream(seed, streams::POWER_ITERATION);
    let mut x = random::gaussian_vector(&mut rng, op.in_dim(), 1.0);
    let start_norm = x.norm();
    if start_norm == 0.0 {
        return Ok(0.0);
    }
    x /= start_norm;
    let mut rayleigh = 0.0;
    for _ in 0..max_iters.max(1) {
        let w = op.adjoint_unchecked(&op.apply_unchecked(&x));
        let next = x.dot(&w);
        let w_norm = w.norm();
        if w_norm == 0.0 {
            return Ok(0.0);
        }
        x = w / w_norm;
        let done = (next - rayleigh).abs() < tol * next.abs();
        rayleigh = next;
        if done {
            break;
        }
    }
    Ok(rayleigh.max(0.0).sqrt())
}

/// `lambda_max(D D^T)` of the 1D difference operator: `2 - 2 cos((n-1) pi / n)`.
pub fn difference_1d_lambda_max(n: usize) -> f64 {
    let n = n as f64;
    2.0 - 2.0 * ((n - 1.0) * std::f64::consts::PI / n).cos()
}

/// `lambda_max(D D^T)` of the 2D gradient: sum of the per-axis 1D maxima.
pub fn gradient_2d_lambda_max(rows: usize, cols: usize) -> f64 {
    difference_1d_lambda_max(rows) + difference_1d_lambda_max(cols)
}
