//! Truncated Fock-space linear algebra: states, operators, tensor products,
//! partial traces, coherent states, and displacement.
//!
//! All values are immutable after construction; every constructor enforces
//! the type's invariants (normalization, Hermiticity, unit trace, positivity)
//! and returns [`Error`] on violation.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{as_f64, ln_factorials, r, Scalar};

/// Ordered list of subsystem dimensions, e.g. `[3, 3, n_max + 1]` for
/// emitter, auxiliary copy, and cavity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertDims {
    dims: Vec<usize>,
}

impl HilbertDims {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::DimensionMismatch {
                context: format!("subsystem dimensions must be positive, got {dims:?}"),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
        })
    }

    /// Total dimension: the product of all subsystem dimensions.
    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.dims
    }

    /// Row strides of each subsystem in the Kronecker-ordered composite index.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }
}

fn herm_tol<R: Scalar>() -> R {
    real_max(r::<R>(1e-10), R::default_epsilon() * r::<R>(100.0))
}

fn trace_tol<R: Scalar>() -> R {
    real_max(r::<R>(1e-8), R::default_epsilon() * r::<R>(100.0))
}

fn pos_tol<R: Scalar>() -> R {
    real_max(r::<R>(1e-8), R::default_epsilon() * r::<R>(100.0))
}

fn norm_tol<R: Scalar>() -> R {
    real_max(r::<R>(1e-10), R::default_epsilon() * r::<R>(100.0))
}

fn real_max<R: Scalar>(a: R, b: R) -> R {
    if a > b {
        a
    } else {
        b
    }
}

/// Pure state over a composite truncated Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket<R: Scalar> {
    amplitudes: DVector<Complex<R>>,
    dims: HilbertDims,
}

impl<R: Scalar> Ket<R> {
    /// Build a ket from amplitudes; the squared norm must be within the
    /// normalization tolerance of one.
    pub fn new(amplitudes: DVector<Complex<R>>, dims: HilbertDims) -> Result<Self> {
        if amplitudes.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "amplitude length {} != product of dims {}",
                    amplitudes.len(),
                    dims.total()
                ),
            });
        }
        let norm_sq = amplitudes
            .iter()
            .map(|z| z.norm_sqr())
            .fold(R::zero(), |a, b| a + b);
        let dev = (norm_sq - R::one()).abs();
        if dev > norm_tol::<R>() {
            return Err(Error::Normalization {
                context: format!("ket squared norm deviates from one by {:.3e}", as_f64(dev)),
            });
        }
        Ok(Self { amplitudes, dims })
    }

    /// Basis ket `|index>` of the composite space.
    pub fn basis(dims: HilbertDims, index: usize) -> Result<Self> {
        let total = dims.total();
        if index >= total {
            return Err(Error::DimensionMismatch {
                context: format!("basis index {index} out of range for dimension {total}"),
            });
        }
        let mut amplitudes = DVector::from_element(total, Complex::new(R::zero(), R::zero()));
        amplitudes[index] = Complex::new(R::one(), R::zero());
        Ok(Self { amplitudes, dims })
    }

    /// Fock state `|n>` of a single truncated mode with cutoff `n_max`.
    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        Self::basis(HilbertDims::new(&[n_max + 1])?, n)
    }

    pub fn amplitudes(&self) -> &DVector<Complex<R>> {
        &self.amplitudes
    }

    pub fn dims(&self) -> &HilbertDims {
        &self.dims
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Complex<R>> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                context: "inner product between different spaces".into(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Projector `|self><self|` as a density matrix.
    pub fn projector(&self) -> Result<DensityMatrix<R>> {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix::new(m, self.dims.clone())
    }

    /// Tensor product `|self> (x) |other>`, dims concatenated in order.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut dims = self.dims.dims.clone();
        dims.extend_from_slice(&other.dims.dims);
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        Ket::new(
            DVector::from_column_slice(amplitudes.as_slice()),
            HilbertDims::new(&dims)?,
        )
    }
}

/// Trace-one positive-semidefinite Hermitian operator over a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<R: Scalar> {
    matrix: DMatrix<Complex<R>>,
    dims: HilbertDims,
}

impl<R: Scalar> DensityMatrix<R> {
    /// Validate and wrap a matrix: Hermitian within 1e-10, trace within 1e-8
    /// of one, minimum eigenvalue >= -1e-8 (positivity is gated by a shifted
    /// Cholesky factorization; the exact spectrum is only computed to report
    /// a failure).
    pub fn new(matrix: DMatrix<Complex<R>>, dims: HilbertDims) -> Result<Self> {
        let n = dims.total();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "matrix is {}x{}, dims product is {n}",
                    matrix.nrows(),
                    matrix.ncols()
                ),
            });
        }
        let herm_dev = hermiticity_deviation(&matrix);
        if herm_dev > herm_tol::<R>() {
            return Err(Error::NotHermitian {
                deviation: as_f64(herm_dev),
            });
        }
        let trace_dev = (matrix.trace().re - R::one()).abs();
        if trace_dev > trace_tol::<R>() {
            return Err(Error::TraceDeviation {
                deviation: as_f64(trace_dev),
            });
        }
        let tol = pos_tol::<R>();
        if !hermitian_psd(&matrix, tol * r::<R>(1.001)) {
            let (eigenvalues, _) = R::hermitian_eigen(&matrix);
            let min = eigenvalues
                .iter()
                .copied()
                .fold(R::infinity(), |a, b| if b < a { b } else { a });
            return Err(Error::Positivity {
                eigenvalue: as_f64(min),
            });
        }
        Ok(Self { matrix, dims })
    }

    pub fn matrix(&self) -> &DMatrix<Complex<R>> {
        &self.matrix
    }

    pub fn dims(&self) -> &HilbertDims {
        &self.dims
    }

    pub fn trace(&self) -> R {
        self.matrix.trace().re
    }

    /// Purity `tr(rho^2)`.
    pub fn purity(&self) -> R {
        self.matrix
            .iter()
            .map(|z| z.norm_sqr())
            .fold(R::zero(), |a, b| a + b)
    }

    /// Expectation value `tr(rho O)`.
    pub fn expectation(&self, op: &OperatorMatrix<R>) -> Result<Complex<R>> {
        if self.dims != op.dims {
            return Err(Error::DimensionMismatch {
                context: "expectation value over different spaces".into(),
            });
        }
        let mut acc = Complex::new(R::zero(), R::zero());
        let n = self.matrix.nrows();
        for i in 0..n {
            for k in 0..n {
                acc += self.matrix[(i, k)] * op.matrix[(k, i)];
            }
        }
        Ok(acc)
    }

    /// Eigenvalues of the state, ascending.
    pub fn eigenvalues(&self) -> DVector<R> {
        let mut vals: Vec<R> = R::hermitian_eigen(&self.matrix).0.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are ordered"));
        DVector::from_vec(vals)
    }

    /// Tensor product `self (x) other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut dims = self.dims.dims.clone();
        dims.extend_from_slice(&other.dims.dims);
        DensityMatrix::new(
            self.matrix.kronecker(&other.matrix),
            HilbertDims::new(&dims)?,
        )
    }
}

/// Operator over a composite space, with an optional Hermiticity promise.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix<R: Scalar> {
    matrix: DMatrix<Complex<R>>,
    dims: HilbertDims,
    hermitian: bool,
}

impl<R: Scalar> OperatorMatrix<R> {
    pub fn new(matrix: DMatrix<Complex<R>>, dims: HilbertDims, hermitian: bool) -> Result<Self> {
        let n = dims.total();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "operator is {}x{}, dims product is {n}",
                    matrix.nrows(),
                    matrix.ncols()
                ),
            });
        }
        if hermitian {
            let dev = hermiticity_deviation(&matrix);
            if dev > herm_tol::<R>() {
                return Err(Error::NotHermitian {
                    deviation: as_f64(dev),
                });
            }
        }
        Ok(Self {
            matrix,
            dims,
            hermitian,
        })
    }

    pub fn identity(dims: HilbertDims) -> Self {
        let n = dims.total();
        Self {
            matrix: DMatrix::identity(n, n),
            dims,
            hermitian: true,
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex<R>> {
        &self.matrix
    }

    pub fn dims(&self) -> &HilbertDims {
        &self.dims
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Adjoint (conjugate transpose).
    pub fn dagger(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            dims: self.dims.clone(),
            hermitian: self.hermitian,
        }
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                context: "operator product over different spaces".into(),
            });
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            dims: self.dims.clone(),
            hermitian: false,
        })
    }

    /// Kronecker product respecting the dims ordering.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut dims = self.dims.dims.clone();
        dims.extend_from_slice(&other.dims.dims);
        Ok(Self {
            matrix: self.matrix.kronecker(&other.matrix),
            dims: HilbertDims::new(&dims)?,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    /// Apply to a ket. The result is generally unnormalized, so raw
    /// amplitudes are returned.
    pub fn apply(&self, ket: &Ket<R>) -> Result<DVector<Complex<R>>> {
        if self.dims != *ket.dims() {
            return Err(Error::DimensionMismatch {
                context: "operator applied to ket of different space".into(),
            });
        }
        Ok(&self.matrix * ket.amplitudes())
    }
}

/// Commutator `[a, b] = ab - ba`.
pub fn commutator<R: Scalar>(
    a: &OperatorMatrix<R>,
    b: &OperatorMatrix<R>,
) -> Result<OperatorMatrix<R>> {
    if a.dims != b.dims {
        return Err(Error::DimensionMismatch {
            context: "commutator over different spaces".into(),
        });
    }
    Ok(OperatorMatrix {
        matrix: &a.matrix * &b.matrix - &b.matrix * &a.matrix,
        dims: a.dims.clone(),
        hermitian: false,
    })
}

/// Kronecker product of two operators (free-function form of
/// [`OperatorMatrix::tensor`]).
pub fn tensor<R: Scalar>(
    a: &OperatorMatrix<R>,
    b: &OperatorMatrix<R>,
) -> Result<OperatorMatrix<R>> {
    a.tensor(b)
}

/// Cholesky feasibility of `m + shift I` as a positivity gate: succeeds iff
/// the smallest eigenvalue of the Hermitian input exceeds `-shift` (up to
/// rounding), at a third of the cost of a full eigendecomposition. nalgebra's
/// own `Cholesky` takes complex square roots and so cannot reject indefinite
/// Hermitian matrices.
fn hermitian_psd<R: Scalar>(m: &DMatrix<Complex<R>>, shift: R) -> bool {
    let n = m.nrows();
    let mut l = m.clone();
    for i in 0..n {
        l[(i, i)] += Complex::new(shift, R::zero());
    }
    for j in 0..n {
        let mut d = l[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= R::zero() {
            return false;
        }
        let root = d.sqrt();
        l[(j, j)] = Complex::new(root, R::zero());
        for i in j + 1..n {
            let mut v = l[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / Complex::new(root, R::zero());
        }
    }
    true
}

fn hermiticity_deviation<R: Scalar>(m: &DMatrix<Complex<R>>) -> R {
    let n = m.nrows();
    let mut max = R::zero();
    for i in 0..n {
        for j in i..n {
            let dev = (m[(i, j)] - m[(j, i)].conj()).modulus();
            if dev > max {
                max = dev;
            }
        }
    }
    max
}

/// Smallest cavity cutoff `n_max` whose Poisson tail mass above it stays
/// below `tail_tol` for mean photon number `n_bar0`, floored at
/// `ceil(n_bar0 + 10 sqrt(n_bar0)) + 5`.
///
/// Panics if `n_bar0 < 0` or `tail_tol` is outside `(0, 1)`.
pub fn truncation_dim<R: Scalar>(n_bar0: R, tail_tol: R) -> usize {
    let lambda = as_f64(n_bar0);
    let tol = as_f64(tail_tol);
    assert!(lambda >= 0.0, "mean photon number must be nonnegative");
    assert!(tol > 0.0 && tol < 1.0, "tail tolerance must be in (0, 1)");

    let floor = (lambda + 10.0 * lambda.sqrt()).ceil() as usize + 5;
    if lambda == 0.0 {
        return floor;
    }
    let mut p = (-lambda).exp();
    let mut cum = p;
    let mut n = 0usize;
    while 1.0 - cum >= tol {
        if p < 1e-300 && n as f64 > lambda {
            break;
        }
        n += 1;
        p *= lambda / n as f64;
        cum += p;
    }
    floor.max(n)
}

/// Unnormalized coherent-state amplitudes `c_n = e^{-|a|^2/2} a^n / sqrt(n!)`
/// for `n = 0..=n_max`, evaluated through log-factorials so that photon
/// numbers of order 100 stay inside the floating-point range.
pub fn coherent_amplitudes<R: Scalar>(alpha: Complex<R>, n_max: usize) -> DVector<Complex<R>> {
    let mag = as_f64(alpha.modulus());
    let phase = alpha.im.atan2(alpha.re);
    let mut amps = DVector::from_element(n_max + 1, Complex::new(R::zero(), R::zero()));
    if mag == 0.0 {
        amps[0] = Complex::new(R::one(), R::zero());
        return amps;
    }
    let lnfact = ln_factorials(n_max);
    let ln_mag = mag.ln();
    for n in 0..=n_max {
        let log_abs = -mag * mag / 2.0 + n as f64 * ln_mag - 0.5 * lnfact[n];
        let modulus = r::<R>(log_abs.exp());
        let angle = phase * r::<R>(n as f64);
        amps[n] = Complex::new(modulus * angle.cos(), modulus * angle.sin());
    }
    amps
}

/// Coherent state `|alpha>` truncated at `n_max` and renormalized.
///
/// Fails with a truncation error if the basis misses more than 1e-6 of the
/// state's weight; with `n_max` from [`truncation_dim`] the renormalization
/// factor stays within 1e-8 of one.
pub fn coherent_state<R: Scalar>(alpha: Complex<R>, n_max: usize) -> Result<Ket<R>> {
    let amps = coherent_amplitudes(alpha, n_max);
    let norm_sq = amps
        .iter()
        .map(|z| z.norm_sqr())
        .fold(R::zero(), |a, b| a + b);
    let deficit = R::one() - norm_sq;
    if deficit > r::<R>(1e-6) {
        return Err(Error::Truncation {
            context: format!(
                "coherent state with |alpha|^2 = {:.3} at cutoff {n_max}",
                as_f64(alpha.norm_sqr())
            ),
            deficit: as_f64(deficit),
        });
    }
    let scale = norm_sq.sqrt().recip();
    Ok(Ket {
        amplitudes: amps * Complex::new(scale, R::zero()),
        dims: HilbertDims::new(&[n_max + 1]).expect("single positive dimension"),
    })
}

/// Annihilation operator with `<n-1|a|n> = sqrt(n)` on a mode truncated at
/// `n_max`.
pub fn annihilation<R: Scalar>(n_max: usize) -> OperatorMatrix<R> {
    let n = n_max + 1;
    let mut m = DMatrix::from_element(n, n, Complex::new(R::zero(), R::zero()));
    for k in 1..n {
        m[(k - 1, k)] = Complex::new(r::<R>(k as f64).sqrt(), R::zero());
    }
    OperatorMatrix {
        matrix: m,
        dims: HilbertDims::new(&[n]).expect("single positive dimension"),
        hermitian: false,
    }
}

/// Number operator `a^dag a`, diagonal in the Fock basis.
pub fn number_operator<R: Scalar>(n_max: usize) -> OperatorMatrix<R> {
    let n = n_max + 1;
    let mut m = DMatrix::from_element(n, n, Complex::new(R::zero(), R::zero()));
    for k in 0..n {
        m[(k, k)] = Complex::new(r::<R>(k as f64), R::zero());
    }
    OperatorMatrix {
        matrix: m,
        dims: HilbertDims::new(&[n]).expect("single positive dimension"),
        hermitian: true,
    }
}

/// Partial trace keeping the subsystems listed in `keep` (original order).
pub fn partial_trace<R: Scalar>(
    rho: &DensityMatrix<R>,
    keep: &[usize],
) -> Result<DensityMatrix<R>> {
    let dims = rho.dims().as_slice();
    let mut keep_sorted: Vec<usize> = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.is_empty() || keep_sorted.len() != keep.len() {
        return Err(Error::DimensionMismatch {
            context: format!("keep set {keep:?} must be non-empty without duplicates"),
        });
    }
    if *keep_sorted.last().expect("non-empty") >= dims.len() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "keep set {keep:?} out of range for {} subsystems",
                dims.len()
            ),
        });
    }
    let traced: Vec<usize> = (0..dims.len())
        .filter(|i| !keep_sorted.contains(i))
        .collect();
    let strides = rho.dims().strides();

    // Composite offsets of every kept multi-index and every traced multi-index.
    let offsets = |subsys: &[usize]| -> Vec<usize> {
        let sizes: Vec<usize> = subsys.iter().map(|&i| dims[i]).collect();
        let total: usize = sizes.iter().product();
        let mut out = Vec::with_capacity(total);
        for mut flat in 0..total {
            let mut off = 0usize;
            for pos in (0..subsys.len()).rev() {
                off += (flat % sizes[pos]) * strides[subsys[pos]];
                flat /= sizes[pos];
            }
            out.push(off);
        }
        out
    };
    let kept_offsets = offsets(&keep_sorted);
    let traced_offsets = offsets(&traced);

    let nk = kept_offsets.len();
    let mut out = DMatrix::from_element(nk, nk, Complex::new(R::zero(), R::zero()));
    let m = rho.matrix();
    for (i, &ri) in kept_offsets.iter().enumerate() {
        for (j, &rj) in kept_offsets.iter().enumerate() {
            let mut acc = Complex::new(R::zero(), R::zero());
            for &t in &traced_offsets {
                acc += m[(ri + t, rj + t)];
            }
            out[(i, j)] = acc;
        }
    }
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&i| dims[i]).collect();
    DensityMatrix::new(out, HilbertDims::new(&kept_dims)?)
}

/// Displacement operator `D(alpha) = exp(alpha a^dag - alpha^* a)` on a mode
/// truncated at `n_max`, built from the eigendecomposition of the Hermitian
/// generator so the result is unitary to rounding.
pub fn displacement_operator<R: Scalar>(alpha: Complex<R>, n_max: usize) -> OperatorMatrix<R> {
    let n = n_max + 1;
    // K = alpha a^dag - alpha^* a is skew-Hermitian; H = -iK is Hermitian and
    // D = exp(K) = U exp(i diag) U^dag.
    let a = annihilation::<R>(n_max);
    let k = a.matrix.adjoint() * alpha - &a.matrix * alpha.conj();
    let h = k.map(|z| z * Complex::new(R::zero(), -R::one()));
    let (eigenvalues, u) = R::hermitian_eigen(&h);
    let mut d = DMatrix::from_element(n, n, Complex::new(R::zero(), R::zero()));
    for c in 0..n {
        let lambda = eigenvalues[c];
        let phase = Complex::new(lambda.cos(), lambda.sin());
        for row in 0..n {
            d[(row, c)] = u[(row, c)] * phase;
        }
    }
    OperatorMatrix {
        matrix: &d * u.adjoint(),
        dims: HilbertDims::new(&[n]).expect("single positive dimension"),
        hermitian: false,
    }
}

/// Displace a single-mode cavity state: `eta = D(-alpha) rho D(-alpha)^dag`.
///
/// Fails with a truncation error if the displaced state leaks into the top
/// Fock level (`<n_max|eta|n_max> > 1e-6`).
pub fn displace<R: Scalar>(rho: &DensityMatrix<R>, alpha: Complex<R>) -> Result<DensityMatrix<R>> {
    if rho.dims().len() != 1 {
        return Err(Error::DimensionMismatch {
            context: format!(
                "displacement acts on a single mode, state has {} subsystems",
                rho.dims().len()
            ),
        });
    }
    let n_max = rho.dims().as_slice()[0] - 1;
    let d = displacement_operator(-alpha, n_max);
    let eta = &d.matrix * rho.matrix() * d.matrix.adjoint();
    let top = eta[(n_max, n_max)].re;
    if top > r::<R>(1e-6) {
        return Err(Error::Truncation {
            context: format!("displaced state pushed into the cutoff level {n_max}"),
            deficit: as_f64(top),
        });
    }
    DensityMatrix::new(eta, rho.dims().clone())
}

/// Trace distance `1/2 ||a - b||_1` between two states on the same space.
pub fn trace_distance<R: Scalar>(a: &DensityMatrix<R>, b: &DensityMatrix<R>) -> Result<R> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            context: "trace distance between different spaces".into(),
        });
    }
    let diff = a.matrix() - b.matrix();
    let (eigenvalues, _) = R::hermitian_eigen(&diff);
    let half = r::<R>(0.5);
    Ok(eigenvalues
        .iter()
        .map(|l| l.abs())
        .fold(R::zero(), |acc, v| acc + v)
        * half)
}
