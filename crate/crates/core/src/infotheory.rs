//! Entropies, fidelity, Husimi Q-functions, quantum and measurement-based
//! mutual information, and reservoir entropy bookkeeping.
//!
//! All entropies use the natural logarithm (nats). The free-space reservoir
//! is never represented as a Hilbert space: the purified composite stays
//! globally pure, so every reservoir entropy equals the entropy of a
//! complementary subsystem of the tracked state.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::hilbert::{coherent_amplitudes, partial_trace, DensityMatrix};
use crate::scalar::{as_f64, r, Scalar};

/// Eigenvalues in `[-clip, 0)` are rounding debris and clip to zero;
/// anything more negative is a genuine positivity violation. The thresholds
/// widen with the scalar's epsilon so the f32 lane tolerates its own
/// integration roundoff.
fn eig_clip<R: Scalar>() -> R {
    let base = r::<R>(1e-8);
    let scaled = R::default_epsilon() * r::<R>(100.0);
    if scaled > base {
        scaled
    } else {
        base
    }
}

/// Eigenvalues at or below this threshold contribute nothing to entropies.
fn eig_floor<R: Scalar>() -> R {
    let base = r::<R>(1e-12);
    let eps = R::default_epsilon();
    if eps > base {
        eps
    } else {
        base
    }
}

/// Von Neumann entropy `-sum lambda ln lambda` in nats.
pub fn von_neumann_entropy<R: Scalar>(rho: &DensityMatrix<R>) -> Result<R> {
    let (eigenvalues, _) = R::hermitian_eigen(rho.matrix());
    entropy_of_spectrum(eigenvalues.as_slice())
}

fn entropy_of_spectrum<R: Scalar>(eigenvalues: &[R]) -> Result<R> {
    let clip = eig_clip::<R>();
    let floor = eig_floor::<R>();
    let mut acc = R::zero();
    for &lambda in eigenvalues {
        if lambda < -clip {
            return Err(Error::Positivity {
                eigenvalue: as_f64(lambda),
            });
        }
        if lambda <= floor {
            continue;
        }
        acc -= lambda * lambda.ln();
    }
    Ok(acc)
}

/// Shannon entropy `-sum p ln p` of a probability vector, with
/// `0 ln 0 = 0`.
pub fn shannon_entropy<R: Scalar>(p: &[R]) -> Result<R> {
    let mut sum = R::zero();
    for &v in p {
        if v < R::zero() {
            return Err(Error::Normalization {
                context: format!("negative probability {}", as_f64(v)),
            });
        }
        sum += v;
    }
    if (sum - R::one()).abs() > r::<R>(1e-8) {
        return Err(Error::Normalization {
            context: format!("probabilities sum to {}", as_f64(sum)),
        });
    }
    let mut acc = R::zero();
    for &v in p {
        if v > R::zero() {
            acc -= v * v.ln();
        }
    }
    Ok(acc)
}

/// Entropy of the two-outcome distribution `(x, 1 - x)`; this is the initial
/// emitter entropy `S_0` when `x` is the bright-state probability.
pub fn binary_entropy<R: Scalar>(x: R) -> R {
    let mut acc = R::zero();
    if x > R::zero() {
        acc -= x * x.ln();
    }
    let q = R::one() - x;
    if q > R::zero() {
        acc -= q * q.ln();
    }
    acc
}

/// Uhlmann-Jozsa fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
///
/// If either argument is pure the general expression collapses to the
/// overlap `tr(rho sigma)`, which is used directly.
pub fn uhlmann_fidelity<R: Scalar>(rho: &DensityMatrix<R>, sigma: &DensityMatrix<R>) -> Result<R> {
    if rho.dims() != sigma.dims() {
        return Err(Error::DimensionMismatch {
            context: "fidelity between different spaces".into(),
        });
    }
    let pure_tol = r::<R>(1e-10);
    if rho.purity() > R::one() - pure_tol || sigma.purity() > R::one() - pure_tol {
        let mut acc = Complex::new(R::zero(), R::zero());
        let n = rho.matrix().nrows();
        let (a, b) = (rho.matrix(), sigma.matrix());
        for i in 0..n {
            for k in 0..n {
                acc += a[(i, k)] * b[(k, i)];
            }
        }
        return Ok(clamp_unit(acc.re));
    }

    let (eigenvalues, eigenvectors) = R::hermitian_eigen(rho.matrix());
    let clip = eig_clip::<R>();
    for &lambda in eigenvalues.iter() {
        if lambda < -clip {
            return Err(Error::Positivity {
                eigenvalue: as_f64(lambda),
            });
        }
    }
    let n = rho.matrix().nrows();
    let mut sqrt_rho = eigenvectors.clone();
    for c in 0..n {
        let root = if eigenvalues[c] > R::zero() {
            eigenvalues[c].sqrt()
        } else {
            R::zero()
        };
        let scale = Complex::new(root, R::zero());
        for row in 0..n {
            sqrt_rho[(row, c)] *= scale;
        }
    }
    let sqrt_rho = &sqrt_rho * eigenvectors.adjoint();
    let inner = &sqrt_rho * sigma.matrix() * &sqrt_rho;
    let (inner_eigenvalues, _) = R::hermitian_eigen(&inner);
    let mut acc = R::zero();
    for &lambda in inner_eigenvalues.iter() {
        if lambda > R::zero() {
            acc += lambda.sqrt();
        }
    }
    Ok(clamp_unit(acc * acc))
}

fn clamp_unit<R: Scalar>(v: R) -> R {
    if v < R::zero() {
        R::zero()
    } else if v > R::one() {
        R::one()
    } else {
        v
    }
}

/// Rectangular phase-space grid specification for [`husimi_q`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<R: Scalar> {
    pub re_min: R,
    pub re_max: R,
    pub re_count: usize,
    pub im_min: R,
    pub im_max: R,
    pub im_count: usize,
}

impl<R: Scalar> GridSpec<R> {
    /// Square grid centred on the origin.
    pub fn square(halfwidth: R, count: usize) -> Result<Self> {
        if count < 2 || !(halfwidth > R::zero()) {
            return Err(Error::DimensionMismatch {
                context: "grid needs at least 2 points per axis and positive extent".into(),
            });
        }
        Ok(Self {
            re_min: -halfwidth,
            re_max: halfwidth,
            re_count: count,
            im_min: -halfwidth,
            im_max: halfwidth,
            im_count: count,
        })
    }

    /// Default panorama for a field of amplitude `alpha`: 401 x 401 points
    /// covering `[-( |alpha| + 5 ), |alpha| + 5]^2`, enough to resolve the
    /// unit-width coherent peak at any photon number of interest.
    pub fn default_for_amplitude(alpha: Complex<R>) -> Self {
        let halfwidth = alpha.modulus() + r::<R>(5.0);
        Self::square(halfwidth, 401).expect("positive extent")
    }

    pub fn re_axis(&self) -> Vec<R> {
        linspace(self.re_min, self.re_max, self.re_count)
    }

    pub fn im_axis(&self) -> Vec<R> {
        linspace(self.im_min, self.im_max, self.im_count)
    }

    pub fn cell_area(&self) -> R {
        let dre = (self.re_max - self.re_min) / r::<R>((self.re_count - 1) as f64);
        let dim = (self.im_max - self.im_min) / r::<R>((self.im_count - 1) as f64);
        dre * dim
    }
}

fn linspace<R: Scalar>(lo: R, hi: R, count: usize) -> Vec<R> {
    let step = (hi - lo) / r::<R>((count - 1) as f64);
    (0..count).map(|i| lo + step * r::<R>(i as f64)).collect()
}

/// Sampled Husimi function over a rectangular grid; `values[(i, j)]` is
/// `Q(re_axis[i] + i im_axis[j])`.
#[derive(Debug, Clone)]
pub struct QGrid<R: Scalar> {
    pub re_axis: Vec<R>,
    pub im_axis: Vec<R>,
    pub values: DMatrix<R>,
    pub cell_area: R,
}

impl<R: Scalar> QGrid<R> {
    /// Riemann integral of the sampled function; near one when the grid
    /// covers the state's support.
    pub fn integral(&self) -> R {
        self.values.iter().fold(R::zero(), |a, &b| a + b) * self.cell_area
    }

    /// Location and height of the sampled maximum.
    pub fn max_point(&self) -> (R, R, R) {
        let mut best = (R::zero(), R::zero(), -R::one());
        for (j, &im) in self.im_axis.iter().enumerate() {
            for (i, &re) in self.re_axis.iter().enumerate() {
                let q = self.values[(i, j)];
                if q > best.2 {
                    best = (re, im, q);
                }
            }
        }
        best
    }
}

/// Husimi function `Q(beta) = <beta|rho|beta> / pi` of a single-mode state.
pub fn husimi_q<R: Scalar>(rho: &DensityMatrix<R>, spec: &GridSpec<R>) -> Result<QGrid<R>> {
    single_mode(rho)?;
    let re_axis = spec.re_axis();
    let im_axis = spec.im_axis();
    let mut values = DMatrix::from_element(spec.re_count, spec.im_count, R::zero());
    for (j, &im) in im_axis.iter().enumerate() {
        let row = husimi_q_row(rho, im, &re_axis)?;
        for (i, q) in row.into_iter().enumerate() {
            values[(i, j)] = q;
        }
    }
    Ok(QGrid {
        re_axis,
        im_axis,
        values,
        cell_area: spec.cell_area(),
    })
}

/// One constant-`Im beta` row of the Husimi function. Rows are independent,
/// so callers may evaluate them in parallel.
pub fn husimi_q_row<R: Scalar>(rho: &DensityMatrix<R>, im: R, re_axis: &[R]) -> Result<Vec<R>> {
    let n_max = single_mode(rho)?;
    let n = n_max + 1;
    let cols = re_axis.len();
    let mut basis = DMatrix::from_element(n, cols, Complex::new(R::zero(), R::zero()));
    for (c, &re) in re_axis.iter().enumerate() {
        let amps = coherent_amplitudes(Complex::new(re, im), n_max);
        for row in 0..n {
            basis[(row, c)] = amps[row];
        }
    }
    let image = rho.matrix() * &basis;
    let inv_pi = R::pi().recip();
    Ok((0..cols)
        .map(|c| {
            let mut acc = Complex::new(R::zero(), R::zero());
            for row in 0..n {
                acc += basis[(row, c)].conj() * image[(row, c)];
            }
            let q = acc.re * inv_pi;
            if q < R::zero() {
                R::zero()
            } else {
                q
            }
        })
        .collect())
}

/// Husimi function at a single phase-space point.
pub fn husimi_q_point<R: Scalar>(rho: &DensityMatrix<R>, beta: Complex<R>) -> Result<R> {
    let n_max = single_mode(rho)?;
    let amps = coherent_amplitudes(beta, n_max);
    let image = rho.matrix() * &amps;
    Ok(amps.dotc(&image).re * R::pi().recip())
}

fn single_mode<R: Scalar>(rho: &DensityMatrix<R>) -> Result<usize> {
    if rho.dims().len() != 1 {
        return Err(Error::DimensionMismatch {
            context: "Husimi function defined for a single cavity mode".into(),
        });
    }
    Ok(rho.dims().as_slice()[0] - 1)
}

/// Quantum mutual information `S(Y) + S(Z) - S(YZ)` for the bipartition of
/// `rho` whose `Y` side is the given subsystem index set.
pub fn quantum_mutual_information<R: Scalar>(
    rho: &DensityMatrix<R>,
    part_y: &[usize],
) -> Result<R> {
    let n_subsystems = rho.dims().len();
    let part_z: Vec<usize> = (0..n_subsystems).filter(|i| !part_y.contains(i)).collect();
    if part_z.is_empty() || part_y.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "mutual information needs a proper bipartition".into(),
        });
    }
    let rho_y = partial_trace(rho, part_y)?;
    let rho_z = partial_trace(rho, &part_z)?;
    Ok(von_neumann_entropy(&rho_y)? + von_neumann_entropy(&rho_z)? - von_neumann_entropy(rho)?)
}

/// Conditional entropy of the initial emitter state given the binary
/// click/no-click measurement of the displaced equilibrium field:
/// `S[A(0)|L(inf)] = -x f ln[f x / (1 - x（1-f))] - (1-x) ln[(1-x)/(1-x(1-f))]`
/// with the `0 ln 0 = 0` conventions.
pub fn conditional_entropy_measurement<R: Scalar>(x: R, f: R) -> R {
    let no_click = R::one() - x * (R::one() - f);
    let mut acc = R::zero();
    let xf = x * f;
    if xf > R::zero() && no_click > R::zero() {
        acc -= xf * (xf / no_click).ln();
    }
    let dark = R::one() - x;
    if dark > R::zero() && no_click > R::zero() {
        acc -= dark * (dark / no_click).ln();
    }
    acc
}

/// Classical emitter-field mutual information extracted by the click
/// measurement: `S_0 - S[A(0)|L(inf)]`.
pub fn classical_mi_measurement<R: Scalar>(x: R, f: R) -> R {
    binary_entropy(x) - conditional_entropy_measurement(x, f)
}

/// Strong- and weak-coupling closed forms of the equilibrium mutual
/// information in the thermodynamic limit, with their validity ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiThermoLimits<R: Scalar> {
    /// `S_0 - eps(x, m)`, valid deep in the strong-coupling regime.
    pub strong: R,
    pub strong_valid: bool,
    /// `-x ln(x) / (4 m)`, valid deep in the weak-coupling regime.
    pub weak: R,
    pub weak_valid: bool,
}

/// Limiting forms of the equilibrium mutual information at bright-state
/// probability `x` and critical photon number `m`.
///
/// The strong-coupling defect is
/// `eps = -x sqrt(2 pi m) [ln sqrt(2 pi m) + ln(x/(1-x)) - 1]`;
/// expanding the measurement conditional entropy for small
/// `f = sqrt(2 pi m)` produces exactly this expression, including the
/// leading factor `x`.
pub fn mi_thermo_limits<R: Scalar>(x: R, m: R) -> Result<MiThermoLimits<R>> {
    if !(x > R::zero()) || !(x < R::one()) {
        return Err(Error::Normalization {
            context: "limits need 0 < x < 1".into(),
        });
    }
    if !(m > R::zero()) {
        return Err(Error::Normalization {
            context: "critical photon number must be positive".into(),
        });
    }
    let s0 = binary_entropy(x);
    let root = (R::two_pi() * m).sqrt();
    let eps = -x * root * (root.ln() + (x / (R::one() - x)).ln() - R::one());
    let odds = (R::one() - x) / x;
    let strong_bound = {
        let candidate = odds * odds / R::two_pi();
        if candidate < R::one() {
            candidate
        } else {
            R::one()
        }
    };
    let ten = r::<R>(10.0);
    let weak = -(x * x.ln()) / (r::<R>(4.0) * m);
    Ok(MiThermoLimits {
        strong: s0 - eps,
        strong_valid: m <= strong_bound / ten,
        weak,
        weak_valid: m >= ten,
    })
}

/// Entropies of the implicit free-space reservoir, obtained from
/// complementary subsystems of the purified emitter (x) copy (x) cavity
/// state: global purity gives `S_P = S_ARL`, `S_PR = S_AL`, `S_PL = S_AR`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirEntropies<R: Scalar> {
    pub s_p: R,
    pub s_pr: R,
    pub s_pl: R,
}

pub fn reservoir_entropy<R: Scalar>(state: &DensityMatrix<R>) -> Result<ReservoirEntropies<R>> {
    tripartite(state)?;
    let s_p = von_neumann_entropy(state)?;
    let s_pr = von_neumann_entropy(&partial_trace(state, &[0, 2])?)?;
    let s_pl = von_neumann_entropy(&partial_trace(state, &[0, 1])?)?;
    Ok(ReservoirEntropies { s_p, s_pr, s_pl })
}

/// Entanglement witnesses between the reservoir and the emitter copy / the
/// cavity. Positive margins certify entanglement; the derivation treats the
/// equilibrium emitter as approximately pure, which needs a reasonably large
/// photon number, so the report carries the measured mean photon number and
/// a regime flag instead of asserting anything.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntanglementReport<R: Scalar> {
    pub i_pr: R,
    pub i_pl: R,
    pub s_r: R,
    pub s_l: R,
    /// `I(P:R) - S(R)`
    pub margin_pr: R,
    /// `I(P:L) - S(L)`
    pub margin_pl: R,
    pub mean_photon: R,
    pub large_n_regime: bool,
}

pub fn entanglement_inequalities<R: Scalar>(
    state: &DensityMatrix<R>,
) -> Result<EntanglementReport<R>> {
    tripartite(state)?;
    let reservoir = reservoir_entropy(state)?;
    let s_r = von_neumann_entropy(&partial_trace(state, &[1])?)?;
    let rho_l = partial_trace(state, &[2])?;
    let s_l = von_neumann_entropy(&rho_l)?;
    // I(P:R) = S_P + S_R - S_PR and S_PR = S_AL by purity
    let i_pr = reservoir.s_p + s_r - reservoir.s_pr;
    let i_pl = reservoir.s_p + s_l - reservoir.s_pl;
    let mut mean_photon = R::zero();
    for n in 0..rho_l.dims().total() {
        mean_photon += rho_l.matrix()[(n, n)].re * r::<R>(n as f64);
    }
    Ok(EntanglementReport {
        i_pr,
        i_pl,
        s_r,
        s_l,
        margin_pr: i_pr - s_r,
        margin_pl: i_pl - s_l,
        mean_photon,
        large_n_regime: mean_photon >= r::<R>(5.0),
    })
}

fn tripartite<R: Scalar>(state: &DensityMatrix<R>) -> Result<()> {
    if state.dims().len() != 3 {
        return Err(Error::DimensionMismatch {
            context: format!(
                "expected emitter (x) copy (x) cavity, got {} subsystems",
                state.dims().len()
            ),
        });
    }
    Ok(())
}

/// Entropy observables along a purified trajectory, all in nats: subsystem
/// entropies, the implicit reservoir entropy `S_P = S_ARL`, and the mutual
/// information `I(R:L)` between the emitter copy and the cavity.
#[derive(Debug, Clone)]
pub struct EntropyTimeSeries<R: Scalar> {
    pub times: Vec<R>,
    pub s_a: Vec<R>,
    pub s_r: Vec<R>,
    pub s_l: Vec<R>,
    pub s_rl: Vec<R>,
    pub s_arl: Vec<R>,
    pub s_p: Vec<R>,
    pub i_rl: Vec<R>,
    /// Initial emitter entropy, the normalization of the plotted curves.
    pub s0: R,
}

impl<R: Scalar> EntropyTimeSeries<R> {
    /// Compute every series from a purified trajectory. Fails if a snapshot
    /// breaks the entropy bounds (`S >= -1e-8`, `-1e-8 <= I_RL <= S0 + 1e-8`).
    pub fn from_trajectory(traj: &Trajectory<R>) -> Result<Self> {
        if traj.is_empty() {
            return Err(Error::DimensionMismatch {
                context: "empty trajectory".into(),
            });
        }
        tripartite(&traj.states()[0])?;
        let n = traj.len();
        let mut series = EntropyTimeSeries {
            times: traj.times().to_vec(),
            s_a: Vec::with_capacity(n),
            s_r: Vec::with_capacity(n),
            s_l: Vec::with_capacity(n),
            s_rl: Vec::with_capacity(n),
            s_arl: Vec::with_capacity(n),
            s_p: Vec::with_capacity(n),
            i_rl: Vec::with_capacity(n),
            s0: R::zero(),
        };
        for state in traj.states() {
            let s_a = von_neumann_entropy(&partial_trace(state, &[0])?)?;
            let s_r = von_neumann_entropy(&partial_trace(state, &[1])?)?;
            let s_l = von_neumann_entropy(&partial_trace(state, &[2])?)?;
            let s_rl = von_neumann_entropy(&partial_trace(state, &[1, 2])?)?;
            let s_arl = von_neumann_entropy(state)?;
            series.s_a.push(s_a);
            series.s_r.push(s_r);
            series.s_l.push(s_l);
            series.s_rl.push(s_rl);
            series.s_arl.push(s_arl);
            series.s_p.push(s_arl);
            series.i_rl.push(s_r + s_l - s_rl);
        }
        series.s0 = series.s_r[0];
        let bound = eig_clip::<R>();
        for (k, &i) in series.i_rl.iter().enumerate() {
            if i < -bound || i > series.s0 + bound {
                return Err(Error::InvariantViolation {
                    context: format!(
                        "I(R:L) = {} outside [0, S0 = {}] at snapshot {k}",
                        as_f64(i),
                        as_f64(series.s0)
                    ),
                });
            }
        }
        Ok(series)
    }

    /// Series by subsystem label (`"A"`, `"R"`, `"L"`, `"RL"`, `"ARL"`,
    /// `"P"`, or `"I_RL"`).
    pub fn series(&self, label: &str) -> Option<&[R]> {
        match label {
            "A" => Some(&self.s_a),
            "R" => Some(&self.s_r),
            "L" => Some(&self.s_l),
            "RL" => Some(&self.s_rl),
            "ARL" => Some(&self.s_arl),
            "P" => Some(&self.s_p),
            "I_RL" => Some(&self.i_rl),
            _ => None,
        }
    }
}
