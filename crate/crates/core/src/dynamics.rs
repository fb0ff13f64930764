//! Master-equation propagation: Jaynes-Cummings coupling on the bright
//! transition, spontaneous emission into free space through the dark
//! transition, and adaptive Runge-Kutta time evolution with equilibrium
//! detection. The purified variant evolves an auxiliary copy of the emitter
//! alongside, so the initial emitter entropy stays accessible at all times.
//!
//! Basis conventions: emitter levels are ordered (bright, excited, dark);
//! composite spaces are ordered emitter (x) [auxiliary copy] (x) cavity.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::hilbert::{
    coherent_state, trace_distance, truncation_dim, DensityMatrix, HilbertDims, Ket, OperatorMatrix,
};
use crate::scalar::{as_f64, r, Scalar};

pub const BRIGHT: usize = 0;
pub const EXCITED: usize = 1;
pub const DARK: usize = 2;
pub const PARTICLE_DIM: usize = 3;

/// Physical parameters of one run.
///
/// Rates are in units of the spontaneous rate `gamma` (normally fixed to 1);
/// `m() = (gamma/g)^2 / 2` is the critical photon number, infinite for a
/// decoupled cavity. `gamma = 0` is accepted so closed-system checks can
/// disable the jump term.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<R: Scalar> {
    g: R,
    gamma: R,
    x: R,
    alpha: Complex<R>,
    n_max: usize,
}

impl<R: Scalar> ModelParams<R> {
    pub fn new(g: R, gamma: R, x: R, alpha: Complex<R>, n_max: usize) -> Result<Self> {
        if !(g >= R::zero()) || !(gamma >= R::zero()) {
            return Err(Error::Normalization {
                context: "rates g and gamma must be nonnegative".into(),
            });
        }
        if x < R::zero() || x > R::one() {
            return Err(Error::Normalization {
                context: format!("bright-state probability x = {} outside [0, 1]", as_f64(x)),
            });
        }
        if n_max == 0 {
            return Err(Error::DimensionMismatch {
                context: "cavity cutoff must be at least 1".into(),
            });
        }
        Ok(Self {
            g,
            gamma,
            x,
            alpha,
            n_max,
        })
    }

    /// Parameters from the dimensionless control parameter `m`, with
    /// `gamma = 1`, `g = 1/sqrt(2m)` (zero for infinite `m`), a real field
    /// amplitude `alpha = sqrt(n_bar0)`, and the cutoff from
    /// [`truncation_dim`].
    pub fn from_critical_number(m: R, x: R, n_bar0: R, tail_tol: R) -> Result<Self> {
        if !(m > R::zero()) {
            return Err(Error::Normalization {
                context: "critical photon number must be positive".into(),
            });
        }
        let g = if m.is_finite_val() {
            ((m + m).sqrt()).recip()
        } else {
            R::zero()
        };
        let n_max = truncation_dim(n_bar0, tail_tol);
        Self::new(
            g,
            R::one(),
            x,
            Complex::new(n_bar0.sqrt(), R::zero()),
            n_max,
        )
    }

    pub fn g(&self) -> R {
        self.g
    }

    pub fn gamma(&self) -> R {
        self.gamma
    }

    pub fn x(&self) -> R {
        self.x
    }

    pub fn alpha(&self) -> Complex<R> {
        self.alpha
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Critical photon number `(gamma/g)^2 / 2`; infinite when `g = 0`.
    pub fn m(&self) -> R {
        if self.g == R::zero() {
            return R::infinity();
        }
        let ratio = self.gamma / self.g;
        ratio * ratio * r::<R>(0.5)
    }

    /// Initial mean photon number `|alpha|^2`.
    pub fn n_bar0(&self) -> R {
        self.alpha.norm_sqr()
    }
}

/// Step-size and sampling control for [`evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepControl<R: Scalar> {
    /// Relative per-step error bound.
    pub rtol: R,
    /// Absolute per-step error floor.
    pub atol: R,
    /// Abort after this many attempted steps.
    pub max_steps: usize,
    /// Number of stored snapshots, including the initial state (min 2).
    pub snapshots: usize,
    /// Tolerance handed to [`detect_equilibrium`] for `converged_at`.
    pub equilibrium_tol: R,
}

impl<R: Scalar> Default for StepControl<R> {
    fn default() -> Self {
        Self {
            rtol: r(1e-8),
            atol: r(1e-12),
            max_steps: 2_000_000,
            snapshots: 101,
            equilibrium_tol: r(1e-5),
        }
    }
}

/// Time-ordered density-matrix snapshots with equilibrium metadata.
#[derive(Debug, Clone)]
pub struct Trajectory<R: Scalar> {
    times: Vec<R>,
    states: Vec<DensityMatrix<R>>,
    converged_at: Option<usize>,
}

impl<R: Scalar> Trajectory<R> {
    pub fn times(&self) -> &[R] {
        &self.times
    }

    pub fn states(&self) -> &[DensityMatrix<R>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Index of the first snapshot classified as equilibrated, if any.
    pub fn converged_at(&self) -> Option<usize> {
        self.converged_at
    }

    /// Snapshot at the detected equilibrium index.
    pub fn equilibrium_state(&self) -> Option<&DensityMatrix<R>> {
        self.converged_at.map(|k| &self.states[k])
    }

    pub fn last_state(&self) -> &DensityMatrix<R> {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }
}

/// Jaynes-Cummings Hamiltonian on emitter (x) cavity,
/// `(g/2) (|b><e| a^dag + |e><b| a)` with `hbar = 1`.
pub fn jaynes_cummings_h<R: Scalar>(params: &ModelParams<R>) -> OperatorMatrix<R> {
    let nc = params.n_max + 1;
    let d = PARTICLE_DIM * nc;
    let g_half = params.g * r::<R>(0.5);
    let mut h = DMatrix::from_element(d, d, Complex::new(R::zero(), R::zero()));
    for n in 1..nc {
        let v = Complex::new(g_half * r::<R>(n as f64).sqrt(), R::zero());
        let row_b = BRIGHT * nc + n;
        let col_e = EXCITED * nc + (n - 1);
        h[(row_b, col_e)] = v;
        h[(col_e, row_b)] = v;
    }
    OperatorMatrix::new(
        h,
        HilbertDims::new(&[PARTICLE_DIM, nc]).expect("positive dims"),
        true,
    )
    .expect("Jaynes-Cummings Hamiltonian is Hermitian by construction")
}

/// Structured layout of a state over emitter (x) middle (x) cavity, with the
/// coupling and decay constants baked in. The Lindblad right-hand side never
/// materializes the Hamiltonian or jump operators: both act by index shifts,
/// which keeps one evaluation at O(d^2) instead of O(d^3).
struct Layout<R: Scalar> {
    middle: usize,
    nc: usize,
    g_half: R,
    gamma: R,
    sqrt_n: Vec<R>,
}

impl<R: Scalar> Layout<R> {
    fn new(dims: &HilbertDims, params: &ModelParams<R>) -> Result<Self> {
        let d = dims.as_slice();
        let nc = params.n_max + 1;
        if d.len() < 2 || d[0] != PARTICLE_DIM || *d.last().expect("non-empty") != nc {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "state dims {d:?} do not match emitter (x) ... (x) cavity with cutoff {}",
                    params.n_max
                ),
            });
        }
        let middle: usize = d[1..d.len() - 1].iter().product();
        let sqrt_n = (0..nc).map(|n| r::<R>(n as f64).sqrt()).collect();
        Ok(Self {
            middle,
            nc,
            g_half: params.g * r::<R>(0.5),
            gamma: params.gamma,
            sqrt_n,
        })
    }

    fn dim(&self) -> usize {
        PARTICLE_DIM * self.middle * self.nc
    }

    /// `out = -i [H, y] + gamma (J y J^dag - (J^dag J y + y J^dag J) / 2)`.
    fn rhs_into(&self, y: &DMatrix<Complex<R>>, out: &mut DMatrix<Complex<R>>) {
        let nc = self.nc;
        let block = self.middle * nc;
        let d = self.dim();
        let zero = Complex::new(R::zero(), R::zero());
        let half_gamma = self.gamma * r::<R>(0.5);
        // coefficients -i (g/2) sqrt(n)
        let minus_i_g: Vec<Complex<R>> = (0..nc)
            .map(|n| Complex::new(R::zero(), -(self.g_half * self.sqrt_n[n])))
            .collect();

        let ys = y.as_slice();
        let os = out.as_mut_slice();

        for col in 0..d {
            let cb = col * d;
            let col_kind = col / block;
            let col_rem = col % block;
            let col_n = col_rem % nc;

            {
                let out_col = &mut os[cb..cb + d];
                out_col.fill(zero);

                // Left action: row-shifted reads within this column.
                let y_col = &ys[cb..cb + d];
                for r0 in 0..self.middle {
                    let b0 = r0 * nc;
                    let e0 = block + r0 * nc;
                    // -i H y: (b, r, n) <- (e, r, n-1) and (e, r, n) <- (b, r, n+1)
                    for n in 1..nc {
                        out_col[b0 + n] += minus_i_g[n] * y_col[e0 + n - 1];
                    }
                    for n in 0..nc - 1 {
                        out_col[e0 + n] += minus_i_g[n + 1] * y_col[b0 + n + 1];
                    }
                    // -(gamma/2) J^dag J y on excited rows
                    for n in 0..nc {
                        out_col[e0 + n] -= y_col[e0 + n] * half_gamma;
                    }
                }

                // Right action: whole-column reads from shifted columns.
                // +i y H: column (b, s, m) <- (e, s, m-1); (e, s, m) <- (b, s, m+1)
                if col_kind == BRIGHT && col_n >= 1 {
                    let src = (EXCITED * block + col_rem - 1) * d;
                    let coeff = -minus_i_g[col_n];
                    for (o, v) in out_col.iter_mut().zip(&ys[src..src + d]) {
                        *o += coeff * *v;
                    }
                } else if col_kind == EXCITED {
                    if col_n + 1 < nc {
                        let src = (BRIGHT * block + col_rem + 1) * d;
                        let coeff = -minus_i_g[col_n + 1];
                        for (o, v) in out_col.iter_mut().zip(&ys[src..src + d]) {
                            *o += coeff * *v;
                        }
                    }
                    // -(gamma/2) y J^dag J on excited columns
                    for (o, v) in out_col.iter_mut().zip(y_col) {
                        *o -= *v * half_gamma;
                    }
                }
            }

            // gamma J y J^dag populates the dark block from the excited block
            if col_kind == DARK {
                let src = (EXCITED * block + col_rem) * d + EXCITED * block;
                let dst = cb + DARK * block;
                for i in 0..block {
                    os[dst + i] += ys[src + i] * self.gamma;
                }
            }
        }
    }
}

/// Lindblad right-hand side for a state over emitter (x) cavity or
/// emitter (x) auxiliary (x) cavity (operators act as the identity on the
/// middle factor). The result is Hermitian and traceless to rounding.
pub fn lindblad_rhs<R: Scalar>(
    rho: &DensityMatrix<R>,
    params: &ModelParams<R>,
) -> Result<DMatrix<Complex<R>>> {
    let layout = Layout::new(rho.dims(), params)?;
    let mut out = DMatrix::from_element(
        layout.dim(),
        layout.dim(),
        Complex::new(R::zero(), R::zero()),
    );
    layout.rhs_into(rho.matrix(), &mut out);
    Ok(out)
}

/// Population of the emitter's excited level.
pub fn excited_population<R: Scalar>(rho: &DensityMatrix<R>) -> Result<R> {
    let dims = rho.dims().as_slice();
    if dims.first() != Some(&PARTICLE_DIM) {
        return Err(Error::DimensionMismatch {
            context: "state does not carry the emitter as its first factor".into(),
        });
    }
    let block: usize = dims[1..].iter().product();
    let m = rho.matrix();
    let mut acc = R::zero();
    for i in EXCITED * block..(EXCITED + 1) * block {
        acc += m[(i, i)].re;
    }
    Ok(acc)
}

// Dormand-Prince 5(4) tableau.
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights minus the embedded fourth-order weights.
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Integrator<R: Scalar> {
    layout: Layout<R>,
    rtol: R,
    atol: R,
    max_steps: usize,
    steps_taken: usize,
    k: Vec<DMatrix<Complex<R>>>,
    stage: DMatrix<Complex<R>>,
    candidate: DMatrix<Complex<R>>,
    h: R,
}

impl<R: Scalar> Integrator<R> {
    fn new(layout: Layout<R>, ctrl: &StepControl<R>, h0: R) -> Self {
        let d = layout.dim();
        let zero = DMatrix::from_element(d, d, Complex::new(R::zero(), R::zero()));
        Integrator {
            layout,
            rtol: ctrl.rtol,
            atol: ctrl.atol,
            max_steps: ctrl.max_steps,
            steps_taken: 0,
            k: vec![zero.clone(); 7],
            stage: zero.clone(),
            candidate: zero,
            h: h0,
        }
    }

    /// Advance `y` in place from `t` to exactly `t_target`. `have_fsal`
    /// tracks whether `k[6]` holds the derivative at the current state
    /// (first-same-as-last reuse across accepted steps and segments).
    fn advance(
        &mut self,
        y: &mut DMatrix<Complex<R>>,
        t: &mut R,
        t_target: R,
        have_fsal: &mut bool,
    ) -> Result<()> {
        let half = r::<R>(0.5);
        let safety = r::<R>(0.9);
        let shrink_limit = r::<R>(0.2);
        let grow_limit = r::<R>(5.0);
        let order_exp = r::<R>(0.2);
        // a clipped final step may land a rounding error short of the
        // target; anything inside this band counts as arrived
        let done_tol = (t_target.abs() + R::one()) * R::default_epsilon() * r::<R>(4.0);

        while t_target - *t > done_tol {
            if self.steps_taken >= self.max_steps {
                return Err(Error::Integration {
                    t: as_f64(*t),
                    context: format!("step budget {} exhausted", self.max_steps),
                });
            }
            let clipped = self.h >= t_target - *t;
            let h = if clipped { t_target - *t } else { self.h };
            let h_floor = real_max(
                r::<R>(1e-14),
                (t_target.abs() + R::one()) * R::default_epsilon() * r::<R>(16.0),
            );
            if h < h_floor {
                return Err(Error::Integration {
                    t: as_f64(*t),
                    context: "step size underflow".into(),
                });
            }

            if *have_fsal {
                self.k.swap(0, 6);
            } else {
                self.layout.rhs_into(y, &mut self.k[0]);
            }

            for s in 0..6 {
                self.stage.copy_from(y);
                for (j, &a) in DP_A[s].iter().enumerate().take(s + 1) {
                    if a == 0.0 {
                        continue;
                    }
                    let c = Complex::new(h * r::<R>(a), R::zero());
                    let st = self.stage.as_mut_slice();
                    for (o, v) in st.iter_mut().zip(self.k[j].as_slice()) {
                        *o += c * *v;
                    }
                }
                if s == 5 {
                    // the sixth stage point is the fifth-order solution
                    self.candidate.copy_from(&self.stage);
                }
                let (stage, ks) = (&self.stage, &mut self.k[s + 1]);
                self.layout.rhs_into(stage, ks);
            }
            self.steps_taken += 1;

            // scaled max-norm of the embedded error estimate
            let mut worst = R::zero();
            {
                let yv = y.as_slice();
                let cv = self.candidate.as_slice();
                for idx in 0..yv.len() {
                    let mut err = Complex::new(R::zero(), R::zero());
                    for (j, &e) in DP_E.iter().enumerate() {
                        if e == 0.0 {
                            continue;
                        }
                        err += self.k[j].as_slice()[idx] * Complex::new(h * r::<R>(e), R::zero());
                    }
                    let mag = real_max(yv[idx].modulus(), cv[idx].modulus());
                    let scale = self.atol + self.rtol * mag;
                    let ratio = err.modulus() / scale;
                    if ratio > worst {
                        worst = ratio;
                    }
                }
            }

            let accepted = worst <= R::one();
            if accepted {
                *t += h;
                y.copy_from(&self.candidate);
                hermitize(y, half);
                // k[6] is the derivative at the accepted (pre-symmetrized)
                // state; symmetrization shifts it at rounding level only
                *have_fsal = true;
            } else {
                *have_fsal = false;
            }

            let factor = if worst > R::zero() {
                safety * worst.powf(-order_exp)
            } else {
                grow_limit
            };
            let factor = real_max(
                shrink_limit,
                if factor < grow_limit {
                    factor
                } else {
                    grow_limit
                },
            );
            let base = if clipped && accepted { self.h } else { h };
            self.h = base
                * if accepted {
                    factor
                } else {
                    real_min(factor, R::one())
                };
        }
        Ok(())
    }
}

fn real_max<R: Scalar>(a: R, b: R) -> R {
    if a > b {
        a
    } else {
        b
    }
}

fn real_min<R: Scalar>(a: R, b: R) -> R {
    if a < b {
        a
    } else {
        b
    }
}

fn hermitize<R: Scalar>(y: &mut DMatrix<Complex<R>>, half: R) {
    let n = y.nrows();
    for i in 0..n {
        let di = y[(i, i)];
        y[(i, i)] = Complex::new(di.re, R::zero());
        for j in i + 1..n {
            let avg = (y[(i, j)] + y[(j, i)].conj()) * Complex::new(half, R::zero());
            y[(i, j)] = avg;
            y[(j, i)] = avg.conj();
        }
    }
}

/// Propagate a state under the master equation, storing evenly spaced
/// snapshots (the initial state included). Each accepted step is
/// re-Hermitized; every stored snapshot passes the full density-matrix
/// gates, so a state pushed below the positivity tolerance aborts the run.
pub fn evolve<R: Scalar>(
    rho0: &DensityMatrix<R>,
    params: &ModelParams<R>,
    t_end: R,
    ctrl: &StepControl<R>,
) -> Result<Trajectory<R>> {
    if !(t_end > R::zero()) {
        return Err(Error::Integration {
            t: 0.0,
            context: "t_end must be positive".into(),
        });
    }
    let layout = Layout::new(rho0.dims(), params)?;
    let snapshots = ctrl.snapshots.max(2);
    let n_seg = snapshots - 1;
    let dt = t_end / r::<R>(n_seg as f64);

    // initial step: resolve the fastest Rabi sideband and the decay rate
    let freq = params.g * r::<R>((params.n_max as f64).sqrt()) + params.gamma + R::one();
    let h0 = real_max(r::<R>(1e-6), freq.recip() * r::<R>(0.05));
    let mut integrator = Integrator::new(layout, ctrl, real_min(h0, dt));

    let mut y = rho0.matrix().clone();
    let mut t = R::zero();
    let mut have_fsal = false;
    let mut times = Vec::with_capacity(snapshots);
    let mut states = Vec::with_capacity(snapshots);
    times.push(R::zero());
    states.push(rho0.clone());

    for seg in 1..=n_seg {
        let t_target = if seg == n_seg {
            t_end
        } else {
            dt * r::<R>(seg as f64)
        };
        integrator.advance(&mut y, &mut t, t_target, &mut have_fsal)?;
        t = t_target;
        times.push(t_target);
        states.push(DensityMatrix::new(y.clone(), rho0.dims().clone())?);
    }

    let mut traj = Trajectory {
        times,
        states,
        converged_at: None,
    };
    traj.converged_at = detect_equilibrium(&traj, ctrl.equilibrium_tol);
    Ok(traj)
}

/// Evolve the purified composite `|u><u|_(emitter, copy) (x) |alpha><alpha|`
/// with `|u> = sqrt(x) |b,b> + sqrt(1-x) |d,d>`, the coupling and jump
/// operators acting as the identity on the copy.
pub fn evolve_purified<R: Scalar>(
    params: &ModelParams<R>,
    t_end: R,
    ctrl: &StepControl<R>,
) -> Result<Trajectory<R>> {
    let rho0 = purified_initial_state(params)?;
    evolve(&rho0, params, t_end, ctrl)
}

/// Initial state of the purified evolution.
pub fn purified_initial_state<R: Scalar>(params: &ModelParams<R>) -> Result<DensityMatrix<R>> {
    let dims_ar = HilbertDims::new(&[PARTICLE_DIM, PARTICLE_DIM])?;
    let mut amps = nalgebra::DVector::from_element(
        PARTICLE_DIM * PARTICLE_DIM,
        Complex::new(R::zero(), R::zero()),
    );
    amps[BRIGHT * PARTICLE_DIM + BRIGHT] = Complex::new(params.x.sqrt(), R::zero());
    amps[DARK * PARTICLE_DIM + DARK] = Complex::new((R::one() - params.x).sqrt(), R::zero());
    let u = Ket::new(amps, dims_ar)?;
    let cavity = coherent_state(params.alpha, params.n_max)?;
    u.tensor(&cavity)?.projector()
}

/// Initial emitter (x) cavity product state
/// `(x |b><b| + (1-x) |d><d|) (x) |alpha><alpha|`.
pub fn initial_state<R: Scalar>(params: &ModelParams<R>) -> Result<DensityMatrix<R>> {
    let mut pm = DMatrix::from_element(
        PARTICLE_DIM,
        PARTICLE_DIM,
        Complex::new(R::zero(), R::zero()),
    );
    pm[(BRIGHT, BRIGHT)] = Complex::new(params.x, R::zero());
    pm[(DARK, DARK)] = Complex::new(R::one() - params.x, R::zero());
    let particle = DensityMatrix::new(pm, HilbertDims::new(&[PARTICLE_DIM])?)?;
    let cavity = coherent_state(params.alpha, params.n_max)?.projector()?;
    particle.tensor(&cavity)
}

/// First snapshot index where the per-unit-time trace distance to the
/// previous snapshot and the excited-level population both drop strictly
/// below `tol`; `None` if the run never settles.
///
/// Cheap Frobenius bounds (`||d||_F / 2 <= T <= sqrt(rank) ||d||_F / 2`)
/// bracket the trace distance first; the exact spectrum is only computed for
/// snapshots inside the inconclusive band.
pub fn detect_equilibrium<R: Scalar>(traj: &Trajectory<R>, tol: R) -> Option<usize> {
    if !(tol > R::zero()) {
        return None;
    }
    let half = r::<R>(0.5);
    for k in 1..traj.len() {
        let dt = traj.times[k] - traj.times[k - 1];
        if !(dt > R::zero()) {
            continue;
        }
        let pop = match excited_population(&traj.states[k]) {
            Ok(p) => p,
            Err(_) => return None,
        };
        if pop >= tol {
            continue;
        }
        let diff = traj.states[k].matrix() - traj.states[k - 1].matrix();
        let fro = diff.norm();
        let lower = fro * half / dt;
        if lower >= tol {
            continue;
        }
        let rank_bound = r::<R>((diff.nrows() as f64).sqrt());
        let upper = fro * half * rank_bound / dt;
        let rate = if upper < tol {
            upper
        } else {
            trace_distance(&traj.states[k], &traj.states[k - 1]).expect("same dims") / dt
        };
        if rate < tol {
            return Some(k);
        }
    }
    None
}
