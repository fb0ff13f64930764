//! Click/no-click inference on the displaced equilibrium cavity field.
//!
//! Photon counting on the displaced field reduces to a binary outcome
//! (vacuum or not), whose likelihood given the initial emitter state is
//! fully determined by the conditional fidelity `f`: a dark start never
//! produces a click, a bright start stays dark with probability `f`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{as_f64, r, Scalar};

/// Binary measurement record: at least one photon, or none.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Click,
    NoClick,
}

/// Initial emitter preparation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartState {
    Bright,
    Dark,
}

/// How a prediction is drawn from the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionRule {
    /// Sample the prediction from the posterior distribution. Its success
    /// probability at `x = 1/2` is `1/(1+f)`.
    PosteriorSample,
    /// Deterministic argmax of the posterior, ties broken toward a dark
    /// start. Its success probability at `x = 1/2` is `1 - f/2`.
    MaximumAPosteriori,
}

/// Measurement likelihood `P(outcome | start)` for conditional fidelity `f`.
pub fn likelihood<R: Scalar>(outcome: Outcome, start: StartState, f: R) -> R {
    debug_assert!(f >= R::zero() && f <= R::one());
    match (outcome, start) {
        (Outcome::NoClick, StartState::Dark) => R::one(),
        (Outcome::Click, StartState::Dark) => R::zero(),
        (Outcome::NoClick, StartState::Bright) => f,
        (Outcome::Click, StartState::Bright) => R::one() - f,
    }
}

/// Posterior over the initial emitter state for one outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorRow<R: Scalar> {
    pub p_bright: R,
    pub p_dark: R,
}

impl<R: Scalar> PosteriorRow<R> {
    /// Argmax prediction; exact ties go to the dark start.
    pub fn map_prediction(&self) -> StartState {
        if self.p_bright > self.p_dark {
            StartState::Bright
        } else {
            StartState::Dark
        }
    }
}

/// Bayes update of the prior `(x, 1-x)` on one outcome.
///
/// Fails with [`Error::DegenerateEvidence`] if the outcome has zero
/// probability under the prior (for example a click with `x = 0`).
pub fn posterior<R: Scalar>(outcome: Outcome, x: R, f: R) -> Result<PosteriorRow<R>> {
    validate_unit(x, "prior")?;
    validate_unit(f, "conditional fidelity")?;
    let joint_bright = x * likelihood(outcome, StartState::Bright, f);
    let joint_dark = (R::one() - x) * likelihood(outcome, StartState::Dark, f);
    let evidence = joint_bright + joint_dark;
    if evidence <= R::zero() {
        return Err(Error::DegenerateEvidence);
    }
    Ok(PosteriorRow {
        p_bright: joint_bright / evidence,
        p_dark: joint_dark / evidence,
    })
}

/// Full posterior table at prior `x`, plus the posterior-sampling success
/// probability. The click column requires `x (1 - f) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementPosterior<R: Scalar> {
    pub prior_b: R,
    /// No-click likelihood of a bright start; equals the conditional
    /// fidelity `f`.
    pub likelihood_no_click_given_b: R,
    pub click: PosteriorRow<R>,
    pub no_click: PosteriorRow<R>,
    /// Probability of predicting the start state correctly by sampling the
    /// posterior of the observed outcome.
    pub p_correct: R,
}

impl<R: Scalar> MeasurementPosterior<R> {
    pub fn new(x: R, f: R) -> Result<Self> {
        let click = posterior(Outcome::Click, x, f)?;
        let no_click = posterior(Outcome::NoClick, x, f)?;
        let p_click = x * (R::one() - f);
        let p_no = R::one() - p_click;
        let p_correct = p_click * (click.p_bright * click.p_bright + click.p_dark * click.p_dark)
            + p_no * (no_click.p_bright * no_click.p_bright + no_click.p_dark * no_click.p_dark);
        Ok(Self {
            prior_b: x,
            likelihood_no_click_given_b: f,
            click,
            no_click,
            p_correct,
        })
    }
}

/// Success probability of the posterior-sampling prediction at the maximally
/// mixed prior: `1/(1+f)`.
pub fn p_correct<R: Scalar>(f: R) -> R {
    debug_assert!(f >= R::zero() && f <= R::one());
    (R::one() + f).recip()
}

/// Strong- and weak-coupling limits of the prediction success in the
/// thermodynamic regime: `1 - sqrt(2 pi m)` for `m << 1` and
/// `(1 + 1/(8m)) / 2` for `m >> 1`.
pub fn p_correct_limits<R: Scalar>(m: R) -> (R, R) {
    assert!(m > R::zero(), "critical photon number must be positive");
    let strong = R::one() - (R::two_pi() * m).sqrt();
    let weak = (R::one() + (r::<R>(8.0) * m).recip()) * r::<R>(0.5);
    (strong, weak)
}

/// Result of a seeded Monte Carlo run of the inference game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationResult {
    pub trials: u64,
    pub successes: u64,
    pub seed: u64,
}

impl SimulationResult {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    /// Binomial standard error of the measured rate.
    pub fn std_error(&self) -> f64 {
        let p = self.success_rate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Play the inference game `trials` times: draw the start state from the
/// prior, draw the click record from the likelihood, predict with the given
/// rule, and count correct predictions. Fully deterministic for a fixed
/// seed.
pub fn simulate_inference<R: Scalar>(
    x: R,
    f: R,
    rule: DecisionRule,
    trials: u64,
    seed: u64,
) -> Result<SimulationResult> {
    validate_unit(x, "prior")?;
    validate_unit(f, "conditional fidelity")?;
    let xf = as_f64(x);
    let ff = as_f64(f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0u64;
    for _ in 0..trials {
        let start = if rng.random::<f64>() < xf {
            StartState::Bright
        } else {
            StartState::Dark
        };
        let outcome = match start {
            StartState::Dark => Outcome::NoClick,
            StartState::Bright => {
                if rng.random::<f64>() < ff {
                    Outcome::NoClick
                } else {
                    Outcome::Click
                }
            }
        };
        let row = posterior(outcome, x, f)?;
        let prediction = match rule {
            DecisionRule::MaximumAPosteriori => row.map_prediction(),
            DecisionRule::PosteriorSample => {
                if rng.random::<f64>() < as_f64(row.p_bright) {
                    StartState::Bright
                } else {
                    StartState::Dark
                }
            }
        };
        if prediction == start {
            successes += 1;
        }
    }
    Ok(SimulationResult {
        trials,
        successes,
        seed,
    })
}

fn validate_unit<R: Scalar>(v: R, what: &str) -> Result<()> {
    if v < R::zero() || v > R::one() {
        return Err(Error::Normalization {
            context: format!("{what} = {} outside [0, 1]", as_f64(v)),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady_state::conditional_fidelity_thermo;
    use approx::assert_relative_eq;

    #[test]
    fn likelihood_table() {
        for &f in &[0.0, 0.3, 1.0] {
            assert_relative_eq!(likelihood(Outcome::NoClick, StartState::Dark, f), 1.0);
            assert_relative_eq!(likelihood(Outcome::Click, StartState::Dark, f), 0.0);
        }
        assert_relative_eq!(likelihood(Outcome::NoClick, StartState::Bright, 0.3), 0.3);
        assert_relative_eq!(likelihood(Outcome::Click, StartState::Bright, 0.3), 0.7);
    }

    #[test]
    fn posterior_flat_prior_reproduces_closed_form() {
        // no-click at x = 1/2: P(d) = 1/(1+f), P(b) = f/(1+f)
        let f = 0.37;
        let row = posterior(Outcome::NoClick, 0.5, f).unwrap();
        assert_relative_eq!(row.p_dark, 1.0 / (1.0 + f), epsilon = 1e-14);
        assert_relative_eq!(row.p_bright, f / (1.0 + f), epsilon = 1e-14);
        // click resolves the bright start exactly
        let row = posterior(Outcome::Click, 0.5, f).unwrap();
        assert_relative_eq!(row.p_bright, 1.0);
        assert_eq!(row.p_dark, 0.0);
    }

    #[test]
    fn posterior_limiting_fidelities() {
        // f = 0: no click can only be a dark start
        let row = posterior(Outcome::NoClick, 0.5, 0.0).unwrap();
        assert_eq!(row.p_bright, 0.0);
        // f = 1: the measurement is uninformative, posterior = prior
        let row = posterior(Outcome::NoClick, 0.5, 1.0).unwrap();
        assert_relative_eq!(row.p_bright, 0.5);
        assert_relative_eq!(row.p_dark, 0.5);
    }

    #[test]
    fn posterior_matches_joint_table_oracle() {
        let (x, f) = (0.3, 0.5);
        // four-cell joint table, normalized per outcome column
        let joint_no = [x * f, 1.0 - x]; // (bright, dark)
        let norm_no = joint_no[0] + joint_no[1];
        let row = posterior(Outcome::NoClick, x, f).unwrap();
        assert_relative_eq!(row.p_bright, joint_no[0] / norm_no, epsilon = 1e-14);
        assert_relative_eq!(row.p_dark, joint_no[1] / norm_no, epsilon = 1e-14);
        assert_relative_eq!(row.p_bright + row.p_dark, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_outcomes_are_rejected() {
        assert!(matches!(
            posterior(Outcome::Click, 0.0, 0.5).unwrap_err(),
            Error::DegenerateEvidence
        ));
        assert!(matches!(
            posterior(Outcome::Click, 0.5, 1.0).unwrap_err(),
            Error::DegenerateEvidence
        ));
        assert!(MeasurementPosterior::new(0.0, 0.5).is_err());
    }

    #[test]
    fn p_correct_values_and_monotonicity() {
        assert_relative_eq!(p_correct(1.0), 0.5);
        assert_relative_eq!(p_correct(0.0), 1.0);
        let mut prev = 2.0;
        for k in 0..=20 {
            let f = k as f64 / 20.0;
            let p = p_correct(f);
            assert!(p >= 0.5);
            assert!(p <= prev, "p_correct must not increase with f");
            prev = p;
        }
    }

    #[test]
    fn p_correct_from_thermo_fidelity_near_half_crossing() {
        // composing with the thermodynamic fidelity at m = 0.09
        let f: f64 = conditional_fidelity_thermo(0.09);
        let p = p_correct(f);
        assert!((p - 0.669).abs() < 0.002, "p = {p}");
    }

    #[test]
    fn measurement_posterior_table_consistency() {
        let table = MeasurementPosterior::new(0.5, 0.4).unwrap();
        assert_relative_eq!(
            table.click.p_bright + table.click.p_dark,
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            table.no_click.p_bright + table.no_click.p_dark,
            1.0,
            epsilon = 1e-12
        );
        assert_eq!(table.click.p_dark, 0.0);
        // at the flat prior the sampling success is the closed form
        assert_relative_eq!(table.p_correct, p_correct(0.4), epsilon = 1e-12);
    }

    #[test]
    fn sampling_rule_reproduces_closed_form() {
        for &f in &[0.1, 0.5, 0.9] {
            let sim =
                simulate_inference(0.5, f, DecisionRule::PosteriorSample, 100_000, 7).unwrap();
            let expected = p_correct(f);
            let dev = (sim.success_rate() - expected).abs();
            assert!(
                dev < 3.0 * sim.std_error(),
                "f = {f}: rate {} vs {expected} ({}) sigma",
                sim.success_rate(),
                dev / sim.std_error()
            );
        }
    }

    #[test]
    fn map_rule_beats_sampling_and_matches_enumeration() {
        // exact MAP success at x = 1/2:
        //   P(click) * 1 + P(no click) * max(posterior) = 1 - f/2
        for &f in &[0.1, 0.5, 0.9] {
            let sim =
                simulate_inference(0.5, f, DecisionRule::MaximumAPosteriori, 100_000, 11).unwrap();
            let expected = 1.0 - f / 2.0;
            let dev = (sim.success_rate() - expected).abs();
            assert!(
                dev < 3.0 * sim.std_error(),
                "f = {f}: rate {} vs {expected}",
                sim.success_rate()
            );
            assert!(expected >= p_correct(f));
        }
    }

    #[test]
    fn map_tie_breaks_toward_dark() {
        let row = PosteriorRow {
            p_bright: 0.5,
            p_dark: 0.5,
        };
        assert_eq!(row.map_prediction(), StartState::Dark);
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let a = simulate_inference(0.5, 0.3, DecisionRule::PosteriorSample, 10_000, 42).unwrap();
        let b = simulate_inference(0.5, 0.3, DecisionRule::PosteriorSample, 10_000, 42).unwrap();
        assert_eq!(a.successes, b.successes);
        let c = simulate_inference(0.5, 0.3, DecisionRule::PosteriorSample, 10_000, 43).unwrap();
        assert_ne!(a.successes, c.successes);
    }

    #[test]
    fn p_correct_limits_values() {
        let (strong, _) = p_correct_limits(1e-6);
        assert!((strong - (1.0 - (2.0 * std::f64::consts::PI * 1e-6).sqrt())).abs() < 1e-12);
        let (_, weak) = p_correct_limits(100.0);
        assert_relative_eq!(weak, 0.5 * (1.0 + 1.0 / 800.0), epsilon = 1e-12);
    }
}
