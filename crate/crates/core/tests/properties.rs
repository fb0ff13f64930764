//! Property-based invariants over randomized inputs.

use cavity_entropy::bayes::{posterior, Outcome};
use cavity_entropy::hilbert::{
    coherent_state, displace, partial_trace, truncation_dim, DensityMatrix, HilbertDims, Ket,
};
use cavity_entropy::infotheory::{husimi_q_point, shannon_entropy, von_neumann_entropy};
use cavity_entropy::steady_state::{conditional_fidelity_sum, kernel_k};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use proptest::prelude::*;

type C64 = Complex<f64>;

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

fn normalized_ket(raw: Vec<(f64, f64)>) -> Ket<f64> {
    let dim = raw.len();
    let mut amps = DVector::from_iterator(dim, raw.into_iter().map(|(re, im)| c(re, im)));
    // keep degenerate draws well-conditioned
    amps[0] += c(1.0, 0.0);
    let norm = amps.norm();
    amps /= c(norm, 0.0);
    Ket::new(amps, HilbertDims::new(&[dim]).unwrap()).unwrap()
}

fn amplitude_component() -> impl Strategy<Value = f64> {
    -1.0f64..1.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn displacement_round_trips(re in -1.2f64..1.2, im in -1.2f64..1.2, weight in 0.1f64..0.9) {
        let n_max = 40;
        let alpha = c(re, im);
        // a genuinely mixed single-mode state
        let a = coherent_state(c(0.4, -0.2), n_max).unwrap().projector().unwrap();
        let b = Ket::<f64>::fock(1, n_max).unwrap().projector().unwrap();
        let mixed = DensityMatrix::new(
            a.matrix() * c(weight, 0.0) + b.matrix() * c(1.0 - weight, 0.0),
            a.dims().clone(),
        )
        .unwrap();
        let round = displace(&displace(&mixed, alpha).unwrap(), -alpha).unwrap();
        let max_dev = (round.matrix() - mixed.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        prop_assert!(max_dev < 1e-8, "round trip deviation {max_dev}");
        // displacement preserves spectrum, so purity is invariant
        let displaced = displace(&mixed, alpha).unwrap();
        prop_assert!((displaced.purity() - mixed.purity()).abs() < 1e-8);
    }

    #[test]
    fn tensor_then_partial_trace_is_identity(
        left in prop::collection::vec((amplitude_component(), amplitude_component()), 3),
        right in prop::collection::vec((amplitude_component(), amplitude_component()), 4),
    ) {
        let lhs = normalized_ket(left).projector().unwrap();
        let rhs = normalized_ket(right).projector().unwrap();
        let joint = lhs.tensor(&rhs).unwrap();
        let back_left = partial_trace(&joint, &[0]).unwrap();
        let back_right = partial_trace(&joint, &[1]).unwrap();
        let dev_left = (back_left.matrix() - lhs.matrix()).norm();
        let dev_right = (back_right.matrix() - rhs.matrix()).norm();
        prop_assert!(dev_left < 1e-12 && dev_right < 1e-12);
    }

    #[test]
    fn posterior_rows_are_distributions(x in 0.01f64..0.99, f in 0.0f64..1.0) {
        let no_click = posterior(Outcome::NoClick, x, f).unwrap();
        prop_assert!((no_click.p_bright + no_click.p_dark - 1.0).abs() < 1e-12);
        prop_assert!(no_click.p_bright >= 0.0 && no_click.p_dark >= 0.0);
        if x * (1.0 - f) > 0.0 {
            let click = posterior(Outcome::Click, x, f).unwrap();
            prop_assert!((click.p_bright + click.p_dark - 1.0).abs() < 1e-12);
            prop_assert_eq!(click.p_dark, 0.0);
        }
    }

    #[test]
    fn kernel_is_bounded_and_symmetric(l in 0usize..60, lp in 0usize..60, log_m in -4.0f64..4.0) {
        let m = 10f64.powf(log_m);
        let k = kernel_k(l, lp, m);
        prop_assert!(k > 0.0 && k <= 1.0);
        prop_assert!((k - kernel_k(lp, l, m)).abs() < 1e-15);
    }

    #[test]
    fn conditional_fidelity_monotone_in_coupling(
        n_bar in 0.5f64..10.0,
        log_m in -3.0f64..1.5,
        step in 0.1f64..2.0,
    ) {
        let n_max = truncation_dim(n_bar, 1e-12);
        let m_low = 10f64.powf(log_m);
        let m_high = 10f64.powf(log_m + step);
        let f_low = conditional_fidelity_sum(n_bar, m_low, n_max);
        let f_high = conditional_fidelity_sum(n_bar, m_high, n_max);
        prop_assert!(f_low > 0.0 && f_high < 1.0);
        prop_assert!(f_low <= f_high, "f({m_low}) = {f_low} > f({m_high}) = {f_high}");
    }

    #[test]
    fn coherent_husimi_is_gaussian(
        a_re in -1.5f64..1.5, a_im in -1.5f64..1.5,
        b_re in -1.5f64..1.5, b_im in -1.5f64..1.5,
    ) {
        let alpha = c(a_re, a_im);
        let beta = c(b_re, b_im);
        let n_max = truncation_dim(alpha.norm_sqr(), 1e-12) + 15;
        let rho = coherent_state(alpha, n_max).unwrap().projector().unwrap();
        let q = husimi_q_point(&rho, beta).unwrap();
        let expected = (-(alpha - beta).norm_sqr()).exp() / std::f64::consts::PI;
        prop_assert!((q - expected).abs() < 1e-8, "Q = {q}, expected {expected}");
    }

    #[test]
    fn shannon_matches_diagonal_von_neumann(raw in prop::collection::vec(0.05f64..1.0, 2..5)) {
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let classical = shannon_entropy(&probs).unwrap();
        let diag: Vec<C64> = probs.iter().map(|&p| c(p, 0.0)).collect();
        let state = DensityMatrix::new(
            DMatrix::from_diagonal(&DVector::from_vec(diag)),
            HilbertDims::new(&[probs.len()]).unwrap(),
        )
        .unwrap();
        let quantum = von_neumann_entropy(&state).unwrap();
        prop_assert!((classical - quantum).abs() < 1e-10);
    }
}
