//! Randomized invariant checks for the core numeric operations.

use lemcpd::graphseq::{frobenius_distance, GraphSequence, GraphSnapshot};
use lemcpd::lemcore::{
    adaptive_weights, objective, update_a, update_b, update_c, update_u, update_v, HyperParams,
    LatentState, LongTermGuide,
};
use lemcpd::spectral::{combine_score, laplacian_undirected, spectrum, SpectrumSignature};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix_strategy(n: usize, m: usize, max: f64) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(0.0..max, n * m)
        .prop_map(move |vals| DMatrix::from_vec(n, m, vals))
}

fn positive_matrix_strategy(n: usize, m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(1e-3..2.0, n * m)
        .prop_map(move |vals| DMatrix::from_vec(n, m, vals))
}

fn snap(t: i64, w: DMatrix<f64>) -> GraphSnapshot {
    GraphSnapshot::new(t, w, true)
}

proptest! {
    #[test]
    fn frobenius_distance_is_a_metric(
        a in matrix_strategy(4, 4, 3.0),
        b in matrix_strategy(4, 4, 3.0),
        c in matrix_strategy(4, 4, 3.0),
    ) {
        let (sa, sb, sc) = (snap(0, a), snap(0, b), snap(0, c));
        let dab = frobenius_distance(&sa, &sb).unwrap();
        let dba = frobenius_distance(&sb, &sa).unwrap();
        let daa = frobenius_distance(&sa, &sa).unwrap();
        let dac = frobenius_distance(&sa, &sc).unwrap();
        let dcb = frobenius_distance(&sc, &sb).unwrap();
        prop_assert!(dab >= 0.0);
        prop_assert!((dab - dba).abs() < 1e-12);
        prop_assert_eq!(daa, 0.0);
        prop_assert!(dab <= dac + dcb + 1e-9);
    }

    #[test]
    fn adaptive_weights_form_a_distribution(
        ws in proptest::collection::vec(matrix_strategy(3, 3, 2.0), 2..6),
    ) {
        let snaps: Vec<_> = ws.into_iter().enumerate()
            .map(|(t, w)| snap(t as i64, w))
            .collect();
        let seq = GraphSequence::new(snaps).unwrap();
        let r = adaptive_weights(&seq).unwrap();
        prop_assert!(r.iter().all(|&x| x > 0.0));
        prop_assert!((r.sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn updates_preserve_nonnegativity_and_descent(
        g0 in positive_matrix_strategy(3, 3),
        g1 in positive_matrix_strategy(3, 3),
        u0 in positive_matrix_strategy(3, 2),
        u1 in positive_matrix_strategy(3, 2),
        v0 in positive_matrix_strategy(2, 3),
        v1 in positive_matrix_strategy(2, 3),
        c in positive_matrix_strategy(2, 2),
        a in positive_matrix_strategy(2, 2),
        b in positive_matrix_strategy(3, 3),
        u_lt in positive_matrix_strategy(3, 2),
        v_lt in positive_matrix_strategy(2, 3),
    ) {
        let seq = GraphSequence::new(vec![snap(0, g0), snap(1, g1)]).unwrap();
        let state = LatentState { u: vec![u0, u1], v: vec![v0, v1], c, a, b };
        let guide = LongTermGuide {
            u_lt,
            v_lt,
            r: DVector::from_element(8, 0.125),
        };
        let hp = HyperParams { k: 2, window: 2, lambda1: 0.5, lambda2: 8.0, ..Default::default() };
        let before = objective(&seq, &state, &guide, &hp).unwrap().total;

        let mut s = state.clone();
        update_u(&mut s, &seq, &guide, &hp, 1).unwrap();
        update_v(&mut s, &seq, &guide, &hp, 0).unwrap();
        update_a(&mut s, &guide, &hp).unwrap();
        update_b(&mut s, &guide, &hp).unwrap();
        update_c(&mut s, &seq, &hp).unwrap();
        prop_assert!(s.is_nonnegative());
        let after = objective(&seq, &s, &guide, &hp).unwrap().total;
        prop_assert!(after.is_finite());
        prop_assert!(after <= before * (1.0 + 1e-7));
    }

    #[test]
    fn scores_bounded(
        x in proptest::collection::vec(0.0..5.0f64, 4),
        y in proptest::collection::vec(0.0..5.0f64, 4),
        alpha in 0.0..=1.0f64,
    ) {
        let sx = SpectrumSignature::from_values(DVector::from_vec(x));
        let sy = SpectrumSignature::from_values(DVector::from_vec(y));
        let z1 = lemcpd::spectral::score_z1(&sx, &sy);
        let z2 = lemcpd::spectral::score_z2(&sx, &sy);
        prop_assert!((0.0..=1.0).contains(&z1));
        prop_assert!((0.0..=1.0).contains(&z2));
        let z = combine_score(z1, z2, alpha).unwrap();
        prop_assert!((0.0..=1.0).contains(&z));
    }

    #[test]
    fn laplacian_spectrum_bounded_and_nonnegative(
        w in matrix_strategy(5, 5, 2.0),
    ) {
        let sym = (&w + w.transpose()) * 0.5;
        let g = GraphSnapshot::new(0, sym, false);
        let sig = spectrum(&laplacian_undirected(&g));
        prop_assert!(sig.values().iter().all(|&s| s >= 0.0));
        prop_assert!(sig.values()[0] <= 2.0 + 1e-9);
        for i in 1..sig.len() {
            prop_assert!(sig.values()[i - 1] >= sig.values()[i]);
        }
    }
}
