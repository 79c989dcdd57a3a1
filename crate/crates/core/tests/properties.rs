use kamforge_core::covering::{normalize_resonance, project_point, CoverPoint, CoveringData, DeckMap};
use kamforge_core::diophantine::{dioph_check, DiophantineSpec};
use kamforge_core::fourier::{FourierField, C64};
use kamforge_core::homological::{self, NormalLinear};
use kamforge_core::linalg::Tolerances;
use kamforge_core::models::{planar_integrable, linspace};
use kamforge_core::nondegen::bht_i;
use kamforge_core::poly::Poly;
use kamforge_core::presets;
use kamforge_core::revlin::{
    adjoint_matrix, jordan_chevalley, lcu, normal_frequencies, transversality, Parity, ReversingStructure, StructuredMatrix,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn structure(p: usize) -> ReversingStructure {
    let mut s = vec![1.0; p];
    s.extend(vec![-1.0; p]);
    ReversingStructure::diagonal(&s).unwrap()
}

fn square(q: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, q * q).prop_map(move |v| DMatrix::from_row_slice(q, q, &v))
}

fn minus_matrix() -> impl Strategy<Value = (ReversingStructure, StructuredMatrix)> {
    (1usize..=3).prop_flat_map(|p| {
        square(2 * p).prop_map(move |m| {
            let st = structure(p);
            let om = st.project(&m, Parity::Minus);
            let om = StructuredMatrix::minus(om, &st).unwrap();
            (st, om)
        })
    })
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_is_antisymmetric((st, om) in minus_matrix(), seed in square(6)) {
        let q = st.dim();
        let a = st.project(&seed.view((0, 0), (q, q)).into_owned(), Parity::Plus);
        let a_s = StructuredMatrix::new(a.clone(), Parity::Plus, &st, &Tolerances::default()).unwrap();
        let lhs = adjoint_matrix(&a_s, Parity::Minus, &st).unwrap() * st.gl_coords(&om.entries, Parity::Minus);
        let rhs = adjoint_matrix(&om, Parity::Plus, &st).unwrap() * st.gl_coords(&a, Parity::Plus);
        prop_assert!((lhs + rhs).amax() < 1e-12);
    }

    #[test]
    fn jordan_chevalley_parts((st, om) in minus_matrix()) {
        let tol = Tolerances::default();
        let jc = jordan_chevalley(&om, &st, &tol).unwrap();
        let s = &jc.semisimple.entries;
        let n = &jc.nilpotent.entries;
        let scale = 1.0 + max_abs(&om.entries);
        prop_assert!(max_abs(&(s + n - &om.entries)) < 1e-9 * scale);
        prop_assert!(max_abs(&(s * n - n * s)) < 1e-9 * scale * scale);
        let mut pow = n.clone();
        for _ in 1..st.dim() {
            pow = &pow * n;
        }
        prop_assert!(max_abs(&pow) < 1e-9);
        prop_assert!(max_abs(&(s * st.r() + st.r() * s)) < 1e-9 * scale);
        prop_assert!(max_abs(&(n * st.r() + st.r() * n)) < 1e-9 * scale);
    }

    #[test]
    fn lcu_is_transverse((st, om) in minus_matrix()) {
        let tol = Tolerances::default();
        let unf = lcu(&om, &st, &tol).unwrap();
        let rep = transversality(&unf, &st, &tol).unwrap();
        prop_assert!(rep.holds);
        prop_assert_eq!(rep.image_rank + rep.codimension, 2 * st.p() * st.p());
        for d in &unf.directions {
            prop_assert!(max_abs(&(&d.entries * st.r() + st.r() * &d.entries)) < 1e-12);
        }
    }

    #[test]
    fn frequencies_are_conjugation_invariant((st, om) in minus_matrix(), seed in square(6)) {
        let q = st.dim();
        let a = DMatrix::identity(q, q) + 0.2 * st.project(&seed.view((0, 0), (q, q)).into_owned(), Parity::Plus);
        let inv = a.clone().try_inverse().unwrap();
        let conj = StructuredMatrix::minus(&a * &om.entries * inv, &st).unwrap();
        let f0 = normal_frequencies(&om);
        let f1 = normal_frequencies(&conj);
        for (x, y) in f0.iter().zip(&f1) {
            prop_assert!((x - y).abs() < 1e-6 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn bht_i_is_conjugation_invariant((st, om) in minus_matrix(), d in prop::collection::vec(0.5f64..2.0, 6)) {
        // positive diagonal matrices commute with diagonal R
        let q = st.dim();
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&d[..q]));
        let inv = a.clone().try_inverse().unwrap();
        let conj = StructuredMatrix::minus(&a * &om.entries * inv, &st).unwrap();
        let tol = Tolerances::default();
        prop_assert_eq!(bht_i(&om, &st, &tol).unwrap().verdict, bht_i(&conj, &st, &tol).unwrap().verdict);
    }

    #[test]
    fn diophantine_margin_is_sign_and_order_invariant(w in 0.1f64..3.0, a in prop::collection::vec(0.1f64..3.0, 3)) {
        let spec = DiophantineSpec::new(1e-4, 1.5, 12);
        let v = dioph_check(&[1.0, w], &a, &spec).unwrap();
        let neg = dioph_check(&[-1.0, -w], &[-a[0], -a[1], -a[2]], &spec).unwrap();
        let perm = dioph_check(&[1.0, w], &[a[2], a[0], a[1]], &spec).unwrap();
        prop_assert_eq!(v.margin, neg.margin);
        prop_assert!((v.margin - perm.margin).abs() <= 1e-15 * (1.0 + v.margin));
        for g in [1e-6, 1e-4, 1e-2] {
            let tight = dioph_check(&[1.0, w], &a, &DiophantineSpec::new(g, 1.5, 12)).unwrap();
            prop_assert_eq!(tight.satisfied, v.margin >= g);
        }
    }

    #[test]
    fn resonance_normalization_preserves_pairing(k in prop::collection::vec(-30i64..30, 2..4), w in prop::collection::vec(-2.0f64..2.0, 4)) {
        prop_assume!(k.iter().any(|&v| v != 0));
        let (t, k1) = normalize_resonance(&k).unwrap();
        prop_assert_eq!(t.det().unwrap().abs(), 1);
        let w = &w[..k.len()];
        let kt = t.covector(&k);
        prop_assert_eq!(kt[0], k1);
        prop_assert!(kt[1..].iter().all(|&v| v == 0));
        let lhs: f64 = k.iter().zip(w).map(|(&a, b)| a as f64 * b).sum();
        let rhs: f64 = kt.iter().zip(t.frequency(w)).map(|(&a, b)| a as f64 * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn projection_is_deck_invariant(x in 0.0f64..20.0, zeta in prop::collection::vec(-1.0f64..1.0, 4), sheet in 0i64..2) {
        let cov = CoveringData::new(2, vec![1, 2], 1, 2);
        let deck = DeckMap { l: 2, s: cov.deck_matrix(2) };
        let q = CoverPoint { sheet, x: vec![x, 0.3], y: vec![0.1], zeta };
        prop_assert_eq!(project_point(&cov, &deck, &q), project_point(&cov, &deck, &deck.apply(&q)));
    }

    #[test]
    fn localization_preserves_reversibility(nu in -1.0f64..1.0, c in -1.0f64..1.0) {
        let st = presets::planar_structure();
        let mut f = Poly::constant(3, 2.0);
        f.add_term(&[1, 0, 2], c);
        let mut g = Poly::zero(3);
        g.add_term(&[1, 1, 0], 0.5);
        let h1 = Poly::linear(3, 2, 1.0);
        let mut h2 = Poly::linear(3, 1, -0.7);
        h2.add_term(&[2, 1, 0], c);
        let x = kamforge_core::models::IntegrableField::new((1, 1, 1), vec![f], vec![g], vec![h1, h2], st).unwrap();
        let l = x.localize(&[nu]).unwrap();
        prop_assert!(l.reversibility_defect() < 1e-12);
        l.validate().unwrap();
    }

    #[test]
    fn dominant_part_ignores_the_scaling(eps in 1e-4f64..1.0, mu in -1.0f64..1.0) {
        let mut hbar = Poly::linear(2, 0, mu);
        hbar.add_term(&[3, 0], -1.0);
        hbar.add_term(&[1, 1], 0.4);
        let x = planar_integrable(0.6, &hbar).unwrap();
        let a = x.scaled(eps).dominant_part();
        let b = x.dominant_part();
        prop_assert_eq!(&a.omega, &b.omega);
        prop_assert!((a.floquet - b.floquet).amax() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn homological_solution_is_equivariant(seed in prop::collection::vec(-1.0f64..1.0, 9 * 16)) {
        let st = presets::double_resonance_structure();
        let om = StructuredMatrix::minus(presets::double_resonance_omega(0.2, -0.3), &st).unwrap();
        let base = StructuredMatrix::minus(presets::double_resonance_omega(0.0, 0.0), &st).unwrap();
        let unf = lcu(&base, &st, &Tolerances::default()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let nx = NormalLinear::new(vec![1.0, phi], om, unf, st.clone()).unwrap();
        let mut rhs = FourierField::zero(2, 1, 2, 1);
        let mut it = seed.iter().copied();
        for k in [[0i64, 0], [1, 0], [0, 1], [1, -1]] {
            let j = rhs.mode_mut(&k);
            for b in j.blocks_mut() {
                for v in b.iter_mut() {
                    *v = C64::new(it.next().unwrap_or(0.3), it.next().unwrap_or(-0.2));
                }
            }
        }
        let rhs = rhs.symmetrize_reality();
        let mut rev = rhs.reversal_image(st.r()).scaled(C64::new(-0.5, 0.0));
        rev.axpy(C64::new(0.5, 0.0), &rhs).unwrap();
        let s = homological::solve(&nx, &rev, &DiophantineSpec::new(0.01, 1.5, 1), &Tolerances::default()).unwrap();
        prop_assert!(s.residual <= 1e-10 * rev.norm(0.0));
        prop_assert!(s.psi.equivariance_defect(st.r()).norm(0.0) < 1e-10);
        // conjugate-symmetric input gives the same residual
        prop_assert!((homological::residual(&nx, &s, &rev.symmetrize_reality()).unwrap() - s.residual).abs() < 1e-13);
    }
}

#[test]
fn sweep_grid_is_symmetric() {
    let g = linspace(-0.5, 0.5, 21);
    assert_eq!(g.len(), 21);
    assert_eq!(g[10], 0.0);
    assert_eq!(g[0], -0.5);
    assert_eq!(g[20], 0.5);
}
