mod common;

use common::*;
use hessquot::compound::{
    additive_compound, f_gradient, f_value, f_value_spectral, lambda_gradient, lambda_quotient, regime_constants,
    OperatorSignature,
};
use hessquot::SymMatrix;
use proptest::prelude::*;

const SIGNATURES: [(usize, usize, usize, usize); 8] = [
    (2, 1, 2, 0),
    (3, 1, 3, 1),
    (3, 2, 2, 0),
    (3, 2, 2, 1),
    (3, 2, 3, 0),
    (4, 2, 3, 1),
    (4, 3, 3, 0),
    (5, 2, 4, 2),
];

fn signature() -> impl Strategy<Value = OperatorSignature> {
    (0..SIGNATURES.len()).prop_map(|i| {
        let (n, p, k, l) = SIGNATURES[i];
        sig(n, p, k, l)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compound_spectrum_is_p_sums(n in 2usize..=6, p_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let p = 1 + ((n - 1) as f64 * p_frac) as usize;
        let p = p.min(n - 1);
        let mut rng = rng(seed);
        let a = random_sym(&mut rng, n, 2.0);
        let got = eig_oracle(&additive_compound(&a, p).unwrap());
        let mut want = p_sums(&eig_oracle(&a), p);
        want.sort_by(|x, y| y.total_cmp(x));
        let tol = 1e-9 * (1.0 + a.norm_inf());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= tol);
        }
    }

    #[test]
    fn operator_gradient_is_positive_definite(s in signature(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let a = admissible_matrix(&mut rng, &s);
        let g = f_gradient(&a, &s).unwrap();
        prop_assert!(eig_oracle(&g).iter().all(|&e| e > 0.0));
    }

    #[test]
    fn eigenvalue_gradient_ordering(s in signature(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mut lam = admissible_lambda(&mut rng, &s);
        lam.sort_by(|x, y| y.total_cmp(x));
        let g = f_gradient(&SymMatrix::from_diagonal(&lam), &s).unwrap();
        let d = g.diagonal();
        for i in 1..d.len() {
            prop_assert!(d[i] >= d[i - 1] - 1e-12 * (1.0 + d[i].abs()), "{d:?}");
        }
        let lg = lambda_gradient(&lam, &s).unwrap();
        for (a, b) in lg.iter().zip(&d) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn eigenvalue_gradient_sum_bound(s in signature(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let lam = admissible_lambda(&mut rng, &s);
        let g = f_gradient(&SymMatrix::from_diagonal(&lam), &s).unwrap();
        prop_assert!(g.trace() >= regime_constants(&s) - 1e-10);
    }

    #[test]
    fn concave_in_eigenvalues(s in signature(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let a = admissible_lambda(&mut rng, &s);
        let b = admissible_lambda(&mut rng, &s);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let fm = lambda_quotient(&mid, &s).unwrap();
        let avg = 0.5 * (lambda_quotient(&a, &s).unwrap() + lambda_quotient(&b, &s).unwrap());
        prop_assert!(fm >= avg - 1e-12 * (1.0 + avg));
    }

    #[test]
    fn degree_one_homogeneous(s in signature(), seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = rng(seed);
        let a = admissible_matrix(&mut rng, &s);
        let f = f_value(&a, &s).unwrap();
        prop_assert!((f_value(&a.scaled(c), &s).unwrap() - c * f).abs() <= 1e-12 * c * f.max(1.0) * 10.0);
    }

    #[test]
    fn frame_invariance(s in signature(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let a = admissible_matrix(&mut rng, &s);
        let q = random_rotation(&mut rng, s.n);
        let b = from_na(&(&q * to_na(&a) * q.transpose()));
        let (fa, fb) = (f_value(&a, &s).unwrap(), f_value(&b, &s).unwrap());
        prop_assert!((fa - fb).abs() <= 1e-10 * (1.0 + fa));
    }

    #[test]
    fn compound_and_spectral_paths_agree(s in signature(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let a = admissible_matrix(&mut rng, &s);
        let f = f_value(&a, &s).unwrap();
        prop_assert!((f - f_value_spectral(&a, &s).unwrap()).abs() <= 1e-10 * (1.0 + f));
        let lam = eig_oracle(&a);
        let oracle = quotient_enum(&p_sums(&lam, s.p), s.k, s.l);
        prop_assert!((f - oracle).abs() <= 1e-9 * (1.0 + f));
    }

    #[test]
    fn gradient_matches_finite_differences(s in signature(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let a = admissible_matrix(&mut rng, &s);
        let g = f_gradient(&a, &s).unwrap();
        let eps = 1e-6;
        for i in 0..s.n {
            for j in i..s.n {
                let (mut up, mut dn) = (a.clone(), a.clone());
                up.set(i, j, a.get(i, j) + eps);
                dn.set(i, j, a.get(i, j) - eps);
                let fd = (f_value(&up, &s).unwrap() - f_value(&dn, &s).unwrap()) / (2.0 * eps);
                // a symmetric perturbation of (i,j) moves both entries
                let want = if i == j { g.get(i, i) } else { 2.0 * g.get(i, j) };
                prop_assert!((fd - want).abs() <= 1e-6 * (1.0 + want.abs()), "({i},{j}) {fd} vs {want}");
            }
        }
    }
}
