//! Randomised invariants. Instances are drawn from seeded generators so a
//! shrunk counterexample is just a seed.

use matcert::geometric_mean::{cross, geometric_mean, CrossMethod, DirectionPair, MeanPair};
use matcert::lieb_concavity::{enumerate_paths, DyadicExponent};
use matcert::linalg::{
    entropy_bits, expectation, kron, matrix_function, operator_norm, pairing, partial_trace, sylvester_solve,
    vec_embed, Hermitian, Matrix, PositiveDefinite,
};
use matcert::power_perturbation::first_order;
use matcert::random;
use matcert::relative_entropy::relent;
use matcert::ssa::twirl_family;
use num_complex::Complex;
use num_rational::Rational64;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

/// `Tr M`, summed by hand.
fn trace(m: &Matrix<f64>) -> Complex<f64> {
    (0..m.rows()).map(|i| m[(i, i)]).sum()
}

fn unitary(seed: u64, n: usize) -> Matrix<f64> {
    // exp(iH) from the spectral decomposition of a Gaussian Hermitian H.
    let h = random::gaussian_hermitian::<f64>(&mut random::rng(seed), n);
    let spec = h.eig().unwrap();
    let d = Matrix::from_fn(n, n, |i, j| if i == j { Complex::from_polar(1.0, spec.values[i]) } else { Complex::new(0.0, 0.0) });
    spec.vectors.matmul(&d).matmul(&spec.vectors.adjoint())
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn trace_pairing_matches_vectorisation(seed in any::<u64>(), n in 2usize..=4, m in 2usize..=4) {
        let mut rng = random::rng(seed);
        let k = random::gaussian_matrix::<f64>(&mut rng, n, m);
        let a = random::gaussian_hermitian::<f64>(&mut rng, n);
        let b = random::gaussian_hermitian::<f64>(&mut rng, m);
        let direct = trace(&k.adjoint().matmul(a.matrix()).matmul(&k).matmul(b.matrix()));
        let paired = expectation(&vec_embed(&k), &pairing(a.matrix(), b.matrix()));
        let scale = k.frobenius_norm().powi(2) * a.norm() * b.norm();
        prop_assert!((direct - paired).norm() <= 1e-11 * scale);
    }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn partial_trace_is_linear_trace_and_positivity_preserving(seed in any::<u64>(), da in 1usize..=3, db in 1usize..=3, dc in 1usize..=2) {
        let mut rng = random::rng(seed);
        let n = da * db * dc;
        let dims = [da, db, dc];
        let x = random::density::<f64>(&mut rng, n).unwrap();
        let y = random::density::<f64>(&mut rng, n).unwrap();
        let (s, t) = (0.3, -1.7);
        for traced in [&[0usize][..], &[2], &[0, 2], &[1]] {
            let px = partial_trace(x.matrix(), &dims, traced).unwrap();
            let py = partial_trace(y.matrix(), &dims, traced).unwrap();
            let combo = partial_trace(&(x.matrix().scale(s) + y.matrix().scale(t)), &dims, traced).unwrap();
            prop_assert!(combo.max_abs_diff(&(px.scale(s) + py.scale(t))) <= 1e-14);
            prop_assert!((trace(&px) - Complex::new(1.0, 0.0)).norm() <= 1e-13);
            prop_assert!(Hermitian::new(px).unwrap().min_eigenvalue().unwrap() >= -1e-14);
        }
    }

    #[test]
    fn partial_trace_of_product_is_the_factor(seed in any::<u64>(), da in 1usize..=3, db in 1usize..=3) {
        let mut rng = random::rng(seed);
        let a = random::density::<f64>(&mut rng, da).unwrap();
        let b = random::density::<f64>(&mut rng, db).unwrap();
        let ab = kron(a.matrix(), b.matrix());
        prop_assert!(partial_trace(&ab, &[da, db], &[1]).unwrap().max_abs_diff(a.matrix()) <= 1e-14);
        prop_assert!(partial_trace(&ab, &[da, db], &[0]).unwrap().max_abs_diff(b.matrix()) <= 1e-14);
    }

    #[test]
    fn operator_norm_is_largest_absolute_eigenvalue(seed in any::<u64>(), n in 1usize..=6) {
        let h = random::gaussian_hermitian::<f64>(&mut random::rng(seed), n);
        let spec = h.eig().unwrap();
        let top = spec.values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        prop_assert!((operator_norm(h.matrix()).unwrap() - top).abs() <= 1e-12 * top);
        // Every column of the eigenbasis is stretched by at most the norm.
        for j in 0..n {
            let v: Vec<_> = (0..n).map(|i| spec.vectors[(i, j)]).collect();
            let hv = h.matrix().matvec(&v);
            let len = hv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((len - spec.values[j].abs()).abs() <= 1e-12 * (1.0 + top));
        }
    }

    #[test]
    fn sylvester_residual_and_positivity(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = random::rng(seed);
        let y = random::positive_definite::<f64>(&mut rng, n, 1.0).unwrap();
        let g = random::gaussian_matrix::<f64>(&mut rng, n, n);
        let omega = Hermitian::symmetrized(g.matmul(&g.adjoint()));
        let x = sylvester_solve(&y, &omega).unwrap();
        let residual = y.matrix().matmul(x.matrix()) + x.matrix().matmul(y.matrix()) - omega.matrix().clone();
        prop_assert!(operator_norm(&residual).unwrap() <= 1e-12 * (1.0 + omega.norm()));
        prop_assert!(x.min_eigenvalue().unwrap() >= -1e-12 * x.norm());
    }

    #[test]
    fn matrix_functions_compose(seed in any::<u64>(), n in 1usize..=5) {
        let p = random::positive_definite::<f64>(&mut random::rng(seed), n, 1.0).unwrap();
        let logged = matrix_function(p.hermitian(), f64::ln).unwrap();
        let back = matrix_function(&logged, f64::exp).unwrap();
        prop_assert!(back.matrix().max_abs_diff(p.matrix()) <= 1e-10 * p.max_eigenvalue());
        let root = matrix_function(p.hermitian(), f64::sqrt).unwrap();
        prop_assert!(root.matrix().matmul(root.matrix()).max_abs_diff(p.matrix()) <= 1e-10 * p.max_eigenvalue());
        let cube = matrix_function(p.hermitian(), |x| x.powi(3)).unwrap();
        let direct = p.matrix().matmul(p.matrix()).matmul(p.matrix());
        prop_assert!(cube.matrix().max_abs_diff(&direct) <= 1e-10 * p.max_eigenvalue().powi(3));
    }

    #[test]
    fn cross_is_positive_semidefinite(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = random::rng(seed);
        let a = random::positive_definite::<f64>(&mut rng, n, 1.0).unwrap();
        let b = random::positive_definite::<f64>(&mut rng, n, 1.0).unwrap();
        let x = random::gaussian_hermitian::<f64>(&mut rng, n);
        let z = random::gaussian_hermitian::<f64>(&mut rng, n);
        let c = cross(&MeanPair::new(a, b).unwrap(), &DirectionPair::new(x, z).unwrap(), CrossMethod::ClosedForm).unwrap();
        prop_assert!(c.min_eigenvalue().unwrap() >= -1e-10 * (1.0 + c.norm()));
    }

    #[test]
    fn cross_quadrature_agrees_with_closed_form(seed in any::<u64>(), n in 2usize..=3) {
        let mut rng = random::rng(seed);
        let a = random::positive_definite::<f64>(&mut rng, n, 0.5).unwrap();
        let b = random::positive_definite::<f64>(&mut rng, n, 0.5).unwrap();
        let dirs = DirectionPair::new(random::direction(&mut rng, n, 1.0), random::direction(&mut rng, n, 1.0)).unwrap();
        let pair = MeanPair::new(a, b).unwrap();
        let exact = cross(&pair, &dirs, CrossMethod::ClosedForm).unwrap();
        let quad = cross(&pair, &dirs, CrossMethod::Quadrature { nodes: 200 }).unwrap();
        prop_assert!(exact.matrix().max_abs_diff(quad.matrix()) <= 1e-9 * (1.0 + exact.norm()));
    }

    #[test]
    fn geometric_mean_is_the_maximal_block_entry(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = random::rng(seed);
        let a = random::positive_definite::<f64>(&mut rng, n, 1.0).unwrap();
        let b = random::positive_definite::<f64>(&mut rng, n, 1.0).unwrap();
        let m = geometric_mean(&MeanPair::new(a.clone(), b.clone()).unwrap()).unwrap();
        let block = |s: f64| {
            let off = m.matrix().scale(s);
            Hermitian::symmetrized(Matrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
                (true, true) => a.matrix()[(i, j)],
                (false, false) => b.matrix()[(i - n, j - n)],
                (true, false) => off[(i, j - n)],
                (false, true) => off[(i - n, j)],
            }))
        };
        let scale = a.max_eigenvalue() + b.max_eigenvalue();
        prop_assert!(block(1.0).min_eigenvalue().unwrap() >= -1e-10 * scale);
        prop_assert!(block(1.0 + 1e-3).min_eigenvalue().unwrap() < 0.0);
        // Riccati characterisation: M B⁻¹ M = A.
        let riccati = m.matrix().matmul(b.inverse().matrix()).matmul(m.matrix());
        prop_assert!(riccati.max_abs_diff(a.matrix()) <= 1e-10 * scale);
    }

    #[test]
    fn first_order_is_lipschitz_in_the_exponent(seed in any::<u64>(), n in 1usize..=4, num in 1u64..16) {
        let mut rng = random::rng(seed);
        let l = random::positive_definite::<f64>(&mut rng, n, 1.0).unwrap();
        let f = random::direction::<f64>(&mut rng, n, 1.0);
        let q0 = num as f64 / 16.0;
        let base = first_order(&l, &f, q0).unwrap();
        let mut ratios = Vec::new();
        for d in [1e-2, 1e-3, 1e-4] {
            let moved = first_order(&l, &f, q0 + d).unwrap();
            ratios.push(operator_norm(&(moved.matrix() - base.matrix())).unwrap() / d);
        }
        prop_assert!(ratios.iter().all(|r| r.is_finite()));
        // The difference quotient settles to the derivative in q.
        prop_assert!((ratios[1] - ratios[2]).abs() <= 0.05 * (1.0 + ratios[2]));
    }

    #[test]
    fn relative_entropy_is_unitarily_invariant(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = random::rng(seed);
        let a = random::density::<f64>(&mut rng, n).unwrap();
        let b = random::density::<f64>(&mut rng, n).unwrap();
        let u = unitary(seed ^ 0x5eed, n);
        let rot = |p: &PositiveDefinite<f64>| PositiveDefinite::new(Hermitian::symmetrized(p.matrix().conjugate_by(&u))).unwrap();
        let s = relent(&a, &b).unwrap();
        let s_rot = relent(&rot(&a), &rot(&b)).unwrap();
        prop_assert!((s - s_rot).abs() <= 1e-11 * (1.0 + s.abs()));
        prop_assert!(s >= -1e-12);
    }

    #[test]
    fn entropy_is_unitarily_invariant_and_bounded(seed in any::<u64>(), n in 1usize..=5) {
        let rho = random::density::<f64>(&mut random::rng(seed), n).unwrap();
        let u = unitary(seed.wrapping_add(1), n);
        let s = entropy_bits(rho.hermitian()).unwrap();
        let s_rot = entropy_bits(&Hermitian::symmetrized(rho.matrix().conjugate_by(&u))).unwrap();
        prop_assert!((s - s_rot).abs() <= 1e-11);
        prop_assert!(s >= -1e-12 && s <= (n as f64).log2() + 1e-12);
    }

    #[test]
    fn twirl_averages_to_the_normalised_trace(seed in any::<u64>(), n in 2usize..=3) {
        let fam = twirl_family::<f64>(n).unwrap();
        let m = random::gaussian_matrix::<f64>(&mut random::rng(seed), n, n);
        let avg = fam.average(&m).unwrap();
        let target = Matrix::identity(n).scale_complex(trace(&m) / n as f64);
        prop_assert!(avg.max_abs_diff(&target) <= 1e-12 * (1.0 + m.max_abs()));
    }

    #[test]
    fn signed_paths_reach_their_target(l1 in 0u64..=16, l2 in 0u64..=16) {
        let from = DyadicExponent::reduced(l1, 4).unwrap();
        let to = DyadicExponent::reduced(l2, 4).unwrap();
        for path in enumerate_paths(from, to) {
            prop_assert_eq!(from.ratio() - path.displacement(), to.ratio());
            prop_assert!(path.displacement() != Rational64::from_integer(0) || from == to);
        }
    }
}

#[test]
fn twirl_family_is_unitary_and_ordered() {
    for n in 2..=3 {
        let fam = twirl_family::<f64>(n).unwrap();
        let perms: usize = (1..=n).product();
        assert_eq!(fam.len(), perms << n);
        assert!(fam.unitarity_defect() <= 1e-15);
        assert_eq!(fam.unitaries()[0].max_abs_diff(&Matrix::identity(n)), 0.0);
    }
}
