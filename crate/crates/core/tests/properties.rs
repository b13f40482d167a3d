mod common;

use nestderiv::algebra::complement;
use nestderiv::chain::{chain_family, normalize_chain};
use nestderiv::construct::{
    build_b, build_c2, build_c2_with_basis, choice_gauge, verify, ConstructionChoices, VerifyOptions,
};
use nestderiv::linalg::{distance_to_scalars, op_norm, rank_one, scalar_identity_part};
use nestderiv::random;
use nestderiv::{CMatrix, CScalar, CVector, DerivationTable, NestAlgebra};
use proptest::prelude::*;
use rand::Rng;

fn norm(a: &CMatrix) -> f64 {
    op_norm(a, 1e-14)
}

fn unit_vector(seed: u64, n: usize) -> CVector {
    random::unit_vector_in(&mut random::rng(seed), n, 0..n)
}

/// A random chain on `n` with at least one interior level.
fn reducible_algebra(seed: u64, n: usize) -> NestAlgebra {
    let mut rng = random::rng(seed);
    loop {
        let alg = NestAlgebra::new(n, random::random_chain(&mut rng, n)).unwrap();
        if !alg.interior_levels().is_empty() {
            return alg;
        }
    }
}

fn inner_table(alg: &NestAlgebra, seed: u64) -> (DerivationTable, CMatrix) {
    let c = random::gaussian_matrix(&mut random::rng(seed), alg.dim());
    let table = DerivationTable::inner_from(alg.clone(), &c).unwrap().into_validated().unwrap();
    (table, c)
}

fn random_choices(alg: &NestAlgebra, seed: u64) -> ConstructionChoices {
    let mut rng = random::rng(seed ^ 0x00c0_ffee);
    let k = rng.random_range(alg.interior_levels());
    let d = alg.chain()[k - 1];
    let n = alg.dim();
    ConstructionChoices::standard(alg, k, rng.random_range(0..n - d), rng.random_range(0..d)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_one_composition(seed in any::<u64>(), n in 1usize..8) {
        let (xi1, xi2, eta) = (unit_vector(seed, n), unit_vector(seed + 1, n), unit_vector(seed + 2, n));
        let lhs = &rank_one(&eta, &xi2).unwrap() * &rank_one(&xi1, &eta).unwrap();
        let rhs = rank_one(&xi1, &xi2).unwrap();
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12);
    }

    #[test]
    fn rank_one_adjoint_swaps(seed in any::<u64>(), n in 1usize..8) {
        let (xi, eta) = (unit_vector(seed, n), unit_vector(seed + 1, n));
        let lhs = rank_one(&xi, &eta).unwrap().adjoint();
        prop_assert!((&lhs - &rank_one(&eta, &xi).unwrap()).max_abs() <= 1e-14);
        // (xi ⊗ eta) zeta = <zeta, xi> eta.
        let zeta = unit_vector(seed + 2, n);
        let applied = rank_one(&xi, &eta).unwrap().apply(&zeta);
        prop_assert!((0..n).all(|i| (applied[i] - zeta.inner(&xi) * eta[i]).norm() <= 1e-14));
    }

    #[test]
    fn adjoint_is_an_involution(seed in any::<u64>(), n in 1usize..9) {
        let a = random::gaussian_matrix(&mut random::rng(seed), n);
        prop_assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn op_norm_is_submultiplicative_and_unitarily_invariant(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = random::rng(seed);
        let a = random::gaussian_matrix(&mut rng, n);
        let b = random::gaussian_matrix(&mut rng, n);
        let (na, nb) = (norm(&a), norm(&b));
        prop_assert!(norm(&(&a * &b)) <= na * nb * (1.0 + 1e-9));
        let u = random::random_unitary(&mut rng, n);
        let v = random::random_unitary(&mut rng, n);
        prop_assert!((norm(&(&(&u * &a) * &v)) - na).abs() <= 1e-9 * na);
        prop_assert!(na <= a.frobenius_norm() * (1.0 + 1e-12));
        prop_assert!((0..n).all(|j| a.column(j).norm() <= na * (1.0 + 1e-12)));
    }

    #[test]
    fn distance_to_scalars_brackets(seed in any::<u64>(), n in 2usize..7) {
        let c = random::gaussian_matrix(&mut random::rng(seed), n);
        let r = distance_to_scalars(&c, 1e-12);
        // Never worse than the trace start, and attained at the reported lambda.
        let (_, at_trace) = scalar_identity_part(&c, 1e-14);
        prop_assert!(r.distance <= at_trace * (1.0 + 1e-12));
        prop_assert!((norm(&(&c - &CMatrix::scalar(n, r.lambda))) - r.distance).abs() <= 1e-12 * r.distance.max(1.0));
        // ||c - lambda I|| dominates every off-diagonal entry and half of every diagonal spread.
        for i in 0..n {
            for j in 0..n {
                let bound = if i == j { 0.0 } else { c[(i, j)].norm() };
                let spread = (c[(i, i)] - c[(j, j)]).norm() / 2.0;
                prop_assert!(r.distance >= bound.max(spread) * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn inner_tables_ignore_scalar_shifts(seed in any::<u64>(), n in 2usize..7, re in -5.0f64..5.0, im in -5.0f64..5.0) {
        let alg = reducible_algebra(seed, n);
        let (table, c) = inner_table(&alg, seed);
        let shifted = &c + &CMatrix::scalar(n, CScalar::new(re, im));
        let other = DerivationTable::inner_from(alg, &shifted).unwrap();
        for ((_, a), (_, b)) in table.entries().zip(other.entries()) {
            prop_assert!((a - b).max_abs() <= 1e-12 * (1.0 + re.hypot(im)));
        }
    }

    #[test]
    fn derivations_vanish_on_scalars(seed in any::<u64>(), n in 2usize..8) {
        let alg = reducible_algebra(seed, n);
        let (table, _) = inner_table(&alg, seed);
        prop_assert!(norm(&table.eval(&CMatrix::identity(n)).unwrap()) <= table.tol());
        let s = CMatrix::scalar(n, CScalar::new(2.0, -3.0));
        prop_assert!(norm(&table.eval(&s).unwrap()) <= 4.0 * table.tol());
    }

    #[test]
    fn derivation_of_chain_projection_is_off_diagonal(seed in any::<u64>(), n in 2usize..8) {
        let alg = reducible_algebra(seed, n);
        let (table, _) = inner_table(&alg, seed);
        for k in 1..=alg.levels() {
            let p = alg.lattice_projection(k).unwrap();
            let q = complement(&p);
            let dp = table.eval(&p).unwrap();
            prop_assert!(norm(&(&(&p * &dp) * &p)) <= table.tol());
            prop_assert!(norm(&(&(&q * &dp) * &q)) <= table.tol());
        }
    }

    #[test]
    fn eval_is_linear(seed in any::<u64>(), n in 2usize..7, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let alg = reducible_algebra(seed, n);
        let (table, _) = inner_table(&alg, seed);
        let mut rng = random::rng(seed + 9);
        let a = random::algebra_element(&mut rng, &alg);
        let b = random::algebra_element(&mut rng, &alg);
        let z = CScalar::new(re, im);
        let mut combo = a.clone();
        combo.axpy(z, &b);
        let mut expected = table.eval(&a).unwrap();
        expected.axpy(z, &table.eval(&b).unwrap());
        prop_assert!((&table.eval(&combo).unwrap() - &expected).max_abs() <= 1e-11 * (1.0 + z.norm()));
    }

    #[test]
    fn basis_units_are_closed_and_lower_corner_vanishes(seed in any::<u64>(), n in 2usize..7) {
        let alg = reducible_algebra(seed, n);
        let units = alg.basis_units();
        for u in &units {
            for v in &units {
                let product = &u.matrix(n) * &v.matrix(n);
                if u.j == v.i {
                    prop_assert_eq!(&product, &CMatrix::unit(n, u.i, v.j));
                    prop_assert!(alg.is_admissible(u.i, v.j));
                } else {
                    prop_assert_eq!(product.max_abs(), 0.0);
                }
            }
            for k in 1..=alg.levels() {
                let p = alg.lattice_projection(k).unwrap();
                prop_assert_eq!((&(&complement(&p) * &u.matrix(n)) * &p).max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn construction_implements_inner_derivations_on_any_chain(seed in any::<u64>(), n in 2usize..8) {
        let alg = reducible_algebra(seed, n);
        let (table, c) = inner_table(&alg, seed);
        let choices = random_choices(&alg, seed);
        let artifacts = build_b(&table, &choices).unwrap();
        let tol = 1e-8 * (1.0 + norm(&c));
        let opts = VerifyOptions { tol, generator: Some(c), norm_samples: 4, seed };
        let report = verify(&table, &artifacts, &opts).unwrap();
        prop_assert!(report.pass.thm11 && report.pass.thm12 && report.pass.thm13);
        prop_assert!(report.gauge.unwrap().residual <= tol);
        // b1 and c1, c2 live where they should: b1 p⊥ = 0, c1 p = 0, c2 p = 0, p c2 p⊥ = 0.
        let p = alg.lattice_projection(choices.k).unwrap();
        let q = complement(&p);
        prop_assert!((&artifacts.b1 * &q).max_abs() <= 1e-14);
        prop_assert!((&artifacts.c1 * &p).max_abs() <= 1e-14);
        prop_assert!((&artifacts.c2 * &p).max_abs() <= 1e-14);
        prop_assert!((&(&p * &artifacts.c2) * &q).max_abs() <= 1e-14);
    }

    #[test]
    fn different_choices_differ_by_a_scalar(seed in any::<u64>(), n in 3usize..8) {
        let alg = reducible_algebra(seed, n);
        let (table, c) = inner_table(&alg, seed);
        let first = random_choices(&alg, seed);
        let second = random_choices(&alg, seed.wrapping_add(1));
        let (_, residual) = choice_gauge(&table, &first, &second).unwrap();
        prop_assert!(residual <= 1e-8 * (1.0 + norm(&c)));
    }

    #[test]
    fn c2_does_not_depend_on_the_basis(seed in any::<u64>(), n in 2usize..8) {
        let alg = reducible_algebra(seed, n);
        let (table, _) = inner_table(&alg, seed);
        let choices = random_choices(&alg, seed);
        let d = alg.chain()[choices.k - 1];
        let u = random::random_unitary(&mut random::rng(seed + 3), n - d);
        let basis: Vec<CVector> = (0..n - d)
            .map(|col| {
                let mut v = CVector::zeros(n);
                for r in 0..n - d {
                    v[d + r] = u[(r, col)];
                }
                v
            })
            .collect();
        let rotated = build_c2_with_basis(&table, &choices, &basis).unwrap();
        prop_assert!(norm(&(&rotated - &build_c2(&table, &choices).unwrap())) <= 1e-8);
    }

    #[test]
    fn normalized_chains_are_consistent(seed in any::<u64>(), n in 3usize..8) {
        let alg = reducible_algebra(seed, n);
        let (table, c) = inner_table(&alg, seed);
        let family = chain_family(&table).unwrap();
        let normalized = normalize_chain(&family);
        prop_assert!(normalized.max_pair_gap() <= 1e-9 * (1.0 + norm(&c)));
        prop_assert!(family.max_scalar_residual() <= 1e-9 * (1.0 + norm(&c)));
    }

    #[test]
    fn json_round_trips_exactly(seed in any::<u64>(), n in 2usize..6) {
        let alg = reducible_algebra(seed, n);
        let (table, _) = inner_table(&alg, seed);
        let text = serde_json::to_string(&table).unwrap();
        let back: DerivationTable = serde_json::from_str(&text).unwrap();
        prop_assert!(table.entries().zip(back.entries()).all(|(a, b)| a == b));
        prop_assert_eq!(back.tol(), table.tol());
        let artifacts = build_b(&table, &random_choices(&alg, seed)).unwrap();
        let again: nestderiv::construct::ConstructionArtifacts =
            serde_json::from_str(&serde_json::to_string(&artifacts).unwrap()).unwrap();
        prop_assert_eq!(again, artifacts);
    }
}
