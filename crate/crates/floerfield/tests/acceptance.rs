//! Acceptance gate. Each test is one released claim about the toolkit,
//! checked end to end at its stated tolerance, and prints a single
//! PASS line (visible with --nocapture) once the claim holds.
//!
//! 1. expected dimensions of the twisted representation varieties;
//! 2. the genus-1 space is a point, the genus-0 space is empty;
//! 3. the Goldman pairing is antisymmetric, kills coboundaries, and is
//!    nondegenerate on harmonics;
//! 4. correspondence Lagrangians are half-dimensional and isotropic;
//! 5. the three Cerf relations hold symbolically and numerically;
//! 6. opposite compression-body Lagrangians of the torus-summed spaces
//!    meet in one transverse point;
//! 7. the rewrite engine normalizes exactly, invariantly, and within its
//!    termination bound on fuzzed words;
//! 8. the analytic relator Jacobian matches finite differences.

use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use floerfield::bordism::{
    genus_trajectory, normalize, normalize_traced, random_word, termination_bound, CerfWord,
    HandleMove, Slot, SurfaceLabel,
};
use floerfield::config::Tolerances;
use floerfield::functor::{verify_cerf_relation, CerfMove};
use floerfield::intersect::intersect_count;
use floerfield::moduli::{
    cluster_points, cluster_spread, cochain_data, cohomology_dims, jacobian_fd_error,
    singular_values, solve_point, tangent_basis, ModuliSpec, SolveOutcome, TwistedCocycle,
};
use floerfield::symplectic::{goldman_pair, isotropy_check, lagrangian_dim, LagrangianSpec};

use nalgebra::DMatrix;
use nalgebra::DVector;

fn tol() -> Tolerances {
    Tolerances::default()
}

#[test]
fn criterion_1_moduli_dimensions_match_the_closed_formula() {
    let started = Instant::now();
    let table = [
        (2usize, 2usize, 1i64, 6usize),
        (3, 2, 1, 12),
        (4, 2, 1, 18),
        (2, 3, 1, 16),
        (2, 3, 2, 16),
    ];
    for &(g, r, d, want_h1) in &table {
        let spec = ModuliSpec::new(g, r, d).unwrap();
        assert_eq!(spec.expected_dim, want_h1 as i64, "formula at ({g},{r},{d})");
        let p = solve_point(&spec, 2, &tol())
            .unwrap()
            .point()
            .unwrap_or_else(|| panic!("no point at ({g},{r},{d})"));
        let (h0, h1, h2) = cohomology_dims(&spec, &p, &tol()).unwrap();
        assert_eq!(h0, 0, "h0 at ({g},{r},{d})");
        assert_eq!(h2, 0, "h2 at ({g},{r},{d})");
        assert_eq!(h1, want_h1, "h1 at ({g},{r},{d})");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 60 s");
    println!("PASS criterion 1: h1 = 6,12,18,16,16 with h0 = h2 = 0 in {elapsed:?}");
}

#[test]
fn criterion_2_genus_one_is_a_point_and_genus_zero_is_empty() {
    let spec = ModuliSpec::new(1, 2, 1).unwrap();
    let points: Vec<_> = (0..20u64)
        .map(|s| solve_point(&spec, s, &tol()).unwrap().point().unwrap())
        .collect();
    let clusters = cluster_points(&spec, &points, &tol());
    assert_eq!(clusters.len(), 1, "genus 1 must be a single class");
    let spread = cluster_spread(&spec, &points);
    assert!(spread <= 1e-6, "spread {spread}");

    let empty = ModuliSpec::new(0, 2, 1).unwrap();
    match solve_point(&empty, 0, &tol()).unwrap() {
        SolveOutcome::Empty => {}
        SolveOutcome::Point { iterations, .. } => {
            panic!("genus 0 must be decided without iterating, ran {iterations}")
        }
    }
    println!("PASS criterion 2: one cluster (spread {spread:.2e}) at genus 1, empty at genus 0");
}

#[test]
fn criterion_3_goldman_form_is_antisymmetric_and_nondegenerate() {
    let spec = ModuliSpec::new(2, 2, 1).unwrap();
    let m = spec.algebra_dim();
    let mut worst_antisym = 0.0f64;
    let mut worst_cobdy = 0.0f64;
    let mut worst_cond = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for s in 0..10u64 {
        let p = solve_point(&spec, 1000 + s, &tol()).unwrap().point().unwrap();
        let basis = tangent_basis(&spec, &p, &tol()).unwrap();
        assert_eq!(basis.len(), 6);
        let mut gram = DMatrix::<f64>::zeros(6, 6);
        for (i, u) in basis.iter().enumerate() {
            for (j, v) in basis.iter().enumerate() {
                gram[(i, j)] = goldman_pair(&spec, &p, u, v);
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                worst_antisym = worst_antisym.max((gram[(i, j)] + gram[(j, i)]).abs());
            }
        }

        let data = cochain_data(&spec, &p);
        let xi = DVector::<f64>::from_fn(m, |_, _| rng.random::<f64>() - 0.5);
        let coboundary = TwistedCocycle::from_coords(&spec, &(&data.d0 * xi));
        for u in &basis {
            worst_cobdy = worst_cobdy.max(goldman_pair(&spec, &p, u, &coboundary).abs());
        }

        let sv = singular_values(&gram);
        worst_cond = worst_cond.min(sv[sv.len() - 1] / sv[0]);
    }
    assert!(worst_antisym <= 1e-8, "antisymmetry defect {worst_antisym}");
    assert!(worst_cobdy <= 1e-8, "coboundary defect {worst_cobdy}");
    assert!(worst_cond > 1e-6, "gram conditioning {worst_cond}");
    println!(
        "PASS criterion 3: antisym {worst_antisym:.2e}, coboundary {worst_cobdy:.2e}, \
         gram sigma ratio {worst_cond:.2e}"
    );
}

#[test]
fn criterion_4_correspondences_are_half_dimensional_and_isotropic() {
    let up = LagrangianSpec::elem_up(1, 2, 1).unwrap();
    let vs = LagrangianSpec::vanishing_set(2, vec![(Slot::Alpha, 1)], 2, 1).unwrap();
    for l in [&up, &vs] {
        let dim = lagrangian_dim(l).unwrap();
        let half = (l.source.expected_dim + l.target.expected_dim) / 2;
        assert_eq!(dim, half, "half-dimension of {l}");
        let report = isotropy_check(l, 5, 7, &tol()).unwrap();
        assert!(
            report.verdict && report.max_defect <= 1e-8,
            "isotropy of {l}: defect {}",
            report.max_defect
        );
    }
    println!("PASS criterion 4: ElemUp(1) and VanishingSet(2, {{alpha1}}) are Lagrangian");
}

#[test]
fn criterion_5_cerf_relations_hold_symbolically_and_numerically() {
    let started = Instant::now();
    for &(g, r, d) in &[(2usize, 2usize, 1i64), (3, 2, 1)] {
        for mv in [CerfMove::Cancel, CerfMove::Switch, CerfMove::Cyl] {
            let report = verify_cerf_relation(mv, g, r, d, 3, 13, &tol()).unwrap();
            assert!(report.symbolic_pass, "{mv} at ({g},{r},{d}): symbolic");
            assert!(report.verdict, "{mv} at ({g},{r},{d}): numeric");
            assert!(
                report.max_fingerprint_distance <= 1e-6,
                "{mv} at ({g},{r},{d}): fingerprints differ by {}",
                report.max_fingerprint_distance
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget 5 min");
    println!("PASS criterion 5: cancel, switch, cyl verified at (2,2,1) and (3,2,1) in {elapsed:?}");
}

#[test]
fn criterion_6_torus_summed_halves_meet_in_one_transverse_point() {
    for n in [1usize, 2] {
        let g = n + 1;
        let spec = ModuliSpec::new(g, 2, 1).unwrap();
        let alphas: Vec<_> = (1..=n).map(|j| (Slot::Alpha, j)).collect();
        let betas: Vec<_> = (1..=n).map(|j| (Slot::Beta, j)).collect();
        let left = LagrangianSpec::vanishing_set(g, alphas, 2, 1).unwrap();
        let right = LagrangianSpec::vanishing_set(g, betas, 2, 1).unwrap();

        let base = intersect_count(&left, &right, &spec, 20, 3, &tol()).unwrap();
        let doubled = intersect_count(&left, &right, &spec, 40, 3, &tol()).unwrap();
        assert_eq!(base.clusters.len(), 1, "n = {n}");
        assert_eq!(doubled.clusters.len(), 1, "n = {n} doubled");
        assert!(base.transverse && doubled.transverse, "n = {n}");

        if n == 1 {
            let rep = &base.representatives[0];
            let free_a = &rep.a[1];
            let free_b = &rep.b[1];
            assert!(free_a.trace().norm() <= 1e-8);
            assert!(free_b.trace().norm() <= 1e-8);
            assert!(free_a.mul(free_b).trace().norm() <= 1e-8);
        }
    }
    println!("PASS criterion 6: single transverse cluster for n = 1, 2, stable at doubled runs");
}

#[test]
fn criterion_7_rewrite_engine_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);
    let starts = [
        SurfaceLabel::new(0, 2, 1).unwrap(),
        SurfaceLabel::new(1, 2, 1).unwrap(),
        SurfaceLabel::new(2, 3, 1).unwrap(),
        SurfaceLabel::new(3, 2, 1).unwrap(),
    ];
    for trial in 0..1000usize {
        let w = random_word(starts[trial % starts.len()], 12, &mut rng);
        let (nf, trace) = normalize_traced(&w).unwrap();

        assert_eq!(normalize(&nf).unwrap(), nf, "idempotence on {:?}", w.moves);

        let steps = (trace.len() - 1) as u64;
        let bound = termination_bound(&w);
        assert!(steps <= bound, "{steps} rewrite steps, bound {bound}");

        // Splicing in a cancellable pair must not change the normal form.
        let at = rng.random_range(0..=w.moves.len());
        let genus_at = genus_trajectory(&w).unwrap()[at];
        let mut padded = CerfWord::new(w.start, w.moves.clone());
        padded.moves.insert(
            at,
            HandleMove::Down {
                slot: Slot::Beta,
                index: genus_at + 1,
            },
        );
        padded.moves.insert(at, HandleMove::Up);
        assert_eq!(
            normalize(&padded).unwrap(),
            nf,
            "insertion at {at} changed the normal form of {:?}",
            w.moves
        );
    }
    println!("PASS criterion 7: 1000 fuzzed words normalize exactly");
}

#[test]
fn criterion_8_analytic_jacobian_matches_finite_differences() {
    let mut worst = 0.0f64;
    for &(g, r, d) in &[(2usize, 2usize, 1i64), (2, 3, 1)] {
        let spec = ModuliSpec::new(g, r, d).unwrap();
        for s in 0..10u64 {
            let p = solve_point(&spec, 500 + s, &tol()).unwrap().point().unwrap();
            let err = jacobian_fd_error(&spec, &p, 10, 9000 + s, &tol());
            assert!(err <= 1e-5, "({g},{r},{d}) seed {s}: relative error {err}");
            worst = worst.max(err);
        }
    }
    println!("PASS criterion 8: worst finite-difference relative error {worst:.2e}");
}
