//! Intersection points of two Lagrangians inside a common moduli space,
//! up to conjugation: seeded multistart under the union of both pinning
//! constraints, fingerprint clustering, and tangent-space transversality
//! at each cluster representative.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::Tolerances;
use crate::lie::GroupElement;
use crate::moduli::{
    solve_point_pinned, tangent_basis, thresholded_rank, ModuliError, ModuliSpec, RepPoint,
    SolveOutcome, TwistedCocycle,
};
use crate::symplectic::{
    pinned_tangent_directions, same_space, LagrangianSpec, SymplecticError,
};

#[derive(Debug, Error)]
pub enum IntersectError {
    #[error(transparent)]
    Symplectic(#[from] SymplecticError),
    #[error(transparent)]
    Moduli(#[from] ModuliError),
    #[error("self intersection: both sides impose the same constraint set")]
    SelfIntersection,
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("point misses the locus: defect {defect:.3e}")]
    PointOffLocus { defect: f64 },
}

/// One conjugacy class of intersection points.
#[derive(Clone, Debug, Serialize)]
pub struct IntersectionCluster {
    pub fingerprint: Vec<f64>,
    pub multiplicity: usize,
    pub transverse: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntersectReport {
    pub check: &'static str,
    pub left: String,
    pub right: String,
    pub genus: usize,
    pub rank: usize,
    pub degree: i64,
    pub runs: usize,
    /// Seeds where the pinned solver exhausted its restarts; an infeasible
    /// constraint union fails every run and reports zero clusters.
    pub failed_runs: usize,
    pub clusters: Vec<IntersectionCluster>,
    pub transverse: bool,
    #[serde(skip)]
    pub representatives: Vec<RepPoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransversalityReport {
    pub dim_left: usize,
    pub dim_right: usize,
    pub dim_intersection: usize,
    pub ambient: usize,
    pub verdict: bool,
}

/// Pins of a Lagrangian viewed as a subset of the ambient moduli. Only
/// variants cut out by identity constraints have this presentation.
fn ambient_pins(l: &LagrangianSpec, spec: &ModuliSpec) -> Result<Vec<usize>, IntersectError> {
    if !same_space(&l.source, spec) {
        return Err(IntersectError::SpaceMismatch(format!(
            "{l} lives over genus {}, ambient has genus {}",
            l.source.genus, spec.genus
        )));
    }
    let pins = l.source_pins();
    if pins.is_empty() {
        return Err(IntersectError::SpaceMismatch(format!(
            "{l} is not cut out by identity pins in the ambient moduli"
        )));
    }
    Ok(pins)
}

fn pin_defect(p: &RepPoint, pins: &[usize]) -> f64 {
    let r = p.generator(0).rank();
    let id = GroupElement::identity(r);
    pins.iter()
        .map(|&i| p.generator(i).distance(&id))
        .fold(0.0f64, f64::max)
}

/// Span dimension of the two tangent families in harmonic coordinates.
/// Both families are cocycles orthogonal to the coboundaries, so their
/// classes are faithfully represented by projection onto the harmonic
/// basis.
fn stacked_rank(
    spec: &ModuliSpec,
    harmonics: &[TwistedCocycle],
    families: &[&[TwistedCocycle]],
    tol: &Tolerances,
) -> Result<usize, ModuliError> {
    let cols: usize = families.iter().map(|f| f.len()).sum();
    let mut w = DMatrix::<f64>::zeros(harmonics.len(), cols);
    let h_coords: Vec<DVector<f64>> = harmonics.iter().map(|h| h.coords(spec)).collect();
    let mut c = 0;
    for family in families {
        for u in *family {
            let uc = u.coords(spec);
            for (i, h) in h_coords.iter().enumerate() {
                w[(i, c)] = h.dot(&uc);
            }
            c += 1;
        }
    }
    thresholded_rank(&crate::moduli::singular_values(&w), tol)
}

/// Tangent data of L and L' at a common point: dimensions of both tangent
/// spaces, of their intersection, and the ambient h1. Self-pairs are
/// legal here and come back flagged non-transverse.
pub fn transversality_report(
    l: &LagrangianSpec,
    l_prime: &LagrangianSpec,
    spec: &ModuliSpec,
    point: &RepPoint,
    tol: &Tolerances,
) -> Result<TransversalityReport, IntersectError> {
    let pins_l = ambient_pins(l, spec)?;
    let pins_r = ambient_pins(l_prime, spec)?;
    let res = crate::moduli::residual(spec, point);
    let defect = res
        .max(pin_defect(point, &pins_l))
        .max(pin_defect(point, &pins_r));
    if defect > tol.residual {
        return Err(IntersectError::PointOffLocus { defect });
    }
    let t_l = pinned_tangent_directions(spec, point, &pins_l, tol)?;
    let t_r = pinned_tangent_directions(spec, point, &pins_r, tol)?;
    let harmonics = tangent_basis(spec, point, tol)?;
    let rank = stacked_rank(spec, &harmonics, &[&t_l, &t_r], tol)?;
    let dim_intersection = t_l.len() + t_r.len() - rank;
    Ok(TransversalityReport {
        dim_left: t_l.len(),
        dim_right: t_r.len(),
        dim_intersection,
        ambient: harmonics.len(),
        verdict: dim_intersection == 0,
    })
}

/// Enumerate conjugacy classes of points on both Lagrangians: solve under
/// the union of the two pin sets from `runs` seeds, cluster fingerprints,
/// then test transversality at each representative. Failing transversality
/// marks the cluster, never aborts the count. Seeded multistart cannot
/// certify completeness; callers compare counts across run budgets.
pub fn intersect_count(
    l: &LagrangianSpec,
    l_prime: &LagrangianSpec,
    spec: &ModuliSpec,
    runs: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<IntersectReport, IntersectError> {
    let pins_l = ambient_pins(l, spec)?;
    let pins_r = ambient_pins(l_prime, spec)?;
    if pins_l == pins_r {
        return Err(IntersectError::SelfIntersection);
    }
    let mut union = pins_l;
    union.extend(&pins_r);
    union.sort_unstable();
    union.dedup();

    let outcomes: Vec<Result<SolveOutcome, ModuliError>> = (0..runs)
        .into_par_iter()
        .map(|s| solve_point_pinned(spec, &union, seed.wrapping_add(s as u64), tol))
        .collect();
    let mut points = Vec::new();
    let mut failed_runs = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(SolveOutcome::Point { point, .. }) => points.push(point),
            Ok(SolveOutcome::Empty) => failed_runs += 1,
            Err(ModuliError::SolverFailed { .. }) => failed_runs += 1,
            Err(e) => return Err(e.into()),
        }
    }

    let raw = crate::moduli::cluster_points(spec, &points, tol);
    let mut clusters = Vec::new();
    let mut representatives = Vec::new();
    for c in &raw {
        let rep = &points[c.representative];
        let report = transversality_report(l, l_prime, spec, rep, tol)?;
        clusters.push(IntersectionCluster {
            fingerprint: c.fingerprint.iter().cloned().collect(),
            multiplicity: c.members.len(),
            transverse: report.verdict,
        });
        representatives.push(rep.clone());
    }
    let transverse = clusters.iter().all(|c| c.transverse);
    Ok(IntersectReport {
        check: "intersect",
        left: l.to_string(),
        right: l_prime.to_string(),
        genus: spec.genus,
        rank: spec.rank,
        degree: spec.degree,
        runs,
        failed_runs,
        clusters,
        transverse,
        representatives,
    })
}
