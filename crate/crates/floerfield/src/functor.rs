//! The field-theory map from handle words to correspondence chains, the
//! three Cerf-relation verifications that make it well defined, and the
//! derived constructions: cyclic words and torus-summed bordisms.

use serde::Serialize;

use crate::bordism::{self, CerfWord, HandleMove, Slot, SurfaceLabel};
use crate::config::Tolerances;
use crate::lie::{random_group_element, GroupElement};
use crate::moduli::{conj_fingerprint, solve_point_pinned, ModuliSpec, RepPoint, SolveOutcome};
use crate::symplectic::{
    flat, numeric_composition_check, same_space, symbolic_compose, word_factors,
    CompositionReport, GeneralizedCorrespondence, LagrangianSpec,
    SymplecticError,
};

/// Word to correspondence: each move becomes its elementary factor and the
/// chain is brought to normal form. Valid words never error.
pub fn phi(w: &CerfWord) -> Result<GeneralizedCorrespondence, SymplecticError> {
    symbolic_compose(&phi_unreduced(w)?)
}

/// The factor-by-factor image before any composition rule is applied;
/// concatenation of words maps to concatenation of these chains.
pub fn phi_unreduced(w: &CerfWord) -> Result<GeneralizedCorrespondence, SymplecticError> {
    bordism::validate(w).map_err(crate::moduli::ModuliError::from)?;
    let end = bordism::end_label(w).map_err(crate::moduli::ModuliError::from)?;
    let factors = word_factors(w, false)?;
    GeneralizedCorrespondence::new(
        factors,
        ModuliSpec::from_label(w.start),
        ModuliSpec::from_label(end),
    )
}

/// Componentwise equality of normal-form data: factor kinds and endpoint
/// spaces.
pub fn same_correspondence(x: &GeneralizedCorrespondence, y: &GeneralizedCorrespondence) -> bool {
    same_space(&x.source, &y.source)
        && same_space(&x.target, &y.target)
        && x.factors.len() == y.factors.len()
        && x.factors
            .iter()
            .zip(&y.factors)
            .all(|(a, b)| a.kind == b.kind)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CerfMove {
    Cancel,
    Switch,
    Cyl,
}

impl std::fmt::Display for CerfMove {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CerfMove::Cancel => write!(f, "cancel"),
            CerfMove::Switch => write!(f, "switch"),
            CerfMove::Cyl => write!(f, "cyl"),
        }
    }
}

impl std::str::FromStr for CerfMove {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cancel" => Ok(CerfMove::Cancel),
            "switch" => Ok(CerfMove::Switch),
            "cyl" => Ok(CerfMove::Cyl),
            other => Err(format!("unknown move '{other}', expected cancel|switch|cyl")),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CerfReport {
    pub check: &'static str,
    pub move_kind: CerfMove,
    pub genus: usize,
    pub rank: usize,
    pub degree: i64,
    pub samples: usize,
    pub symbolic_pass: bool,
    pub compositions: Vec<CompositionReport>,
    /// Largest fingerprint distance between matched endpoints of the two
    /// word orders; exact zero for the switch construction.
    pub max_fingerprint_distance: f64,
    pub verdict: bool,
}

fn solved_pinned(
    spec: &ModuliSpec,
    pins: &[usize],
    seed: u64,
    tol: &Tolerances,
) -> Result<RepPoint, SymplecticError> {
    match solve_point_pinned(spec, pins, seed, tol)? {
        SolveOutcome::Point { point, .. } => Ok(point),
        SolveOutcome::Empty => Err(SymplecticError::NotSampleable(
            "the genus-0 moduli is empty".into(),
        )),
    }
}

/// Both orders of an up move past an independent down move, pushed through
/// the same pinned sample and the same free fiber draw. The two composite
/// endpoints consist of identical matrices, so their fingerprints agree
/// exactly rather than to tolerance.
fn switch_endpoint_distance(
    genus: usize,
    rank: usize,
    degree: i64,
    seed: u64,
    tol: &Tolerances,
) -> Result<f64, SymplecticError> {
    let big = ModuliSpec::new(genus, rank, degree)?;
    let small = ModuliSpec::new(genus - 1, rank, degree)?;
    let p0 = solved_pinned(&big, &[flat(Slot::Alpha, 1)], seed, tol)?;
    let b = random_group_element(rank, seed ^ 0xD1CE_FACE);

    // Up first: append the fresh pair, then cut pair 1.
    let mut a = p0.a.clone();
    let mut bb = p0.b.clone();
    a.push(GroupElement::identity(rank));
    bb.push(b.clone());
    let y_a = RepPoint::new(&ModuliSpec::new(genus + 1, rank, degree)?, a, bb, tol)?;
    let p2_a = RepPoint::new(
        &big,
        y_a.a[1..].to_vec(),
        y_a.b[1..].to_vec(),
        tol,
    )?;

    // Down first: cut pair 1, then append the same fresh pair.
    let y_b = RepPoint::new(&small, p0.a[1..].to_vec(), p0.b[1..].to_vec(), tol)?;
    let mut a = y_b.a.clone();
    let mut bb = y_b.b.clone();
    a.push(GroupElement::identity(rank));
    bb.push(b);
    let p2_b = RepPoint::new(&big, a, bb, tol)?;

    Ok((conj_fingerprint(&big, &p2_a) - conj_fingerprint(&big, &p2_b)).norm())
}

/// Verify one Cerf relation at (genus, rank, degree): the two word orders
/// must have equal normal forms under phi, and the numeric composition of
/// the factor pairs must be transverse and embedded. The cylinder relation
/// is purely symbolic.
pub fn verify_cerf_relation(
    mv: CerfMove,
    genus: usize,
    rank: usize,
    degree: i64,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<CerfReport, SymplecticError> {
    let start = SurfaceLabel::new(genus, rank, degree).map_err(crate::moduli::ModuliError::from)?;
    let word = |moves: Vec<HandleMove>| CerfWord { start, moves };

    let (w_left, w_right) = match mv {
        CerfMove::Cancel => (
            word(vec![
                HandleMove::Up,
                HandleMove::Down {
                    slot: Slot::Beta,
                    index: genus + 1,
                },
            ]),
            word(vec![]),
        ),
        CerfMove::Switch => (
            word(vec![
                HandleMove::Up,
                HandleMove::Down {
                    slot: Slot::Alpha,
                    index: 1,
                },
            ]),
            word(vec![
                HandleMove::Down {
                    slot: Slot::Alpha,
                    index: 1,
                },
                HandleMove::Up,
            ]),
        ),
        CerfMove::Cyl => (word(vec![HandleMove::Cyl]), word(vec![])),
    };

    let symbolic_pass = same_correspondence(&phi(&w_left)?, &phi(&w_right)?);

    let mut compositions = Vec::new();
    let mut max_fingerprint_distance = 0.0f64;
    let numeric_pass = match mv {
        CerfMove::Cyl => true,
        CerfMove::Cancel => {
            let up = LagrangianSpec::elem_up(genus, rank, degree)?;
            let down =
                LagrangianSpec::elem_down(genus + 1, Slot::Beta, genus + 1, rank, degree)?;
            let report = numeric_composition_check(&up, &down, samples, seed, tol)?;
            let spread = report.diagonal_spread.unwrap_or(0.0);
            max_fingerprint_distance = spread;
            let ok = report.transverse && report.embedded && spread <= tol.fingerprint_match;
            compositions.push(report);
            ok
        }
        CerfMove::Switch => {
            let up_then_down = (
                LagrangianSpec::elem_up(genus, rank, degree)?,
                LagrangianSpec::elem_down(genus + 1, Slot::Alpha, 1, rank, degree)?,
            );
            let down_then_up = (
                LagrangianSpec::elem_down(genus, Slot::Alpha, 1, rank, degree)?,
                LagrangianSpec::elem_up(genus - 1, rank, degree)?,
            );
            let mut ok = true;
            for (l1, l2) in [up_then_down, down_then_up] {
                let report = numeric_composition_check(&l1, &l2, samples, seed, tol)?;
                ok &= report.transverse && report.embedded;
                compositions.push(report);
            }
            for s in 0..samples {
                let d = switch_endpoint_distance(
                    genus,
                    rank,
                    degree,
                    seed.wrapping_add(s as u64),
                    tol,
                )?;
                max_fingerprint_distance = max_fingerprint_distance.max(d);
            }
            ok && max_fingerprint_distance <= tol.fingerprint_match
        }
    };

    Ok(CerfReport {
        check: "cerf_relation",
        move_kind: mv,
        genus,
        rank,
        degree,
        samples,
        symbolic_pass,
        compositions,
        max_fingerprint_distance,
        verdict: symbolic_pass && numeric_pass,
    })
}

/// A bordism from a surface to itself, presented for cyclic invariants:
/// the base diagonal is recorded separately because the normal form erases
/// explicit diagonals.
#[derive(Clone, Debug, Serialize)]
pub struct CyclicCorrespondence {
    pub base: LagrangianSpec,
    pub monodromy: GeneralizedCorrespondence,
}

pub fn build_cyclic(w: &CerfWord) -> Result<CyclicCorrespondence, SymplecticError> {
    let end = bordism::end_label(w).map_err(crate::moduli::ModuliError::from)?;
    if end.genus != w.start.genus {
        return Err(SymplecticError::EndpointMismatch(format!(
            "cyclic closure needs equal endpoint genus, got {} and {}",
            w.start.genus, end.genus
        )));
    }
    Ok(CyclicCorrespondence {
        base: LagrangianSpec::diagonal(w.start.genus, w.start.rank, w.start.degree)?,
        monodromy: phi(w)?,
    })
}

/// The torus-summed family: from the torus, attach n handles, then
/// compress them along the labeled circles. The two compression-body
/// halves carry the same vanishing-set Lagrangian, stated in the
/// convention that numbers the killed pairs first.
pub fn build_torus_summed(
    n_up: usize,
    down_labels: &[Slot],
    rank: usize,
    degree: i64,
) -> Result<(CerfWord, (LagrangianSpec, LagrangianSpec)), SymplecticError> {
    if down_labels.len() != n_up {
        return Err(SymplecticError::InvalidLagrangian(format!(
            "{} down labels for {} up moves",
            down_labels.len(),
            n_up
        )));
    }
    let start = SurfaceLabel::new(1, rank, degree).map_err(crate::moduli::ModuliError::from)?;
    let mut moves = vec![HandleMove::Up; n_up];
    for j in (1..=n_up).rev() {
        moves.push(HandleMove::Down {
            slot: down_labels[j - 1],
            index: j + 1,
        });
    }
    let word = CerfWord { start, moves };
    bordism::validate(&word).map_err(crate::moduli::ModuliError::from)?;

    let half = if n_up == 0 {
        LagrangianSpec::diagonal(1, rank, degree)?
    } else {
        let labels: Vec<(Slot, usize)> = down_labels
            .iter()
            .enumerate()
            .map(|(j, &s)| (s, j + 1))
            .collect();
        LagrangianSpec::vanishing_set(n_up + 1, labels, rank, degree)?
    };
    Ok((word, (half.clone(), half)))
}
