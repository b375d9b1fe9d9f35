//! The symplectic layer over the representation moduli: Lagrangian
//! correspondences attached to elementary bordisms, their symbolic
//! composition calculus, the Goldman pairing, and numeric certification
//! of the Lagrangian and geometric-composition properties.
//!
//! Conventions. An elementary up correspondence from genus g pins the
//! alpha generator of the fresh pair to the identity and leaves its beta
//! partner as a free SU(r) fiber coordinate; a down correspondence pins
//! the named slot of the killed pair and forgets both partners. The
//! cancelling partner of an up move therefore kills the beta slot, so
//! the two pins are complementary and the composed correspondence is the
//! diagonal with a unique middle lift.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::bordism::{self, CerfWord, HandleMove, Slot, SurfaceLabel};
use crate::config::Tolerances;
use crate::lie::{adjoint_action, basic_inner, random_group_element, su_basis, AlgebraElement, GroupElement};
use crate::moduli::{
    self, cluster_points, conj_fingerprint, relator_letters, singular_values, solve_point,
    solve_point_pinned, tangent_basis, thresholded_rank, ModuliError, ModuliSpec, RepPoint,
    SolveOutcome,
};

pub use crate::moduli::TwistedCocycle;

#[derive(Debug, Error)]
pub enum SymplecticError {
    #[error(transparent)]
    Moduli(#[from] ModuliError),
    #[error("invalid lagrangian: {0}")]
    InvalidLagrangian(String),
    #[error("{variant} dimension mismatch: variant formula {claimed}, half of endpoint sum {half_sum}")]
    DimensionMismatch {
        variant: String,
        claimed: i64,
        half_sum: i64,
    },
    #[error("endpoint mismatch: {0}")]
    EndpointMismatch(String),
    #[error("not sampleable: {0}")]
    NotSampleable(String),
}

/// The five correspondence shapes the theory produces. Genus fields name
/// the source surface; labels are 1-based pair indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum LagrangianKind {
    Diagonal { genus: usize },
    ElemUp { genus: usize },
    ElemDown { genus: usize, slot: Slot, index: usize },
    VanishingSet { genus: usize, labels: Vec<(Slot, usize)> },
    EmptyL,
}

/// A Lagrangian correspondence L in M(source)^- x M(target).
#[derive(Clone, Debug, Serialize)]
pub struct LagrangianSpec {
    pub kind: LagrangianKind,
    pub source: ModuliSpec,
    pub target: ModuliSpec,
}

pub(crate) fn same_space(x: &ModuliSpec, y: &ModuliSpec) -> bool {
    x.genus == y.genus && x.rank == y.rank && x.degree == y.degree
}

/// Flat generator index of slot `s` of 1-based pair `k`.
pub(crate) fn flat(s: Slot, k: usize) -> usize {
    2 * (k - 1)
        + match s {
            Slot::Alpha => 0,
            Slot::Beta => 1,
        }
}

fn dual(s: Slot) -> Slot {
    match s {
        Slot::Alpha => Slot::Beta,
        Slot::Beta => Slot::Alpha,
    }
}

impl LagrangianSpec {
    pub fn diagonal(genus: usize, rank: usize, degree: i64) -> Result<Self, SymplecticError> {
        let space = ModuliSpec::new(genus, rank, degree)?;
        Ok(LagrangianSpec {
            kind: LagrangianKind::Diagonal { genus },
            source: space.clone(),
            target: space,
        })
    }

    pub fn elem_up(genus: usize, rank: usize, degree: i64) -> Result<Self, SymplecticError> {
        Ok(LagrangianSpec {
            kind: LagrangianKind::ElemUp { genus },
            source: ModuliSpec::new(genus, rank, degree)?,
            target: ModuliSpec::new(genus + 1, rank, degree)?,
        })
    }

    pub fn elem_down(
        genus: usize,
        slot: Slot,
        index: usize,
        rank: usize,
        degree: i64,
    ) -> Result<Self, SymplecticError> {
        if genus == 0 {
            return Err(SymplecticError::InvalidLagrangian(
                "no handle to cut at genus 0".into(),
            ));
        }
        if index == 0 || index > genus {
            return Err(SymplecticError::InvalidLagrangian(format!(
                "pair index {index} outside 1..={genus}"
            )));
        }
        Ok(LagrangianSpec {
            kind: LagrangianKind::ElemDown { genus, slot, index },
            source: ModuliSpec::new(genus, rank, degree)?,
            target: ModuliSpec::new(genus - 1, rank, degree)?,
        })
    }

    /// Holonomy-vanishing locus {slot_k = Id for each label}, viewed as a
    /// correspondence onto the moduli of the surviving pairs.
    pub fn vanishing_set(
        genus: usize,
        mut labels: Vec<(Slot, usize)>,
        rank: usize,
        degree: i64,
    ) -> Result<Self, SymplecticError> {
        labels.sort_by_key(|&(s, k)| (k, s));
        for w in labels.windows(2) {
            if w[0] == w[1] {
                return Err(SymplecticError::InvalidLagrangian(format!(
                    "duplicate label {}{}",
                    w[0].0, w[0].1
                )));
            }
        }
        for &(_, k) in &labels {
            if k == 0 || k > genus {
                return Err(SymplecticError::InvalidLagrangian(format!(
                    "pair index {k} outside 1..={genus}"
                )));
            }
        }
        let killed: BTreeSet<usize> = labels.iter().map(|&(_, k)| k).collect();
        let target_genus = genus - killed.len();
        Ok(LagrangianSpec {
            kind: LagrangianKind::VanishingSet { genus, labels },
            source: ModuliSpec::new(genus, rank, degree)?,
            target: ModuliSpec::new(target_genus, rank, degree)?,
        })
    }

    pub fn empty(source: ModuliSpec, target: ModuliSpec) -> Self {
        LagrangianSpec {
            kind: LagrangianKind::EmptyL,
            source,
            target,
        }
    }

    pub fn rank(&self) -> usize {
        self.source.rank
    }

    /// Identity constraints the variant imposes on its source moduli,
    /// as flat generator indices.
    pub fn source_pins(&self) -> Vec<usize> {
        match &self.kind {
            LagrangianKind::ElemDown { slot, index, .. } => vec![flat(*slot, *index)],
            LagrangianKind::VanishingSet { labels, .. } => {
                labels.iter().map(|&(s, k)| flat(s, k)).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Identity constraints on the target moduli: only the up variant
    /// pins there, on the alpha slot of the created pair.
    pub fn target_pins(&self) -> Vec<usize> {
        match &self.kind {
            LagrangianKind::ElemUp { genus } => vec![flat(Slot::Alpha, genus + 1)],
            _ => Vec::new(),
        }
    }

    /// Pair indices the variant removes between source and target.
    fn killed_pairs(&self) -> BTreeSet<usize> {
        match &self.kind {
            LagrangianKind::ElemDown { index, .. } => BTreeSet::from([*index]),
            LagrangianKind::VanishingSet { labels, .. } => {
                labels.iter().map(|&(_, k)| k).collect()
            }
            _ => BTreeSet::new(),
        }
    }

    pub fn same_constraints(&self, other: &LagrangianSpec) -> bool {
        self.kind == other.kind
            && same_space(&self.source, &other.source)
            && same_space(&self.target, &other.target)
    }
}

impl std::fmt::Display for LagrangianSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            LagrangianKind::Diagonal { genus } => write!(f, "Diagonal({genus})"),
            LagrangianKind::ElemUp { genus } => write!(f, "ElemUp({genus})"),
            LagrangianKind::ElemDown { genus, slot, index } => {
                write!(f, "ElemDown({genus}, {slot}, {index})")
            }
            LagrangianKind::VanishingSet { genus, labels } => {
                write!(f, "VanishingSet({genus}, {{")?;
                for (i, (s, k)) in labels.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{s}{k}")?;
                }
                write!(f, "}})")
            }
            LagrangianKind::EmptyL => write!(f, "Empty"),
        }
    }
}

/// Dimension of the correspondence, computed twice: once from the variant
/// structure (bundle or pin count) and once as half the endpoint dimension
/// sum. The two must agree for a genuine Lagrangian.
pub fn lagrangian_dim(l: &LagrangianSpec) -> Result<i64, SymplecticError> {
    let m = (l.source.rank * l.source.rank - 1) as i64;
    let half_sum = (l.source.expected_dim + l.target.expected_dim) / 2;
    let (claimed, variant) = match &l.kind {
        LagrangianKind::EmptyL => return Ok(0),
        LagrangianKind::Diagonal { .. } => (l.source.expected_dim, "Diagonal"),
        LagrangianKind::ElemUp { .. } => (l.source.expected_dim + m, "ElemUp"),
        LagrangianKind::ElemDown { .. } => (l.target.expected_dim + m, "ElemDown"),
        LagrangianKind::VanishingSet { genus, labels } => (
            (2 * *genus as i64 - 2 - labels.len() as i64) * m,
            "VanishingSet",
        ),
    };
    if claimed != half_sum {
        return Err(SymplecticError::DimensionMismatch {
            variant: variant.into(),
            claimed,
            half_sum,
        });
    }
    Ok(claimed)
}

/// A composable chain of correspondences. The empty chain is the identity
/// morphism on its (equal) endpoints.
#[derive(Clone, Debug, Serialize)]
pub struct GeneralizedCorrespondence {
    pub factors: Vec<LagrangianSpec>,
    pub source: ModuliSpec,
    pub target: ModuliSpec,
}

impl GeneralizedCorrespondence {
    pub fn new(
        factors: Vec<LagrangianSpec>,
        source: ModuliSpec,
        target: ModuliSpec,
    ) -> Result<Self, SymplecticError> {
        let mut cursor = source.clone();
        for (i, f) in factors.iter().enumerate() {
            if !same_space(&cursor, &f.source) {
                return Err(SymplecticError::EndpointMismatch(format!(
                    "factor {i} expects genus {} but the chain sits at genus {}",
                    f.source.genus, cursor.genus
                )));
            }
            cursor = f.target.clone();
        }
        if !same_space(&cursor, &target) {
            return Err(SymplecticError::EndpointMismatch(format!(
                "chain ends at genus {} but target is genus {}",
                cursor.genus, target.genus
            )));
        }
        Ok(GeneralizedCorrespondence {
            factors,
            source,
            target,
        })
    }

    pub fn identity(space: ModuliSpec) -> Self {
        GeneralizedCorrespondence {
            factors: Vec::new(),
            source: space.clone(),
            target: space,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }
}

impl std::fmt::Display for GeneralizedCorrespondence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "[Id({})]", self.source.genus);
        }
        write!(f, "[")?;
        for (i, l) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "]")
    }
}

/// True when a vanishing set pins both circles of some pair; such factors
/// have no handle-word expansion and are left alone by the symbolic rules.
fn has_double_pin(l: &LagrangianSpec) -> bool {
    if let LagrangianKind::VanishingSet { labels, .. } = &l.kind {
        let pairs: BTreeSet<usize> = labels.iter().map(|&(_, k)| k).collect();
        return pairs.len() < labels.len();
    }
    false
}

/// Expand a factor chain into the handle word it encodes. Vanishing sets
/// expand to their down moves in decreasing pair order, so earlier kills
/// never shift the indices of later ones.
pub(crate) fn correspondence_word(
    c: &GeneralizedCorrespondence,
) -> Result<CerfWord, SymplecticError> {
    let start = SurfaceLabel::new(c.source.genus, c.source.rank, c.source.degree)
        .map_err(ModuliError::from)?;
    let mut moves = Vec::new();
    for f in &c.factors {
        match &f.kind {
            LagrangianKind::Diagonal { .. } => moves.push(HandleMove::Cyl),
            LagrangianKind::ElemUp { .. } => moves.push(HandleMove::Up),
            LagrangianKind::ElemDown { slot, index, .. } => {
                moves.push(HandleMove::Down {
                    slot: *slot,
                    index: *index,
                })
            }
            LagrangianKind::VanishingSet { labels, .. } => {
                for &(slot, index) in labels.iter().rev() {
                    moves.push(HandleMove::Down { slot, index });
                }
            }
            LagrangianKind::EmptyL => {
                return Err(SymplecticError::InvalidLagrangian(
                    "the empty correspondence has no handle word".into(),
                ))
            }
        }
    }
    let word = CerfWord {
        start,
        moves,
    };
    bordism::validate(&word).map_err(ModuliError::from)?;
    Ok(word)
}

/// Read a handle word back as a factor chain. With `merge_down_runs` every
/// maximal run of two or more down moves becomes a single vanishing set,
/// with labels rewritten to the pair numbering at the start of the run.
pub(crate) fn word_factors(
    w: &CerfWord,
    merge_down_runs: bool,
) -> Result<Vec<LagrangianSpec>, SymplecticError> {
    let (r, d) = (w.start.rank, w.start.degree);
    let mut out = Vec::new();
    let mut g = w.start.genus;
    let mut i = 0;
    while i < w.moves.len() {
        match w.moves[i] {
            HandleMove::Cyl => {
                out.push(LagrangianSpec::diagonal(g, r, d)?);
                i += 1;
            }
            HandleMove::Up => {
                out.push(LagrangianSpec::elem_up(g, r, d)?);
                g += 1;
                i += 1;
            }
            HandleMove::Down { .. } => {
                let mut j = i;
                while j < w.moves.len() && matches!(w.moves[j], HandleMove::Down { .. }) {
                    j += 1;
                }
                if !merge_down_runs || j - i == 1 {
                    for k in i..j {
                        let HandleMove::Down { slot, index } = w.moves[k] else {
                            unreachable!()
                        };
                        out.push(LagrangianSpec::elem_down(g, slot, index, r, d)?);
                        g -= 1;
                    }
                } else {
                    let mut live: Vec<usize> = (1..=g).collect();
                    let mut labels = Vec::new();
                    for k in i..j {
                        let HandleMove::Down { slot, index } = w.moves[k] else {
                            unreachable!()
                        };
                        let orig = live.remove(index - 1);
                        labels.push((slot, orig));
                    }
                    out.push(LagrangianSpec::vanishing_set(g, labels, r, d)?);
                    g -= j - i;
                }
                i = j;
            }
        }
    }
    Ok(out)
}

/// Normal form of a correspondence chain: diagonals are erased, cancelling
/// up/down pairs removed, and surviving down runs merge into vanishing
/// sets. Computed by round-tripping through the handle-word rewriting
/// engine, so it inherits that normal form's confluence. A chain whose
/// minimal cross-section genus is 0 factors through the empty moduli in
/// some arrangement, hence composes to the single empty morphism whether
/// or not the literal trajectory dips.
pub fn symbolic_compose(
    c: &GeneralizedCorrespondence,
) -> Result<GeneralizedCorrespondence, SymplecticError> {
    let collapse = |c: &GeneralizedCorrespondence| {
        let empty = LagrangianSpec::empty(c.source.clone(), c.target.clone());
        GeneralizedCorrespondence::new(vec![empty], c.source.clone(), c.target.clone())
    };
    if c.factors
        .iter()
        .any(|f| matches!(f.kind, LagrangianKind::EmptyL))
    {
        return collapse(c);
    }
    if c.factors.iter().any(has_double_pin) {
        // No handle-word expansion exists; apply only the diagonal rule.
        let kept: Vec<LagrangianSpec> = c
            .factors
            .iter()
            .filter(|f| !matches!(f.kind, LagrangianKind::Diagonal { .. }))
            .cloned()
            .collect();
        return GeneralizedCorrespondence::new(kept, c.source.clone(), c.target.clone());
    }
    let word = correspondence_word(c)?;
    if bordism::min_slice_genus(&word).map_err(ModuliError::from)? == 0 {
        return collapse(c);
    }
    let normal = bordism::normalize(&word).map_err(ModuliError::from)?;
    let factors = word_factors(&normal, true)?;
    GeneralizedCorrespondence::new(factors, c.source.clone(), c.target.clone())
}

/// Goldman pairing of two cocycles at p: the twisted cup product
/// (u cup v)[g|h] = <u(g), Ad(g) v(h)> evaluated on the fan 2-cycle of
/// the one-vertex surface complex. The fan contributes one term per
/// relator letter against its prefix; the trailing sum over generators is
/// the correction chain that closes the fan into a cycle, and it is what
/// makes antisymmetry and coboundary annihilation exact up to the
/// d1-residuals of the arguments.
pub fn goldman_pair(
    spec: &ModuliSpec,
    p: &RepPoint,
    u: &TwistedCocycle,
    v: &TwistedCocycle,
) -> f64 {
    let letters = relator_letters(spec.genus);
    let r = spec.rank;
    let mut total = 0.0;
    let mut prefix = GroupElement::identity(r);
    let mut u_prefix = AlgebraElement::zero(r);
    for l in &letters {
        let word = std::slice::from_ref(l);
        let v_letter = v.evaluate(p, word);
        total += basic_inner(&u_prefix, &adjoint_action(&prefix, &v_letter));
        let u_letter = u.evaluate(p, word);
        u_prefix = u_prefix.add(&adjoint_action(&prefix, &u_letter));
        prefix = prefix.mul(&moduli::evaluate_word(p, word));
    }
    for j in 0..spec.generator_count() {
        total += basic_inner(&u.values[j], &v.values[j]);
    }
    total
}

const PARTNER_SALT: u64 = 0xF1B3_C0C1_E5D7_A211;

fn solved(spec: &ModuliSpec, seed: u64, tol: &Tolerances) -> Result<RepPoint, SymplecticError> {
    match solve_point(spec, seed, tol)? {
        SolveOutcome::Point { point, .. } => Ok(point),
        SolveOutcome::Empty => Err(SymplecticError::NotSampleable(
            "the genus-0 moduli is empty".into(),
        )),
    }
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

/// Insert pair `index` into a smaller point, with `slot` pinned to the
/// identity and the partner drawn from the seed. The inserted commutator
/// is exactly Id, so the relator residual is inherited.
fn insert_pair(
    big: &ModuliSpec,
    small: &RepPoint,
    slot: Slot,
    index: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<RepPoint, SymplecticError> {
    let r = big.rank;
    let partner = random_group_element(r, seed ^ PARTNER_SALT);
    let (pa, pb) = match slot {
        Slot::Alpha => (GroupElement::identity(r), partner),
        Slot::Beta => (partner, GroupElement::identity(r)),
    };
    let mut a = small.a.clone();
    let mut b = small.b.clone();
    a.insert(index - 1, pa);
    b.insert(index - 1, pb);
    Ok(RepPoint::new(big, a, b, tol)?)
}

fn drop_pairs(
    small: &ModuliSpec,
    big: &RepPoint,
    killed: &BTreeSet<usize>,
    tol: &Tolerances,
) -> Result<RepPoint, SymplecticError> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for j in 1..=big.genus() {
        if !killed.contains(&j) {
            a.push(big.a[j - 1].clone());
            b.push(big.b[j - 1].clone());
        }
    }
    Ok(RepPoint::new(small, a, b, tol)?)
}

/// A seeded point (p_minus, p_plus) on the correspondence. Pinned
/// generators come out as the exact identity matrix.
pub fn sample_on_correspondence(
    l: &LagrangianSpec,
    seed: u64,
    tol: &Tolerances,
) -> Result<(RepPoint, RepPoint), SymplecticError> {
    if matches!(l.kind, LagrangianKind::EmptyL) {
        return Err(SymplecticError::NotSampleable(
            "the empty correspondence has no points".into(),
        ));
    }
    if l.source.genus == 0 || l.target.genus == 0 {
        return Err(SymplecticError::NotSampleable(
            "a genus-0 endpoint has empty moduli".into(),
        ));
    }
    match &l.kind {
        LagrangianKind::Diagonal { .. } => {
            let p = solved(&l.source, seed, tol)?;
            Ok((p.clone(), p))
        }
        LagrangianKind::ElemUp { .. } => {
            let p_minus = solved(&l.source, seed, tol)?;
            let r = l.rank();
            let mut a = p_minus.a.clone();
            let mut b = p_minus.b.clone();
            a.push(GroupElement::identity(r));
            b.push(random_group_element(r, seed ^ PARTNER_SALT));
            let p_plus = RepPoint::new(&l.target, a, b, tol)?;
            Ok((p_minus, p_plus))
        }
        LagrangianKind::ElemDown { slot, index, .. } => {
            let p_plus = solved(&l.target, seed, tol)?;
            let p_minus = insert_pair(&l.source, &p_plus, *slot, *index, seed, tol)?;
            Ok((p_minus, p_plus))
        }
        LagrangianKind::VanishingSet { .. } => {
            let pins = l.source_pins();
            let p_minus = solved_pinned(&l.source, &pins, seed, tol)?;
            let p_plus = drop_pairs(&l.target, &p_minus, &l.killed_pairs(), tol)?;
            Ok((p_minus, p_plus))
        }
        LagrangianKind::EmptyL => unreachable!(),
    }
}

fn zero_cocycle(spec: &ModuliSpec) -> TwistedCocycle {
    TwistedCocycle::zero(spec)
}

/// Extend a cocycle at the small end of an up correspondence by zero on
/// the fresh pair; exact because the fresh commutator evaluates to zero
/// on a cocycle vanishing there.
fn extend_by_zero(u: &TwistedCocycle, r: usize) -> TwistedCocycle {
    let mut values = u.values.clone();
    values.push(AlgebraElement::zero(r));
    values.push(AlgebraElement::zero(r));
    TwistedCocycle { values }
}

fn insert_zero_pair(u: &TwistedCocycle, index: usize, r: usize) -> TwistedCocycle {
    let mut values = u.values.clone();
    values.insert(2 * (index - 1), AlgebraElement::zero(r));
    values.insert(2 * (index - 1) + 1, AlgebraElement::zero(r));
    TwistedCocycle { values }
}

fn restrict_to_survivors(u: &TwistedCocycle, killed: &BTreeSet<usize>) -> TwistedCocycle {
    let mut values = Vec::new();
    for (i, v) in u.values.iter().enumerate() {
        if !killed.contains(&(i / 2 + 1)) {
            values.push(v.clone());
        }
    }
    TwistedCocycle { values }
}

/// Cocycle supported on one generator. A cocycle condition check shows
/// this is exact precisely when the partner of that generator is pinned
/// to the identity, which is the only situation the callers create.
fn fiber_direction(spec: &ModuliSpec, flat_index: usize, xi: &AlgebraElement) -> TwistedCocycle {
    let mut u = TwistedCocycle::zero(spec);
    u.values[flat_index] = xi.clone();
    u
}

/// Orthonormal harmonic directions tangent to a pinned locus: the kernel
/// of d1 stacked with the coordinate rows of the pinned generators, with
/// the coboundary image projected out. Coboundaries vanish on identity
/// pins, so the quotient count is (2g - 2 - pins)(r^2 - 1).
pub fn pinned_tangent_directions(
    spec: &ModuliSpec,
    p: &RepPoint,
    pins: &[usize],
    tol: &Tolerances,
) -> Result<Vec<TwistedCocycle>, SymplecticError> {
    let m = spec.algebra_dim();
    let n = spec.generator_count();
    let data = moduli::cochain_data(spec, p);
    let d1_rows = data.d1.nrows();
    let mut stacked = DMatrix::<f64>::zeros(d1_rows + pins.len() * m, n * m);
    stacked.rows_mut(0, d1_rows).copy_from(&data.d1);
    for (pi, &g) in pins.iter().enumerate() {
        for k in 0..m {
            stacked[(d1_rows + pi * m + k, g * m + k)] = 1.0;
        }
    }

    let expected = ((2 * spec.genus as i64 - 2 - pins.len() as i64) * m as i64).max(0) as usize;

    let gram = stacked.transpose() * &stacked;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = (tol.rank_zero * tol.rank_zero) * lambda_max.max(f64::MIN_POSITIVE);
    let mut kernel_cols = Vec::new();
    for i in 0..n * m {
        if eig.eigenvalues[i] < cutoff {
            kernel_cols.push(eig.eigenvectors.column(i).into_owned());
        }
    }

    let svd0 = data.d0.clone().svd(true, false);
    let u0 = svd0.u.expect("svd requested u");
    let s0max = svd0.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let im_cols: Vec<nalgebra::DVector<f64>> = (0..svd0.singular_values.len())
        .filter(|&i| svd0.singular_values[i] >= tol.rank_zero * s0max.max(f64::MIN_POSITIVE))
        .map(|i| u0.column(i).into_owned())
        .collect();

    let mut out = Vec::new();
    if !kernel_cols.is_empty() {
        let mut projected = DMatrix::<f64>::zeros(n * m, kernel_cols.len());
        for (j, col) in kernel_cols.iter().enumerate() {
            let mut v = col.clone();
            for q in &im_cols {
                let c = q.dot(&v);
                v -= q * c;
            }
            projected.set_column(j, &v);
        }
        let svdp = projected.svd(true, false);
        let up = svdp.u.expect("svd requested u");
        // Columns enter with unit norm, so sigma is an absolute measure of
        // how much survives the coboundary projection; a relative cut would
        // misread the all-coboundary case where every sigma is roundoff.
        let pmax = svdp.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let scale = pmax.max(1.0);
        for i in 0..svdp.singular_values.len() {
            let s = svdp.singular_values[i];
            if s > tol.rank_band_lo * scale && s < tol.rank_band_hi * scale {
                return Err(SymplecticError::Moduli(ModuliError::RankIndeterminate {
                    sigma: s,
                    lo: tol.rank_band_lo * scale,
                    hi: tol.rank_band_hi * scale,
                }));
            }
            if s >= tol.rank_zero * scale {
                out.push(TwistedCocycle::from_coords(spec, &up.column(i).into_owned()));
            }
        }
    }
    if out.len() != expected {
        return Err(SymplecticError::InvalidLagrangian(format!(
            "pinned tangent space has {} directions, expected {expected}",
            out.len()
        )));
    }
    Ok(out)
}

/// Spanning set of tangent directions to the correspondence at a sampled
/// point, as cocycle pairs (minus side, plus side). Shared directions are
/// harmonic classes of the smaller end carried across by zero-extension;
/// the fiber directions are supported on the free partner of each pinned
/// pair. Together they span dim L directions exactly.
pub fn tangent_pairs(
    l: &LagrangianSpec,
    p_minus: &RepPoint,
    p_plus: &RepPoint,
    tol: &Tolerances,
) -> Result<Vec<(TwistedCocycle, TwistedCocycle)>, SymplecticError> {
    let r = l.rank();
    match &l.kind {
        LagrangianKind::EmptyL => Err(SymplecticError::NotSampleable(
            "the empty correspondence has no tangent directions".into(),
        )),
        LagrangianKind::Diagonal { .. } => {
            let h = tangent_basis(&l.source, p_minus, tol)?;
            Ok(h.into_iter().map(|u| (u.clone(), u)).collect())
        }
        LagrangianKind::ElemUp { genus } => {
            let mut out = Vec::new();
            for u in tangent_basis(&l.source, p_minus, tol)? {
                let ext = extend_by_zero(&u, r);
                out.push((u, ext));
            }
            for xi in su_basis(r) {
                out.push((
                    zero_cocycle(&l.source),
                    fiber_direction(&l.target, flat(Slot::Beta, genus + 1), &xi),
                ));
            }
            Ok(out)
        }
        LagrangianKind::ElemDown { slot, index, .. } => {
            let mut out = Vec::new();
            for u in tangent_basis(&l.target, p_plus, tol)? {
                let ins = insert_zero_pair(&u, *index, r);
                out.push((ins, u));
            }
            for xi in su_basis(r) {
                out.push((
                    fiber_direction(&l.source, flat(dual(*slot), *index), &xi),
                    zero_cocycle(&l.target),
                ));
            }
            Ok(out)
        }
        LagrangianKind::VanishingSet { .. } => {
            let pins = l.source_pins();
            let killed = l.killed_pairs();
            let dirs = pinned_tangent_directions(&l.source, p_minus, &pins, tol)?;
            Ok(dirs
                .into_iter()
                .map(|u| {
                    let restricted = restrict_to_survivors(&u, &killed);
                    (u, restricted)
                })
                .collect())
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IsotropyReport {
    pub check: &'static str,
    pub lagrangian: String,
    pub samples: usize,
    pub directions: usize,
    pub max_defect: f64,
    pub verdict: bool,
}

/// Verify |omega_plus(u_plus, v_plus) - omega_minus(u_minus, v_minus)|
/// over all direction pairs at seeded samples: isotropy of L inside
/// M(source)^- x M(target).
pub fn isotropy_check(
    l: &LagrangianSpec,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<IsotropyReport, SymplecticError> {
    let mut max_defect = 0.0f64;
    let mut directions = 0;
    for s in 0..samples {
        let (p_minus, p_plus) = sample_on_correspondence(l, seed.wrapping_add(s as u64), tol)?;
        let dirs = tangent_pairs(l, &p_minus, &p_plus, tol)?;
        directions = dirs.len();
        for i in 0..dirs.len() {
            for j in i..dirs.len() {
                let w_plus = goldman_pair(&l.target, &p_plus, &dirs[i].1, &dirs[j].1);
                let w_minus = goldman_pair(&l.source, &p_minus, &dirs[i].0, &dirs[j].0);
                max_defect = max_defect.max((w_plus - w_minus).abs());
            }
        }
    }
    Ok(IsotropyReport {
        check: "isotropy",
        lagrangian: l.to_string(),
        samples,
        directions,
        max_defect,
        verdict: max_defect <= tol.pairing,
    })
}

/// A composable triple (p0, y, p2) with (p0, y) on l1 and (y, p2) on l2,
/// built by solving the middle moduli under the union of both sides'
/// pins and then extending or restricting outward.
pub fn composition_sample(
    l1: &LagrangianSpec,
    l2: &LagrangianSpec,
    seed: u64,
    tol: &Tolerances,
) -> Result<(RepPoint, RepPoint, RepPoint), SymplecticError> {
    if !same_space(&l1.target, &l2.source) {
        return Err(SymplecticError::EndpointMismatch(format!(
            "middle moduli disagree: genus {} vs {}",
            l1.target.genus, l2.source.genus
        )));
    }
    if l1.source.genus == 0 || l1.target.genus == 0 || l2.target.genus == 0 {
        return Err(SymplecticError::NotSampleable(
            "a genus-0 endpoint has empty moduli".into(),
        ));
    }
    if matches!(l1.kind, LagrangianKind::EmptyL) || matches!(l2.kind, LagrangianKind::EmptyL) {
        return Err(SymplecticError::NotSampleable(
            "the empty correspondence has no points".into(),
        ));
    }
    let mid = &l1.target;
    let mut pins: Vec<usize> = l1.target_pins();
    pins.extend(l2.source_pins());
    pins.sort_unstable();
    pins.dedup();
    let y = solved_pinned(mid, &pins, seed, tol)?;

    let p0 = match &l1.kind {
        LagrangianKind::Diagonal { .. } => y.clone(),
        LagrangianKind::ElemUp { genus } => {
            drop_pairs(&l1.source, &y, &BTreeSet::from([*genus + 1]), tol)?
        }
        LagrangianKind::ElemDown { slot, index, .. } => {
            insert_pair(&l1.source, &y, *slot, *index, seed ^ 0x51DE, tol)?
        }
        LagrangianKind::VanishingSet { labels, .. } => {
            let mut p = y.clone();
            // Re-insert killed pairs in ascending order so each lands at
            // its final 1-based position.
            let killed = l1.killed_pairs();
            let mut work_spec = l1.target.clone();
            for (step, &k) in killed.iter().enumerate() {
                let slots: Vec<Slot> = labels
                    .iter()
                    .filter(|&&(_, kk)| kk == k)
                    .map(|&(s, _)| s)
                    .collect();
                work_spec = ModuliSpec::new(work_spec.genus + 1, mid.rank, mid.degree)?;
                if slots.len() == 2 {
                    let mut a = p.a.clone();
                    let mut b = p.b.clone();
                    a.insert(k - 1, GroupElement::identity(mid.rank));
                    b.insert(k - 1, GroupElement::identity(mid.rank));
                    p = RepPoint::new(&work_spec, a, b, tol)?;
                } else {
                    p = insert_pair(
                        &work_spec,
                        &p,
                        slots[0],
                        k,
                        seed ^ (0x9D0 + step as u64),
                        tol,
                    )?;
                }
            }
            p
        }
        LagrangianKind::EmptyL => unreachable!(),
    };

    let p2 = match &l2.kind {
        LagrangianKind::Diagonal { .. } => y.clone(),
        LagrangianKind::ElemUp { .. } => {
            let r = mid.rank;
            let mut a = y.a.clone();
            let mut b = y.b.clone();
            a.push(GroupElement::identity(r));
            b.push(random_group_element(r, seed ^ PARTNER_SALT ^ 0x2F));
            RepPoint::new(&l2.target, a, b, tol)?
        }
        LagrangianKind::ElemDown { .. } | LagrangianKind::VanishingSet { .. } => {
            drop_pairs(&l2.target, &y, &l2.killed_pairs(), tol)?
        }
        LagrangianKind::EmptyL => unreachable!(),
    };

    Ok((p0, y, p2))
}

#[derive(Clone, Debug, Serialize)]
pub struct CompositionReport {
    pub check: &'static str,
    pub left: String,
    pub right: String,
    pub samples: usize,
    pub transverse: bool,
    pub embedded: bool,
    pub max_rank_defect: usize,
    pub lift_clusters: usize,
    /// Fingerprint distance between the outer points of each composed
    /// sample; meaningful when the pair composes to the identity.
    pub diagonal_spread: Option<f64>,
}

/// Rank and lift data at one composable triple: the harmonic-coordinate
/// span of both tangent projections to the middle must fill h1(middle)
/// for transversality, and redrawing the free partners of pinned middle
/// pairs must not produce a second fingerprint cluster for embeddedness.
#[allow(clippy::too_many_arguments)]
pub fn composition_check_at(
    l1: &LagrangianSpec,
    l2: &LagrangianSpec,
    p0: &RepPoint,
    y: &RepPoint,
    p2: &RepPoint,
    lifts: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<(usize, usize), SymplecticError> {
    let mid = &l1.target;
    let harmonics = tangent_basis(mid, y, tol)?;
    let h1 = harmonics.len();
    let dirs1 = tangent_pairs(l1, p0, y, tol)?;
    let dirs2 = tangent_pairs(l2, y, p2, tol)?;
    let cols = dirs1.len() + dirs2.len();
    let mut w = DMatrix::<f64>::zeros(h1, cols);
    let h_coords: Vec<nalgebra::DVector<f64>> =
        harmonics.iter().map(|h| h.coords(mid)).collect();
    for (c, u) in dirs1
        .iter()
        .map(|(_, plus)| plus)
        .chain(dirs2.iter().map(|(minus, _)| minus))
        .enumerate()
    {
        let uc = u.coords(mid);
        for (i, h) in h_coords.iter().enumerate() {
            w[(i, c)] = h.dot(&uc);
        }
    }
    let rank = thresholded_rank(&singular_values(&w), tol)?;
    let rank_defect = h1.saturating_sub(rank);

    // The complete lift family over fixed outer points: partners of
    // pinned middle pairs that are dropped on both outer sides.
    let mut pins: Vec<usize> = l1.target_pins();
    pins.extend(l2.source_pins());
    pins.sort_unstable();
    pins.dedup();
    let carried0: BTreeSet<usize> = match &l1.kind {
        LagrangianKind::ElemUp { genus } => (1..=*genus).collect(),
        _ => (1..=y.genus()).collect(),
    };
    let carried2: BTreeSet<usize> = match &l2.kind {
        LagrangianKind::ElemDown { .. } | LagrangianKind::VanishingSet { .. } => {
            let killed = l2.killed_pairs();
            (1..=y.genus()).filter(|j| !killed.contains(j)).collect()
        }
        _ => (1..=y.genus()).collect(),
    };
    let mut free_partners = Vec::new();
    for &pin in &pins {
        let pair = pin / 2 + 1;
        if carried0.contains(&pair) || carried2.contains(&pair) {
            continue;
        }
        let partner = pin ^ 1;
        if !pins.contains(&partner) && !free_partners.contains(&partner) {
            free_partners.push(partner);
        }
    }
    let mut candidates = vec![y.clone()];
    for t in 1..lifts {
        let mut a = y.a.clone();
        let mut b = y.b.clone();
        for (fi, &flat_index) in free_partners.iter().enumerate() {
            let g = random_group_element(
                mid.rank,
                seed ^ PARTNER_SALT
                    ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    ^ (fi as u64) << 7,
            );
            if flat_index % 2 == 0 {
                a[flat_index / 2] = g;
            } else {
                b[flat_index / 2] = g;
            }
        }
        candidates.push(RepPoint::new(mid, a, b, tol)?);
    }
    let clusters = cluster_points(mid, &candidates, tol);
    Ok((rank_defect, clusters.len()))
}

/// Certify a two-factor geometric composition over seeded samples:
/// transversality by harmonic rank, embeddedness by lift clustering.
pub fn numeric_composition_check(
    l1: &LagrangianSpec,
    l2: &LagrangianSpec,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<CompositionReport, SymplecticError> {
    let mut max_rank_defect = 0usize;
    let mut lift_clusters = 1usize;
    let mut diagonal_spread: Option<f64> = None;
    for s in 0..samples {
        let sample_seed = seed.wrapping_add(s as u64);
        let (p0, y, p2) = composition_sample(l1, l2, sample_seed, tol)?;
        let (defect, clusters) = composition_check_at(l1, l2, &p0, &y, &p2, 4, sample_seed, tol)?;
        max_rank_defect = max_rank_defect.max(defect);
        lift_clusters = lift_clusters.max(clusters);
        if l1.source.genus == l2.target.genus {
            let d = (conj_fingerprint(&l1.source, &p0) - conj_fingerprint(&l2.target, &p2)).norm();
            diagonal_spread = Some(diagonal_spread.unwrap_or(0.0).max(d));
        }
    }
    Ok(CompositionReport {
        check: "composition",
        left: l1.to_string(),
        right: l2.to_string(),
        samples,
        transverse: max_rank_defect == 0,
        embedded: lift_clusters == 1,
        max_rank_defect,
        lift_clusters,
        diagonal_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn solved_at(genus: usize, rank: usize, degree: i64, seed: u64) -> (ModuliSpec, RepPoint) {
        let spec = ModuliSpec::new(genus, rank, degree).unwrap();
        let p = solved(&spec, seed, &tol()).unwrap();
        (spec, p)
    }

    /// Random cocycle: a combination of harmonic directions and a
    /// coboundary, so it satisfies d1 u = 0 to solver precision.
    fn random_cocycle(
        spec: &ModuliSpec,
        p: &RepPoint,
        rng: &mut ChaCha8Rng,
    ) -> TwistedCocycle {
        let data = moduli::cochain_data(spec, p);
        let h = tangent_basis(spec, p, &tol()).unwrap();
        let mut coords = DVector::<f64>::zeros(spec.generator_count() * spec.algebra_dim());
        for basis_vec in &h {
            coords += basis_vec.coords(spec) * (rng.random::<f64>() - 0.5);
        }
        let mut xi = DVector::<f64>::zeros(spec.algebra_dim());
        for v in xi.iter_mut() {
            *v = rng.random::<f64>() - 0.5;
        }
        coords += &data.d0 * xi;
        TwistedCocycle::from_coords(spec, &coords)
    }

    fn coboundary(spec: &ModuliSpec, p: &RepPoint, seed: u64) -> TwistedCocycle {
        let data = moduli::cochain_data(spec, p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xi = DVector::<f64>::zeros(spec.algebra_dim());
        for v in xi.iter_mut() {
            *v = rng.random::<f64>() - 0.5;
        }
        TwistedCocycle::from_coords(spec, &(&data.d0 * xi))
    }

    #[test]
    fn dimension_table_matches_half_sums() {
        assert_eq!(lagrangian_dim(&LagrangianSpec::elem_up(2, 2, 1).unwrap()).unwrap(), 9);
        assert_eq!(lagrangian_dim(&LagrangianSpec::diagonal(2, 2, 1).unwrap()).unwrap(), 6);
        assert_eq!(
            lagrangian_dim(&LagrangianSpec::elem_down(3, Slot::Beta, 3, 2, 1).unwrap()).unwrap(),
            9
        );
        for n in 1..=3usize {
            let labels: Vec<(Slot, usize)> = (1..=n).map(|k| (Slot::Alpha, k)).collect();
            let vs = LagrangianSpec::vanishing_set(n + 1, labels, 2, 1).unwrap();
            assert_eq!(lagrangian_dim(&vs).unwrap(), 3 * n as i64);
            assert_eq!(vs.target.genus, 1);
        }
        let up = LagrangianSpec::elem_up(3, 3, 1).unwrap();
        assert_eq!(lagrangian_dim(&up).unwrap(), (2 * 3 - 1) * 8);
    }

    #[test]
    fn double_pin_fails_the_half_dimension_check() {
        let vs = LagrangianSpec::vanishing_set(
            2,
            vec![(Slot::Alpha, 1), (Slot::Beta, 1)],
            2,
            1,
        )
        .unwrap();
        assert_eq!(vs.target.genus, 1);
        match lagrangian_dim(&vs) {
            Err(SymplecticError::DimensionMismatch { claimed, half_sum, .. }) => {
                assert_eq!(claimed, 0);
                assert_eq!(half_sum, 3);
            }
            other => panic!("expected DimensionMismatch, got {other:?}"),
        }
    }

    #[test]
    fn constructors_reject_bad_labels() {
        assert!(matches!(
            LagrangianSpec::elem_down(2, Slot::Alpha, 0, 2, 1),
            Err(SymplecticError::InvalidLagrangian(_))
        ));
        assert!(matches!(
            LagrangianSpec::elem_down(2, Slot::Alpha, 3, 2, 1),
            Err(SymplecticError::InvalidLagrangian(_))
        ));
        assert!(matches!(
            LagrangianSpec::vanishing_set(2, vec![(Slot::Alpha, 1), (Slot::Alpha, 1)], 2, 1),
            Err(SymplecticError::InvalidLagrangian(_))
        ));
        assert!(matches!(
            LagrangianSpec::vanishing_set(2, vec![(Slot::Alpha, 3)], 2, 1),
            Err(SymplecticError::InvalidLagrangian(_))
        ));
    }

    #[test]
    fn correspondence_chain_validates_endpoints() {
        let up1 = LagrangianSpec::elem_up(1, 2, 1).unwrap();
        let up2 = LagrangianSpec::elem_up(2, 2, 1).unwrap();
        let m1 = ModuliSpec::new(1, 2, 1).unwrap();
        let m3 = ModuliSpec::new(3, 2, 1).unwrap();
        assert!(GeneralizedCorrespondence::new(
            vec![up1.clone(), up2.clone()],
            m1.clone(),
            m3.clone()
        )
        .is_ok());
        assert!(matches!(
            GeneralizedCorrespondence::new(vec![up2, up1], m1.clone(), m3),
            Err(SymplecticError::EndpointMismatch(_))
        ));
        let id = GeneralizedCorrespondence::identity(m1);
        assert!(id.is_identity());
    }

    #[test]
    fn compose_cancels_an_up_against_its_beta_kill() {
        let up = LagrangianSpec::elem_up(2, 2, 1).unwrap();
        let down = LagrangianSpec::elem_down(3, Slot::Beta, 3, 2, 1).unwrap();
        let m2 = ModuliSpec::new(2, 2, 1).unwrap();
        let c =
            GeneralizedCorrespondence::new(vec![up, down], m2.clone(), m2.clone()).unwrap();
        let composed = symbolic_compose(&c).unwrap();
        assert!(composed.is_identity());
        assert!(same_space(&composed.source, &m2));
        assert!(same_space(&composed.target, &m2));
    }

    #[test]
    fn compose_drops_diagonals() {
        let diag = LagrangianSpec::diagonal(2, 2, 1).unwrap();
        let up = LagrangianSpec::elem_up(2, 2, 1).unwrap();
        let m2 = ModuliSpec::new(2, 2, 1).unwrap();
        let m3 = ModuliSpec::new(3, 2, 1).unwrap();
        let c = GeneralizedCorrespondence::new(vec![diag, up], m2, m3).unwrap();
        let composed = symbolic_compose(&c).unwrap();
        assert_eq!(composed.factors.len(), 1);
        assert_eq!(
            composed.factors[0].kind,
            LagrangianKind::ElemUp { genus: 2 }
        );
    }

    #[test]
    fn compose_collapses_through_genus_zero() {
        let down = LagrangianSpec::elem_down(1, Slot::Beta, 1, 2, 1).unwrap();
        let up = LagrangianSpec::elem_up(0, 2, 1).unwrap();
        let m1 = ModuliSpec::new(1, 2, 1).unwrap();
        let c = GeneralizedCorrespondence::new(vec![down, up], m1.clone(), m1).unwrap();
        let composed = symbolic_compose(&c).unwrap();
        assert_eq!(composed.factors.len(), 1);
        assert_eq!(composed.factors[0].kind, LagrangianKind::EmptyL);
    }

    #[test]
    fn compose_merges_down_chains_into_a_vanishing_set() {
        let d1 = LagrangianSpec::elem_down(3, Slot::Alpha, 2, 2, 1).unwrap();
        let d2 = LagrangianSpec::elem_down(2, Slot::Beta, 1, 2, 1).unwrap();
        let m3 = ModuliSpec::new(3, 2, 1).unwrap();
        let m1 = ModuliSpec::new(1, 2, 1).unwrap();
        let c = GeneralizedCorrespondence::new(vec![d1, d2], m3, m1).unwrap();
        let composed = symbolic_compose(&c).unwrap();
        assert_eq!(composed.factors.len(), 1);
        assert_eq!(
            composed.factors[0].kind,
            LagrangianKind::VanishingSet {
                genus: 3,
                labels: vec![(Slot::Beta, 1), (Slot::Alpha, 2)],
            }
        );
    }

    #[test]
    fn compose_is_idempotent() {
        let chains: Vec<Vec<LagrangianSpec>> = vec![
            vec![
                LagrangianSpec::elem_up(1, 2, 1).unwrap(),
                LagrangianSpec::elem_up(2, 2, 1).unwrap(),
                LagrangianSpec::elem_down(3, Slot::Alpha, 1, 2, 1).unwrap(),
            ],
            vec![
                LagrangianSpec::diagonal(2, 2, 1).unwrap(),
                LagrangianSpec::elem_down(2, Slot::Beta, 2, 2, 1).unwrap(),
                LagrangianSpec::elem_down(1, Slot::Alpha, 1, 2, 1).unwrap(),
            ],
        ];
        for factors in chains {
            let source = factors.first().unwrap().source.clone();
            let target = factors.last().unwrap().target.clone();
            let c = GeneralizedCorrespondence::new(factors, source, target).unwrap();
            let once = symbolic_compose(&c).unwrap();
            let twice = symbolic_compose(&once).unwrap();
            let kinds =
                |g: &GeneralizedCorrespondence| -> Vec<LagrangianKind> {
                    g.factors.iter().map(|f| f.kind.clone()).collect()
                };
            assert_eq!(kinds(&once), kinds(&twice));
        }
    }

    #[test]
    fn goldman_is_antisymmetric_and_bilinear() {
        let (spec, p) = solved_at(2, 2, 1, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let u = random_cocycle(&spec, &p, &mut rng);
            let v = random_cocycle(&spec, &p, &mut rng);
            let anti = (goldman_pair(&spec, &p, &u, &v) + goldman_pair(&spec, &p, &v, &u)).abs();
            let scale = (u.norm(&spec) * v.norm(&spec)).max(1.0);
            assert!(anti <= 1e-8 * scale, "antisymmetry defect {anti}");
            assert!(goldman_pair(&spec, &p, &u, &u).abs() <= 1e-8 * scale.max(1.0));

            let w = random_cocycle(&spec, &p, &mut rng);
            let sum = TwistedCocycle {
                values: u
                    .values
                    .iter()
                    .zip(&w.values)
                    .map(|(x, y)| x.add(y))
                    .collect(),
            };
            let lin = (goldman_pair(&spec, &p, &sum, &v)
                - goldman_pair(&spec, &p, &u, &v)
                - goldman_pair(&spec, &p, &w, &v))
            .abs();
            assert!(lin <= 1e-10, "bilinearity defect {lin}");
        }
    }

    #[test]
    fn goldman_annihilates_coboundaries() {
        let (spec, p) = solved_at(2, 2, 1, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for s in 0..5 {
            let db = coboundary(&spec, &p, 100 + s);
            let v = random_cocycle(&spec, &p, &mut rng);
            assert!(goldman_pair(&spec, &p, &db, &v).abs() <= 1e-8);
            assert!(goldman_pair(&spec, &p, &v, &db).abs() <= 1e-8);
        }
    }

    #[test]
    fn goldman_gram_has_full_rank_on_harmonics() {
        let (spec, p) = solved_at(2, 2, 1, 41);
        let h = tangent_basis(&spec, &p, &tol()).unwrap();
        assert_eq!(h.len(), 6);
        let mut gram = DMatrix::<f64>::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                gram[(i, j)] = goldman_pair(&spec, &p, &h[i], &h[j]);
            }
        }
        let sv = singular_values(&gram);
        let smax = sv.iter().cloned().fold(0.0f64, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(smin / smax > 1e-6, "sigma ratio {}", smin / smax);
    }

    #[test]
    fn sample_elem_up_pins_the_fresh_alpha() {
        let up = LagrangianSpec::elem_up(1, 2, 1).unwrap();
        let (p_minus, p_plus) = sample_on_correspondence(&up, 7, &tol()).unwrap();
        assert_eq!(p_minus.genus(), 1);
        assert_eq!(p_plus.genus(), 2);
        assert_eq!(
            p_plus.a[1].distance(&GroupElement::identity(2)),
            0.0,
            "pinned generator must be the exact identity"
        );
        assert!(moduli::residual(&up.target, &p_plus) <= 1e-10);
        for j in 0..1 {
            assert_eq!(p_plus.a[j].distance(&p_minus.a[j]), 0.0);
            assert_eq!(p_plus.b[j].distance(&p_minus.b[j]), 0.0);
        }
    }

    #[test]
    fn sample_vanishing_set_pins_exactly() {
        let vs = LagrangianSpec::vanishing_set(2, vec![(Slot::Alpha, 1)], 2, 1).unwrap();
        let (p_minus, p_plus) = sample_on_correspondence(&vs, 3, &tol()).unwrap();
        assert_eq!(p_minus.a[0].distance(&GroupElement::identity(2)), 0.0);
        assert_eq!(p_plus.genus(), 1);
        assert!(moduli::residual(&vs.source, &p_minus) <= 1e-10);
        assert!(moduli::residual(&vs.target, &p_plus) <= 1e-10);
    }

    #[test]
    fn sample_rejects_empty_endpoints() {
        let m1 = ModuliSpec::new(1, 2, 1).unwrap();
        let empty = LagrangianSpec::empty(m1.clone(), m1);
        assert!(matches!(
            sample_on_correspondence(&empty, 0, &tol()),
            Err(SymplecticError::NotSampleable(_))
        ));
        let down = LagrangianSpec::elem_down(1, Slot::Beta, 1, 2, 1).unwrap();
        assert!(matches!(
            sample_on_correspondence(&down, 0, &tol()),
            Err(SymplecticError::NotSampleable(_))
        ));
    }

    #[test]
    fn pinned_directions_vanish_on_pins_and_stay_cocycles() {
        let vs = LagrangianSpec::vanishing_set(2, vec![(Slot::Alpha, 1)], 2, 1).unwrap();
        let (p, _) = sample_on_correspondence(&vs, 5, &tol()).unwrap();
        let dirs = pinned_tangent_directions(&vs.source, &p, &vs.source_pins(), &tol()).unwrap();
        assert_eq!(dirs.len(), 3);
        let data = moduli::cochain_data(&vs.source, &p);
        for u in &dirs {
            assert!(u.values[0].norm() <= 1e-9, "pinned slot value leaks");
            let c = u.coords(&vs.source);
            assert!((&data.d1 * &c).norm() <= 1e-9);
        }
    }

    #[test]
    fn isotropy_of_elem_up_within_tolerance() {
        let up = LagrangianSpec::elem_up(1, 2, 1).unwrap();
        let report = isotropy_check(&up, 5, 31, &tol()).unwrap();
        assert_eq!(report.directions, 3);
        assert!(report.verdict, "max defect {}", report.max_defect);
    }

    #[test]
    fn isotropy_of_diagonal_is_exact() {
        let diag = LagrangianSpec::diagonal(2, 2, 1).unwrap();
        let report = isotropy_check(&diag, 2, 3, &tol()).unwrap();
        assert_eq!(report.max_defect, 0.0);
        assert_eq!(report.directions, 6);
    }

    #[test]
    fn isotropy_of_vanishing_sets() {
        let vs = LagrangianSpec::vanishing_set(2, vec![(Slot::Alpha, 1)], 2, 1).unwrap();
        let report = isotropy_check(&vs, 5, 13, &tol()).unwrap();
        assert_eq!(report.directions, 3);
        assert!(report.verdict, "max defect {}", report.max_defect);

        let point_target = LagrangianSpec::vanishing_set(
            2,
            vec![(Slot::Alpha, 1), (Slot::Beta, 1)],
            2,
            1,
        )
        .unwrap();
        let report = isotropy_check(&point_target, 2, 19, &tol()).unwrap();
        assert_eq!(report.directions, 0);
        assert!(report.verdict);
    }

    #[test]
    fn isotropy_of_elem_down() {
        let down = LagrangianSpec::elem_down(2, Slot::Beta, 2, 2, 1).unwrap();
        let report = isotropy_check(&down, 3, 43, &tol()).unwrap();
        assert_eq!(report.directions, 3);
        assert!(report.verdict, "max defect {}", report.max_defect);
    }

    #[test]
    fn cancellation_pair_composes_transverse_and_embedded() {
        let up = LagrangianSpec::elem_up(2, 2, 1).unwrap();
        let down = LagrangianSpec::elem_down(3, Slot::Beta, 3, 2, 1).unwrap();
        let report = numeric_composition_check(&up, &down, 3, 59, &tol()).unwrap();
        assert!(report.transverse, "rank defect {}", report.max_rank_defect);
        assert!(report.embedded, "lift clusters {}", report.lift_clusters);
        let spread = report.diagonal_spread.unwrap();
        assert!(spread <= 1e-6, "diagonal spread {spread}");
    }

    #[test]
    fn alpha_killed_fresh_pair_is_neither_transverse_nor_embedded() {
        // Up pins the alpha slot; killing alpha again leaves the beta
        // partner as an unconstrained SU(2) of middle lifts.
        let up = LagrangianSpec::elem_up(2, 2, 1).unwrap();
        let down = LagrangianSpec::elem_down(3, Slot::Alpha, 3, 2, 1).unwrap();
        let report = numeric_composition_check(&up, &down, 2, 61, &tol()).unwrap();
        assert!(!report.embedded);
        assert!(!report.transverse);
    }

    #[test]
    fn diagonal_pair_composes_trivially() {
        let diag = LagrangianSpec::diagonal(2, 2, 1).unwrap();
        let report = numeric_composition_check(&diag, &diag, 2, 67, &tol()).unwrap();
        assert!(report.transverse);
        assert!(report.embedded);
        assert_eq!(report.diagonal_spread, Some(0.0));
    }

    #[test]
    fn switch_pair_composes_transversally_in_both_orders() {
        let up_then_down = (
            LagrangianSpec::elem_up(2, 2, 1).unwrap(),
            LagrangianSpec::elem_down(3, Slot::Alpha, 1, 2, 1).unwrap(),
        );
        let down_then_up = (
            LagrangianSpec::elem_down(2, Slot::Alpha, 1, 2, 1).unwrap(),
            LagrangianSpec::elem_up(1, 2, 1).unwrap(),
        );
        for (l1, l2) in [up_then_down, down_then_up] {
            let report = numeric_composition_check(&l1, &l2, 2, 71, &tol()).unwrap();
            assert!(report.transverse, "{l1} then {l2}: defect {}", report.max_rank_defect);
            assert!(report.embedded, "{l1} then {l2}");
        }
    }
}
