//! Twisted representation spaces of surface groups: points of
//! {(a, b) in SU(r)^2g : prod [a_j, b_j] = z} / conjugation for the
//! central twist z = exp(2 pi i d/r) Id, their twisted cohomology, tangent
//! bases, and conjugation-invariant fingerprints for clustering.
//!
//! Generator order is interleaved: (a_1, b_1, ..., a_g, b_g). Tangent data
//! lives in left-cocycle coordinates: a cocycle u assigns to each generator
//! x the value u(x) = (d/dt) x(t) x^{-1}, extended to words by
//! u(vw) = u(v) + Ad(rho(v)) u(w).

use crate::bordism::{BordismError, SurfaceLabel};
use crate::config::Tolerances;
use crate::lie::{
    ad_matrix, adjoint_action, commutator, expm, polar_special_unitary, random_algebra_element,
    retract, su_basis, AlgebraElement, CMatrix, GroupElement,
};
use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModuliError {
    #[error(transparent)]
    Label(#[from] BordismError),
    #[error("solver failed after {restarts} restarts; best residual {best_residual:.3e}")]
    SolverFailed { restarts: u32, best_residual: f64 },
    #[error("rank decision indeterminate: singular value {sigma:.3e} inside band ({lo:.3e}, {hi:.3e})")]
    RankIndeterminate { sigma: f64, lo: f64, hi: f64 },
    #[error("point has {got} generator pairs, spec wants {want}")]
    ShapeMismatch { got: usize, want: usize },
    #[error("residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
}

/// Defining data of one twisted moduli space.
#[derive(Clone, Debug, Serialize)]
pub struct ModuliSpec {
    pub genus: usize,
    pub rank: usize,
    pub degree: i64,
    /// Central twist exp(2 pi i d/r) Id; z^r = Id to machine precision.
    #[serde(skip)]
    pub twist: GroupElement,
    /// (2g - 2)(r^2 - 1); negative values flag the empty and point cases.
    pub expected_dim: i64,
    /// The rational 1/(2r), carried in reports, never verified.
    pub monotonicity_metadata: (i64, i64),
}

impl ModuliSpec {
    pub fn new(genus: usize, rank: usize, degree: i64) -> Result<Self, ModuliError> {
        // Reuse the label checks: rank >= 2 and gcd(r, d) = 1.
        let label = SurfaceLabel::new(genus, rank, degree)?;
        Ok(Self::from_label(label))
    }

    pub fn from_label(label: SurfaceLabel) -> Self {
        let r = label.rank;
        let m = (r * r - 1) as i64;
        let twist = GroupElement::central(r, label.degree);
        debug_assert!(
            twist
                .matrix()
                .pow(r as u32)
                .iter()
                .zip(CMatrix::identity(r, r).iter())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt()
                <= 1e-12
        );
        ModuliSpec {
            genus: label.genus,
            rank: r,
            degree: label.degree,
            twist,
            expected_dim: (2 * label.genus as i64 - 2) * m,
            monotonicity_metadata: (1, 2 * r as i64),
        }
    }

    /// Dimension of su(r).
    pub fn algebra_dim(&self) -> usize {
        self.rank * self.rank - 1
    }

    pub fn generator_count(&self) -> usize {
        2 * self.genus
    }
}

/// A solution of prod [a_j, b_j] = z, stored as interleaved generators.
#[derive(Clone, Debug)]
pub struct RepPoint {
    pub a: Vec<GroupElement>,
    pub b: Vec<GroupElement>,
}

impl RepPoint {
    pub fn new(
        spec: &ModuliSpec,
        a: Vec<GroupElement>,
        b: Vec<GroupElement>,
        tol: &Tolerances,
    ) -> Result<Self, ModuliError> {
        if a.len() != spec.genus || b.len() != spec.genus {
            return Err(ModuliError::ShapeMismatch {
                got: a.len().min(b.len()),
                want: spec.genus,
            });
        }
        let p = RepPoint { a, b };
        let res = residual(spec, &p);
        if res > tol.residual {
            return Err(ModuliError::ResidualTooLarge {
                residual: res,
                tol: tol.residual,
            });
        }
        Ok(p)
    }

    pub fn genus(&self) -> usize {
        self.a.len()
    }

    /// Generator x_i in the interleaved order (a_1, b_1, a_2, b_2, ...).
    pub fn generator(&self, i: usize) -> &GroupElement {
        if i.is_multiple_of(2) {
            &self.a[i / 2]
        } else {
            &self.b[i / 2]
        }
    }

    pub fn generators(&self) -> Vec<GroupElement> {
        (0..2 * self.genus()).map(|i| self.generator(i).clone()).collect()
    }

    /// Simultaneous conjugation g . (a, b) = (g a g^-1, g b g^-1).
    pub fn conjugate(&self, g: &GroupElement) -> RepPoint {
        let gi = g.inverse();
        let conj = |x: &GroupElement| {
            GroupElement::from_matrix_unchecked(g.matrix() * x.matrix() * gi.matrix())
        };
        RepPoint {
            a: self.a.iter().map(conj).collect(),
            b: self.b.iter().map(conj).collect(),
        }
    }
}

/// One letter of a word in the generators: generator index, possibly inverted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Letter {
    pub gen: usize,
    pub inverse: bool,
}

/// The relator prod_j a_j b_j a_j^-1 b_j^-1 as 4g letters.
pub fn relator_letters(genus: usize) -> Vec<Letter> {
    let mut out = Vec::with_capacity(4 * genus);
    for j in 0..genus {
        let (a, b) = (2 * j, 2 * j + 1);
        out.push(Letter { gen: a, inverse: false });
        out.push(Letter { gen: b, inverse: false });
        out.push(Letter { gen: a, inverse: true });
        out.push(Letter { gen: b, inverse: true });
    }
    out
}

pub fn evaluate_word(p: &RepPoint, word: &[Letter]) -> GroupElement {
    let r = p.generator(0).rank();
    let mut m = CMatrix::identity(r, r);
    for l in word {
        let g = p.generator(l.gen).matrix();
        if l.inverse {
            m *= g.adjoint();
        } else {
            m *= g.clone();
        }
    }
    GroupElement::from_matrix_unchecked(m)
}

/// prod_j [a_j, b_j] as a group element.
pub fn relator_value(p: &RepPoint) -> GroupElement {
    let r = p.generator(0).rank();
    let mut m = CMatrix::identity(r, r);
    for j in 0..p.genus() {
        m *= commutator(&p.a[j], &p.b[j]).matrix();
    }
    GroupElement::from_matrix_unchecked(m)
}

/// Frobenius defect of the defining equation.
pub fn residual(spec: &ModuliSpec, p: &RepPoint) -> f64 {
    if spec.genus == 0 {
        return spec.twist.distance(&GroupElement::identity(spec.rank));
    }
    relator_value(p).distance(&spec.twist)
}

/// Tangent vector in left-cocycle coordinates: values of u on the
/// interleaved generators.
#[derive(Clone, Debug)]
pub struct TwistedCocycle {
    pub values: Vec<AlgebraElement>,
}

impl TwistedCocycle {
    pub fn zero(spec: &ModuliSpec) -> Self {
        TwistedCocycle {
            values: vec![AlgebraElement::zero(spec.rank); spec.generator_count()],
        }
    }

    pub fn from_coords(spec: &ModuliSpec, coords: &DVector<f64>) -> Self {
        let m = spec.algebra_dim();
        let basis = su_basis(spec.rank);
        let values = (0..spec.generator_count())
            .map(|i| crate::lie::from_coords(&coords.rows(i * m, m).into_owned(), &basis))
            .collect();
        TwistedCocycle { values }
    }

    pub fn coords(&self, spec: &ModuliSpec) -> DVector<f64> {
        let m = spec.algebra_dim();
        let basis = su_basis(spec.rank);
        let mut out = DVector::zeros(spec.generator_count() * m);
        for (i, v) in self.values.iter().enumerate() {
            out.rows_mut(i * m, m).copy_from(&crate::lie::coords(v, &basis));
        }
        out
    }

    pub fn norm(&self, _spec: &ModuliSpec) -> f64 {
        self.values.iter().map(|v| v.norm().powi(2)).sum::<f64>().sqrt()
    }

    /// u on an arbitrary word by the prefix expansion
    /// u(l_1 ... l_n) = sum_k Ad(rho(l_1 ... l_{k-1})) u(l_k),
    /// with u(x^-1) = -Ad(x^-1) u(x).
    pub fn evaluate(&self, p: &RepPoint, word: &[Letter]) -> AlgebraElement {
        let r = p.generator(0).rank();
        let mut prefix = GroupElement::identity(r);
        let mut total = AlgebraElement::zero(r);
        for l in word {
            let x = p.generator(l.gen);
            let u_letter = if l.inverse {
                adjoint_action(&x.inverse(), &self.values[l.gen]).scale(-1.0)
            } else {
                self.values[l.gen].clone()
            };
            total = total.add(&adjoint_action(&prefix, &u_letter));
            let xm = if l.inverse {
                x.inverse().matrix().clone()
            } else {
                x.matrix().clone()
            };
            prefix = GroupElement::from_matrix_unchecked(prefix.matrix() * xm);
        }
        total
    }
}

/// The twisted cochain pair at a solution: d0 sends an algebra element to
/// the coboundary cocycle, d1 sends a cocycle to u(relator). Both in the
/// fixed su(r) basis; d1 d0 = 0 because the relator value is central.
#[derive(Clone, Debug)]
pub struct CochainData {
    pub d0: DMatrix<f64>,
    pub d1: DMatrix<f64>,
}

pub fn cochain_data(spec: &ModuliSpec, p: &RepPoint) -> CochainData {
    let m = spec.algebra_dim();
    let n = spec.generator_count();
    let basis = su_basis(spec.rank);
    let eye = DMatrix::<f64>::identity(m, m);

    let mut d0 = DMatrix::<f64>::zeros(n * m, m);
    for i in 0..n {
        let block = &eye - ad_matrix(p.generator(i), &basis);
        d0.view_mut((i * m, 0), (m, m)).copy_from(&block);
    }

    // d1 block for generator i: sum over occurrences of x_i in the relator
    // of +-Ad(prefix) (and Ad(x_i^-1) inside for inverse letters).
    let letters = relator_letters(spec.genus);
    let mut d1 = DMatrix::<f64>::zeros(m, n * m);
    let r = spec.rank;
    let mut prefix = GroupElement::identity(r);
    for l in &letters {
        let x = p.generator(l.gen);
        let coeff = if l.inverse {
            let shifted = GroupElement::from_matrix_unchecked(prefix.matrix() * x.inverse().matrix());
            -ad_matrix(&shifted, &basis)
        } else {
            ad_matrix(&prefix, &basis)
        };
        let mut block = d1.view_mut((0, l.gen * m), (m, m));
        block += coeff;
        let step = if l.inverse {
            x.inverse().matrix().clone()
        } else {
            x.matrix().clone()
        };
        prefix = GroupElement::from_matrix_unchecked(prefix.matrix() * step);
    }
    CochainData { d0, d1 }
}

/// Singular values split into kept and discarded by the threshold rule:
/// below 1e-7 of the largest is zero, anything inside the indeterminate
/// band aborts rather than guesses.
pub fn thresholded_rank(sv: &[f64], tol: &Tolerances) -> Result<usize, ModuliError> {
    let sigma_max = sv.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max == 0.0 {
        return Ok(0);
    }
    let (lo, hi) = (tol.rank_band_lo * sigma_max, tol.rank_band_hi * sigma_max);
    if let Some(&s) = sv.iter().find(|&&s| s > lo && s < hi) {
        return Err(ModuliError::RankIndeterminate { sigma: s, lo, hi });
    }
    Ok(sv.iter().filter(|&&s| s >= tol.rank_zero * sigma_max).count())
}

pub fn singular_values(mat: &DMatrix<f64>) -> Vec<f64> {
    if mat.nrows() == 0 || mat.ncols() == 0 {
        return Vec::new();
    }
    mat.clone().svd(false, false).singular_values.iter().cloned().collect()
}

/// (h0, h1, h2) of the twisted complex at p. For coprime (r, d) at any
/// solution h0 = h2 = 0 and h1 = (2g - 2)(r^2 - 1).
pub fn cohomology_dims(
    spec: &ModuliSpec,
    p: &RepPoint,
    tol: &Tolerances,
) -> Result<(usize, usize, usize), ModuliError> {
    let m = spec.algebra_dim();
    let n = spec.generator_count();
    let data = cochain_data(spec, p);
    let rank_d0 = thresholded_rank(&singular_values(&data.d0), tol)?;
    let rank_d1 = thresholded_rank(&singular_values(&data.d1), tol)?;
    let h0 = m - rank_d0;
    let h1 = (n * m - rank_d1) - rank_d0;
    let h2 = m - rank_d1;
    Ok((h0, h1, h2))
}

/// Orthonormal basis of ker d1 intersected with the orthogonal complement
/// of im d0: harmonic representatives of the tangent space.
pub fn tangent_basis(
    spec: &ModuliSpec,
    p: &RepPoint,
    tol: &Tolerances,
) -> Result<Vec<TwistedCocycle>, ModuliError> {
    let data = cochain_data(spec, p);
    let (_, h1, _) = cohomology_dims(spec, p, tol)?;
    if h1 == 0 {
        return Ok(Vec::new());
    }
    let dim = data.d1.ncols();

    // Kernel of the wide matrix d1 through its Gram matrix: eigenvectors
    // of d1^T d1 whose eigenvalue is negligible against the largest.
    let gram = data.d1.transpose() * &data.d1;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = (tol.rank_zero * tol.rank_zero) * lambda_max.max(f64::MIN_POSITIVE);
    let mut kernel_cols: Vec<DVector<f64>> = Vec::new();
    for i in 0..dim {
        if eig.eigenvalues[i] < cutoff {
            kernel_cols.push(eig.eigenvectors.column(i).into_owned());
        }
    }

    // Orthonormal basis of im d0 from its left singular vectors.
    let svd0 = data.d0.clone().svd(true, false);
    let u0 = svd0.u.expect("svd requested u");
    let s0max = svd0.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let im_cols: Vec<DVector<f64>> = (0..svd0.singular_values.len())
        .filter(|&i| svd0.singular_values[i] >= tol.rank_zero * s0max.max(f64::MIN_POSITIVE))
        .map(|i| u0.column(i).into_owned())
        .collect();

    // Project the kernel away from im d0, then re-orthonormalize.
    let mut projected = DMatrix::<f64>::zeros(dim, kernel_cols.len());
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
    let pmax = svdp.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let mut out = Vec::new();
    for i in 0..svdp.singular_values.len() {
        if svdp.singular_values[i] >= tol.rank_zero * pmax {
            out.push(TwistedCocycle::from_coords(spec, &up.column(i).into_owned()));
        }
    }
    if out.len() != h1 {
        return Err(ModuliError::RankIndeterminate {
            sigma: pmax,
            lo: 0.0,
            hi: 0.0,
        });
    }
    Ok(out)
}

/// Name of the fingerprint word list; emitted with every report so
/// clusterings stay comparable across runs.
pub const FINGERPRINT_VERSION: &str = "singles-pairs-prefixes-v1";

/// Re/Im traces of rho(w) over the fixed word list: all single generators,
/// all ordered generator pairs, all relator prefixes. Invariant under
/// simultaneous conjugation.
pub fn conj_fingerprint(spec: &ModuliSpec, p: &RepPoint) -> DVector<f64> {
    let n = spec.generator_count();
    let mut words: Vec<Vec<Letter>> = Vec::new();
    for i in 0..n {
        words.push(vec![Letter { gen: i, inverse: false }]);
    }
    for i in 0..n {
        for j in 0..n {
            words.push(vec![
                Letter { gen: i, inverse: false },
                Letter { gen: j, inverse: false },
            ]);
        }
    }
    let letters = relator_letters(spec.genus);
    for k in 1..=letters.len() {
        words.push(letters[..k].to_vec());
    }
    let mut out = DVector::zeros(2 * words.len());
    for (i, w) in words.iter().enumerate() {
        let t = evaluate_word(p, w).trace();
        out[2 * i] = t.re;
        out[2 * i + 1] = t.im;
    }
    out
}

/// A conjugation class recovered from fingerprints: representative index,
/// members, and the stored fingerprint of the representative.
#[derive(Clone, Debug)]
pub struct Cluster {
    pub representative: usize,
    pub members: Vec<usize>,
    pub fingerprint: DVector<f64>,
}

/// Greedy clustering by fingerprint distance. Points are taken in input
/// order; callers sort by seed for determinism.
pub fn cluster_points(
    spec: &ModuliSpec,
    points: &[RepPoint],
    tol: &Tolerances,
) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let fp = conj_fingerprint(spec, p);
        match clusters
            .iter_mut()
            .find(|c| (&c.fingerprint - &fp).norm() <= tol.cluster)
        {
            Some(c) => c.members.push(i),
            None => clusters.push(Cluster {
                representative: i,
                members: vec![i],
                fingerprint: fp,
            }),
        }
    }
    clusters
}

/// Largest pairwise fingerprint distance within one cluster of points.
pub fn cluster_spread(spec: &ModuliSpec, points: &[RepPoint]) -> f64 {
    let fps: Vec<DVector<f64>> = points.iter().map(|p| conj_fingerprint(spec, p)).collect();
    let mut spread = 0.0f64;
    for i in 0..fps.len() {
        for j in (i + 1)..fps.len() {
            spread = spread.max((&fps[i] - &fps[j]).norm());
        }
    }
    spread
}

#[derive(Clone, Debug)]
pub enum SolveOutcome {
    /// No solutions exist; decided analytically, never by optimization.
    Empty,
    Point {
        point: RepPoint,
        iterations: u64,
        restarts: u32,
    },
}

impl SolveOutcome {
    pub fn point(self) -> Option<RepPoint> {
        match self {
            SolveOutcome::Point { point, .. } => Some(point),
            SolveOutcome::Empty => None,
        }
    }
}

/// Left-trivialized Jacobian of the residual in the right-increment
/// coordinates xi_i (x_i(t) = x_i exp(t xi_i)): real 2r^2 x (free m)
/// matrix whose column for (i, k) is vec(C_i Ad(x_i) T_k . mu). The
/// cocycle conversion u_i = Ad(x_i) xi_i links it to d1. Columns are
/// emitted only for the generators listed in `free`.
fn solver_jacobian(
    spec: &ModuliSpec,
    p: &RepPoint,
    basis: &[AlgebraElement],
    d1: &DMatrix<f64>,
    free: &[usize],
) -> DMatrix<f64> {
    let r = spec.rank;
    let m = spec.algebra_dim();
    let n = spec.generator_count();
    let mu = relator_value(p);
    let mut jac = DMatrix::<f64>::zeros(2 * r * r, free.len() * m);
    for (fi, &i) in free.iter().enumerate() {
        let adx = ad_matrix(p.generator(i), basis);
        for k in 0..m {
            // u coordinates of Ad(x_i) T_k.
            let mut u_coords = DVector::<f64>::zeros(n * m);
            u_coords.rows_mut(i * m, m).copy_from(&adx.column(k));
            let du = d1 * &u_coords;
            let u_alg = crate::lie::from_coords(&du, basis);
            let dmu = u_alg.matrix() * mu.matrix();
            let col = (fi * m + k, realvec(&dmu));
            jac.set_column(col.0, &col.1);
        }
    }
    jac
}

fn realvec(mat: &CMatrix) -> DVector<f64> {
    let mut out = DVector::zeros(2 * mat.len());
    for (idx, v) in mat.iter().enumerate() {
        out[2 * idx] = v.re;
        out[2 * idx + 1] = v.im;
    }
    out
}

fn random_start(spec: &ModuliSpec, pins: &[usize], rng: &mut ChaCha8Rng) -> RepPoint {
    let r = spec.rank;
    let mut draw = |i: usize| -> GroupElement {
        if pins.contains(&i) {
            GroupElement::identity(r)
        } else {
            expm(&random_algebra_element(r, rng))
        }
    };
    let a = (0..spec.genus).map(|j| draw(2 * j)).collect();
    let b = (0..spec.genus).map(|j| draw(2 * j + 1)).collect();
    RepPoint { a, b }
}

/// Pinned generators are copied untouched, so an identity pin stays the
/// exact identity matrix through every iteration.
fn apply_step(
    p: &RepPoint,
    basis: &[AlgebraElement],
    delta: &DVector<f64>,
    pins: &[usize],
) -> RepPoint {
    let m = basis.len();
    let take = |p: &RepPoint, i: usize| -> GroupElement {
        if pins.contains(&i) {
            return p.generator(i).clone();
        }
        let xi = crate::lie::from_coords(&delta.rows(i * m, m).into_owned(), basis);
        retract(p.generator(i), &xi)
    };
    let g = p.genus();
    let mut a = Vec::with_capacity(g);
    let mut b = Vec::with_capacity(g);
    for j in 0..g {
        a.push(take(p, 2 * j));
        b.push(take(p, 2 * j + 1));
    }
    RepPoint { a, b }
}

/// Damped Gauss-Newton with exp-retraction per generator; step halving on
/// non-decrease, plain gradient descent after three consecutive rejected
/// iterations, fresh random restarts after stagnation.
pub fn solve_point(
    spec: &ModuliSpec,
    seed: u64,
    tol: &Tolerances,
) -> Result<SolveOutcome, ModuliError> {
    solve_point_pinned(spec, &[], seed, tol)
}

/// `solve_point` with the generators listed in `pins` (flat indices, 2j
/// for a_j and 2j+1 for b_j) held at the exact identity matrix; the
/// search runs over the free generators only.
pub fn solve_point_pinned(
    spec: &ModuliSpec,
    pins: &[usize],
    seed: u64,
    tol: &Tolerances,
) -> Result<SolveOutcome, ModuliError> {
    let n = spec.generator_count();
    assert!(pins.iter().all(|&i| i < n), "pin index out of range");
    if spec.genus == 0 {
        // The empty product is Id and Id != z for coprime twists.
        return Ok(SolveOutcome::Empty);
    }
    let free: Vec<usize> = (0..n).filter(|i| !pins.contains(i)).collect();
    let m = spec.algebra_dim();
    let basis = su_basis(spec.rank);
    let scatter = |reduced: &DVector<f64>| -> DVector<f64> {
        let mut full = DVector::<f64>::zeros(n * m);
        for (fi, &i) in free.iter().enumerate() {
            full.rows_mut(i * m, m).copy_from(&reduced.rows(fi * m, m));
        }
        full
    };
    let mut best_residual = f64::INFINITY;
    let mut total_iterations = 0u64;
    for restart in 0..=tol.max_restarts {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut p = random_start(spec, pins, &mut rng);
        let mut rejections = 0u32;
        let mut gradient_mode = false;
        for _ in 0..tol.max_iterations {
            total_iterations += 1;
            let res = residual(spec, &p);
            best_residual = best_residual.min(res);
            if res <= tol.residual {
                return Ok(SolveOutcome::Point {
                    point: p,
                    iterations: total_iterations,
                    restarts: restart as u32,
                });
            }
            if free.is_empty() {
                // Everything is pinned and the relator still misses the
                // twist; no iteration can change that.
                break;
            }
            let data = cochain_data(spec, &p);
            let jac = solver_jacobian(spec, &p, &basis, &data.d1, &free);
            let f = realvec(&(relator_value(&p).matrix() - spec.twist.matrix()));
            let direction = if gradient_mode {
                -(jac.transpose() * &f)
            } else {
                let svd = jac.clone().svd(true, true);
                match svd.solve(&f, 1e-12) {
                    Ok(sol) => -sol,
                    Err(_) => -(jac.transpose() * &f),
                }
            };
            let f0 = res * res;
            let mut alpha = 1.0f64;
            let mut accepted = false;
            for _ in 0..30 {
                let candidate = apply_step(&p, &basis, &scatter(&(&direction * alpha)), pins);
                let res_new = residual(spec, &candidate);
                if res_new * res_new < f0 {
                    p = candidate;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                rejections = 0;
                gradient_mode = false;
            } else {
                rejections += 1;
                if rejections >= 3 {
                    if gradient_mode {
                        // Stuck in both modes; trigger a restart.
                        break;
                    }
                    gradient_mode = true;
                    rejections = 0;
                }
            }
        }
    }
    Err(ModuliError::SolverFailed {
        restarts: tol.max_restarts as u32,
        best_residual,
    })
}

/// Central finite differences of the relator value against the analytic
/// d1, on unit random cocycle directions. Returns the worst relative error.
pub fn jacobian_fd_error(
    spec: &ModuliSpec,
    p: &RepPoint,
    directions: usize,
    seed: u64,
    tol: &Tolerances,
) -> f64 {
    let m = spec.algebra_dim();
    let n = spec.generator_count();
    let basis = su_basis(spec.rank);
    let data = cochain_data(spec, p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = tol.fd_step;
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let mut u = DVector::<f64>::zeros(n * m);
        for v in u.iter_mut() {
            *v = rng.random::<f64>() - 0.5;
        }
        u /= u.norm();
        let analytic = crate::lie::from_coords(&(&data.d1 * &u), &basis);

        let perturb = |sign: f64| -> CMatrix {
            let mut q = p.clone();
            for i in 0..n {
                let ui = crate::lie::from_coords(&u.rows(i * m, m).into_owned(), &basis);
                let shift = expm(&ui.scale(sign * h));
                let newm = shift.matrix() * p.generator(i).matrix();
                let g = polar_special_unitary(&newm);
                if i % 2 == 0 {
                    q.a[i / 2] = g;
                } else {
                    q.b[i / 2] = g;
                }
            }
            relator_value(&q).matrix().clone()
        };
        let mu0 = relator_value(p);
        let diff = (perturb(1.0) - perturb(-1.0)) / Complex::new(2.0 * h, 0.0);
        let fd_raw = diff * mu0.inverse().matrix();
        // Project to su(r): anti-Hermitian traceless part.
        let anti = (&fd_raw - fd_raw.adjoint()) * Complex::new(0.5, 0.0);
        let tr = anti.trace() / Complex::new(spec.rank as f64, 0.0);
        let mut proj = anti.clone();
        for i in 0..spec.rank {
            proj[(i, i)] -= tr;
        }
        let fd = AlgebraElement::new(proj).expect("projection lands in su(r)");
        let denom = fd.norm().max(1e-12);
        let err = analytic.sub(&fd).norm() / denom;
        worst = worst.max(err);
    }
    worst
}
