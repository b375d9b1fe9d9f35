//! SU(r) and su(r) numerics in a fixed orthonormal basis.
//!
//! Group elements are unitary with determinant 1, algebra elements are
//! anti-Hermitian and traceless; both invariants are enforced on
//! construction. The basic inner product is <x, z> = -Re tr(x z), under
//! which `su_basis` is orthonormal and Ad acts orthogonally.

use nalgebra::{Complex, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub type CMatrix = DMatrix<Complex<f64>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("expected a square matrix of size {expected}, got {rows}x{cols}")]
    Shape {
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("unitarity residual {residual:.3e} exceeds {tol:.3e}")]
    NotUnitary { residual: f64, tol: f64 },
    #[error("determinant residual {residual:.3e} exceeds {tol:.3e}")]
    DeterminantDrift { residual: f64, tol: f64 },
    #[error("anti-Hermitian residual {residual:.3e} exceeds {tol:.3e}")]
    NotAntiHermitian { residual: f64, tol: f64 },
    #[error("trace residual {residual:.3e} exceeds {tol:.3e}")]
    NotTraceless { residual: f64, tol: f64 },
    #[error("rank {0} is not supported, need 2 <= r")]
    RankUnsupported(usize),
}

/// Construction tolerance for group and algebra invariants.
pub const STRUCT_TOL: f64 = 1e-12;

fn complex(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

/// Unitary r x r matrix with determinant 1.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    m: CMatrix,
}

/// Anti-Hermitian traceless r x r matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    m: CMatrix,
}

impl GroupElement {
    /// Validates unitarity and determinant before accepting the matrix.
    pub fn new(m: CMatrix) -> Result<Self, LieError> {
        let r = m.nrows();
        if m.ncols() != r || r < 2 {
            return Err(LieError::Shape {
                rows: m.nrows(),
                cols: m.ncols(),
                expected: r.max(2),
            });
        }
        let residual = (&m * m.adjoint() - CMatrix::identity(r, r)).norm();
        if residual > STRUCT_TOL {
            return Err(LieError::NotUnitary {
                residual,
                tol: STRUCT_TOL,
            });
        }
        let det_residual = (m.determinant() - complex(1.0, 0.0)).norm();
        if det_residual > STRUCT_TOL {
            return Err(LieError::DeterminantDrift {
                residual: det_residual,
                tol: STRUCT_TOL,
            });
        }
        Ok(GroupElement { m })
    }

    /// Skips validation; for internal products of already valid elements.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        GroupElement { m }
    }

    pub fn identity(r: usize) -> Self {
        GroupElement {
            m: CMatrix::identity(r, r),
        }
    }

    /// Central element exp(2 pi i k / r) Id.
    pub fn central(r: usize, k: i64) -> Self {
        let phase = 2.0 * std::f64::consts::PI * (k as f64) / (r as f64);
        let c = Complex::from_polar(1.0, phase);
        GroupElement {
            m: CMatrix::identity(r, r) * c,
        }
    }

    pub fn rank(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            m: &self.m * &other.m,
        }
    }

    /// Inverse of a unitary is its adjoint.
    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            m: self.m.adjoint(),
        }
    }

    pub fn trace(&self) -> Complex<f64> {
        self.m.trace()
    }

    /// Frobenius distance to another element.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        (&self.m - &other.m).norm()
    }

    /// Residual of the structural invariants, for diagnostics.
    pub fn structure_residual(&self) -> f64 {
        let r = self.rank();
        let unit = (&self.m * self.m.adjoint() - CMatrix::identity(r, r)).norm();
        let det = (self.m.determinant() - complex(1.0, 0.0)).norm();
        unit.max(det)
    }
}

impl AlgebraElement {
    pub fn new(m: CMatrix) -> Result<Self, LieError> {
        let r = m.nrows();
        if m.ncols() != r || r < 2 {
            return Err(LieError::Shape {
                rows: m.nrows(),
                cols: m.ncols(),
                expected: r.max(2),
            });
        }
        let ah = (&m + m.adjoint()).norm();
        if ah > STRUCT_TOL {
            return Err(LieError::NotAntiHermitian {
                residual: ah,
                tol: STRUCT_TOL,
            });
        }
        let tr = m.trace().norm();
        if tr > STRUCT_TOL {
            return Err(LieError::NotTraceless {
                residual: tr,
                tol: STRUCT_TOL,
            });
        }
        Ok(AlgebraElement { m })
    }

    pub fn zero(r: usize) -> Self {
        AlgebraElement {
            m: CMatrix::zeros(r, r),
        }
    }

    pub fn rank(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn scale(&self, t: f64) -> AlgebraElement {
        AlgebraElement {
            m: &self.m * complex(t, 0.0),
        }
    }

    pub fn add(&self, other: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            m: &self.m - &other.m,
        }
    }

    pub fn norm(&self) -> f64 {
        basic_inner(self, self).sqrt()
    }
}

/// <x, z> = -Re tr(x z); positive definite on su(r).
pub fn basic_inner(x: &AlgebraElement, z: &AlgebraElement) -> f64 {
    -((&x.m * &z.m).trace().re)
}

/// Ad(g) x = g x g^-1; preserves the basic inner product.
pub fn adjoint_action(g: &GroupElement, x: &AlgebraElement) -> AlgebraElement {
    AlgebraElement {
        m: &g.m * &x.m * g.m.adjoint(),
    }
}

/// Group commutator a b a^-1 b^-1.
pub fn commutator(a: &GroupElement, b: &GroupElement) -> GroupElement {
    GroupElement {
        m: &a.m * &b.m * a.m.adjoint() * b.m.adjoint(),
    }
}

/// Nearest unitary factor of an invertible matrix, with the determinant
/// phase spread evenly so the result lands in SU(r).
pub fn polar_special_unitary(m: &CMatrix) -> GroupElement {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd U requested");
    let v_t = svd.v_t.expect("svd V^T requested");
    let mut q = u * v_t;
    let r = q.nrows();
    let det = q.determinant();
    let phase = det.arg();
    let fix = Complex::from_polar(1.0, -phase / (r as f64));
    q *= fix;
    GroupElement { m: q }
}

/// Matrix exponential by scaling and squaring with a degree 13 Pade
/// approximant; accurate to around 1e-15 relative on su(r) inputs.
pub fn expm(x: &AlgebraElement) -> GroupElement {
    let e = expm_raw(&x.m);
    // exp of anti-Hermitian traceless is unitary with det 1 up to roundoff;
    // re-polarize so structural invariants hold exactly enough downstream.
    polar_special_unitary(&e)
}

fn one_norm(m: &CMatrix) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..m.ncols() {
        let s: f64 = (0..m.nrows()).map(|i| m[(i, j)].norm()).sum();
        best = best.max(s);
    }
    best
}

fn expm_raw(a: &CMatrix) -> CMatrix {
    const THETA_13: f64 = 5.371920351148152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let r = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * complex(0.5f64.powi(s), 0.0);
    let id = CMatrix::identity(r, r);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let w1 = &a6 * complex(B[13], 0.0) + &a4 * complex(B[11], 0.0) + &a2 * complex(B[9], 0.0);
    let w2 = &a6 * complex(B[7], 0.0)
        + &a4 * complex(B[5], 0.0)
        + &a2 * complex(B[3], 0.0)
        + &id * complex(B[1], 0.0);
    let u = &a * (&a6 * w1 + w2);
    let z1 = &a6 * complex(B[12], 0.0) + &a4 * complex(B[10], 0.0) + &a2 * complex(B[8], 0.0);
    let v = &a6 * z1
        + &a6 * complex(B[6], 0.0)
        + &a4 * complex(B[4], 0.0)
        + &a2 * complex(B[2], 0.0)
        + &id * complex(B[0], 0.0);
    let p = &v + &u;
    let q = &v - &u;
    let mut e = q.lu().solve(&p).expect("Pade denominator invertible");
    for _ in 0..s {
        e = &e * &e;
    }
    e
}

/// g * exp(x), re-unitarized by polar decomposition with the determinant
/// phase rescaled back to 1.
pub fn retract(g: &GroupElement, x: &AlgebraElement) -> GroupElement {
    let e = expm_raw(&x.m);
    polar_special_unitary(&(&g.m * e))
}

/// Orthonormal basis of su(r) for the basic inner product, in a fixed
/// order: real antisymmetric pairs (j<k), imaginary symmetric pairs (j<k),
/// then diagonal elements. Length r^2 - 1.
pub fn su_basis(r: usize) -> Vec<AlgebraElement> {
    assert!(r >= 2, "need r >= 2");
    let mut basis = Vec::with_capacity(r * r - 1);
    let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
    for j in 0..r {
        for k in (j + 1)..r {
            let mut m = CMatrix::zeros(r, r);
            m[(j, k)] = complex(inv_sqrt2, 0.0);
            m[(k, j)] = complex(-inv_sqrt2, 0.0);
            basis.push(AlgebraElement { m });
        }
    }
    for j in 0..r {
        for k in (j + 1)..r {
            let mut m = CMatrix::zeros(r, r);
            m[(j, k)] = complex(0.0, inv_sqrt2);
            m[(k, j)] = complex(0.0, inv_sqrt2);
            basis.push(AlgebraElement { m });
        }
    }
    for t in 1..r {
        let scale = 1.0 / ((t * (t + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(r, r);
        for j in 0..t {
            m[(j, j)] = complex(0.0, scale);
        }
        m[(t, t)] = complex(0.0, -(t as f64) * scale);
        basis.push(AlgebraElement { m });
    }
    debug_assert_eq!(basis.len(), r * r - 1);
    basis
}

/// Coordinates of x in `su_basis(r)`.
pub fn coords(x: &AlgebraElement, basis: &[AlgebraElement]) -> DVector<f64> {
    DVector::from_iterator(basis.len(), basis.iter().map(|e| basic_inner(x, e)))
}

/// Inverse of `coords`.
pub fn from_coords(v: &DVector<f64>, basis: &[AlgebraElement]) -> AlgebraElement {
    let r = basis[0].rank();
    let mut m = CMatrix::zeros(r, r);
    for (c, e) in v.iter().zip(basis.iter()) {
        m += &e.m * complex(*c, 0.0);
    }
    AlgebraElement { m }
}

/// Matrix of Ad(g) in `su_basis(r)`; orthogonal.
pub fn ad_matrix(g: &GroupElement, basis: &[AlgebraElement]) -> DMatrix<f64> {
    let n = basis.len();
    let mut m = DMatrix::zeros(n, n);
    for (k, e) in basis.iter().enumerate() {
        let col = coords(&adjoint_action(g, e), basis);
        m.set_column(k, &col);
    }
    m
}

/// Gaussian algebra element with independent unit-variance coordinates.
pub fn random_algebra_element<R: rand::Rng>(r: usize, rng: &mut R) -> AlgebraElement {
    let basis = su_basis(r);
    let v = DVector::from_iterator(
        basis.len(),
        (0..basis.len()).map(|_| StandardNormal.sample(rng)),
    );
    from_coords(&v, &basis)
}

/// exp of a scaled Gaussian algebra element; deterministic in the seed.
pub fn random_group_element(r: usize, seed: u64) -> GroupElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_algebra_element(r, &mut rng).scale(0.7);
    expm(&x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[complex(0.0, 0.0), complex(1.0, 0.0), complex(1.0, 0.0), complex(0.0, 0.0)])
    }

    fn diag_i() -> AlgebraElement {
        // diag(i, -i)
        AlgebraElement::new(CMatrix::from_diagonal(&DVector::from_vec(vec![
            complex(0.0, 1.0),
            complex(0.0, -1.0),
        ])))
        .unwrap()
    }

    fn rot_j() -> GroupElement {
        // [[0,1],[-1,0]]
        GroupElement::new(CMatrix::from_row_slice(
            2,
            2,
            &[complex(0.0, 0.0), complex(1.0, 0.0), complex(-1.0, 0.0), complex(0.0, 0.0)],
        ))
        .unwrap()
    }

    #[test]
    fn basic_inner_diag_example() {
        let x = diag_i();
        assert!((basic_inner(&x, &x) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn basic_inner_positive_definite() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for r in 2..=4usize {
                let x = random_algebra_element(r, &mut rng);
                let n2 = basic_inner(&x, &x);
                assert!(n2 > 0.0, "norm^2 = {n2} not positive at r={r}");
                let z = random_algebra_element(r, &mut rng);
                assert!((basic_inner(&x, &z) - basic_inner(&z, &x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_action_rotation_example() {
        let got = adjoint_action(&rot_j(), &diag_i());
        let want = CMatrix::from_diagonal(&DVector::from_vec(vec![
            complex(0.0, -1.0),
            complex(0.0, 1.0),
        ]));
        assert!((got.matrix() - want).norm() < 1e-14);
    }

    #[test]
    fn adjoint_action_identity_fixes() {
        let x = diag_i();
        let got = adjoint_action(&GroupElement::identity(2), &x);
        assert!((got.matrix() - x.matrix()).norm() < 1e-15);
    }

    #[test]
    fn adjoint_action_is_isometric_and_multiplicative() {
        for seed in 0..10u64 {
            let g = random_group_element(3, seed);
            let h = random_group_element(3, seed + 1000);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 2000);
            let x = random_algebra_element(3, &mut rng);
            let z = random_algebra_element(3, &mut rng);
            let lhs = basic_inner(&adjoint_action(&g, &x), &adjoint_action(&g, &z));
            assert!((lhs - basic_inner(&x, &z)).abs() < 1e-12);
            let gh = g.mul(&h);
            let a = adjoint_action(&gh, &x);
            let b = adjoint_action(&g, &adjoint_action(&h, &x));
            assert!((a.matrix() - b.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn commutator_anticommuting_pair_is_minus_identity() {
        let a = GroupElement::new(diag_i().matrix().clone()).unwrap();
        let c = commutator(&a, &rot_j());
        let minus_id = CMatrix::identity(2, 2) * complex(-1.0, 0.0);
        assert!((c.matrix() - minus_id).norm() < 1e-14);
    }

    #[test]
    fn commutator_with_identity_is_identity() {
        let g = random_group_element(2, 5);
        let c = commutator(&g, &GroupElement::identity(2));
        assert!(c.distance(&GroupElement::identity(2)) < 1e-14);
        let c2 = commutator(&g, &g);
        assert!(c2.distance(&GroupElement::identity(2)) < 1e-13);
    }

    #[test]
    fn commutator_order_swap_inverts() {
        let a = random_group_element(3, 1);
        let b = random_group_element(3, 2);
        let ab = commutator(&a, &b);
        let ba = commutator(&b, &a);
        assert!(ab.mul(&ba).distance(&GroupElement::identity(3)) < 1e-12);
    }

    #[test]
    fn expm_matches_su2_axis_angle_formula() {
        // exp(theta * (i n.sigma)) = cos(theta) I + sin(theta) * (i n.sigma)
        // for a unit vector n, since (i n.sigma)^2 = -I.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let x = random_algebra_element(2, &mut rng);
            let norm = basic_inner(&x, &x).sqrt();
            // |i n.sigma| has basic norm sqrt(2); theta = norm / sqrt(2).
            let theta = norm / 2.0f64.sqrt();
            let unit = x.scale(1.0 / theta);
            let want = CMatrix::identity(2, 2) * complex(theta.cos(), 0.0)
                + unit.matrix() * complex(theta.sin(), 0.0);
            let got = expm(&x);
            assert!(
                (got.matrix() - &want).norm() < 1e-13,
                "axis-angle mismatch {}",
                (got.matrix() - &want).norm()
            );
        }
    }

    #[test]
    fn expm_diagonal_oracle() {
        for r in 2..=4usize {
            let basis = su_basis(r);
            let last = &basis[basis.len() - 1];
            let t = 0.37;
            let got = expm(&last.scale(t));
            let mut want = CMatrix::zeros(r, r);
            for j in 0..r {
                let lam = last.matrix()[(j, j)] * complex(t, 0.0);
                want[(j, j)] = Complex::from_polar(1.0, lam.im);
            }
            assert!((got.matrix() - &want).norm() < 1e-13);
        }
    }

    #[test]
    fn retract_half_turn_example() {
        let x = AlgebraElement::new(
            CMatrix::from_diagonal(&DVector::from_vec(vec![
                complex(0.0, std::f64::consts::PI),
                complex(0.0, -std::f64::consts::PI),
            ])),
        )
        .unwrap();
        let got = retract(&GroupElement::identity(2), &x);
        let minus_id = CMatrix::identity(2, 2) * complex(-1.0, 0.0);
        assert!((got.matrix() - minus_id).norm() < 1e-13);
    }

    #[test]
    fn retract_zero_is_identity_map() {
        for seed in 0..5u64 {
            let g = random_group_element(3, seed);
            let got = retract(&g, &AlgebraElement::zero(3));
            assert!(got.distance(&g) < 1e-13);
        }
    }

    #[test]
    fn retract_output_is_structurally_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for r in 2..=4usize {
            for _ in 0..10 {
                let g = random_group_element(r, 11);
                let x = random_algebra_element(r, &mut rng).scale(2.5);
                let h = retract(&g, &x);
                assert!(h.structure_residual() < 1e-12);
            }
        }
    }

    #[test]
    fn su_basis_is_orthonormal_and_complete() {
        for r in 2..=4usize {
            let basis = su_basis(r);
            assert_eq!(basis.len(), r * r - 1);
            for (i, a) in basis.iter().enumerate() {
                for (j, b) in basis.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (basic_inner(a, b) - want).abs() < 1e-14,
                        "gram({i},{j}) off at r={r}"
                    );
                }
            }
            // Completeness: coords round-trip a random element.
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let x = random_algebra_element(r, &mut rng);
            let v = coords(&x, &basis);
            let back = from_coords(&v, &basis);
            assert!((back.matrix() - x.matrix()).norm() < 1e-13);
        }
    }

    #[test]
    fn ad_matrix_is_orthogonal() {
        for r in 2..=3usize {
            let basis = su_basis(r);
            let g = random_group_element(r, 21);
            let m = ad_matrix(&g, &basis);
            let n = basis.len();
            let gram = &m * m.transpose();
            assert!((gram - DMatrix::<f64>::identity(n, n)).norm() < 1e-12);
        }
    }

    #[test]
    fn random_group_element_is_deterministic_and_spread() {
        let a = random_group_element(2, 7);
        let b = random_group_element(2, 7);
        assert_eq!(a.matrix(), b.matrix());
        let c = random_group_element(2, 8);
        assert!(a.distance(&c) > 1e-3);
        assert!(a.structure_residual() < 1e-12);
    }

    #[test]
    fn constructors_reject_bad_matrices() {
        let not_unitary = CMatrix::identity(2, 2) * complex(2.0, 0.0);
        assert!(matches!(
            GroupElement::new(not_unitary),
            Err(LieError::NotUnitary { .. })
        ));
        // Unitary but det = -1.
        let det_minus = sigma_x();
        assert!(matches!(
            GroupElement::new(det_minus),
            Err(LieError::DeterminantDrift { .. })
        ));
        // Hermitian, not anti-Hermitian.
        assert!(matches!(
            AlgebraElement::new(sigma_x()),
            Err(LieError::NotAntiHermitian { .. })
        ));
        // Anti-Hermitian but not traceless.
        let tracey = CMatrix::from_diagonal(&DVector::from_vec(vec![
            complex(0.0, 1.0),
            complex(0.0, 1.0),
        ]));
        assert!(matches!(
            AlgebraElement::new(tracey),
            Err(LieError::NotTraceless { .. })
        ));
    }

    #[test]
    fn central_elements() {
        let z = GroupElement::central(2, 1);
        let minus_id = CMatrix::identity(2, 2) * complex(-1.0, 0.0);
        assert!((z.matrix() - minus_id).norm() < 1e-15);
        let z3 = GroupElement::central(3, 1);
        let w = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        assert!((z3.trace() - w * 3.0).norm() < 1e-14);
        assert!(z3.structure_residual() < 1e-14);
    }
}
