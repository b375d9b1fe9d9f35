//! Numerical tolerances and solver limits, overridable from the CLI.

/// All thresholds used by the numerical layer. Defaults are the contract
/// values; tests pin them, the CLI may override individual entries.
#[derive(Clone, Debug)]
pub struct Tolerances {
    /// Frobenius residual required of a solved relator equation.
    pub residual: f64,
    /// Unitarity and determinant drift allowed on group elements.
    pub unitary: f64,
    /// Singular values below `rank_zero * sigma_max` count as zero.
    pub rank_zero: f64,
    /// Relative band (lo, hi) around the rank cutoff that triggers
    /// `RankIndeterminate` when a singular value falls inside it.
    pub rank_band_lo: f64,
    pub rank_band_hi: f64,
    /// Allowed violation of cocycle conditions (d1 on tangent vectors,
    /// d1*d0 at a solution, orthogonality to coboundaries).
    pub cocycle: f64,
    /// Allowed defect in pairing identities (antisymmetry, coboundary
    /// annihilation, isotropy of correspondence tangents).
    pub pairing: f64,
    /// Relative finite-difference agreement for the relator Jacobian.
    pub jacobian_fd: f64,
    /// Step for central finite differences.
    pub fd_step: f64,
    /// Fingerprint distance merging two solver outputs into one cluster.
    pub cluster: f64,
    /// Fingerprint distance for cross-checking composed or re-solved points.
    pub fingerprint_match: f64,
    /// Lower bound on sigma_min/sigma_max of a Gram matrix accepted as
    /// nondegenerate.
    pub gram_condition: f64,
    /// Gauss-Newton iteration cap per start.
    pub max_iterations: usize,
    /// Multistart cap per solve.
    pub max_restarts: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-10,
            unitary: 1e-12,
            rank_zero: 1e-7,
            rank_band_lo: 1e-9,
            rank_band_hi: 1e-5,
            cocycle: 1e-9,
            pairing: 1e-8,
            jacobian_fd: 1e-5,
            fd_step: 1e-6,
            cluster: 1e-4,
            fingerprint_match: 1e-6,
            gram_condition: 1e-6,
            max_iterations: 500,
            max_restarts: 20,
        }
    }
}

/// Default seed when neither the CLI flag nor `FFT_SEED` is set.
pub const DEFAULT_SEED: u64 = 17;

/// Resolve the base seed: explicit flag wins, then the FFT_SEED environment
/// variable, then the fixed default.
pub fn resolve_seed(flag: Option<u64>) -> u64 {
    if let Some(s) = flag {
        return s;
    }
    if let Ok(v) = std::env::var("FFT_SEED") {
        if let Ok(s) = v.parse::<u64>() {
            return s;
        }
    }
    DEFAULT_SEED
}
