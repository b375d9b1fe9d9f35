//! Command dispatch: parse the word DSL, run the requested check, print
//! one JSON record per result on stdout and a human summary on stderr.
//! Exit codes: 0 success or PASS, 1 verification failure, 2 input error.
//! All randomness flows from the resolved seed, so identical invocations
//! print identical bytes.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::bordism::{self, BordismError};
use crate::config::{self, Tolerances};
use crate::dsl;
use crate::functor::{self, CerfMove};
use crate::intersect::{self, IntersectError};
use crate::moduli::{
    self, cluster_points, cluster_spread, cohomology_dims, solve_point, ModuliError, ModuliSpec,
    SolveOutcome,
};
use crate::report::{self, CyclicRecord, ModuliRecord, PhiRecord, TorusSumRecord, WordRecord};
use crate::symplectic::{LagrangianSpec, SymplecticError};

#[derive(Parser)]
#[command(
    name = "floerfield",
    about = "Handle words, twisted SU(r) moduli, and Lagrangian correspondence checks",
    version
)]
struct Cli {
    /// Base seed; falls back to FFT_SEED, then the built-in default.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; output ordering does not depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(flatten)]
    tols: TolArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct TolArgs {
    #[arg(long, global = true, help = "Relator residual bound")]
    residual_tol: Option<f64>,
    #[arg(long, global = true, help = "Unitarity drift bound")]
    unitary_tol: Option<f64>,
    #[arg(long, global = true, help = "Relative singular value zero cut")]
    rank_zero_tol: Option<f64>,
    #[arg(long, global = true, help = "Indeterminate rank band, lower edge")]
    rank_band_lo: Option<f64>,
    #[arg(long, global = true, help = "Indeterminate rank band, upper edge")]
    rank_band_hi: Option<f64>,
    #[arg(long, global = true, help = "Cocycle equation defect bound")]
    cocycle_tol: Option<f64>,
    #[arg(long, global = true, help = "Pairing identity defect bound")]
    pairing_tol: Option<f64>,
    #[arg(long, global = true, help = "Jacobian finite-difference relative error bound")]
    jacobian_fd_tol: Option<f64>,
    #[arg(long, global = true, help = "Finite-difference step")]
    fd_step: Option<f64>,
    #[arg(long, global = true, help = "Fingerprint clustering radius")]
    cluster_tol: Option<f64>,
    #[arg(long, global = true, help = "Composed fingerprint agreement bound")]
    fingerprint_tol: Option<f64>,
    #[arg(long, global = true, help = "Gram matrix conditioning floor")]
    gram_condition: Option<f64>,
    #[arg(long, global = true, help = "Solver iteration budget per restart")]
    max_iterations: Option<usize>,
    #[arg(long, global = true, help = "Solver restart budget")]
    max_restarts: Option<usize>,
}

impl TolArgs {
    fn build(&self) -> Tolerances {
        let mut t = Tolerances::default();
        macro_rules! take {
            ($flag:ident, $field:ident) => {
                if let Some(v) = self.$flag {
                    t.$field = v;
                }
            };
        }
        take!(residual_tol, residual);
        take!(unitary_tol, unitary);
        take!(rank_zero_tol, rank_zero);
        take!(rank_band_lo, rank_band_lo);
        take!(rank_band_hi, rank_band_hi);
        take!(cocycle_tol, cocycle);
        take!(pairing_tol, pairing);
        take!(jacobian_fd_tol, jacobian_fd);
        take!(fd_step, fd_step);
        take!(cluster_tol, cluster);
        take!(fingerprint_tol, fingerprint_match);
        take!(gram_condition, gram_condition);
        take!(max_iterations, max_iterations);
        take!(max_restarts, max_restarts);
        t
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Bring a word file to canonical form.
    Normalize { file: PathBuf },
    /// Map a word file to its normalized correspondence chain.
    Phi { file: PathBuf },
    /// Solve for moduli points, cluster them, report cohomology dims.
    Moduli {
        #[arg(long)]
        genus: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        degree: i64,
        #[arg(long, default_value_t = 1)]
        samples: usize,
    },
    /// Check one Cerf relation symbolically and numerically.
    Verify {
        #[arg(long = "move")]
        mv: String,
        #[arg(long)]
        genus: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        degree: i64,
        #[arg(long, default_value_t = 3)]
        samples: usize,
    },
    /// Count intersection clusters of two vanishing-set Lagrangians.
    Intersect {
        #[arg(long)]
        genus: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        degree: i64,
        /// Pin labels of the left side, e.g. "a1" or "alpha1,alpha2".
        #[arg(long)]
        left: String,
        /// Pin labels of the right side, e.g. "b1" or "beta1,beta2".
        #[arg(long)]
        right: String,
        #[arg(long, default_value_t = 20)]
        runs: usize,
    },
    /// Build the torus-summed word and its compression-body Lagrangians.
    TorusSum {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        degree: i64,
        /// Slot killed on each summed torus, e.g. "a,a"; defaults to all alpha.
        #[arg(long)]
        labels: Option<String>,
    },
    /// Close up a word file with equal endpoints into a cyclic description.
    Cyclic { file: PathBuf },
}

/// Failures are split by who must act: bad input (exit 2) or a check that
/// ran and did not hold up (exit 1).
enum Failure {
    Input(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Verification(_) => 1,
        }
    }
    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<dsl::DslError> for Failure {
    fn from(e: dsl::DslError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<BordismError> for Failure {
    fn from(e: BordismError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<ModuliError> for Failure {
    fn from(e: ModuliError) -> Self {
        match e {
            ModuliError::Label(_) => Failure::Input(e.to_string()),
            _ => Failure::Verification(e.to_string()),
        }
    }
}

impl From<SymplecticError> for Failure {
    fn from(e: SymplecticError) -> Self {
        match e {
            SymplecticError::Moduli(inner) => inner.into(),
            SymplecticError::InvalidLagrangian(_)
            | SymplecticError::EndpointMismatch(_)
            | SymplecticError::NotSampleable(_) => Failure::Input(e.to_string()),
            SymplecticError::DimensionMismatch { .. } => Failure::Verification(e.to_string()),
        }
    }
}

impl From<IntersectError> for Failure {
    fn from(e: IntersectError) -> Self {
        match e {
            IntersectError::Symplectic(inner) => inner.into(),
            IntersectError::Moduli(inner) => inner.into(),
            IntersectError::SelfIntersection
            | IntersectError::SpaceMismatch(_)
            | IntersectError::PointOffLocus { .. } => Failure::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn read_word(file: &PathBuf) -> Result<bordism::CerfWord, Failure> {
    let src = std::fs::read_to_string(file)?;
    Ok(dsl::parse(&src)?)
}

fn run_normalize(file: &PathBuf) -> Result<i32, Failure> {
    let word = read_word(file)?;
    let normal = bordism::normalize(&word)?;
    let record = WordRecord {
        check: "normalize",
        end_genus: bordism::end_label(&normal)?.genus,
        min_slice_genus: bordism::min_slice_genus(&normal)?,
        word: normal.clone(),
    };
    println!("{}", report::to_json(&record));
    eprintln!(
        "normalize: {} moves -> {} moves, genus {} -> {}",
        word.moves.len(),
        normal.moves.len(),
        normal.start.genus,
        record.end_genus
    );
    eprint!("{}", dsl::to_dsl(&normal));
    Ok(0)
}

fn run_phi(file: &PathBuf) -> Result<i32, Failure> {
    let word = read_word(file)?;
    let c = functor::phi(&word)?;
    let record = PhiRecord {
        check: "phi",
        display: c.to_string(),
        correspondence: c,
    };
    println!("{}", report::to_json(&record));
    eprintln!("phi: {}", record.display);
    Ok(0)
}

fn run_moduli(
    genus: usize,
    rank: usize,
    degree: i64,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<i32, Failure> {
    if samples == 0 {
        return Err(Failure::Input("need at least one sample".into()));
    }
    let spec = ModuliSpec::new(genus, rank, degree)?;
    if genus == 0 {
        let record = ModuliRecord {
            check: "moduli",
            genus,
            rank,
            degree,
            samples,
            seed,
            empty: true,
            clusters: 0,
            max_residual: 0.0,
            max_spread: 0.0,
            h_dims: None,
        };
        println!("{}", report::to_json(&record));
        eprintln!("moduli g={genus} r={rank} d={degree}: empty");
        return Ok(0);
    }
    let outcomes: Vec<Result<SolveOutcome, ModuliError>> = (0..samples)
        .into_par_iter()
        .map(|s| solve_point(&spec, seed.wrapping_add(s as u64), tol))
        .collect();
    let mut points = Vec::new();
    for outcome in outcomes {
        match outcome? {
            SolveOutcome::Point { point, .. } => points.push(point),
            SolveOutcome::Empty => {
                return Err(Failure::Verification(
                    "solver reported an empty space at positive genus".into(),
                ))
            }
        }
    }
    let max_residual = points
        .iter()
        .map(|p| moduli::residual(&spec, p))
        .fold(0.0f64, f64::max);
    let clusters = cluster_points(&spec, &points, tol);
    let max_spread = clusters
        .iter()
        .map(|c| {
            let members: Vec<_> = c.members.iter().map(|&i| points[i].clone()).collect();
            cluster_spread(&spec, &members)
        })
        .fold(0.0f64, f64::max);
    let h_dims = cohomology_dims(&spec, &points[0], tol)?;
    let record = ModuliRecord {
        check: "moduli",
        genus,
        rank,
        degree,
        samples,
        seed,
        empty: false,
        clusters: clusters.len(),
        max_residual,
        max_spread,
        h_dims: Some(h_dims),
    };
    println!("{}", report::to_json(&record));
    eprintln!(
        "moduli g={genus} r={rank} d={degree}: {} cluster(s) from {samples} sample(s), h = {:?}, residual <= {max_residual:.2e}",
        clusters.len(),
        h_dims
    );
    Ok(0)
}

fn run_verify(
    mv: &str,
    genus: usize,
    rank: usize,
    degree: i64,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<i32, Failure> {
    let mv: CerfMove = mv.parse().map_err(Failure::Input)?;
    let rep = functor::verify_cerf_relation(mv, genus, rank, degree, samples, seed, tol)?;
    println!("{}", report::to_json(&rep));
    eprintln!(
        "verify {mv} g={genus} r={rank} d={degree}: {}",
        if rep.verdict { "PASS" } else { "FAIL" }
    );
    Ok(if rep.verdict { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
fn run_intersect(
    genus: usize,
    rank: usize,
    degree: i64,
    left: &str,
    right: &str,
    runs: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<i32, Failure> {
    let spec = ModuliSpec::new(genus, rank, degree)?;
    let left_labels = dsl::parse_labels(left).map_err(Failure::Input)?;
    let right_labels = dsl::parse_labels(right).map_err(Failure::Input)?;
    let l = LagrangianSpec::vanishing_set(genus, left_labels, rank, degree)?;
    let r = LagrangianSpec::vanishing_set(genus, right_labels, rank, degree)?;
    let rep = intersect::intersect_count(&l, &r, &spec, runs, seed, tol)?;
    println!("{}", report::to_json(&rep));
    eprintln!(
        "intersect {l} vs {r}: {} cluster(s), {}",
        rep.clusters.len(),
        if rep.transverse {
            "all transverse"
        } else {
            "transversality failed"
        }
    );
    Ok(if rep.transverse { 0 } else { 1 })
}

fn run_torus_sum(
    n: usize,
    rank: usize,
    degree: i64,
    labels: Option<&str>,
    _tol: &Tolerances,
) -> Result<i32, Failure> {
    let slots = match labels {
        None => vec![bordism::Slot::Alpha; n],
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| match t {
                "a" | "alpha" => Ok(bordism::Slot::Alpha),
                "b" | "beta" => Ok(bordism::Slot::Beta),
                other => Err(Failure::Input(format!(
                    "slot '{other}' wants alpha or beta"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let (word, (half, _)) = functor::build_torus_summed(n, &slots, rank, degree)?;
    let record = TorusSumRecord {
        check: "torus_sum",
        n,
        word,
        half,
    };
    println!("{}", report::to_json(&record));
    eprintln!("torus-sum n={n}: {} over genus {}", record.half, n.max(1));
    Ok(0)
}

fn run_cyclic(file: &PathBuf) -> Result<i32, Failure> {
    let word = read_word(file)?;
    let cyclic = functor::build_cyclic(&word)?;
    let record = CyclicRecord {
        check: "cyclic",
        base: cyclic.base,
        monodromy: cyclic.monodromy,
    };
    println!("{}", report::to_json(&record));
    eprintln!("cyclic: base {}, monodromy {}", record.base, record.monodromy);
    Ok(0)
}

pub fn run_from_env() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let seed = config::resolve_seed(cli.seed);
    let tol = cli.tols.build();
    let outcome = match &cli.cmd {
        Cmd::Normalize { file } => run_normalize(file),
        Cmd::Phi { file } => run_phi(file),
        Cmd::Moduli {
            genus,
            rank,
            degree,
            samples,
        } => run_moduli(*genus, *rank, *degree, *samples, seed, &tol),
        Cmd::Verify {
            mv,
            genus,
            rank,
            degree,
            samples,
        } => run_verify(mv, *genus, *rank, *degree, *samples, seed, &tol),
        Cmd::Intersect {
            genus,
            rank,
            degree,
            left,
            right,
            runs,
        } => run_intersect(*genus, *rank, *degree, left, right, *runs, seed, &tol),
        Cmd::TorusSum {
            n,
            rank,
            degree,
            labels,
        } => run_torus_sum(*n, *rank, *degree, labels.as_deref(), &tol),
        Cmd::Cyclic { file } => run_cyclic(file),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}
