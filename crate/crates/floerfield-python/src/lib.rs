//! Python bindings. Words and correspondences get thin wrapper classes;
//! the numerical checks come back as plain dicts so callers can feed
//! them straight into asserts or dataframes.
//!
//! Input mistakes (bad labels, endpoint clashes, unreadable words) raise
//! ValueError; numerical breakdowns (solver failure, indeterminate rank)
//! raise RuntimeError.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use floerfield::bordism::{self, CerfWord};
use floerfield::config::Tolerances;
use floerfield::dsl;
use floerfield::functor;
use floerfield::intersect;
use floerfield::moduli::{self, ModuliError, ModuliSpec, SolveOutcome};
use floerfield::symplectic::{self, GeneralizedCorrespondence, LagrangianSpec, SymplecticError};

fn input_err(msg: impl ToString) -> PyErr {
    PyValueError::new_err(msg.to_string())
}

fn moduli_err(e: ModuliError) -> PyErr {
    match e {
        ModuliError::Label(_) => input_err(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn symplectic_err(e: SymplecticError) -> PyErr {
    match e {
        SymplecticError::Moduli(inner) => moduli_err(inner),
        SymplecticError::DimensionMismatch { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => input_err(e),
    }
}

fn intersect_err(e: intersect::IntersectError) -> PyErr {
    match e {
        intersect::IntersectError::Symplectic(inner) => symplectic_err(inner),
        intersect::IntersectError::Moduli(inner) => moduli_err(inner),
        _ => input_err(e),
    }
}

/// Handle word between labelled surfaces.
#[pyclass(module = "floerfield._floerfield", skip_from_py_object)]
#[derive(Clone)]
struct Word {
    inner: CerfWord,
}

#[pymethods]
impl Word {
    /// Parse the word DSL ("rank 2", "degree 1", "start genus 2", then moves).
    #[staticmethod]
    fn parse(src: &str) -> PyResult<Word> {
        let inner = dsl::parse(src).map_err(input_err)?;
        Ok(Word { inner })
    }

    /// Build from header values and move strings like "up" or "down alpha 2".
    #[new]
    fn new(genus: usize, rank: usize, degree: i64, moves: Vec<String>) -> PyResult<Word> {
        let mut src = format!("rank {rank}\ndegree {degree}\nstart genus {genus}\n");
        for m in &moves {
            src.push_str(m);
            src.push('\n');
        }
        Word::parse(&src)
    }

    /// Uniform random valid word, for fuzzing from Python.
    #[staticmethod]
    #[pyo3(signature = (genus, rank, degree, max_moves=12, seed=17))]
    fn random(genus: usize, rank: usize, degree: i64, max_moves: usize, seed: u64) -> PyResult<Word> {
        use rand::SeedableRng;
        let start = bordism::SurfaceLabel::new(genus, rank, degree).map_err(input_err)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Ok(Word {
            inner: bordism::random_word(start, max_moves, &mut rng),
        })
    }

    #[getter]
    fn genus(&self) -> usize {
        self.inner.start.genus
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.start.rank
    }

    #[getter]
    fn degree(&self) -> i64 {
        self.inner.start.degree
    }

    #[getter]
    fn moves(&self) -> Vec<String> {
        self.inner.moves.iter().map(|m| m.to_string()).collect()
    }

    fn end_genus(&self) -> PyResult<usize> {
        Ok(bordism::end_label(&self.inner).map_err(input_err)?.genus)
    }

    /// Smallest cross-section genus over the equivalence class of the word.
    fn min_slice_genus(&self) -> PyResult<usize> {
        bordism::min_slice_genus(&self.inner).map_err(input_err)
    }

    fn normalize(&self) -> PyResult<Word> {
        Ok(Word {
            inner: bordism::normalize(&self.inner).map_err(input_err)?,
        })
    }

    fn to_dsl(&self) -> String {
        dsl::to_dsl(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.moves.len()
    }

    fn __eq__(&self, other: &Bound<'_, PyAny>) -> bool {
        other
            .extract::<PyRef<Word>>()
            .map(|o| o.inner == self.inner)
            .unwrap_or(false)
    }

    fn __repr__(&self) -> String {
        format!(
            "Word(genus={}, rank={}, degree={}, moves={:?})",
            self.inner.start.genus,
            self.inner.start.rank,
            self.inner.start.degree,
            self.moves()
        )
    }
}

/// Composable chain of Lagrangian correspondences between moduli spaces.
#[pyclass(module = "floerfield._floerfield")]
struct Correspondence {
    inner: GeneralizedCorrespondence,
}

#[pymethods]
impl Correspondence {
    #[getter]
    fn factors(&self) -> Vec<String> {
        self.inner.factors.iter().map(|f| f.to_string()).collect()
    }

    #[getter]
    fn source_dim(&self) -> i64 {
        self.inner.source.expected_dim
    }

    #[getter]
    fn target_dim(&self) -> i64 {
        self.inner.target.expected_dim
    }

    fn is_identity(&self) -> bool {
        self.inner.is_identity()
    }

    fn __len__(&self) -> usize {
        self.inner.factors.len()
    }

    fn __repr__(&self) -> String {
        self.inner.to_string()
    }
}

/// Image of a word under the bordism-to-correspondence functor, in
/// composed normal form.
#[pyfunction]
fn phi(word: &Word) -> PyResult<Correspondence> {
    Ok(Correspondence {
        inner: functor::phi(&word.inner).map_err(symplectic_err)?,
    })
}

/// Solve for representation-variety points and cluster them by conjugacy.
#[pyfunction]
#[pyo3(signature = (genus, rank, degree, samples=1, seed=17))]
fn solve_moduli<'py>(
    py: Python<'py>,
    genus: usize,
    rank: usize,
    degree: i64,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let tol = Tolerances::default();
    let spec = ModuliSpec::new(genus, rank, degree).map_err(moduli_err)?;
    let out = PyDict::new(py);
    out.set_item("genus", genus)?;
    out.set_item("rank", rank)?;
    out.set_item("degree", degree)?;
    out.set_item("expected_dim", spec.expected_dim)?;
    if genus == 0 {
        out.set_item("empty", true)?;
        out.set_item("clusters", 0)?;
        return Ok(out);
    }
    let mut points = Vec::new();
    for s in 0..samples {
        match moduli::solve_point(&spec, seed.wrapping_add(s as u64), &tol).map_err(moduli_err)? {
            SolveOutcome::Point { point, .. } => points.push(point),
            SolveOutcome::Empty => {
                out.set_item("empty", true)?;
                out.set_item("clusters", 0)?;
                return Ok(out);
            }
        }
    }
    let clusters = moduli::cluster_points(&spec, &points, &tol);
    let max_residual = points
        .iter()
        .map(|p| moduli::residual(&spec, p))
        .fold(0.0f64, f64::max);
    let (h0, h1, h2) = moduli::cohomology_dims(&spec, &points[0], &tol).map_err(moduli_err)?;
    out.set_item("empty", false)?;
    out.set_item("clusters", clusters.len())?;
    out.set_item("max_residual", max_residual)?;
    out.set_item("h", (h0, h1, h2))?;
    Ok(out)
}

/// Gram matrix of the symplectic pairing on the harmonic tangent basis
/// at one solved point, as nested lists.
#[pyfunction]
#[pyo3(signature = (genus, rank, degree, seed=17))]
fn goldman_gram(genus: usize, rank: usize, degree: i64, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let tol = Tolerances::default();
    let spec = ModuliSpec::new(genus, rank, degree).map_err(moduli_err)?;
    let p = moduli::solve_point(&spec, seed, &tol)
        .map_err(moduli_err)?
        .point()
        .ok_or_else(|| input_err("the space is empty, no point to pair at"))?;
    let basis = moduli::tangent_basis(&spec, &p, &tol).map_err(moduli_err)?;
    Ok(basis
        .iter()
        .map(|u| {
            basis
                .iter()
                .map(|v| symplectic::goldman_pair(&spec, &p, u, v))
                .collect()
        })
        .collect())
}

/// Check one Cerf relation (cancel, switch, cyl) symbolically and
/// numerically at the given surface data.
#[pyfunction]
#[pyo3(signature = (name, genus, rank, degree, samples=3, seed=17))]
fn verify_move<'py>(
    py: Python<'py>,
    name: &str,
    genus: usize,
    rank: usize,
    degree: i64,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mv: functor::CerfMove = name.parse().map_err(input_err)?;
    let rep = functor::verify_cerf_relation(mv, genus, rank, degree, samples, seed, &Tolerances::default())
        .map_err(symplectic_err)?;
    let out = PyDict::new(py);
    out.set_item("move", rep.move_kind.to_string())?;
    out.set_item("symbolic_pass", rep.symbolic_pass)?;
    out.set_item("max_fingerprint_distance", rep.max_fingerprint_distance)?;
    out.set_item("verdict", rep.verdict)?;
    out.set_item(
        "compositions",
        rep.compositions
            .iter()
            .map(|c| (c.left.clone(), c.right.clone(), c.transverse, c.embedded))
            .collect::<Vec<_>>(),
    )?;
    Ok(out)
}

/// Count intersection clusters of two vanishing-set Lagrangians given by
/// pin labels like "a1" or "alpha1,beta2".
#[pyfunction]
#[pyo3(signature = (genus, rank, degree, left, right, runs=20, seed=17))]
#[allow(clippy::too_many_arguments)]
fn intersect_vanishing_sets<'py>(
    py: Python<'py>,
    genus: usize,
    rank: usize,
    degree: i64,
    left: &str,
    right: &str,
    runs: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let tol = Tolerances::default();
    let spec = ModuliSpec::new(genus, rank, degree).map_err(moduli_err)?;
    let l = LagrangianSpec::vanishing_set(genus, dsl::parse_labels(left).map_err(input_err)?, rank, degree)
        .map_err(symplectic_err)?;
    let r = LagrangianSpec::vanishing_set(genus, dsl::parse_labels(right).map_err(input_err)?, rank, degree)
        .map_err(symplectic_err)?;
    let rep = intersect::intersect_count(&l, &r, &spec, runs, seed, &tol).map_err(intersect_err)?;
    let out = PyDict::new(py);
    out.set_item("left", l.to_string())?;
    out.set_item("right", r.to_string())?;
    out.set_item("clusters", rep.clusters.len())?;
    out.set_item("transverse", rep.transverse)?;
    out.set_item("failed_runs", rep.failed_runs)?;
    out.set_item(
        "multiplicities",
        rep.clusters.iter().map(|c| c.multiplicity).collect::<Vec<_>>(),
    )?;
    Ok(out)
}

/// Word and compression-body Lagrangian of the n-fold torus-summed space.
#[pyfunction]
#[pyo3(signature = (n, rank, degree))]
fn torus_sum(n: usize, rank: usize, degree: i64) -> PyResult<(Word, String)> {
    let labels = vec![bordism::Slot::Alpha; n];
    let (word, (half, _)) =
        functor::build_torus_summed(n, &labels, rank, degree).map_err(symplectic_err)?;
    Ok((Word { inner: word }, half.to_string()))
}

#[pymodule]
fn _floerfield(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Word>()?;
    m.add_class::<Correspondence>()?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(solve_moduli, m)?)?;
    m.add_function(wrap_pyfunction!(goldman_gram, m)?)?;
    m.add_function(wrap_pyfunction!(verify_move, m)?)?;
    m.add_function(wrap_pyfunction!(intersect_vanishing_sets, m)?)?;
    m.add_function(wrap_pyfunction!(torus_sum, m)?)?;
    Ok(())
}
