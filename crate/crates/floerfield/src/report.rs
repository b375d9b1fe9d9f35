//! Record types the command-line driver prints as JSON lines. Structs
//! serialize with fixed field order and shortest-round-trip floats, so a
//! repeated invocation emits identical bytes. Checks that already define
//! their own reports (composition, Cerf, intersection) are printed as-is;
//! the wrappers here cover the outputs that have none.

use serde::Serialize;

use crate::bordism::CerfWord;
use crate::symplectic::{GeneralizedCorrespondence, LagrangianSpec};

pub fn to_json<T: Serialize>(record: &T) -> String {
    serde_json::to_string(record).expect("record types always serialize")
}

#[derive(Clone, Debug, Serialize)]
pub struct WordRecord {
    pub check: &'static str,
    pub word: CerfWord,
    pub end_genus: usize,
    pub min_slice_genus: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhiRecord {
    pub check: &'static str,
    pub display: String,
    pub correspondence: GeneralizedCorrespondence,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModuliRecord {
    pub check: &'static str,
    pub genus: usize,
    pub rank: usize,
    pub degree: i64,
    pub samples: usize,
    pub seed: u64,
    /// Analytic emptiness; mutually exclusive with the solver fields.
    pub empty: bool,
    pub clusters: usize,
    pub max_residual: f64,
    pub max_spread: f64,
    pub h_dims: Option<(usize, usize, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CyclicRecord {
    pub check: &'static str,
    pub base: LagrangianSpec,
    pub monodromy: GeneralizedCorrespondence,
}

#[derive(Clone, Debug, Serialize)]
pub struct TorusSumRecord {
    pub check: &'static str,
    pub n: usize,
    pub word: CerfWord,
    pub half: LagrangianSpec,
}
