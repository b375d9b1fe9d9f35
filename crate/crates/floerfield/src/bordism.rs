//! Cerf words: connected 3-bordisms between connected surfaces, presented
//! as a start surface plus a sequence of standard-form handle moves, with
//! the cancel/switch/cylinder rewrite system and a canonical form.
//!
//! Standard position: an Up at genus g creates the fresh pair
//! (alpha_{g+1}, beta_{g+1}); Down(slot, k) kills generator slot of pair k
//! and frees the partner; after a Down the remaining pairs are relabeled
//! 1..g preserving order. A Down's index refers to the surface it acts on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BordismError {
    #[error("rank {rank} and degree {degree} are not coprime")]
    CoprimalityViolation { rank: usize, degree: i64 },
    #[error("rank must be at least 2, got {0}")]
    RankUnsupported(usize),
    #[error("invalid word at move {at}: {reason}")]
    InvalidWord { at: usize, reason: String },
    #[error("position {at} out of range for word of length {len}")]
    OutOfRange { at: usize, len: usize },
    #[error("not cancellable at {at}: {reason}")]
    NotCancellable { at: usize, reason: String },
    #[error("not switchable at {at}: {reason}")]
    NotSwitchable { at: usize, reason: String },
    #[error("move at {at} is not a cylinder")]
    NotCylinder { at: usize },
    #[error("endpoint mismatch: {0}")]
    EndpointMismatch(String),
}

/// Closed connected surface with bundle data: genus plus the structure
/// group rank r and twisting degree d, with gcd(r, d) = 1 so the twisted
/// moduli spaces downstream are smooth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceLabel {
    pub genus: usize,
    pub rank: usize,
    pub degree: i64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl SurfaceLabel {
    pub fn new(genus: usize, rank: usize, degree: i64) -> Result<Self, BordismError> {
        if rank < 2 {
            return Err(BordismError::RankUnsupported(rank));
        }
        if gcd(rank as u64, degree.unsigned_abs()) != 1 {
            return Err(BordismError::CoprimalityViolation { rank, degree });
        }
        Ok(SurfaceLabel {
            genus,
            rank,
            degree,
        })
    }

    pub fn with_genus(&self, genus: usize) -> SurfaceLabel {
        SurfaceLabel { genus, ..*self }
    }
}

/// Which generator of a standard pair a Down move kills.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Alpha,
    Beta,
}

impl std::fmt::Display for Slot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Slot::Alpha => write!(f, "alpha"),
            Slot::Beta => write!(f, "beta"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HandleMove {
    /// Index-1 critical point: genus g -> g+1, creating pair g+1.
    Up,
    /// Index-2 critical point: genus g -> g-1, killing generator
    /// `slot` of pair `index` (1-based on the surface it acts on).
    Down { slot: Slot, index: usize },
    /// Cylindrical piece with no critical point.
    Cyl,
}

impl std::fmt::Display for HandleMove {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HandleMove::Up => write!(f, "up"),
            HandleMove::Down { slot, index } => write!(f, "down {slot} {index}"),
            HandleMove::Cyl => write!(f, "cyl"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CerfWord {
    pub start: SurfaceLabel,
    pub moves: Vec<HandleMove>,
}

impl CerfWord {
    pub fn new(start: SurfaceLabel, moves: Vec<HandleMove>) -> Self {
        CerfWord { start, moves }
    }
}

/// Checks Down indices against the running genus; names the first offender.
pub fn validate(w: &CerfWord) -> Result<(), BordismError> {
    let mut g = w.start.genus;
    for (at, mv) in w.moves.iter().enumerate() {
        match mv {
            HandleMove::Up => g += 1,
            HandleMove::Cyl => {}
            HandleMove::Down { index, .. } => {
                if *index == 0 || *index > g {
                    return Err(BordismError::InvalidWord {
                        at,
                        reason: format!("down index {index} invalid at genus {g}"),
                    });
                }
                g -= 1;
            }
        }
    }
    Ok(())
}

/// Genus before each move and after the last; length moves + 1.
pub fn genus_trajectory(w: &CerfWord) -> Result<Vec<usize>, BordismError> {
    validate(w)?;
    let mut out = Vec::with_capacity(w.moves.len() + 1);
    let mut g = w.start.genus;
    out.push(g);
    for mv in &w.moves {
        match mv {
            HandleMove::Up => g += 1,
            HandleMove::Down { .. } => g -= 1,
            HandleMove::Cyl => {}
        }
        out.push(g);
    }
    Ok(out)
}

pub fn end_label(w: &CerfWord) -> Result<SurfaceLabel, BordismError> {
    let traj = genus_trajectory(w)?;
    Ok(w.start.with_genus(*traj.last().expect("nonempty trajectory")))
}

/// Smallest cross-section genus over every word reachable by the rewrite
/// moves: each down slides back to the up that created its pair (or to the
/// front when it kills a start pair), which is the pointwise-lowest legal
/// arrangement. The value depends only on the multiset of creator depths,
/// so it is unchanged by cancel, switch and cyl moves; in particular a
/// word and its normal form always agree here even when normalization
/// removes a literal genus-0 dip.
pub fn min_slice_genus(w: &CerfWord) -> Result<usize, BordismError> {
    validate(w)?;
    let g0 = w.start.genus;
    // Tag 0 marks a start pair; tag j a pair minted by the j-th up.
    let mut live: Vec<usize> = vec![0; g0];
    let mut ups = 0usize;
    let mut creator_depths = Vec::new();
    for mv in &w.moves {
        match mv {
            HandleMove::Up => {
                ups += 1;
                live.push(ups);
            }
            HandleMove::Down { index, .. } => creator_depths.push(live.remove(index - 1)),
            HandleMove::Cyl => {}
        }
    }
    Ok((0..=ups)
        .map(|j| g0 + j - creator_depths.iter().filter(|&&c| c <= j).count())
        .min()
        .expect("range is nonempty"))
}

// Internal id-level encoding. Start pairs get ids 0..g0 in index order;
// every Up mints the next id. Ids never change under rewriting, so a
// switch is a plain adjacent swap and positional indices are recovered
// by replaying the live-pair list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Event {
    Up { id: usize },
    Down { slot: Slot, id: usize },
    Cyl,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct EventWord {
    start_genus: usize,
    events: Vec<Event>,
}

fn encode(w: &CerfWord) -> Result<EventWord, BordismError> {
    validate(w)?;
    let mut live: Vec<usize> = (0..w.start.genus).collect();
    let mut next_id = w.start.genus;
    let mut events = Vec::with_capacity(w.moves.len());
    for mv in &w.moves {
        match mv {
            HandleMove::Up => {
                live.push(next_id);
                events.push(Event::Up { id: next_id });
                next_id += 1;
            }
            HandleMove::Down { slot, index } => {
                let id = live.remove(index - 1);
                events.push(Event::Down { slot: *slot, id });
            }
            HandleMove::Cyl => events.push(Event::Cyl),
        }
    }
    Ok(EventWord {
        start_genus: w.start.genus,
        events,
    })
}

fn decode(ew: &EventWord, start: SurfaceLabel) -> CerfWord {
    let mut live: Vec<usize> = (0..ew.start_genus).collect();
    let mut moves = Vec::with_capacity(ew.events.len());
    for ev in &ew.events {
        match ev {
            Event::Up { id } => {
                live.push(*id);
                moves.push(HandleMove::Up);
            }
            Event::Down { slot, id } => {
                let pos = live
                    .iter()
                    .position(|x| x == id)
                    .expect("down kills a live pair");
                live.remove(pos);
                moves.push(HandleMove::Down {
                    slot: *slot,
                    index: pos + 1,
                });
            }
            Event::Cyl => moves.push(HandleMove::Cyl),
        }
    }
    CerfWord { start, moves }
}

/// Pairs (up position, down position) of an Up whose fresh pair is later
/// beta-killed; these are exactly the cancellable pairs.
fn cancellable_pairs(ew: &EventWord) -> Vec<(usize, usize)> {
    let mut created_at = std::collections::HashMap::new();
    for (pos, ev) in ew.events.iter().enumerate() {
        if let Event::Up { id } = ev {
            created_at.insert(*id, pos);
        }
    }
    let mut out = Vec::new();
    for (pos, ev) in ew.events.iter().enumerate() {
        if let Event::Down {
            slot: Slot::Beta,
            id,
        } = ev
        {
            if let Some(&up) = created_at.get(id) {
                out.push((up, pos));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Lexicographic termination measure: cylinders, cancellable pairs,
/// separation of the leftmost cancellable pair, down-before-up inversions,
/// retarget excess of surviving fresh kills, out-of-order down pairs.
pub type Measure = [u64; 6];

/// Created ids still present as Up events, ascending, plus the subset
/// alpha-killed later in the word. Exchanging adjacent one-handles is
/// invisible on standard-position words, so which fresh pairs the
/// surviving alpha kills target is gauge; the canonical form points them
/// at the lowest-indexed fresh pairs. `retarget_excess` is the sum of
/// 1-based ranks of the killed ids among the surviving fresh ids, which
/// that gauge choice minimizes.
fn fresh_kill_ranks(ew: &EventWord) -> (Vec<usize>, Vec<usize>) {
    let mut fresh: Vec<usize> = ew
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Up { id } => Some(*id),
            _ => None,
        })
        .collect();
    fresh.sort_unstable();
    let killed: Vec<usize> = ew
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Down {
                slot: Slot::Alpha,
                id,
            } if fresh.binary_search(id).is_ok() => Some(*id),
            _ => None,
        })
        .collect();
    (fresh, killed)
}

fn retarget_excess(ew: &EventWord) -> u64 {
    let (fresh, killed) = fresh_kill_ranks(ew);
    killed
        .iter()
        .map(|id| (fresh.binary_search(id).expect("killed id is fresh") + 1) as u64)
        .sum()
}

fn measure(ew: &EventWord) -> Measure {
    let cyls = ew
        .events
        .iter()
        .filter(|e| matches!(e, Event::Cyl))
        .count() as u64;
    let pairs = cancellable_pairs(ew);
    let leftmost_sep = pairs
        .first()
        .map(|(u, d)| (d - u - 1) as u64)
        .unwrap_or(0);
    let mut du_inversions = 0u64;
    let mut downs_seen = 0u64;
    for ev in &ew.events {
        match ev {
            Event::Down { .. } => downs_seen += 1,
            Event::Up { .. } => du_inversions += downs_seen,
            Event::Cyl => {}
        }
    }
    let down_ids: Vec<usize> = ew
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Down { id, .. } => Some(*id),
            _ => None,
        })
        .collect();
    let mut dd_inversions = 0u64;
    for i in 0..down_ids.len() {
        for j in (i + 1)..down_ids.len() {
            if down_ids[i] > down_ids[j] {
                dd_inversions += 1;
            }
        }
    }
    [
        cyls,
        pairs.len() as u64,
        leftmost_sep,
        du_inversions,
        retarget_excess(ew),
        dd_inversions,
    ]
}

/// One rewrite step toward the canonical form, or None at a fixpoint.
/// Every step is a single Cerf move (cylinder deletion, cancellation, or
/// one legal switch) and strictly decreases `measure` lexicographically.
fn step(ew: &EventWord) -> Option<EventWord> {
    // Cylinder deletions first.
    if let Some(pos) = ew.events.iter().position(|e| matches!(e, Event::Cyl)) {
        let mut next = ew.clone();
        next.events.remove(pos);
        return Some(next);
    }
    // Adjacent cancellable pair.
    for i in 0..ew.events.len().saturating_sub(1) {
        if let (
            Event::Up { id },
            Event::Down {
                slot: Slot::Beta,
                id: killed,
            },
        ) = (&ew.events[i], &ew.events[i + 1])
        {
            if id == killed {
                let mut next = ew.clone();
                next.events.drain(i..=i + 1);
                return Some(next);
            }
        }
    }
    // Walk the down of the leftmost cancellable pair toward its up.
    let pairs = cancellable_pairs(ew);
    if let Some((_, d)) = pairs.first() {
        let mut next = ew.clone();
        next.events.swap(d - 1, *d);
        return Some(next);
    }
    // Sort ups before downs.
    for i in 0..ew.events.len().saturating_sub(1) {
        if matches!(ew.events[i], Event::Down { .. }) && matches!(ew.events[i + 1], Event::Up { .. })
        {
            let mut next = ew.clone();
            next.events.swap(i, i + 1);
            return Some(next);
        }
    }
    // Exchange two adjacent one-handles so a surviving alpha kill targets
    // the next-lower fresh pair. The exchange itself is invisible; only
    // the retargeted down event changes.
    {
        let (fresh, killed) = fresh_kill_ranks(ew);
        for pair in fresh.windows(2) {
            let (below, above) = (pair[0], pair[1]);
            if killed.contains(&above) && !killed.contains(&below) {
                let mut next = ew.clone();
                for ev in next.events.iter_mut() {
                    if *ev
                        == (Event::Down {
                            slot: Slot::Alpha,
                            id: above,
                        })
                    {
                        *ev = Event::Down {
                            slot: Slot::Alpha,
                            id: below,
                        };
                    }
                }
                return Some(next);
            }
        }
    }
    // Sort the down block by killed pair (id order = top-surface order).
    for i in 0..ew.events.len().saturating_sub(1) {
        if let (Event::Down { id: a, .. }, Event::Down { id: b, .. }) =
            (&ew.events[i], &ew.events[i + 1])
        {
            if a > b {
                let mut next = ew.clone();
                next.events.swap(i, i + 1);
                return Some(next);
            }
        }
    }
    None
}

fn lex_less(a: &Measure, b: &Measure) -> bool {
    a < b
}

/// Worst-case rewrite step count implied by the measure; used as a hard
/// bound in `normalize` and checked by the fuzz suite.
pub fn termination_bound(w: &CerfWord) -> u64 {
    let n = w.moves.len() as u64;
    let m = encode(w).map(|ew| measure(&ew)).unwrap_or([0; 6]);
    1 + m[0] + m[1] * (n + 1) + 4 * n * n + n
}

/// Canonical form by direct construction: drop cylinders, cancel every
/// beta-killed fresh pair, retarget the surviving alpha kills of fresh
/// pairs at the lowest-indexed ones, emit surviving ups then downs sorted
/// by killed top-surface pair. Used as the oracle for the rewrite loop.
fn canonical_events(ew: &EventWord) -> EventWord {
    let mut evs: Vec<Event> = ew
        .events
        .iter()
        .copied()
        .filter(|e| !matches!(e, Event::Cyl))
        .collect();
    let cancelled: std::collections::HashSet<usize> = {
        let created: std::collections::HashSet<usize> = evs
            .iter()
            .filter_map(|e| match e {
                Event::Up { id } => Some(*id),
                _ => None,
            })
            .collect();
        evs.iter()
            .filter_map(|e| match e {
                Event::Down {
                    slot: Slot::Beta,
                    id,
                } if created.contains(id) => Some(*id),
                _ => None,
            })
            .collect()
    };
    evs.retain(|e| match e {
        Event::Up { id } | Event::Down { id, .. } => !cancelled.contains(id),
        Event::Cyl => false,
    });
    let mut ups: Vec<Event> = Vec::new();
    let mut downs: Vec<Event> = Vec::new();
    for e in evs {
        match e {
            Event::Up { .. } => ups.push(e),
            Event::Down { .. } => downs.push(e),
            Event::Cyl => unreachable!(),
        }
    }
    let mut fresh: Vec<usize> = ups
        .iter()
        .filter_map(|e| match e {
            Event::Up { id } => Some(*id),
            _ => None,
        })
        .collect();
    fresh.sort_unstable();
    let kills_of_fresh = downs
        .iter()
        .filter(|e| matches!(e, Event::Down { id, .. } if fresh.binary_search(id).is_ok()))
        .count();
    let mut targets = fresh.iter().copied().take(kills_of_fresh);
    for e in downs.iter_mut() {
        if let Event::Down { slot, id } = e {
            if fresh.binary_search(id).is_ok() {
                debug_assert_eq!(*slot, Slot::Alpha, "beta kills of fresh pairs cancel");
                *id = targets.next().expect("one target per fresh kill");
            }
        }
    }
    downs.sort_by_key(|e| match e {
        Event::Down { id, .. } => *id,
        _ => unreachable!(),
    });
    ups.extend(downs);
    EventWord {
        start_genus: ew.start_genus,
        events: ups,
    }
}

/// Rewrites to the canonical form: no cylinders, no cancellable pairs, all
/// ups before all downs, surviving fresh kills pointed at the lowest fresh
/// pairs, downs sorted by killed-pair index ascending. Idempotent; every
/// intermediate step is a legal Cerf move.
pub fn normalize(w: &CerfWord) -> Result<CerfWord, BordismError> {
    Ok(normalize_traced(w)?.0)
}

/// `normalize` plus the measure trace, one entry per rewrite step starting
/// with the input's measure. The trace decreases strictly lexicographically.
pub fn normalize_traced(w: &CerfWord) -> Result<(CerfWord, Vec<Measure>), BordismError> {
    let mut ew = encode(w)?;
    let bound = termination_bound(w);
    let mut trace = vec![measure(&ew)];
    let mut steps = 0u64;
    while let Some(next) = step(&ew) {
        let m = measure(&next);
        debug_assert!(
            lex_less(&m, trace.last().expect("trace nonempty")),
            "rewrite step failed to decrease the measure"
        );
        trace.push(m);
        ew = next;
        steps += 1;
        assert!(steps <= bound, "rewrite exceeded its termination bound");
    }
    debug_assert_eq!(ew, canonical_events(&encode(w)?));
    Ok((decode(&ew, w.start), trace))
}

/// Deletes the (Up, Down(beta, fresh)) pair at `at`, the first Cerf move.
pub fn apply_cancel(w: &CerfWord, at: usize) -> Result<CerfWord, BordismError> {
    let traj = genus_trajectory(w)?;
    if at + 1 >= w.moves.len() {
        return Err(BordismError::OutOfRange {
            at,
            len: w.moves.len(),
        });
    }
    if w.moves[at] != HandleMove::Up {
        return Err(BordismError::NotCancellable {
            at,
            reason: "first move is not an up".into(),
        });
    }
    let fresh = traj[at] + 1;
    match w.moves[at + 1] {
        HandleMove::Down {
            slot: Slot::Beta,
            index,
        } if index == fresh => {}
        HandleMove::Down { slot, index } => {
            return Err(BordismError::NotCancellable {
                at,
                reason: format!(
                    "down {slot} {index} does not beta-kill the fresh pair {fresh}"
                ),
            })
        }
        _ => {
            return Err(BordismError::NotCancellable {
                at,
                reason: "second move is not a down".into(),
            })
        }
    }
    let mut moves = w.moves.clone();
    moves.drain(at..=at + 1);
    Ok(CerfWord {
        start: w.start,
        moves,
    })
}

/// Exchanges the two moves at `at`, `at+1` when their standard attaching
/// data are disjoint, re-indexing Down moves so killed pairs are preserved.
pub fn apply_switch(w: &CerfWord, at: usize) -> Result<CerfWord, BordismError> {
    genus_trajectory(w)?;
    if at + 1 >= w.moves.len() {
        return Err(BordismError::OutOfRange {
            at,
            len: w.moves.len(),
        });
    }
    let (a, b) = (w.moves[at], w.moves[at + 1]);
    if matches!(a, HandleMove::Cyl) || matches!(b, HandleMove::Cyl) {
        return Err(BordismError::NotSwitchable {
            at,
            reason: "cylinder moves carry no attaching data".into(),
        });
    }
    if let (HandleMove::Up, HandleMove::Up) = (a, b) {
        // Exchanging two one-handles relabels the pairs they create; on
        // standard-position words the result is the same word.
        return Ok(w.clone());
    }
    let mut ew = encode(w)?;
    if let (Event::Up { id }, Event::Down { id: killed, .. }) = (&ew.events[at], &ew.events[at + 1])
    {
        if id == killed {
            return Err(BordismError::NotSwitchable {
                at,
                reason: "down kills the pair the up creates".into(),
            });
        }
    }
    ew.events.swap(at, at + 1);
    Ok(decode(&ew, w.start))
}

/// Deletes the cylinder move at `at`, the third Cerf move.
pub fn apply_cyl_absorb(w: &CerfWord, at: usize) -> Result<CerfWord, BordismError> {
    if at >= w.moves.len() {
        return Err(BordismError::OutOfRange {
            at,
            len: w.moves.len(),
        });
    }
    if w.moves[at] != HandleMove::Cyl {
        return Err(BordismError::NotCylinder { at });
    }
    let mut moves = w.moves.clone();
    moves.remove(at);
    Ok(CerfWord {
        start: w.start,
        moves,
    })
}

/// True iff the normal forms agree componentwise. Complete only within the
/// standard-form fragment: words that differ by moves outside it may still
/// present equivalent bordisms.
pub fn equivalent(w1: &CerfWord, w2: &CerfWord) -> Result<bool, BordismError> {
    let e1 = end_label(w1)?;
    let e2 = end_label(w2)?;
    if w1.start != w2.start || e1 != e2 {
        return Err(BordismError::EndpointMismatch(format!(
            "start {:?} -> {:?} vs start {:?} -> {:?}",
            w1.start, e1, w2.start, e2
        )));
    }
    Ok(normalize(w1)? == normalize(w2)?)
}

/// Uniform random valid word for fuzzing: moves are drawn one at a time,
/// downs only when the current genus admits them.
pub fn random_word<R: rand::Rng>(start: SurfaceLabel, max_moves: usize, rng: &mut R) -> CerfWord {
    let n = rng.random_range(0..=max_moves);
    let mut g = start.genus;
    let mut moves = Vec::with_capacity(n);
    for _ in 0..n {
        let can_down = g >= 1;
        let choice = rng.random_range(0..if can_down { 4 } else { 2 });
        match choice {
            0 => {
                moves.push(HandleMove::Up);
                g += 1;
            }
            1 => moves.push(HandleMove::Cyl),
            _ => {
                let slot = if rng.random_bool(0.5) {
                    Slot::Alpha
                } else {
                    Slot::Beta
                };
                let index = rng.random_range(1..=g);
                moves.push(HandleMove::Down { slot, index });
                g -= 1;
            }
        }
    }
    CerfWord { start, moves }
}
