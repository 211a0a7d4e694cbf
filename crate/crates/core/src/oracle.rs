//! Exhaustive search used as ground truth for small catalogs.
//!
//! Sequences are visited in lexicographic order and streamed, never stored.
//! Leg costs are summed in visiting order starting from zero, exactly as the
//! environment accumulates them, so totals reported here are bit-identical to
//! the budgets an episode consumes along the same sequence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DebrisCatalog, BASE_RISK};
use crate::environment::{CostMatrix, EnvError, Location, StartPolicy};
use crate::orbits::{CostProvider, TransferCost};

/// Largest catalog the full-depth search accepts.
pub const FULL_DEPTH_MAX_N: usize = 12;
/// Totals within this distance (km/s) of the minimum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("sequence length {k} must lie in 1..={n}")]
    Length { k: usize, n: usize },
    #[error("catalog of {n} debris exceeds the exhaustive-search guard ({FULL_DEPTH_MAX_N})")]
    TooLarge { n: usize },
    #[error("invalid debris index {index} for a catalog of {n}")]
    Index { index: usize, n: usize },
    #[error("debris {0} appears twice in the sequence")]
    Repeated(usize),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Ordered `k`-permutations of `0..n` in lexicographic order.
#[derive(Debug, Clone)]
pub struct Sequences {
    n: usize,
    current: Vec<usize>,
    used: Vec<bool>,
    started: bool,
    finished: bool,
}

pub fn enumerate_sequences(n: usize, k: usize) -> Result<Sequences, OracleError> {
    if k == 0 || k > n {
        return Err(OracleError::Length { k, n });
    }
    let mut used = vec![false; n];
    used[..k].iter_mut().for_each(|u| *u = true);
    Ok(Sequences {
        n,
        current: (0..k).collect(),
        used,
        started: false,
        finished: false,
    })
}

impl Sequences {
    fn advance(&mut self) -> bool {
        let k = self.current.len();
        for pos in (0..k).rev() {
            let old = self.current[pos];
            self.used[old] = false;
            if let Some(next) = (old + 1..self.n).find(|&v| !self.used[v]) {
                self.current[pos] = next;
                self.used[next] = true;
                // refill the tail with the smallest free values
                let mut free = (0..self.n).filter(|&v| !self.used[v]);
                let tail: Vec<usize> = free.by_ref().take(k - pos - 1).collect();
                for (slot, v) in self.current[pos + 1..].iter_mut().zip(tail) {
                    *slot = v;
                    self.used[v] = true;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for Sequences {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.finished {
            return None;
        }
        if self.started && !self.advance() {
            self.finished = true;
            return None;
        }
        self.started = true;
        Some(self.current.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEvaluation {
    pub sequence: Vec<usize>,
    /// km/s
    pub total_dv: f64,
    /// s
    pub total_dt: f64,
    /// Reward with risk events disabled: `base_risk` per capture.
    pub total_reward: f64,
}

fn check_sequence(seq: &[usize], n: usize) -> Result<(), OracleError> {
    let mut seen = vec![false; n];
    for &index in seq {
        if index >= n {
            return Err(OracleError::Index { index, n });
        }
        if std::mem::replace(&mut seen[index], true) {
            return Err(OracleError::Repeated(index));
        }
    }
    Ok(())
}

pub fn evaluate_sequence(
    seq: &[usize],
    catalog: &DebrisCatalog,
    costs: &dyn CostProvider,
    start: &StartPolicy,
) -> Result<SequenceEvaluation, OracleError> {
    check_sequence(seq, catalog.len())?;
    let mut location = Location::Start;
    let (mut dv, mut dt) = (0.0, 0.0);
    for &to in seq {
        let leg = crate::environment::leg_cost(location, to, catalog, start, costs)?;
        dv += leg.delta_v;
        dt += leg.delta_t;
        location = Location::Debris(to);
    }
    Ok(SequenceEvaluation {
        sequence: seq.to_vec(),
        total_dv: dv,
        total_dt: dt,
        total_reward: f64::from(BASE_RISK) * seq.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinDvResult {
    /// Lexicographically first sequence attaining the minimum.
    pub sequence: Vec<usize>,
    pub dv_optimal: f64,
    /// Total time of the witness sequence.
    pub dt_of_optimal: f64,
    /// True when every sequence within [`TIE_TOLERANCE`] of the minimum is
    /// the witness or its reversal.
    pub unique: bool,
    /// Number of ordered sequences within the tie tolerance.
    pub ties: usize,
    pub evaluated: usize,
}

/// Minimum total ΔV over all length-`k` sequences.
pub fn optimal_min_dv(
    catalog: &DebrisCatalog,
    k: usize,
    costs: &dyn CostProvider,
    start: &StartPolicy,
) -> Result<MinDvResult, OracleError> {
    let n = catalog.len();
    if k == 0 || k > n {
        return Err(OracleError::Length { k, n });
    }
    let matrix = CostMatrix::build(catalog, start, costs)?;
    optimal_min_dv_with(&matrix, k)
}

pub fn optimal_min_dv_with(matrix: &CostMatrix, k: usize) -> Result<MinDvResult, OracleError> {
    let n = matrix.len();
    if k == 0 || k > n {
        return Err(OracleError::Length { k, n });
    }
    let mut search = MinDvSearch {
        matrix,
        k,
        prefix: Vec::with_capacity(k),
        used: vec![false; n],
        best: f64::INFINITY,
        best_dt: 0.0,
        witness: Vec::new(),
        near: Vec::new(),
        evaluated: 0,
    };
    search.descend(Location::Start, 0.0, 0.0);

    let best = search.best;
    let near: Vec<Vec<usize>> = search
        .near
        .into_iter()
        .filter(|(dv, _)| *dv <= best + TIE_TOLERANCE)
        .map(|(_, s)| s)
        .collect();
    let canonical = |s: &Vec<usize>| {
        let mut r = s.clone();
        r.reverse();
        std::cmp::min(s.clone(), r)
    };
    let first_class = canonical(&search.witness);
    let unique = near.iter().all(|s| canonical(s) == first_class);
    Ok(MinDvResult {
        sequence: search.witness,
        dv_optimal: best,
        dt_of_optimal: search.best_dt,
        unique,
        ties: near.len(),
        evaluated: search.evaluated,
    })
}

struct MinDvSearch<'a> {
    matrix: &'a CostMatrix,
    k: usize,
    prefix: Vec<usize>,
    used: Vec<bool>,
    best: f64,
    best_dt: f64,
    witness: Vec<usize>,
    near: Vec<(f64, Vec<usize>)>,
    evaluated: usize,
}

impl MinDvSearch<'_> {
    fn descend(&mut self, at: Location, dv: f64, dt: f64) {
        if self.prefix.len() == self.k {
            self.evaluated += 1;
            if dv < self.best {
                self.best = dv;
                self.best_dt = dt;
                self.witness.clone_from(&self.prefix);
                let best = self.best;
                self.near.retain(|(v, _)| *v <= best + TIE_TOLERANCE);
            }
            if dv <= self.best + TIE_TOLERANCE {
                self.near.push((dv, self.prefix.clone()));
            }
            return;
        }
        for to in 0..self.matrix.len() {
            if self.used[to] {
                continue;
            }
            let TransferCost { delta_v, delta_t } = self.matrix.leg(at, to);
            self.used[to] = true;
            self.prefix.push(to);
            self.descend(Location::Debris(to), dv + delta_v, dt + delta_t);
            self.prefix.pop();
            self.used[to] = false;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    /// km/s
    pub delta_v_max: f64,
    /// s
    pub delta_t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullDepthResult {
    /// Maximum episode reward with risk events disabled (captures × base risk).
    pub best_reward: f64,
    /// Lexicographically first longest feasible sequence.
    pub sequence: Vec<usize>,
    pub total_dv: f64,
    pub total_dt: f64,
    /// Feasible prefixes visited.
    pub nodes: u64,
}

/// Depth-first search over every feasible prefix under both budgets, with
/// risk events disabled. Only budget-infeasible branches are cut.
pub fn full_depth_best_reward(
    catalog: &DebrisCatalog,
    budgets: Budgets,
    costs: &dyn CostProvider,
    start: &StartPolicy,
) -> Result<FullDepthResult, OracleError> {
    let n = catalog.len();
    if n > FULL_DEPTH_MAX_N {
        return Err(OracleError::TooLarge { n });
    }
    let matrix = CostMatrix::build(catalog, start, costs)?;
    full_depth_with(&matrix, budgets)
}

pub fn full_depth_with(
    matrix: &CostMatrix,
    budgets: Budgets,
) -> Result<FullDepthResult, OracleError> {
    let n = matrix.len();
    if n > FULL_DEPTH_MAX_N {
        return Err(OracleError::TooLarge { n });
    }
    let mut search = DepthSearch {
        matrix,
        budgets,
        prefix: Vec::with_capacity(n),
        used: vec![false; n],
        best: Vec::new(),
        best_totals: (0.0, 0.0),
        nodes: 0,
    };
    search.descend(Location::Start, 0.0, 0.0);
    Ok(FullDepthResult {
        best_reward: f64::from(BASE_RISK) * search.best.len() as f64,
        sequence: search.best,
        total_dv: search.best_totals.0,
        total_dt: search.best_totals.1,
        nodes: search.nodes,
    })
}

struct DepthSearch<'a> {
    matrix: &'a CostMatrix,
    budgets: Budgets,
    prefix: Vec<usize>,
    used: Vec<bool>,
    best: Vec<usize>,
    best_totals: (f64, f64),
    nodes: u64,
}

impl DepthSearch<'_> {
    /// Returns true once a sequence covering the whole catalog is found.
    fn descend(&mut self, at: Location, dv: f64, dt: f64) -> bool {
        self.nodes += 1;
        if self.prefix.len() > self.best.len() {
            self.best.clone_from(&self.prefix);
            self.best_totals = (dv, dt);
            if self.best.len() == self.matrix.len() {
                return true;
            }
        }
        for to in 0..self.matrix.len() {
            if self.used[to] {
                continue;
            }
            let leg = self.matrix.leg(at, to);
            let (ndv, ndt) = (dv + leg.delta_v, dt + leg.delta_t);
            if ndv > self.budgets.delta_v_max || ndt > self.budgets.delta_t_max {
                continue;
            }
            self.used[to] = true;
            self.prefix.push(to);
            let complete = self.descend(Location::Debris(to), ndv, ndt);
            self.prefix.pop();
            self.used[to] = false;
            if complete {
                return true;
            }
        }
        false
    }
}
