//! Removal-step mission MDP.
//!
//! One transition is one attempted capture. Choosing a debris that was
//! already removed, or one whose transfer does not fit in the remaining
//! propellant or time, ends the episode with zero reward. A feasible capture
//! pays the debris' current risk level, after which every risk is reset and a
//! new high-risk debris may be drawn.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DebrisCatalog, BASE_RISK};
use crate::orbits::{CostProvider, OrbitError, OrbitalElements, TransferCost};
use crate::rng::{stream_rng, PlannerRng, Stream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("catalog holds {found} debris but the mission expects {expected}")]
    CatalogSize { expected: usize, found: usize },
    #[error("action {action} out of range for {n} debris")]
    ActionOutOfRange { action: usize, n: usize },
    #[error("step called on a terminal state")]
    Terminal,
    #[error("invalid mission config: {0}")]
    Config(String),
    #[error("transfer cost failed: {0}")]
    Cost(#[from] OrbitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPolicy {
    /// The OTV is delivered to its first target; the first capture is free.
    #[default]
    FreeFirstPick,
    /// The OTV starts on this orbit and pays a real first transfer.
    ParkingOrbit(OrbitalElements),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    pub n_debris: usize,
    /// km/s
    pub delta_v_max: f64,
    /// s
    pub delta_t_max: f64,
    pub r_prio: u8,
    pub risk_threshold: f64,
    pub base_risk: u8,
    pub start_policy: StartPolicy,
    /// When false the agent's observation hides the risk levels.
    pub risk_visible: bool,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            n_debris: 10,
            delta_v_max: 1.2,
            delta_t_max: 2.0 * 86_400.0,
            r_prio: 10,
            risk_threshold: 0.5,
            base_risk: BASE_RISK,
            start_policy: StartPolicy::FreeFirstPick,
            risk_visible: true,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let fail = |m: String| Err(EnvError::Config(m));
        if self.n_debris == 0 {
            return fail("n_debris must be positive".into());
        }
        if !(self.delta_v_max > 0.0) {
            return fail(format!(
                "delta_v_max must be positive, got {}",
                self.delta_v_max
            ));
        }
        if !(self.delta_t_max > 0.0) {
            return fail(format!(
                "delta_t_max must be positive, got {}",
                self.delta_t_max
            ));
        }
        if !(1..=10).contains(&self.r_prio) {
            return fail(format!("r_prio must lie in [1, 10], got {}", self.r_prio));
        }
        if !(0.0..=1.0).contains(&self.risk_threshold) {
            return fail(format!(
                "risk_threshold must lie in [0, 1], got {}",
                self.risk_threshold
            ));
        }
        if self.base_risk == 0 || self.base_risk > self.r_prio {
            return fail(format!(
                "base_risk must lie in [1, r_prio], got {}",
                self.base_risk
            ));
        }
        Ok(())
    }

    /// Length of [`encode_state`] vectors.
    pub fn feature_len(&self) -> usize {
        feature_len(self.n_debris)
    }
}

pub fn feature_len(n_debris: usize) -> usize {
    3 + (n_debris + 1) + 2 * n_debris
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Location {
    Start,
    Debris(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionState {
    pub n_debris_left: usize,
    /// km/s
    pub dv_left: f64,
    /// s
    pub dt_left: f64,
    /// Consumed budgets, accumulated leg by leg. Feasibility is decided on
    /// these so the environment and the oracle sum costs identically.
    pub dv_used: f64,
    pub dt_used: f64,
    pub current_location: Location,
    pub removal_flags: Vec<bool>,
    pub collision_risk: Vec<u8>,
    /// Debris whose risk is currently raised, if any.
    pub elevated: Option<usize>,
}

impl MissionState {
    pub fn n_debris(&self) -> usize {
        self.removal_flags.len()
    }

    pub fn is_removed(&self, index: usize) -> bool {
        self.removal_flags[index]
    }

    /// Mask of debris that can still be captured.
    pub fn available(&self) -> Vec<bool> {
        self.removal_flags.iter().map(|&f| !f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationCause {
    None,
    DvExceeded,
    DtExceeded,
    InvalidRevisit,
}

impl TerminationCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationCause::None => "none",
            TerminationCause::DvExceeded => "dv_exceeded",
            TerminationCause::DtExceeded => "dt_exceeded",
            TerminationCause::InvalidRevisit => "invalid_revisit",
        }
    }
}

impl std::fmt::Display for TerminationCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: MissionState,
    pub reward: f64,
    pub terminal: bool,
    pub termination_cause: TerminationCause,
    /// Cost of the attempted leg (zero for an invalid revisit).
    pub cost: TransferCost,
}

/// Resets every risk to `base_risk` and, with probability `risk_threshold`,
/// raises one uniformly chosen available debris to `r_prio`.
///
/// Exactly two uniform `f64` draws are consumed per call, the branch draw
/// first and the index draw second, whether or not they are used.
pub fn rand_risk(
    flags: &[bool],
    config: &MissionConfig,
    rng: &mut PlannerRng,
) -> (Vec<u8>, Option<usize>) {
    let branch: f64 = rng.random();
    let pick: f64 = rng.random();
    let mut risks = vec![config.base_risk; flags.len()];
    let available: Vec<usize> = (0..flags.len()).filter(|&k| !flags[k]).collect();
    if available.is_empty() || branch >= config.risk_threshold {
        return (risks, None);
    }
    let slot = ((pick * available.len() as f64) as usize).min(available.len() - 1);
    let chosen = available[slot];
    risks[chosen] = config.r_prio;
    (risks, Some(chosen))
}

pub fn reset(
    config: &MissionConfig,
    catalog: &DebrisCatalog,
    rng: &mut PlannerRng,
) -> Result<MissionState, EnvError> {
    if catalog.len() != config.n_debris {
        return Err(EnvError::CatalogSize {
            expected: config.n_debris,
            found: catalog.len(),
        });
    }
    let flags = vec![false; config.n_debris];
    let (collision_risk, elevated) = rand_risk(&flags, config, rng);
    Ok(MissionState {
        n_debris_left: config.n_debris,
        dv_left: config.delta_v_max,
        dt_left: config.delta_t_max,
        dv_used: 0.0,
        dt_used: 0.0,
        current_location: Location::Start,
        removal_flags: flags,
        collision_risk,
        elevated,
    })
}

/// Cost of flying from `location` to debris `to` under `start` rules.
pub fn leg_cost(
    location: Location,
    to: usize,
    catalog: &DebrisCatalog,
    start: &StartPolicy,
    costs: &dyn CostProvider,
) -> Result<TransferCost, EnvError> {
    let target = catalog.elements(to);
    Ok(match (location, start) {
        (Location::Start, StartPolicy::FreeFirstPick) => TransferCost::ZERO,
        (Location::Start, StartPolicy::ParkingOrbit(parking)) => costs.cost(parking, target)?,
        (Location::Debris(from), _) => costs.cost(catalog.elements(from), target)?,
    })
}

/// Applies the feasibility rules and the transition for a priced leg.
fn apply(
    state: &MissionState,
    action: usize,
    cost: TransferCost,
    config: &MissionConfig,
    rng: &mut PlannerRng,
) -> StepOutcome {
    let dv_used = state.dv_used + cost.delta_v;
    let dt_used = state.dt_used + cost.delta_t;
    let cause = if dv_used > config.delta_v_max {
        TerminationCause::DvExceeded
    } else if dt_used > config.delta_t_max {
        TerminationCause::DtExceeded
    } else {
        TerminationCause::None
    };
    if cause != TerminationCause::None {
        return StepOutcome {
            next_state: state.clone(),
            reward: 0.0,
            terminal: true,
            termination_cause: cause,
            cost,
        };
    }

    let reward = f64::from(state.collision_risk[action]);
    let mut removal_flags = state.removal_flags.clone();
    removal_flags[action] = true;
    let (collision_risk, elevated) = rand_risk(&removal_flags, config, rng);
    let n_debris_left = state.n_debris_left - 1;
    StepOutcome {
        next_state: MissionState {
            n_debris_left,
            dv_left: config.delta_v_max - dv_used,
            dt_left: config.delta_t_max - dt_used,
            dv_used,
            dt_used,
            current_location: Location::Debris(action),
            removal_flags,
            collision_risk,
            elevated,
        },
        reward,
        terminal: n_debris_left == 0,
        termination_cause: TerminationCause::None,
        cost,
    }
}

fn check_action(state: &MissionState, action: usize) -> Result<Option<StepOutcome>, EnvError> {
    let n = state.n_debris();
    if action >= n {
        return Err(EnvError::ActionOutOfRange { action, n });
    }
    if state.n_debris_left == 0 {
        return Err(EnvError::Terminal);
    }
    if state.removal_flags[action] {
        return Ok(Some(StepOutcome {
            next_state: state.clone(),
            reward: 0.0,
            terminal: true,
            termination_cause: TerminationCause::InvalidRevisit,
            cost: TransferCost::ZERO,
        }));
    }
    Ok(None)
}

pub fn step(
    state: &MissionState,
    action: usize,
    config: &MissionConfig,
    catalog: &DebrisCatalog,
    costs: &dyn CostProvider,
    rng: &mut PlannerRng,
) -> Result<StepOutcome, EnvError> {
    if let Some(revisit) = check_action(state, action)? {
        return Ok(revisit);
    }
    let cost = leg_cost(
        state.current_location,
        action,
        catalog,
        &config.start_policy,
        costs,
    )?;
    Ok(apply(state, action, cost, config, rng))
}

/// Network input: normalized budgets, one-hot location (START in the last
/// slot), removal flags and risk levels scaled by `r_prio`.
pub fn encode_state(state: &MissionState, config: &MissionConfig) -> Vec<f64> {
    let mut out = vec![0.0; config.feature_len()];
    encode_state_into(state, config, &mut out);
    out
}

pub fn encode_state_into(state: &MissionState, config: &MissionConfig, out: &mut [f64]) {
    let n = config.n_debris;
    debug_assert_eq!(out.len(), feature_len(n));
    out.fill(0.0);
    out[0] = state.n_debris_left as f64 / n as f64;
    out[1] = state.dv_left / config.delta_v_max;
    out[2] = state.dt_left / config.delta_t_max;
    let slot = match state.current_location {
        Location::Debris(k) => k,
        Location::Start => n,
    };
    out[3 + slot] = 1.0;
    let flags = 3 + n + 1;
    let risks = flags + n;
    let scale = f64::from(config.r_prio);
    for k in 0..n {
        out[flags + k] = if state.removal_flags[k] { 1.0 } else { 0.0 };
        let level = if config.risk_visible {
            state.collision_risk[k]
        } else {
            config.base_risk
        };
        out[risks + k] = f64::from(level) / scale;
    }
}

/// Leg costs between every pair of catalog entries, plus the first leg from
/// the start location.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    legs: Vec<TransferCost>,
    first: Vec<TransferCost>,
}

impl CostMatrix {
    pub fn build(
        catalog: &DebrisCatalog,
        start: &StartPolicy,
        costs: &dyn CostProvider,
    ) -> Result<Self, EnvError> {
        let n = catalog.len();
        let mut legs = Vec::with_capacity(n * n);
        for from in 0..n {
            for to in 0..n {
                legs.push(leg_cost(Location::Debris(from), to, catalog, start, costs)?);
            }
        }
        let first = (0..n)
            .map(|to| leg_cost(Location::Start, to, catalog, start, costs))
            .collect::<Result<_, _>>()?;
        Ok(Self { n, legs, first })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn leg(&self, from: Location, to: usize) -> TransferCost {
        match from {
            Location::Start => self.first[to],
            Location::Debris(k) => self.legs[k * self.n + to],
        }
    }
}

/// A mission episode bundled with its catalog, cached leg costs and random
/// stream.
#[derive(Debug, Clone)]
pub struct Environment {
    config: MissionConfig,
    catalog: DebrisCatalog,
    costs: CostMatrix,
    rng: PlannerRng,
    state: MissionState,
    done: bool,
}

impl Environment {
    pub fn new(
        config: MissionConfig,
        catalog: DebrisCatalog,
        costs: &dyn CostProvider,
        seed: u64,
    ) -> Result<Self, EnvError> {
        config.validate()?;
        let matrix = CostMatrix::build(&catalog, &config.start_policy, costs)?;
        Self::with_costs(config, catalog, matrix, seed)
    }

    pub fn with_costs(
        config: MissionConfig,
        catalog: DebrisCatalog,
        costs: CostMatrix,
        seed: u64,
    ) -> Result<Self, EnvError> {
        config.validate()?;
        if costs.len() != catalog.len() {
            return Err(EnvError::CatalogSize {
                expected: catalog.len(),
                found: costs.len(),
            });
        }
        let mut rng = stream_rng(seed, Stream::Environment);
        let state = reset(&config, &catalog, &mut rng)?;
        Ok(Self {
            config,
            catalog,
            costs,
            rng,
            state,
            done: false,
        })
    }

    pub fn config(&self) -> &MissionConfig {
        &self.config
    }

    pub fn catalog(&self) -> &DebrisCatalog {
        &self.catalog
    }

    pub fn costs(&self) -> &CostMatrix {
        &self.costs
    }

    pub fn state(&self) -> &MissionState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn n_actions(&self) -> usize {
        self.config.n_debris
    }

    pub fn reset(&mut self) -> &MissionState {
        self.state = reset(&self.config, &self.catalog, &mut self.rng)
            .expect("catalog size checked at construction");
        self.done = false;
        &self.state
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::Terminal);
        }
        let outcome = match check_action(&self.state, action)? {
            Some(revisit) => revisit,
            None => {
                let cost = self.costs.leg(self.state.current_location, action);
                apply(&self.state, action, cost, &self.config, &mut self.rng)
            }
        };
        self.state = outcome.next_state.clone();
        self.done = outcome.terminal;
        Ok(outcome)
    }

    pub fn observe(&self) -> Vec<f64> {
        encode_state(&self.state, &self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::OrbitalElements;

    fn catalog(n: usize) -> DebrisCatalog {
        DebrisCatalog::from_elements(
            (0..n).map(|k| OrbitalElements::new(7000.0 + 10.0 * k as f64, 1.5, 0.0, 0.0).unwrap()),
        )
    }

    fn unit_costs(
        from: &OrbitalElements,
        to: &OrbitalElements,
    ) -> Result<TransferCost, OrbitError> {
        let _ = (from, to);
        Ok(TransferCost::new(1.0, 1.0))
    }

    fn config(n: usize) -> MissionConfig {
        MissionConfig {
            n_debris: n,
            delta_v_max: 2.5,
            delta_t_max: 100.0,
            ..Default::default()
        }
    }

    #[test]
    fn reset_fills_budgets() {
        let cfg = MissionConfig {
            n_debris: 4,
            delta_v_max: 1.2,
            delta_t_max: 2.0 * 86_400.0,
            risk_threshold: 0.0,
            ..Default::default()
        };
        let mut rng = stream_rng(1, Stream::Environment);
        let s = reset(&cfg, &catalog(4), &mut rng).unwrap();
        assert_eq!(s.removal_flags, vec![false; 4]);
        assert_eq!(s.n_debris_left, 4);
        assert_eq!(s.dv_left, 1.2);
        assert_eq!(s.dt_left, 172_800.0);
        assert_eq!(s.current_location, Location::Start);
        assert_eq!(s.collision_risk, vec![1; 4]);
        assert!(matches!(
            reset(&cfg, &catalog(3), &mut rng),
            Err(EnvError::CatalogSize {
                expected: 4,
                found: 3
            })
        ));
    }

    #[test]
    fn threshold_one_always_raises_exactly_one() {
        let cfg = MissionConfig {
            risk_threshold: 1.0,
            ..config(4)
        };
        let mut rng = stream_rng(3, Stream::Environment);
        for _ in 0..50 {
            let s = reset(&cfg, &catalog(4), &mut rng).unwrap();
            assert_eq!(s.collision_risk.iter().filter(|&&r| r == 10).count(), 1);
        }
    }

    #[test]
    fn rand_risk_only_raises_available_debris() {
        let cfg = MissionConfig {
            risk_threshold: 1.0,
            ..config(4)
        };
        let flags = [false, true, false, true];
        let mut rng = stream_rng(5, Stream::Environment);
        let mut seen = [0usize; 4];
        for _ in 0..200 {
            let (risks, elevated) = rand_risk(&flags, &cfg, &mut rng);
            let k = elevated.unwrap();
            assert!(k == 0 || k == 2);
            let mut expected = vec![1u8; 4];
            expected[k] = 10;
            assert_eq!(risks, expected);
            seen[k] += 1;
        }
        assert!(seen[0] > 0 && seen[2] > 0);
    }

    #[test]
    fn rand_risk_without_branch_or_candidates() {
        let mut rng = stream_rng(5, Stream::Environment);
        let off = MissionConfig {
            risk_threshold: 0.0,
            ..config(4)
        };
        assert_eq!(rand_risk(&[false; 4], &off, &mut rng), (vec![1; 4], None));
        let on = MissionConfig {
            risk_threshold: 1.0,
            ..config(4)
        };
        assert_eq!(rand_risk(&[true; 4], &on, &mut rng), (vec![1; 4], None));
    }

    #[test]
    fn rand_risk_consumes_two_draws() {
        let cfg = config(4);
        let mut a = stream_rng(9, Stream::Environment);
        let mut b = stream_rng(9, Stream::Environment);
        rand_risk(&[true; 4], &cfg, &mut a);
        let _: f64 = b.random();
        let _: f64 = b.random();
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn capturing_high_risk_debris_pays_its_level() {
        let cfg = config(4);
        let cat = catalog(4);
        let mut rng = stream_rng(1, Stream::Environment);
        let mut s = reset(&cfg, &cat, &mut rng).unwrap();
        s.collision_risk = vec![1, 10, 1, 1];
        s.elevated = Some(1);
        let out = step(&s, 1, &cfg, &cat, &unit_costs, &mut rng).unwrap();
        assert_eq!(out.reward, 10.0);
        assert!(!out.terminal);
        assert_eq!(out.next_state.current_location, Location::Debris(1));
        assert_eq!(out.next_state.n_debris_left, 3);
        assert!(out.next_state.removal_flags[1]);
    }

    #[test]
    fn revisit_is_terminal_without_reward() {
        let cfg = config(3);
        let cat = catalog(3);
        let mut rng = stream_rng(1, Stream::Environment);
        let s = reset(&cfg, &cat, &mut rng).unwrap();
        let s = step(&s, 0, &cfg, &cat, &unit_costs, &mut rng)
            .unwrap()
            .next_state;
        let out = step(&s, 0, &cfg, &cat, &unit_costs, &mut rng).unwrap();
        assert_eq!(out.reward, 0.0);
        assert!(out.terminal);
        assert_eq!(out.termination_cause, TerminationCause::InvalidRevisit);
    }

    #[test]
    fn unit_costs_run_out_on_third_pick() {
        // free first pick, then two legs of 1.0 against a 2.5 budget
        let cfg = MissionConfig {
            n_debris: 4,
            risk_threshold: 0.0,
            ..config(4)
        };
        let cat = catalog(4);
        let mut rng = stream_rng(1, Stream::Environment);
        let mut s = reset(&cfg, &cat, &mut rng).unwrap();
        for (k, expected_dv) in [(0, 2.5), (1, 1.5), (2, 0.5)] {
            let out = step(&s, k, &cfg, &cat, &unit_costs, &mut rng).unwrap();
            assert_eq!(out.reward, 1.0);
            assert_eq!(out.next_state.dv_left, expected_dv);
            s = out.next_state;
        }
        let out = step(&s, 3, &cfg, &cat, &unit_costs, &mut rng).unwrap();
        assert_eq!(out.termination_cause, TerminationCause::DvExceeded);
        assert_eq!(out.reward, 0.0);
        assert!(out.terminal);
    }

    #[test]
    fn three_debris_third_pick_exceeds_budget_under_parking_start() {
        let parking = OrbitalElements::new(6800.0, 1.5, 0.0, 0.0).unwrap();
        let cfg = MissionConfig {
            n_debris: 3,
            start_policy: StartPolicy::ParkingOrbit(parking),
            ..config(3)
        };
        let cat = catalog(3);
        let mut rng = stream_rng(1, Stream::Environment);
        let s = reset(&cfg, &cat, &mut rng).unwrap();
        let s = step(&s, 0, &cfg, &cat, &unit_costs, &mut rng)
            .unwrap()
            .next_state;
        let s = step(&s, 1, &cfg, &cat, &unit_costs, &mut rng)
            .unwrap()
            .next_state;
        let out = step(&s, 2, &cfg, &cat, &unit_costs, &mut rng).unwrap();
        assert_eq!(out.termination_cause, TerminationCause::DvExceeded);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn time_budget_is_checked() {
        let slow = |_: &OrbitalElements, _: &OrbitalElements| Ok(TransferCost::new(0.1, 60.0));
        let cfg = config(3);
        let cat = catalog(3);
        let mut rng = stream_rng(1, Stream::Environment);
        let s = reset(&cfg, &cat, &mut rng).unwrap();
        let s = step(&s, 0, &cfg, &cat, &slow, &mut rng).unwrap().next_state;
        let s = step(&s, 1, &cfg, &cat, &slow, &mut rng).unwrap().next_state;
        let out = step(&s, 2, &cfg, &cat, &slow, &mut rng).unwrap();
        assert_eq!(out.termination_cause, TerminationCause::DtExceeded);
    }

    #[test]
    fn last_capture_pays_and_terminates() {
        let cfg = MissionConfig {
            delta_v_max: 10.0,
            ..config(2)
        };
        let cat = catalog(2);
        let mut rng = stream_rng(1, Stream::Environment);
        let s = reset(&cfg, &cat, &mut rng).unwrap();
        let s = step(&s, 1, &cfg, &cat, &unit_costs, &mut rng)
            .unwrap()
            .next_state;
        let out = step(&s, 0, &cfg, &cat, &unit_costs, &mut rng).unwrap();
        assert!(out.terminal);
        assert!(out.reward >= 1.0);
        assert_eq!(out.termination_cause, TerminationCause::None);
        assert_eq!(out.next_state.n_debris_left, 0);
        assert_eq!(out.next_state.collision_risk, vec![1, 1]);
        assert!(matches!(
            step(&out.next_state, 0, &cfg, &cat, &unit_costs, &mut rng),
            Err(EnvError::Terminal)
        ));
    }

    #[test]
    fn out_of_range_action_is_a_usage_error() {
        let cfg = config(3);
        let cat = catalog(3);
        let mut rng = stream_rng(1, Stream::Environment);
        let s = reset(&cfg, &cat, &mut rng).unwrap();
        assert!(matches!(
            step(&s, 3, &cfg, &cat, &unit_costs, &mut rng),
            Err(EnvError::ActionOutOfRange { action: 3, n: 3 })
        ));
    }

    #[test]
    fn encoding_layout() {
        let cfg = MissionConfig {
            risk_threshold: 0.0,
            ..config(10)
        };
        let mut rng = stream_rng(1, Stream::Environment);
        let s = reset(&cfg, &catalog(10), &mut rng).unwrap();
        let x = encode_state(&s, &cfg);
        assert_eq!(x.len(), 34);
        assert_eq!(&x[..3], &[1.0, 1.0, 1.0]);
        assert_eq!(x[3 + 10], 1.0);
        assert!(x[14..24].iter().all(|&f| f == 0.0));
        assert!(x[24..34].iter().all(|&r| r == 0.1));
    }

    #[test]
    fn masked_encoding_hides_risk() {
        let visible = config(4);
        let masked = MissionConfig {
            risk_visible: false,
            ..config(4)
        };
        let mut rng = stream_rng(1, Stream::Environment);
        let mut s = reset(&visible, &catalog(4), &mut rng).unwrap();
        s.collision_risk = vec![1, 10, 1, 1];
        let a = encode_state(&s, &masked);
        s.collision_risk = vec![10, 1, 1, 1];
        let b = encode_state(&s, &masked);
        assert_eq!(a, b);
        assert!(a[12..16].iter().all(|&r| r == 0.1));
        assert_ne!(encode_state(&s, &visible)[12..16], a[12..16]);
    }

    #[test]
    fn environment_matches_free_functions() {
        let cfg = MissionConfig {
            delta_v_max: 3.5,
            ..config(5)
        };
        let cat = catalog(5);
        let mut env = Environment::new(cfg.clone(), cat.clone(), &unit_costs, 17).unwrap();
        let mut rng = stream_rng(17, Stream::Environment);
        let mut s = reset(&cfg, &cat, &mut rng).unwrap();
        assert_eq!(env.state(), &s);
        for a in [3, 1, 4, 0, 2] {
            let free = step(&s, a, &cfg, &cat, &unit_costs, &mut rng).unwrap();
            let wrapped = env.step(a).unwrap();
            assert_eq!(free, wrapped);
            s = free.next_state;
            if free.terminal {
                break;
            }
        }
        assert!(env.is_done());
        assert!(matches!(env.step(0), Err(EnvError::Terminal)));
        env.reset();
        assert!(!env.is_done());
    }

    #[test]
    fn config_validation() {
        assert!(config(3).validate().is_ok());
        for bad in [
            MissionConfig {
                delta_v_max: 0.0,
                ..config(3)
            },
            MissionConfig {
                delta_t_max: -1.0,
                ..config(3)
            },
            MissionConfig {
                r_prio: 11,
                ..config(3)
            },
            MissionConfig {
                risk_threshold: 1.5,
                ..config(3)
            },
            MissionConfig {
                n_debris: 0,
                ..config(3)
            },
        ] {
            assert!(matches!(bad.validate(), Err(EnvError::Config(_))));
        }
    }
}
