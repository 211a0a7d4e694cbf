//! Deep Q-network agent: value and fixed target networks, uniform replay,
//! ε-greedy control and the Adam update rule.

pub mod adam;
pub mod network;
pub mod replay;

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{EnvError, Environment, TerminationCause};
use crate::rng::{stream_rng, PlannerRng, Stream};

pub use adam::Adam;
pub use network::{backward, loss, DenseLayer, Gradients, QNetwork, Workspace};
pub use replay::ReplayBuffer;

pub const METRICS_HEADER: &str = "episode,total_reward,steps,epsilon,mean_loss,terminal_cause";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("non-finite network parameters after update {0}")]
    Diverged(u64),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// One stored transition `(s, a, r, s', done)` in feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episodes over which ε decays linearly.
    pub epsilon_decay_fraction: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps between copies of the value network into the target.
    pub target_sync_period: u64,
    pub hidden: Vec<usize>,
    pub episodes: usize,
    /// No updates happen before the buffer holds `max(batch_size, learning_starts)`.
    pub learning_starts: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            learning_rate: 1e-3,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.8,
            batch_size: 64,
            buffer_capacity: 50_000,
            target_sync_period: 500,
            hidden: vec![64, 64],
            episodes: 2_000,
            learning_starts: 1_000,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let fail = |m: String| Err(LearnerError::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        for (name, e) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&e) {
                return fail(format!("{name} must lie in [0, 1], got {e}"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return fail("epsilon_decay_fraction must lie in [0, 1]".into());
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive".into());
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.target_sync_period == 0 {
            return fail(
                "batch_size, buffer_capacity and target_sync_period must be positive".into(),
            );
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer widths must be positive".into());
        }
        Ok(())
    }

    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_fraction: self.epsilon_decay_fraction,
        }
    }

    pub fn warmup(&self) -> usize {
        self.batch_size.max(self.learning_starts)
    }
}

/// Linear decay from `start` to `end` over the first `decay_fraction` of the
/// run, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl EpsilonSchedule {
    pub fn value(&self, episode: usize, episodes: usize) -> f64 {
        let horizon = self.decay_fraction * episodes as f64;
        if horizon <= 0.0 {
            return self.end;
        }
        let progress = (episode as f64 / horizon).min(1.0);
        (self.start + (self.end - self.start) * progress).clamp(0.0, 1.0)
    }
}

/// Temporal-difference target: `R` for a terminal transition, otherwise
/// `R + γ max_a' Q_target(s', a')`.
pub fn td_target(e: &Experience, target: &QNetwork, gamma: f64) -> Result<f64, LearnerError> {
    if e.done {
        return Ok(e.reward);
    }
    let q = target.forward(&e.next_state)?;
    Ok(e.reward + gamma * max_value(&q))
}

fn td_target_with(
    e: &Experience,
    target: &QNetwork,
    gamma: f64,
    ws: &mut Workspace,
) -> Result<f64, LearnerError> {
    if e.done {
        return Ok(e.reward);
    }
    let q = ws.forward(target, &e.next_state)?;
    Ok(e.reward + gamma * max_value(q))
}

fn max_value(q: &[f64]) -> f64 {
    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Index of the largest value; ties go to the lowest index. Entries whose mask
/// is false are skipped. Falls back to the unmasked argmax when nothing is
/// valid.
pub fn argmax(q: &[f64], mask: Option<&[bool]>) -> usize {
    let mut best: Option<usize> = None;
    for (k, &v) in q.iter().enumerate() {
        if mask.is_some_and(|m| !m[k]) {
            continue;
        }
        if best.is_none_or(|b| v > q[b]) {
            best = Some(k);
        }
    }
    match best {
        Some(b) => b,
        None => argmax(q, None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// Exploration covers every action, removed debris included.
    Train,
    /// With `masked`, both exploration and the argmax skip removed debris.
    Eval { masked: bool },
}

/// ε-greedy choice. One uniform draw decides exploration; a second picks the
/// random action only when exploring.
pub fn select_action(
    q: &[f64],
    valid_mask: &[bool],
    epsilon: f64,
    rng: &mut PlannerRng,
    mode: SelectionMode,
) -> usize {
    let mask = match mode {
        SelectionMode::Eval { masked: true } if valid_mask.iter().any(|&v| v) => Some(valid_mask),
        _ => None,
    };
    let explore = rng.random::<f64>() < epsilon;
    if explore {
        return match mask {
            None => rng.random_range(0..q.len()),
            Some(m) => {
                let valid: Vec<usize> = (0..q.len()).filter(|&k| m[k]).collect();
                valid[rng.random_range(0..valid.len())]
            }
        };
    }
    argmax(q, mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub total_reward: f64,
    pub steps: usize,
    pub epsilon: f64,
    /// Mean batch loss over the episode's updates; `None` before warm-up.
    pub mean_loss: Option<f64>,
    pub terminal_cause: TerminationCause,
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub episodes: Vec<EpisodeRecord>,
    pub params: QNetwork,
    pub total_steps: u64,
    pub updates: u64,
}

impl TrainingReport {
    pub fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.total_reward).collect()
    }

    pub fn write_metrics_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_metrics_csv(&self.episodes, w)
    }
}

pub fn write_metrics_csv<W: Write>(records: &[EpisodeRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in records {
        let loss = r.mean_loss.map(|l| l.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.episode, r.total_reward, r.steps, r.epsilon, loss, r.terminal_cause
        )?;
    }
    Ok(())
}

/// Single-threaded DQN trainer over one environment.
#[derive(Debug, Clone)]
pub struct Trainer {
    env: Environment,
    config: AgentConfig,
    value: QNetwork,
    target: QNetwork,
    buffer: ReplayBuffer,
    adam: Adam,
    rng: PlannerRng,
    total_steps: u64,
    syncs: u64,
    ws_value: Workspace,
    ws_target: Workspace,
    grads: Gradients,
    targets: Vec<f64>,
}

impl Trainer {
    pub fn new(env: Environment, config: AgentConfig) -> Result<Self, LearnerError> {
        config.validate()?;
        let mut rng = stream_rng(config.seed, Stream::Agent);
        let inputs = env.config().feature_len();
        let value = QNetwork::new(inputs, &config.hidden, env.n_actions(), &mut rng);
        let target = value.clone();
        Ok(Self {
            buffer: ReplayBuffer::new(config.buffer_capacity),
            adam: Adam::new(config.learning_rate, &value),
            ws_value: Workspace::for_network(&value),
            ws_target: Workspace::for_network(&value),
            grads: QNetwork::zeros_like(&value),
            targets: Vec::with_capacity(config.batch_size),
            env,
            config,
            value,
            target,
            rng,
            total_steps: 0,
            syncs: 0,
        })
    }

    pub fn value(&self) -> &QNetwork {
        &self.value
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn env_mut(&mut self) -> &mut Environment {
        &mut self.env
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }

    pub fn updates(&self) -> u64 {
        self.adam.steps()
    }

    /// Runs one ε-greedy episode, learning after every environment step once
    /// the buffer is warm.
    pub fn run_episode(&mut self, episode: usize) -> Result<EpisodeRecord, LearnerError> {
        let epsilon = self.config.epsilon().value(episode, self.config.episodes);
        self.env.reset();
        let mut state = self.env.observe();
        let mut total_reward = 0.0;
        let mut steps = 0;
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        let cause = loop {
            let q = self.ws_value.forward(&self.value, &state)?;
            let action = select_action(q, &[], epsilon, &mut self.rng, SelectionMode::Train);
            let outcome = self.env.step(action)?;
            let next_state = self.env.observe();
            total_reward += outcome.reward;
            steps += 1;
            self.buffer.push(Experience {
                state: std::mem::replace(&mut state, next_state.clone()),
                action,
                reward: outcome.reward,
                next_state,
                done: outcome.terminal,
            });
            self.total_steps += 1;
            if self.buffer.len() >= self.config.warmup() {
                loss_sum += self.learn()?;
                loss_count += 1;
            }
            if self
                .total_steps
                .is_multiple_of(self.config.target_sync_period)
            {
                self.sync_target();
            }
            if outcome.terminal {
                break outcome.termination_cause;
            }
        };
        Ok(EpisodeRecord {
            episode: episode + 1,
            total_reward,
            steps,
            epsilon,
            mean_loss: (loss_count > 0).then(|| loss_sum / loss_count as f64),
            terminal_cause: cause,
        })
    }

    /// One gradient step on a uniformly sampled batch; returns the batch loss.
    pub fn learn(&mut self) -> Result<f64, LearnerError> {
        let batch = self.buffer.sample(self.config.batch_size, &mut self.rng);
        self.targets.clear();
        for e in &batch {
            let y = td_target_with(e, &self.target, self.config.gamma, &mut self.ws_target)?;
            self.targets.push(y);
        }
        let loss = network::backward_into(
            &self.value,
            &batch,
            &self.targets,
            &mut self.ws_value,
            &mut self.grads,
        )?;
        self.adam.step(&mut self.value, &self.grads);
        if !loss.is_finite() {
            return Err(LearnerError::Diverged(self.adam.steps()));
        }
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.value);
        self.syncs += 1;
    }

    pub fn run(mut self) -> Result<TrainingReport, LearnerError> {
        let mut episodes = Vec::with_capacity(self.config.episodes);
        for k in 0..self.config.episodes {
            episodes.push(self.run_episode(k)?);
        }
        if !self.value.is_finite() {
            return Err(LearnerError::Diverged(self.adam.steps()));
        }
        Ok(TrainingReport {
            episodes,
            total_steps: self.total_steps,
            updates: self.adam.steps(),
            params: self.value,
        })
    }
}

/// Trains a fresh agent on `env`.
pub fn train(env: Environment, config: &AgentConfig) -> Result<TrainingReport, LearnerError> {
    Trainer::new(env, config.clone())?.run()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub total_reward: f64,
    pub termination_cause: TerminationCause,
    pub dv_used: f64,
    pub dt_used: f64,
}

impl EpisodeTrace {
    /// Debris actually captured, in order.
    pub fn removed(&self) -> &[usize] {
        let paid = if self.termination_cause == TerminationCause::None {
            self.actions.len()
        } else {
            self.actions.len() - 1
        };
        &self.actions[..paid]
    }
}

/// Plays one greedy episode. With `masked`, removed debris are excluded from
/// the argmax.
pub fn greedy_episode(
    env: &mut Environment,
    params: &QNetwork,
    masked: bool,
) -> Result<EpisodeTrace, LearnerError> {
    env.reset();
    let mut ws = Workspace::for_network(params);
    let mut trace = EpisodeTrace {
        actions: Vec::new(),
        rewards: Vec::new(),
        total_reward: 0.0,
        termination_cause: TerminationCause::None,
        dv_used: 0.0,
        dt_used: 0.0,
    };
    loop {
        let state = env.observe();
        let available = env.state().available();
        let q = ws.forward(params, &state)?;
        let action = argmax(q, masked.then_some(available.as_slice()));
        let out = env.step(action)?;
        trace.actions.push(action);
        trace.rewards.push(out.reward);
        trace.total_reward += out.reward;
        if out.terminal {
            trace.termination_cause = out.termination_cause;
            trace.dv_used = out.next_state.dv_used;
            trace.dt_used = out.next_state.dt_used;
            return Ok(trace);
        }
    }
}

/// Greedy episodes on `env`; each episode starts from a fresh reset.
pub fn evaluate(
    env: &mut Environment,
    params: &QNetwork,
    episodes: usize,
    masked: bool,
) -> Result<Vec<EpisodeTrace>, LearnerError> {
    (0..episodes)
        .map(|_| greedy_episode(env, params, masked))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DebrisCatalog;
    use crate::environment::MissionConfig;
    use crate::orbits::{OrbitError, OrbitalElements, TransferCost};

    fn exp(reward: f64, done: bool, next: Vec<f64>) -> Experience {
        Experience {
            state: vec![0.0; next.len()],
            action: 0,
            reward,
            next_state: next,
            done,
        }
    }

    /// Single linear layer whose outputs copy the first two inputs.
    fn passthrough() -> QNetwork {
        QNetwork::from_layers(vec![DenseLayer {
            inputs: 2,
            outputs: 2,
            weights: vec![1.0, 0.0, 0.0, 1.0],
            biases: vec![0.0, 0.0],
        }])
        .unwrap()
    }

    #[test]
    fn td_target_examples() {
        let net = passthrough();
        assert_eq!(
            td_target(&exp(10.0, true, vec![100.0, 0.0]), &net, 0.9).unwrap(),
            10.0
        );
        let y = td_target(&exp(1.0, false, vec![2.0, -1.0]), &net, 0.9).unwrap();
        assert!((y - 2.8).abs() < 1e-12);
        assert_eq!(
            td_target(&exp(1.0, false, vec![2.0, 7.0]), &net, 0.0).unwrap(),
            1.0
        );
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 2.0], None), 1);
        assert_eq!(argmax(&[2.0, 2.0, 1.0], None), 0);
        assert_eq!(argmax(&[1.0, 3.0, 2.0], Some(&[true, false, true])), 2);
        assert_eq!(argmax(&[1.0, 3.0, 2.0], Some(&[false, false, false])), 1);
    }

    #[test]
    fn greedy_selection() {
        let mut rng = stream_rng(0, Stream::Agent);
        let q = [1.0, 3.0, 2.0];
        assert_eq!(
            select_action(&q, &[], 0.0, &mut rng, SelectionMode::Train),
            1
        );
        let mask = [true, false, true];
        let a = select_action(
            &q,
            &mask,
            0.0,
            &mut rng,
            SelectionMode::Eval { masked: true },
        );
        assert_eq!(a, 2);
    }

    #[test]
    fn full_exploration_is_uniform() {
        // 10_000 draws over 4 actions: each count ~ Binomial(10_000, 1/4)
        let mut rng = stream_rng(42, Stream::Agent);
        let q = [0.0, 5.0, 1.0, 2.0];
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[select_action(&q, &[], 1.0, &mut rng, SelectionMode::Train)] += 1;
        }
        let mean = 2_500.0;
        let sigma = (10_000.0_f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let s = AgentConfig::default().epsilon();
        assert_eq!(s.value(0, 100), 1.0);
        assert!((s.value(40, 100) - 0.525).abs() < 1e-12);
        assert!((s.value(80, 100) - 0.05).abs() < 1e-12);
        assert!((s.value(99, 100) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(AgentConfig::default().validate().is_ok());
        let bad = AgentConfig {
            gamma: 1.5,
            ..AgentConfig::default()
        };
        assert!(matches!(bad.validate(), Err(LearnerError::Config(_))));
        let bad = AgentConfig {
            epsilon_end: -0.1,
            ..AgentConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn toy_env(seed: u64) -> Environment {
        let catalog = DebrisCatalog::from_elements(
            (0..2).map(|k| OrbitalElements::new(7000.0 + k as f64, 1.0, 0.0, 0.0).unwrap()),
        );
        let config = MissionConfig {
            n_debris: 2,
            delta_v_max: 1.5,
            delta_t_max: 10.0,
            risk_threshold: 0.0,
            ..Default::default()
        };
        let unit = |_: &OrbitalElements, _: &OrbitalElements| -> Result<TransferCost, OrbitError> {
            Ok(TransferCost::new(1.0, 1.0))
        };
        Environment::new(config, catalog, &unit, seed).unwrap()
    }

    fn toy_agent() -> AgentConfig {
        AgentConfig {
            episodes: 300,
            hidden: vec![16, 16],
            batch_size: 16,
            learning_starts: 32,
            target_sync_period: 50,
            seed: 3,
            ..AgentConfig::default()
        }
    }

    #[test]
    fn target_changes_only_at_syncs() {
        let mut trainer = Trainer::new(toy_env(1), toy_agent()).unwrap();
        let mut last_target = trainer.target().clone();
        let mut last_syncs = 0;
        for k in 0..60 {
            trainer.run_episode(k).unwrap();
            if trainer.syncs() == last_syncs {
                assert_eq!(trainer.target(), &last_target);
            } else {
                last_syncs = trainer.syncs();
                last_target = trainer.target().clone();
            }
        }
        assert!(last_syncs > 0);
        trainer.sync_target();
        assert_eq!(trainer.target(), trainer.value());
    }

    #[test]
    fn two_debris_toy_is_solved() {
        let report = train(toy_env(5), &toy_agent()).unwrap();
        let mut env = toy_env(6);
        let trace = greedy_episode(&mut env, &report.params, false).unwrap();
        assert_eq!(trace.total_reward, 2.0, "{trace:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let a = train(toy_env(5), &toy_agent()).unwrap();
        let b = train(toy_env(5), &toy_agent()).unwrap();
        assert_eq!(a.episodes, b.episodes);
        assert_eq!(a.params, b.params);
        let mut x = Vec::new();
        a.write_metrics_csv(&mut x).unwrap();
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with(METRICS_HEADER));
        assert_eq!(text.lines().count(), 301);
    }
}
