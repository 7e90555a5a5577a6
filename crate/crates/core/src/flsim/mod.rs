//! Deterministic simulation of federated training rounds.
//!
//! Each round runs the full message workflow between one server and
//! `num_clients` clients:
//!
//! 1. The server sends `FL_Global_Model_Update` (continue-training set) to
//!    every client, unicast unless `multicast` is enabled.
//! 2. Clients train epoch by epoch. Simulated time advances with each
//!    client's sample rate, and epochs are processed in time order. Once a
//!    client has seen `min_dataset_size` samples it sends an
//!    `FL_Local_DataSet_Update` notification after every epoch.
//! 3. On each notification the server applies the stop rule; a client whose
//!    validation loss dropped below its training loss is sent the global
//!    model again with continue-training cleared and stops training.
//! 4. The first `ceil(min_fraction * num_clients)` clients to notify are
//!    selected and return `FL_Local_Model_Update`.
//! 5. Updates whose identifier or round do not echo the global model are
//!    dropped; the rest are averaged weighted by the last reported sample
//!    count.
//!
//! Every message is encoded and decoded through the CBOR codec and the
//! decoded value is what the receiver acts on.

pub mod aggregate;
pub mod learner;
pub mod transport;

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::{LinkBudget, LinkConfigError, DEFAULT_BLOCK, MAX_FRAME};
use crate::cbor::EncodingProfile;
use crate::messages::{
    GlobalModelUpdate, LocalDataSetUpdate, LocalModelUpdate, MessageKind, ModelIdentifier,
    ModelMetadata, ModelParams,
};

pub use aggregate::{fedavg, AggregationError, AggregationWeights};
pub use learner::{check_stop, local_train, ClientState, LocalDataset, Sample};
pub use transport::{transport_deliver, Direction, TrafficCounters};

/// Orchestration settings chosen by the server before the first round.
#[derive(Debug, Clone, PartialEq)]
pub struct OrchestrationConfig {
    pub num_clients: usize,
    /// Fraction of clients whose updates are required for aggregation.
    pub min_fraction: f64,
    pub rounds: usize,
    /// Samples a client must have processed before it notifies the server.
    pub min_dataset_size: u64,
    pub param_count: usize,
    pub seed: u64,
    pub profile: EncodingProfile,
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Inclusive range of per-client dataset sizes (before the 80/20 split).
    pub dataset_size_min: usize,
    pub dataset_size_max: usize,
    /// Half-width of the uniform label noise.
    pub noise: f64,
    /// Count the global model once per round instead of once per client.
    pub multicast: bool,
    /// Probability that any single transmission is lost.
    pub drop_rate: f64,
    /// Clients that answer with a wrong round number (fault injection).
    pub faulty_echo_clients: Vec<usize>,
    pub frame_budget: usize,
    pub block_size: usize,
}

impl Default for OrchestrationConfig {
    fn default() -> Self {
        OrchestrationConfig {
            num_clients: 4,
            min_fraction: 0.5,
            rounds: 3,
            min_dataset_size: 64,
            param_count: 4,
            seed: 42,
            profile: EncodingProfile::Compact,
            local_epochs: 5,
            learning_rate: 0.1,
            batch_size: 8,
            dataset_size_min: 20,
            dataset_size_max: 80,
            noise: 0.1,
            multicast: false,
            drop_rate: 0.0,
            faulty_echo_clients: Vec::new(),
            frame_budget: MAX_FRAME,
            block_size: DEFAULT_BLOCK,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    NoClients,
    MinFraction(f64),
    NoRounds,
    NoParams,
    NoEpochs,
    LearningRate(f64),
    BatchSize,
    DatasetRange { min: usize, max: usize },
    Noise(f64),
    DropRate(f64),
    UnknownClient(usize),
    Link(LinkConfigError),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::NoClients => f.write_str("num_clients must be at least 1"),
            ConfigError::MinFraction(x) => write!(f, "min_fraction {x} is not in (0, 1]"),
            ConfigError::NoRounds => f.write_str("rounds must be at least 1"),
            ConfigError::NoParams => f.write_str("param_count must be at least 1"),
            ConfigError::NoEpochs => f.write_str("local_epochs must be at least 1"),
            ConfigError::LearningRate(x) => write!(f, "learning_rate {x} must be positive"),
            ConfigError::BatchSize => f.write_str("batch_size must be at least 1"),
            ConfigError::DatasetRange { min, max } => {
                write!(f, "dataset size range {min}..={max} needs 2 <= min <= max")
            }
            ConfigError::Noise(x) => write!(f, "noise {x} must be finite and non-negative"),
            ConfigError::DropRate(x) => write!(f, "drop_rate {x} is not in [0, 1)"),
            ConfigError::UnknownClient(id) => write!(f, "faulty client {id} does not exist"),
            ConfigError::Link(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for ConfigError {}

impl OrchestrationConfig {
    pub fn validate(&self) -> Result<LinkBudget, ConfigError> {
        if self.num_clients == 0 {
            return Err(ConfigError::NoClients);
        }
        if !(self.min_fraction > 0.0 && self.min_fraction <= 1.0) {
            return Err(ConfigError::MinFraction(self.min_fraction));
        }
        if self.rounds == 0 {
            return Err(ConfigError::NoRounds);
        }
        if self.param_count == 0 {
            return Err(ConfigError::NoParams);
        }
        if self.local_epochs == 0 {
            return Err(ConfigError::NoEpochs);
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ConfigError::LearningRate(self.learning_rate));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::BatchSize);
        }
        if self.dataset_size_min < 2 || self.dataset_size_min > self.dataset_size_max {
            return Err(ConfigError::DatasetRange {
                min: self.dataset_size_min,
                max: self.dataset_size_max,
            });
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(ConfigError::Noise(self.noise));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(ConfigError::DropRate(self.drop_rate));
        }
        if let Some(&id) = self
            .faulty_echo_clients
            .iter()
            .find(|&&id| id >= self.num_clients)
        {
            return Err(ConfigError::UnknownClient(id));
        }
        LinkBudget::new(self.frame_budget, self.block_size).map_err(ConfigError::Link)
    }

    pub fn required_clients(&self) -> usize {
        required_clients(self.min_fraction, self.num_clients)
    }
}

/// `ceil(min_fraction * num_clients)`, at least 1.
///
/// Products within 1e-9 of an integer count as that integer, so binary
/// rounding (`0.7 * 10 = 7.000000000000001`) does not add a client.
pub fn required_clients(min_fraction: f64, num_clients: usize) -> usize {
    let x = min_fraction * num_clients as f64 - 1e-9;
    let floor = x as usize;
    let ceil = if (floor as f64) < x { floor + 1 } else { floor };
    ceil.clamp(1, num_clients.max(1))
}

/// Not enough clients notified the server to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InsufficientClients {
    pub eligible: usize,
    pub required: usize,
}

impl fmt::Display for InsufficientClients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "insufficient-clients: {} eligible, {} required",
            self.eligible, self.required
        )
    }
}

impl core::error::Error for InsufficientClients {}

/// Picks the first `ceil(min_fraction * num_clients)` clients of `eligible`,
/// which must already be in notification-arrival order.
pub fn select_clients(
    eligible: &[usize],
    num_clients: usize,
    min_fraction: f64,
) -> Result<Vec<usize>, InsufficientClients> {
    let required = required_clients(min_fraction, num_clients);
    if eligible.len() < required {
        return Err(InsufficientClients {
            eligible: eligible.len(),
            required,
        });
    }
    Ok(eligible[..required].to_vec())
}

/// FNV-1a over the little-endian bytes of every parameter.
pub fn model_checksum(model: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in model {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Server-side orchestration state.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub model_identifier: ModelIdentifier,
    pub round: u64,
    pub global_model: Vec<f64>,
    pub selected: Vec<usize>,
    /// Traffic accumulated over all rounds.
    pub traffic: TrafficCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundOutcome {
    Aggregated {
        clients: usize,
    },
    InsufficientClients(InsufficientClients),
    /// Selected clients answered, but every update was lost or failed the
    /// echo check.
    NoValidUpdates,
}

impl RoundOutcome {
    pub const fn name(&self) -> &'static str {
        match self {
            RoundOutcome::Aggregated { .. } => "aggregated",
            RoundOutcome::InsufficientClients(_) => "insufficient-clients",
            RoundOutcome::NoValidUpdates => "no-valid-updates",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientRoundMetrics {
    pub id: usize,
    /// Training-set size.
    pub dataset_size: usize,
    pub samples_seen: u64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub halted: bool,
    /// Received the round's global model.
    pub reached: bool,
    /// At least one notification reached the server.
    pub notified: bool,
}

/// Accounting and outcome of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: u64,
    pub traffic: TrafficCounters,
    /// Encoded size of the round's global model message.
    pub global_message_bytes: usize,
    pub halt_messages: usize,
    pub notifications: usize,
    pub clients: Vec<ClientRoundMetrics>,
    /// Notified clients in arrival order.
    pub eligible: Vec<usize>,
    pub selected: Vec<usize>,
    pub halted: Vec<usize>,
    pub echo_mismatches: Vec<usize>,
    /// `(client, weight)` of every update that entered the average.
    pub weights: Vec<(usize, f64)>,
    pub outcome: RoundOutcome,
    /// Checksum of the global model after the round.
    pub model_checksum: u64,
}

/// A decoded local model update accepted or rejected by the server.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectedUpdate {
    pub client: usize,
    pub update: LocalModelUpdate,
    pub weight_size: u64,
    pub accepted: bool,
}

/// Everything a round produced, including the models behind the report.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub report: RoundReport,
    pub model_identifier: ModelIdentifier,
    pub global_before: Vec<f64>,
    pub collected: Vec<CollectedUpdate>,
    pub aggregate: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub round: u64,
    pub direction: Direction,
    pub client: usize,
    pub kind: MessageKind,
    pub delivered: bool,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    client: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.client.cmp(&other.client))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
struct SimClient {
    state: ClientState,
    /// Training samples processed per unit of simulated time.
    rate: f64,
}

/// A seeded simulation that can be stepped one round at a time.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: OrchestrationConfig,
    link: LinkBudget,
    rng: ChaCha8Rng,
    server: ServerState,
    clients: Vec<SimClient>,
    trace: Option<Vec<TraceEntry>>,
}

impl Simulation {
    pub fn new(cfg: OrchestrationConfig) -> Result<Self, ConfigError> {
        let link = cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut id = [0u8; 16];
        rng.fill(&mut id[..]);
        // RFC 9562 version 4, variant 1
        id[6] = (id[6] & 0x0F) | 0x40;
        id[8] = (id[8] & 0x3F) | 0x80;
        let truth: Vec<f64> = (0..cfg.param_count)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let clients = (0..cfg.num_clients)
            .map(|cid| {
                let n = rng.random_range(cfg.dataset_size_min..=cfg.dataset_size_max);
                let dataset = LocalDataset::synthesize(&mut rng, &truth, n, cfg.noise);
                let rate = rng.random_range(0.5..2.0);
                SimClient {
                    state: ClientState::new(cid, dataset, cfg.param_count),
                    rate,
                }
            })
            .collect();
        let server = ServerState {
            model_identifier: ModelIdentifier::new(id),
            round: 1,
            global_model: vec![0.0; cfg.param_count],
            selected: Vec::new(),
            traffic: TrafficCounters::default(),
        };
        Ok(Simulation {
            cfg,
            link,
            rng,
            server,
            clients,
            trace: None,
        })
    }

    /// Records every transmitted message for [`Simulation::trace`].
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &OrchestrationConfig {
        &self.cfg
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn client(&self, id: usize) -> Option<&ClientState> {
        self.clients.get(id).map(|c| &c.state)
    }

    pub fn trace(&self) -> &[TraceEntry] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// Accounts a transmission and decides whether it arrives.
    fn send(
        &mut self,
        counters: &mut TrafficCounters,
        payload: &[u8],
        direction: Direction,
        client: usize,
        kind: MessageKind,
        counted: bool,
    ) -> bool {
        if counted {
            transport_deliver(payload, direction, counters, &self.link);
        }
        let delivered = self.cfg.drop_rate == 0.0 || !self.rng.random_bool(self.cfg.drop_rate);
        if let Some(trace) = &mut self.trace {
            trace.push(TraceEntry {
                round: self.server.round,
                direction,
                client,
                kind,
                delivered,
                bytes: payload.to_vec(),
            });
        }
        delivered
    }

    fn global_message(&self, continue_training: bool) -> GlobalModelUpdate {
        GlobalModelUpdate {
            model_identifier: self.server.model_identifier,
            model_round: self.server.round,
            model_params: ModelParams::for_profile(
                self.server.global_model.clone(),
                self.cfg.profile,
            ),
            continue_training,
        }
    }

    /// Runs one orchestration cycle and advances the round counter.
    pub fn run_round(&mut self) -> RoundRecord {
        let profile = self.cfg.profile;
        let round = self.server.round;
        let n = self.cfg.num_clients;
        let mut traffic = TrafficCounters::default();
        let global_before = self.server.global_model.clone();

        // distribution
        let global = self.global_message(true);
        let global_bytes = global.encode(profile);
        let mut reached = vec![false; n];
        for (cid, hit) in reached.iter_mut().enumerate() {
            let counted = !self.cfg.multicast || cid == 0;
            if self.send(
                &mut traffic,
                &global_bytes,
                Direction::Down,
                cid,
                MessageKind::Global,
                counted,
            ) {
                let received =
                    GlobalModelUpdate::decode(&global_bytes).expect("own encoding decodes");
                assert!(received.same_as(&global), "global model changed in transit");
                self.clients[cid]
                    .state
                    .start_round(&received.model_params.values);
                *hit = true;
            }
        }

        // training, notifications and stop checks in simulated time order
        let mut queue = BinaryHeap::new();
        for (cid, c) in self.clients.iter_mut().enumerate() {
            if !reached[cid] {
                // an unreached client keeps nothing from an earlier round
                c.state.samples_seen = 0;
                c.state.halted = false;
                continue;
            }
            let step = c.state.dataset.train.len() as f64 / c.rate;
            queue.push(Reverse(Event {
                time: step,
                client: cid,
            }));
        }
        let halt_bytes = self.global_message(false).encode(profile);
        let mut arrivals: Vec<Event> = Vec::new();
        let mut reported: BTreeMap<usize, u64> = BTreeMap::new();
        let mut notifications = 0;
        let mut halt_messages = 0;
        let (lr, batch) = (self.cfg.learning_rate, self.cfg.batch_size);
        while let Some(Reverse(ev)) = queue.pop() {
            let cid = ev.client;
            self.clients[cid].state.train_epoch(lr, batch);
            let state = &self.clients[cid].state;
            if state.samples_seen >= self.cfg.min_dataset_size {
                let note = LocalDataSetUpdate {
                    local_dataset_size: state.samples_seen,
                    metadata: Some(ModelMetadata::new(state.train_loss, state.val_loss)),
                };
                let bytes = note.encode(profile);
                notifications += 1;
                if self.send(
                    &mut traffic,
                    &bytes,
                    Direction::Up,
                    cid,
                    MessageKind::DataSet,
                    true,
                ) {
                    let received =
                        LocalDataSetUpdate::decode(&bytes).expect("own encoding decodes");
                    assert!(received.same_as(&note), "notification changed in transit");
                    if reported.insert(cid, received.local_dataset_size).is_none() {
                        arrivals.push(ev);
                    }
                    let meta = received.metadata.expect("notifications carry metadata");
                    if learner::stop_rule(meta.train_loss, meta.val_loss) {
                        halt_messages += 1;
                        if self.send(
                            &mut traffic,
                            &halt_bytes,
                            Direction::Down,
                            cid,
                            MessageKind::Global,
                            true,
                        ) {
                            let halt = GlobalModelUpdate::decode(&halt_bytes)
                                .expect("own encoding decodes");
                            debug_assert!(!halt.continue_training);
                            self.clients[cid].state.halted = true;
                        }
                    }
                }
            }
            let c = &self.clients[cid];
            if !c.state.halted && c.state.epochs_done < self.cfg.local_epochs {
                let step = c.state.dataset.train.len() as f64 / c.rate;
                queue.push(Reverse(Event {
                    time: ev.time + step,
                    client: cid,
                }));
            }
        }
        arrivals.sort();
        let eligible: Vec<usize> = arrivals.iter().map(|e| e.client).collect();

        // selection, collection and aggregation
        let mut collected = Vec::new();
        let mut echo_mismatches = Vec::new();
        let mut weights = Vec::new();
        let mut aggregate = None;
        let selected = match select_clients(&eligible, n, self.cfg.min_fraction) {
            Err(e) => {
                self.server.selected.clear();
                Err(e)
            }
            Ok(selected) => {
                for &cid in &selected {
                    let state = &self.clients[cid].state;
                    let faulty = self.cfg.faulty_echo_clients.contains(&cid);
                    let update = LocalModelUpdate {
                        model_identifier: self.server.model_identifier,
                        model_round: if faulty { round.wrapping_add(1) } else { round },
                        model_params: ModelParams::for_profile(state.model.clone(), profile),
                        metadata: ModelMetadata::new(state.train_loss, state.val_loss),
                    };
                    let bytes = update.encode(profile);
                    if !self.send(
                        &mut traffic,
                        &bytes,
                        Direction::Up,
                        cid,
                        MessageKind::Local,
                        true,
                    ) {
                        continue;
                    }
                    let received = LocalModelUpdate::decode(&bytes).expect("own encoding decodes");
                    assert!(received.same_as(&update), "local model changed in transit");
                    let accepted = received.model_identifier == self.server.model_identifier
                        && received.model_round == round;
                    if !accepted {
                        echo_mismatches.push(cid);
                    }
                    collected.push(CollectedUpdate {
                        client: cid,
                        weight_size: reported[&cid],
                        update: received,
                        accepted,
                    });
                }
                self.server.selected = selected.clone();
                Ok(selected)
            }
        };
        let outcome = match &selected {
            Err(e) => RoundOutcome::InsufficientClients(*e),
            Ok(_) => {
                let accepted: Vec<&CollectedUpdate> =
                    collected.iter().filter(|c| c.accepted).collect();
                if accepted.is_empty() {
                    RoundOutcome::NoValidUpdates
                } else {
                    let models: Vec<&[f64]> = accepted
                        .iter()
                        .map(|c| c.update.model_params.values.as_slice())
                        .collect();
                    let sizes: Vec<u64> = accepted.iter().map(|c| c.weight_size).collect();
                    let w = AggregationWeights::from_sizes(&sizes)
                        .expect("notified sizes are positive");
                    weights = accepted.iter().map(|c| c.client).zip(w.weights).collect();
                    let avg = fedavg(&models, &sizes).expect("updates share the global dimension");
                    self.server.global_model = avg.clone();
                    aggregate = Some(avg);
                    RoundOutcome::Aggregated {
                        clients: accepted.len(),
                    }
                }
            }
        };

        let clients = self
            .clients
            .iter()
            .enumerate()
            .map(|(cid, c)| ClientRoundMetrics {
                id: cid,
                dataset_size: c.state.dataset.train.len(),
                samples_seen: c.state.samples_seen,
                train_loss: c.state.train_loss,
                val_loss: c.state.val_loss,
                halted: c.state.halted,
                reached: reached[cid],
                notified: reported.contains_key(&cid),
            })
            .collect::<Vec<_>>();
        let halted = clients.iter().filter(|c| c.halted).map(|c| c.id).collect();
        self.server.traffic.add(&traffic);
        self.server.round += 1;
        RoundRecord {
            report: RoundReport {
                round,
                traffic,
                global_message_bytes: global_bytes.len(),
                halt_messages,
                notifications,
                clients,
                eligible,
                selected: selected.unwrap_or_default(),
                halted,
                echo_mismatches,
                weights,
                outcome,
                model_checksum: model_checksum(&self.server.global_model),
            },
            model_identifier: self.server.model_identifier,
            global_before,
            collected,
            aggregate,
        }
    }

    /// Runs all configured rounds.
    pub fn run(&mut self) -> Vec<RoundReport> {
        (0..self.cfg.rounds)
            .map(|_| self.run_round().report)
            .collect()
    }
}

/// Runs a fresh simulation for `cfg`.
pub fn run_simulation(cfg: &OrchestrationConfig) -> Result<Vec<RoundReport>, ConfigError> {
    Ok(Simulation::new(cfg.clone())?.run())
}
