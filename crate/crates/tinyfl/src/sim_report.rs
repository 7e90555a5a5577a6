//! JSON configuration and report files for the simulator.
//!
//! The `config` block of a report has the same schema as a configuration
//! file, so any report can be replayed with `simulate --config report.json`.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use tinyfl_core::flsim::{
    ClientRoundMetrics, OrchestrationConfig, RoundOutcome, RoundReport, TraceEntry, TrafficCounters,
};
use tinyfl_core::{EncodingProfile, MessageKind};

use crate::parse_count;

pub const REPORT_FORMAT: &str = "tinyfl-simulation-report";
pub const REPORT_VERSION: u32 = 1;

const HALT_POLICY: &str = "halting lasts for the rest of the round; halted clients receive every \
later global model with continue-training set, and the halt itself is a global model with \
continue-training cleared, counted in the downlink traffic";

/// Serializable mirror of [`OrchestrationConfig`]. Missing fields take the
/// simulator defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub num_clients: usize,
    pub min_fraction: f64,
    pub rounds: usize,
    #[serde(deserialize_with = "count_or_string")]
    pub min_dataset_size: u64,
    pub param_count: usize,
    pub seed: u64,
    pub profile: String,
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dataset_size_min: usize,
    pub dataset_size_max: usize,
    pub noise: f64,
    pub multicast: bool,
    pub drop_rate: f64,
    pub faulty_echo_clients: Vec<usize>,
    pub frame_budget: usize,
    pub block_size: usize,
}

fn count_or_string<'de, D: serde::Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Count {
        Number(u64),
        Text(String),
    }
    match Count::deserialize(d)? {
        Count::Number(n) => Ok(n),
        Count::Text(s) => {
            parse_count(&s).ok_or_else(|| serde::de::Error::custom(format!("bad count {s:?}")))
        }
    }
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile::from(&OrchestrationConfig::default())
    }
}

impl From<&OrchestrationConfig> for ConfigFile {
    fn from(c: &OrchestrationConfig) -> Self {
        ConfigFile {
            num_clients: c.num_clients,
            min_fraction: c.min_fraction,
            rounds: c.rounds,
            min_dataset_size: c.min_dataset_size,
            param_count: c.param_count,
            seed: c.seed,
            profile: c.profile.name().to_string(),
            local_epochs: c.local_epochs,
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            dataset_size_min: c.dataset_size_min,
            dataset_size_max: c.dataset_size_max,
            noise: c.noise,
            multicast: c.multicast,
            drop_rate: c.drop_rate,
            faulty_echo_clients: c.faulty_echo_clients.clone(),
            frame_budget: c.frame_budget,
            block_size: c.block_size,
        }
    }
}

impl ConfigFile {
    pub fn to_config(&self) -> Result<OrchestrationConfig, String> {
        let profile: EncodingProfile = self
            .profile
            .parse()
            .map_err(|_| format!("unknown profile {:?}", self.profile))?;
        Ok(OrchestrationConfig {
            num_clients: self.num_clients,
            min_fraction: self.min_fraction,
            rounds: self.rounds,
            min_dataset_size: self.min_dataset_size,
            param_count: self.param_count,
            seed: self.seed,
            profile,
            local_epochs: self.local_epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            dataset_size_min: self.dataset_size_min,
            dataset_size_max: self.dataset_size_max,
            noise: self.noise,
            multicast: self.multicast,
            drop_rate: self.drop_rate,
            faulty_echo_clients: self.faulty_echo_clients.clone(),
            frame_budget: self.frame_budget,
            block_size: self.block_size,
        })
    }

    /// Accepts either a bare configuration or a whole report, whose `config`
    /// block is used.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let block = match v.get("format") {
            Some(_) => v
                .get("config")
                .cloned()
                .ok_or("report has no config block")?,
            None => v,
        };
        serde_json::from_value(block).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traffic {
    pub bytes_down: u64,
    pub frames_down: u64,
    pub messages_down: u64,
    pub bytes_up: u64,
    pub frames_up: u64,
    pub messages_up: u64,
}

impl From<&TrafficCounters> for Traffic {
    fn from(t: &TrafficCounters) -> Self {
        Traffic {
            bytes_down: t.bytes_down,
            frames_down: t.frames_down,
            messages_down: t.messages_down,
            bytes_up: t.bytes_up,
            frames_up: t.frames_up,
            messages_up: t.messages_up,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientEntry {
    pub id: usize,
    pub dataset_size: usize,
    pub samples_seen: u64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub halted: bool,
    pub reached: bool,
    pub notified: bool,
}

impl From<&ClientRoundMetrics> for ClientEntry {
    fn from(c: &ClientRoundMetrics) -> Self {
        ClientEntry {
            id: c.id,
            dataset_size: c.dataset_size,
            samples_seen: c.samples_seen,
            train_loss: c.train_loss,
            val_loss: c.val_loss,
            halted: c.halted,
            reached: c.reached,
            notified: c.notified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub client: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub round: u64,
    pub outcome: String,
    pub required_clients: usize,
    pub traffic: Traffic,
    pub global_message_bytes: usize,
    pub halt_messages: usize,
    pub notifications: usize,
    pub eligible: Vec<usize>,
    pub selected: Vec<usize>,
    pub halted: Vec<usize>,
    pub echo_mismatches: Vec<usize>,
    pub weights: Vec<WeightEntry>,
    /// FNV-1a of the global model after the round, as 16 hex digits.
    pub model_checksum: String,
    pub clients: Vec<ClientEntry>,
}

impl RoundEntry {
    fn new(r: &RoundReport, required: usize) -> Self {
        RoundEntry {
            round: r.round,
            outcome: r.outcome.name().to_string(),
            required_clients: required,
            traffic: Traffic::from(&r.traffic),
            global_message_bytes: r.global_message_bytes,
            halt_messages: r.halt_messages,
            notifications: r.notifications,
            eligible: r.eligible.clone(),
            selected: r.selected.clone(),
            halted: r.halted.clone(),
            echo_mismatches: r.echo_mismatches.clone(),
            weights: r
                .weights
                .iter()
                .map(|&(client, weight)| WeightEntry { client, weight })
                .collect(),
            model_checksum: format!("{:016x}", r.model_checksum),
            clients: r.clients.iter().map(ClientEntry::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub format: String,
    pub version: u32,
    pub config: ConfigFile,
    pub model_identifier: String,
    pub halt_policy: String,
    pub rounds: Vec<RoundEntry>,
    pub totals: Traffic,
}

impl SimulationReport {
    pub fn new(
        cfg: &OrchestrationConfig,
        model_identifier: String,
        rounds: &[RoundReport],
    ) -> Self {
        let mut totals = TrafficCounters::default();
        for r in rounds {
            totals.add(&r.traffic);
        }
        let required = cfg.required_clients();
        SimulationReport {
            format: REPORT_FORMAT.to_string(),
            version: REPORT_VERSION,
            config: ConfigFile::from(cfg),
            model_identifier,
            halt_policy: HALT_POLICY.to_string(),
            rounds: rounds
                .iter()
                .map(|r| RoundEntry::new(r, required))
                .collect(),
            totals: Traffic::from(&totals),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// `round R: down <bytes>B/<frames>f up <bytes>B/<frames>f selected K halted H`
pub fn summary_line(r: &RoundReport) -> String {
    let t = &r.traffic;
    let mut s = format!(
        "round {}: down {}B/{}f up {}B/{}f selected {} halted {}",
        r.round,
        t.bytes_down,
        t.frames_down,
        t.bytes_up,
        t.frames_up,
        r.selected.len(),
        r.halted.len()
    );
    if let RoundOutcome::InsufficientClients(e) = r.outcome {
        write!(s, " ({e})").unwrap();
    } else if r.outcome == RoundOutcome::NoValidUpdates {
        s.push_str(" (no-valid-updates)");
    }
    s
}

/// One line per transmission: `round direction client kind status hex`.
pub fn render_trace(trace: &[TraceEntry]) -> String {
    let mut out = String::new();
    for t in trace {
        let dir = match t.direction {
            tinyfl_core::flsim::Direction::Down => "down",
            tinyfl_core::flsim::Direction::Up => "up",
        };
        let kind: MessageKind = t.kind;
        writeln!(
            out,
            "{} {} {} {} {} {}",
            t.round,
            dir,
            t.client,
            kind.short_name(),
            if t.delivered { "delivered" } else { "dropped" },
            hex::encode(&t.bytes)
        )
        .unwrap();
    }
    out
}
