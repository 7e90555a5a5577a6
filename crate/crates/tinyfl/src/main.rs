use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tinyfl::bench_report::{render_csv, render_mismatches, render_text};
use tinyfl::params_file::read_params;
use tinyfl::parse_count;
use tinyfl::sim_report::{render_trace, summary_line, ConfigFile, SimulationReport};
use tinyfl_core::bench::{run_table1, run_table2, LinkBudget};
use tinyfl_core::cbor::decode_value_exact;
use tinyfl_core::codec::Codec;
use tinyfl_core::flsim::{RoundOutcome, Simulation};
use tinyfl_core::messages::{
    GlobalModelUpdate, LocalDataSetUpdate, LocalModelUpdate, Message, MessageKind, ModelIdentifier,
    ModelMetadata, ModelParams,
};
use tinyfl_core::EncodingProfile;

/// Encode, decode, size and simulate federated-learning messages.
///
/// Exit codes: 0 success, 1 output could not be written, 2 invalid
/// arguments or configuration, 3 unreadable input, 4 message failed to
/// decode, 5 benchmark mismatch, 6 every simulated round lacked clients.
#[derive(Parser)]
#[command(name = "tinyfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode one message and print `<bytes> <frames>`.
    Encode(EncodeArgs),
    /// Decode a message file and print one field per line.
    Decode(DecodeArgs),
    /// Reproduce a message-size table.
    Bench(BenchArgs),
    /// Run the round simulator and write a JSON report.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Global,
    Dataset,
    Local,
}

impl From<KindArg> for MessageKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Global => MessageKind::Global,
            KindArg::Dataset => MessageKind::DataSet,
            KindArg::Local => MessageKind::Local,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CodecArg {
    Cbor,
    Json,
    Pb,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Compact,
    Verbose,
}

impl From<ProfileArg> for EncodingProfile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Compact => EncodingProfile::Compact,
            ProfileArg::Verbose => EncodingProfile::Verbose,
        }
    }
}

fn codec(c: CodecArg, profile: EncodingProfile) -> Codec {
    match c {
        CodecArg::Cbor => Codec::Cbor(profile),
        CodecArg::Json => Codec::Json,
        CodecArg::Pb => Codec::Protobuf,
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, value_enum, default_value = "cbor")]
    codec: CodecArg,
    /// CBOR encoding profile; also picks the params encoding.
    #[arg(long, value_enum, default_value = "compact")]
    profile: ProfileArg,
    /// Model identifier, 32 hex digits or hyphenated (global, local).
    #[arg(long)]
    uuid: Option<String>,
    /// Round number (global, local).
    #[arg(long)]
    round: Option<u64>,
    /// Parameter file: text, or raw little-endian binary32 for `.f32`/`.bin` (global, local).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Set the continue-training flag (global).
    #[arg(long = "continue")]
    continue_training: bool,
    /// Local dataset size (dataset).
    #[arg(long, value_parser = parse_count_arg)]
    size: Option<u64>,
    /// Training loss (dataset, local).
    #[arg(long, allow_negative_numbers = true)]
    train_loss: Option<f64>,
    /// Validation loss (dataset, local).
    #[arg(long, allow_negative_numbers = true)]
    val_loss: Option<f64>,
    /// Write the encoded message here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, value_enum, default_value = "cbor")]
    codec: CodecArg,
    /// Message kind; inferred from the array length for CBOR and JSON.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Print the CBOR diagnostic notation instead of the message fields.
    #[arg(long)]
    diag: bool,
    file: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Text,
}

#[derive(Args)]
struct BenchArgs {
    /// Table number: 1 (synthetic models) or 2 (LeNet-5 stand-in).
    #[arg(long)]
    table: u32,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Seed for the LeNet-5 stand-in parameters.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON configuration, or an earlier report whose config block is replayed.
    /// Flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path.
    #[arg(long, default_value = "tinyfl-report.json")]
    output: PathBuf,
    /// Also write a per-message hex trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    min_fraction: Option<f64>,
    /// Samples a client must process before notifying (accepts `10^9`, `1e9`).
    #[arg(long, value_parser = parse_count_arg)]
    min_dataset_size: Option<u64>,
    /// Number of model parameters.
    #[arg(long)]
    params: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    dataset_min: Option<usize>,
    #[arg(long)]
    dataset_max: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    /// Count each global model once per round.
    #[arg(long)]
    multicast: bool,
    #[arg(long)]
    drop_rate: Option<f64>,
    /// Clients that answer with a wrong round number.
    #[arg(long, value_delimiter = ',')]
    faulty: Option<Vec<usize>>,
    #[arg(long)]
    frame_budget: Option<usize>,
    #[arg(long)]
    block_size: Option<usize>,
}

fn parse_count_arg(s: &str) -> Result<u64, String> {
    parse_count(s).ok_or_else(|| format!("not a count: {s:?}"))
}

/// Error with the exit code it maps to.
struct Failure(u8, String);

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure(2, msg.into())
    }
}

fn required<T>(v: Option<T>, flag: &str, kind: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::usage(format!("--{flag} is required for --kind {kind}")))
}

fn encode(a: EncodeArgs) -> Result<(), Failure> {
    let profile = EncodingProfile::from(a.profile);
    let kind = MessageKind::from(a.kind);
    let name = kind.short_name();
    let model_fields = |a: &EncodeArgs| -> Result<(ModelIdentifier, u64, ModelParams), Failure> {
        let text = required(a.uuid.as_deref(), "uuid", name)?;
        let id = ModelIdentifier::parse(text)
            .ok_or_else(|| Failure::usage(format!("invalid --uuid {text:?}")))?;
        let round = required(a.round, "round", name)?;
        let path = required(a.params.as_ref(), "params", name)?;
        let values = read_params(path).map_err(|e| Failure(3, e.to_string()))?;
        Ok((id, round, ModelParams::for_profile(values, profile)))
    };
    let message = match kind {
        MessageKind::Global => {
            let (model_identifier, model_round, model_params) = model_fields(&a)?;
            Message::Global(GlobalModelUpdate {
                model_identifier,
                model_round,
                model_params,
                continue_training: a.continue_training,
            })
        }
        MessageKind::DataSet => {
            let metadata = match (a.train_loss, a.val_loss) {
                (Some(t), Some(v)) => Some(ModelMetadata::new(t, v)),
                (None, None) => None,
                _ => return Err(Failure::usage("--train-loss and --val-loss go together")),
            };
            Message::DataSet(LocalDataSetUpdate {
                local_dataset_size: required(a.size, "size", name)?,
                metadata,
            })
        }
        MessageKind::Local => {
            let (model_identifier, model_round, model_params) = model_fields(&a)?;
            Message::Local(LocalModelUpdate {
                model_identifier,
                model_round,
                model_params,
                metadata: ModelMetadata::new(
                    required(a.train_loss, "train-loss", name)?,
                    required(a.val_loss, "val-loss", name)?,
                ),
            })
        }
    };
    let bytes = codec(a.codec, profile).encode(&message);
    if let Some(path) = &a.output {
        fs::write(path, &bytes)
            .map_err(|e| Failure(1, format!("cannot write {}: {e}", path.display())))?;
    }
    println!(
        "{} {}",
        bytes.len(),
        LinkBudget::default().frames(bytes.len())
    );
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<(), Failure> {
    let bytes = fs::read(&a.file)
        .map_err(|e| Failure(3, format!("cannot read {}: {e}", a.file.display())))?;
    let decode_failure = |e: tinyfl_core::DecodeError| Failure(4, e.to_string());
    if a.diag {
        if !matches!(a.codec, CodecArg::Cbor) {
            return Err(Failure::usage("--diag applies to --codec cbor only"));
        }
        let v = decode_value_exact(&bytes).map_err(|e| decode_failure(e.into()))?;
        println!("{v}");
        return Ok(());
    }
    let message = match (a.codec, a.kind) {
        (c, Some(k)) => codec(c, EncodingProfile::Compact).decode(k.into(), &bytes),
        (CodecArg::Cbor, None) => Message::decode_any(&bytes),
        (CodecArg::Json, None) => match std::str::from_utf8(&bytes) {
            Ok(text) => tinyfl_core::codec::json_decode_any(text),
            Err(e) => Err(tinyfl_core::DecodeError::Json {
                offset: e.valid_up_to(),
                reason: "invalid UTF-8",
            }),
        },
        (CodecArg::Pb, None) => return Err(Failure::usage("--kind is required for --codec pb")),
    }
    .map_err(decode_failure)?;
    print!("{message}");
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let report = match a.table {
        1 => run_table1(),
        2 => run_table2(a.seed),
        n => return Err(Failure::usage(format!("no table {n}; choose 1 or 2"))),
    };
    match a.format {
        FormatArg::Csv => print!("{}", render_csv(&report)),
        FormatArg::Text => print!("{}", render_text(&report)),
    }
    if report.all_match() {
        Ok(())
    } else {
        Err(Failure(
            5,
            format!(
                "size mismatches:\n{}",
                render_mismatches(&report).trim_end()
            ),
        ))
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let mut file = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure(3, format!("cannot read {}: {e}", path.display())))?;
            ConfigFile::from_json(&text)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = a.$flag.clone() { file.$field = v; })*
        };
    }
    set!(
        clients => num_clients,
        rounds => rounds,
        min_fraction => min_fraction,
        min_dataset_size => min_dataset_size,
        params => param_count,
        seed => seed,
        epochs => local_epochs,
        learning_rate => learning_rate,
        batch_size => batch_size,
        dataset_min => dataset_size_min,
        dataset_max => dataset_size_max,
        noise => noise,
        drop_rate => drop_rate,
        faulty => faulty_echo_clients,
        frame_budget => frame_budget,
        block_size => block_size
    );
    if let Some(p) = a.profile {
        file.profile = EncodingProfile::from(p).name().to_string();
    }
    if a.multicast {
        file.multicast = true;
    }
    let cfg = file.to_config().map_err(Failure::usage)?;
    let mut sim = Simulation::new(cfg.clone())
        .map_err(|e| Failure::usage(format!("invalid configuration: {e}")))?;
    if a.trace.is_some() {
        sim = sim.with_trace();
    }
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let r = sim.run_round().report;
        println!("{}", summary_line(&r));
        rounds.push(r);
    }
    let report = SimulationReport::new(&cfg, sim.server().model_identifier.to_string(), &rounds);
    let write = |path: &PathBuf, text: String| {
        fs::write(path, text)
            .map_err(|e| Failure(1, format!("cannot write {}: {e}", path.display())))
    };
    write(&a.output, report.to_json())?;
    if let Some(path) = &a.trace {
        write(path, render_trace(sim.trace()))?;
    }
    if rounds
        .iter()
        .all(|r| matches!(r.outcome, RoundOutcome::InsufficientClients(_)))
    {
        return Err(Failure(6, "insufficient-clients in every round".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Bench(a) => bench(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
