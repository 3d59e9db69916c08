mod format;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use qsdc_core::analysis::{detect_prob_dpp, detect_prob_fpp, emit_curves, CurveKind, Grid};
use qsdc_core::exec::{map_ordered, mix_seed, stream};
use qsdc_core::protocol::{estimate_detection_rate_with, random_message, run_dpp, run_fpp};
use qsdc_core::verify::{all_passed, run_checks, Formulas, VerifyOptions};
use qsdc_core::{AttackParams, Execution, Protocol, ProtocolConfig};

use format::{csv_records, csv_table, json_document};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const MESSAGE_STREAM: u64 = 7;

#[derive(Parser)]
#[command(name = "qsdc", version, about = "Simulate and analyse two-step and GHZ-decoy QSDC protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol instance, or a detection-rate estimate with --trials.
    Simulate(SimulateArgs),
    /// Estimate detection rates over a grid of attack parameters.
    Sweep(SweepArgs),
    /// Tabulate information-gain or success-probability curves.
    Curves(CurvesArgs),
    /// Run the built-in acceptance checks and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Dpp,
    Fpp,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Dpp => Protocol::Dpp,
            ProtocolArg::Fpp => Protocol::Fpp,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Leg {
    First,
    Second,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig2,
    Fig3,
}

#[derive(Args)]
struct Output {
    #[arg(long, env = "QSDC_SEED", default_value_t = 1)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "fpp")]
    protocol: ProtocolArg,
    #[arg(long, default_value_t = 100)]
    n_pairs: usize,
    #[arg(long, default_value_t = 0.5)]
    control_prob: f64,
    /// Attack moduli `a,t` (|α|², |n|²).
    #[arg(long, value_parser = parse_pair, conflicts_with = "symmetric_attack")]
    attack: Option<(f64, f64)>,
    /// Symmetric flip attack with error probability b.
    #[arg(long)]
    symmetric_attack: Option<f64>,
    /// Transmissions Eve intercepts.
    #[arg(long, value_enum, default_value = "first")]
    eve: Leg,
    /// Estimate per-check detection over this many independent checks
    /// instead of running the protocol.
    #[arg(long)]
    trials: Option<u64>,
    /// Message length in bits; defaults to the full capacity.
    #[arg(long)]
    message_bits: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    abort_threshold: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "fpp")]
    protocol: ProtocolArg,
    /// Grid points per axis on [0, 1].
    #[arg(long, default_value_t = 5)]
    steps: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(value_enum)]
    figure: Figure,
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Control-mode probability for fig3.
    #[arg(long = "control-prob", visible_alias = "c", default_value_t = 0.5)]
    control_prob: f64,
    /// Detection probabilities for fig3.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.4, 0.5, 0.6, 0.8])]
    d_list: Vec<f64>,
    /// Upper end of the information axis for fig3.
    #[arg(long, default_value_t = 10.0)]
    max_info: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, env = "QSDC_SEED", default_value_t = 2024)]
    seed: u64,
    /// Check against a sign-flipped GHZ-decoy detection formula.
    #[arg(long, hide = true)]
    negative_control: bool,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, t) = s.split_once(',').ok_or("expected a,t")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let t: f64 = t.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, t))
}

enum Failure {
    Usage(String),
    Io(String),
    Verify,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self::Usage(e.to_string())
    }
}

fn emit(output: &Output, text: &str) -> Result<(), Failure> {
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

/// Appends the fields of `extra` to `base`, keeping order.
fn extend(mut base: Map<String, Value>, extra: Value) -> Map<String, Value> {
    base.extend(object(extra));
    base
}

fn attack_of(args: &SimulateArgs) -> Result<Option<(AttackParams, &'static str)>, Failure> {
    if let Some((a, t)) = args.attack {
        return AttackParams::from_moduli(a, t)
            .map(|p| Some((p, "moduli")))
            .map_err(Failure::usage);
    }
    if let Some(b) = args.symmetric_attack {
        return AttackParams::symmetric(b).map(|p| Some((p, "symmetric"))).map_err(Failure::usage);
    }
    Ok(None)
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let protocol: Protocol = args.protocol.into();
    let seed = args.output.seed;
    let attack = attack_of(&args)?;
    let attack_meta = match &attack {
        Some((p, model)) => json!({
            "attack_model": model, "attack_a": p.a(), "attack_b": p.b(),
            "attack_s": p.s(), "attack_t": p.t(),
        }),
        None => json!({
            "attack_model": "none", "attack_a": null, "attack_b": null,
            "attack_s": null, "attack_t": null,
        }),
    };

    let record = if let Some(trials) = args.trials {
        let p = attack.map_or_else(AttackParams::identity, |(p, _)| p);
        let est = estimate_detection_rate_with(protocol, &p, trials, seed, Execution::Parallel)
            .map_err(Failure::usage)?;
        let analytic = match protocol {
            Protocol::Fpp => detect_prob_fpp(p.a(), p.t()),
            Protocol::Dpp => detect_prob_dpp(p.b()),
        }
        .map_err(Failure::usage)?;
        let meta = object(json!({
            "version": VERSION, "mode": "estimate", "protocol": protocol.name(),
            "seed": seed, "trials": trials,
        }));
        extend(
            extend(meta, attack_meta),
            json!({
                "detections": est.detections,
                "empirical_detection_rate": est.rate,
                "stderr": est.stderr,
                "analytic_detection_rate": analytic,
            }),
        )
    } else {
        let mut cfg = ProtocolConfig::new(args.n_pairs, args.control_prob, seed)
            .with_abort_threshold(args.abort_threshold);
        if let Some((p, _)) = &attack {
            cfg = cfg.with_attack(p.clone(), args.eve != Leg::Second, args.eve != Leg::First);
        }
        let bits = args
            .message_bits
            .unwrap_or(2 * cfg.message_capacity(protocol));
        cfg = cfg.with_message(random_message(bits, &mut stream(seed, MESSAGE_STREAM)));
        let report = match protocol {
            Protocol::Fpp => run_fpp(&cfg),
            Protocol::Dpp => run_dpp(&cfg),
        }
        .map_err(Failure::usage)?;
        let eve = match (&attack, args.eve) {
            (None, _) => "none",
            (_, Leg::First) => "first",
            (_, Leg::Second) => "second",
            (_, Leg::Both) => "both",
        };
        let bitstring = |b: &[bool]| b.iter().map(|&x| if x { '1' } else { '0' }).collect::<String>();
        let meta = object(json!({
            "version": VERSION, "mode": "run", "protocol": protocol.name(), "seed": seed,
            "n_pairs": cfg.n_pairs, "control_prob": cfg.control_prob, "eve": eve,
            "abort_threshold": cfg.abort_threshold, "message_bits": bits,
        }));
        let second = report.second_check;
        extend(
            extend(meta, attack_meta),
            json!({
                "decoys_checked": report.decoys_checked,
                "detections": report.detections,
                "empirical_detection_rate": report.empirical_detection_rate,
                "analytic_detection_rate": report.analytic_detection_rate,
                "aborted": report.aborted,
                "first_checked": report.first_check.checked,
                "first_detected": report.first_check.detected,
                "second_checked": second.map(|c| c.checked),
                "second_detected": second.map(|c| c.detected),
                "bit_error_count": report.bit_error_count,
                "message": bitstring(&cfg.message_bits),
                "recovered": bitstring(&report.recovered_bits),
            }),
        )
    };
    let text = match args.output.format {
        Format::Csv => csv_records(&[record]),
        Format::Json => json_document(Value::Object(record)),
    };
    emit(&args.output, &text)
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let protocol: Protocol = args.protocol.into();
    let seed = args.output.seed;
    if args.steps < 2 {
        return Err(Failure::usage("--steps must be at least 2"));
    }
    if args.trials == 0 {
        return Err(Failure::usage("--trials must be positive"));
    }
    let axis: Vec<f64> = Grid::new(0.0, 1.0, args.steps)
        .map_err(Failure::usage)?
        .values()
        .collect();
    // GHZ decoys: full (a, t) grid of dephasing probes. EPR checks: one axis
    // of symmetric probes, whose error rate is b in both bases.
    let points: Vec<(f64, f64)> = match protocol {
        Protocol::Fpp => axis.iter().flat_map(|&a| axis.iter().map(move |&t| (a, t))).collect(),
        Protocol::Dpp => axis.iter().map(|&b| (1.0 - b, 1.0 - b)).collect(),
    };
    let rows = map_ordered(&points, Execution::Parallel, |i, &(a, t)| {
        let (attack, analytic) = match protocol {
            Protocol::Fpp => (AttackParams::from_moduli(a, t), detect_prob_fpp(a, t)),
            Protocol::Dpp => (AttackParams::symmetric(1.0 - a), detect_prob_dpp(1.0 - a)),
        };
        let attack = attack.map_err(|e| e.to_string())?;
        let analytic = analytic.map_err(|e| e.to_string())?;
        let point_seed = mix_seed(seed, i as u64);
        let est = estimate_detection_rate_with(protocol, &attack, args.trials, point_seed, Execution::Sequential)
            .map_err(|e| e.to_string())?;
        let z = if est.stderr > 0.0 { (est.rate - analytic) / est.stderr } else { 0.0 };
        Ok::<_, String>(json!({
            "index": i, "point_seed": point_seed, "a": attack.a(), "b": attack.b(),
            "s": attack.s(), "t": attack.t(), "detections": est.detections,
            "empirical_detection_rate": est.rate, "stderr": est.stderr,
            "analytic_detection_rate": analytic, "z_score": z,
        }))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(Failure::Usage)?;
    let meta = json!({
        "version": VERSION, "command": "sweep", "protocol": protocol.name(), "seed": seed,
        "steps": args.steps, "trials": args.trials,
        "attack_model": match protocol { Protocol::Fpp => "moduli", Protocol::Dpp => "symmetric" },
    });
    let text = match args.output.format {
        Format::Csv => {
            let records: Vec<_> = rows
                .into_iter()
                .map(|r| extend(object(meta.clone()), r))
                .collect();
            csv_records(&records)
        }
        Format::Json => json_document(json!({ "meta": meta, "rows": rows })),
    };
    emit(&args.output, &text)
}

fn curves(args: CurvesArgs) -> Result<(), Failure> {
    let (kind, grid, meta) = match args.figure {
        Figure::Fig2 => (
            CurveKind::InfoVsDetection,
            Grid::new(0.0, 1.0, args.points),
            json!({ "figure": "fig2", "points": args.points }),
        ),
        Figure::Fig3 => (
            CurveKind::SuccessVsInfo {
                c: args.control_prob,
                detections: args.d_list.clone(),
            },
            Grid::new(0.0, args.max_info, args.points),
            json!({
                "figure": "fig3", "points": args.points, "control_prob": args.control_prob,
                "d_list": args.d_list, "max_info": args.max_info,
            }),
        ),
    };
    let table = emit_curves(&kind, &grid.map_err(Failure::usage)?).map_err(Failure::usage)?;
    let text = match args.output.format {
        Format::Csv => csv_table(&table.columns, &table.rows),
        Format::Json => {
            let meta = extend(
                object(json!({ "version": VERSION, "command": "curves", "seed": args.output.seed })),
                meta,
            );
            json_document(json!({ "meta": meta, "columns": table.columns, "rows": table.rows }))
        }
    };
    emit(&args.output, &text)
}

/// Negative control: 1 − ½(a³+t³) with the sign of the correction flipped.
fn flipped_detect_fpp(a: f64, t: f64) -> Result<f64, qsdc_core::analysis::DomainError> {
    detect_prob_fpp(a, t).map(|p| 2.0 - p)
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    if args.trials == 0 {
        return Err(Failure::usage("--trials must be positive"));
    }
    let opts = VerifyOptions {
        trials: args.trials,
        seed: args.seed,
        exec: Execution::Parallel,
    };
    let formulas = if args.negative_control {
        Formulas { detect_fpp: flipped_detect_fpp }
    } else {
        Formulas::default()
    };
    let outcomes = run_checks(&opts, &formulas);
    println!("qsdc {VERSION} verify seed={} trials={}", args.seed, args.trials);
    for o in &outcomes {
        println!(
            "{} {} {:<45} {:>7.2}s  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.seconds,
            o.detail
        );
    }
    if all_passed(&outcomes) {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Curves(a) => curves(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Verify) => ExitCode::from(1),
    }
}
