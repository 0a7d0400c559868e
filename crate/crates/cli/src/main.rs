use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use impulse_core::energy::{
    account, default_table, edp_sweep, sweep_csv, EnergyOverride, EnergyTable, SweepTemplate,
    DEFAULT_SWEEP_GRID,
};
use impulse_core::formats::{input_train, parse_spike_events, v_trace_csv, write_spike_events};
use impulse_core::mapper::map_network;
use impulse_core::oracle::{compare, ref_run, Comparison, RefNetwork};
use impulse_core::runtime::{compute_sparsity, run_inference};
use impulse_core::selftest::{adder_exhaustive, comparator_exhaustive};

mod error;
mod model;

use error::CliError;

/// Path to a JSON energy-table override applied on top of the defaults.
const ENERGY_ENV: &str = "IMPULSE_ENERGY_TABLE";

#[derive(Parser)]
#[command(
    name = "impulse",
    version,
    about = "Compute-in-memory SNN macro simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run inference on a spike train.
    Run(RunArgs),
    /// EDP per neuron per timestep across input sparsities.
    Sweep(SweepArgs),
    /// Print how a model maps onto macros without simulating.
    Map {
        /// Model description (JSON).
        model: PathBuf,
    },
    /// Exhaustive adder and comparator checks.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Model description (JSON).
    model: PathBuf,
    /// Input spikes, `t<TAB>layer<TAB>neuron` per line.
    input: PathBuf,
    /// Output spike train (layers 1..L).
    #[arg(short, long)]
    output: PathBuf,
    /// Layer tag of the input events to use.
    #[arg(long, default_value_t = 0)]
    input_layer: usize,
    /// CSV of every neuron's potential after each timestep.
    #[arg(long)]
    vmem_trace: Option<PathBuf>,
    /// Energy report CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Instruction trace, one JSON object per line.
    #[arg(long)]
    instr_trace: Option<PathBuf>,
    /// Also run the reference model; exit 1 unless both agree.
    #[arg(long)]
    oracle_check: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated sparsities in [0, 1].
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP_GRID)]
    grid: Vec<f64>,
    /// Sparsities whose reduction is reported on stderr.
    #[arg(long, value_delimiter = ',')]
    at: Vec<f64>,
    /// CSV destination; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn energy_table(model_override: Option<&EnergyOverride>) -> Result<EnergyTable, CliError> {
    let mut table = default_table();
    if let Some(path) = std::env::var_os(ENERGY_ENV) {
        let path = PathBuf::from(path);
        let o: EnergyOverride = serde_json::from_str(&read(&path)?)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        table
            .apply(&o)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    }
    if let Some(o) = model_override {
        table
            .apply(o)
            .map_err(|e| CliError::Schema(format!("energy_table: {e}")))?;
    }
    Ok(table)
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let model = model::load(&read(&args.model)?)?;
    let table = energy_table(model.energy_table.as_ref())?;
    let mapping = map_network(&model.layers)?;
    let events = parse_spike_events(&read(&args.input)?)
        .map_err(|e| CliError::Schema(format!("{}: {e}", args.input.display())))?;
    let input = input_train(
        &events,
        args.input_layer,
        mapping.input_width(),
        Some(model.timesteps),
    )
    .map_err(|e| CliError::Schema(format!("{}: {e}", args.input.display())))?;

    let probes: Vec<(usize, usize)> = if args.vmem_trace.is_some() {
        (1..=model.layers.len())
            .flat_map(|l| (0..model.layers[l - 1].shape.out_width()).map(move |n| (l, n)))
            .collect()
    } else {
        Vec::new()
    };
    let sim = run_inference(&mapping, &input, &probes, model.config)
        .map_err(|e| CliError::Simulation(e.to_string()))?;
    let cost = account(sim.trace.iter().map(|e| &e.event), &table)
        .map_err(|e| CliError::Schema(e.to_string()))?;

    let layers = sim.spikes.layers();
    write(&args.output, &write_spike_events(&sim.spikes, 1..layers))?;
    if let Some(path) = &args.vmem_trace {
        write(path, &v_trace_csv(&sim.v_trace))?;
    }
    if let Some(path) = &args.report {
        write(path, &cost.to_csv())?;
    }
    if let Some(path) = &args.instr_trace {
        let mut text = String::new();
        for e in &sim.trace {
            let line = serde_json::to_string(e).map_err(|e| CliError::Simulation(e.to_string()))?;
            text.push_str(&line);
            text.push('\n');
        }
        write(path, &text)?;
    }

    let mut out = String::new();
    let sparsity = compute_sparsity(&sim.stats);
    let _ = writeln!(out, "timesteps: {}", model.timesteps);
    let _ = writeln!(out, "macros: {}", mapping.macro_count());
    for (l, &w) in sim.stats.widths.iter().enumerate() {
        let spikes: usize = sim.stats.spikes[l].iter().sum();
        let mean = sparsity.per_layer[l].iter().sum::<f64>() / model.timesteps as f64;
        let name = if l == 0 {
            "input".to_string()
        } else {
            format!("layer {l}")
        };
        let _ = writeln!(
            out,
            "{name}: {w} neurons, {spikes} spikes, sparsity {mean:.4}"
        );
    }
    let counts: Vec<String> = sim
        .stats
        .instr_counts
        .iter()
        .map(|(k, n)| format!("{k}={n}"))
        .collect();
    let _ = writeln!(out, "instructions: {}", counts.join(" "));
    let _ = writeln!(out, "overflow events: {}", sim.stats.overflow_events);
    let _ = writeln!(
        out,
        "energy_pj: {:.4}\ndelay_ns: {:.1}\nedp_pj_ns: {:.4}\ntops_per_watt: {:.4}",
        cost.energy_pj, cost.delay_ns, cost.edp_pj_ns, cost.tops_per_watt
    );

    let mut verdict = Ok(());
    if args.oracle_check {
        let mut net = RefNetwork::new(&model.layers, model.config.saturate)
            .map_err(|e| CliError::Schema(e.to_string()))?;
        let reference =
            ref_run(&mut net, &input).map_err(|e| CliError::Simulation(e.to_string()))?;
        let cmp = compare(&sim.spikes, &sim.final_v, &reference)
            .map_err(|e| CliError::Simulation(e.to_string()))?;
        let _ = writeln!(out, "oracle: {cmp}");
        if cmp != Comparison::Equal {
            verdict = Err(CliError::Mismatch(format!("oracle mismatch: {cmp}")));
        }
    }
    print!("{out}");
    verdict
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let table = energy_table(None)?;
    let template = SweepTemplate::default();
    let sweep_err = |e: impulse_core::energy::EnergyError| CliError::Schema(e.to_string());
    let points = edp_sweep(&template, &args.grid, &table).map_err(sweep_err)?;
    let csv = sweep_csv(&points);
    match &args.output {
        Some(path) => write(path, &csv)?,
        None => print!("{csv}"),
    }
    if !args.at.is_empty() {
        for p in edp_sweep(&template, &args.at, &table).map_err(sweep_err)? {
            eprintln!(
                "reduction at {:.2} sparsity: {:.2}% (EDP {:.4} pJ*ns per neuron per timestep)",
                p.sparsity, p.reduction_pct, p.edp_pj_ns
            );
        }
    }
    Ok(())
}

fn cmd_map(path: &Path) -> Result<(), CliError> {
    let model = model::load(&read(path)?)?;
    print!("{}", map_network(&model.layers)?.report());
    Ok(())
}

fn cmd_selftest() -> Result<(), CliError> {
    let adder = adder_exhaustive();
    println!(
        "adder: {} pairs, {} mismatches",
        adder.checked, adder.mismatches
    );
    let cmp = comparator_exhaustive();
    println!(
        "comparator: {} pairs, {} mismatches",
        cmp.checked, cmp.mismatches
    );
    if adder.passed() && cmp.passed() {
        println!("selftest: pass");
        Ok(())
    } else {
        Err(CliError::Mismatch("selftest: fail".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Map { model } => cmd_map(model),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("impulse: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
