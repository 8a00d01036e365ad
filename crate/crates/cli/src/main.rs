use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use vanetsim_core::phy::{phy_preset, NakagamiParams};
use vanetsim_core::routing::PresetName;
use vanetsim_core::scenario::{
    analytics_table, emit_report, parse_config, run_matrix, run_scenario_with, write_csv,
    AnalyticsRow, ScenarioConfig, Sweep, SweepFamily,
};
use vanetsim_core::Standard;

#[derive(Parser)]
#[command(name = "vanetsim", version, about = "Highway VANET routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, optionally over several seeds.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        protocol: Option<PresetName>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long)]
        mac: Option<Standard>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Extra `key=value` settings applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Write one MAC tx/rx trace file per run.
        #[arg(long)]
        trace: bool,
    },
    /// Run a density or mobility sweep over all presets and both MACs.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        family: SweepFamily,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the Gaussian distance model.
    Analytics {
        #[arg(long, allow_hyphen_values = true)]
        mean: f64,
        #[arg(long)]
        var: f64,
        #[arg(long)]
        rmax: f64,
        #[arg(long)]
        steps: usize,
        /// Add a Monte Carlo column from this many epoch trajectories.
        #[arg(long)]
        mc: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// PHY presets.
    Phy {
        #[command(subcommand)]
        action: PhyAction,
    },
    /// Scenario configuration documents.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand)]
enum PhyAction {
    /// Print the PHY and fading parameters of each standard.
    Dump {
        #[arg(long)]
        mac: Option<Standard>,
    },
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print the default configuration document.
    DumpDefaults,
}

fn load_config(path: Option<&Path>, sets: &[String]) -> Result<ScenarioConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => ScenarioConfig::default(),
    };
    for s in sets {
        cfg.set_str(s).with_context(|| format!("--set {s}"))?;
    }
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    config: Option<&Path>,
    protocol: Option<PresetName>,
    nodes: Option<usize>,
    speed: Option<f64>,
    mac: Option<Standard>,
    seed: Option<u64>,
    reps: usize,
    sets: &[String],
    out: &Path,
    trace: bool,
) -> Result<()> {
    if reps == 0 {
        bail!("--reps must be at least 1");
    }
    let mut cfg = load_config(config, sets)?;
    if let Some(p) = protocol {
        cfg.protocol = p;
    }
    if let Some(n) = nodes {
        cfg.n_nodes = n;
    }
    if let Some(s) = speed {
        cfg.speed_mps = s;
    }
    if let Some(m) = mac {
        cfg.mac_variant = m;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;

    let mut rows = Vec::with_capacity(reps);
    let mut traces = Vec::new();
    for c in Sweep::single(&cfg).configs(&cfg, reps) {
        let r = run_scenario_with(&c, trace)?;
        eprintln!(
            "seed {}: {} events in {:.2} s, {} MAC attempts, {} collisions, {} link failures",
            c.seed,
            r.events,
            r.wall_clock.as_secs_f64(),
            r.mac.tx_attempts,
            r.mac.collisions,
            r.mac.link_failures
        );
        if trace {
            traces.push((c.seed, r.trace));
        }
        rows.push(r.row);
    }

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (seed, lines) in traces {
        let path = out.join(format!("trace_seed{seed}.txt"));
        let mut text = lines.join("\n");
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let csv = out.join("metrics.csv");
    write_csv(&rows, &csv)?;
    for r in &rows {
        println!(
            "{} {} n={} v={} seed={}: throughput {:.1} B/s, delivered {}/{}, e2ed {}, nrl {}",
            r.protocol,
            r.mac_variant,
            r.n_nodes,
            r.speed_mps,
            r.seed,
            r.throughput_bps,
            r.delivered,
            r.sent,
            r.e2ed_s.map_or("n/a".into(), |v| format!("{v:.4} s")),
            r.nrl.map_or("n/a".into(), |v| format!("{v:.3}")),
        );
    }
    eprintln!("wrote {}", csv.display());
    Ok(())
}

fn sweep(
    config: Option<&Path>,
    family: SweepFamily,
    reps: usize,
    sets: &[String],
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config, sets)?;
    let rows = run_matrix(&cfg, &family.sweep(), reps)?;
    let files = emit_report(&rows, &[family], out)?;
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            protocol,
            nodes,
            speed,
            mac,
            seed,
            reps,
            sets,
            out,
            trace,
        } => simulate(
            config.as_deref(),
            protocol,
            nodes,
            speed,
            mac,
            seed,
            reps,
            &sets,
            &out,
            trace,
        ),
        Command::Sweep {
            config,
            family,
            reps,
            sets,
            out,
        } => sweep(config.as_deref(), family, reps, &sets, &out),
        Command::Analytics {
            mean,
            var,
            rmax,
            steps,
            mc,
            seed,
        } => {
            let table = analytics_table(mean, var, rmax, steps, mc.map(|n| (n, seed)))?;
            println!("{}", AnalyticsRow::HEADER);
            for row in table {
                println!("{}", row.to_csv_line());
            }
            Ok(())
        }
        Command::Phy {
            action: PhyAction::Dump { mac },
        } => {
            let kinds = match mac {
                Some(m) => vec![m],
                None => vec![Standard::Dot11, Standard::Dot11p],
            };
            for (i, kind) in kinds.into_iter().enumerate() {
                if i > 0 {
                    println!();
                }
                let phy = phy_preset(kind);
                print!("{}", phy.dump());
                let naka = NakagamiParams::for_carrier(phy.carrier_freq);
                println!("ref_distance = {}", naka.ref_distance);
                println!("ref_loss = {:.6}", naka.ref_loss);
                println!("m_by_distance = {:?}", naka.m_by_distance);
                println!("gamma_by_distance = {:?}", naka.gamma_by_distance);
            }
            Ok(())
        }
        Command::Config {
            action: ConfigAction::DumpDefaults,
        } => {
            print!("{}", ScenarioConfig::default().to_document());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
