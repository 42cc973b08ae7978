//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid scenario or arguments,
//! 3 failure while running.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::harness::{
    decision_report, run_experiment, run_sweep, write_decisions_csv, write_sweep_csv, Policy,
    SweepParam,
};
use crate::scenario::{Scenario, Strictness};
use crate::wireless_channel::ChannelState;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "splitlora",
    version,
    about = "Split LoRA fine-tuning cost simulator and cut/frequency optimizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate every (device, round) cell under each policy and write CSVs.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated policies; the scenario's list when omitted.
        #[arg(long, value_parser = parse_policies)]
        policies: Option<PolicyList>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Repeat `run` over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Comma-separated policies; the scenario's list when omitted.
        #[arg(long, value_parser = parse_policies)]
        policies: Option<PolicyList>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Load and validate a scenario.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Print the fully resolved scenario as JSON.
        #[arg(long)]
        emit: bool,
    },
    /// Print the cost of every cut layer for one (device, round) cell.
    ShowDecision {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 0)]
        device: usize,
        #[arg(long, default_value_t = 0)]
        round: u32,
        /// Also write decisions.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario JSON; the built-in five-device fleet when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override every device's path-loss exponent with a preset (good, normal, poor).
    #[arg(long)]
    channel: Option<ChannelState>,
    /// Warn about unknown scenario fields instead of rejecting them.
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Clone)]
struct PolicyList(Vec<Policy>);

fn parse_policies(s: &str) -> Result<PolicyList, String> {
    let list = Policy::parse_list(s)?;
    if list.is_empty() {
        return Err("no policies given".into());
    }
    Ok(PolicyList(list))
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario, Error> {
        self.load_with(None)
    }

    fn load_with(&self, policies: Option<PolicyList>) -> Result<Scenario, Error> {
        let strictness = if self.lenient {
            Strictness::Lenient
        } else {
            Strictness::Strict
        };
        let mut scenario = match &self.scenario {
            Some(path) => Scenario::load(path, strictness)?,
            None => Scenario::builtin(),
        };
        if let Some(rounds) = self.rounds {
            scenario.rounds = rounds;
        }
        if let Some(seed) = self.seed {
            scenario.seed = seed;
        }
        if let Some(state) = self.channel {
            scenario.set_channel_state(state);
        }
        if let Some(PolicyList(list)) = policies {
            scenario.policies = list;
        }
        scenario.validate()?;
        Ok(scenario)
    }
}

fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_RUNTIME
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run {
            scenario,
            policies,
            out,
        } => {
            let scenario = scenario.load_with(policies)?;
            let result = run_experiment(&scenario, &scenario.policies)?;
            result.write_csv(&out)?;
            for s in result.summaries.iter().filter(|s| s.device == "all") {
                eprintln!(
                    "{:<14} mean delay {:>10.4} s  mean energy {:>10.4} J  mean U {:.4}",
                    s.policy, s.mean_delay_s, s.mean_energy_j, s.mean_cost_u
                );
            }
            for r in &result.reductions {
                eprintln!("{} vs {}: {:.2}%", r.metric, r.baseline, r.value_pct);
            }
            log::info!("wrote results to {}", out.display());
        }
        Command::Sweep {
            scenario,
            param,
            values,
            policies,
            out,
        } => {
            let scenario = scenario.load_with(policies)?;
            let points = run_sweep(&scenario, param, &values, &scenario.policies)?;
            write_sweep_csv(&out, param, &points)?;
            log::info!("wrote {} sweep points to {}", points.len(), out.display());
        }
        Command::Validate { scenario, emit } => {
            let loaded = scenario.load()?;
            if emit {
                print!("{}", loaded.to_json_string());
            } else {
                let source = scenario
                    .scenario
                    .as_deref()
                    .unwrap_or(Path::new("<builtin>"));
                eprintln!(
                    "{}: ok ({} devices, {} rounds, {} layers)",
                    source.display(),
                    loaded.devices.len(),
                    loaded.rounds,
                    loaded.profile.num_layers
                );
            }
        }
        Command::ShowDecision {
            scenario,
            device,
            round,
            out,
        } => {
            let scenario = scenario.load()?;
            let report = decision_report(&scenario, device, round)?;
            let d = &report.decision;
            eprintln!(
                "device {device} round {round}: rate up {:.0} b/s, down {:.0} b/s, {} outage redraws",
                report.channel.rate_up_bps, report.channel.rate_down_bps, report.outage_redraws
            );
            eprintln!(
                "f* = {} Hz ({:?} clamp), c* = {}, U = {}",
                d.server_freq_hz, d.clamp, d.cut_layer, d.cost
            );
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_decisions_csv(&report.rows, &mut lock)?;
            lock.flush()?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                write_decisions_csv(
                    &report.rows,
                    std::fs::File::create(dir.join("decisions.csv"))?,
                )?;
            }
        }
    }
    Ok(())
}
