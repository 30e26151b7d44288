//! Argument parsing and command dispatch for the `vrcad` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand};
use vrcad_core::{DistanceScope, FaceRole, FaceTag, Model};
use vrcad_server::{CadConfig, CadServer, VhConfig, VhServer};

use crate::replay::{self, LiveOptions, ReplayOptions};
use crate::script::Script;
use crate::{bench, commands, CliError, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "vrcad",
    version,
    about = "Parametric CAD editing by direct hand manipulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the CAD server: owns the model, builds candidate sets, commits.
    ServeCad {
        #[arg(long, env = "VRCAD_MODEL")]
        model: PathBuf,
        #[arg(long, env = "VRCAD_LISTEN", default_value = "127.0.0.1:7010")]
        listen: String,
        /// Sweep half-width: each set has up to 2K+1 candidates.
        #[arg(long, env = "VRCAD_K", default_value_t = vrcad_core::proposal::DEFAULT_SWEEP_STEPS,
              value_parser = parse_k)]
        k: usize,
        /// Write candidate OBJ files here.
        #[arg(long, env = "VRCAD_SHARED_FOLDER")]
        shared_folder: Option<PathBuf>,
        /// Send shared-folder paths instead of inline OBJ text.
        #[arg(long, env = "VRCAD_SEND_PATHS", action = clap::ArgAction::SetTrue, value_parser = clap::builder::BoolishValueParser::new())]
        send_paths: bool,
        /// Rebuild the set around an extreme candidate held long enough.
        #[arg(long, env = "VRCAD_RECENTER", action = clap::ArgAction::SetTrue, value_parser = clap::builder::BoolishValueParser::new())]
        recenter: bool,
        #[arg(long, env = "VRCAD_RECENTER_HOLD_TICKS", default_value_t = 60)]
        recenter_hold_ticks: u32,
    },
    /// Run the VH server: distance loop that picks the active candidate.
    ServeVh {
        #[arg(long, env = "VRCAD_CAD", default_value = "127.0.0.1:7010")]
        cad: String,
        #[arg(long, env = "VRCAD_VH_LISTEN", default_value = "127.0.0.1:7011")]
        listen: String,
        #[arg(long, env = "VRCAD_TICK_RATE", default_value_t = 1000)]
        tick_rate: u32,
        /// Millimetres a challenger must win by before the selection switches.
        #[arg(long, env = "VRCAD_HYSTERESIS_MARGIN", default_value_t = 0.0)]
        hysteresis_margin: f64,
        #[arg(long, env = "VRCAD_SCOPE", default_value = "handle")]
        scope: DistanceScope,
    },
    /// Replay a trajectory script and print the active-candidate report.
    Replay {
        #[arg(long, env = "VRCAD_MODEL", required_unless_present = "connect")]
        model: Option<PathBuf>,
        #[arg(long)]
        script: PathBuf,
        /// Replay against a running CAD server instead of in process.
        #[arg(long)]
        connect: Option<String>,
        /// Compare the report with this file; exit 3 on mismatch.
        #[arg(long)]
        expect: Option<PathBuf>,
        /// Sleep according to script timestamps (live replay only).
        #[arg(long)]
        realtime: bool,
        #[arg(long, env = "VRCAD_K", default_value_t = vrcad_core::proposal::DEFAULT_SWEEP_STEPS,
              value_parser = parse_k)]
        k: usize,
        #[arg(long, env = "VRCAD_HYSTERESIS_MARGIN", default_value_t = 0.0)]
        hysteresis_margin: f64,
        #[arg(long, env = "VRCAD_SCOPE", default_value = "handle")]
        scope: DistanceScope,
    },
    /// Write OBJ files for the model and each extrusion.
    Tessellate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load and regenerate a model, reporting any error.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Time nearest-candidate queries for one face.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        feature: String,
        #[arg(long)]
        role: FaceRole,
        #[arg(long, default_value_t = vrcad_core::proposal::DEFAULT_SWEEP_STEPS, value_parser = parse_k)]
        k: usize,
        #[arg(long, default_value_t = 100_000)]
        queries: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "handle")]
        scope: DistanceScope,
    },
}

fn parse_k(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(format!("K must be an integer >= 1, got '{s}'")),
    }
}

fn load_model(path: &std::path::Path) -> Result<Model, CliError> {
    Model::from_file(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn read_script(path: &std::path::Path) -> Result<Script, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Script::parse(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn replay_error(e: replay::ReplayError) -> CliError {
    match e {
        replay::ReplayError::Step { .. } | replay::ReplayError::Server { .. } => CliError::invalid(e),
        _ => CliError::runtime(e),
    }
}

/// Runs a parsed command. Output goes to stdout, diagnostics to the log.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ServeCad {
            model,
            listen,
            k,
            shared_folder,
            send_paths,
            recenter,
            recenter_hold_ticks,
        } => {
            let cfg = CadConfig {
                listen,
                model_path: model,
                k,
                shared_folder,
                send_paths,
                recenter,
                recenter_hold_ticks,
            };
            let server = CadServer::start(cfg).map_err(server_error)?;
            log::info!("cad server listening on {}", server.local_addr());
            server.wait();
            Ok(())
        }
        Command::ServeVh {
            cad,
            listen,
            tick_rate,
            hysteresis_margin,
            scope,
        } => {
            let cfg = VhConfig {
                cad_address: cad,
                listen: Some(listen),
                tick_rate_hz: tick_rate,
                hysteresis_margin,
                scope,
            };
            let server = VhServer::start(cfg).map_err(server_error)?;
            if let Some(a) = server.listen_addr() {
                log::info!("vh server listening on {a}");
            }
            server.wait();
            Ok(())
        }
        Command::Replay {
            model,
            script,
            connect,
            expect,
            realtime,
            k,
            hysteresis_margin,
            scope,
        } => {
            let script = read_script(&script)?;
            let report = match connect {
                Some(addr) => {
                    let opts = LiveOptions {
                        realtime,
                        ..LiveOptions::default()
                    };
                    replay::replay_live(&addr, &script, &opts).map_err(replay_error)?
                }
                None => {
                    let model = load_model(model.as_deref().expect("clap requires --model without --connect"))?;
                    let opts = ReplayOptions {
                        k,
                        hysteresis_margin,
                        scope,
                    };
                    replay::replay_in_process(model, &script, &opts)
                        .map_err(replay_error)?
                        .report
                }
            };
            print!("{report}");
            if let Some(path) = expect {
                let want = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
                replay::compare_expected(&report, &want).map_err(CliError::Mismatch)?;
            }
            Ok(())
        }
        Command::Tessellate { model, out } => {
            let model = load_model(&model)?;
            for p in commands::tessellate_to_dir(&model, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Validate { model } => {
            let model = load_model(&model)?;
            println!("{}", commands::validate_summary(&model).map_err(CliError::invalid)?);
            Ok(())
        }
        Command::Bench {
            model,
            feature,
            role,
            k,
            queries,
            seed,
            scope,
        } => {
            let model = load_model(&model)?;
            let opts = bench::BenchOptions {
                k,
                queries,
                seed,
                scope,
            };
            let r = bench::run(&model, &FaceTag::new(feature, role), &opts).map_err(CliError::invalid)?;
            println!("{r}");
            Ok(())
        }
    }
}

fn server_error(e: vrcad_server::ServerError) -> CliError {
    match e {
        vrcad_server::ServerError::Model(_)
        | vrcad_server::ServerError::Build(_)
        | vrcad_server::ServerError::Config(_) => CliError::invalid(e),
        _ => CliError::runtime(e),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return EXIT_OK;
            }
            let text = e.render().to_string();
            eprint!("{text}");
            if !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return EXIT_USAGE;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
