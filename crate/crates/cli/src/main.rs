use std::io::{self, IsTerminal, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shadowtale::script::Session;
use shadowtale_cli::repl::Repl;
use shadowtale_cli::runner::run_scenario;
use shadowtale_cli::{load_engine, read_file, InputError, EXIT_IO};
use shadowtale_service::{ServiceOptions, DEFAULT_PORT, DEFAULT_QUEUE_DEPTH};

#[derive(Parser)]
#[command(
    name = "shadowtale",
    version,
    about = "Narrative memory engine driven by pidgin stories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EngineArgs {
    /// Dictionary file.
    #[arg(long, value_name = "PATH")]
    dict: PathBuf,
    /// `key = value` engine parameters, applied after any preset.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Start from the successor-frequency preset.
    #[arg(long)]
    oracle_mode: bool,
}

impl EngineArgs {
    fn session(&self) -> Result<Session, InputError> {
        load_engine(&self.dict, self.config.as_deref(), self.oracle_mode).map(Session::new)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario file and print the result document.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        /// Write the result here instead of standard output.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Print spike and diffusion updates to standard error.
        #[arg(long)]
        trace: bool,
        /// Human-readable tables instead of JSON.
        #[arg(long)]
        pretty: bool,
    },
    /// Interactive session on standard input.
    Repl {
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Serve the HTTP API.
    Serve {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        /// Directory with the built web UI.
        #[arg(long, value_name = "DIR")]
        ui: Option<PathBuf>,
        /// Mutating requests allowed in flight before 503.
        #[arg(long, default_value_t = DEFAULT_QUEUE_DEPTH)]
        queue_depth: usize,
    },
}

fn fail(message: impl std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn run(
    scenario: &Path,
    engine: &EngineArgs,
    out: Option<&Path>,
    trace: bool,
    pretty: bool,
) -> ExitCode {
    let text = match read_file(scenario) {
        Ok(t) => t,
        Err(e) => return fail(e, EXIT_IO),
    };
    let mut session = match engine.session() {
        Ok(s) => s,
        Err(e) => return fail(e, EXIT_IO),
    };
    let mut stderr = io::stderr().lock();
    let sink: Option<&mut dyn Write> = if trace { Some(&mut stderr) } else { None };
    let report = match run_scenario(&mut session, &text, sink) {
        Ok(r) => r,
        Err(failure) => {
            eprintln!("{}", failure.diagnostic(&scenario.display().to_string()));
            return ExitCode::from(failure.exit_code());
        }
    };
    let rendered = if pretty {
        report.pretty
    } else {
        let mut json = serde_json::to_string_pretty(&report.doc).expect("result serializes");
        json.push('\n');
        json
    };
    let written = match out {
        Some(path) => std::fs::write(path, rendered).map_err(|e| (path.display().to_string(), e)),
        None => io::stdout()
            .write_all(rendered.as_bytes())
            .map_err(|e| ("<stdout>".to_string(), e)),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err((path, e)) => fail(format!("{path}: {e}"), EXIT_IO),
    }
}

fn repl(engine: &EngineArgs) -> ExitCode {
    let session = match engine.session() {
        Ok(s) => s,
        Err(e) => return fail(e, EXIT_IO),
    };
    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let mut repl = Repl::new(session, stdin.lock(), io::stdout().lock()).with_prompt(interactive);
    match repl.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e, EXIT_IO),
    }
}

fn serve(engine: &EngineArgs, addr: SocketAddr, options: ServiceOptions) -> ExitCode {
    let session = match engine.session() {
        Ok(s) => s,
        Err(e) => return fail(e, EXIT_IO),
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => return fail(e, EXIT_IO),
    };
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        shadowtale_service::serve(listener, shadowtale_service::router(session, options)).await
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(format!("{addr}: {e}"), EXIT_IO),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run {
            scenario,
            engine,
            out,
            trace,
            pretty,
        } => run(scenario, engine, out.as_deref(), *trace, *pretty),
        Command::Repl { engine } => repl(engine),
        Command::Serve {
            engine,
            port,
            host,
            ui,
            queue_depth,
        } => serve(
            engine,
            SocketAddr::new(*host, *port),
            ServiceOptions {
                queue_depth: *queue_depth,
                static_dir: ui.clone(),
            },
        ),
    }
}
