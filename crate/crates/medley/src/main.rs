use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use medley_core::mediator::{ErrorClass, Mediator, MediatorConfig, MediatorError, QueryRequest, Stage};
use medley_core::xsource::FixtureService;

#[derive(Parser)]
#[command(name = "medley", version, about = "Ontology-based mediator over XML data services")]
struct Cli {
    /// Deployment config; the shipped fixtures are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct QueryInput {
    /// Read the query from a file.
    #[arg(long, conflicts_with = "query")]
    file: Option<PathBuf>,
    /// Query text; standard input is read when neither is given.
    #[arg(long)]
    query: Option<String>,
    /// Comma-separated source allow-list.
    #[arg(long, value_delimiter = ',')]
    sources: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Answer a query and print the result.
    Query {
        #[command(flatten)]
        input: QueryInput,
        /// rdf, xml, html or json.
        #[arg(long)]
        format: Option<String>,
        /// Print groups, plan and call counts to standard error.
        #[arg(long)]
        explain: bool,
    },
    /// Print the groups and the plan tree without contacting any source.
    Plan {
        #[command(flatten)]
        input: QueryInput,
        /// Accepted for symmetry with `query`; plan output is always explained.
        #[arg(long)]
        explain: bool,
    },
    /// List the registered sources.
    Sources,
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
    /// Run the daemon for one file-backed source.
    SourceServe {
        /// Registered source name.
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 0)]
        port: u16,
    },
}

fn exit_code(e: &MediatorError) -> ExitCode {
    match (e.stage, e.class) {
        (Stage::Config, _) => ExitCode::from(1),
        (_, ErrorClass::Client) => ExitCode::from(2),
        (_, ErrorClass::Transport) => ExitCode::from(3),
        (_, ErrorClass::Internal) => ExitCode::from(4),
    }
}

fn load(config: &Option<PathBuf>) -> Result<Mediator, MediatorError> {
    match config {
        Some(p) => Mediator::from_config(MediatorConfig::load(p)?),
        None => Ok(Mediator::fixtures()),
    }
}

fn read_query(input: &QueryInput) -> Result<String, String> {
    if let Some(q) = &input.query {
        return Ok(q.clone());
    }
    if let Some(f) = &input.file {
        return std::fs::read_to_string(f).map_err(|e| format!("{}: {e}", f.display()));
    }
    let mut s = String::new();
    std::io::stdin().read_to_string(&mut s).map_err(|e| e.to_string())?;
    Ok(s)
}

fn report(e: &MediatorError) -> ExitCode {
    match e.position {
        Some(p) => eprintln!("error [{:?}] at {p}: {}", e.stage, e.message),
        None => eprintln!("error [{:?}]: {}", e.stage, e.message),
    }
    exit_code(e)
}

fn run_server(addr: String, router: axum::Router) -> ExitCode {
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    };
    rt.block_on(async move {
        let listener = match tokio::net::TcpListener::bind(&addr).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: cannot listen on {addr}: {e}");
                return ExitCode::from(1);
            }
        };
        if let Ok(a) = listener.local_addr() {
            eprintln!("listening on http://{a}");
        }
        match medley_server::serve(listener, router).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(4)
            }
        }
    })
}

fn with_port(listen: &str, port: Option<u16>) -> String {
    match port {
        Some(p) => {
            let host = listen.rsplit_once(':').map_or(listen, |(h, _)| h);
            format!("{host}:{p}")
        }
        None => listen.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Query { input, format, explain } => {
            let m = match load(&cli.config) {
                Ok(m) => m,
                Err(e) => return report(&e),
            };
            let text = match read_query(&input) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let req = QueryRequest {
                query: text,
                keyword: None,
                sources: input.sources,
                format,
                explain,
            };
            match m.handle_query(&req) {
                Ok(r) => {
                    if explain {
                        eprintln!("{}\n{}", r.diagnostics.groups_text, r.diagnostics.plan_text);
                        for (s, n) in &r.diagnostics.calls_per_source {
                            eprintln!("calls {s}: {n}");
                        }
                    }
                    print!("{}", r.body);
                    ExitCode::SUCCESS
                }
                Err(e) => report(&e),
            }
        }
        Command::Plan { input, explain: _ } => {
            let m = match load(&cli.config) {
                Ok(m) => m,
                Err(e) => return report(&e),
            };
            let text = match read_query(&input) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match m.explain(&text, &input.sources) {
                Ok(out) => {
                    print!("{out}");
                    ExitCode::SUCCESS
                }
                Err(e) => report(&e),
            }
        }
        Command::Sources => match load(&cli.config) {
            Ok(m) => {
                for s in m.sources_info() {
                    println!("{}\t{}\t{}\t{}", s.name, s.endpoint, s.schema_id, s.description);
                }
                ExitCode::SUCCESS
            }
            Err(e) => report(&e),
        },
        Command::Serve { port } => {
            let m = match load(&cli.config) {
                Ok(m) => m,
                Err(e) => return report(&e),
            };
            let addr = with_port(&m.config().listen, port);
            run_server(addr, medley_server::api_router(Arc::new(m)))
        }
        Command::SourceServe { name, port } => {
            let svc = match &cli.config {
                Some(p) => MediatorConfig::load(p).and_then(|c| {
                    let dir = c.registry.parent().unwrap_or(Path::new(".")).join(&name);
                    FixtureService::from_dir(&name, &dir).map_err(|e| {
                        MediatorError {
                            stage: Stage::Config,
                            class: ErrorClass::Internal,
                            message: e.to_string(),
                            position: None,
                        }
                    })
                }),
                None => match medley_core::fixtures::source(&name) {
                    Some(_) => Ok(medley_core::fixtures::service(&name)),
                    None => {
                        eprintln!("error: no shipped source named `{name}`");
                        return ExitCode::from(1);
                    }
                },
            };
            match svc {
                Ok(svc) => {
                    let svc = svc.with_endpoint(format!("http://127.0.0.1:{port}"));
                    run_server(format!("127.0.0.1:{port}"), medley_server::source_router(Arc::new(svc)))
                }
                Err(e) => report(&e),
            }
        }
    }
}
