use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use triadtale_server::{bind, shutdown_signal, ServeArgs};

#[derive(Parser)]
#[command(name = "triadtale", version, about = "Four-chapter group storytelling service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Score pre/post questionnaires and print a report.
    Analyze {
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        out: OutputFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Md,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Serve(args) => serve(args),
        Command::Analyze { pre, post, out } => analyze(&pre, &post, out),
    }
}

fn serve(args: ServeArgs) -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    runtime.block_on(async {
        let (addr, run) = match bind(&args, shutdown_signal()).await {
            Ok(bound) => bound,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        match run.await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        }
    })
}

fn analyze(pre: &std::path::Path, post: &std::path::Path, out: OutputFormat) -> ExitCode {
    let report = match triadtale_analytics::analyze_workshop_files(pre, post) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let text = match out {
        OutputFormat::Json => serde_json::to_string_pretty(&report).expect("reports serialize") + "\n",
        OutputFormat::Md => report.to_markdown(),
    };
    print!("{text}");
    ExitCode::SUCCESS
}
