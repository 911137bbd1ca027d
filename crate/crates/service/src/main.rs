use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use conceptlens::api::{self, AppState};
use conceptlens::fixture::{Fixture, FixtureSpec};
use conceptlens::queue::{default_workers, Queue};
use conceptlens::{local, Store};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "conceptlens", version, about = "Latent concept analysis service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the REST API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "CONCEPTLENS_DATA_DIR", default_value = "conceptlens-data")]
        data_dir: PathBuf,
        /// Pipeline workers; defaults to half the hardware threads.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the pipeline over an artifact directory and write the results as JSON.
    RunLocal {
        #[arg(long)]
        artifacts: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Store used for the run; a fresh one under `<out>/store` by default.
        #[arg(long, env = "CONCEPTLENS_DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value = "local")]
        name: String,
    },
    /// Write the synthetic fixture as an artifact directory.
    GenerateFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = FixtureSpec::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = FixtureSpec::default().sentences)]
        sentences: usize,
        #[arg(long, default_value_t = FixtureSpec::default().dim)]
        dim: usize,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Serve {
            host,
            port,
            data_dir,
            workers,
        } => serve(host, port, data_dir, workers.unwrap_or_else(default_workers)),
        Command::RunLocal {
            artifacts,
            out,
            data_dir,
            name,
        } => {
            let store = Store::open(data_dir.unwrap_or_else(|| out.join("store")))?;
            let project = local::run_local(&store, &artifacts, &out, &name)?;
            println!("{}", serde_json::to_string(&conceptlens::views::status(&project))?);
            Ok(())
        }
        Command::GenerateFixture {
            out,
            seed,
            sentences,
            dim,
        } => {
            let spec = FixtureSpec {
                seed,
                sentences,
                dim,
                ..FixtureSpec::default()
            };
            Fixture::generate(spec).write_dir(&out)?;
            println!("{}", out.display());
            Ok(())
        }
    }
}

fn serve(host: String, port: u16, data_dir: PathBuf, workers: usize) -> anyhow::Result<()> {
    let store = Arc::new(Store::open(&data_dir).with_context(|| format!("opening {}", data_dir.display()))?);
    let queue = Arc::new(Queue::start(store.clone(), workers));
    let resumed = queue.recover(&store)?;
    tracing::info!(data_dir = %data_dir.display(), workers, resumed, "store opened");

    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        api::serve(listener, AppState { store, queue }, shutdown_signal()).await?;
        anyhow::Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        if let Ok(mut s) = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            s.recv().await;
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
