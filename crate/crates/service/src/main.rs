use clap::Parser;
use hidss_service::cli::{run, Cli};
use tracing_subscriber::EnvFilter;

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("HIDSS_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    run(Cli::parse())
}
