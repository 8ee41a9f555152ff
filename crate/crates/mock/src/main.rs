use std::path::PathBuf;
use std::sync::mpsc;

use clap::Parser;
use geopub_mock::{Listen, ServiceConfig};

/// Local deposition service for offline runs of geopub.
#[derive(Parser, Debug)]
#[command(name = "geopub-mock", version)]
struct Args {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// figshare-like (searchable) or zenodo-like (no search)
    #[arg(long, default_value = "figshare-like")]
    profile: String,
    /// Load state from FILE at startup and save it there on exit.
    #[arg(long, value_name = "FILE")]
    snapshot: Option<PathBuf>,
    /// Accept only this token instead of any non-empty one (also GEOPUB_MOCK_TOKEN).
    #[arg(long)]
    require_token: Option<String>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let Some(mut config) = ServiceConfig::for_profile(&args.profile) else {
        eprintln!(
            "geopub-mock: unknown profile '{}'; expected figshare-like or zenodo-like",
            args.profile
        );
        std::process::exit(2);
    };
    config.required_token = args
        .require_token
        .or_else(|| std::env::var("GEOPUB_MOCK_TOKEN").ok());
    let listen = Listen::Addr(format!("{}:{}", args.host, args.port));
    let started = match &args.snapshot {
        Some(path) => geopub_mock::start_with_snapshot(config, listen, path),
        None => geopub_mock::start(config, listen),
    };
    let server = match started {
        Ok(s) => s,
        Err(e) => {
            eprintln!("geopub-mock: {e}");
            std::process::exit(1);
        }
    };
    println!("listening on {}", server.base_url());

    let (tx, rx) = mpsc::channel();
    if let Err(e) = ctrlc::set_handler(move || {
        let _ = tx.send(());
    }) {
        eprintln!("geopub-mock: cannot install signal handler: {e}");
        std::process::exit(1);
    }
    let _ = rx.recv();
    if let Err(e) = server.shutdown() {
        eprintln!("geopub-mock: saving snapshot failed: {e}");
        std::process::exit(1);
    }
}
