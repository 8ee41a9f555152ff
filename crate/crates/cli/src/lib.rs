//! The `geopub` command line.
//!
//! ```text
//! geopub publish data --project PATH [--mesh PATH] [--service NAME] [--private]
//!                     [--related-software-doi DOI] [--dry-run] [--title T] [--description D]
//! geopub publish software --source DIR [--service NAME] [--private] [--no-cache]
//! ```
//!
//! Exit codes: 0 success, 1 other failure, 2 usage or configuration,
//! 3 unparsable input, 4 missing files, 5 service error.

pub mod config;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use geopub_core::cache::DoiCache;
use geopub_core::manifest::ManifestError;
use geopub_core::orchestrator::{self, DataRequest, PublishError, SoftwareRequest};
use geopub_core::protocol::{BackendProfile, PublicationResult, RepoClient};
use geopub_core::vcs_info::VcsError;

pub use config::{load_config, CliConfig, ConfigError, Env};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_MISSING: i32 = 4;
pub const EXIT_SERVICE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "geopub", version, about = "Publish QGIS project data and software versions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Publish to a deposition service
    #[command(subcommand)]
    Publish(Publish),
}

#[derive(Debug, Subcommand)]
enum Publish {
    /// Publish a QGIS project's input data
    Data(DataArgs),
    /// Publish a source tree at its current version
    Software(SoftwareArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// QGIS project file (.qgs)
    #[arg(long)]
    project: PathBuf,
    /// Mesh file to include
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Service profile name
    #[arg(long)]
    service: Option<String>,
    /// Reserve the DOI without making the deposition public
    #[arg(long)]
    private: bool,
    /// DOI of the software used to produce the data
    #[arg(long, value_name = "DOI")]
    related_software_doi: Option<String>,
    /// Print the manifest and exit without contacting the service
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    description: Option<String>,
}

#[derive(Debug, Args)]
struct SoftwareArgs {
    /// Source directory
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    service: Option<String>,
    #[arg(long)]
    private: bool,
    /// Do not read or write the local DOI cache
    #[arg(long)]
    no_cache: bool,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, env: &Env, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let cfg = match load_config(env) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    match cli.command {
        Command::Publish(Publish::Data(a)) => publish_data(&cfg, a, out, err),
        Command::Publish(Publish::Software(a)) => publish_software(&cfg, a, out, err),
    }
}

fn select_profile<'a>(cfg: &'a CliConfig, name: Option<&str>, err: &mut dyn Write) -> Option<&'a BackendProfile> {
    let name = name.unwrap_or(&cfg.default_profile);
    let found = cfg.profiles.get(name);
    if found.is_none() {
        let _ = writeln!(
            err,
            "error: unknown service '{name}'; configured profiles: {}",
            cfg.profile_names().join(", ")
        );
    }
    found
}

fn print_result(out: &mut dyn Write, r: &PublicationResult) {
    let _ = writeln!(out, "Publication ID: {}", r.publication_id);
    let _ = writeln!(out, "DOI: {}", r.doi);
}

pub fn exit_code(e: &PublishError) -> i32 {
    match e {
        PublishError::Project(_) => EXIT_PARSE,
        PublishError::Vcs(VcsError::AuthorsFormat { .. } | VcsError::Io { .. }) => EXIT_PARSE,
        PublishError::Manifest(ManifestError::Missing { .. }) => EXIT_MISSING,
        PublishError::Manifest(ManifestError::Io { .. }) => EXIT_OTHER,
        PublishError::Protocol(_) | PublishError::Abandoned { .. } => EXIT_SERVICE,
        PublishError::Cache(_) | PublishError::Io { .. } => EXIT_OTHER,
    }
}

fn fail(err: &mut dyn Write, e: &PublishError) -> i32 {
    let _ = writeln!(err, "error: {e}");
    if let PublishError::Manifest(ManifestError::Missing { paths }) = e {
        for p in paths {
            let _ = writeln!(err, "  missing: {}", p.display());
        }
    }
    exit_code(e)
}

fn open_cache(cfg: &CliConfig) -> Result<DoiCache, PublishError> {
    Ok(DoiCache::open(&cfg.cache_path)?)
}

fn publish_data(cfg: &CliConfig, a: DataArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(profile) = select_profile(cfg, a.service.as_deref(), err) else {
        return EXIT_USAGE;
    };
    let req = DataRequest {
        project_path: a.project,
        mesh_path: a.mesh,
        private: a.private,
        title: a.title,
        description: a.description,
        related_software_doi: a.related_software_doi,
        workers: None,
    };
    if a.dry_run {
        return match orchestrator::prepare_data(&req) {
            Ok(p) => {
                let _ = writeln!(out, "{}", p.manifest.to_json());
                EXIT_OK
            }
            Err(e) => fail(err, &e),
        };
    }
    // The cache only records data DOIs; publishing goes ahead without it.
    let mut cache = match open_cache(cfg) {
        Ok(c) => Some(c),
        Err(e) => {
            let _ = writeln!(err, "warning: not recording DOI: {e}");
            None
        }
    };
    let client = RepoClient::new(profile.clone());
    match orchestrator::publish_data(&client, &req, cache.as_mut()) {
        Ok(o) => {
            print_result(out, &o.result);
            EXIT_OK
        }
        Err(e) => fail(err, &e),
    }
}

fn publish_software(cfg: &CliConfig, a: SoftwareArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(profile) = select_profile(cfg, a.service.as_deref(), err) else {
        return EXIT_USAGE;
    };
    let mut cache = None;
    if !a.no_cache {
        match open_cache(cfg) {
            Ok(c) => cache = Some(c),
            Err(e) => return fail(err, &e),
        }
    }
    let req = SoftwareRequest {
        source_dir: a.source,
        private: a.private,
        use_cache: !a.no_cache,
    };
    let client = RepoClient::new(profile.clone());
    match orchestrator::publish_software(&client, &req, cache.as_mut()) {
        Ok(o) => {
            if o.version.dirty {
                let _ = writeln!(
                    err,
                    "warning: {} is dirty (uncommitted changes to tracked files); version recorded as {}",
                    o.version.source_dir.display(),
                    o.version.version_id()
                );
            }
            if o.reused {
                let _ = writeln!(out, "Reusing existing publication.");
            }
            print_result(out, &o.result);
            EXIT_OK
        }
        Err(e) => fail(err, &e),
    }
}
