//! Configuration: built-in defaults, then a TOML file, then environment
//! variables. Command-line flags are applied by the caller.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use geopub_core::protocol::BackendProfile;
use serde::Deserialize;

pub const DEFAULT_PROFILE: &str = "figshare-like";
pub const ENV_CONFIG: &str = "GEOPUB_CONFIG";
pub const ENV_CACHE: &str = "GEOPUB_CACHE";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Snapshot of the process environment, so tests can supply their own.
#[derive(Debug, Clone, Default)]
pub struct Env(BTreeMap<String, String>);

impl Env {
    pub fn from_process() -> Self {
        Env(std::env::vars().collect())
    }

    pub fn from_pairs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Env(pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub profiles: BTreeMap<String, BackendProfile>,
    pub default_profile: String,
    pub cache_path: PathBuf,
    /// The config file that was read, if any.
    pub source: Option<PathBuf>,
}

impl CliConfig {
    pub fn defaults() -> Self {
        let mut profiles = BTreeMap::new();
        for p in [
            BackendProfile::figshare_like("http://127.0.0.1:8080", ""),
            BackendProfile::zenodo_like("http://127.0.0.1:8081", ""),
        ] {
            profiles.insert(p.name.clone(), p);
        }
        CliConfig {
            profiles,
            default_profile: DEFAULT_PROFILE.to_string(),
            cache_path: default_cache_path(),
            source: None,
        }
    }

    pub fn profile_names(&self) -> Vec<&str> {
        self.profiles.keys().map(String::as_str).collect()
    }
}

fn default_cache_path() -> PathBuf {
    dirs::cache_dir()
        .map(|d| d.join("geopub"))
        .unwrap_or_else(|| PathBuf::from(".geopub"))
        .join("dois.json")
}

fn default_config_path() -> Option<PathBuf> {
    dirs::config_dir().map(|d| d.join("geopub").join("config.toml"))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub default_profile: Option<String>,
    pub cache_path: Option<PathBuf>,
    #[serde(default)]
    pub profile: BTreeMap<String, FileProfile>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileProfile {
    pub base_url: Option<String>,
    pub can_search: Option<bool>,
    pub token: Option<String>,
}

/// Parses config file text; `path` is only used in diagnostics.
pub fn parse_config_str(text: &str, path: &Path) -> Result<FileConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(1);
        ConfigError::Parse {
            path: path.to_path_buf(),
            line,
            message: e.message().to_string(),
        }
    })
}

fn apply_file(cfg: &mut CliConfig, file: FileConfig, path: &Path) -> Result<(), ConfigError> {
    if let Some(p) = file.default_profile {
        cfg.default_profile = p;
    }
    if let Some(c) = file.cache_path {
        cfg.cache_path = c;
    }
    for (name, fp) in file.profile {
        let profile = match cfg.profiles.remove(&name) {
            Some(existing) => existing,
            None => {
                let Some(url) = &fp.base_url else {
                    return Err(ConfigError::Invalid(format!(
                        "{}: profile '{name}' needs a base_url",
                        path.display()
                    )));
                };
                BackendProfile {
                    name: name.clone(),
                    base_url: url.clone(),
                    can_search: false,
                    auth_token: String::new(),
                }
            }
        };
        let mut profile = profile;
        if let Some(url) = fp.base_url {
            profile.base_url = url;
        }
        if let Some(s) = fp.can_search {
            profile.can_search = s;
        }
        if let Some(t) = fp.token {
            profile.auth_token = t;
        }
        cfg.profiles.insert(name, profile);
    }
    Ok(())
}

/// Looks up a profile token: `GEOPUB_TOKEN_<NAME>` with the name uppercased,
/// then the same with `-` and `.` replaced by `_` for shells that cannot set
/// the first form.
pub fn env_token<'a>(env: &'a Env, profile: &str) -> Option<&'a str> {
    let exact = BackendProfile::token_env_var(profile);
    let portable = exact.replace(['-', '.'], "_");
    env.get(&exact).or_else(|| env.get(&portable))
}

/// Builds the effective configuration. An explicit `GEOPUB_CONFIG` must
/// exist; the platform default is optional.
pub fn load_config(env: &Env) -> Result<CliConfig, ConfigError> {
    let mut cfg = CliConfig::defaults();
    let (path, required) = match env.get(ENV_CONFIG).filter(|p| !p.is_empty()) {
        Some(p) => (Some(PathBuf::from(p)), true),
        None => (default_config_path(), false),
    };
    if let Some(path) = path {
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                let file = parse_config_str(&text, &path)?;
                apply_file(&mut cfg, file, &path)?;
                cfg.source = Some(path);
            }
            Err(e) if !required && e.kind() == std::io::ErrorKind::NotFound => {}
            Err(source) => return Err(ConfigError::Io { path, source }),
        }
    }
    for (name, profile) in cfg.profiles.iter_mut() {
        if let Some(t) = env_token(env, name) {
            profile.auth_token = t.to_string();
        }
    }
    if let Some(c) = env.get(ENV_CACHE).filter(|c| !c.is_empty()) {
        cfg.cache_path = PathBuf::from(c);
    }
    if !cfg.profiles.contains_key(&cfg.default_profile) {
        return Err(ConfigError::Invalid(format!(
            "default_profile '{}' is not a configured profile (have: {})",
            cfg.default_profile,
            cfg.profile_names().join(", ")
        )));
    }
    Ok(cfg)
}
