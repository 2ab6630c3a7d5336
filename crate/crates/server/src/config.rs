use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Args;
use thiserror::Error;
use triadtale_core::backend::{BackendConfig, ConfigError as BackendConfigError};
use triadtale_core::character::DEFAULT_STYLE_TOKENS;
use triadtale_core::ids::{FixedClock, RandomIds, SequentialIds, SystemClock};
use triadtale_core::pipeline::{ChapterGenerator, PromptSchemas, SchemaError};
use triadtale_core::session::{ScenarioError, ScenarioRegistry};
use triadtale_core::{EngineConfig, EngineError};

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Port to listen on; 0 picks a free one.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Session logs, snapshots and images live here.
    #[arg(long, default_value = "data")]
    pub data_dir: PathBuf,
    /// Directory of scenario `*.toml` files replacing the built-in three.
    #[arg(long)]
    pub scenarios_dir: Option<PathBuf>,
    /// TOML file describing the text and image backends.
    #[arg(long)]
    pub backend_config: Option<PathBuf>,
    /// Use the in-process mock backends whatever the config says.
    #[arg(long)]
    pub mock: bool,
    /// Fixed clock and sequential ids, for reproducible exports.
    #[arg(long)]
    pub deterministic: bool,
    /// Directory holding chapter_1.json .. chapter_4.json prompt schemas.
    #[arg(long)]
    pub prompt_schemas_dir: Option<PathBuf>,
    /// How long shutdown waits for running jobs.
    #[arg(long, default_value_t = 10_000)]
    pub shutdown_grace_ms: u64,
}

impl ServeArgs {
    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.host, self.port)
    }

    pub fn grace(&self) -> Duration {
        Duration::from_millis(self.shutdown_grace_ms)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("scenarios: {0}")]
    Scenarios(#[from] ScenarioError),
    #[error("scenarios: {0} holds no scenario files")]
    NoScenarios(String),
    #[error("backend config: {0}")]
    Backend(#[from] BackendConfigError),
    #[error("prompt schemas: {0}")]
    Schemas(#[from] SchemaError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot open data directory: {0}")]
    Engine(#[from] EngineError),
}

pub fn engine_config(args: &ServeArgs) -> Result<EngineConfig, ConfigError> {
    let scenarios = match &args.scenarios_dir {
        Some(dir) => {
            let registry = ScenarioRegistry::load_dir(dir)?;
            if registry.is_empty() {
                return Err(ConfigError::NoScenarios(dir.display().to_string()));
            }
            registry
        }
        None => ScenarioRegistry::defaults(),
    };
    let mut backends = match &args.backend_config {
        Some(path) => BackendConfig::load(path)?,
        None => BackendConfig::default(),
    };
    if args.mock {
        backends.force_mock();
    }
    let schemas = match &args.prompt_schemas_dir {
        Some(dir) => PromptSchemas::load_dir(dir)?,
        None => PromptSchemas::default(),
    };
    let generator = ChapterGenerator::new(backends.build()?, schemas, backends.pipeline.clone());

    let (clock, ids): (Arc<dyn triadtale_core::ids::Clock>, Arc<dyn triadtale_core::ids::IdSource>) =
        if args.deterministic {
            (Arc::new(FixedClock::default()), Arc::new(SequentialIds::default()))
        } else {
            (Arc::new(SystemClock), Arc::new(RandomIds))
        };
    Ok(EngineConfig {
        data_dir: args.data_dir.clone(),
        scenarios,
        generator,
        clock,
        ids,
        style_tokens: DEFAULT_STYLE_TOKENS.to_string(),
    })
}
