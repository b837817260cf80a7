use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use planverify_core::replan::LoopConfig;
use planverify_core::translator::{LlmClient, MockLlm, PlannerScript};
use planverify_service::{router, AppState, SessionStore};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Llm {
    Mock,
    Live,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Script {
    Success,
    Failure,
    Garbled,
}

/// Serves the planverify session API.
#[derive(Debug, Parser)]
#[command(name = "planverify-server", version)]
struct Args {
    /// Directory holding one JSON document per session.
    #[arg(long, env = "PLANVERIFY_STORE_DIR", default_value = "sessions")]
    store_dir: PathBuf,
    #[arg(long, env = "PLANVERIFY_BIND_ADDR", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// `live` reads PLANVERIFY_LLM_URL and PLANVERIFY_LLM_KEY.
    #[arg(long, value_enum, default_value = "mock")]
    llm: Llm,
    #[arg(long, value_enum, default_value = "success")]
    mock_script: Script,
    /// Seed for sessions created without one.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn client(args: &Args) -> Result<Arc<dyn LlmClient>, String> {
    match args.llm {
        Llm::Mock => Ok(Arc::new(MockLlm::new(match args.mock_script {
            Script::Success => PlannerScript::Success,
            Script::Failure => PlannerScript::Failure,
            Script::Garbled => PlannerScript::Garbled,
        }))),
        #[cfg(feature = "live")]
        Llm::Live => planverify_core::translator::HttpLlmClient::from_env()
            .map(|c| Arc::new(c) as Arc<dyn LlmClient>)
            .map_err(|e| e.to_string()),
        #[cfg(not(feature = "live"))]
        Llm::Live => Err("built without the `live` feature".into()),
    }
}

#[tokio::main]
async fn main() -> std::process::ExitCode {
    let args = Args::parse();
    let client = match client(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return std::process::ExitCode::from(3);
        }
    };
    let store = match SessionStore::open(&args.store_dir) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return std::process::ExitCode::from(1);
        }
    };
    let defaults = LoopConfig {
        seed: args.seed,
        ..LoopConfig::default()
    };
    let app = router(Arc::new(AppState::new(store, client, defaults)));
    let listener = match tokio::net::TcpListener::bind(args.bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", args.bind);
            return std::process::ExitCode::from(1);
        }
    };
    eprintln!("planverify-server listening on {}", args.bind);
    if let Err(e) = axum::serve(listener, app).await {
        eprintln!("error: {e}");
        return std::process::ExitCode::from(1);
    }
    std::process::ExitCode::SUCCESS
}
