//! The chat-model backend driven by an offline transport, showing the prompts
//! each agent role sends and how replies are parsed.
//!
//! cargo run --example chat_backend

use std::sync::Mutex;

use asset_scout::backend::http::{ChatBackend, ChatRequest, ChatTransport};
use asset_scout::backend::{Agents, BackendError};
use asset_scout::model::Language;
use asset_scout::orchestrator::{run, ClockMode, RunConfig};

/// Answers each role with a fixed reply and keeps a log of the prompts.
struct Offline {
    log: Mutex<Vec<ChatRequest>>,
}

impl ChatTransport for Offline {
    fn complete(&self, req: &ChatRequest) -> Result<String, BackendError> {
        self.log.lock().unwrap().push(req.clone());
        let reply = match req.label.as_str() {
            "investigator" => r#"{"leads": [{"name": "HRS-2261", "source_url": "https://example.org/a"},
                                            {"name": "ABX-17", "source_url": "https://example.org/b"}],
                                 "executed_queries": ["TSHR antibody phase 1"], "visited_domains": ["example.org"]}"#,
            "validator" => r#"{"is_match": true}"#,
            "deduplicator" => r#"{"groups": [{"members": [0], "canonical_name": "HRS-2261"}, {"members": [1], "canonical_name": "ABX-17"}]}"#,
            "coach" => r#"{"children": [{"directive": "Chinese biotech pipelines"}, {"directive": "conference abstracts"}]}"#,
            _ => "ok",
        };
        Ok(reply.into())
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let chat = ChatBackend::new(Offline { log: Mutex::new(Vec::new()) });
    let agents = Agents { investigator: &chat, validator: &chat, deduplicator: &chat, coach: &chat };
    let config = RunConfig {
        query: "TSHR-targeting antibodies in clinical development".into(),
        epochs: 2,
        k: 2,
        languages: vec![Language::english()],
        clock: ClockMode::Simulated,
        ..RunConfig::default()
    };
    let state = run(&config, agents, |_, _| {})?;
    println!("assets: {:?}", state.store.canonical_names());
    println!("{}", state.tree.render());

    let log = chat.transport.log.lock().unwrap();
    println!("{} model calls", log.len());
    if let Some(first) = log.iter().find(|r| r.label == "investigator") {
        println!("\nfirst investigator prompt:\n{}", first.user);
    }
    Ok(())
}
