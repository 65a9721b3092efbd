#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sciwrite_lint_core::config::Config;
use sciwrite_lint_core::pipeline::{run_check, CheckInput, CheckOutcome, Services};
use sciwrite_lint_core::registry::ratelimit::{RetryPolicy, SimClock};
use sciwrite_lint_core::registry::replay::ReplayTransport;
use sciwrite_lint_core::registry::retraction::{RetractionIndex, SNAPSHOT_FILE_NAME};
use sciwrite_lint_core::registry::sim::SimulatedRegistry;
use sciwrite_lint_core::registry::transport::{RecordingTransport, Transport};
use sciwrite_lint_core::registry::{CanonicalRecord, Gateway, GatewayOptions};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn registry_records() -> Vec<CanonicalRecord> {
    let text = fs::read_to_string(fixtures().join("paper/registry.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Copy the fixture paper into `dst` and return the main file path.
pub fn copy_paper(dst: &Path) -> PathBuf {
    let src = fixtures().join("paper");
    fs::create_dir_all(dst.join("sections")).unwrap();
    for f in ["main.tex", "refs.bib", "sections/intro.tex"] {
        fs::copy(src.join(f), dst.join(f)).unwrap();
    }
    dst.join("main.tex")
}

pub fn fast_options() -> GatewayOptions {
    GatewayOptions {
        requests_per_second: 1000.0,
        retry: RetryPolicy {
            jitter: 0.0,
            ..RetryPolicy::default()
        },
        ..GatewayOptions::default()
    }
}

/// A gateway over `transport` whose backoff sleeps are simulated.
pub fn gateway(transport: Box<dyn Transport>) -> Gateway {
    Gateway::with_clock(transport, fast_options(), Arc::new(SimClock::new())).unwrap()
}

pub fn snapshot() -> Result<RetractionIndex, String> {
    RetractionIndex::load(&fixtures().join("paper").join(SNAPSHOT_FILE_NAME)).map_err(|e| e.to_string())
}

pub fn sim_services(sim: SimulatedRegistry) -> (Services, Arc<RecordingTransport<SimulatedRegistry>>) {
    let rec = Arc::new(RecordingTransport::new(sim));
    let services = Services {
        gateway: Some(gateway(Box::new(rec.clone()))),
        gateway_note: None,
        retractions: snapshot(),
    };
    (services, rec)
}

/// Run the paper against the simulated registries, recording every
/// response into `replay_dir`.
pub fn record_run(main: &Path, replay_dir: &Path) -> (CheckOutcome, Arc<RecordingTransport<SimulatedRegistry>>) {
    let rec = Arc::new(RecordingTransport::new(SimulatedRegistry::new(registry_records())));
    let transport = ReplayTransport::record(replay_dir, Box::new(rec.clone()));
    let services = Services {
        gateway: Some(gateway(Box::new(transport))),
        gateway_note: None,
        retractions: snapshot(),
    };
    let outcome = run_check(&input(main), &Config::default(), &services).unwrap();
    (outcome, rec)
}

/// Services that replay `replay_dir` without any network.
pub fn replay_services(replay_dir: &Path) -> Services {
    Services {
        gateway: Some(gateway(Box::new(ReplayTransport::replay(replay_dir)))),
        gateway_note: None,
        retractions: snapshot(),
    }
}

pub fn input(main: &Path) -> CheckInput {
    CheckInput {
        main: main.to_owned(),
        ..CheckInput::default()
    }
}
