// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use defectchain_core::gateway::{default_rules, Gateway, ImportanceTable, LedgerClient, RuleSet, Submitter};
use defectchain_core::harness::{self, demo_members, demo_registry, ReportFormat, Scenario, CHANNEL_ID, GATEWAY_ORG};
use defectchain_core::ledger::{verify_persisted, OrgRegistry};
use defectchain_core::raft::{NodeId, RaftConfig};
use defectchain_core::telemetry::{build_default_world, read_ndjson, SimScenario};
use defectchain_core::TICK_MS;
use defectchain_server::http_client::HttpLedger;
use defectchain_server::multiprocess::run_multi_process;
use defectchain_server::orderer::{serve_orderer, OrdererOptions};
use defectchain_server::server::{self, ServeOptions, SimSetup};

#[derive(Parser)]
#[command(name = "defectchain", version, about = "Defect ledger for a simulated factory cell and shipment")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    InProcess,
    MultiProcess,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryKind {
    Shipment,
    Sensor,
}

#[derive(clap::Args)]
struct Credentials {
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    api_url: String,
    #[arg(long, default_value = GATEWAY_ORG)]
    org: String,
    /// Defaults to the org's secret in the demo registry.
    #[arg(long)]
    secret: Option<String>,
}

impl Credentials {
    fn secret(&self) -> Result<String, String> {
        match &self.secret {
            Some(s) => Ok(s.clone()),
            None => demo_registry()
                .secret(&self.org)
                .map(|s| s.expose().to_string())
                .ok_or_else(|| format!("no --secret given and {} is not a demo org", self.org)),
        }
    }

    fn login(&self) -> Result<(HttpLedger, String), String> {
        let mut client = HttpLedger::new(&self.api_url, Duration::from_secs(30));
        let token = client.register(&self.org, &self.secret()?).map_err(|e| format!("register: {e}"))?;
        Ok((client, token))
    }
}

#[derive(clap::Args)]
struct LedgerArgs {
    /// Org registry JSON (org id to secret). Defaults to the demo orgs.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Channel member orgs, comma separated.
    #[arg(long, value_delimiter = ',')]
    members: Vec<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    commit_timeout_ms: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// API server, in-process three-node orderer and the simulated cell.
    Up {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[command(flatten)]
        ledger: LedgerArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Simulation speed relative to real time.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Start the cell immediately.
        #[arg(long)]
        autostart: bool,
    },
    /// Runs a bundled scenario by name, or a scenario file.
    Run {
        scenario: String,
        #[arg(long, value_enum, default_value = "in-process")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Prints the committed defects for a shipment or sensor.
    Query {
        #[arg(value_enum)]
        kind: QueryKind,
        id: String,
        #[command(flatten)]
        creds: Credentials,
    },
    /// Verifies a chain file offline, or the server's chain.
    Verify {
        #[arg(long)]
        chain: Option<PathBuf>,
        #[arg(long, requires = "chain")]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[command(flatten)]
        creds: Credentials,
    },
    /// Runs the shipment scenario, then serves the live demo.
    Demo {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
    },
    /// One orderer node.
    Orderer {
        #[arg(long)]
        id: NodeId,
        #[arg(long)]
        listen: SocketAddr,
        /// Another node, as ID=HOST:PORT. Repeat for each peer.
        #[arg(long = "peer", value_parser = parse_node)]
        peers: Vec<(NodeId, SocketAddr)>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// API server against remote orderer nodes.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// An orderer node, as ID=HOST:PORT. Without any, a local cluster
        /// runs in this process.
        #[arg(long = "orderer", value_parser = parse_node)]
        orderers: Vec<(NodeId, SocketAddr)>,
        #[command(flatten)]
        ledger: LedgerArgs,
        /// Also expose the simulated cell under /api/sim.
        #[arg(long)]
        sim: bool,
    },
    /// Edge gateway: simulates (or reads) telemetry, filters it and posts
    /// defects to the API.
    Gateway {
        #[arg(long)]
        rules: Option<PathBuf>,
        /// NDJSON readings instead of the built-in simulator.
        #[arg(long)]
        readings: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 600)]
        ticks: u64,
        #[command(flatten)]
        creds: Credentials,
    },
}

fn parse_node(s: &str) -> Result<(NodeId, SocketAddr), String> {
    let (id, addr) = s.split_once('=').ok_or("expected ID=HOST:PORT")?;
    Ok((id.parse().map_err(|e| format!("bad id: {e}"))?, addr.parse().map_err(|e| format!("bad address: {e}"))?))
}

fn load_registry(path: Option<&Path>) -> Result<OrgRegistry, String> {
    match path {
        None => Ok(demo_registry()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            OrgRegistry::from_json(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

fn serve_options(listen: SocketAddr, ledger: &LedgerArgs) -> Result<ServeOptions, String> {
    let members: BTreeSet<String> =
        if ledger.members.is_empty() { demo_members() } else { ledger.members.iter().cloned().collect() };
    let mut opts = ServeOptions::new(listen, load_registry(ledger.registry.as_deref())?, CHANNEL_ID, members);
    opts.data_dir = ledger.data_dir.clone();
    opts.app.commit_timeout = Duration::from_millis(ledger.commit_timeout_ms);
    Ok(opts)
}

fn default_ruleset() -> RuleSet {
    let world = build_default_world(0);
    RuleSet::new(default_rules(world.roster()), &ImportanceTable::default()).expect("default rules are valid")
}

fn sim_setup(seed: u64, speed: f64) -> SimSetup {
    let speed = if speed.is_finite() && speed > 0.0 { speed } else { 1.0 };
    SimSetup {
        world: build_default_world(seed),
        rules: default_ruleset(),
        step: Duration::from_secs_f64(TICK_MS as f64 / 1000.0 / speed),
        org: GATEWAY_ORG.to_string(),
    }
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("tokio runtime")
}

async fn serve_forever(opts: ServeOptions, autostart: bool) -> Result<(), String> {
    let running = server::start(opts).await.map_err(|e| format!("server: {e}"))?;
    if autostart {
        if let Some(sim) = running.state.sim() {
            sim.start();
        }
    }
    println!("api listening on {}", running.url());
    tokio::signal::ctrl_c().await.map_err(|e| e.to_string())?;
    Ok(())
}

fn run(cmd: Cmd) -> Result<i32, String> {
    match cmd {
        Cmd::Up { listen, ledger, seed, speed, autostart } => {
            let mut opts = serve_options(listen, &ledger)?;
            opts.seed = seed;
            opts.sim = Some(sim_setup(seed, speed));
            runtime().block_on(serve_forever(opts, autostart))?;
            Ok(0)
        }
        Cmd::Serve { listen, orderers, ledger, sim } => {
            let mut opts = serve_options(listen, &ledger)?;
            opts.orderers = orderers.into_iter().collect();
            if sim {
                opts.sim = Some(sim_setup(1, 1.0));
            }
            runtime().block_on(serve_forever(opts, false))?;
            Ok(0)
        }
        Cmd::Orderer { id, listen, peers, data_dir, seed } => {
            let opts = OrdererOptions {
                id,
                listen,
                peers: peers.into_iter().collect::<BTreeMap<_, _>>(),
                data_dir,
                raft: RaftConfig::default(),
                tick: Duration::from_millis(1),
                seed,
            };
            runtime().block_on(serve_orderer(opts)).map_err(|e| format!("orderer {id}: {e}"))?;
            Ok(0)
        }
        Cmd::Run { scenario, mode, format } => {
            let scenario = match Scenario::resolve(&scenario) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(e.exit_code());
                }
            };
            let result = match mode {
                ModeArg::InProcess => harness::run_in_process(&scenario),
                ModeArg::MultiProcess => {
                    let bin = std::env::current_exe().map_err(|e| e.to_string())?;
                    run_multi_process(&scenario, &bin)
                }
            };
            match result {
                Ok(report) => {
                    let fmt = match format {
                        FormatArg::Text => ReportFormat::Text,
                        FormatArg::Json => ReportFormat::Json,
                    };
                    print!("{}", harness::report(&report, fmt));
                    Ok(report.exit_code())
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(e.exit_code())
                }
            }
        }
        Cmd::Query { kind, id, creds } => {
            let (client, token) = creds.login()?;
            let path = match kind {
                QueryKind::Shipment => format!("/api/defects/shipment/{id}"),
                QueryKind::Sensor => format!("/api/defects/sensor/{id}"),
            };
            let (status, body) = client.get(&path, Some(&token)).map_err(|e| e.to_string())?;
            println!("{}", String::from_utf8_lossy(&body));
            Ok(if status == 200 { 0 } else { 1 })
        }
        Cmd::Verify { chain, snapshot, registry, creds } => {
            let report = match chain {
                Some(path) => {
                    let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                    let snap = match snapshot {
                        Some(p) => Some(std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()))?),
                        None => None,
                    };
                    verify_persisted(&bytes, snap.as_deref(), Arc::new(load_registry(registry.as_deref())?))
                }
                None => {
                    let (client, token) = creds.login()?;
                    client.verify(&token).map_err(|e| e.to_string())?
                }
            };
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            Ok(if report.ok { 0 } else { 1 })
        }
        Cmd::Demo { listen } => {
            let scenario = Scenario::resolve("shipment-tilt").map_err(|e| e.to_string())?;
            let report = harness::run_in_process(&scenario).map_err(|e| e.to_string())?;
            print!("{}", harness::report(&report, ReportFormat::Text));
            let mut opts = ServeOptions::new(listen, demo_registry(), CHANNEL_ID, demo_members());
            opts.sim = Some(sim_setup(scenario.file.world.seed, 1.0));
            println!("dashboard: open ops-dashboard with API base http://{listen} and log in as Org1 or Org2");
            runtime().block_on(serve_forever(opts, true))?;
            Ok(0)
        }
        Cmd::Gateway { rules, readings, seed, ticks, creds } => {
            let ruleset = match rules {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
                    RuleSet::from_json(&text, &ImportanceTable::default()).map_err(|e| e.to_string())?
                }
                None => default_ruleset(),
            };
            let scenario =
                SimScenario { seed, duration_ticks: ticks, constants: Default::default(), injections: vec![] };
            let stream = match readings {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
                    read_ndjson(&text).map_err(|e| e.to_string())?
                }
                None => scenario.run().map_err(|e| e.to_string())?,
            };
            let mut gateway = Gateway::new(ruleset, scenario.constants.shipment_id.clone());
            let records = gateway.run(&stream).map_err(|e| e.to_string())?;
            let client = HttpLedger::new(&creds.api_url, Duration::from_secs(30));
            let mut submitter =
                Submitter::new(client, creds.org.clone(), creds.secret()?).with_retry(20, Duration::from_millis(500));
            for rec in records {
                match submitter.submit(rec) {
                    Ok(r) => println!("{} {:?} block={:?}", r.record_id, r.status, r.block_number),
                    Err(e) => eprintln!("{e}"),
                }
            }
            let left = submitter.pending().len();
            if left > 0 {
                return Err(format!("{left} record(s) not delivered"));
            }
            Ok(if submitter.rejected().is_empty() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
