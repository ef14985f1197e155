//! Operator entry point: provisioning, protocol runs, benchmarks,
//! verification suites, and circuit inspection.
//!
//! Exit codes: 0 on success, 1 when a verification or protocol run fails,
//! 2 for usage errors (bad flags, missing or malformed input files).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use maxgc::circuit::{build_neuron_circuit, export_netlist, CircuitMode, NeuronCircuitSpec};
use maxgc::error::Error;
use maxgc::garble::HEADER_BYTES;
use maxgc::plant::{
    closed_loop, double_integrator, fixture_paper_p8, fixture_saturated_feedback, paper_domain,
    sample_states, MaxoutController, SATURATED_FIXTURE_GAIN,
};
use maxgc::protocol::{
    load_bundle, offline_setup, save_bundles, CloudOptions, OtGroup, Session, SetupOptions,
    Transport,
};
use maxgc::quantize::{
    error_bound, eta_for, s3_max, Certificate, NetworkDocument, QuantizationConfig, StateDomain,
};
use maxgc::shares::PartyIndex;
use maxgc::verify::{run_suite, Suite, VerifyOptions};

#[derive(Parser)]
#[command(
    name = "maxgc",
    version,
    about = "Two-party secure evaluation of max-out network controllers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Quantize a controller, certify it against overflow, and write the
    /// two provisioning bundles.
    Setup(SetupArgs),
    /// Run a closed-loop simulation with the protocol in the loop and
    /// export the trace as CSV.
    Run(RunArgs),
    /// Execute a single protocol step for one state vector.
    Step(StepArgs),
    /// Time repeated protocol steps on random in-domain states.
    Bench(BenchArgs),
    /// Run the named invariant checks.
    Verify(VerifyArgs),
    /// Print gate counts and garbled-material size for a neuron circuit.
    CircuitStats(CircuitArgs),
    /// Write the neuron circuit netlist to a file.
    ExportCircuit(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Memory,
    Socket,
}

impl From<TransportArg> for Transport {
    fn from(t: TransportArg) -> Transport {
        match t {
            TransportArg::Memory => Transport::Memory,
            TransportArg::Socket => Transport::Tcp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PaperExact,
    SafeSign,
}

impl From<ModeArg> for CircuitMode {
    fn from(m: ModeArg) -> CircuitMode {
        match m {
            ModeArg::PaperExact => CircuitMode::PaperExact,
            ModeArg::SafeSign => CircuitMode::SafeSign,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupArg {
    Secure,
    TestInsecure,
}

impl From<GroupArg> for OtGroup {
    fn from(g: GroupArg) -> OtGroup {
        match g {
            GroupArg::Secure => OtGroup::Secure,
            GroupArg::TestInsecure => OtGroup::TestInsecure,
        }
    }
}

#[derive(Args)]
struct SetupArgs {
    /// Controller weights as JSON (fields K, L, b, c, p, n, optionally
    /// s1, s2, l)
    #[arg(long)]
    network: PathBuf,
    /// State scaling factor; falls back to the network file if omitted
    #[arg(long)]
    s1: Option<f64>,
    /// Weight scaling factor; falls back to the network file if omitted
    #[arg(long)]
    s2: Option<f64>,
    /// Ring bit width; falls back to the network file if omitted
    #[arg(long)]
    l: Option<u8>,
    /// Directory receiving session.json, party1.bin, party2.bin
    #[arg(long)]
    out: PathBuf,
    /// State box half-widths, comma separated
    #[arg(long, default_value = "25,5")]
    domain: String,
    #[arg(long, value_enum, default_value = "paper-exact")]
    mode: ModeArg,
    /// Number of online steps to provision triples for
    #[arg(long, default_value_t = 64)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    session_id: u32,
    #[arg(long, value_enum, default_value = "secure")]
    ot_group: GroupArg,
}

#[derive(Args)]
struct RunArgs {
    /// Bundle directory written by `setup`
    #[arg(long)]
    bundles: Option<PathBuf>,
    /// Provision in memory from a named fixture instead: saturated | paper-p8
    #[arg(long)]
    fixture: Option<String>,
    /// JSON session config; individual flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum)]
    transport: Option<TransportArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initial state, comma separated
    #[arg(long)]
    x0: Option<String>,
    /// Trace CSV destination; stdout if omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

/// File form of the `run` flags.
#[derive(serde::Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    bundles: Option<PathBuf>,
    fixture: Option<String>,
    steps: Option<usize>,
    transport: Option<String>,
    seed: Option<u64>,
    x0: Option<Vec<f64>>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StepArgs {
    #[arg(long)]
    bundles: PathBuf,
    /// State vector, comma separated
    #[arg(long)]
    state: String,
    #[arg(long, value_enum, default_value = "memory")]
    transport: TransportArg,
}

#[derive(Args)]
struct BenchArgs {
    /// Neurons per branch of the synthetic benchmark controller
    #[arg(long, default_value_t = 8)]
    p: usize,
    #[arg(long, default_value_t = 16)]
    l: u8,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "memory")]
    transport: TransportArg,
    #[arg(long, value_enum, default_value = "secure")]
    ot_group: GroupArg,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "small")]
    suite: String,
    /// Tamper with the garbling KDF to prove the differential check catches it
    #[arg(long)]
    inject_kdf_fault: bool,
}

#[derive(Args)]
struct CircuitArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    l: u8,
    #[arg(long, value_enum, default_value = "paper-exact")]
    mode: ModeArg,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    l: u8,
    #[arg(long, value_enum, default_value = "paper-exact")]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
}

/// Failures carry the exit code they map to.
struct CliError {
    code: u8,
    message: String,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: msg.into(),
    }
}

fn failure(msg: impl Into<String>) -> CliError {
    CliError {
        code: 1,
        message: msg.into(),
    }
}

type CliResult = Result<(), CliError>;

fn parse_floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("not a number: {t:?}")))
        })
        .collect()
}

fn print_certificate(cert: &Certificate) {
    println!("certificate:");
    println!("  preactivation_margin = {}", cert.preactivation_margin);
    println!(
        "  pairwise_fit = {} (margin {})",
        cert.pairwise_fit, cert.pairwise_margin
    );
    println!(
        "  cross_fit = {} (margin {})",
        cert.cross_fit, cert.cross_margin
    );
}

fn cmd_setup(a: SetupArgs) -> CliResult {
    let raw = fs::read_to_string(&a.network)
        .map_err(|e| usage(format!("{}: {e}", a.network.display())))?;
    let doc = NetworkDocument::parse(&raw).map_err(|e| usage(e.to_string()))?;
    let net = doc.network().map_err(|e| usage(e.to_string()))?;
    let s1 = a.s1.or(doc.s1).ok_or_else(|| usage("--s1 required (not in network file)"))?;
    let s2 = a.s2.or(doc.s2).ok_or_else(|| usage("--s2 required (not in network file)"))?;
    let l = a.l.or(doc.l).ok_or_else(|| usage("--l required (not in network file)"))?;
    let half_widths = parse_floats(&a.domain)?;
    if half_widths.len() != net.n() {
        return Err(usage(format!(
            "domain has {} entries, network expects {}",
            half_widths.len(),
            net.n()
        )));
    }
    let dom = StateDomain::new(half_widths).map_err(|e| usage(e.to_string()))?;

    let eta = eta_for(&net, &dom, s1, s2);
    let qcfg = QuantizationConfig::new(s1, s2, l, eta, net.n())
        .map_err(|e| usage(e.to_string()))?;
    let eb = error_bound(&qcfg);
    println!("p = {}, n = {}, l = {l}", net.p(), net.n());
    println!("s1 = {s1}, s2 = {s2}, s3 = {}", qcfg.s3);
    println!("s3_max = {}", s3_max(&net, &dom, l, eb.half));
    println!("eta = {eta}");
    println!("error bound = {}, Delta = {}", eb.bound, eb.half);

    let opts = SetupOptions {
        mode: a.mode.into(),
        steps: a.steps,
        session_id: a.session_id,
        seed: a.seed,
        ot_group: a.ot_group.into(),
    };
    let (b1, b2, cert) = offline_setup(&net, &dom, s1, s2, l, &opts).map_err(|e| match e {
        Error::Uncertified(_) | Error::QuantizeOverflow { .. } => {
            failure(format!("certification failed: {e}"))
        }
        other => usage(other.to_string()),
    })?;
    print_certificate(&cert);
    save_bundles(&a.out, &b1, &b2).map_err(|e| usage(e.to_string()))?;
    println!("bundles written to {}", a.out.display());
    Ok(())
}

fn fixture_by_name(name: &str) -> Result<(MaxoutController, CircuitMode), CliError> {
    match name {
        "saturated" => Ok((
            fixture_saturated_feedback(SATURATED_FIXTURE_GAIN),
            CircuitMode::PaperExact,
        )),
        // the printed p = 8 weights do not satisfy the pairwise-difference
        // certificate at l = 16, so the sign-safe circuit is required
        "paper-p8" | "p8" => Ok((fixture_paper_p8(), CircuitMode::SafeSign)),
        other => Err(usage(format!(
            "unknown fixture {other:?} (expected saturated or paper-p8)"
        ))),
    }
}

fn session_error(dir: Option<&Path>, session: &Session, e: &Error) -> CliError {
    let path = dir
        .map(|d| d.join("transcript.log"))
        .unwrap_or_else(|| PathBuf::from("maxgc-transcript.log"));
    let note = match fs::write(&path, session.transcript_dump()) {
        Ok(()) => format!("transcript written to {}", path.display()),
        Err(w) => format!("transcript could not be written: {w}"),
    };
    failure(format!("protocol failure: {e} ({note})"))
}

fn cmd_run(a: RunArgs) -> CliResult {
    let file: RunConfig = match &a.config {
        Some(p) => {
            let raw = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&raw).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    let bundles = a.bundles.or(file.bundles);
    let fixture = a.fixture.or(file.fixture);
    let steps = a.steps.or(file.steps).unwrap_or(40);
    let seed = a.seed.or(file.seed).unwrap_or(1);
    let transport: Transport = match a.transport {
        Some(t) => t.into(),
        None => match file.transport.as_deref() {
            Some("memory") | None => Transport::Memory,
            Some("socket") => Transport::Tcp,
            Some(other) => return Err(usage(format!("unknown transport {other:?}"))),
        },
    };
    let x0 = match &a.x0 {
        Some(s) => Some(parse_floats(s)?),
        None => file.x0,
    };
    let out = a.out.or(file.out);

    let (b1, b2) = match (&bundles, &fixture) {
        (Some(dir), _) => (
            load_bundle(dir, PartyIndex::P1).map_err(|e| usage(e.to_string()))?,
            load_bundle(dir, PartyIndex::P2).map_err(|e| usage(e.to_string()))?,
        ),
        (None, Some(name)) => {
            let (ctrl, mode) = fixture_by_name(name)?;
            let opts = SetupOptions {
                mode,
                steps,
                seed,
                ..Default::default()
            };
            let (b1, b2, _) = offline_setup(&ctrl.network, &paper_domain(), 20.0, 100.0, 16, &opts)
                .map_err(|e| failure(e.to_string()))?;
            (b1, b2)
        }
        (None, None) => return Err(usage("either --bundles or --fixture is required")),
    };
    if b1.cfg.steps < steps {
        return Err(usage(format!(
            "bundles hold triples for {} steps, {} requested",
            b1.cfg.steps, steps
        )));
    }

    let mut session =
        Session::new(b1, b2, CloudOptions::default(), transport).map_err(|e| failure(e.to_string()))?;
    let n = session.cfg.n;
    let x0 = x0.unwrap_or_else(|| {
        let mut v = vec![0.0; n];
        v[0] = 5.0;
        v
    });
    if x0.len() != n {
        return Err(usage(format!("x0 has {} entries, state dimension is {n}", x0.len())));
    }
    let guard = session.cfg.state_domain().map_err(|e| failure(e.to_string()))?;
    let sys = double_integrator();
    if n != 2 {
        return Err(usage(format!(
            "closed-loop plant is the 2-state double integrator, controller has n = {n}"
        )));
    }

    let trace = {
        let session = &mut session;
        closed_loop(&sys, |x| session.step(x), &x0, steps, &guard, "protocol", seed)
    };
    let trace = match trace {
        Ok(t) => t,
        Err(e) => return Err(session_error(bundles.as_deref(), &session, &e)),
    };
    let csv = trace.to_csv();
    match &out {
        Some(p) => {
            fs::write(p, &csv).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            println!("trace written to {}", p.display());
        }
        None => print!("{csv}"),
    }
    let summary = format!(
        "steps = {}, truncated = {}, mean step = {:.2} ms",
        trace.steps.len(),
        trace.truncated,
        session.mean_step_millis().unwrap_or(0.0)
    );
    if out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn cmd_step(a: StepArgs) -> CliResult {
    let b1 = load_bundle(&a.bundles, PartyIndex::P1).map_err(|e| usage(e.to_string()))?;
    let b2 = load_bundle(&a.bundles, PartyIndex::P2).map_err(|e| usage(e.to_string()))?;
    let x = parse_floats(&a.state)?;
    let mut session = Session::new(b1, b2, CloudOptions::default(), a.transport.into())
        .map_err(|e| failure(e.to_string()))?;
    let u = match session.step(&x) {
        Ok(u) => u,
        Err(e) => return Err(session_error(Some(&a.bundles), &session, &e)),
    };
    let rec = session.records.last().expect("one step recorded");
    println!("u = {u}");
    println!("masked results: dv = {}, dw = {}", rec.dv, rec.dw);
    println!("triples consumed: {:?}", rec.triple_ids);
    println!("frames exchanged: {}", rec.frames.len());
    println!("step time = {:.2} ms", rec.millis);
    Ok(())
}

/// Synthetic certifiable controller with the requested branch width; weights
/// are small so certification never constrains the benchmark shape.
fn bench_network(p: usize) -> maxgc::quantize::RealNetwork {
    let row = |i: usize, sign: f64| vec![sign * 0.01 * (i + 1) as f64 / p as f64, -0.01];
    maxgc::quantize::RealNetwork::new(
        (0..p).map(|i| row(i, 1.0)).collect(),
        (0..p).map(|i| row(i, -1.0)).collect(),
        (0..p).map(|i| 0.001 * i as f64).collect(),
        (0..p).map(|i| -0.001 * i as f64).collect(),
    )
    .expect("static shape")
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    if a.p < 2 || a.steps == 0 {
        return Err(usage("need p >= 2 and at least one step"));
    }
    let net = bench_network(a.p);
    let dom = paper_domain();
    let opts = SetupOptions {
        mode: CircuitMode::SafeSign,
        steps: a.steps,
        seed: a.seed,
        ot_group: a.ot_group.into(),
        ..Default::default()
    };
    let (b1, b2, _) =
        offline_setup(&net, &dom, 20.0, 100.0, a.l, &opts).map_err(|e| failure(e.to_string()))?;
    let spec = b1.cfg.circuit_spec();
    let circuit = build_neuron_circuit(&spec).map_err(|e| failure(e.to_string()))?;
    let mut session = Session::new(b1, b2, CloudOptions::default(), a.transport.into())
        .map_err(|e| failure(e.to_string()))?;

    let mut rng = ChaCha12Rng::seed_from_u64(a.seed);
    use rand::Rng;
    let states = sample_states(&dom, a.steps, rng.gen());
    for x in &states {
        if let Err(e) = session.step(x) {
            return Err(session_error(None, &session, &e));
        }
    }
    let times: Vec<f64> = session.records.iter().map(|r| r.millis).collect();
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let min = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = times.iter().cloned().fold(0.0f64, f64::max);
    println!("p = {}, l = {}, mode = {}", a.p, a.l, spec.mode.as_str());
    println!(
        "AND = {}, garbled material = {} bytes per circuit",
        circuit.and_count(),
        HEADER_BYTES + 64 * circuit.and_count() + 17 * a.l as usize
    );
    println!(
        "steps = {}, mean = {mean:.2} ms, min = {min:.2} ms, max = {max:.2} ms",
        times.len()
    );
    println!("(offline provisioning and triple generation excluded from timing)");
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CliResult {
    let suite = Suite::parse(&a.suite)
        .ok_or_else(|| usage(format!("unknown suite {:?} (expected small or full)", a.suite)))?;
    let results = run_suite(
        suite,
        VerifyOptions {
            inject_kdf_fault: a.inject_kdf_fault,
        },
    );
    let mut failed = 0;
    for r in &results {
        println!(
            "{} {} - {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        if !r.passed {
            failed += 1;
        }
    }
    println!("{}/{} checks passed", results.len() - failed, results.len());
    if failed > 0 {
        return Err(failure(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn build_for_inspection(p: usize, l: u8, mode: ModeArg) -> Result<maxgc::circuit::Circuit, CliError> {
    build_neuron_circuit(&NeuronCircuitSpec {
        p,
        l,
        mode: mode.into(),
    })
    .map_err(|e| usage(e.to_string()))
}

fn cmd_circuit_stats(a: CircuitArgs) -> CliResult {
    let c = build_for_inspection(a.p, a.l, a.mode)?;
    let mode: CircuitMode = a.mode.into();
    println!("p = {}, l = {}, mode = {}", a.p, a.l, mode.as_str());
    println!("AND = {}", c.and_count());
    println!("XOR = {}", c.xor_count());
    println!("NOT = {}", c.not_count());
    println!("wires = {}", c.wire_count);
    println!("garbled tables = {} bytes", 64 * c.and_count());
    println!(
        "garbled material = {} bytes (header {HEADER_BYTES} + tables + decode)",
        HEADER_BYTES + 64 * c.and_count() + 17 * c.outputs.len()
    );
    Ok(())
}

fn cmd_export_circuit(a: ExportArgs) -> CliResult {
    let c = build_for_inspection(a.p, a.l, a.mode)?;
    let netlist = export_netlist(&c);
    fs::write(&a.out, netlist).map_err(|e| usage(format!("{}: {e}", a.out.display())))?;
    println!("netlist written to {}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Setup(a) => cmd_setup(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Step(a) => cmd_step(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::CircuitStats(a) => cmd_circuit_stats(a),
        Cmd::ExportCircuit(a) => cmd_export_circuit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
