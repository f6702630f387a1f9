//! Vendor and user session commands plus dealer triple generation.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use hwpv::backend::{generate_triple_files, read_triple_file, TripleSource};
use hwpv::ir::SemanticMap;
use hwpv::portfolio::{MaskPair, MaskedPortfolio};
use hwpv::property::PropertySpec;
use hwpv::session::{user_session, vendor_session, HeuristicKind, SessionConfig, SessionReport};
use hwpv::solver::{Verdict, DEFAULT_STEP_LIMIT};
use hwpv::transport::{accept, connect, SessionId};

use crate::error::CliError;

#[derive(Subcommand)]
pub enum VendorCommand {
    /// Serve a portfolio: oblivious selection followed by joint verification.
    Serve(ServeArgs),
}

#[derive(Args)]
pub struct ServeArgs {
    /// Portfolio file produced by build-portfolio.
    #[arg(long)]
    pub portfolio: Option<PathBuf>,
    /// Mask file for this verification session.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Listen address, e.g. 127.0.0.1:7001.
    #[arg(long)]
    pub listen: Option<String>,
    /// Multiplication-triple share file; without it both parties derive
    /// dealer triples from the session id (development mode only).
    #[arg(long)]
    pub triples: Option<PathBuf>,
    /// Number of sessions to serve before exiting.
    #[arg(long, default_value_t = 1)]
    pub sessions: u32,
    /// Allow up to this many sessions to run concurrently.
    #[arg(long, default_value_t = 1)]
    pub parallel: u32,
    /// Session config file; explicit flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum UserCommand {
    /// Select a design obliviously and verify a property against it.
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Vendor endpoint, e.g. 127.0.0.1:7001. Falls back to the
    /// HWPV_ENDPOINT environment variable.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// 1-based index of the design to verify.
    #[arg(long)]
    pub select: Option<u32>,
    /// Property JSON file.
    #[arg(long)]
    pub property: Option<PathBuf>,
    /// Semantic map JSON published by the vendor.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Decision heuristic: dlis or ctrl.
    #[arg(long)]
    pub heuristic: Option<String>,
    /// Giant-step limit before declaring a timeout.
    #[arg(long)]
    pub step_limit: Option<u64>,
    /// Multiplication-triple share file (see vendor serve).
    #[arg(long)]
    pub triples: Option<PathBuf>,
    /// Use the loopback test transfer instead of real cryptography. The
    /// selection index crosses the wire in clear; test use only.
    #[arg(long)]
    pub insecure_test_ot: bool,
    /// Session config file; explicit flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct DealerArgs {
    /// Number of triples per file.
    #[arg(long)]
    pub count: usize,
    /// Output share file for the vendor.
    #[arg(long)]
    pub out_vendor: PathBuf,
    /// Output share file for the user.
    #[arg(long)]
    pub out_user: PathBuf,
}

fn load_config(path: &Option<PathBuf>) -> Result<SessionConfig, CliError> {
    match path {
        Some(p) => SessionConfig::from_json(&fs::read_to_string(p)?).map_err(CliError::usage),
        None => Ok(SessionConfig::default()),
    }
}

fn triples_for(
    path: Option<&Path>,
    session_id: &SessionId,
    role: hwpv::transport::Role,
) -> Result<TripleSource, CliError> {
    match path {
        Some(p) => {
            let bytes = fs::read(p)?;
            read_triple_file(&mut bytes.as_slice()).map_err(CliError::usage)
        }
        None => {
            let mut hasher = Sha256::new();
            hasher.update(b"hwpv-dealer/v1");
            hasher.update(session_id);
            Ok(TripleSource::dealer(hasher.finalize().into(), role))
        }
    }
}

fn print_report(report: &SessionReport) {
    println!("{}", report.stats.to_json(report.verdict));
}

fn exit_on_timeout(report: &SessionReport) -> Result<(), CliError> {
    if report.verdict == Verdict::Timeout {
        print_report(report);
        return Err(CliError::Timeout);
    }
    print_report(report);
    Ok(())
}

pub fn vendor(command: VendorCommand, seed: u64) -> Result<(), CliError> {
    let VendorCommand::Serve(args) = command;
    let config = load_config(&args.config)?;
    let portfolio_path = args
        .portfolio
        .or(config.portfolio.map(PathBuf::from))
        .ok_or(CliError::Usage("--portfolio is required".into()))?;
    let mask_path = args
        .mask
        .or(config.mask.map(PathBuf::from))
        .ok_or(CliError::Usage("--mask is required".into()))?;
    let listen = args
        .listen
        .or(config.endpoint)
        .ok_or(CliError::Usage("--listen is required".into()))?;
    let portfolio =
        Arc::new(MaskedPortfolio::read_from_file(&portfolio_path).map_err(CliError::usage)?);
    let masks = Arc::new(MaskPair::read_from_file(&mask_path).map_err(CliError::usage)?);
    let listener = TcpListener::bind(&listen)?;
    eprintln!("serving {} designs on {listen}", portfolio.public.count);

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut handles: Vec<std::thread::JoinHandle<Result<SessionReport, CliError>>> = Vec::new();
    let mut last_timeout = false;
    for _ in 0..args.sessions {
        let (channel, session_id) = accept(&listener)?;
        let portfolio = Arc::clone(&portfolio);
        let masks = Arc::clone(&masks);
        let triples = triples_for(
            args.triples.as_deref(),
            &session_id,
            hwpv::transport::Role::Vendor,
        )?;
        let session_seed: [u8; 32] = rng.gen();
        let handle = std::thread::spawn(move || {
            vendor_session(
                channel,
                session_id,
                &portfolio,
                &masks,
                triples,
                session_seed,
            )
            .map_err(CliError::from)
        });
        handles.push(handle);
        while handles.len() >= args.parallel.max(1) as usize {
            let report = handles.remove(0).join().expect("session thread")?;
            last_timeout = report.verdict == Verdict::Timeout;
            print_report(&report);
        }
    }
    for handle in handles {
        let report = handle.join().expect("session thread")?;
        last_timeout = report.verdict == Verdict::Timeout;
        print_report(&report);
    }
    if last_timeout {
        return Err(CliError::Timeout);
    }
    Ok(())
}

pub fn user(command: UserCommand, seed: u64) -> Result<(), CliError> {
    let UserCommand::Verify(args) = command;
    let config = load_config(&args.config)?;
    let endpoint = args
        .endpoint
        .or(config.endpoint)
        .or_else(|| std::env::var("HWPV_ENDPOINT").ok())
        .ok_or(CliError::Usage("--endpoint is required".into()))?;
    let selection = args
        .select
        .or(config.selection)
        .ok_or(CliError::Usage("--select is required".into()))?;
    let property_path = args
        .property
        .or(config.property.map(PathBuf::from))
        .ok_or(CliError::Usage("--property is required".into()))?;
    let map_path = args
        .map
        .or(config.map.map(PathBuf::from))
        .ok_or(CliError::Usage("--map is required".into()))?;
    let heuristic = match args
        .heuristic
        .or(config.heuristic)
        .unwrap_or_else(|| "dlis".to_string())
        .to_ascii_lowercase()
        .as_str()
    {
        "dlis" => HeuristicKind::Dlis,
        "ctrl" => HeuristicKind::Ctrl,
        other => return Err(CliError::Usage(format!("unknown heuristic '{other}'"))),
    };
    let step_limit = args
        .step_limit
        .or(config.step_limit)
        .unwrap_or(DEFAULT_STEP_LIMIT);
    let insecure_ot = args.insecure_test_ot || config.insecure_test_ot.unwrap_or(false);
    if let Some(backend) = &config.backend {
        if backend != "shared" {
            return Err(CliError::Usage(format!(
                "unsupported session backend '{backend}' (only 'shared' runs two-party)"
            )));
        }
    }

    let property =
        PropertySpec::from_json(&fs::read_to_string(&property_path)?).map_err(CliError::usage)?;
    let map = SemanticMap::from_json(&fs::read_to_string(&map_path)?).map_err(CliError::usage)?;

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let session_id: SessionId = rng.gen();
    let (channel, session_id) = connect(&endpoint, session_id)?;
    let triples = triples_for(
        args.triples
            .as_deref()
            .or(config.triples.as_deref().map(Path::new)),
        &session_id,
        hwpv::transport::Role::User,
    )?;
    let report = user_session(
        channel,
        session_id,
        selection,
        &property,
        &map,
        heuristic,
        step_limit,
        insecure_ot,
        triples,
        rng.gen(),
    )?;
    if let Some(id) = report.design_id {
        eprintln!("design id {}", hex::encode(id));
    }
    exit_on_timeout(&report)
}

pub fn dealer(args: DealerArgs, seed: u64) -> Result<(), CliError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (vendor_file, user_file) = generate_triple_files(&mut rng, args.count);
    fs::write(&args.out_vendor, vendor_file)?;
    fs::write(&args.out_user, user_file)?;
    println!("{}", serde_json::json!({ "count": args.count }));
    Ok(())
}
