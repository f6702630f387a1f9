//! Ledger subcommands: key generation, record push, lookup, and ownership
//! tracing, all emitting JSON.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use hwpv::ledger::{Address, Ledger, LedgerKeyPair, RecordFields, RecordId};

use crate::error::CliError;

#[derive(Subcommand)]
pub enum LedgerCommand {
    /// Generate a signing key and its address.
    Keygen(KeygenArgs),
    /// Sign and append a record.
    Push(PushArgs),
    /// Fetch a record by id, verifying its signature.
    Track(TrackArgs),
    /// Trace the vendor set behind a record.
    Trace(TraceArgs),
}

#[derive(Args)]
pub struct KeygenArgs {
    /// Output key JSON file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PushArgs {
    /// Ledger file (created when absent).
    #[arg(long)]
    pub ledger: PathBuf,
    /// Signing key JSON from keygen.
    #[arg(long)]
    pub key: PathBuf,
    /// 32-byte record id, hex.
    #[arg(long)]
    pub id: String,
    /// 32-byte design hash, hex.
    #[arg(long)]
    pub hash: String,
    /// Recipient address, hex (20 bytes).
    #[arg(long)]
    pub to: String,
    /// Referenced record ids, hex, comma separated (up to five).
    #[arg(long, value_delimiter = ',')]
    pub refs: Vec<String>,
}

#[derive(Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub ledger: PathBuf,
    #[arg(long)]
    pub id: String,
}

#[derive(Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub ledger: PathBuf,
    #[arg(long)]
    pub id: String,
}

fn parse_id(text: &str) -> Result<RecordId, CliError> {
    let bytes = hex::decode(text).map_err(CliError::usage)?;
    bytes
        .try_into()
        .map_err(|_| CliError::Usage("ids must be 32 bytes of hex".into()))
}

pub fn run(command: LedgerCommand, seed: u64) -> Result<(), CliError> {
    match command {
        LedgerCommand::Keygen(args) => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let key = LedgerKeyPair::generate(&mut rng);
            fs::write(&args.out, key.to_json())?;
            println!(
                "{}",
                serde_json::json!({ "address": key.address().to_hex() })
            );
            Ok(())
        }
        LedgerCommand::Push(args) => {
            let key = LedgerKeyPair::from_json(&fs::read_to_string(&args.key)?)
                .map_err(CliError::usage)?;
            let mut ledger = Ledger::open(&args.ledger).map_err(CliError::usage)?;
            let references = args
                .refs
                .iter()
                .map(|r| parse_id(r))
                .collect::<Result<Vec<_>, _>>()?;
            let fields = RecordFields {
                id: parse_id(&args.id)?,
                design_hash: parse_id(&args.hash)?,
                from: key.address(),
                to: Address::from_hex(&args.to).map_err(CliError::usage)?,
                references,
            };
            let id = ledger.push_record(fields, &key).map_err(CliError::usage)?;
            println!(
                "{}",
                serde_json::json!({ "id": hex::encode(id), "records": ledger.len() })
            );
            Ok(())
        }
        LedgerCommand::Track(args) => {
            let ledger = Ledger::open(&args.ledger).map_err(CliError::usage)?;
            let record = ledger
                .track_record(&parse_id(&args.id)?)
                .map_err(CliError::usage)?;
            println!("{}", record.to_json());
            Ok(())
        }
        LedgerCommand::Trace(args) => {
            let ledger = Ledger::open(&args.ledger).map_err(CliError::usage)?;
            let vendors = ledger
                .trace_soft_ip(&parse_id(&args.id)?)
                .map_err(CliError::usage)?;
            println!(
                "{}",
                serde_json::json!({
                    "vendors": vendors.iter().map(Address::to_hex).collect::<Vec<_>>()
                })
            );
            Ok(())
        }
    }
}
