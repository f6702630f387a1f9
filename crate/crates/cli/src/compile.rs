//! Offline artifact pipeline: design compilation, property compilation,
//! pruning, and portfolio construction.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use hwpv::formula::{emit_dimacs, ClauseMatrix};
use hwpv::ir::{bitblast_tseytin, build_heuristic_order, DesignModule, HeuristicSet};
use hwpv::portfolio::{build_portfolio, DesignEntry};
use hwpv::property::{compile_property, PropertySpec};

use crate::error::CliError;

#[derive(Args)]
pub struct CompileDesignArgs {
    /// Design IR JSON file.
    pub design: PathBuf,
    /// Unrolling bound (number of frames).
    #[arg(long)]
    pub bound: u32,
    /// Output clause-matrix file.
    #[arg(long)]
    pub out: PathBuf,
    /// Output semantic map JSON.
    #[arg(long)]
    pub map: PathBuf,
    /// Output control-literal priority list JSON.
    #[arg(long)]
    pub heu: PathBuf,
    /// Output control-depth map JSON.
    #[arg(long)]
    pub depths: Option<PathBuf>,
    /// Prune to the cone of influence of these signals first.
    #[arg(long, value_delimiter = ',')]
    pub prune: Vec<String>,
    /// Also emit the CNF as DIMACS here.
    #[arg(long)]
    pub dimacs: Option<PathBuf>,
}

pub fn compile_design(args: CompileDesignArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.design)?;
    let mut module = DesignModule::from_json(&text).map_err(CliError::usage)?;
    if !args.prune.is_empty() {
        module = module.prune_coi(&args.prune).map_err(CliError::usage)?;
    }
    let unrolled = module.unroll(args.bound).map_err(CliError::usage)?;
    let blast = bitblast_tseytin(&unrolled).map_err(CliError::usage)?;
    let heuristic = build_heuristic_order(&blast.control_depths, &blast.semantic_map, args.bound)
        .map_err(CliError::usage)?;
    let matrix = hwpv::formula::encode_cnf(&blast.cnf);
    matrix.write_to_file(&args.out).map_err(CliError::usage)?;
    fs::write(&args.map, blast.semantic_map.to_json())?;
    fs::write(&args.heu, heuristic.to_json())?;
    if let Some(path) = &args.depths {
        fs::write(path, blast.control_depths.to_json())?;
    }
    if let Some(path) = &args.dimacs {
        fs::write(path, emit_dimacs(&blast.cnf))?;
    }
    println!(
        "{}",
        serde_json::json!({
            "vars": blast.cnf.num_variables(),
            "clauses": blast.cnf.num_clauses(),
            "map_entries": blast.semantic_map.len(),
            "heuristic_len": heuristic.len(),
        })
    );
    Ok(())
}

#[derive(Args)]
pub struct CompilePropertyArgs {
    /// Property JSON file.
    pub property: PathBuf,
    /// Semantic map JSON from the design compilation.
    #[arg(long)]
    pub map: PathBuf,
    /// Variable count of the design CNF the property will conjoin with.
    #[arg(long)]
    pub design_vars: u32,
    /// Unrolling bound the map was built for.
    #[arg(long)]
    pub bound: u32,
    /// Output compiled property JSON.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn compile_property_cmd(args: CompilePropertyArgs) -> Result<(), CliError> {
    let spec =
        PropertySpec::from_json(&fs::read_to_string(&args.property)?).map_err(CliError::usage)?;
    let map = hwpv::ir::SemanticMap::from_json(&fs::read_to_string(&args.map)?)
        .map_err(CliError::usage)?;
    let compiled =
        compile_property(&spec, &map, args.design_vars + 1, args.bound).map_err(CliError::usage)?;
    let doc = serde_json::json!({
        "aux_base": compiled.aux_base,
        "num_aux": compiled.num_aux,
        "dimacs": emit_dimacs(&compiled.cnf),
    });
    fs::write(
        &args.out,
        serde_json::to_string_pretty(&doc).expect("serializable"),
    )?;
    println!(
        "{}",
        serde_json::json!({
            "clauses": compiled.cnf.num_clauses(),
            "aux_base": compiled.aux_base,
            "num_aux": compiled.num_aux,
        })
    );
    Ok(())
}

#[derive(Args)]
pub struct PruneArgs {
    /// Design IR JSON file.
    pub design: PathBuf,
    /// Property signals whose cone of influence to keep.
    #[arg(long, value_delimiter = ',', required = true)]
    pub signals: Vec<String>,
    /// Output pruned design JSON.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn prune(args: PruneArgs) -> Result<(), CliError> {
    let module =
        DesignModule::from_json(&fs::read_to_string(&args.design)?).map_err(CliError::usage)?;
    let pruned = module.prune_coi(&args.signals).map_err(CliError::usage)?;
    fs::write(&args.out, pruned.to_json())?;
    println!(
        "{}",
        serde_json::json!({
            "signals_before": module.inputs.len() + module.signals.len(),
            "signals_after": pruned.inputs.len() + pruned.signals.len(),
        })
    );
    Ok(())
}

#[derive(Args)]
pub struct BuildPortfolioArgs {
    /// Design clause-matrix files (repeat per design).
    #[arg(long = "design", required = true)]
    pub designs: Vec<PathBuf>,
    /// Heuristic list JSON files, one per design, same order.
    #[arg(long = "heu", required = true)]
    pub heus: Vec<PathBuf>,
    /// Abstract descriptions, one per design (optional).
    #[arg(long = "desc")]
    pub descs: Vec<String>,
    /// Common unrolling bound advertised with the portfolio.
    #[arg(long)]
    pub bound: u32,
    /// Output portfolio file.
    #[arg(long)]
    pub out: PathBuf,
    /// Output mask file (vendor secret, one verification session).
    #[arg(long)]
    pub mask: PathBuf,
    /// Output public metadata sidecar JSON.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

pub fn build_portfolio_cmd(args: BuildPortfolioArgs, seed: u64) -> Result<(), CliError> {
    if args.designs.len() != args.heus.len() {
        return Err(CliError::Usage(format!(
            "{} designs but {} heuristic files",
            args.designs.len(),
            args.heus.len()
        )));
    }
    let mut entries = Vec::with_capacity(args.designs.len());
    for (k, (design_path, heu_path)) in args.designs.iter().zip(&args.heus).enumerate() {
        let bytes = fs::read(design_path)?;
        let matrix = ClauseMatrix::read_from(&mut bytes.as_slice()).map_err(CliError::usage)?;
        let heuristic =
            HeuristicSet::from_json(&fs::read_to_string(heu_path)?).map_err(CliError::usage)?;
        let design_id: [u8; 32] = Sha256::digest(&bytes).into();
        entries.push(DesignEntry {
            design_id,
            matrix,
            heuristic,
            description: args.descs.get(k).cloned().unwrap_or_default(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (portfolio, masks) =
        build_portfolio(&entries, args.bound, &mut rng).map_err(CliError::usage)?;
    portfolio
        .write_to_file(&args.out)
        .map_err(CliError::usage)?;
    masks.write_to_file(&args.mask).map_err(CliError::usage)?;
    if let Some(meta) = &args.meta {
        let doc = serde_json::json!({
            "count": portfolio.public.count,
            "n_max": portfolio.public.n_max,
            "m_max": portfolio.public.m_max,
            "bound": portfolio.public.bound,
            "h_max": portfolio.public.h_max,
            "descriptions": portfolio.descriptions,
            "design_ids": entries.iter().map(|e| hex::encode(e.design_id)).collect::<Vec<_>>(),
        });
        fs::write(
            meta,
            serde_json::to_string_pretty(&doc).expect("serializable"),
        )?;
    }
    println!(
        "{}",
        serde_json::json!({
            "designs": portfolio.public.count,
            "n_max": portfolio.public.n_max,
            "m_max": portfolio.public.m_max,
            "session_id": hex::encode(masks.session_id),
        })
    );
    Ok(())
}
