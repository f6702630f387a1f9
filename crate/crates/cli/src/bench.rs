//! DLIS-versus-control-heuristic sweep over the mux-cascade family,
//! reporting a CSV shaped like the evaluation table: formula size, design
//! transfer size in 128-bit blocks, 1-of-32 transfer time, demask time, and
//! giant-step counts per heuristic.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use hwpv::backend::{Backend, CleartextBackend, SharedBackend, TripleSource};
use hwpv::formula::{conjoin, encode_cnf, ClauseMatrix};
use hwpv::ir::cascade::{cascade_cover_property, mux_cascade};
use hwpv::ir::{bitblast_tseytin, build_heuristic_order};
use hwpv::ot::{ot_receive, ot_send, OtMessageVector};
use hwpv::property::compile_property;
use hwpv::solver::{
    share_heuristic, share_instance, solve, Heuristic, SharedMatrix, DEFAULT_STEP_LIMIT,
};
use hwpv::transport::{DuplexChannel, Role};

use crate::error::CliError;

#[derive(Args)]
pub struct BenchArgs {
    /// Largest cascade depth to sweep (starting at 1).
    #[arg(long, default_value_t = 4)]
    pub max_depth: u32,
    /// Largest unrolling bound to sweep (starting at 1).
    #[arg(long, default_value_t = 3)]
    pub max_bound: u32,
    /// Accumulator width in bits.
    #[arg(long, default_value_t = 4)]
    pub width: u32,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct BenchRow {
    design: String,
    bound: u32,
    vars: u32,
    clauses: usize,
    design_blocks: u64,
    ot_ms: f64,
    demask_ms: f64,
    dlis_steps: u64,
    ctrl_steps: u64,
}

pub fn bench(args: BenchArgs, seed: u64) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for depth in 1..=args.max_depth {
        for bound in 1..=args.max_bound {
            rows.push(run_instance(depth, bound, args.width, &mut rng)?);
        }
    }
    let mut csv = String::from("Design,Bound,Var,Cls,DesignSizeBlocks,OTms,Demask,DLIS,Ctrl\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{:.2},{:.2},{},{}\n",
            r.design,
            r.bound,
            r.vars,
            r.clauses,
            r.design_blocks,
            r.ot_ms,
            r.demask_ms,
            r.dlis_steps,
            r.ctrl_steps
        ));
    }
    match &args.out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_instance(
    depth: u32,
    bound: u32,
    width: u32,
    rng: &mut ChaCha20Rng,
) -> Result<BenchRow, CliError> {
    let module = mux_cascade(depth, width);
    let property = cascade_cover_property(&module, depth, width, bound);
    let unrolled = module.unroll(bound).map_err(CliError::usage)?;
    let blast = bitblast_tseytin(&unrolled).map_err(CliError::usage)?;
    let heuristic = build_heuristic_order(&blast.control_depths, &blast.semantic_map, bound)
        .map_err(CliError::usage)?;
    let compiled = compile_property(
        &property,
        &blast.semantic_map,
        blast.cnf.num_variables() + 1,
        bound,
    )
    .map_err(CliError::usage)?;
    let design = encode_cnf(&blast.cnf);
    let combined =
        conjoin(&design, &encode_cnf(&compiled.cnf), compiled.aux_base).map_err(CliError::usage)?;

    // Giant steps are backend-invariant; count them on the cleartext backend.
    let mut backend = CleartextBackend::new();
    let (p, n) = share_instance(
        &mut backend,
        Role::Vendor,
        Some((combined.pos(), combined.neg())),
        combined.num_variables() as usize,
        combined.num_clauses() as usize,
    )
    .map_err(CliError::protocol)?;
    let (_, dlis_stats) = solve(&mut backend, &p, &n, &Heuristic::Dlis, DEFAULT_STEP_LIMIT)
        .map_err(CliError::protocol)?;
    let shared_h = share_heuristic(
        &mut backend,
        Role::Vendor,
        Some(&heuristic),
        heuristic.len(),
        combined.num_variables() as usize,
    )
    .map_err(CliError::protocol)?;
    let (_, ctrl_stats) = solve(
        &mut backend,
        &p,
        &n,
        &Heuristic::Ctrl(shared_h),
        DEFAULT_STEP_LIMIT,
    )
    .map_err(CliError::protocol)?;

    let ot_ms = measure_ot_1_of_32(&design, rng)?;
    let demask_ms = measure_demask(&design, rng)?;
    let nm = design.num_variables() as u64 * design.num_clauses() as u64;
    Ok(BenchRow {
        design: format!("cascade_d{depth}"),
        bound,
        vars: combined.num_variables(),
        clauses: combined.num_clauses() as usize,
        design_blocks: (2 * nm).div_ceil(128),
        ot_ms,
        demask_ms,
        dlis_steps: dlis_stats.giant_steps,
        ctrl_steps: ctrl_stats.giant_steps,
    })
}

/// Wall time of a real 1-of-32 transfer carrying this design's matrices.
fn measure_ot_1_of_32(design: &ClauseMatrix, rng: &mut ChaCha20Rng) -> Result<f64, CliError> {
    let mut payload = Vec::new();
    design.write_to(&mut payload).map_err(CliError::usage)?;
    let messages: Vec<Vec<u8>> = (0..32)
        .map(|_| (0..payload.len()).map(|_| rng.gen()).collect())
        .collect();
    let vector = OtMessageVector::new(messages).map_err(CliError::protocol)?;
    let len = vector.message_len();
    let (mut ca, mut cb) = DuplexChannel::pair();
    let sid = rng.gen();
    let mut sender_rng = ChaCha20Rng::seed_from_u64(rng.gen());
    let mut receiver_rng = ChaCha20Rng::seed_from_u64(rng.gen());
    let start = Instant::now();
    let sender = std::thread::spawn(move || ot_send(&mut ca, &sid, &vector, &mut sender_rng));
    let received = ot_receive(&mut cb, &sid, 32, len, 7, &mut receiver_rng);
    sender
        .join()
        .expect("ot sender")
        .map_err(CliError::protocol)?;
    received.map_err(CliError::protocol)?;
    Ok(start.elapsed().as_secs_f64() * 1e3)
}

/// Wall time of the in-protocol demask: both matrices shared by each party
/// and XORed under sharing.
fn measure_demask(design: &ClauseMatrix, rng: &mut ChaCha20Rng) -> Result<f64, CliError> {
    let rows = design.num_variables() as usize;
    let cols = design.num_clauses() as usize;
    let masked = design.pos().clone();
    let mask = hwpv::formula::BitMatrix::random(rows, cols, rng);
    let dealer_seed: [u8; 32] = rng.gen();
    let (ca, cb) = DuplexChannel::pair();
    let start = Instant::now();
    let masked_v = masked.clone();
    let vendor = std::thread::spawn(move || {
        let mut b = SharedBackend::new(
            ca,
            Role::Vendor,
            [1; 32],
            TripleSource::dealer(dealer_seed, Role::Vendor),
        );
        let m = SharedMatrix::share(&mut b, Role::User, None, rows, cols).unwrap();
        let r = SharedMatrix::share(&mut b, Role::Vendor, Some(&masked_v), rows, cols).unwrap();
        let demasked = m.xor(&mut b, &r).unwrap();
        assert_eq!(b.stats().and_count, 0);
        demasked.rows()
    });
    let mut b = SharedBackend::new(
        cb,
        Role::User,
        [2; 32],
        TripleSource::dealer(dealer_seed, Role::User),
    );
    let m = SharedMatrix::share(&mut b, Role::User, Some(&mask), rows, cols)
        .map_err(CliError::protocol)?;
    let r =
        SharedMatrix::share(&mut b, Role::Vendor, None, rows, cols).map_err(CliError::protocol)?;
    let _ = m.xor(&mut b, &r).map_err(CliError::protocol)?;
    vendor.join().expect("vendor demask");
    Ok(start.elapsed().as_secs_f64() * 1e3)
}
