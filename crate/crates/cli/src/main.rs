//! Command-line entry points binding the pipeline together for both roles:
//! design compilation, portfolio construction, the vendor/user verification
//! session, the DLIS-vs-Ctrl benchmark sweep, dealer triples, and the
//! provenance ledger.

use clap::{Parser, Subcommand};

mod bench;
mod compile;
mod error;
mod ledger_cmd;
mod session_cmd;

#[derive(Parser)]
#[command(
    name = "hwpv",
    version,
    about = "Two-party private hardware IP verification toolkit"
)]
struct Cli {
    /// Seed for all randomness, making runs reproducible.
    #[arg(long, global = true, default_value_t = 0xB11D)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a design JSON into its clause matrices, semantic map, and
    /// control-literal priority list.
    CompileDesign(compile::CompileDesignArgs),
    /// Compile a property JSON against a semantic map.
    CompileProperty(compile::CompilePropertyArgs),
    /// Cone-of-influence pruning of a design against property signals.
    Prune(compile::PruneArgs),
    /// Pad, mask, and package designs into a portfolio plus a mask file.
    BuildPortfolio(compile::BuildPortfolioArgs),
    /// Vendor-side commands.
    #[command(subcommand)]
    Vendor(session_cmd::VendorCommand),
    /// User-side commands.
    #[command(subcommand)]
    User(session_cmd::UserCommand),
    /// DLIS-vs-control-heuristic sweep over the mux-cascade family.
    Bench(bench::BenchArgs),
    /// Provenance ledger operations.
    #[command(subcommand)]
    Ledger(ledger_cmd::LedgerCommand),
    /// Generate correlated multiplication-triple share files.
    Dealer(session_cmd::DealerArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage problems exit 1; --help and --version exit 0.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::CompileDesign(args) => compile::compile_design(args),
        Command::CompileProperty(args) => compile::compile_property_cmd(args),
        Command::Prune(args) => compile::prune(args),
        Command::BuildPortfolio(args) => compile::build_portfolio_cmd(args, cli.seed),
        Command::Vendor(cmd) => session_cmd::vendor(cmd, cli.seed),
        Command::User(cmd) => session_cmd::user(cmd, cli.seed),
        Command::Bench(args) => bench::bench(args, cli.seed),
        Command::Ledger(cmd) => ledger_cmd::run(cmd, cli.seed),
        Command::Dealer(args) => session_cmd::dealer(args, cli.seed),
    };
    match result {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
