mod args;
mod report;

use std::process::ExitCode;

use clap::Parser;
use precode_core::precoders::{BnbOptions, PrecoderKind};
use precode_core::simulate::{default_precoders, run_ber_sweep, run_complexity_sweep, SweepConfig};
use precode_core::verify::{run_verify, VerifyConfig, EPSILON_TOL};
use precode_core::Error;

use args::{
    parse_int_grid, parse_snr_grid, BerArgs, Cli, Command, Common, ComplexityArgs, VerifyArgs,
};
use report::{BerTable, RunManifest, Tolerances};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

enum Failure {
    Usage(String),
    Runtime(String),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::UnsupportedConfig(_) | Error::DimensionMismatch(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("cannot write output: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Ber(a) => cmd_ber(a),
        Command::Complexity(a) => cmd_complexity(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Verify) => ExitCode::from(EXIT_VERIFY),
    }
}

fn bnb_options(common: &Common) -> Result<BnbOptions, Failure> {
    if common.prune_tol.is_nan() {
        return Err(Failure::Usage("--prune-tol must be a number".into()));
    }
    Ok(BnbOptions {
        prune_tol: common.prune_tol,
        ..BnbOptions::default()
    })
}

fn tolerances(opts: &BnbOptions) -> Tolerances {
    Tolerances {
        lp: opts.lp,
        prune_tol: opts.prune_tol,
        verify_epsilon: EPSILON_TOL,
    }
}

fn grid(text: &str) -> Result<Vec<usize>, Failure> {
    parse_int_grid(text).map_err(Failure::Usage)
}

fn join(values: &[usize]) -> String {
    values
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

fn cmd_ber(a: BerArgs) -> Result<(), Failure> {
    let antennas = grid(&a.antennas)?;
    let snr = parse_snr_grid(&a.snr).map_err(Failure::Usage)?;
    let precoders = match &a.precoders {
        None => default_precoders(&antennas, a.alpha_x),
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<PrecoderKind>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::Usage(e.to_string()))?,
    };
    let mut cfg = SweepConfig::new(a.users, antennas.clone(), a.alpha_s, a.alpha_x);
    cfg.snr_grid_db = snr;
    cfg.n_channels = a.channels;
    cfg.symbols_per_channel = a.symbols_per_channel;
    cfg.precoders = precoders;
    cfg.master_seed = a.common.seed;
    cfg.bnb = bnb_options(&a.common)?;
    cfg.exhaustive_budget = a.common.budget;
    cfg.threads = a.common.threads;
    cfg.validate()?;

    let points = run_ber_sweep(&cfg)?;
    for (kind, excluded) in cfg.precoders.iter().filter_map(|&k| {
        let e = points
            .iter()
            .find(|p| p.precoder == k)
            .map_or(0, |p| p.excluded);
        (e > 0).then_some((k, e))
    }) {
        eprintln!("warning: {excluded} instances excluded for {kind} after precoder failures");
    }

    let tag = a.common.tag.clone().unwrap_or_else(|| {
        format!(
            "K{}_M{}_as{}_ax{}",
            a.users,
            join(&antennas),
            a.alpha_s,
            a.alpha_x
        )
    });
    let header = RunManifest::new("ber", cfg.master_seed, tolerances(&cfg.bnb), &cfg).header();
    let table = BerTable {
        users: cfg.users,
        alpha_s: cfg.alpha_s,
        alpha_x: cfg.alpha_x,
        n_channels: cfg.n_channels,
        seed: cfg.master_seed,
        points: &points,
    };
    let path = report::write_ber_csv(&a.common.out, &tag, &header, &table)?;
    println!("wrote {} ({} rows)", path.display(), points.len());
    Ok(())
}

fn cmd_complexity(a: ComplexityArgs) -> Result<(), Failure> {
    let antennas = grid(&a.antennas)?;
    let mut cfg = SweepConfig::new(a.users, antennas.clone(), a.alpha_s, a.alpha_x);
    cfg.n_channels = a.channels;
    cfg.precoders = vec![PrecoderKind::Bnb];
    cfg.master_seed = a.common.seed;
    cfg.bnb = bnb_options(&a.common)?;
    cfg.threads = a.common.threads;
    cfg.validate()?;

    let samples = run_complexity_sweep(&cfg)?;
    let tag = a
        .common
        .tag
        .clone()
        .unwrap_or_else(|| format!("K{}_M{}_ax{}", a.users, join(&antennas), a.alpha_x));
    let header =
        RunManifest::new("complexity", cfg.master_seed, tolerances(&cfg.bnb), &cfg).header();
    let path =
        report::write_complexity_csv(&a.common.out, &tag, &header, cfg.master_seed, &samples)?;
    for s in &samples {
        println!(
            "M={:>2} alpha_x={} mean_branches={:.2} std={:.2} exhaustive={}",
            s.antennas, s.alpha_x, s.mean_branches, s.std_branches, s.exhaustive_count
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let antennas = grid(&a.antennas)?;
    let alpha_s = grid(&a.alpha_s)?;
    let alpha_x = grid(&a.alpha_x)?;
    let mut cfg = VerifyConfig::grid(
        a.users,
        &antennas,
        &alpha_s,
        &alpha_x,
        a.instances,
        a.common.seed,
    )?;
    cfg.bnb = bnb_options(&a.common)?;
    cfg.exhaustive_budget = a.common.budget;
    cfg.threads = a.common.threads;

    let report = run_verify(&cfg)?;
    println!(
        "{:<22} {:>9} {:>8} {:>8} {:>8} {:>10} {:>10}",
        "case", "instances", "optimal", "sandwich", "tree", "max_gap", "branches"
    );
    for c in &report.cases {
        println!(
            "{:<22} {:>9} {:>8} {:>8} {:>8} {:>10.1e} {:>10.2}",
            format!(
                "K={} M={} as={} ax={}",
                c.users, c.antennas, c.alpha_s, c.alpha_x
            ),
            c.instances,
            mark(c.optimality_passed()),
            mark(c.sandwich_passed()),
            mark(c.properties_passed()),
            c.max_epsilon_gap,
            c.mean_branches,
        );
        if !c.passed() {
            println!(
                "    epsilon mismatches {}, index mismatches {}, sandwich violations {}, \
                 lb violations {}, trace violations {}, no-prune mismatches {}, failures {}",
                c.epsilon_mismatches,
                c.index_mismatches,
                c.sandwich_violations,
                c.lb_monotonicity_violations,
                c.trace_violations,
                c.no_prune_mismatches,
                c.failures
            );
        }
    }
    if report.passed() {
        println!("verify: PASS");
        Ok(())
    } else {
        println!("verify: FAIL");
        Err(Failure::Verify)
    }
}
