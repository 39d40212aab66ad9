use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use galcol::assembly::Scheme;
use galcol::bench::{
    dump_newton_matrix, run_channel_compare, run_convergence_study, run_dfg, write_channel_compare,
    write_convergence_report, write_dfg, RunConfig, Scenario,
};
use galcol::forms::BcMode;

#[derive(Parser)]
#[command(name = "galcol", version, about = "Space-time Navier–Stokes benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// INI file with `key = value` settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, global = true, value_enum)]
    bc: Option<BcArg>,
    /// Finest refinement level.
    #[arg(long, global = true)]
    levels: Option<u32>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Serial assembly.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution convergence study.
    Converge {
        /// Also write the level-0 Newton matrix as `matrix.mtx`.
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Strong versus Nitsche boundary conditions in the Re = 2 channel.
    ChannelCompare,
    /// Drag and lift for the ramped flow around the cylinder.
    Dfg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Gcc13,
    Cgp1,
}

#[derive(Clone, Copy, ValueEnum)]
enum BcArg {
    Strong,
    Nitsche,
}

fn build_config(cli: &Cli, scenario: Scenario) -> galcol::Result<RunConfig> {
    let mut config = RunConfig::defaults(scenario);
    if let Some(path) = &cli.config {
        config.apply_ini_file(path)?;
        config.scenario = scenario;
    }
    if let Some(s) = cli.scheme {
        config.scheme = match s {
            SchemeArg::Gcc13 => Scheme::Gcc13,
            SchemeArg::Cgp1 => Scheme::Cgp1,
        };
    }
    if let Some(b) = cli.bc {
        config.bc = match b {
            BcArg::Strong => BcMode::Strong,
            BcArg::Nitsche => BcMode::Nitsche,
        };
    }
    if let Some(l) = cli.levels {
        config.levels = l;
    }
    if let Some(o) = &cli.out {
        config.out = o.clone();
    }
    config.deterministic |= cli.deterministic;
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> galcol::Result<()> {
    match &cli.command {
        Command::Converge { dump_matrix } => {
            let config = build_config(cli, Scenario::Converge)?;
            let report = run_convergence_study(&config)?;
            write_convergence_report(&config, &report)?;
            for (i, r) in report.rows.iter().enumerate() {
                match (&r.errors, &r.failure) {
                    (Some(e), _) => {
                        let eoc = report.eoc(i).map(|o| format!(" eoc {:.2} {:.2} {:.2} {:.2}", o[0], o[1], o[2], o[3]));
                        println!(
                            "level {} tau {:.4e} dofs {} errors {:.3e} {:.3e} {:.3e} {:.3e}{}",
                            r.level, r.tau, r.dofs, e.v_l2l2, e.p_l2l2, e.v_linf, e.p_linf, eoc.unwrap_or_default()
                        );
                    }
                    (None, Some(f)) => println!("level {} failed: {f}", r.level),
                    (None, None) => {}
                }
            }
            if *dump_matrix {
                dump_newton_matrix(&config, 0, &config.out.join("matrix.mtx"))?;
            }
        }
        Command::ChannelCompare => {
            let config = build_config(cli, Scenario::ChannelCompare)?;
            println!("Re = {}", galcol::bench::reynolds_number(config.nu));
            let cmp = run_channel_compare(&config)?;
            write_channel_compare(&config, &cmp)?;
            println!(
                "relative difference: speed {:.3e}, pressure {:.3e}",
                cmp.speed_difference, cmp.pressure_difference
            );
        }
        Command::Dfg => {
            let config = build_config(cli, Scenario::Dfg)?;
            let series = run_dfg(&config)?;
            write_dfg(&config, &series)?;
            if let (Some(t), Some(f)) = (series.times.last(), series.forces.last()) {
                println!("{} steps, t = {t:.3}: c_D = {:.5}, c_L = {:.5}", series.times.len(), f.c_drag, f.c_lift);
            }
            if let Some(msg) = &series.failure {
                return Err(galcol::Error::Config(format!("run stopped early: {msg}")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
