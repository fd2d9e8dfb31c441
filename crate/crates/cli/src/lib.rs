//! Batch driver for the verification suites.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use crate::config::Config;
use crate::report::{write_outputs, Check, Outcome, Summary, Table};

const CSV_HELP: &str = "\
Outputs (written to --out, one <command>.json summary per command):
  bubble-check.csv     r_lo,r_hi,samples,max_residual,error_estimate
  kernel-check.csv     element,max_residual,error_estimate
  mass.csv             radius,mass,closed_form,relative_deficit,error_estimate
  pohozaev-flat.csv    parameter,I0,I1,I2,I3,I4,residual,error_estimate   (parameter = R)
  pohozaev-curved.csv  parameter,I0,I1,I2,I3,I4,residual,error_estimate   (parameter = curvature amplitude)
  pohozaev-radial.csv  case,r,max_difference,error_estimate
  green-fit.csv        r,direction,beta,error_estimate
  represent.csv        field,modes,defect,error_estimate
  cnc.csv              jet,inverse_product,first_contraction,second_contraction,log_det_low_degree,identity_suite,error_estimate
  cnc-refinement.csv   step,deviation,local_order,error_estimate
  distance.csv         eps,y_norm,z_norm,euclid,geodesic,ratio_gap,fitted_c,error_estimate
  longrange.csv        eps,ring,name,value,target,band,error_estimate
  alpha-sweep.csv      eps,L,alpha,deviation,error_estimate
  mainest.csv          eps,weighted,core_ratio,c1,samples,error_estimate
  vrate.csv            setup,eps,offset,balance_norm,error_estimate

The config file is TOML with one optional table per command plus [sequence];
unknown keys are rejected.

Exit status: 0 when every check passes, 1 when a check fails or a computation
errors, 2 on usage or configuration errors.";

#[derive(Debug, Parser)]
#[command(name = "paneitz", version, about = "Numerical checks for the Q-curvature equation on four-manifolds", after_help = CSV_HELP)]
struct Cli {
    /// bubble-check, kernel-check, mass, pohozaev, green-fit, represent, cnc,
    /// distance, longrange, alpha-sweep, mainest, vrate or all.
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(commands::COMMANDS.iter().copied().chain(["all"])))]
    command: String,
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the top-level `seed` of the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

fn print_checks(command: &str, out: &Outcome) {
    for c in &out.checks {
        println!(
            "{} {command}/{}: value {:e} bound {:e} error {:e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.bound,
            c.error_estimate
        );
    }
    for e in &out.errors {
        println!("ERROR {command}: {e}");
    }
}

/// Run every suite and fold them into one outcome with prefixed check names.
fn run_all(cfg: &Config, seed: u64, quiet: bool) -> Vec<(String, Outcome)> {
    commands::COMMANDS
        .iter()
        .map(|&name| {
            let out = commands::run(name, cfg, seed);
            if !quiet {
                print_checks(name, &out);
            }
            (name.to_string(), out)
        })
        .collect()
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match &cli.config {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("paneitz: {e}");
            return 2;
        }
    };
    let seed = cli.seed.unwrap_or(cfg.seed);

    let runs = if cli.command == "all" {
        run_all(&cfg, seed, cli.quiet)
    } else {
        let out = commands::run(&cli.command, &cfg, seed);
        if !cli.quiet {
            print_checks(&cli.command, &out);
        }
        vec![(cli.command.clone(), out)]
    };

    let mut all = Outcome::default();
    for (name, out) in &runs {
        let summary = Summary::new(name, seed, out);
        if let Err(e) = write_outputs(&cli.out, &summary, &out.tables) {
            eprintln!("paneitz: cannot write {}: {e}", cli.out.display());
            return 2;
        }
        all.checks.extend(out.checks.iter().map(|c| Check {
            name: format!("{name}/{}", c.name),
            ..c.clone()
        }));
        all.errors.extend(out.errors.iter().map(|e| format!("{name}: {e}")));
    }
    let pass = if cli.command == "all" {
        let summary = Summary::new("all", seed, &all);
        if let Err(e) = write_outputs(&cli.out, &summary, &[] as &[Table]) {
            eprintln!("paneitz: cannot write {}: {e}", cli.out.display());
            return 2;
        }
        summary.pass
    } else {
        all.pass()
    };
    if !cli.quiet {
        println!("{}", if pass { "all checks passed" } else { "some checks failed" });
    }
    i32::from(!pass)
}
