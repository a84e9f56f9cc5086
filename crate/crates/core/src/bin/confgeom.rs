use std::process::ExitCode;

use clap::{Parser, Subcommand};

use confgeom::chart::Backend;
use confgeom::harness::{self, emit_report, Format, HarnessError, RunOptions};
use confgeom::holonomy::{classify, ClassifyOptions};

#[derive(Parser)]
#[command(name = "confgeom", version, about = "Run geometry verification scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Differentiation backend, overriding the scenario.
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<Backend>,
    /// Random seed, overriding the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiplier applied to upper-bound tolerances.
    #[arg(long, global = true)]
    tol_scale: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks of a scenario (file path or built-in name).
    Verify { scenario: String },
    /// Classify the holonomy of a scenario's metric at its base point.
    Holonomy { scenario: String },
    /// List built-in scenarios.
    ListScenarios,
    /// Print the check id to anchor table.
    Concordance,
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse()
}

fn holonomy(cli: &Cli, scenario: &str) -> Result<String, HarnessError> {
    let cfg = harness::load(scenario)?;
    let setup = harness::resolve(&cfg, cli.backend, cli.seed)?;
    let opts = ClassifyOptions { backend: setup.backend, extra_loops: setup.cfg.loops.extra, seed: setup.cfg.seed };
    let c = classify(&setup.metric, &setup.base, &opts).map_err(|e| HarnessError::Internal(e.to_string()))?;
    let ranks: Vec<usize> = c.invariant_distributions.iter().map(|d| d.rank()).collect();
    Ok(match cli.format {
        Format::Json => {
            let v = serde_json::json!({
                "scenario": setup.cfg.name,
                "base_point": setup.base,
                "label": c.label,
                "algebra_dim": c.algebra_dim,
                "invariant_ranks": ranks,
                "complex_structure": c.complex_structure.is_some(),
                "loops": c.estimate.transports.len(),
                "orthogonality_defect": c.estimate.orthogonality_defect,
            });
            format!("{}\n", serde_json::to_string_pretty(&v).expect("json value serializes"))
        }
        Format::Text => format!(
            "scenario {}\nlabel {}\nalgebra dimension {}\ninvariant ranks {:?}\ncomplex structure {}\n",
            setup.cfg.name,
            c.label,
            c.algebra_dim,
            ranks,
            c.complex_structure.is_some()
        ),
    })
}

fn run(cli: &Cli) -> Result<(String, i32), HarnessError> {
    match &cli.command {
        Command::Verify { scenario } => {
            let cfg = harness::load(scenario)?;
            let opts = RunOptions { backend: cli.backend, seed: cli.seed, tol_scale: cli.tol_scale };
            let report = harness::run_scenario(&cfg, &opts)?;
            Ok((emit_report(&report, cli.format), harness::report_exit_code(&report)))
        }
        Command::Holonomy { scenario } => Ok((holonomy(cli, scenario)?, 0)),
        Command::ListScenarios => {
            let mut out = String::new();
            for (name, _) in harness::BUILTIN {
                out.push_str(name);
                out.push('\n');
            }
            Ok((out, 0))
        }
        Command::Concordance => Ok((
            match cli.format {
                Format::Json => format!("{}\n", harness::concordance_json()),
                Format::Text => harness::concordance_text(),
            },
            0,
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((out, code)) => {
            print!("{out}");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("confgeom: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
