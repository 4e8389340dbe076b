use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use gbq::config::RunConfig;
use gbq::run::{
    bench, bench_csv, gen_init, residual_csv, run, solve, trees_report, write_init, Timings,
    BENCH_RADII,
};

#[derive(Parser)]
#[command(
    name = "gbq",
    version,
    about = "Quasi-periodic good Boussinesq spectral laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded initial data c0, c0p.
    GenInit(Common),
    /// Full pipeline: data, Picard, RK4, bound checks, residual; writes all artifacts.
    Solve(Common),
    /// Run the pipeline in memory and print every bound report as JSON.
    Verify(Common),
    /// Tree-label counts, weights and exact combinatorial sums.
    Trees(Common),
    /// Write the per-node spectral residual of the converged trajectory.
    Residual(Common),
    /// Time the weighted self-convolution for N in 4, 6, 8, 10, 12.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Minimum seconds spent per radius.
        #[arg(long, default_value_t = 0.2)]
        min_seconds: f64,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; defaults are used for missing keys.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// KEY=VAL applied after the config file; VAL is parsed as JSON, else as a string.
    #[arg(long = "override", value_name = "KEY=VAL")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let text = match &self.config {
            Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => String::new(),
        };
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        Ok(RunConfig::from_json_with_overrides(&text, &overrides)?)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn status(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn execute(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::GenInit(c) => {
            let cfg = c.load()?;
            let (c0, c0p) = gen_init(&cfg)?;
            for p in write_init(c.out_dir()?, &cfg, &c0, &c0p)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve(c) => {
            let cfg = c.load()?;
            let (manifest, _) = run(&cfg, c.out_dir()?)?;
            for r in &manifest.reports {
                println!("{:<28} {}", r.name, if r.pass { "pass" } else { "FAIL" });
            }
            println!("manifest: {}", c.out.join("manifest.json").display());
            Ok(status(manifest.pass))
        }
        Command::Verify(c) => {
            let cfg = c.load()?;
            let sol = solve(&cfg, &mut Timings::default())?;
            let text = serde_json::to_string_pretty(&sol.reports)?;
            fs::write(c.out_dir()?.join("reports.json"), &text)?;
            println!("{text}");
            Ok(status(sol.pass()))
        }
        Command::Trees(c) => {
            c.load()?;
            let report = trees_report()?;
            let text = serde_json::to_string_pretty(&report)?;
            fs::write(c.out_dir()?.join("trees.json"), &text)?;
            println!("{text}");
            let pass = report["label_weight_sums"]["pass"].as_bool() == Some(true)
                && report["factorial_composition_sums"]["pass"].as_bool() == Some(true);
            Ok(status(pass))
        }
        Command::Residual(c) => {
            let cfg = c.load()?;
            let sol = solve(&cfg, &mut Timings::default())?;
            let text = residual_csv(&sol.residual)?;
            let dir = c.out_dir()?;
            fs::write(dir.join("residual.csv"), &text)?;
            let verdict: Vec<_> = sol
                .reports
                .iter()
                .filter(|r| r.name == "residual_second_order")
                .collect();
            let json = serde_json::to_string_pretty(&verdict)?;
            fs::write(dir.join("residual.json"), &json)?;
            println!("{json}");
            Ok(status(verdict.iter().all(|r| r.pass)))
        }
        Command::Bench {
            common,
            min_seconds,
        } => {
            let cfg = common.load()?;
            let text = bench_csv(&bench(&cfg, &BENCH_RADII, min_seconds)?)?;
            fs::write(common.out_dir()?.join("bench.csv"), &text)?;
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
