use cbr_twin::pipeline::{Pipeline, PipelineError, RunConfig};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cbr-twin",
    version,
    about = "GBDT / CBR twin training, explanation and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic dataset, schema and ground truth
    Generate(Common),
    /// Split the data and fit the gradient-boosted model
    TrainGbdt(Common),
    /// Build the case base with the model's importance as weights
    BuildCbr(Common),
    /// Predict the test split with both models
    Predict(Common),
    /// Explain test predictions with kernelSHAP, LIME and additive CBR
    Explain(Common),
    /// Build the report from persisted predictions and explanations
    Evaluate(Common),
    /// Run every stage in order
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed_split: Option<u64>,
    #[arg(long)]
    seed_gbdt: Option<u64>,
    #[arg(long)]
    seed_shap: Option<u64>,
    #[arg(long)]
    seed_lime: Option<u64>,
    /// JSON object mapping feature names to raw case-base weights
    #[arg(long)]
    weights_override: Option<PathBuf>,
}

impl Common {
    fn pipeline(&self) -> Result<Pipeline, PipelineError> {
        let mut cfg = RunConfig::from_file(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        let seeds = &mut cfg.seeds;
        seeds.split = self.seed_split.unwrap_or(seeds.split);
        seeds.gbdt = self.seed_gbdt.unwrap_or(seeds.gbdt);
        seeds.shap = self.seed_shap.unwrap_or(seeds.shap);
        seeds.lime = self.seed_lime.unwrap_or(seeds.lime);
        if let Some(path) = &self.weights_override {
            cfg.add_weight_overrides_file(path)?;
        }
        Pipeline::new(cfg)
    }
}

fn execute(command: &Command) -> Result<String, PipelineError> {
    match command {
        Command::Generate(c) => {
            let p = c.pipeline()?;
            p.generate()?;
            Ok(format!(
                "wrote synthetic data to {}",
                p.config().out_dir.display()
            ))
        }
        Command::TrainGbdt(c) => {
            let model = c.pipeline()?.train_gbdt()?;
            Ok(format!("trained {} trees", model.trees.len()))
        }
        Command::BuildCbr(c) => {
            let cb = c.pipeline()?.build_cbr()?;
            Ok(format!("case base with {} cases", cb.len()))
        }
        Command::Predict(c) => {
            let p = c.pipeline()?.predict()?;
            Ok(format!("predicted {} test instances", p.actual.len()))
        }
        Command::Explain(c) => {
            let s = c.pipeline()?.explain()?;
            Ok(format!(
                "explained {} instances ({} excluded from additive CBR)",
                s.explained, s.additive_cbr_excluded
            ))
        }
        Command::Evaluate(c) | Command::Run(c) => {
            let p = c.pipeline()?;
            let report = if matches!(command, Command::Run(_)) {
                p.run()?
            } else {
                p.evaluate()?
            };
            Ok(report.to_markdown())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
