use clap::Parser;
use percolab_cli::{run_experiment, Cli, ExperimentSpec, RunError};

fn main() {
    let cli = Cli::parse();
    let result = ExperimentSpec::from_cli(&cli)
        .map_err(RunError::from)
        .and_then(|spec| run_experiment(&spec));
    match result {
        Ok(manifest) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            for f in &manifest.files {
                println!("{} {}", f.sha256, f.name);
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
