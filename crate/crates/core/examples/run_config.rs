//! Run a named experiment from a config and read back its artifacts.

use locball::runner::{run_experiment, ExperimentConfig};

fn main() -> locball::Result<()> {
    let outdir = std::env::temp_dir().join("locball-example");
    let text = format!(
        "experiment = \"smallball\"\nseed = 1\noutdir = {:?}\n\n[family]\nkind = \"gaussian\"\n\n[params]\ndims = [2, 4]\nN = 100000\n",
        outdir.display().to_string()
    );
    // Each interval covers with probability about 0.95 and the cells share
    // samples, so an occasional seed misses the coverage quota.
    let config = ExperimentConfig::from_toml_str(&text)?;
    let result = run_experiment(&config)?;
    for c in &result.outcome_checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("{}", std::fs::read_to_string(&result.csv)?);
    Ok(())
}
