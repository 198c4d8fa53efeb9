//! Runs a config file through the same path as the command-line tool.
//!
//! cargo run --release --example run_config -- configs/quadratic.toml compare out/quadratic

use std::path::PathBuf;

use clap::ValueEnum;

use ehrenfest_lab::cli::{run, CommandName, RunManifest};

fn main() -> ehrenfest_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "configs/quadratic.toml".into()));
    let name = args.next().unwrap_or_else(|| "compare".into());
    let command = CommandName::from_str(&name, true).map_err(ehrenfest_lab::Error::Config)?;
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let manifest = RunManifest::new(command, config, out.clone());
    let passed = run(&manifest)?;
    println!("{} -> {}", if passed { "pass" } else { "fail" }, out.display());
    Ok(())
}
