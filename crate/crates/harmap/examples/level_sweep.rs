//! Sweep one problem over a range of refinement levels and print the table.
//!
//! ```text
//! cargo run --release --example level_sweep -- p1 nc tr 1 1 6
//! ```

use harmap::harness::{format_table, run_benchmark, RunConfig};

fn main() -> harmap::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let mut cfg = RunConfig::new(arg(0, "p1").parse()?, arg(1, "nc").parse()?, arg(2, "tr").parse()?);
    cfg.order = arg(3, "1").parse().expect("order");
    cfg.min_level = arg(4, "1").parse().expect("min level");
    cfg.max_level = Some(arg(5, "5").parse().expect("max level"));
    let report = run_benchmark(&cfg)?;
    print!("{}", format_table(&report));
    Ok(())
}
