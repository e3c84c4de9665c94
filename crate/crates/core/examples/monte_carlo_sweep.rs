//! A small Monte-Carlo sweep: configuration text in, CSV records, summary
//! table and plot-ready series out.

use mbf::harness::{emit_plot_data, format_summary, run_experiment, summarize, write_csv, ExperimentConfig};

const CONFIG: &str = r#"
[experiment]
scenario = "ssm1"
filters = ["ekf", "rbpf", "dbf", "sdbf"]
particles = [10, 50, 100]
runs = 5
seed = 7
timing = false

[ssm1]
horizon = 150
"#;

fn main() -> mbf::Result<()> {
    let cfg = ExperimentConfig::parse(CONFIG)?;
    let records = run_experiment(&cfg)?;
    print!("{}", format_summary(&summarize(&records)));

    let dir = std::env::temp_dir().join("mbf-sweep-example");
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join("results.csv");
    write_csv(&records, std::fs::File::create(&csv)?)?;
    for path in emit_plot_data(&csv, &dir.join("figs"))? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
