use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::runner::{read_csv, summarize, SummaryRow};
use crate::error::Result;

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| x.to_string())
}

/// Target count encoded in an SSM#2 scenario label.
fn targets_of(scenario: &str) -> Option<usize> {
    scenario.strip_prefix("ssm2_n")?.parse().ok()
}

/// Writes whitespace-delimited series files for the CSV at `csv_path`
/// into `out_dir` and returns their paths.
///
/// `summary.dat` holds every aggregate. Each single-target scenario gets
/// one `<scenario>_<metric>_<filter>.dat` file per RMSE metric with
/// columns `Np value`; the SSM#2 sweep gets `ssm2_<metric>_<filter>.dat`
/// files with columns `N Np value` for `p_fd`, `rmse_l` and `rmse_n`.
pub fn emit_plot_data(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let file = std::fs::File::open(csv_path).map_err(|e| crate::Error::Io(format!("{}: {e}", csv_path.display())))?;
    let rows = summarize(&read_csv(file)?);
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let mut summary = String::from("scenario filter Np ni runs rmse_l rmse_n p_fd flops wall_ms\n");
    for r in &rows {
        writeln!(
            summary,
            "{} {} {} {} {} {} {} {} {} {}",
            r.scenario,
            r.filter,
            r.n_p,
            r.n_i.map_or_else(|| "nan".to_string(), |n| n.to_string()),
            r.runs,
            num(r.rmse_l),
            num(r.rmse_n),
            r.p_fd,
            num(r.flops),
            num(r.wall_ms)
        )
        .expect("writing to a String");
    }
    written.push(write(out_dir, "summary.dat", &summary)?);

    type Metric = (&'static str, fn(&SummaryRow) -> Option<f64>);
    let rmse: [Metric; 2] = [("rmse_l", |r| r.rmse_l), ("rmse_n", |r| r.rmse_n)];
    let ssm2: [Metric; 3] = [("p_fd", |r| Some(r.p_fd)), ("rmse_l", |r| r.rmse_l), ("rmse_n", |r| r.rmse_n)];

    let mut keys: Vec<(String, _)> = Vec::new();
    for r in &rows {
        let group = if targets_of(&r.scenario).is_some() { "ssm2".to_string() } else { r.scenario.clone() };
        if !keys.contains(&(group.clone(), r.filter)) {
            keys.push((group, r.filter));
        }
    }
    for (group, filter) in keys {
        let members: Vec<&SummaryRow> = rows
            .iter()
            .filter(|r| r.filter == filter)
            .filter(|r| if group == "ssm2" { targets_of(&r.scenario).is_some() } else { r.scenario == group })
            .collect();
        let metrics: &[Metric] = if group == "ssm2" { &ssm2 } else { &rmse };
        for (name, get) in metrics {
            let mut text = String::new();
            if group == "ssm2" {
                text += "N Np value\n";
                let mut sorted = members.clone();
                sorted.sort_by_key(|r| (targets_of(&r.scenario), r.n_p));
                for r in sorted {
                    writeln!(text, "{} {} {}", targets_of(&r.scenario).unwrap_or(0), r.n_p, num(get(r))).expect("String");
                }
            } else {
                text += "Np value\n";
                for r in &members {
                    writeln!(text, "{} {}", r.n_p, num(get(r))).expect("String");
                }
            }
            written.push(write(out_dir, &format!("{group}_{name}_{filter}.dat"), &text)?);
        }
    }
    Ok(written)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}
