//! One module per subcommand, plus the little I/O helpers they share.

pub mod detect;
pub mod estimate;
pub mod filter;
pub mod fleet_gen;
pub mod pipeline;
pub mod preprocess;
pub mod sensitivity;
pub mod simulate;
pub mod sweep;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ctmc_hums_core::observation::ObservationSeries;

/// Read a `t,y` observation series CSV (the format `simulate` writes).
pub fn read_series(path: &Path) -> Result<ObservationSeries<f64>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    ObservationSeries::read_csv(BufReader::new(f))
        .with_context(|| format!("parsing observation series {}", path.display()))
}

/// Read a posterior trajectory CSV (`t,p_state_0,...` as written by the
/// filter); returns times and per-point probability vectors.
pub fn read_posterior(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        bail!("{}: empty file", path.display());
    };
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if cols.first() != Some(&"t") || cols.len() < 2 || !cols[1..].iter().all(|c| c.starts_with("p_")) {
        bail!("{}: expected header `t,p_state_0,...`, got `{header}`", path.display());
    }
    let n = cols.len() - 1;
    let mut times = Vec::new();
    let mut probs = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 1 {
            bail!("{}:{}: expected {} fields, got {}", path.display(), idx + 1, n + 1, fields.len());
        }
        let parse = |raw: &str| -> Result<f64> {
            raw.trim()
                .parse()
                .with_context(|| format!("{}:{}: bad number `{raw}`", path.display(), idx + 1))
        };
        times.push(parse(fields[0])?);
        probs.push(fields[1..].iter().map(|f| parse(f)).collect::<Result<Vec<f64>>>()?);
    }
    if probs.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok((times, probs))
}
