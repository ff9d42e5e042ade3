//! Text formats for distributions and samples.
//!
//! Distribution files are either a JSON array of weights or one decimal per
//! line. Weights are normalized on load. Sample files hold one 1-based
//! element per line. Blank lines and lines starting with `#` are skipped in
//! both line formats.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::dist::{Distribution, SampleSet};
use crate::error::{Error, Result};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_distribution(text: &str) -> Result<Distribution> {
    let trimmed = text.trim_start();
    let weights: Vec<f64> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?
    } else {
        content_lines(text)
            .map(|(line, l)| {
                l.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("{l:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?
    };
    Distribution::new(&weights)
}

pub fn read_distribution(path: &Path) -> Result<Distribution> {
    parse_distribution(&std::fs::read_to_string(path)?)
}

/// Parses 1-based sample lines into a [`SampleSet`] of 0-based draws.
pub fn parse_samples<R: BufRead>(reader: R) -> Result<SampleSet> {
    let mut draws = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let v: u64 = l.parse().map_err(|e| Error::Parse {
            line: i + 1,
            msg: format!("{l:?}: {e}"),
        })?;
        if v == 0 || v > u32::MAX as u64 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("element {v} is not in 1..={}", u32::MAX),
            });
        }
        draws.push((v - 1) as u32);
    }
    Ok(SampleSet::from_draws(draws))
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let f = std::fs::File::open(path)?;
    parse_samples(std::io::BufReader::new(f))
}

/// Writes one 1-based element per line.
pub fn write_samples<W: Write>(samples: &SampleSet, mut out: W) -> Result<()> {
    for &d in samples.draws() {
        writeln!(out, "{}", d as u64 + 1)?;
    }
    Ok(())
}
