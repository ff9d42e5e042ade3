//! Subcommands. Each writes its result to `out` and returns the process exit
//! code: 0 for YES / pass, 1 for NO / fail. Errors map to exit code 2 in `main`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use colltest::dist::{seeded_rng, AliasTable};
use colltest::format::{read_distribution, read_samples};
use colltest::moments::{self, MomentReport};
use colltest::oracle::{verify_grid, Formulas, GridReport, GridSpec, DEFAULT_BUDGET};
use colltest::testers::{required_samples_closeness, required_samples_uniformity, test_closeness, test_uniformity};
use colltest::{histogram, make_family, Decision, Distribution, Family, Histogram, SampleSet, Verdict};
use serde::Serialize;

use crate::sweep::{run_sweep, write_csv, MPolicy, MPolicyKind, SweepSpec, Tester};
use crate::svg::{log_log_plot, Series};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "colltest", version, about = "Collision-based uniformity and closeness testing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test whether samples come from the uniform distribution on [n].
    TestUniformity(UniformityArgs),
    /// Test whether two sample sets come from close distributions.
    TestCloseness(ClosenessArgs),
    /// Print closed-form moments and variance bounds.
    Moments(MomentsArgs),
    /// Check every closed form against exact enumeration on a grid of tiny instances.
    VerifyOracle(OracleArgs),
    /// Run a sample-complexity sweep and write CSV (and optionally SVG).
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: colltest::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct UniformityArgs {
    /// Sample file, one 1-based element per line.
    #[arg(long, conflicts_with = "family")]
    pub samples: Option<PathBuf>,
    /// Draw synthetic samples from this family instead of reading a file.
    #[arg(long, value_parser = parse_family, required_unless_present = "samples")]
    pub family: Option<Family>,
    #[arg(long)]
    pub param: Option<f64>,
    /// Domain size.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub eps: f64,
    /// Sample count for synthetic input. Defaults to the tester's formula.
    #[arg(long)]
    pub m: Option<u64>,
    /// Required with --family.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ClosenessArgs {
    #[arg(long, requires = "q_samples", conflicts_with_all = ["family", "p_family"])]
    pub p_samples: Option<PathBuf>,
    #[arg(long, requires = "p_samples")]
    pub q_samples: Option<PathBuf>,
    /// Family for the first distribution in synthetic mode.
    #[arg(long, value_parser = parse_family, default_value = "uniform")]
    pub p_family: Family,
    #[arg(long)]
    pub p_param: Option<f64>,
    /// Family for the second distribution in synthetic mode.
    #[arg(long, value_parser = parse_family, required_unless_present = "p_samples")]
    pub family: Option<Family>,
    #[arg(long)]
    pub param: Option<f64>,
    /// Domain size. Required in synthetic mode; inferred from the files otherwise.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub eps: f64,
    /// Norm promise. Defaults to max(||p||_2^2, ||q||_2^2) in synthetic mode.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    /// Distribution file (JSON array or one weight per line).
    #[arg(long, conflicts_with = "family")]
    pub p: Option<PathBuf>,
    #[arg(long)]
    pub q: Option<PathBuf>,
    #[arg(long, value_parser = parse_family, required_unless_present = "p", requires = "n")]
    pub family: Option<Family>,
    #[arg(long)]
    pub param: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: u64,
    /// Norm promise for the closeness bounds. Defaults to max(||p||_2^2, ||q||_2^2).
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Largest number of enumerated outcomes per instance.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long = "n", value_delimiter = ',', default_values_t = [2usize, 3])]
    pub ns: Vec<usize>,
    #[arg(long = "m", value_delimiter = ',', default_values_t = [2u64, 3, 4])]
    pub ms: Vec<u64>,
    /// Grid resolution: probabilities are multiples of 1/denominator.
    #[arg(long, default_value_t = 8)]
    pub denominator: u64,
    /// Flip the sign of the m^3 terms of Var[A] to check that the harness notices.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "uniformity")]
    pub tester: Tester,
    /// Soundness family.
    #[arg(long, value_parser = parse_family, default_value = "pm-perturbation")]
    pub family: Family,
    /// Family parameters. Omit with pm-perturbation to place the far input exactly at distance eps.
    #[arg(long, value_delimiter = ',')]
    pub param: Vec<f64>,
    #[arg(long = "n", value_delimiter = ',', required = true)]
    pub ns: Vec<usize>,
    #[arg(long = "eps", value_delimiter = ',', required = true)]
    pub epsilons: Vec<f64>,
    #[arg(long, value_enum, default_value = "formula")]
    pub m_policy: MPolicyKind,
    /// Sample sizes for the explicit policy.
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<u64>,
    #[arg(long, default_value_t = 200)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    /// CSV output path. Without it the CSV goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SVG plot of m* (binary search) against eps, or against n for a single eps.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Summary JSON path. With --out and no --summary, the summary goes to standard output.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::TestUniformity(a) => cmd_test_uniformity(&a, out),
        Command::TestCloseness(a) => cmd_test_closeness(&a, out),
        Command::Moments(a) => cmd_moments(&a, out),
        Command::VerifyOracle(a) => cmd_verify_oracle(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
    }
}

fn family_dist(kind: Family, n: usize, param: Option<f64>) -> Result<Distribution, CliError> {
    if kind.takes_param() && param.is_none() {
        return Err(CliError::Usage(format!("--param is required for family {kind}")));
    }
    Ok(make_family(kind, n, param.unwrap_or(0.0))?)
}

fn require_seed(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Usage("--seed is required for synthetic input".into()))
}

fn draw(d: &Distribution, m: u64, seed: u64, stream: u64) -> Histogram {
    AliasTable::new(d).sample_histogram(m, &mut seeded_rng(seed, stream))
}

fn emit_verdict(v: &Verdict, format: Format, out: &mut dyn Write) -> Result<i32, CliError> {
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string(v)?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.serialize(v)?;
            w.flush()?;
        }
    }
    Ok(match v.decision {
        Decision::Yes => 0,
        Decision::No => 1,
    })
}

pub fn cmd_test_uniformity(a: &UniformityArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (h, seed) = match (&a.samples, a.family) {
        (Some(path), _) => (histogram(&read_samples(path)?, a.n)?, a.seed),
        (None, Some(kind)) => {
            let seed = require_seed(a.seed)?;
            let p = family_dist(kind, a.n, a.param)?;
            let m = match a.m {
                Some(m) => m,
                None => required_samples_uniformity(a.n, a.eps)?,
            };
            (draw(&p, m, seed, 0), Some(seed))
        }
        (None, None) => return Err(CliError::Usage("give --samples or --family".into())),
    };
    let mut v = test_uniformity(&h, a.n, a.eps)?;
    if let Some(s) = seed {
        v = v.with_seed(s);
    }
    emit_verdict(&v, a.format, out)
}

fn domain_of(sets: &[&SampleSet]) -> usize {
    sets.iter()
        .flat_map(|s| s.draws().iter())
        .map(|&d| d as usize + 1)
        .max()
        .unwrap_or(1)
}

pub fn cmd_test_closeness(a: &ClosenessArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (hp, hq, seed) = match (&a.p_samples, &a.q_samples, a.family) {
        (Some(pp), Some(qp), _) => {
            let (sp, sq) = (read_samples(pp)?, read_samples(qp)?);
            let n = a.n.unwrap_or_else(|| domain_of(&[&sp, &sq]));
            (histogram(&sp, n)?, histogram(&sq, n)?, a.seed)
        }
        (None, None, Some(q_kind)) => {
            let seed = require_seed(a.seed)?;
            let n = a
                .n
                .ok_or_else(|| CliError::Usage("--n is required for synthetic input".into()))?;
            let p = family_dist(a.p_family, n, a.p_param)?;
            let q = family_dist(q_kind, n, a.param)?;
            let m = match a.m {
                Some(m) => m,
                None => {
                    let b = a
                        .b
                        .unwrap_or_else(|| p.collision_probability().max(q.collision_probability()));
                    required_samples_closeness(b, a.eps)?
                }
            };
            (draw(&p, m, seed, 0), draw(&q, m, seed, 1), Some(seed))
        }
        _ => return Err(CliError::Usage("give --p-samples and --q-samples, or --family".into())),
    };
    let mut v = test_closeness(&hp, &hq, a.eps)?;
    if let Some(s) = seed {
        v = v.with_seed(s);
    }
    emit_verdict(&v, a.format, out)
}

#[derive(Debug, Serialize)]
struct ClosenessMomentsOutput {
    m: u64,
    b: f64,
    expected_z: f64,
    z: MomentReport,
    a: MomentReport,
    s_p: MomentReport,
    s_q: MomentReport,
}

fn load_dist(path: Option<&Path>, family: Option<Family>, n: Option<usize>, param: Option<f64>) -> Result<Distribution, CliError> {
    match (path, family, n) {
        (Some(p), _, _) => Ok(read_distribution(p)?),
        (None, Some(kind), Some(n)) => family_dist(kind, n, param),
        _ => Err(CliError::Usage("give --p, or --family with --n".into())),
    }
}

fn check_report(name: &str, r: &MomentReport) -> Result<(), CliError> {
    if let Some(v) = r.variance_exact {
        if v > r.variance_bound * (1.0 + 1e-12) + 1e-12 {
            return Err(CliError::Usage(format!(
                "{name}: exact variance {v} exceeds bound {}",
                r.variance_bound
            )));
        }
    }
    Ok(())
}

fn report_rows(prefix: &str, r: &MomentReport, rows: &mut Vec<(String, f64)>) {
    rows.push((format!("{prefix}expectation"), r.expectation));
    if let Some(v) = r.variance_exact {
        rows.push((format!("{prefix}variance_exact"), v));
    }
    rows.push((format!("{prefix}variance_bound"), r.variance_bound));
    for (k, v) in &r.terms {
        rows.push((format!("{prefix}{k}"), *v));
    }
}

fn write_key_values(rows: &[(String, f64)], out: &mut dyn Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(&mut *out);
    w.write_record(["name", "value"])?;
    for (k, v) in rows {
        w.write_record([k.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_moments(a: &MomentsArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let p = load_dist(a.p.as_deref(), a.family, a.n, a.param)?;
    let Some(q_path) = &a.q else {
        let r = moments::moments_s(&p, a.m)?;
        check_report("s", &r)?;
        match a.format {
            Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&r)?)?,
            Format::Csv => {
                let mut rows = Vec::new();
                report_rows("", &r, &mut rows);
                write_key_values(&rows, out)?;
            }
        }
        return Ok(0);
    };
    let q = read_distribution(q_path)?;
    let b = a
        .b
        .unwrap_or_else(|| p.collision_probability().max(q.collision_probability()));
    let z = moments::moments_z(&p, &q, a.m, b)?;
    let out_val = ClosenessMomentsOutput {
        m: a.m,
        b,
        expected_z: z.expectation,
        a: moments::exact_var_a_terms(&p, &q, a.m)?,
        s_p: moments::moments_s(&p, a.m)?,
        s_q: moments::moments_s(&q, a.m)?,
        z,
    };
    for (name, r) in [("Z", &out_val.z), ("A", &out_val.a), ("s_p", &out_val.s_p), ("s_q", &out_val.s_q)] {
        check_report(name, r)?;
    }
    match a.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&out_val)?)?,
        Format::Csv => {
            let mut rows = vec![("m".to_string(), a.m as f64), ("b".to_string(), b)];
            report_rows("z.", &out_val.z, &mut rows);
            report_rows("a.", &out_val.a, &mut rows);
            report_rows("s_p.", &out_val.s_p, &mut rows);
            report_rows("s_q.", &out_val.s_q, &mut rows);
            write_key_values(&rows, out)?;
        }
    }
    Ok(0)
}

fn faulty_var_a(p: &Distribution, q: &Distribution, m: u64) -> colltest::Result<f64> {
    let r = moments::exact_var_a_terms(p, q, m)?;
    let exact = r.variance_exact.unwrap_or(f64::NAN);
    Ok(exact - 2.0 * (r.terms["var_m3"] + r.terms["cov_m3"]))
}

pub fn cmd_verify_oracle(a: &OracleArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let spec = GridSpec {
        ns: a.ns.clone(),
        ms: a.ms.clone(),
        denominator: a.denominator,
        budget: a.budget,
    };
    let mut formulas = Formulas::default();
    if a.inject_fault {
        formulas.exact_var_a = faulty_var_a;
    }
    let report: GridReport = verify_grid(&spec, &formulas)?;
    match a.format {
        None => {
            writeln!(out, "{report}")?;
            writeln!(
                out,
                "{} (max relative deviation {:.3e}, tolerance {:.0e})",
                if report.passed() { "PASS" } else { "FAIL" },
                report.max_deviation(),
                report.tolerance
            )?;
        }
        Some(Format::Json) => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
        Some(Format::Csv) => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["check", "cases", "worst_rel_dev", "violations"])?;
            for f in &report.formulas {
                w.write_record([f.name.clone(), f.cases.to_string(), f.worst_rel_dev.to_string(), String::new()])?;
            }
            for b in &report.bounds {
                w.write_record([b.name.clone(), b.cases.to_string(), String::new(), b.violations.to_string()])?;
            }
            w.flush()?;
        }
    }
    Ok(if report.passed() { 0 } else { 1 })
}

pub fn sweep_spec(a: &SweepArgs) -> SweepSpec {
    SweepSpec {
        tester: a.tester,
        family: a.family,
        params: a.param.clone(),
        ns: a.ns.clone(),
        epsilons: a.epsilons.clone(),
        m_policy: match a.m_policy {
            MPolicyKind::Formula => MPolicy::Formula,
            MPolicyKind::Explicit => MPolicy::Explicit(a.m.clone()),
            MPolicyKind::BinarySearch => MPolicy::BinarySearch,
        },
        trials: a.trials,
        seed: a.seed,
    }
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let spec = sweep_spec(a);
    let result = run_sweep(&spec)?;
    match &a.out {
        Some(path) => write_csv(&result.rows, std::fs::File::create(path)?)?,
        None => write_csv(&result.rows, &mut *out)?,
    }
    let summary = serde_json::to_string_pretty(&result.summary)?;
    match (&a.summary, &a.out) {
        (Some(path), _) => std::fs::write(path, format!("{summary}\n"))?,
        (None, Some(_)) => writeln!(out, "{summary}")?,
        (None, None) => {}
    }
    if let Some(path) = &a.svg {
        let cells = &result.summary.cells;
        let by_eps = spec.epsilons.len() > 1 || spec.ns.len() == 1;
        let series: Vec<Series> = if by_eps {
            spec.ns
                .iter()
                .map(|&n| Series {
                    label: format!("n = {n}"),
                    points: cells
                        .iter()
                        .filter(|c| c.n == n)
                        .filter_map(|c| c.m_star.map(|m| (c.eps, m as f64)))
                        .collect(),
                })
                .collect()
        } else {
            vec![Series {
                label: format!("eps = {}", spec.epsilons[0]),
                points: cells
                    .iter()
                    .filter_map(|c| c.m_star.map(|m| (c.n as f64, m as f64)))
                    .collect(),
            }]
        };
        let svg = if by_eps {
            log_log_plot("smallest sufficient m vs eps", "eps", "m*", &series, -2.0)
        } else {
            log_log_plot("smallest sufficient m vs n", "n", "m*", &series, 0.5)
        };
        std::fs::write(path, svg)?;
    }
    Ok(0)
}
