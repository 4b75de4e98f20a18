use std::fs::File;
use std::io::{self, Write};

use anyhow::{anyhow, bail, Context, Result};
use qdistill::filters::IndexPartition;
use qdistill::montecarlo::{binomial_expected, run_stats};
use qdistill::states::{GhzSpec, WSpec};
use qdistill::sweep::{format_g12, run_sweep, SweepGrid, SweepMode, COLUMNS};
use qdistill::ted::{
    closed_form_success, overall_success, run_ted, ProtocolConfig, Representation,
};
use qdistill::tensor::DenseCap;
use qdistill::tsd::{run_tsd, SteeringConfig};
use qdistill::Error;

use crate::cli::{FamilyArg, Format, ModeArg, OutputArgs, Repr, SpecArgs, SteeringArgs, SweepArgs};

/// A header plus rows of already formatted fields.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write<W: Write>(&self, w: W, format: Format) -> Result<()> {
        let delimiter = match format {
            Format::Csv => b',',
            Format::Tsv => b'\t',
        };
        let mut wtr = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        wtr.write_record(&self.header)?;
        for row in &self.rows {
            wtr.write_record(row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn emit(table: &Table, output: &OutputArgs) -> Result<()> {
    match &output.out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            table.write(file, output.format)
        }
        None => table.write(io::stdout().lock(), output.format),
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| anyhow!(Error::InvalidSpec(format!("bad {what} entry `{t}`"))))
        })
        .collect()
}

/// `2..10` (inclusive) or a comma list, possibly mixed: `2..4,8`.
pub fn parse_usize_axis(text: &str, what: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: usize = parse_list(lo, what)?[0];
            let hi: usize = parse_list(hi.trim_start_matches('='), what)?[0];
            out.extend(lo..=hi);
        } else {
            out.extend(parse_list::<usize>(part, what)?);
        }
    }
    Ok(out)
}

pub fn parse_partition(d: usize, text: &str) -> Result<IndexPartition> {
    let blocks = text
        .split('/')
        .map(|block| {
            let block = block.trim();
            if block.is_empty() {
                Ok(Vec::new())
            } else {
                block
                    .split(',')
                    .map(|i| {
                        i.trim()
                            .parse::<usize>()
                            .map_err(|_| anyhow!(Error::BadPartition(format!("bad index `{i}`"))))
                    })
                    .collect()
            }
        })
        .collect::<Result<Vec<Vec<usize>>>>()?;
    Ok(IndexPartition::new(d, blocks)?)
}

fn representation(r: Repr) -> Representation {
    match r {
        Repr::Compact => Representation::Compact,
        Repr::Dense => Representation::Dense,
    }
}

pub fn ghz_config(args: &SpecArgs) -> Result<ProtocolConfig> {
    let alphas: Vec<f64> = parse_list(
        args.alphas
            .as_deref()
            .ok_or_else(|| anyhow!(Error::InvalidSpec("--alphas is required".into())))?,
        "alpha",
    )?;
    let d = alphas.len();
    if let Some(expected) = args.d {
        if expected != d {
            bail!(Error::DimensionMismatch { expected, found: d });
        }
    }
    let p = args
        .p
        .ok_or_else(|| anyhow!(Error::InvalidSpec("--p is required".into())))?;
    let spec = GhzSpec::new(alphas, p)?;
    let q = args.q.unwrap_or(1);
    let mut cfg = ProtocolConfig::ghz(spec, args.n, q)?;
    if let Some(text) = &args.partition {
        cfg = cfg.with_partition(parse_partition(d, text)?)?;
    }
    Ok(cfg
        .with_representation(representation(args.representation))
        .with_dense_cap(DenseCap::from_env()))
}

pub fn w_config(args: &SpecArgs) -> Result<ProtocolConfig> {
    let betas: Vec<f64> = parse_list(
        args.betas
            .as_deref()
            .ok_or_else(|| anyhow!(Error::InvalidSpec("--betas is required".into())))?,
        "beta",
    )?;
    if let Some(expected) = args.p {
        if expected != betas.len() {
            bail!(Error::DimensionMismatch {
                expected,
                found: betas.len()
            });
        }
    }
    if args.partition.is_some() {
        bail!(Error::BadPartition(
            "partitions apply to GHZ runs only".into()
        ));
    }
    let spec = WSpec::new(betas)?;
    let p = spec.p();
    if let Some(q) = args.q {
        if q != p - 1 {
            bail!(Error::InvalidConfig(format!(
                "W distillation needs Q = P − 1 = {}, got {q}",
                p - 1
            )));
        }
    }
    Ok(ProtocolConfig::w(spec, args.n)?
        .with_representation(representation(args.representation))
        .with_dense_cap(DenseCap::from_env()))
}

pub fn ted(cfg: &ProtocolConfig) -> Result<Table> {
    let r = run_ted(cfg)?;
    let spec = cfg.spec();
    let mut t = Table::new(&[
        "family",
        "d",
        "p",
        "q",
        "n",
        "ps_per_copy",
        "ps_overall",
        "fidelity_closed",
        "fidelity_numeric",
    ]);
    t.rows.push(vec![
        spec.family().as_str().to_string(),
        spec.d().to_string(),
        spec.p().to_string(),
        cfg.q().to_string(),
        cfg.n_copies().to_string(),
        format_g12(r.p_success_per_copy),
        format_g12(r.p_success_overall),
        format_g12(r.fidelity_closed_form),
        format_g12(r.fidelity_numeric),
    ]);
    Ok(t)
}

pub fn tsd(args: &SteeringArgs, family: FamilyArg) -> Result<Table> {
    let base = match family {
        FamilyArg::Ghz => ghz_config(&args.spec)?,
        FamilyArg::W => w_config(&args.spec)?,
    };
    let cfg = SteeringConfig::new(base, args.s)?;
    let r = run_tsd(&cfg)?;
    let spec = cfg.base().spec();
    let mut t = Table::new(&[
        "family",
        "d",
        "p",
        "q",
        "s",
        "n",
        "ps_per_copy",
        "ps_overall",
        "fidelity_closed",
        "assemblage_fidelity",
        "minimizing_setting",
        "threshold",
        "members",
    ]);
    let setting: String = r.minimizing_setting.iter().map(|x| x.to_string()).collect();
    t.rows.push(vec![
        spec.family().as_str().to_string(),
        spec.d().to_string(),
        spec.p().to_string(),
        cfg.base().q().to_string(),
        cfg.s().to_string(),
        cfg.base().n_copies().to_string(),
        format_g12(r.p_success_per_copy),
        format_g12(r.p_success_overall),
        format_g12(r.fidelity_closed_form),
        format_g12(r.assemblage_fidelity),
        setting,
        r.is_threshold.to_string(),
        r.member_count.to_string(),
    ]);
    Ok(t)
}

pub fn sweep_grid(args: &SweepArgs) -> Result<SweepGrid> {
    let invalid = |msg: String| anyhow!(Error::InvalidConfig(msg));
    let mut grid = match &args.preset {
        Some(name) => SweepGrid::preset(name).ok_or_else(|| {
            invalid(format!(
                "unknown preset `{name}`; expected one of {}",
                SweepGrid::PRESETS.join(", ")
            ))
        })?,
        None => {
            let family = args.family.unwrap_or(FamilyArg::Ghz);
            let mode = args.mode.unwrap_or(match family {
                FamilyArg::Ghz => ModeArg::Gap,
                FamilyArg::W => ModeArg::Success,
            });
            let floats = |v: &Option<String>, what: &str| -> Result<Vec<f64>> {
                match v {
                    Some(text) => parse_list(text, what),
                    None => Err(invalid(format!("--{what} is required for this sweep"))),
                }
            };
            let mode = match (family, mode) {
                (FamilyArg::Ghz, ModeArg::Gap) => SweepMode::GhzGap {
                    alpha0s: floats(&args.alpha0, "alpha0")?,
                    gaps: floats(&args.gap, "gap")?,
                },
                (FamilyArg::Ghz, ModeArg::EqualTail) => SweepMode::GhzEqualTail {
                    alpha0s: floats(&args.alpha0, "alpha0")?,
                },
                (FamilyArg::W, ModeArg::EqualTail) => SweepMode::WEqualTail {
                    betas: floats(&args.beta, "beta")?,
                },
                (FamilyArg::W, ModeArg::Success) => SweepMode::WSuccess {
                    pus: floats(&args.pu, "pu")?,
                    gaps: floats(&args.gap, "gap")?,
                },
                (f, m) => return Err(invalid(format!("mode {m:?} does not apply to {f:?}"))),
            };
            SweepGrid {
                ds: vec![2],
                ps: vec![3],
                q: 1,
                ns: vec![2],
                mode,
            }
        }
    };
    if let Some(d) = &args.d {
        grid.ds = parse_usize_axis(d, "d")?;
    }
    if let Some(p) = &args.p {
        grid.ps = parse_usize_axis(p, "p")?;
    }
    if let Some(n) = &args.n {
        grid.ns = parse_usize_axis(n, "n")?;
    }
    if let Some(q) = args.q {
        grid.q = q;
    }
    if grid.ns.iter().any(|&n| n < 2) {
        return Err(invalid("copy counts must be at least 2".into()));
    }
    if grid.ds.iter().any(|&d| d < 2) || grid.ps.iter().any(|&p| p < 2) {
        return Err(invalid(
            "dimensions and party counts must be at least 2".into(),
        ));
    }
    let is_w = matches!(
        grid.mode,
        SweepMode::WEqualTail { .. } | SweepMode::WSuccess { .. }
    );
    if is_w && grid.ps.iter().any(|&p| p < 3) {
        return Err(invalid("W sweeps need at least 3 parties".into()));
    }
    if !is_w && grid.ps.iter().any(|&p| grid.q == 0 || grid.q >= p) {
        return Err(invalid(format!(
            "Q = {} must satisfy 1 ≤ Q ≤ P − 1",
            grid.q
        )));
    }
    Ok(grid)
}

pub fn sweep(args: &SweepArgs) -> Result<Table> {
    let grid = sweep_grid(args)?;
    let mut t = Table::new(&COLUMNS);
    t.rows = run_sweep(&grid).iter().map(|r| r.fields()).collect();
    Ok(t)
}

pub fn simulate(cfg: &ProtocolConfig, trials: u64, seed: u64) -> Result<Table> {
    let stats = run_stats(cfg, trials, seed)?;
    let p_u = closed_form_success(cfg.spec());
    let n = cfg.n_copies();
    let expected_rate = overall_success(p_u, n);
    let mut t = Table::new(&[
        "kept_count",
        "count",
        "expected_count",
        "trials",
        "seed",
        "success_rate",
        "expected_success_rate",
        "all_zero_frequency",
        "expected_all_zero_frequency",
    ]);
    let expected = binomial_expected(n as u64 - 1, p_u, trials)?;
    for (k, &count) in stats.kept_count_histogram.iter().enumerate() {
        t.rows.push(vec![
            k.to_string(),
            count.to_string(),
            format_g12(expected[k]),
            stats.trials.to_string(),
            stats.rng_seed.to_string(),
            format_g12(stats.success_rate),
            format_g12(expected_rate),
            format_g12(stats.all_zero_frequency),
            format_g12(p_u),
        ]);
    }
    Ok(t)
}
