//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the target
//! exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use qdistill::filters::IndexPartition;
use qdistill::montecarlo::{binomial_chi_squared, run_stats, trial_rng, within_sigma};
use qdistill::states::{random_ghz_spec, random_w_spec, GhzSpec, StateSpec, WSpec};
use qdistill::sweep::{run_sweep, SweepGrid, SweepMode};
use qdistill::ted::{
    closed_form_fidelity, closed_form_success, overall_success, post_selected_state, run_ted,
    ProtocolConfig, PureState, Representation,
};
use qdistill::tensor::{state_fidelity, DenseCap, Ket, Operator, C64};
use qdistill::tsd::{build_assemblage, filter_assemblage, run_tsd, Assemblage, SteeringConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const CORPUS_SEED: u64 = 0x5eed_0001;
const W_SEED: u64 = 0x5eed_0004;
const BIG_CAP: DenseCap = DenseCap(1 << 16);
/// Dimension up to which the Uhlmann oracle works on full density matrices.
const FULL_ORACLE_DIM: usize = 16;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ghz_corpus() -> Vec<GhzSpec> {
    (0..200u64)
        .map(|i| {
            let d = 2 + (i % 5) as usize;
            let p = 2 + ((i / 5) % 5) as usize;
            random_ghz_spec(d, p, &mut trial_rng(CORPUS_SEED, i))
        })
        .collect()
}

/// Every (Q, partition) configuration exercised for `spec`: all labelled
/// partitions when `d ≤ 4`, the contiguous one otherwise.
fn ghz_configs(spec: &GhzSpec, n: usize) -> Vec<ProtocolConfig> {
    let mut out = Vec::new();
    for q in 1..spec.p() {
        let partitions = if spec.d() <= 4 {
            IndexPartition::enumerate(spec.d(), q)
        } else {
            vec![IndexPartition::contiguous(spec.d(), q).unwrap()]
        };
        for part in partitions {
            let cfg = ProtocolConfig::ghz(spec.clone(), n, q)
                .unwrap()
                .with_partition(part)
                .unwrap()
                .with_representation(Representation::Dense)
                .with_dense_cap(BIG_CAP);
            out.push(cfg);
        }
    }
    out
}

fn dense(state: &PureState) -> Ket {
    state.to_dense(BIG_CAP).unwrap()
}

/// Orthonormal basis of the span of `kets`.
fn span_basis(kets: &[&Ket]) -> Vec<Ket> {
    let mut basis: Vec<Ket> = Vec::new();
    for k in kets {
        let mut v = k.amplitudes().clone();
        for b in &basis {
            let c = b.amplitudes().dotc(&v);
            v -= b.amplitudes() * c;
        }
        let norm = v.norm();
        if norm > 1e-9 {
            basis.push(Ket::unnormalized(v / C64::new(norm, 0.0)));
        }
    }
    basis
}

/// The kets in coordinates of an orthonormal basis of their span; an
/// isometry, so fidelities are unchanged. Small spaces are kept as they are.
fn compress(kets: &[&Ket]) -> Vec<Ket> {
    if kets[0].dim() <= FULL_ORACLE_DIM {
        return kets.iter().map(|k| (*k).clone()).collect();
    }
    let basis = span_basis(kets);
    kets.iter()
        .map(|k| {
            Ket::unnormalized(nalgebra::DVector::from_iterator(
                basis.len(),
                basis.iter().map(|b| b.amplitudes().dotc(k.amplitudes())),
            ))
        })
        .collect()
}

/// Uhlmann fidelity of `Σ w |k⟩⟨k|` against a pure target by matrix square
/// roots. Callers pass kets through `compress` first.
fn uhlmann_oracle(mixture: &[(f64, &Ket)], target: &Ket) -> f64 {
    let dim = target.dim();
    let mut rho = Operator::new(DMatrix::zeros(dim, dim));
    for (w, k) in mixture {
        rho = rho.add(&k.projector().scale(*w)).unwrap();
    }
    state_fidelity(&rho, &target.projector()).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for spec in ghz_corpus() {
        let expected = spec.d() as f64 * spec.alphas()[0].powi(2);
        for cfg in ghz_configs(&spec, 2) {
            let (_, p) = post_selected_state(&cfg).map_err(|e| e.to_string())?;
            worst = worst.max((p - expected).abs());
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    check(worst < 1e-12, || {
        format!("max |P_s^u − dα₀²| = {worst:.3e}")
    })?;
    check(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{checked} configurations, max deviation {worst:.2e}, {elapsed:.2?}"
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for spec in ghz_corpus() {
        let perfect = StateSpec::Ghz(spec.clone())
            .perfect()
            .dense(BIG_CAP)
            .unwrap();
        let initial = StateSpec::Ghz(spec.clone()).dense(BIG_CAP).unwrap();
        for cfg in ghz_configs(&spec, 2) {
            let (filtered, p_u) = post_selected_state(&cfg).map_err(|e| e.to_string())?;
            let filtered = dense(&filtered);
            let [f, i, t] =
                <[Ket; 3]>::try_from(compress(&[&filtered, &initial, &perfect])).unwrap();
            for n in [2, 3, 5, 10] {
                let ps = overall_success(p_u, n);
                let oracle = uhlmann_oracle(&[(ps, &f), (1.0 - ps, &i)], &t);
                let closed = closed_form_fidelity(cfg.spec(), n);
                worst = worst.max((oracle - closed).abs());
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(worst < 1e-9, || {
        format!("max |F_closed − F_oracle| = {worst:.3e}")
    })?;
    check(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{checked} fidelities, max deviation {worst:.2e}, {elapsed:.2?}"
    ))
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    for spec in ghz_corpus() {
        let mut reference: Option<(Ket, f64, f64)> = None;
        for cfg in ghz_configs(&spec, 3) {
            let (filtered, p_u) = post_selected_state(&cfg).map_err(|e| e.to_string())?;
            let filtered = dense(&filtered);
            let fid = run_ted(&cfg).map_err(|e| e.to_string())?.fidelity_numeric;
            match &reference {
                None => reference = Some((filtered, p_u, fid)),
                Some((k, p, f)) => {
                    let state_dev = (k.amplitudes() - filtered.amplitudes()).camax();
                    worst = worst
                        .max(state_dev)
                        .max((p - p_u).abs())
                        .max((f - fid).abs());
                }
            }
        }
    }
    check(worst < 1e-12, || {
        format!("max deviation across Q/partitions {worst:.3e}")
    })?;
    Ok(format!("max deviation {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let (mut worst_p, mut worst_f) = (0.0f64, 0.0f64);
    for i in 0..100u64 {
        let p = 3 + (i % 6) as usize;
        let spec = random_w_spec(p, &mut trial_rng(W_SEED, i));
        let cfg = ProtocolConfig::w(spec.clone(), 2)
            .unwrap()
            .with_representation(Representation::Dense);
        let (filtered, p_u) = post_selected_state(&cfg).map_err(|e| e.to_string())?;
        let prod: f64 = spec.betas().iter().map(|b| b * b).product();
        let expected = p as f64 * prod / spec.betas()[p - 1].powi(2 * (p as i32 - 1));
        worst_p = worst_p.max((p_u - expected).abs());

        let filtered = dense(&filtered);
        let initial = StateSpec::W(spec.clone()).dense(BIG_CAP).unwrap();
        let perfect = StateSpec::W(spec.clone()).perfect().dense(BIG_CAP).unwrap();
        let [f, i, t] = <[Ket; 3]>::try_from(compress(&[&filtered, &initial, &perfect])).unwrap();
        for n in [2, 3, 5, 10] {
            let ps = overall_success(p_u, n);
            let oracle = uhlmann_oracle(&[(ps, &f), (1.0 - ps, &i)], &t);
            worst_f = worst_f.max((oracle - closed_form_fidelity(cfg.spec(), n)).abs());
        }
    }
    check(worst_p < 1e-12, || {
        format!("max |P_s^u − closed form| = {worst_p:.3e}")
    })?;
    check(worst_f < 1e-9, || {
        format!("max fidelity deviation {worst_f:.3e}")
    })?;
    Ok(format!(
        "success dev {worst_p:.2e}, fidelity dev {worst_f:.2e}"
    ))
}

fn ghz3() -> GhzSpec {
    GhzSpec::new(
        vec![
            (1.0f64 / 8.0).sqrt(),
            (7.0f64 / 16.0).sqrt(),
            (7.0f64 / 16.0).sqrt(),
        ],
        3,
    )
    .unwrap()
}

fn w3() -> WSpec {
    WSpec::new(vec![0.5, 0.5, 0.5f64.sqrt()]).unwrap()
}

fn steering_cases(n: usize) -> Vec<(String, SteeringConfig)> {
    let mut out = Vec::new();
    for (s, q) in [(1, 1), (1, 2), (2, 1)] {
        let base = ProtocolConfig::ghz(ghz3(), n, q).unwrap();
        out.push((
            format!("GHZ3 S={s} Q={q}"),
            SteeringConfig::new(base, s).unwrap(),
        ));
    }
    let base = ProtocolConfig::w(w3(), n).unwrap();
    out.push(("W3 S=1 Q=2".into(), SteeringConfig::new(base, 1).unwrap()));
    out
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for n in [2, 3, 5, 10] {
        for (label, cfg) in steering_cases(n) {
            let r = run_tsd(&cfg).map_err(|e| format!("{label}: {e}"))?;
            let ted = closed_form_fidelity(cfg.base().spec(), n);
            let dev = (r.assemblage_fidelity - ted).abs();
            check(dev < 1e-9, || {
                format!("{label} N={n}: F_a {} vs F_s {ted}", r.assemblage_fidelity)
            })?;
            worst = worst.max(dev);
        }
    }
    let s2 = &steering_cases(2)[2].1;
    let members = build_assemblage(s2).map_err(|e| e.to_string())?.len();
    check(members == 36, || {
        format!("S=2 GHZ3 assemblage has {members} members")
    })?;
    Ok(format!(
        "max |F_a − F_s| {worst:.2e}, S=2 members {members}"
    ))
}

fn all_branches(asm: &Assemblage, cfg: &SteeringConfig) -> Result<Vec<Assemblage>, String> {
    let assignment = cfg.base().assignment().map_err(|e| e.to_string())?;
    let q = assignment.q();
    let mut out = Vec::new();
    for mask in 0..1usize << q {
        let outcomes: Vec<u8> = (0..q).map(|k| ((mask >> k) & 1) as u8).collect();
        match filter_assemblage(asm, &assignment, &outcomes) {
            Ok((f, _)) => out.push(f),
            Err(qdistill::Error::ZeroProbability) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(out)
}

fn criterion_6() -> Outcome {
    let mut cases = steering_cases(3);
    for i in 0..6u64 {
        let mut rng = trial_rng(0x5eed_0006, i);
        let d = [2, 3][(i % 2) as usize];
        let spec = random_ghz_spec(d, 4, &mut rng);
        for s in [1, 2] {
            let base = ProtocolConfig::ghz(spec.clone(), 3, 4 - s).unwrap();
            cases.push((
                format!("seeded GHZ d={d} S={s}"),
                SteeringConfig::new(base, s).unwrap(),
            ));
        }
        let w = random_w_spec(4, &mut rng);
        let base = ProtocolConfig::w(w, 3).unwrap();
        cases.push(("seeded W P=4".into(), SteeringConfig::new(base, 1).unwrap()));
    }
    let (mut worst, mut count) = (0.0f64, 0usize);
    for (label, cfg) in &cases {
        let asm = build_assemblage(cfg).map_err(|e| format!("{label}: {e}"))?;
        let mut all = vec![asm.clone()];
        all.extend(all_branches(&asm, cfg)?);
        for a in &all {
            let dev = a.non_signaling_deviation();
            check(dev < 1e-10, || format!("{label}: deviation {dev:.3e}"))?;
            worst = worst.max(dev);
            count += 1;
        }
    }
    Ok(format!("{count} assemblages, max deviation {worst:.2e}"))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut pairs: Vec<(String, ProtocolConfig, u64)> = vec![
        (
            "GHZ3 N=5".into(),
            ProtocolConfig::ghz(ghz3(), 5, 1).unwrap(),
            42,
        ),
        ("W3 N=3".into(), ProtocolConfig::w(w3(), 3).unwrap(), 7),
    ];
    let g = random_ghz_spec(4, 4, &mut trial_rng(0x5eed_0007, 0));
    pairs.push((
        "GHZ d=4 P=4 Q=2 N=4".into(),
        ProtocolConfig::ghz(g, 4, 2).unwrap(),
        11,
    ));
    let g = random_ghz_spec(2, 3, &mut trial_rng(0x5eed_0007, 1));
    pairs.push((
        "GHZ d=2 P=3 Q=2 N=6".into(),
        ProtocolConfig::ghz(g, 6, 2).unwrap(),
        5,
    ));
    let w = random_w_spec(4, &mut trial_rng(0x5eed_0007, 2));
    pairs.push(("W P=4 N=5".into(), ProtocolConfig::w(w, 5).unwrap(), 13));

    let trials = 100_000;
    let mut lines = Vec::new();
    for (label, cfg, seed) in &pairs {
        let stats = run_stats(cfg, trials, *seed).map_err(|e| e.to_string())?;
        let p_u = closed_form_success(cfg.spec());
        let n = cfg.n_copies();
        let expected = overall_success(p_u, n);
        check(
            within_sigma(stats.success_rate, expected, trials, 3.0),
            || format!("{label}: rate {} vs {expected}", stats.success_rate),
        )?;
        let chi = binomial_chi_squared(&stats.kept_count_histogram, n as u64 - 1, p_u)
            .map_err(|e| e.to_string())?;
        check(chi.p_value > 1e-3, || {
            format!("{label}: chi-squared p = {:.2e}", chi.p_value)
        })?;
        lines.push(format!("{label} p={:.3}", chi.p_value));
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("{}, {elapsed:.2?}", lines.join("; ")))
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();

    // (a) equal-tail curves
    let rows = run_sweep(&SweepGrid::preset("s1").unwrap());
    for curve in rows.chunks(49) {
        let a0 = curve[0].alpha0_or_pu;
        if !curve
            .windows(2)
            .all(|w| w[1].fidelity_closed > w[0].fidelity_closed)
        {
            failures.push(format!("(a) α₀={a0:.4} not strictly increasing"));
        }
        let last = curve.last().unwrap();
        let gap = (1.0 - last.fidelity_closed).abs();
        if last.n != 50 || gap >= 1e-9 {
            failures.push(format!("(a) α₀={a0:.4}: 1 − F(N=50) = {gap:.3e}"));
        }
    }

    // (b) Fig. 2 left
    let rows = run_sweep(&SweepGrid::preset("fig2-ghz").unwrap());
    let high = rows.iter().filter(|r| r.fidelity_closed > 0.99).count();
    let frac = high as f64 / rows.len() as f64;
    if frac <= 0.5 {
        failures.push(format!("(b) only {frac:.3} of points exceed 0.99"));
    }

    // (c) fidelity and success increase with d
    let grid = SweepGrid::preset("s2").unwrap();
    let rows = run_sweep(&grid);
    for &n in &grid.ns {
        let series: Vec<_> = rows.iter().filter(|r| r.n == n).collect();
        let inc = |f: &dyn Fn(&&qdistill::sweep::SweepRow) -> f64| {
            series.windows(2).all(|w| f(&w[1]) > f(&w[0]))
        };
        if !inc(&|r| r.fidelity_closed) || !inc(&|r| r.ps_per_copy) {
            failures.push(format!("(c) N={n} not increasing in d"));
        }
    }

    if failures.is_empty() {
        Ok(format!("(b) fraction above 0.99: {frac:.3}"))
    } else {
        Err(failures.join("; "))
    }
}

fn criterion_9() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0usize;
    let compare = |cfg: ProtocolConfig, worst: &mut f64| -> Result<(), String> {
        let c = run_ted(&cfg.clone().with_representation(Representation::Compact))
            .map_err(|e| e.to_string())?;
        let d = run_ted(&cfg.clone().with_representation(Representation::Dense))
            .map_err(|e| e.to_string())?;
        let (cs, _) =
            post_selected_state(&cfg.clone().with_representation(Representation::Compact)).unwrap();
        let (ds, _) = post_selected_state(&cfg.with_representation(Representation::Dense)).unwrap();
        let state_dev = (dense(&cs).amplitudes() - dense(&ds).amplitudes()).camax();
        let dev = [
            (c.p_success_per_copy - d.p_success_per_copy).abs(),
            (c.p_success_overall - d.p_success_overall).abs(),
            (c.fidelity_numeric - d.fidelity_numeric).abs(),
            (c.fidelity_closed_form - d.fidelity_closed_form).abs(),
            state_dev,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        *worst = worst.max(dev);
        Ok(())
    };
    for d in 2..=16usize {
        let mut p = 2;
        while d.pow(p as u32) <= 4096 {
            for rep in 0..3u64 {
                let spec = random_ghz_spec(
                    d,
                    p,
                    &mut trial_rng(0x5eed_0009, (d * 100 + p) as u64 * 10 + rep),
                );
                let q = 1 + (rep as usize) % (p - 1);
                compare(ProtocolConfig::ghz(spec, 4, q).unwrap(), &mut worst)?;
                count += 1;
            }
            p += 1;
        }
    }
    for p in 3..=12usize {
        for rep in 0..3u64 {
            let spec = random_w_spec(p, &mut trial_rng(0x5eed_0009, 9000 + p as u64 * 10 + rep));
            compare(ProtocolConfig::w(spec, 4).unwrap(), &mut worst)?;
            count += 1;
        }
    }
    check(worst < 1e-12, || {
        format!("compact/dense deviation {worst:.3e}")
    })?;

    let grid = SweepGrid {
        ds: vec![50],
        ps: vec![50],
        q: 1,
        ns: (2..102).collect(),
        mode: SweepMode::GhzEqualTail {
            alpha0s: (0..100).map(|i| 0.01 + 0.0013 * i as f64).collect(),
        },
    };
    let start = Instant::now();
    let rows = run_sweep(&grid);
    let elapsed = start.elapsed();
    check(rows.len() == 10_000, || format!("{} rows", rows.len()))?;
    check(rows.iter().all(|r| r.feasible), || {
        "infeasible d=50 point".into()
    })?;
    check(elapsed < Duration::from_secs(1), || {
        format!("d=50 P=50 sweep took {elapsed:?}")
    })?;
    Ok(format!(
        "{count} specs, max deviation {worst:.2e}; 10^4-point d=50 P=50 sweep in {elapsed:.2?}"
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qdistill"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let runs: [(&str, Vec<&str>); 3] = [
        ("sweep", vec!["sweep", "--preset", "fig2-ghz"]),
        (
            "ted",
            vec![
                "ted-ghz",
                "--p",
                "3",
                "--q",
                "2",
                "--n",
                "5",
                "--alphas",
                "0.35355,0.66144,0.66144",
            ],
        ),
        (
            "simulate",
            vec![
                "simulate",
                "--p",
                "3",
                "--n",
                "5",
                "--alphas",
                "0.35355,0.66144,0.66144",
                "--trials",
                "20000",
                "--seed",
                "9",
            ],
        ),
    ];
    for (name, args) in &runs {
        let (first, second, replay) = (
            path(&format!("{name}-1.csv")),
            path(&format!("{name}-2.csv")),
            path(&format!("{name}-3.csv")),
        );
        for out in [&first, &second] {
            let mut a = args.clone();
            a.extend(["--out", out.as_str()]);
            run_cli(&a)?;
        }
        let manifest = format!("{first}.manifest");
        run_cli(&[args[0], "--config", &manifest, "--out", &replay])?;
        let read = |p: &str| std::fs::read(Path::new(p)).map_err(|e| e.to_string());
        let base = read(&first)?;
        check(base == read(&second)?, || {
            format!("{name}: repeated runs differ")
        })?;
        check(base == read(&replay)?, || {
            format!("{name}: manifest replay differs")
        })?;
    }
    Ok(
        "sweep, ted-ghz and simulate outputs byte-identical across reruns and manifest replays"
            .into(),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("GHZ per-copy success probability", criterion_1),
        ("GHZ fidelity closed form vs oracle", criterion_2),
        ("Q-invariance", criterion_3),
        ("W success probability and fidelity", criterion_4),
        ("assemblage fidelity equals state fidelity", criterion_5),
        ("non-signaling", criterion_6),
        ("Monte Carlo consistency", criterion_7),
        ("figure trends", criterion_8),
        ("compact/dense equivalence", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    // Optional criterion numbers select a subset; cargo's own flags are ignored.
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {title}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {title}: {why}", i + 1);
            }
        }
    }
    let run = if only.is_empty() {
        criteria.len()
    } else {
        only.len()
    };
    println!("{} of {run} criteria passed", run - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
