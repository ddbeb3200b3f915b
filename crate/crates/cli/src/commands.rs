use std::fs;
use std::path::Path;

use fraglaw_core::determinant::{
    pooled_determinant_terms, rencontres_count, shared_factor_distribution, PermMode,
    MAX_RENCONTRES_N,
};
use fraglaw_core::discrete::chi_square_experiment;
use fraglaw_core::frag::{
    convergents, detect_rational_y, fixed_proportion_spectrum, for_each_leaf, ratio_exponent,
    simulate_restricted, simulate_unrestricted_trials, spectrum_digit_distribution, FragConfig,
    Model,
};
use fraglaw_core::mellin::{product_error_bound_general, product_error_bound_uniform};
use fraglaw_core::rng::unit_rng;
use fraglaw_core::significand::benford_digit_probability;
use fraglaw_core::stats::{
    chi_square_benford, discrepancy_mod1, ks_distance_pieces, mean_variance_series, GofReport,
    TrialSeries,
};
use fraglaw_core::{CutDensity, DensitySpec, DigitHistogram, LogLength};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    self, ChainConfig, DeterminantConfig, DiscreteConfig, FixedConfig, ModelConfig, TreeConfig,
};
use crate::manifest::{OutputDir, RunManifest};
use crate::{AnalyzeArgs, BoundArgs, CliError, CounterexampleArgs, ReportArgs, SimulateArgs};

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

#[derive(Serialize)]
struct HistogramFile<'a> {
    histogram: &'a DigitHistogram,
}

fn digit_rows(h: &DigitHistogram) -> Vec<Vec<String>> {
    let p = h.proportions();
    (1..=9)
        .map(|d| {
            vec![
                d.to_string(),
                num(h.digits()[d - 1]),
                num(p[d - 1]),
                num(benford_digit_probability(d)),
            ]
        })
        .collect()
}

const DIGIT_HEADER: [&str; 4] = ["digit", "weight", "frequency", "benford"];

pub fn simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let cfg = config::resolve(args)?;
    let manifest = RunManifest::new(
        &format!("simulate {}", args.model.name()),
        cfg.to_value(),
        cfg.seed(),
    );
    let mut out = OutputDir::create(&args.out, &manifest)?;
    match &cfg {
        ModelConfig::Unrestricted(c) => simulate_tree(c, &mut out),
        ModelConfig::Restricted(c) => simulate_chain(c, &mut out),
        ModelConfig::Fixed(c) => simulate_fixed(c, &mut out),
        ModelConfig::Discrete(c) => simulate_discrete(c, &mut out),
        ModelConfig::Determinant(c) => simulate_determinant(c, &mut out),
    }
}

fn to_usize(v: u64, field: &str) -> Result<usize, CliError> {
    usize::try_from(v).map_err(|_| CliError::Usage(format!("{field} is too large")))
}

struct TrialPieces {
    histogram: DigitHistogram,
    pieces: u64,
    linear_sum: f64,
}

#[derive(Serialize)]
struct ContinuousSummary {
    model: &'static str,
    levels: u64,
    trials: u64,
    pieces_per_trial: u64,
    mean_pn_2: f64,
    variance_pn_2: Option<f64>,
    benford_pn_2: f64,
    max_digit_deviation: f64,
    chi_square: f64,
}

/// Shared writer for the two random-cut models.
fn write_continuous(
    model: &'static str,
    levels: u64,
    trials: &[TrialPieces],
    out: &mut OutputDir,
) -> Result<String, CliError> {
    let mut pooled = DigitHistogram::with_default_grid();
    for t in trials {
        pooled.merge(&t.histogram)?;
    }
    let gof = chi_square_benford(&pooled)?;
    let grids: Vec<Vec<(f64, f64)>> = trials
        .iter()
        .map(|t| t.histogram.pn_grid().unwrap_or_default())
        .collect();
    let pooled_pn = pooled.pn_grid().unwrap_or_default();
    let mut pn_rows = Vec::with_capacity(pooled_pn.len());
    let mut at_two = (f64::NAN, None);
    for (i, &(s, pn)) in pooled_pn.iter().enumerate() {
        let series = TrialSeries {
            s,
            levels: Some(levels as usize),
            values: grids.iter().map(|g| g[i].1).collect(),
        };
        let (mean, var) = match mean_variance_series(&series) {
            Ok((m, v)) => (m, Some(v)),
            Err(_) => (series.values[0], None),
        };
        if (s - 2.0).abs() < 1e-12 {
            at_two = (mean, var);
        }
        pn_rows.push(vec![
            num(s),
            num(pn),
            num(s.log10()),
            num(mean),
            var.map(num).unwrap_or_default(),
        ]);
    }
    let trial_rows: Vec<Vec<String>> = trials
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let chi = chi_square_benford(&t.histogram)
                .map(|g| g.chi_square)
                .unwrap_or(f64::NAN);
            let pn2 = grids[i]
                .iter()
                .find(|(s, _)| (s - 2.0).abs() < 1e-12)
                .map_or(f64::NAN, |x| x.1);
            vec![
                i.to_string(),
                t.pieces.to_string(),
                num(pn2),
                num(chi),
                num(t.linear_sum),
            ]
        })
        .collect();

    out.json("histogram.json", &HistogramFile { histogram: &pooled })?;
    out.csv(
        "pn.csv",
        &["s", "pn_pooled", "benford", "pn_mean", "pn_variance"],
        &pn_rows,
    )?;
    out.csv("digits.csv", &DIGIT_HEADER, &digit_rows(&pooled))?;
    out.json("gof.json", &gof)?;
    out.csv(
        "trials.csv",
        &["trial_id", "n_pieces", "pn_2", "chi_square", "linear_sum"],
        &trial_rows,
    )?;
    let summary = ContinuousSummary {
        model,
        levels,
        trials: trials.len() as u64,
        pieces_per_trial: trials.first().map_or(0, |t| t.pieces),
        mean_pn_2: at_two.0,
        variance_pn_2: at_two.1,
        benford_pn_2: 2f64.log10(),
        max_digit_deviation: gof.max_digit_deviation,
        chi_square: gof.chi_square,
    };
    out.json("summary.json", &summary)?;
    Ok(format!(
        "{model}: levels={levels} trials={} mean P_N(2)={:.6} (log10 2 = 0.301030) max digit deviation={:.6}",
        summary.trials, summary.mean_pn_2, summary.max_digit_deviation
    ))
}

fn simulate_tree(c: &TreeConfig, out: &mut OutputDir) -> Result<String, CliError> {
    let levels = to_usize(c.levels, "levels")?;
    let cfg = FragConfig::new(
        Model::Unrestricted,
        levels,
        c.density.resolve(levels)?,
        c.seed,
    );
    let trees = simulate_unrestricted_trials(&cfg, c.trials)?;
    if c.emit_pieces {
        let rows: Vec<Vec<String>> = (0..c.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = unit_rng(c.seed, t);
                let mut rows = Vec::new();
                for_each_leaf(
                    levels,
                    |level| cfg.densities.at(level).sample(&mut rng),
                    |x| rows.push(vec![t.to_string(), num(x.log10())]),
                );
                rows
            })
            .flatten()
            .collect();
        out.csv("pieces.csv", &["trial_id", "log10_length"], &rows)?;
    }
    let trials: Vec<TrialPieces> = trees
        .into_iter()
        .map(|t| TrialPieces {
            histogram: t.histogram,
            pieces: t.leaves,
            linear_sum: t.linear_sum,
        })
        .collect();
    write_continuous("unrestricted", c.levels, &trials, out)
}

fn simulate_chain(c: &ChainConfig, out: &mut OutputDir) -> Result<String, CliError> {
    let levels = to_usize(c.levels, "levels")?;
    let cfg = FragConfig::new(
        Model::Restricted,
        levels,
        c.density.resolve(levels)?,
        c.seed,
    );
    let chains = (0..c.trials)
        .into_par_iter()
        .map(|t| simulate_restricted(&cfg, t))
        .collect::<Result<Vec<_>, _>>()?;
    if c.emit_pieces {
        let rows: Vec<Vec<String>> = chains
            .iter()
            .enumerate()
            .flat_map(|(t, ch)| {
                ch.pieces
                    .iter()
                    .map(move |x| vec![t.to_string(), num(x.log10())])
            })
            .collect();
        out.csv("pieces.csv", &["trial_id", "log10_length"], &rows)?;
    }
    let trials: Vec<TrialPieces> = chains
        .into_iter()
        .map(|ch| TrialPieces {
            pieces: ch.pieces.len() as u64,
            histogram: ch.histogram,
            linear_sum: ch.linear_sum,
        })
        .collect();
    write_continuous("restricted", c.levels, &trials, out)
}

fn simulate_fixed(c: &FixedConfig, out: &mut OutputDir) -> Result<String, CliError> {
    let spectrum = fixed_proportion_spectrum(c.levels, c.p)?;
    let h = spectrum_digit_distribution(&spectrum);
    let y = ratio_exponent(c.p);
    let rational = detect_rational_y(c.p, c.q_max, c.tol)?;
    let verdict = match rational {
        Some(r) => format!("y rational = {}/{}", r.r, r.q),
        None => format!("y irrational up to q_max = {}", c.q_max),
    };
    let gof = chi_square_benford(&h)?;
    if c.emit_pieces {
        let rows: Vec<Vec<String>> = spectrum
            .weighted_pieces()
            .iter()
            .map(|(x, w)| vec![num(x.log10()), num(*w)])
            .collect();
        out.csv("pieces.csv", &["log10_length", "weight"], &rows)?;
    }
    out.json("histogram.json", &HistogramFile { histogram: &h })?;
    out.csv("digits.csv", &DIGIT_HEADER, &digit_rows(&h))?;
    let pn_rows: Vec<Vec<String>> = h
        .pn_grid()
        .unwrap_or_default()
        .into_iter()
        .map(|(s, pn)| vec![num(s), num(pn), num(s.log10())])
        .collect();
    out.csv("pn.csv", &["s", "pn", "benford"], &pn_rows)?;
    out.json("gof.json", &gof)?;
    out.json(
        "rationality.json",
        &json!({
            "p": c.p,
            "y": y,
            "q_max": c.q_max,
            "tol": c.tol,
            "rational": rational,
            "verdict": verdict,
            "convergents": convergents(y, 12)?,
        }),
    )?;
    out.json(
        "summary.json",
        &json!({
            "model": "fixed",
            "p": c.p,
            "levels": c.levels,
            "distinct_lengths": spectrum.entries.len(),
            "max_digit_deviation": gof.max_digit_deviation,
            "verdict": verdict,
        }),
    )?;
    Ok(format!(
        "fixed: p={} levels={} max digit deviation={:.6}; {verdict}",
        c.p, c.levels, gof.max_digit_deviation
    ))
}

fn simulate_discrete(c: &DiscreteConfig, out: &mut OutputDir) -> Result<String, CliError> {
    if c.stop.contains(&c.length) {
        eprintln!(
            "warning: the starting length is itself in the {} sequence, so every trial is a single piece",
            c.stop.name()
        );
    }
    let exp = chi_square_experiment(&c.length, c.stop, c.trials, c.seed)?;
    let rows: Vec<Vec<String>> = exp
        .records
        .iter()
        .map(|r| {
            vec![
                r.trial_id.to_string(),
                r.n_pieces.to_string(),
                r.n_stopped_on_sequence.to_string(),
                r.n_ones.to_string(),
                num(r.chi_square),
            ]
        })
        .collect();
    let s = &exp.summary;
    out.csv(
        "trials.csv",
        &[
            "trial_id",
            "n_pieces",
            "n_stopped_on_sequence",
            "n_ones",
            "chi_square",
        ],
        &rows,
    )?;
    out.json(
        "histogram.json",
        &HistogramFile {
            histogram: &s.pooled_histogram,
        },
    )?;
    out.csv(
        "digits.csv",
        &DIGIT_HEADER,
        &digit_rows(&s.pooled_histogram),
    )?;
    out.json("gof.json", &chi_square_benford(&s.pooled_histogram)?)?;
    out.json("summary.json", s)?;
    Ok(format!(
        "discrete: stop={} L={} trials={} mean chi-square={:.4} exceeding {}: {:.1}%",
        c.stop.name(),
        c.length,
        c.trials,
        s.mean_chi_square,
        s.critical_value,
        100.0 * s.fraction_exceeding_critical
    ))
}

fn simulate_determinant(c: &DeterminantConfig, out: &mut OutputDir) -> Result<String, CliError> {
    let n = to_usize(c.n, "n")?;
    let densities = c.density.resolve(1)?;
    let mode = match c.permutations {
        Some(count) => PermMode::Sampled {
            count,
            seed: c.seed,
        },
        None => PermMode::Exhaustive,
    };
    let report = pooled_determinant_terms(n, c.matrices, densities.at(1), mode, c.seed)?;
    out.json(
        "histogram.json",
        &HistogramFile {
            histogram: &report.histogram,
        },
    )?;
    out.csv("digits.csv", &DIGIT_HEADER, &digit_rows(&report.histogram))?;
    out.json("gof.json", &chi_square_benford(&report.histogram)?)?;
    let mut summary = json!({
        "n": report.n,
        "matrices": report.matrices,
        "mode": report.mode,
        "term_count": report.term_count,
        "max_deviation": report.max_deviation,
    });
    if c.fixed_point_trials > 0 {
        let stats = shared_factor_distribution(n, c.fixed_point_trials, c.seed)?;
        let factorial: f64 = (1..=c.n).map(|k| k as f64).product();
        let rows = stats
            .counts
            .iter()
            .enumerate()
            .map(|(k, &count)| {
                let exact = if c.n <= MAX_RENCONTRES_N {
                    rencontres_count(c.n, k as u64)
                        .map(|r| r.to_string().parse::<f64>().unwrap_or(f64::NAN) / factorial)
                        .unwrap_or(f64::NAN)
                } else {
                    f64::NAN
                };
                vec![
                    k.to_string(),
                    count.to_string(),
                    num(stats.probability(k)),
                    num(exact),
                ]
            })
            .collect::<Vec<_>>();
        out.csv(
            "fixed_points.csv",
            &["k", "count", "empirical", "exact"],
            &rows,
        )?;
        summary["fixed_points"] =
            json!({ "trials": stats.trials, "mean": stats.mean, "variance": stats.variance });
    }
    out.json("summary.json", &summary)?;
    Ok(format!(
        "determinant: n={} matrices={} terms={} max digit deviation={:.6}",
        report.n, report.matrices, report.term_count, report.max_deviation
    ))
}

pub fn bound(args: &BoundArgs) -> Result<String, CliError> {
    let spec = config::density_spec(&args.density)?;
    if !(1.0..10.0).contains(&args.s) {
        return Err(CliError::Usage(format!(
            "s must lie in [1, 10), got {}",
            args.s
        )));
    }
    let levels = args.levels as usize;
    let uniform = match spec {
        DensitySpec::Uniform => {
            if args.levels < 4 {
                return Err(CliError::Usage(format!(
                    "the uniform product bound holds for N >= 4, got N = {}",
                    args.levels
                )));
            }
            Some(product_error_bound_uniform(args.levels, args.s)?)
        }
        _ => None,
    };
    let densities = spec.resolve(levels.max(1))?;
    let fs: Vec<CutDensity> = (1..=levels.max(1))
        .map(|m| densities.at(m).clone())
        .collect();
    let general = product_error_bound_general(&fs, args.ell_max)?;
    let scale = args.s.log10();
    let report = json!({
        "levels": args.levels,
        "s": args.s,
        "density": spec,
        "uniform_bound": uniform,
        "general_bound": general.value * scale,
        "general_tail_estimate": general.tail_estimate * scale,
        "ell_max": general.ell_max,
    });
    Ok(report.to_string())
}

pub fn counterexample(args: &CounterexampleArgs) -> Result<String, CliError> {
    if args.levels > 25 {
        return Err(CliError::Usage(format!(
            "levels must be at most 25, got {}",
            args.levels
        )));
    }
    let run = fraglaw_core::frag::counterexample_run(args.delta, args.levels, args.seed)?;
    let min_product = run
        .partial_fourier_products
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let report = json!({
        "delta": run.delta,
        "levels": run.levels,
        "max_min_ratio": run.max_min_ratio,
        "ratio_limit": run.delta.exp(),
        "support_size": run.support_size,
        "support_adjacent": run.support_adjacent,
        "digits": run.histogram.digits(),
        "min_partial_fourier_product": min_product,
        "final_partial_fourier_product": run.partial_fourier_products.last(),
    });
    if let Some(dir) = &args.out {
        let config = json!({ "delta": args.delta, "levels": args.levels });
        let manifest = RunManifest::new("counterexample", config, args.seed);
        let mut out = OutputDir::create(dir, &manifest)?;
        out.json("counterexample.json", &report)?;
        out.json(
            "histogram.json",
            &HistogramFile {
                histogram: &run.histogram,
            },
        )?;
    }
    Ok(report.to_string())
}

#[derive(Serialize)]
struct Analysis {
    source: String,
    pieces: u64,
    weighted: bool,
    gof: GofReport,
    /// Exact Kolmogorov distance; only for unit weights.
    ks_distance_exact: Option<f64>,
    discrepancy_mod1: f64,
    histogram: DigitHistogram,
}

fn read_pieces(path: &Path) -> Result<Vec<(LogLength, f64)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| [l, "\n"])
        .collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let bad = |m: String| CliError::Usage(format!("{}: {m}", path.display()));
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let x_col = col("log10_length").ok_or_else(|| bad("missing column `log10_length`".into()))?;
    let w_col = col("weight");
    let mut pieces = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |c: usize, what: &str| -> Result<f64, CliError> {
            rec.get(c)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(format!("row {}: bad `{what}`", i + 1)))
        };
        let x = LogLength::new(field(x_col, "log10_length")?).map_err(|e| bad(e.to_string()))?;
        let w = match w_col {
            Some(c) => field(c, "weight")?,
            None => 1.0,
        };
        pieces.push((x, w));
    }
    if pieces.is_empty() {
        return Err(bad("no pieces".into()));
    }
    Ok(pieces)
}

pub fn analyze(args: &AnalyzeArgs) -> Result<String, CliError> {
    let pieces = read_pieces(&args.pieces)?;
    let weighted = pieces.iter().any(|(_, w)| *w != 1.0);
    let mut h = DigitHistogram::with_default_grid();
    for &(x, w) in &pieces {
        h.add(x, w);
    }
    let gof = chi_square_benford(&h)?;
    let ks_distance_exact = if weighted {
        None
    } else {
        let xs: Vec<LogLength> = pieces.iter().map(|p| p.0).collect();
        Some(ks_distance_pieces(&xs)?)
    };
    let logs: Vec<(f64, f64)> = pieces.iter().map(|(x, w)| (x.log10(), *w)).collect();
    let analysis = Analysis {
        source: args.pieces.display().to_string(),
        pieces: pieces.len() as u64,
        weighted,
        gof,
        ks_distance_exact,
        discrepancy_mod1: discrepancy_mod1(&logs)?,
        histogram: h,
    };
    if let Some(dir) = &args.out {
        let bytes = fs::read(&args.pieces).map_err(|e| CliError::io(&args.pieces, e))?;
        let digest = {
            use sha2::{Digest, Sha256};
            hex::encode(Sha256::digest(&bytes))
        };
        let manifest = RunManifest::new("analyze", json!({ "pieces_sha256": digest }), 0);
        let mut out = OutputDir::create(dir, &manifest)?;
        out.json("analysis.json", &analysis)?;
        out.csv(
            "digits.csv",
            &DIGIT_HEADER,
            &digit_rows(&analysis.histogram),
        )?;
    }
    Ok(format!(
        "analyze: {} pieces chi-square={:.4} ks={:.6} discrepancy={:.6}",
        analysis.pieces,
        analysis.gof.chi_square,
        analysis.gof.ks_distance,
        analysis.discrepancy_mod1
    ))
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn report(args: &ReportArgs) -> Result<String, CliError> {
    let mut runs = Vec::new();
    let mut merged: Option<DigitHistogram> = None;
    for dir in &args.runs {
        let manifest: RunManifest = serde_json::from_value(read_json(&dir.join("manifest.json"))?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
        if !manifest.verify() {
            return Err(CliError::Usage(format!(
                "{}: manifest hash does not match its contents",
                dir.display()
            )));
        }
        let hist_file = read_json(&dir.join("histogram.json"))?;
        if hist_file.get("manifest_hash") != Some(&Value::String(manifest.manifest_hash.clone())) {
            return Err(CliError::Usage(format!(
                "{}: histogram belongs to a different run",
                dir.display()
            )));
        }
        let h: DigitHistogram = serde_json::from_value(hist_file["histogram"].clone())
            .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
        match &mut merged {
            None => merged = Some(h),
            Some(m) => m.merge(&h)?,
        }
        runs.push(json!({
            "command": manifest.command,
            "seed": manifest.seed,
            "manifest_hash": manifest.manifest_hash,
        }));
    }
    let merged = merged.expect("at least one run");
    let gof = chi_square_benford(&merged)?;
    let hashes: Vec<&Value> = runs.iter().map(|r| &r["manifest_hash"]).collect();
    let manifest = RunManifest::new("report", json!({ "inputs": hashes }), 0);
    let mut out = OutputDir::create(&args.out, &manifest)?;
    out.json("report.json", &json!({ "runs": runs, "gof": gof }))?;
    out.json("histogram.json", &HistogramFile { histogram: &merged })?;
    out.csv("digits.csv", &DIGIT_HEADER, &digit_rows(&merged))?;
    Ok(format!(
        "report: merged {} runs, total weight {} chi-square={:.4}",
        runs.len(),
        merged.total(),
        gof.chi_square
    ))
}
