use rayon::prelude::*;
use resonance_core::determinant::{determinant_resonances, trace_decay_check, DynamicalDeterminant, FlatTraceSeries};
use resonance_core::euclidean::{harmonic_oscillator_numeric, la_block_spectrum, landau_levels, metaplectic_factor};
use resonance_core::operator_matrix::{assemble, EngineConfig};
use resonance_core::quantization::{egorov_residual, spectral_match, ExternalBand, Symbol};
use resonance_core::spectral::{
    band_classify, compute_band_radii, concentration_stats, matrix_resonances, predicted_radius, weyl_count, BandRadiiConfig, DEFAULT_FILTER_TOL,
};
use resonance_core::{BandPrediction, ResonanceSet, C64};
use serde_json::json;

use crate::config::{RunConfig, Subcommand};
use crate::report::{fmt, RunReport, SpectrumEntry, Table, Verdict};
use crate::{ctx, CliError};

/// Inflation of the predicted annuli when assigning bands.
pub const CLASSIFY_EPS: f64 = 1e-2;
/// Engine agreement on band 0: modulus and argument.
pub const ENGINE_MOD_TOL: f64 = 1e-3;
pub const ENGINE_ARG_TOL: f64 = 1e-2;
/// Concentration window around the predicted radius.
pub const STATS_DELTA: f64 = 0.05;

pub fn run(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let mut report = RunReport::new(cfg);
    match cfg.subcommand {
        Subcommand::Resonances => resonances(cfg, &mut report)?,
        Subcommand::Bands => bands(cfg, &mut report)?,
        Subcommand::Gutzwiller => gutzwiller(cfg, &mut report)?,
        Subcommand::Egorov => egorov(cfg, &mut report)?,
        Subcommand::Landau => landau(&mut report)?,
        Subcommand::LinearModel => linear_model(cfg, &mut report)?,
        Subcommand::Stats => stats(cfg, &mut report)?,
    }
    Ok(report)
}

fn engine_config(cfg: &RunConfig) -> EngineConfig {
    EngineConfig { bands: cfg.bands, ..Default::default() }
}

/// Band predictions: k ≤ 2 for the linear map, k ≤ 1 otherwise.
fn predictions(cfg: &RunConfig) -> Result<Vec<BandPrediction>, CliError> {
    let kmax = if cfg.map.is_linear() { 3 } else { 2 };
    let bcfg = BandRadiiConfig { seed: cfg.seed, ..Default::default() };
    (0..kmax).map(|k| ctx(compute_band_radii(&cfg.map, &cfg.potential, k, &bcfg), "band radii")).collect()
}

fn matrix_spectrum(cfg: &RunConfig, n: usize, preds: &[BandPrediction]) -> Result<ResonanceSet, CliError> {
    let raw = ctx(matrix_resonances(&cfg.map, &cfg.potential, n, &engine_config(cfg), DEFAULT_FILTER_TOL), format!("matrix engine, N = {n}"))?;
    ctx(band_classify(&raw, preds, CLASSIFY_EPS), "band classification")
}

fn determinant_spectrum(cfg: &RunConfig, n: usize, preds: &[BandPrediction]) -> Result<(ResonanceSet, DynamicalDeterminant, FlatTraceSeries), CliError> {
    let cache = cfg.cache_dir();
    let (raw, det, series) = ctx(determinant_resonances(&cfg.map, &cfg.potential, n, cfg.n_max, Some(&cache)), format!("determinant engine, N = {n}"))?;
    Ok((ctx(band_classify(&raw, preds, CLASSIFY_EPS), "band classification")?, det, series))
}

fn complex_pairs(v: &[C64]) -> serde_json::Value {
    json!(v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

fn trace_table(series: &FlatTraceSeries) -> Table {
    let mut t = Table::new(&["n", "re_t", "im_t", "orbit_count"]);
    for (i, (v, c)) in series.values.iter().zip(&series.orbit_counts).enumerate() {
        t.push(vec![(i + 1).to_string(), fmt(v.re), fmt(v.im), c.to_string()]);
    }
    t
}

fn resonances(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let preds = predictions(cfg)?;
    let per_n: Vec<_> = cfg
        .n_list
        .par_iter()
        .map(|&n| {
            let m = if cfg.engine.matrix() { Some(matrix_spectrum(cfg, n, &preds)?) } else { None };
            let d = if cfg.engine.determinant() { Some(determinant_spectrum(cfg, n, &preds)?) } else { None };
            Ok((n, m, d))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    for (n, m, d) in per_n {
        if let Some(m) = &m {
            let w = weyl_count(m);
            report.verdicts.push(Verdict::new(format!("weyl_matrix_N{n}"), w.deviation == 0, format!("band 0: {} of {}", w.count, w.expected)));
            report.spectra.push(SpectrumEntry { n, engine: "matrix".into(), predictions: preds.clone(), resonances: m.clone() });
        }
        if let Some((res, det, series)) = &d {
            let w = weyl_count(res);
            report.verdicts.push(Verdict::new(format!("weyl_determinant_N{n}"), w.deviation == 0, format!("band 0: {} of {}", w.count, w.expected)));
            report.data.insert(
                format!("determinant_N{n}"),
                json!({ "coefficients": complex_pairs(&det.coefficients), "reliability_radius": det.reliability_radius }),
            );
            report.tables.insert(format!("traces_N{n}"), trace_table(series));
            report.spectra.push(SpectrumEntry { n, engine: "determinant".into(), predictions: preds.clone(), resonances: res.clone() });
        }
        if let (Some(m), Some((res, _, _))) = (&m, &d) {
            let v = match spectral_match(&m.band(0), &res.band(0)) {
                Ok(r) => Verdict::new(
                    format!("engine_equivalence_N{n}"),
                    r.max_modulus_error <= ENGINE_MOD_TOL && r.max_argument_error <= ENGINE_ARG_TOL,
                    format!("modulus {:.2e}, argument {:.2e}", r.max_modulus_error, r.max_argument_error),
                ),
                Err(e) => Verdict::new(format!("engine_equivalence_N{n}"), false, e.to_string()),
            };
            report.verdicts.push(v);
        }
    }
    Ok(())
}

fn bands(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let bcfg = BandRadiiConfig { seed: cfg.seed, ..Default::default() };
    let kmax = cfg.bands.min(4);
    let preds: Vec<BandPrediction> = (0..kmax)
        .map(|k| ctx(compute_band_radii(&cfg.map, &cfg.potential, k, &bcfg), "band radii"))
        .collect::<Result<_, _>>()?;
    let mut t = Table::new(&["k", "r_minus", "r_plus", "n_avg"]);
    for p in &preds {
        t.push(vec![p.k.to_string(), fmt(p.r_minus), fmt(p.r_plus), p.n.to_string()]);
    }
    report.tables.insert("bands".into(), t);
    // acceptance binds only k ≤ 1 for nonlinear maps
    let gap = preds[1].r_plus + CLASSIFY_EPS < preds[0].r_minus - CLASSIFY_EPS;
    report.verdicts.push(Verdict::new("bands_0_1_separated", gap, format!("r₀⁻ = {:.6}, r₁⁺ = {:.6}", preds[0].r_minus, preds[1].r_plus)));
    report.data.insert("band_radii_config".into(), json!(bcfg));
    Ok(())
}

fn gutzwiller(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let preds = predictions(cfg)?;
    let r1 = preds[1].r_plus;
    let ns: Vec<usize> = (1..=cfg.n_max).collect();
    let cache = cfg.cache_dir();
    let per_n: Vec<_> = cfg
        .n_list
        .par_iter()
        .map(|&n| {
            let res = matrix_spectrum(cfg, n, &preds)?;
            let series = ctx(resonance_core::determinant::trace_series(&cfg.map, &cfg.potential, n, cfg.n_max, Some(&cache)), "trace series")?;
            Ok((n, res, series))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    for (n, res, series) in per_n {
        let band0 = res.band(0);
        let rep = trace_decay_check(&band0, &series.gutzwiller, &ns, r1);
        let mut t = Table::new(&["n", "re_t", "im_t", "re_gutzwiller", "im_gutzwiller", "error", "orbit_count"]);
        for (i, &k) in ns.iter().enumerate() {
            let (tv, g) = (series.values[k - 1], series.gutzwiller[k - 1]);
            t.push(vec![k.to_string(), fmt(tv.re), fmt(tv.im), fmt(g.re), fmt(g.im), fmt(rep.errors[i]), series.orbit_counts[k - 1].to_string()]);
        }
        report.tables.insert(format!("gutzwiller_N{n}"), t);
        let rate = rep.fitted_rate.map_or_else(|| "below noise floor".to_string(), |r| format!("{r:.4}"));
        report.verdicts.push(Verdict::new(format!("trace_decay_N{n}"), rep.pass, format!("fitted rate {rate}, predicted log r₁⁺ = {:.4}", rep.predicted_log_r1)));
        report.data.insert(format!("trace_decay_N{n}"), json!(rep));
        report.spectra.push(SpectrumEntry { n, engine: "matrix".into(), predictions: preds.clone(), resonances: res });
    }
    Ok(())
}

fn egorov(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let preds = predictions(cfg)?;
    let inner = 0.5 * (preds[0].r_minus + preds[1].r_plus);
    let psi = Symbol::cosine([1, 1], 1.0).add(&Symbol::sine([1, 0], 0.5));
    let mut t = Table::new(&["N", "cutoff", "residual"]);
    let rows: Vec<_> = cfg
        .n_list
        .par_iter()
        .map(|&n| {
            let op = ctx(assemble(&cfg.map, &cfg.potential, n, &engine_config(cfg)), "assemble")?;
            let band = ctx(ExternalBand::new(&cfg.map, &op, inner), "external band")?;
            if cfg.map.is_linear() {
                let r = ctx(egorov_residual(&band, &psi, &psi.compose_linear_inverse(&cfg.map.linear_part)), "egorov")?;
                Ok((n, vec![("exact".to_string(), r)]))
            } else {
                let rs = [1i64, 2, 4]
                    .iter()
                    .map(|&k| ctx(egorov_residual(&band, &psi, &psi.compose_inverse(&cfg.map, 64, k)), "egorov").map(|r| (k.to_string(), r)))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((n, rs))
            }
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    for (n, rs) in rows {
        for (cut, r) in &rs {
            t.push(vec![n.to_string(), cut.clone(), fmt(*r)]);
        }
        let v = if cfg.map.is_linear() {
            Verdict::new(format!("exact_egorov_N{n}"), rs[0].1 <= 1e-8, format!("residual {:.2e} (tol 1e-8)", rs[0].1))
        } else {
            let (first, last) = (rs[0].1, rs[rs.len() - 1].1);
            Verdict::new(format!("egorov_refinement_N{n}"), last < first, format!("cutoff 1: {first:.2e} → cutoff 4: {last:.2e}"))
        };
        report.verdicts.push(v);
    }
    report.tables.insert("egorov".into(), t);
    report.data.insert("symbol".into(), json!(psi.tag));
    Ok(())
}

fn landau(report: &mut RunReport) -> Result<(), CliError> {
    let mut t = Table::new(&["d", "k", "level"]);
    for d in 1..=3 {
        for k in 0..=5 {
            t.push(vec![d.to_string(), k.to_string(), landau_levels(d, k).to_string()]);
        }
    }
    report.tables.insert("landau".into(), t);
    // d = 1 levels are twice the oscillator levels k + 1/2
    let ev = ctx(harmonic_oscillator_numeric(1.0, 10.0, 128, 6), "harmonic oscillator")?;
    let err = ev.iter().enumerate().map(|(k, e)| (2.0 * e - landau_levels(1, k) as f64).abs()).fold(0.0, f64::max);
    report.verdicts.push(Verdict::new("oscillator_levels", err < 1e-6, format!("max |2E_k − (1 + 2k)| = {err:.2e}")));
    report.data.insert("oscillator_numeric".into(), json!(ev));
    Ok(())
}

fn linear_model(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let lam = cfg.map.linear_eigen().0;
    let a = vec![vec![lam]];
    let d_a = ctx(metaplectic_factor(&a), "metaplectic factor")?;
    let mut t = Table::new(&["k", "re", "im", "predicted"]);
    let mut err: f64 = 0.0;
    for k in 0..cfg.bands {
        let predicted = lam.powf(-0.5 - k as f64);
        for z in ctx(la_block_spectrum(&a, k), "block spectrum")? {
            let z = z * lam.powf(-0.5);
            err = err.max((z.norm() - predicted).abs());
            t.push(vec![k.to_string(), fmt(z.re), fmt(z.im), fmt(predicted)]);
        }
    }
    report.tables.insert("linear_model".into(), t);
    report.data.insert("lambda".into(), json!(lam));
    report.data.insert("d_A".into(), json!(d_a));
    report.verdicts.push(Verdict::new("block_radii", err < 1e-12, format!("max deviation from λ^(−1/2−k): {err:.2e}")));
    Ok(())
}

fn stats(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let preds = predictions(cfg)?;
    let r_pred = ctx(predicted_radius(&cfg.map, &cfg.potential, 64), "predicted radius")?;
    let per_n: Vec<_> = cfg.n_list.par_iter().map(|&n| Ok((n, matrix_spectrum(cfg, n, &preds)?))).collect::<Result<Vec<_>, CliError>>()?;
    let mut t = Table::new(&["N", "band0_count", "r_pred", "fraction_within", "ks_angle"]);
    let (mut fr, mut ks) = (Vec::new(), Vec::new());
    for (n, res) in per_n {
        let band0 = res.band(0);
        let s = concentration_stats(&band0, r_pred, STATS_DELTA);
        let w = weyl_count(&res);
        t.push(vec![n.to_string(), w.count.to_string(), fmt(r_pred), fmt(s.fraction_within), fmt(s.ks_angle)]);
        report.verdicts.push(Verdict::new(format!("weyl_N{n}"), w.deviation == 0, format!("band 0: {} of {}", w.count, w.expected)));
        fr.push(s.fraction_within);
        ks.push(s.ks_angle);
        report.spectra.push(SpectrumEntry { n, engine: "matrix".into(), predictions: preds.clone(), resonances: res });
    }
    if fr.len() >= 2 {
        let conc = fr.windows(2).all(|w| w[1] >= w[0]);
        let equi = ks.windows(2).all(|w| w[1] <= w[0]);
        report.verdicts.push(Verdict::new("concentration_trend", conc, format!("fraction within δ = {STATS_DELTA}: {fr:.3?}")));
        report.verdicts.push(Verdict::new("equidistribution_trend", equi, format!("KS angle: {ks:.3?}")));
    }
    report.tables.insert("stats".into(), t);
    report.data.insert("r_pred".into(), json!(r_pred));
    Ok(())
}
