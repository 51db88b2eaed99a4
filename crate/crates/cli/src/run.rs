//! Run orchestration: obtain a dataset, run the selected estimators, and
//! write the three artifacts (estimates table, per-curve CSVs, manifest).
//! Every number in the artifacts is copied from an estimate field; nothing
//! is recomputed at this layer.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rdbound::boundary::{
    flexible_boundary_curve, mean_flexible_bandwidth, papay_effect, papay_fit, zajonc_bandwidth,
    zajonc_curve, ZajoncConfig, ZajoncRule,
};
use rdbound::classic::{centering_rd, conditional_rd, multicutoff_rd};
use rdbound::data::Diagnostics;
use rdbound::dgp;
use rdbound::{
    validate_and_normalize, BandwidthPair, BoundaryCurve, BoundaryId, Dataset, EstimateKind,
    KernelKind, RdEstimate,
};

use crate::config::{EstimatorSel, RunConfig, SCHEMA_VERSION};
use crate::csvio::{load_csv, write_csv};
use crate::CliError;

fn data_err(e: rdbound::Error) -> CliError {
    CliError::Data(e.to_string())
}

fn est_err(e: rdbound::Error) -> CliError {
    CliError::Estimation(e.to_string())
}

fn kind_name(kind: EstimateKind) -> &'static str {
    match kind {
        EstimateKind::Sharp => "sharp",
        EstimateKind::Fuzzy => "fuzzy",
    }
}

#[derive(Serialize)]
struct EstimateRecord {
    method: String,
    group: Option<String>,
    #[serde(flatten)]
    estimate: RdEstimate,
}

#[derive(Serialize)]
struct WeightedRecord {
    method: String,
    group: String,
    weighted_tau: f64,
    weighted_se: f64,
    weighting: String,
}

#[derive(Serialize)]
struct Manifest {
    schema_version: u32,
    config: RunConfig,
    seed: Option<u64>,
    diagnostics: Diagnostics,
    versions: BTreeMap<String, String>,
    notes: BTreeMap<String, serde_json::Value>,
}

/// One long-format row of a curve CSV.
struct CurveRow {
    boundary: BoundaryId,
    percentile: u8,
    location: Option<f64>,
    estimate: Option<RdEstimate>,
    skipped_reason: Option<String>,
}

fn curve_rows(curve: &BoundaryCurve) -> Vec<CurveRow> {
    let boundary = curve.grid.boundary;
    let mut rows: Vec<CurveRow> = curve
        .points
        .iter()
        .map(|p| CurveRow {
            boundary,
            percentile: p.percentile,
            location: Some(p.location),
            estimate: Some(p.estimate.clone()),
            skipped_reason: None,
        })
        .chain(curve.skipped.iter().map(|s| CurveRow {
            boundary,
            percentile: s.percentile,
            location: None,
            estimate: None,
            skipped_reason: Some(s.reason.clone()),
        }))
        .collect();
    rows.sort_by_key(|r| r.percentile);
    rows
}

fn write_curve_csv(path: &Path, rows: &[CurveRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("create {}: {e}", path.display())))?;
    w.write_record([
        "boundary_id",
        "percentile",
        "location",
        "tau_conventional",
        "tau_bc",
        "se_robust",
        "ci_lower",
        "ci_upper",
        "h",
        "n_eff",
        "skipped_reason",
    ])
    .map_err(|e| CliError::Data(e.to_string()))?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let (tc, tb, se, lo, hi, h, neff) = match &r.estimate {
            Some(e) => (
                Some(e.tau_conventional),
                Some(e.tau_bias_corrected),
                Some(e.se_robust),
                Some(e.ci_lower),
                Some(e.ci_upper),
                Some(e.h),
                Some(e.n_left + e.n_right),
            ),
            None => (None, None, None, None, None, None, None),
        };
        w.write_record([
            r.boundary.to_string(),
            r.percentile.to_string(),
            fmt(r.location),
            fmt(tc),
            fmt(tb),
            fmt(se),
            fmt(lo),
            fmt(hi),
            fmt(h),
            neff.map(|v| v.to_string()).unwrap_or_default(),
            r.skipped_reason.clone().unwrap_or_default(),
        ])
        .map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}

fn manual_bandwidth(cfg: &RunConfig) -> Result<Option<BandwidthPair>, CliError> {
    match cfg.estimators.h {
        None => Ok(None),
        Some(h) => {
            let b = cfg.estimators.b.unwrap_or(1.5 * h);
            BandwidthPair::manual(h, b)
                .map(Some)
                .map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

pub struct RunOutput {
    pub out_dir: PathBuf,
    pub estimate_rows: usize,
}

/// Execute a full run and write artifacts into `out_dir`.
pub fn execute(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutput, CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("create {}: {e}", out_dir.display())))?;

    // Dataset.
    let raw: Dataset = if let Some(input) = &cfg.input {
        load_csv(&input.path, &input.columns)?
    } else {
        let dcfg = cfg.dgp.as_ref().expect("validated");
        dgp::generate(dcfg).map_err(|e| CliError::Config(e.to_string()))?
    };
    let rule = cfg.rule()?;
    let ds = validate_and_normalize(&raw, &rule).map_err(data_err)?;

    let kernel = cfg.estimators.kernel;
    let fraction = cfg.estimators.fraction;
    let kinds = cfg.estimators.kind.kinds();
    let manual_bw = manual_bandwidth(cfg)?;
    let mut records: Vec<String> = Vec::new();
    let mut notes: BTreeMap<String, serde_json::Value> = BTreeMap::new();

    fn push<T: Serialize>(records: &mut Vec<String>, value: &T) -> Result<(), CliError> {
        records.push(serde_json::to_string(value).map_err(|e| CliError::Data(e.to_string()))?);
        Ok(())
    }

    for sel in &cfg.estimators.run {
        match sel {
            EstimatorSel::Centering => {
                for &kind in &kinds {
                    let est = centering_rd(&ds, kind, kernel, manual_bw).map_err(est_err)?;
                    push(&mut records, &EstimateRecord {
                        method: "centering".into(),
                        group: None,
                        estimate: est,
                    })?;
                }
            }
            EstimatorSel::ConditionalX1 | EstimatorSel::ConditionalX2 => {
                let along = crate::config::running_var_of(*sel).expect("conditional");
                for &kind in &kinds {
                    let est =
                        conditional_rd(&ds, along, kind, kernel, manual_bw).map_err(est_err)?;
                    push(&mut records, &EstimateRecord {
                        method: sel.name().into(),
                        group: None,
                        estimate: est,
                    })?;
                }
            }
            EstimatorSel::Multicutoff => {
                for &kind in &kinds {
                    let res = multicutoff_rd(&ds, kind, kernel).map_err(est_err)?;
                    for (label, est) in &res.per_group {
                        push(&mut records, &EstimateRecord {
                            method: "multicutoff".into(),
                            group: Some(label.clone()),
                            estimate: est.clone(),
                        })?;
                    }
                    push(&mut records, &EstimateRecord {
                        method: "multicutoff".into(),
                        group: Some("pooled".into()),
                        estimate: res.pooled.clone(),
                    })?;
                    push(&mut records, &WeightedRecord {
                        method: "multicutoff".into(),
                        group: "weighted".into(),
                        weighted_tau: res.weighted_tau,
                        weighted_se: res.weighted_se,
                        weighting: res.weighting.clone(),
                    })?;
                    if !res.skipped.is_empty() {
                        notes.insert(
                            format!("multicutoff_{}_skipped_groups", kind_name(kind)),
                            serde_json::to_value(&res.skipped).unwrap(),
                        );
                    }
                }
            }
            EstimatorSel::Flexible => {
                for &kind in &kinds {
                    let mut rows = Vec::new();
                    for boundary in [BoundaryId::B1, BoundaryId::B2] {
                        let curve =
                            flexible_boundary_curve(&ds, boundary, fraction, kind, kernel)
                                .map_err(est_err)?;
                        rows.extend(curve_rows(&curve));
                    }
                    let path =
                        out_dir.join(format!("curve_flexible_{}.csv", kind_name(kind)));
                    write_curve_csv(&path, &rows)?;
                }
            }
            EstimatorSel::Papay => {
                // The surface fit is a jump model in the outcome; fuzzy
                // selections are noted and skipped.
                if !kinds.contains(&EstimateKind::Sharp) {
                    notes.insert(
                        "papay".into(),
                        serde_json::Value::String(
                            "skipped: surface fit is sharp-only".into(),
                        ),
                    );
                    continue;
                }
                let h1 = match cfg.estimators.papay_h1 {
                    Some(h) => h,
                    None => mean_flexible_bandwidth(&ds, BoundaryId::B1, fraction, kernel)
                        .map_err(est_err)?,
                };
                let h2 = match cfg.estimators.papay_h2 {
                    Some(h) => h,
                    None => mean_flexible_bandwidth(&ds, BoundaryId::B2, fraction, kernel)
                        .map_err(est_err)?,
                };
                let fit = papay_fit(&ds, h1, h2, kernel).map_err(est_err)?;
                notes.insert(
                    "papay".into(),
                    serde_json::json!({
                        "h1": h1,
                        "h2": h2,
                        "n_eff": fit.n_eff,
                        "se_kind": "conventional",
                    }),
                );
                let mut rows = Vec::new();
                for boundary in [BoundaryId::B1, BoundaryId::B2] {
                    let grid = rdbound::boundary::build_boundary_grid(&ds, boundary, 1, fraction)
                        .map_err(est_err)?;
                    let h_disc = match boundary {
                        BoundaryId::B1 => h1,
                        BoundaryId::B2 => h2,
                    };
                    for pt in &grid.points {
                        let (tau, se) = papay_effect(&fit, boundary, pt.location);
                        rows.push(CurveRow {
                            boundary,
                            percentile: pt.percentile,
                            location: Some(pt.location),
                            estimate: Some(RdEstimate {
                                kind: EstimateKind::Sharp,
                                tau_conventional: tau,
                                se_conventional: se,
                                tau_bias_corrected: tau,
                                se_robust: se,
                                ci_lower: tau - rdbound::estimate::Z_95 * se,
                                ci_upper: tau + rdbound::estimate::Z_95 * se,
                                h: h_disc,
                                b: h_disc,
                                n_left: 0,
                                n_right: fit.n_eff,
                                first_stage: None,
                                bandwidth_rule: rdbound::BandwidthRule::Manual,
                                bandwidth_fell_back: false,
                            }),
                            skipped_reason: None,
                        });
                    }
                    for s in &grid.collapsed {
                        rows.push(CurveRow {
                            boundary,
                            percentile: s.percentile,
                            location: None,
                            estimate: None,
                            skipped_reason: Some(s.reason.clone()),
                        });
                    }
                }
                write_curve_csv(&out_dir.join("curve_papay_sharp.csv"), &rows)?;
            }
            EstimatorSel::Zajonc => {
                for &kind in &kinds {
                    let mut rows = Vec::new();
                    for boundary in [BoundaryId::B1, BoundaryId::B2] {
                        let zcfg = if cfg.estimators.zajonc_rule == ZajoncRule::Manual {
                            let missing = || {
                                CliError::Config(
                                    "manual zajonc rule needs zajonc_h1/zajonc_h2".into(),
                                )
                            };
                            let h1 = cfg.estimators.zajonc_h1.ok_or_else(missing)?;
                            let h2 = cfg.estimators.zajonc_h2.ok_or_else(missing)?;
                            ZajoncConfig::manual(h1, h2)
                                .map_err(|e| CliError::Config(e.to_string()))?
                        } else {
                            zajonc_bandwidth(
                                &ds,
                                boundary,
                                cfg.estimators.zajonc_rule,
                                cfg.estimators.zajonc_grid,
                                kernel,
                            )
                            .map_err(est_err)?
                        };
                        notes.insert(
                            format!("zajonc_{}_{}", kind_name(kind), boundary),
                            serde_json::json!({ "h1": zcfg.h1, "h2": zcfg.h2 }),
                        );
                        let trim = cfg.estimators.trim.unwrap_or_default();
                        let curve = zajonc_curve(&ds, boundary, &zcfg, kernel, kind, trim)
                            .map_err(est_err)?;
                        rows.extend(curve_rows(&curve));
                    }
                    let path = out_dir.join(format!("curve_zajonc_{}.csv", kind_name(kind)));
                    write_curve_csv(&path, &rows)?;
                }
            }
        }
    }

    // Estimates table.
    let estimates_path = out_dir.join("estimates.jsonl");
    let mut f = fs::File::create(&estimates_path)
        .map_err(|e| CliError::Data(format!("create {}: {e}", estimates_path.display())))?;
    for line in &records {
        writeln!(f, "{line}").map_err(|e| CliError::Data(e.to_string()))?;
    }

    // Manifest.
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        seed: cfg.seed(),
        diagnostics: ds.diagnostics().clone(),
        versions: BTreeMap::from([(
            "rdbound".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        )]),
        notes,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(out_dir.join("manifest.json"), manifest_json)
        .map_err(|e| CliError::Data(e.to_string()))?;

    Ok(RunOutput {
        out_dir: out_dir.to_path_buf(),
        estimate_rows: records.len(),
    })
}

/// Generate a dataset from the config's generator block and write it as
/// CSV.
pub fn simulate(cfg: &RunConfig, out_path: &Path) -> Result<usize, CliError> {
    let dcfg = cfg
        .dgp
        .as_ref()
        .ok_or_else(|| CliError::Config("simulate needs a [dgp] block".into()))?;
    let raw = dgp::generate(dcfg).map_err(|e| CliError::Config(e.to_string()))?;
    let mapping = crate::config::ColumnMap::default();
    write_csv(&raw, out_path, &mapping)?;
    Ok(raw.n())
}

/// Quick internal consistency checks; one pass/fail line each.
pub fn selftest() -> Result<(), CliError> {
    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        println!("selftest: {name} ... {}", if ok { "ok" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    check(
        "kernel weights",
        rdbound::kernel_weight(0.0, KernelKind::Triangular) == 1.0
            && rdbound::kernel_weight(0.5, KernelKind::Triangular) == 0.5
            && rdbound::kernel_weight(1.5, KernelKind::Uniform) == 0.0,
    );

    // Seeded generation is byte-identical.
    let cfg = dgp::benchmark_config(2_000, dgp::TauFn::Constant { value: 0.3 }, 42);
    let a = dgp::generate(&cfg).map_err(|e| CliError::Estimation(e.to_string()))?;
    let b = dgp::generate(&cfg).map_err(|e| CliError::Estimation(e.to_string()))?;
    check("deterministic generation", a.y() == b.y() && a.x1() == b.x1());

    // Noiseless planar surface: the three boundary methods agree exactly.
    let mut pcfg = dgp::benchmark_config(20_000, dgp::TauFn::Constant { value: 0.3 }, 7);
    pcfg.noise_sd = 0.0;
    pcfg.baseline = dgp::BaselineSurface::linear(0.4, 0.002, 0.0);
    let raw = dgp::generate(&pcfg).map_err(|e| CliError::Estimation(e.to_string()))?;
    let ds = validate_and_normalize(&raw, &pcfg.rule)
        .map_err(|e| CliError::Estimation(e.to_string()))?;
    let planar = (|| -> rdbound::Result<(f64, f64, f64)> {
        let curve = flexible_boundary_curve(
            &ds,
            BoundaryId::B1,
            0.10,
            EstimateKind::Sharp,
            KernelKind::Triangular,
        )?;
        let flex = curve.points[curve.points.len() / 2].estimate.tau_conventional;
        let loc = curve.points[curve.points.len() / 2].location;
        let fit = papay_fit(&ds, 30.0, 30.0, KernelKind::Triangular)?;
        let (pap, _) = papay_effect(&fit, BoundaryId::B1, loc);
        let zcfg = ZajoncConfig::manual(20.0, 20.0)?;
        let zaj = rdbound::boundary::zajonc_point(
            &ds,
            BoundaryId::B1,
            loc,
            &zcfg,
            KernelKind::Triangular,
            EstimateKind::Sharp,
        )?
        .tau_conventional;
        Ok((flex, pap, zaj))
    })()
    .map_err(|e| CliError::Estimation(e.to_string()))?;
    check(
        "planar three-method identity",
        (planar.0 - 0.3).abs() < 1e-8
            && (planar.1 - 0.3).abs() < 1e-8
            && (planar.2 - 0.3).abs() < 1e-8,
    );

    if failures > 0 {
        Err(CliError::Estimation(format!("{failures} selftest check(s) failed")))
    } else {
        Ok(())
    }
}
