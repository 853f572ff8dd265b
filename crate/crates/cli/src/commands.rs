//! Subcommand implementations.

use std::path::{Path, PathBuf};

use leoint::clocks::ClockModel;
use leoint::geodesy::{free_space_path_loss_db, spherical_destination};
use leoint::geolocate::{
    estimate as solve, horizontal_offset, load_capture, postfit_residual_stats, synthesize_capture, AltitudePrior,
    ErrorEllipse, GeolocationSolution, PassCapture, ResidualStats,
};
use leoint::linkbudget::{
    excision_attenuation_db, matched_jamming_ratio, matched_vs_flat_advantage, spoofing_efficiency_factor, LinkBudget,
};
use leoint::montecarlo::{
    clock_table, paired_difference, run_clock_study, subgroup_analysis, trial_rng, McConfig, McResult, SubgroupStats,
};
use leoint::survey::{
    build_control_grid, detect_windows, hotspot_map_from_windows, hotspots_geojson, load_observables,
    write_hotspots_csv, write_observables, ControlGrid, Hypothesis, Region,
};
use rand::RngCore;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{
    self, EstimateConfig, LinkBudgetConfig, Loaded, MonteCarloConfig, SimulateConfig, SurveyConfig,
};
use crate::failure::Failure;
use crate::output::{Artifacts, Format};
use crate::Common;

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::config(format!("referenced file not found: {}", path.display())))
    }
}

fn csv_bytes<R: Serialize>(rows: &[R]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Failure::io(e.to_string()))
}

// ── simulate ────────────────────────────────────────────────────────────

pub fn simulate(args: &Common) -> Result<(), Failure> {
    let mut loaded: Loaded<SimulateConfig> = config::load(args.config.as_deref(), &args.set)?;
    if let Some(s) = args.seed {
        loaded.config.seed = s;
    }
    let cfg = &loaded.config;
    let scenario = cfg.scenario.resolve()?;
    let clock = cfg.clock.resolve()?;
    let passes = scenario.build_passes()?;
    let tx = scenario.transmitter_state();
    let mut out = Artifacts::create(&args.out, &args.format)?;

    // same seed derivation as trial 0 of a Monte Carlo run
    let mut rng = trial_rng(cfg.seed, 0);
    let mut pass_seeds = Map::new();
    let mut sidecars = Vec::new();
    for (pass, geom) in passes.iter().zip(&scenario.passes) {
        let seed = rng.next_u64();
        let w = if cfg.white_noise { geom.w_sigma } else { 0.0 };
        let cap = synthesize_capture(&tx, pass, &clock, w, seed)?.with_sigma(geom.w_sigma)?;
        let stem = &geom.label;
        cap.save(out.dir(), stem)?;
        for name in [format!("{stem}.csv"), format!("{stem}.traj.csv"), format!("{stem}.json")] {
            out.record(&name)?;
        }
        pass_seeds.insert(stem.clone(), json!(seed));
        sidecars.push(PathBuf::from(format!("{stem}.json")));
        println!("{stem}: {} samples, seed {seed}", cap.measurements.len());
    }
    out.write_json("truth.json", &tx)?;
    let follow_up = EstimateConfig {
        captures: sidecars,
        frequency: tx.frequency,
        altitude_prior: Some(AltitudePrior {
            altitude: tx.position.altitude,
            sigma: 5.0,
        }),
        truth: Some(tx.position),
        ..EstimateConfig::default()
    };
    out.write_json("estimate.json", &follow_up)?;
    out.finish("simulate", json!({ "master": cfg.seed, "passes": pass_seeds }), cfg)?;
    Ok(())
}

// ── estimate ────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct PassReport {
    label: String,
    clock_rate: f64,
    residuals: ResidualStats,
}

#[derive(Serialize)]
struct TruthError {
    east_m: f64,
    north_m: f64,
    horizontal_m: f64,
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    latitude: f64,
    longitude: f64,
    altitude: f64,
    passes: Vec<PassReport>,
    truth_error: Option<TruthError>,
    solution: &'a GeolocationSolution,
}

#[derive(Serialize)]
struct ResidualRow<'a> {
    label: &'a str,
    t: f64,
    residual_hz: f64,
}

/// Closed polygon approximating an ellipse around (lat, lon), as GeoJSON
/// [lon, lat] pairs.
fn ellipse_ring(lat: f64, lon: f64, e: &ErrorEllipse) -> Vec<[f64; 2]> {
    const VERTICES: usize = 72;
    let th = e.orientation.to_radians();
    let major = (th.sin(), th.cos());
    let minor = (th.cos(), -th.sin());
    let mut ring: Vec<[f64; 2]> = (0..VERTICES)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / VERTICES as f64;
            let (ca, sb) = (e.a * phi.cos(), e.b * phi.sin());
            let east = ca * major.0 + sb * minor.0;
            let north = ca * major.1 + sb * minor.1;
            let bearing = east.atan2(north).to_degrees();
            let (plat, plon) = spherical_destination(lat, lon, bearing, east.hypot(north));
            [plon, plat]
        })
        .collect();
    ring.push(ring[0]);
    ring
}

pub fn estimate(args: &Common) -> Result<(), Failure> {
    let loaded: Loaded<EstimateConfig> = config::load(args.config.as_deref(), &args.set)?;
    let cfg = &loaded.config;
    if cfg.captures.is_empty() {
        return Err(Failure::config("estimate needs at least one capture"));
    }
    let paths: Vec<PathBuf> = cfg.captures.iter().map(|p| loaded.resolve(p)).collect();
    for p in &paths {
        require_file(p)?;
    }
    let captures = paths
        .iter()
        .map(|p| load_capture(p).map_err(|e| Failure::from(e).context(p.display())))
        .collect::<Result<Vec<PassCapture>, Failure>>()?;
    let mut out = Artifacts::create(&args.out, &args.format)?;
    let sol = match solve(&captures, cfg.altitude_prior, cfg.init, cfg.frequency, &cfg.options) {
        Ok(s) => s,
        Err(e) => {
            let f = Failure::from(e);
            if f.code == Failure::NUMERICAL {
                let passes: Vec<Value> = captures
                    .iter()
                    .map(|c| json!({ "label": c.label(), "measurements": c.measurements.len() }))
                    .collect();
                out.write_json("diagnostics.json", &json!({ "error": f.message, "passes": passes }))?;
                out.finish("estimate", Value::Null, cfg)?;
            }
            return Err(f);
        }
    };
    let pos = sol.transmitter.position;
    let passes = postfit_residual_stats(&sol)
        .into_iter()
        .map(|(label, residuals)| PassReport {
            clock_rate: sol.transmitter.clock_rate(&label),
            label,
            residuals,
        })
        .collect();
    let truth_error = cfg.truth.map(|t| {
        let (e, n) = horizontal_offset(&t, &pos);
        TruthError {
            east_m: e,
            north_m: n,
            horizontal_m: e.hypot(n),
        }
    });
    let report = EstimateReport {
        latitude: pos.latitude,
        longitude: pos.longitude,
        altitude: pos.altitude,
        passes,
        truth_error,
        solution: &sol,
    };
    if out.wants(Format::Json) {
        out.write_json("solution.json", &report)?;
    }
    if out.wants(Format::Csv) {
        let rows: Vec<ResidualRow> = captures
            .iter()
            .zip(&sol.postfit_residuals)
            .flat_map(|(c, r)| {
                c.measurements.iter().zip(&r.residuals).map(move |(m, &v)| ResidualRow {
                    label: &r.label,
                    t: m.t,
                    residual_hz: v,
                })
            })
            .collect();
        out.write("residuals.csv", &csv_bytes(&rows)?)?;
    }
    if out.wants(Format::Geojson) {
        let feature = |e: &ErrorEllipse| {
            json!({
                "type": "Feature",
                "geometry": { "type": "Polygon", "coordinates": [ellipse_ring(pos.latitude, pos.longitude, e)] },
                "properties": { "confidence": e.confidence, "a_m": e.a, "b_m": e.b, "orientation_deg": e.orientation },
            })
        };
        let fc = json!({
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "geometry": { "type": "Point", "coordinates": [pos.longitude, pos.latitude] },
                    "properties": { "altitude_m": pos.altitude },
                },
                feature(&sol.ellipse95),
                feature(&sol.ellipse99),
            ],
        });
        out.write_json("solution.geojson", &fc)?;
    }
    out.finish("estimate", Value::Null, cfg)?;
    println!(
        "estimate {:.6} {:.6} {:.1} m; 95% ellipse {:.1} x {:.1} m at {:.1} deg; {} iterations",
        pos.latitude, pos.longitude, pos.altitude, sol.ellipse95.a, sol.ellipse95.b, sol.ellipse95.orientation, sol.iterations
    );
    Ok(())
}

// ── montecarlo ──────────────────────────────────────────────────────────

#[derive(Serialize)]
struct SummaryRow {
    clock: String,
    h_minus2: f64,
    a_m: f64,
    b_m: f64,
    orientation_deg: f64,
    formal_a_m: f64,
    formal_b_m: f64,
    inside_formal95: f64,
    minor_axis_misalignment_deg: f64,
    clock_a_m: Option<f64>,
    clock_b_m: Option<f64>,
}

#[derive(Serialize)]
struct TrialRow {
    trial: usize,
    east_m: f64,
    north_m: f64,
    formal_a_m: f64,
    formal_b_m: f64,
    residual_std_hz: f64,
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn summary_text(rows: &[SummaryRow]) -> String {
    let mut s = format!("{:<20} {:>9} {:>10} {:>10}\n", "clock", "h-2", "a (m)", "b (m)");
    for r in rows {
        s += &format!("{:<20} {:>9.1e} {:>10.1} {:>10.1}\n", r.clock, r.h_minus2, r.a_m, r.b_m);
    }
    s
}

pub fn montecarlo(args: &Common) -> Result<(), Failure> {
    let mut loaded: Loaded<MonteCarloConfig> = config::load(args.config.as_deref(), &args.set)?;
    if let Some(s) = args.seed {
        loaded.config.seed = s;
    }
    let cfg = &loaded.config;
    let scenario = cfg.scenario.resolve()?;
    let models = cfg.clocks.iter().map(|c| c.resolve()).collect::<Result<Vec<ClockModel>, _>>()?;
    if models.is_empty() {
        return Err(Failure::config("montecarlo needs at least one clock"));
    }
    let mut base = McConfig::new(scenario, models[0].clone(), cfg.seed);
    base.trials = cfg.trials;
    base.white_noise = cfg.white_noise;
    base.altitude_prior = cfg.altitude_prior;
    match &cfg.subgroup {
        Some(sg) => {
            base.subgroup_size = sg.size;
            base.subgroup_draws = sg.draws;
        }
        None => base.subgroup_size = cfg.trials.clamp(2, 250),
    }
    base.validate()?;

    let table = clock_table(&base, &models)?;
    let baseline: Option<McResult> = if cfg.paired_baseline {
        Some(run_clock_study(&McConfig {
            clock_model: ClockModel::ideal(),
            ..base.clone()
        })?)
    } else {
        None
    };
    let subgroup: Option<SubgroupStats> = match cfg.subgroup {
        Some(_) => Some(subgroup_analysis(&table[0].1, &base)?),
        None => None,
    };

    let mut rows = Vec::with_capacity(table.len());
    for (row, result) in &table {
        let clock = match &baseline {
            Some(b) => Some(paired_difference(result, b)?),
            None => None,
        };
        rows.push(SummaryRow {
            clock: row.clock.clone(),
            h_minus2: row.h_minus2,
            a_m: row.a,
            b_m: row.b,
            orientation_deg: result.empirical_ellipse95.orientation,
            formal_a_m: result.mean_formal_a95,
            formal_b_m: result.mean_formal_b95,
            inside_formal95: result.fraction_inside_formal95(),
            minor_axis_misalignment_deg: result.minor_axis_misalignment(),
            clock_a_m: clock.map(|e| e.a),
            clock_b_m: clock.map(|e| e.b),
        });
    }

    let mut out = Artifacts::create(&args.out, &args.format)?;
    let text = summary_text(&rows);
    if out.wants(Format::Csv) {
        out.write("summary.csv", &csv_bytes(&rows)?)?;
    }
    if out.wants(Format::Json) {
        out.write_json("summary.json", &json!({ "rows": rows, "subgroup": subgroup }))?;
    }
    out.write("summary.txt", text.as_bytes())?;
    if cfg.dump_trials && out.wants(Format::Csv) {
        for (row, result) in &table {
            let trials: Vec<TrialRow> = result
                .trials
                .iter()
                .enumerate()
                .map(|(i, t)| TrialRow {
                    trial: i,
                    east_m: t.east,
                    north_m: t.north,
                    formal_a_m: t.formal95.a,
                    formal_b_m: t.formal95.b,
                    residual_std_hz: t.residual_std,
                })
                .collect();
            out.write(&format!("trials_{}.csv", slug(&row.clock)), &csv_bytes(&trials)?)?;
        }
    }
    let seeds = json!({ "master": cfg.seed, "trial_streams": cfg.trials });
    out.finish("montecarlo", seeds, cfg)?;
    print!("{text}");
    if let Some(sg) = &subgroup {
        println!(
            "subgroups of {}: max deviation a {:.1}%, b {:.1}% over {} draws",
            sg.subgroup_size,
            100.0 * sg.max_a_deviation,
            100.0 * sg.max_b_deviation,
            sg.draws
        );
    }
    Ok(())
}

// ── survey ──────────────────────────────────────────────────────────────

pub fn survey(args: &Common) -> Result<(), Failure> {
    let mut loaded: Loaded<SurveyConfig> = config::load(args.config.as_deref(), &args.set)?;
    if let Some(s) = args.seed {
        loaded.config.seed = s;
    }
    let cfg = &loaded.config;
    let files: Vec<PathBuf> = cfg.observables.iter().map(|p| loaded.resolve(p)).collect();
    let grid_path = cfg.control_grid.as_ref().map(|p| loaded.resolve(p));
    for p in files.iter().chain(&grid_path) {
        require_file(p)?;
    }
    let mut out = Artifacts::create(&args.out, &args.format)?;

    let records = match (files.is_empty(), &cfg.synthetic) {
        (false, None) => {
            let mut all = Vec::new();
            for p in &files {
                all.extend(load_observables(p).map_err(|e| Failure::from(e).context(p.display()))?);
            }
            all
        }
        (true, Some(sc)) => {
            let mut sc = sc.clone();
            sc.seed = cfg.seed;
            let recs = sc.generate()?;
            if cfg.write_observables {
                let mut buf = Vec::new();
                write_observables(&mut buf, &recs)?;
                out.write("observables.csv", &buf)?;
            }
            recs
        }
        (false, Some(_)) => return Err(Failure::config("set either observables or synthetic, not both")),
        (true, None) => return Err(Failure::config("no observables and no synthetic scenario")),
    };

    let grid = match &grid_path {
        Some(p) => ControlGrid::load(p).map_err(|e| Failure::from(e).context(p.display()))?,
        None => build_control_grid(records.iter(), cfg.binning)?,
    };
    let mut survey: Vec<_> = records.iter().filter(|r| r.region == Region::Survey).copied().collect();
    survey.sort_by(|a, b| a.t.total_cmp(&b.t));
    let decisions = detect_windows(&survey, &grid, cfg.window)?;
    let cells = hotspot_map_from_windows(&decisions, cfg.cell_size)?;
    let events = decisions.iter().filter(|d| d.outcome.decision == Hypothesis::H1).count();

    if out.wants(Format::Json) {
        out.write("control_grid.json", grid.to_json()?.as_bytes())?;
        let summary = json!({
            "records": records.len(),
            "survey_records": survey.len(),
            "usable_bins": grid.usable_bins(),
            "windows": decisions.len(),
            "events": events,
            "cells": cells.len(),
        });
        out.write_json("survey_summary.json", &summary)?;
    }
    if out.wants(Format::Geojson) {
        out.write_json("hotspots.geojson", &hotspots_geojson(&cells, cfg.cell_size))?;
    }
    if out.wants(Format::Csv) {
        let mut buf = Vec::new();
        write_hotspots_csv(&mut buf, &cells, cfg.cell_size)?;
        out.write("hotspots.csv", &buf)?;
    }
    out.finish("survey", json!({ "master": cfg.seed }), cfg)?;
    println!(
        "{} records, {} usable control bins, {} tests, {} events, {} cells",
        records.len(),
        grid.usable_bins(),
        decisions.len(),
        events,
        cells.len()
    );
    Ok(())
}

// ── linkbudget ──────────────────────────────────────────────────────────

pub fn linkbudget(args: &Common) -> Result<(), Failure> {
    let loaded: Loaded<LinkBudgetConfig> = config::load(args.config.as_deref(), &args.set)?;
    let cfg = &loaded.config;
    let path_loss = match cfg.path_loss_db {
        Some(l) => l,
        None => free_space_path_loss_db(cfg.range_m, cfg.frequency_hz)?,
    };
    let budget = LinkBudget::from_cinr_drop(cfg.cinr_drop_db, cfg.n0_dbw_hz, cfg.chip_interval_s, cfg.g_r_db, path_loss)?;
    let ratio = matched_jamming_ratio(cfg.eta_dbhz, cfg.chip_interval_s);
    let efficiency = spoofing_efficiency_factor(cfg.eta_dbhz, cfg.chip_interval_s);
    let flat = matched_vs_flat_advantage(cfg.flat_span_multiple)?;
    let excision = excision_attenuation_db::<f64>(cfg.excision_lobes)?;

    let lines = [
        ("path loss", format!("{path_loss:.1} dB")),
        ("interference power", format!("{:.1} dBW", budget.p_i_dbw)),
        ("interference density", format!("{:.1} dBW/Hz", budget.i0_dbw_hz)),
        ("transmit power", format!("{:.1} dBW ({:.0} W)", budget.p_s_dbw, budget.p_s_watts())),
        ("matched jamming ratio", format!("{ratio:.1} dB")),
        ("spoofing efficiency", format!("{efficiency:.0}x")),
        ("matched vs flat", format!("{flat:.1} dB")),
        ("excision attenuation", format!("{excision:.1} dB")),
    ];
    let report = json!({
        "path_loss_db": path_loss,
        "interference_power_dbw": budget.p_i_dbw,
        "interference_density_dbw_hz": budget.i0_dbw_hz,
        "transmit_power_dbw": budget.p_s_dbw,
        "transmit_power_w": budget.p_s_watts(),
        "matched_jamming_ratio_db": ratio,
        "spoofing_efficiency_factor": efficiency,
        "matched_vs_flat_advantage_db": flat,
        "excision_attenuation_db": excision,
        "rendered": lines.iter().map(|(k, v)| (k.to_string(), Value::String(v.clone()))).collect::<Map<_, _>>(),
    });
    let mut out = Artifacts::create(&args.out, &args.format)?;
    if out.wants(Format::Json) {
        out.write_json("linkbudget.json", &report)?;
    }
    if out.wants(Format::Csv) {
        let mut text = String::from("quantity,value\n");
        for key in [
            "path_loss_db",
            "interference_power_dbw",
            "interference_density_dbw_hz",
            "transmit_power_dbw",
            "transmit_power_w",
            "matched_jamming_ratio_db",
            "spoofing_efficiency_factor",
            "matched_vs_flat_advantage_db",
            "excision_attenuation_db",
        ] {
            text += &format!("{key},{}\n", report[key]);
        }
        out.write("linkbudget.csv", text.as_bytes())?;
    }
    out.finish("linkbudget", Value::Null, cfg)?;
    for (k, v) in &lines {
        println!("{k:<24} {v}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(config: Option<PathBuf>, out: &Path, set: &[&str]) -> Common {
        Common {
            config,
            out: out.to_path_buf(),
            seed: Some(7),
            set: set.iter().map(|s| s.to_string()).collect(),
            format: Vec::new(),
        }
    }

    fn read_json(path: &Path) -> Value {
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn missing_config_is_a_validation_error() {
        let tmp = tempfile::tempdir().unwrap();
        let e = simulate(&common(Some(tmp.path().join("absent.json")), tmp.path(), &[])).unwrap_err();
        assert_eq!(e.code, Failure::CONFIG);
        assert!(e.message.contains("absent.json"), "{}", e.message);
    }

    #[test]
    fn empty_parameter_file_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tmp.path().join("lb.json");
        std::fs::write(&cfg, "").unwrap();
        let e = linkbudget(&common(Some(cfg), tmp.path(), &[])).unwrap_err();
        assert_eq!(e.code, Failure::CONFIG);
    }

    #[test]
    fn noise_free_capture_recovers_truth() {
        let tmp = tempfile::tempdir().unwrap();
        let sim = tmp.path().join("sim");
        simulate(&common(None, &sim, &["clock=ideal", "white_noise=false"])).unwrap();
        let est = tmp.path().join("est");
        estimate(&common(Some(sim.join("estimate.json")), &est, &[])).unwrap();
        let report = read_json(&est.join("solution.json"));
        let err = report["truth_error"]["horizontal_m"].as_f64().unwrap();
        assert!(err < 0.1, "{err}");
        assert!(est.join("solution.geojson").is_file() && est.join("residuals.csv").is_file());
    }

    #[test]
    fn three_pass_ocxo_ellipse_of_order_220_m() {
        let tmp = tempfile::tempdir().unwrap();
        let sim = tmp.path().join("sim");
        simulate(&common(None, &sim, &["scenario=three_pass", "clock=ocxo"])).unwrap();
        let est = tmp.path().join("est");
        let mut args = common(Some(sim.join("estimate.json")), &est, &[]);
        args.format = vec![Format::Json];
        estimate(&args).unwrap();
        let a = read_json(&est.join("solution.json"))["solution"]["ellipse95"]["a"].as_f64().unwrap();
        assert!((110.0..440.0).contains(&a), "{a}");
        assert!(!est.join("residuals.csv").exists());
    }

    #[test]
    fn malformed_capture_reports_line() {
        let tmp = tempfile::tempdir().unwrap();
        let sim = tmp.path().join("sim");
        simulate(&common(None, &sim, &[])).unwrap();
        let capture = sim.join("day144.csv");
        let text = std::fs::read_to_string(&capture).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[3] = "0.1,not-a-number,2.3";
        std::fs::write(&capture, lines.join("\n")).unwrap();
        let e = estimate(&common(Some(sim.join("estimate.json")), &tmp.path().join("est"), &[])).unwrap_err();
        assert_eq!(e.code, Failure::CONFIG);
        assert!(e.message.contains("line 4"), "{}", e.message);
    }

    #[test]
    fn non_convergence_exits_with_numerical_code() {
        let tmp = tempfile::tempdir().unwrap();
        let sim = tmp.path().join("sim");
        simulate(&common(None, &sim, &[])).unwrap();
        let est = tmp.path().join("est");
        let set = [
            "options.max_iterations=1",
            r#"init={"latitude":33.0,"longitude":33.0,"altitude":0.0}"#,
        ];
        let e = estimate(&common(Some(sim.join("estimate.json")), &est, &set)).unwrap_err();
        assert_eq!(e.code, Failure::NUMERICAL, "{}", e.message);
        assert!(est.join("diagnostics.json").is_file());
    }

    #[test]
    fn montecarlo_reports_one_row_per_clock() {
        let tmp = tempfile::tempdir().unwrap();
        let set = ["trials=40", "subgroup=null"];
        montecarlo(&common(None, tmp.path(), &set)).unwrap();
        let csv = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("clock,h_minus2,a_m,b_m"));
        let rows = read_json(&tmp.path().join("summary.json"))["rows"].as_array().unwrap().len();
        assert_eq!(rows, 3);
    }

    #[test]
    fn control_only_input_gives_empty_hotspots_and_grid_reuse_is_stable() {
        let tmp = tempfile::tempdir().unwrap();
        let records = SurveyConfig::default().synthetic.unwrap();
        let records = leoint::survey::synth::SurveyScenario {
            duration: 3.0 * 86_400.0,
            ..records
        }
        .generate()
        .unwrap();
        let control: Vec<_> = records.iter().filter(|r| r.region == Region::OceanControl).copied().collect();
        let mut buf = Vec::new();
        write_observables(&mut buf, &control).unwrap();
        std::fs::write(tmp.path().join("control.csv"), buf).unwrap();
        let mut buf = Vec::new();
        write_observables(&mut buf, &records).unwrap();
        std::fs::write(tmp.path().join("all.csv"), buf).unwrap();

        let cfg = |files: &str, grid: &str| {
            let path = tmp.path().join(format!("{files}.json"));
            let mut v = serde_json::to_value(SurveyConfig::default()).unwrap();
            v["synthetic"] = Value::Null;
            v["observables"] = json!([format!("{files}.csv")]);
            if !grid.is_empty() {
                v["control_grid"] = json!(grid);
            }
            std::fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
            path
        };
        let out = tmp.path().join("control_out");
        survey(&common(Some(cfg("control", "")), &out, &[])).unwrap();
        let hot = read_json(&out.join("hotspots.geojson"));
        assert_eq!(hot["features"].as_array().unwrap().len(), 0);
        assert!(ControlGrid::load(&out.join("control_grid.json")).unwrap().usable_bins() > 0);

        let fresh = tmp.path().join("fresh");
        survey(&common(Some(cfg("all", "")), &fresh, &[])).unwrap();
        let reused = tmp.path().join("reused");
        survey(&common(Some(cfg("all", "fresh/control_grid.json")), &reused, &[])).unwrap();
        let a = std::fs::read(fresh.join("hotspots.csv")).unwrap();
        let b = std::fs::read(reused.join("hotspots.csv")).unwrap();
        assert!(a.iter().filter(|&&c| c == b'\n').count() > 1);
        assert_eq!(a, b);
    }

    #[test]
    fn survey_rejects_two_sources() {
        let tmp = tempfile::tempdir().unwrap();
        let obs = tmp.path().join("obs.csv");
        std::fs::write(&obs, "t,sv_id,band,cinr_dbhz,r_sr_m,z_r_deg,z_s_deg,lat_deg,lon_deg,region\n").unwrap();
        let set = [format!("observables=[{:?}]", obs.to_str().unwrap())];
        let set: Vec<&str> = set.iter().map(String::as_str).collect();
        let e = survey(&common(None, tmp.path(), &set)).unwrap_err();
        assert_eq!(e.code, Failure::CONFIG);
    }

    #[test]
    fn link_budget_report() {
        let tmp = tempfile::tempdir().unwrap();
        linkbudget(&common(None, tmp.path(), &[])).unwrap();
        let r = read_json(&tmp.path().join("linkbudget.json"));
        assert!((r["interference_power_dbw"].as_f64().unwrap() + 137.0).abs() < 0.5);
        assert!((r["transmit_power_dbw"].as_f64().unwrap() - 19.0).abs() < 0.5);
        assert_eq!(r["rendered"]["matched vs flat"], "4.3 dB");
        let manifest = read_json(&tmp.path().join("manifest.json"));
        assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
    }
}
