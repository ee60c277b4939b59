//! Experiment orchestration: configuration, dispatch, CSV/JSON artifacts and
//! the run manifest.
//!
//! CSV schemas (version 1):
//! - studies: `key,x_or_t,statistic,value,stderr`
//! - paths: `t,value,status,excursion_id`

pub mod config;
pub mod spec;

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{parse_config, Command, ExperimentConfig, OUT_DIR_ENV};
pub use spec::parse_model;

use crate::classifier::{classify_boundary, Verdict};
use crate::entrance::{from_infinity_study, speed_law, undershoot_stationarity, SimOptions};
use crate::error::{Error, Result};
use crate::excursion::{
    cramer_limit_check, glue_recurrent_extension, occupation_check, sample_excursion_continuous,
    sample_excursion_jump_in, sample_excursion_stratified, ExcursionOptions, ExcursionSample, GlueOptions, Regime,
};
use crate::fluctuation::cramer_theta;
use crate::levy::LevyModel;
use crate::rate::{parse_rate, RateFunction};
use crate::rng::{self, Phase};
use crate::selftest;
use crate::stats;
use crate::time_change::simulate_time_changed;

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const STUDIES_HEADER: [&str; 5] = ["key", "x_or_t", "statistic", "value", "stderr"];
pub const PATHS_HEADER: [&str; 4] = ["t", "value", "status", "excursion_id"];

/// One row of the studies CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub key: String,
    pub x_or_t: f64,
    pub statistic: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

fn row(key: impl Into<String>, x_or_t: f64, statistic: impl Into<String>, value: f64, stderr: Option<f64>) -> StudyRow {
    StudyRow { key: key.into(), x_or_t, statistic: statistic.into(), value, stderr }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

pub fn studies_csv(rows: &[StudyRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STUDIES_HEADER)?;
    for r in rows {
        let se = r.stderr.map(fmt_num).unwrap_or_default();
        w.write_record([r.key.clone(), fmt_num(r.x_or_t), r.statistic.clone(), fmt_num(r.value), se])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub schema: String,
    pub command: Command,
    pub seed: u64,
    pub config_hash: String,
    pub config: String,
    pub versions: Versions,
    pub artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub tclab: String,
    pub csv_schema: u32,
}

struct Artifacts {
    dir: PathBuf,
    records: Vec<ArtifactRecord>,
}

impl Artifacts {
    fn new(dir: &FsPath) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), records: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.records.push(ArtifactRecord { file: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}

/// Result of [`run`]: process exit code, a human-readable summary and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

fn model_of(cfg: &ExperimentConfig) -> Result<LevyModel> {
    let src = cfg.model.as_deref().ok_or_else(|| cfg.error("model", "missing"))?;
    parse_model(src).map_err(|e| cfg.error("model", e.to_string()))
}

fn rate_of(cfg: &ExperimentConfig) -> Result<RateFunction> {
    let src = cfg.rate.as_deref().ok_or_else(|| cfg.error("rate", "missing"))?;
    // keep parse errors intact so callers can report the column
    parse_rate(src)
}

/// Executes a validated configuration and writes its artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut art = Artifacts::new(&cfg.out_dir)?;
    let (exit_code, summary) = match cfg.command {
        Command::Classify => classify(cfg, &mut art)?,
        Command::Simulate => simulate(cfg, &mut art)?,
        Command::EntranceStudy => entrance(cfg, &mut art)?,
        Command::Speed => speed(cfg, &mut art)?,
        Command::Undershoot => undershoot(cfg, &mut art)?,
        Command::Excursions => excursions(cfg, &mut art)?,
        Command::Glue => glue(cfg, &mut art)?,
        Command::CramerLimit => cramer(cfg, &mut art)?,
        Command::Selftest => selftest_cmd(cfg, &mut art)?,
    };
    let canonical = cfg.canonical();
    let manifest = Manifest {
        schema: "tclab-manifest/1".into(),
        command: cfg.command,
        seed: cfg.seed,
        config_hash: sha256_hex(canonical.as_bytes()),
        config: canonical,
        versions: Versions { tclab: env!("CARGO_PKG_VERSION").into(), csv_schema: CSV_SCHEMA_VERSION },
        artifacts: art.records.clone(),
    };
    art.json("manifest.json", &manifest)?;
    let artifacts = art.records.iter().map(|r| art.dir.join(&r.file)).collect();
    Ok(RunOutcome { exit_code, summary, artifacts })
}

type Step = Result<(i32, String)>;

fn classify(cfg: &ExperimentConfig, art: &mut Artifacts) -> Step {
    let report = classify_boundary(&model_of(cfg)?, &rate_of(cfg)?);
    art.json("report.json", &report)?;
    Ok((0, serde_json::to_string_pretty(&report)?))
}

fn simulate(cfg: &ExperimentConfig, art: &mut Artifacts) -> Step {
    let (model, rate) = (model_of(cfg)?, rate_of(cfg)?);
    let x0 = cfg.get("x0", 0.0)?;
    let dt = cfg.get("dt", 0.01)?;
    let steps = cfg.get("steps", 10_000usize)?;
    let t_max: f64 = cfg.get("t_max", 1.0)?;
    let h: f64 = cfg.get("grid", 0.01)?;
    let paths = cfg.get("paths", 10usize)?;
    if !(h > 0.0 && t_max > 0.0) {
        return Err(cfg.error("grid", "grid step and t_max must be positive"));
    }
    let grid: Vec<f64> = (0..=(t_max / h).round() as usize).map(|k| k as f64 * h).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PATHS_HEADER)?;
    let mut rows = Vec::new();
    let mut exploded = 0;
    for i in 0..paths as u64 {
        let mut r = rng::stream(cfg.seed, i, Phase::Path);
        let p = simulate_time_changed(&model, &rate, x0, dt, steps, &grid, &mut r)?;
        if let crate::time_change::PathStatus::Exploded { zeta } = p.status {
            exploded += 1;
            rows.push(row("zeta", i as f64, "explosion_time", zeta, None));
        }
        p.write_csv(&mut w, i as i64)?;
    }
    art.write("paths.csv", &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
    rows.push(row("explosion", t_max, "fraction", exploded as f64 / paths.max(1) as f64, None));
    art.write("studies.csv", &studies_csv(&rows)?)?;
    Ok((0, format!("{paths} paths, {exploded} exploded before t = {t_max}")))
}

fn sim_opts(cfg: &ExperimentConfig, dt: f64) -> Result<SimOptions> {
    Ok(SimOptions { dt: cfg.get("dt", dt)?, max_steps: cfg.get("max_steps", SimOptions::default().max_steps)? })
}

fn entrance(cfg: &ExperimentConfig, art: &mut Artifacts) -> Step {
    let (model, rate) = (model_of(cfg)?, rate_of(cfg)?);
    let levels = cfg.get_list("levels", &[5.0, 10.0, 20.0, 40.0])?;
    let rep = from_infinity_study(
        &model,
        &rate,
        &levels,
        cfg.get("t_probe", 0.1)?,
        cfg.get("b", 0.0)?,
        cfg.get("n", 800usize)?,
        cfg.seed,
        sim_opts(cfg, 0.01)?,
    )?;
    let mut rows = Vec::new();
    for l in &rep.levels {
        rows.push(row("marginal", l.x, "median", stats::median(&l.marginal), None));
        let (m, se) = stats::mean_se(&l.hitting);
        rows.push(row("hitting", l.x, "mean", m, Some(se)));
    }
    for (k, (a, b)) in rep.ks_marginal.iter().zip(&rep.ks_hitting).enumerate() {
        let x = rep.levels[k + 1].x;
        rows.push(row("ks_marginal", x, "D", a.statistic, None));
        rows.push(row("ks_marginal", x, "p_value", a.p_value, None));
        rows.push(row("ks_hitting", x, "D", b.statistic, None));
        rows.push(row("ks_hitting", x, "p_value", b.p_value, None));
    }
    art.write("studies.csv", &studies_csv(&rows)?)?;
    let ds: Vec<String> = rep.ks_marginal.iter().map(|k| format!("{:.4}", k.statistic)).collect();
    Ok((0, format!("consecutive KS distances {}; stabilizes: {}", ds.join(", "), rep.stabilizes())))
}

fn speed(cfg: &ExperimentConfig, art: &mut Artifacts) -> Step {
    let (model, rate) = (model_of(cfg)?, rate_of(cfg)?);
    let rep = speed_law(
        &model,
        &rate,
        cfg.get("x_proxy", 1e3)?,
        &cfg.get_list("t", &[1e-3, 3e-3, 1e-2])?,
        cfg.get("n", 2000usize)?,
        cfg.seed,
        sim_opts(cfg, 0.1)?,
    )?;
    let mut rows = vec![row("offset", rep.x_proxy, "time", rep.offset, None)];
    let mut parts = Vec::new();
    for p in &rep.points {
        rows.push(row("ratio", p.t, "median", p.ratio_median, None));
        rows.push(row("ratio", p.t, "q1", p.ratio_q1, None));
        rows.push(row("ratio", p.t, "q3", p.ratio_q3, None));
        rows.push(row("level", p.t, "median", p.level_median, None));
        parts.push(format!("t={}: {:.4}", p.t, p.ratio_median));
    }
    art.write("studies.csv", &studies_csv(&rows)?)?;
    Ok((0, format!("median φ(X_t)/(γt): {}", parts.join(", "))))
}

fn undershoot(cfg: &ExperimentConfig, art: &mut Artifacts) -> Step {
    let (model, rate) = (model_of(cfg)?, rate_of(cfg)?);
    let rep = undershoot_stationarity(
        &model,
        &rate,
        cfg.get("x_proxy", 30.0)?,
        &cfg.get_list("levels", &[10.0, 5.0, 0.0])?,
        cfg.get("n", 400usize)?,
        cfg.seed,
        sim_opts(cfg, 0.05)?,
    )?;
    let mut rows = Vec::new();
    for (b, u) in rep.levels.iter().zip(&rep.undershoots) {
        let (m, se) = stats::mean_se(u);
        rows.push(row("undershoot", *b, "mean", m, Some(se)));
    }
    for (i, j, ks) in &rep.pairwise {
        rows.push(row(format!("ks_pair_{i}_{j}"), rep.levels[*j], "D", ks.statistic, None));
        rows.push(row(format!("ks_pair_{i}_{j}"), rep.levels[*j], "p_value", ks.p_value, None));
    }
    for (b, ks) in rep.levels.iter().zip(&rep.vs_stationary) {
        rows.push(row("ks_stationary", *b, "D", ks.statistic, None));
        rows.push(row("ks_stationary", *b, "p_value", ks.p_value, None));
    }
    art.write("studies.csv", &studies_csv(&rows)?)?;
    Ok((0, format!("{} levels, all KS tests pass at 0.01: {}", rep.levels.len(), rep.all_pass)))
}

/// θ from the configuration, or the natural one for the verdict.
fn theta_of(cfg: &ExperimentConfig, model: &LevyModel, rate: &RateFunction, jump_in: bool) -> Result<f64> {
    if let Some(t) = cfg.get_opt::<f64>("theta")? {
        return Ok(t);
    }
    if !jump_in {
        return cramer_theta(model).root.ok_or_else(|| cfg.error("theta", "no Cramér root; give theta explicitly"));
    }
    match classify_boundary(model, rate).verdict {
        Verdict::RegularJumpIn { theta_set } => Ok(if theta_set.hi.is_finite() { 0.5 * theta_set.hi } else { 1.0 }),
        v => Err(cfg.error("theta", format!("verdict is {v}; give theta explicitly"))),
    }
}

fn mode_is_jump_in(cfg: &ExperimentConfig) -> Result<bool> {
    match cfg.get("mode", "continuous".to_string())?.as_str() {
        "continuous" => Ok(false),
        "jump-in" | "jump_in" => Ok(true),
        other => Err(cfg.error("mode", format!("`{other}` is neither `continuous` nor `jump-in`"))),
    }
}

fn excursions(cfg: &ExperimentConfig, art: &mut Artifacts) -> Step {
    let (model, rate) = (model_of(cfg)?, rate_of(cfg)?);
    let jump_in = mode_is_jump_in(cfg)?;
    let theta = theta_of(cfg, &model, &rate, jump_in)?;
    let opts = ExcursionOptions { dt: cfg.get("dt", 0.01)?, ..ExcursionOptions::default() };
    let n = cfg.get("n", 200usize)?;
    let ex: Vec<ExcursionSample> = if jump_in {
        sample_excursion_jump_in(&model, &rate, theta, cfg.get("window", 0.0)?, n, cfg.seed, opts)?
    } else if cfg.params.contains_key("levels") {
        let levels = cfg.get_list("levels", &[])?;
        sample_excursion_stratified(&model, &rate, theta, &levels, cfg.get("x_proxy", 15.0)?, n, cfg.seed, opts)?
    } else {
        sample_excursion_continuous(&model, &rate, theta, cfg.get("y", 0.0)?, cfg.get("x_proxy", 15.0)?, n, cfg.seed, opts)?
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PATHS_HEADER)?;
    for (i, e) in ex.iter().enumerate() {
        e.path.write_csv(&mut w, i as i64)?;
    }
    art.write("paths.csv", &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
    let life: Vec<f64> = ex.iter().map(|e| e.lifetime).collect();
    let mins: Vec<f64> = ex.iter().map(|e| e.min_level).collect();
    let (lm, lse) = stats::mean_se(&life);
    let (mm, mse) = stats::mean_se(&mins);
    let mut rows = vec![
        row("excursions", theta, "count", ex.len() as f64, None),
        row("lifetime", theta, "mean", lm, Some(lse)),
        row("min_level", theta, "mean", mm, Some(mse)),
    ];
    let mut summary = format!("{} excursions at θ = {theta}, mean lifetime {lm:.4}", ex.len());
    if cfg.params.contains_key("occupation") {
        let occ = cfg.get_list("occupation", &[])?;
        if occ.len() != 3 {
            return Err(cfg.error("occupation", "expected `a, M, bins`"));
        }
        let rep = occupation_check(&ex, &rate, theta, (occ[0], occ[1]), occ[2] as usize)?;
        for (k, edge) in rep.bin_edges.windows(2).enumerate() {
            let mid = 0.5 * (edge[0] + edge[1]);
            rows.push(row("occupation", mid, "observed", rep.observed[k], Some(rep.stderr[k])));
            rows.push(row("occupation", mid, "expected", rep.expected[k], None));
        }
        rows.push(row("occupation", f64::NAN, "chi_square", rep.chi_square, None));
        rows.push(row("occupation", f64::NAN, "p_value", rep.p_value, None));
        summary += &format!("; occupation χ² = {:.2} on {} dof, p = {:.3}", rep.chi_square, rep.dof, rep.p_value);
    }
    art.write("studies.csv", &studies_csv(&rows)?)?;
    Ok((0, summary))
}

fn glue(cfg: &ExperimentConfig, art: &mut Artifacts) -> Step {
    let (model, rate) = (model_of(cfg)?, rate_of(cfg)?);
    let jump_in = mode_is_jump_in(cfg)?;
    let theta = theta_of(cfg, &model, &rate, jump_in)?;
    let regime = if jump_in {
        Regime::JumpIn { window: cfg.get("window", 2.0)? }
    } else {
        Regime::Continuous { x_proxy: cfg.get("x_proxy", 15.0)? }
    };
    let opts = GlueOptions {
        excursion: ExcursionOptions { dt: cfg.get("dt", 0.01)?, ..ExcursionOptions::default() },
        start: cfg.get_opt("start")?,
        budget: cfg.get("budget", 0.05)?,
        ..GlueOptions::default()
    };
    let rep = glue_recurrent_extension(
        &model,
        &rate,
        theta,
        regime,
        cfg.get("a_threshold", 2.0)?,
        cfg.get("horizon", 100.0)?,
        cfg.get("n_real", 1usize)?,
        cfg.seed,
        opts,
    )?;
    for (r, g) in rep.realizations.iter().enumerate() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(PATHS_HEADER)?;
        g.write_csv(&mut w)?;
        art.write(&format!("glued_{r}.csv"), &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
    }
    let mut rows = vec![
        row("neglect", rep.a_threshold, "bound", rep.neglect_bound, None),
        row("neglect", rep.a_threshold, "fraction", rep.neglect_fraction, None),
        row("local_time", rep.a_threshold, "total", rep.total_local_time, None),
    ];
    for c in &rep.counts {
        rows.push(row("count", c.level, "excursions", c.count as f64, None));
        rows.push(row("count", c.level, "ratio", c.ratio, Some(c.stderr)));
    }
    art.write("studies.csv", &studies_csv(&rows)?)?;
    Ok((
        0,
        format!(
            "{} realizations, {} excursions, neglected fraction {:.3}%, count ratios pass: {}",
            rep.realizations.len(),
            rep.counts[0].count,
            100.0 * rep.neglect_fraction,
            rep.counts_pass()
        ),
    ))
}

fn cramer(cfg: &ExperimentConfig, art: &mut Artifacts) -> Step {
    let model = model_of(cfg)?;
    let theta = match cfg.get_opt::<f64>("theta")? {
        Some(t) => t,
        None => cramer_theta(&model).root.ok_or_else(|| cfg.error("theta", "no Cramér root"))?,
    };
    let rep = cramer_limit_check(
        &model,
        theta,
        cfg.get("y", 0.0)?,
        &cfg.get_list("x", &[2.0, 4.0, 6.0])?,
        cfg.get("n", 10_000usize)?,
        cfg.seed,
        cfg.get("dt", 0.5)?,
        cfg.get("max_steps", 1_000_000usize)?,
    )?;
    let mut rows = Vec::new();
    for r in &rep.rows {
        rows.push(row("hit_probability", r.x, "p_hat", r.p_hat, Some(r.stderr)));
        rows.push(row("scaled", r.x, "exp_theta_x_p_hat", r.scaled, Some(r.scaled_stderr)));
    }
    if let Some(l) = rep.limit {
        rows.push(row("limit", f64::NAN, "exp_theta_y_over_c", l, None));
    }
    art.write("studies.csv", &studies_csv(&rows)?)?;
    let parts: Vec<String> = rep.rows.iter().map(|r| format!("x={}: {:.4}±{:.4}", r.x, r.scaled, r.scaled_stderr)).collect();
    Ok((0, format!("e^(θx)·P_x(T_y<ζ): {}", parts.join(", "))))
}

fn selftest_cmd(cfg: &ExperimentConfig, art: &mut Artifacts) -> Step {
    let suite = cfg.get("suite", "quick".to_string())?;
    let seeds: Vec<u64> = match suite.as_str() {
        "quick" => vec![cfg.seed],
        "full" => (0..3).map(|k| rng::derive_seed(cfg.seed, k)).collect(),
        other => return Err(cfg.error("suite", format!("`{other}` is neither `quick` nor `full`"))),
    };
    let ids: Vec<u8> = match cfg.params.get("criteria") {
        None => selftest::CRITERIA.to_vec(),
        Some(_) => cfg
            .get_list("criteria", &[])?
            .into_iter()
            .map(|v| v as u8)
            .filter(|id| selftest::CRITERIA.contains(id))
            .collect(),
    };
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut failed = 0;
    for &seed in &seeds {
        for r in selftest::run_all(&ids, seed) {
            lines.push(r.to_string());
            failed += (!r.pass) as usize;
            rows.push(row(format!("criterion_{}", r.id), seed as f64, r.name, r.pass as u8 as f64, None));
        }
    }
    art.write("studies.csv", &studies_csv(&rows)?)?;
    lines.push(format!("{} of {} checks pass", rows.len() - failed, rows.len()));
    Ok((if failed == 0 { 0 } else { 1 }, lines.join("\n")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(command: Command, dir: &FsPath) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(command);
        c.out_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn classify_writes_report_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(Command::Classify, dir.path());
        c.model = Some("brownian:a=1,s2=4".into());
        c.rate = Some("exp(x)".into());
        let out = run(&c).unwrap();
        assert_eq!(out.exit_code, 0);
        assert!(out.summary.contains("RegularContinuous"));
        let manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["config_hash"].as_str().unwrap(), sha256_hex(c.canonical().as_bytes()));
        assert_eq!(manifest["artifacts"][0]["file"], "report.json");
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(Command::Speed, dir.path()).with_param("levels", "1");
        assert!(matches!(run(&c), Err(Error::Config { .. })));
    }

    #[test]
    fn studies_schema() {
        let bytes = studies_csv(&[row("k", 1.5, "mean", 2.0, Some(0.1)), row("k", f64::NAN, "p", 0.5, None)]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "key,x_or_t,statistic,value,stderr\nk,1.5,mean,2,0.1\nk,nan,p,0.5,\n");
    }
}
