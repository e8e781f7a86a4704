//! Experiment configuration, scenario runners, artifact emission and reports.
//!
//! A run writes CSV tables, a JSON summary and `manifest.json` into the output directory. CSV
//! floats use Rust's shortest round-trip formatting, so equal configs give byte-identical tables.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::evolution::{self, Witness};
use crate::geometry::{check_damping_regularity, DampingProfile, SurfaceProfile, REGULARITY_CAP};
use crate::hfio::{coherent_state, egorov_check, fio_apply, HermiteBasisGrid};
use crate::quantize::{quasi_eigenvalue, FRule, K_MIN};
use crate::quasimode::{self, build_quasimode, level_gap, QuasimodeOptions};
use crate::resolvent::{self, CutoffModel, ScanBox, Variant};
use crate::spectral_oracle::{self, assemble_mode, qep_spectrum, QepOptions, Window};
use crate::wkb::coeff_c1;
use crate::{par_map, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_VALIDATION,
        Error::Io(_) | Error::Json(_) | Error::MissingArtifact(_) => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    QuasimodeSweep,
    OracleSweep,
    DecaySubexp,
    DecayOverdamped,
    ResolventScan,
    EgorovSuite,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Identity-type checks: Egorov residual, a priori identities, energy balance.
    pub numeric: f64,
    pub residual_slope: f64,
    pub detune_ratio: f64,
    pub oracle_rel: f64,
    pub rate_rel: f64,
    pub rate_spread: f64,
    pub refinement_rel: f64,
    pub nu_flat: [f64; 2],
    pub nu_barrier_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            numeric: 1e-8,
            residual_slope: 1.8,
            detune_ratio: 1e3,
            oracle_rel: 0.5,
            rate_rel: 0.2,
            rate_spread: 0.3,
            refinement_rel: 0.05,
            nu_flat: [0.8, 1.15],
            nu_barrier_min: 1.2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub delta: f64,
    pub ppw: usize,
    /// Per-mode horizon; `log^2 k` when absent.
    pub t_final: Option<f64>,
    pub envelope_t: [f64; 2],
    pub envelope_points: usize,
    /// Largest `log k` of the modal witnesses.
    pub witness_log_k_max: f64,
    pub overdamped_n: usize,
    pub overdamped_t: f64,
    pub overdamped_dt: f64,
    pub profiles: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            delta: 0.2,
            ppw: 20,
            t_final: None,
            envelope_t: [10.0, 1e4],
            envelope_points: 60,
            witness_log_k_max: 300.0,
            overdamped_n: 256,
            overdamped_t: 400.0,
            overdamped_dt: 0.05,
            profiles: 5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventConfig {
    pub ppw: f64,
    pub variants: Vec<Variant>,
    pub scan_box: ScanBox,
    pub cutoff: bool,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        Self { ppw: 30.0, variants: Variant::all().to_vec(), scan_box: ScanBox::default(), cutoff: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub k_list: Vec<i64>,
    pub h_list: Vec<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub eps: f64,
    pub oracle_ppw: usize,
    pub egorov_modes: usize,
    pub geometry: SurfaceProfile,
    pub damping: DampingProfile,
    pub tolerances: Tolerances,
    pub evolve: EvolveConfig,
    pub resolvent: ResolventConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::QuasimodeSweep,
            k_list: vec![50, 100, 200, 400],
            h_list: Vec::new(),
            seed: 7,
            out: None,
            eps: 0.3,
            oracle_ppw: spectral_oracle::DEFAULT_PPW,
            egorov_modes: 256,
            geometry: SurfaceProfile::default(),
            damping: DampingProfile::default(),
            tolerances: Tolerances::default(),
            evolve: EvolveConfig::default(),
            resolvent: ResolventConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The h-list the scenario runs over, defaulting per scenario.
    pub fn hs(&self) -> Vec<f64> {
        if !self.h_list.is_empty() {
            return self.h_list.clone();
        }
        match self.scenario {
            Scenario::EgorovSuite => vec![0.1, 0.05, 0.025],
            _ => self.k_list.iter().map(|&k| 1.0 / k as f64).collect(),
        }
    }

    pub fn ks(&self) -> Vec<u32> {
        self.k_list.iter().map(|&k| k as u32).collect()
    }

    /// Check every precondition the scenario relies on before anything runs.
    pub fn validate(&self) -> Result<()> {
        let uses_k = matches!(self.scenario, Scenario::QuasimodeSweep | Scenario::OracleSweep | Scenario::DecaySubexp);
        if uses_k {
            if self.k_list.is_empty() {
                return Err(invalid("k_list is empty"));
            }
            if let Some(k) = self.k_list.iter().find(|&&k| k < K_MIN as i64 || k > u32::MAX as i64) {
                return Err(invalid(format!("k = {k} outside [{K_MIN}, {}]", u32::MAX)));
            }
        }
        if let Some(h) = self.h_list.iter().find(|h| !(**h > 0.0 && **h < 1.0)) {
            return Err(invalid(format!("h = {h} outside (0, 1)")));
        }
        let g = &self.geometry;
        if !(g.z_g > 0.0 && g.blend > 0.0 && g.z_g + g.blend < 1.0) {
            return Err(invalid(format!("geometry needs z_g, blend > 0 with z_g + blend < 1 (got {}, {})", g.z_g, g.blend)));
        }
        if !(self.eps > 0.0 && self.eps <= g.z_g) {
            return Err(invalid(format!("eps = {} must lie in (0, z_g]", self.eps)));
        }
        let grid = self.damping.regularity_grid(2048);
        let report = check_damping_regularity(&self.damping, &grid, REGULARITY_CAP);
        if !report.pass {
            return Err(invalid(format!("damping fails the regularity check (C = {:.3e}, {:.3e}, {:.3e})", report.c0, report.c1, report.c2)));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("numeric", t.numeric),
            ("residual_slope", t.residual_slope),
            ("detune_ratio", t.detune_ratio),
            ("oracle_rel", t.oracle_rel),
            ("rate_rel", t.rate_rel),
            ("rate_spread", t.rate_spread),
            ("refinement_rel", t.refinement_rel),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("tolerance {name} = {v} must be positive")));
            }
        }
        if self.oracle_ppw < spectral_oracle::MIN_PPW {
            return Err(invalid(format!("oracle_ppw {} below {}", self.oracle_ppw, spectral_oracle::MIN_PPW)));
        }
        let e = &self.evolve;
        if e.ppw < spectral_oracle::MIN_PPW || !(e.delta >= 0.0) || e.overdamped_n < 16 || !(e.overdamped_dt > 0.0) {
            return Err(invalid("evolve section: need ppw >= 20, delta >= 0, overdamped_n >= 16, dt > 0"));
        }
        if !(e.envelope_t[0] > 0.0 && e.envelope_t[1] > e.envelope_t[0]) || e.envelope_points < 2 {
            return Err(invalid("evolve.envelope_t must be an increasing positive pair"));
        }
        if self.resolvent.ppw < resolvent::MIN_PPW {
            return Err(invalid(format!("resolvent.ppw {} below {}", self.resolvent.ppw, resolvent::MIN_PPW)));
        }
        if self.scenario == Scenario::EgorovSuite && self.egorov_modes < 2 {
            return Err(invalid("egorov_modes must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, value: f64, threshold: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), value, threshold: threshold.into(), pass }
    }
}

/// Columnar table written as CSV.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(path)
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::MissingArtifact(format!("{other:?}")),
    }
}

/// Shortest round-trip decimal.
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

macro_rules! row {
    ($($e:expr),* $(,)?) => { vec![$(fmt($e as f64)),*] };
}

#[derive(Clone, Debug, Default)]
pub struct ScenarioOutput {
    pub tables: Vec<Table>,
    pub summary: Value,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub package_version: String,
    pub scenario: Scenario,
    pub config: ExperimentConfig,
    pub seconds: f64,
    pub artifacts: Vec<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    match cfg.scenario {
        Scenario::QuasimodeSweep => quasimode_sweep(cfg),
        Scenario::OracleSweep => oracle_sweep(cfg),
        Scenario::DecaySubexp => decay_subexp(cfg),
        Scenario::DecayOverdamped => decay_overdamped(cfg),
        Scenario::ResolventScan => resolvent_scan(cfg),
        Scenario::EgorovSuite => egorov_suite(cfg),
    }
}

/// Validate, run, and write all artifacts plus the manifest into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let t0 = Instant::now();
    let output = run_scenario(cfg)?;
    let mut artifacts = Vec::new();
    for t in &output.tables {
        t.write(out)?;
        artifacts.push(format!("{}.csv", t.name));
    }
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&output.summary)?)?;
    artifacts.push("summary.json".into());
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        package_version: env!("CARGO_PKG_VERSION").into(),
        scenario: cfg.scenario,
        config: cfg.clone(),
        seconds: t0.elapsed().as_secs_f64(),
        artifacts,
        pass: output.checks.iter().all(|c| c.pass),
        checks: output.checks,
    };
    fs::write(out.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn quasimode_sweep(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let tol = &cfg.tolerances;
    let opts = QuasimodeOptions { eps: cfg.eps, ..QuasimodeOptions::default() };
    let (a, p) = (&cfg.damping, &cfg.geometry);
    let rows = par_map(&cfg.ks(), |&k| -> Result<_> {
        let qm = build_quasimode(k, a, p, &opts)?;
        let gap = level_gap(p, qm.e, qm.h)?;
        let mu_off = C64::new(1.0 + qm.e + 10.0 * gap, qm.f).sqrt();
        let detuned = quasimode::residual(&qm.u, qm.h, mu_off, a, p)?;
        let q = quasi_eigenvalue(k, p, a, cfg.eps, FRule::Balanced)?;
        let c1 = coeff_c1(p, a, q.e)?;
        Ok((qm, detuned, q.scaled_im(), c1))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(
        "quasimode",
        &["k", "h", "log_h", "residual", "log_residual", "re_tau", "im_tau", "detuned_residual", "mismatch", "scaled_im", "c1"],
    );
    for (q, d, s, c1) in &rows {
        let tau = q.tau();
        t.push(row![q.k, q.h, q.h.ln(), q.residual_l2, q.residual_l2.ln(), tau.re, tau.im, *d, q.mismatch_value, *s, *c1]);
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.0.h).collect();
    let rs: Vec<f64> = rows.iter().map(|r| r.0.residual_l2).collect();
    let slope = quasimode::loglog_slope(&hs, &rs);
    let worst_ratio = rows
        .iter()
        .filter(|r| r.0.k >= 100)
        .map(|r| r.1 / r.0.residual_l2)
        .fold(f64::INFINITY, f64::min);
    let band = rows.iter().all(|(_, _, s, c1)| *s >= c1 / 4.0 && *s <= 4.0 * c1);
    let checks = vec![
        Check::new("residual_slope", slope, format!(">= {}", tol.residual_slope), slope >= tol.residual_slope),
        Check::new("detuned_ratio_k_ge_100", worst_ratio, format!(">= {}", tol.detune_ratio), worst_ratio >= tol.detune_ratio),
        Check::new("scaled_im_in_band", band as u8 as f64, "[c1/4, 4 c1]", band),
    ];
    let summary = json!({ "slope": slope, "quasimodes": rows.iter().map(|r| &r.0).collect::<Vec<_>>() });
    Ok(ScenarioOutput { tables: vec![t], summary, checks })
}

fn oracle_sweep(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let tol = &cfg.tolerances;
    let (a, p) = (&cfg.damping, &cfg.geometry);
    let mut spec_t = Table::new("spectrum", &["k", "re_tau", "im_tau", "residual", "converged"]);
    let mut match_t = Table::new("oracle_match", &["k", "pred_re", "pred_im", "oracle_re", "oracle_im", "im_rel_error"]);
    let mut in_band = true;
    let mut worst_rel = 0.0f64;
    let mut summary = Vec::new();
    for k in cfg.ks() {
        let n = spectral_oracle::grid_size(k, cfg.oracle_ppw);
        let op = assemble_mode(k, p, a, n)?;
        let spec = qep_spectrum(&op, &Window::around(k), &QepOptions { seed: cfg.seed, ..QepOptions::default() })?;
        for e in &spec {
            spec_t.push(row![k, e.tau.re, e.tau.im, e.residual, e.converged as u8]);
            in_band &= e.tau.im >= -1e-8 && e.tau.im <= op.a_sup / 2.0 + 1e-8;
        }
        let q = quasi_eigenvalue(k, p, a, cfg.eps, FRule::Balanced)?;
        let taus: Vec<C64> = spec.iter().map(|e| e.tau).collect();
        let m = spectral_oracle::match_quasimode(q.tau, q.h, &taus)?;
        let rel = (m.nearest.im - q.tau.im).abs() / q.tau.im;
        worst_rel = worst_rel.max(rel);
        match_t.push(row![k, q.tau.re, q.tau.im, m.nearest.re, m.nearest.im, rel]);
        summary.push(json!({ "k": k, "n": n, "eigenvalues": spec.len(), "match": m }));
    }
    let checks = vec![
        Check::new("im_band_all", in_band as u8 as f64, "[0, sup a / 2]", in_band),
        Check::new("oracle_im_rel_error", worst_rel, format!("<= {}", tol.oracle_rel), worst_rel <= tol.oracle_rel),
    ];
    Ok(ScenarioOutput { tables: vec![spec_t, match_t], summary: Value::Array(summary), checks })
}

fn decay_subexp(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let tol = &cfg.tolerances;
    let ev = &cfg.evolve;
    let (a, p) = (&cfg.damping, &cfg.geometry);
    let runs = par_map(&cfg.ks(), |&k| evolution::quasimode_run(k, a, p, ev.delta, ev.ppw, ev.t_final));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut tables = Vec::new();
    let mut modes = Table::new("mode_rates", &["k", "re_tau", "im_tau", "fitted_im", "rate_log_k", "data_norm", "duhamel_ratio", "balance_defect"]);
    let mut worst_rate = 0.0f64;
    let mut worst_balance = 0.0f64;
    let mut scaled = Vec::new();
    for r in &runs {
        let mut t = Table::new(&format!("energy_k{}", r.k), &["t", "energy"]);
        for (s, e) in r.record.t.iter().zip(&r.record.energy) {
            t.push(row![*s, *e]);
        }
        tables.push(t);
        let lk = (r.k as f64).ln();
        scaled.push(r.fit.param * lk);
        worst_rate = worst_rate.max((r.fit.param - r.tau.im).abs() / r.tau.im);
        worst_balance = worst_balance.max(r.record.balance_defect / r.record.e0());
        modes.push(row![r.k, r.tau.re, r.tau.im, r.fit.param, r.fit.param * lk, r.data_norm, r.duhamel_ratio, r.record.balance_defect]);
    }
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let spread = (scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - scaled.iter().cloned().fold(f64::INFINITY, f64::min)) / mean;
    let mut witnesses: Vec<Witness> = runs.iter().map(|r| r.witness()).collect();
    let l_min = cfg.ks().iter().map(|&k| (k as f64).ln()).fold(0.0, f64::max);
    if ev.witness_log_k_max > l_min {
        witnesses.extend(evolution::asymptotic_witnesses(p, a, cfg.eps, ev.delta, l_min, ev.witness_log_k_max, 60)?);
    }
    let ts = evolution::log_times(ev.envelope_t[0], ev.envelope_t[1], ev.envelope_points);
    let logf = evolution::envelope(&witnesses, &ts);
    let fit = evolution::fit_envelope(&ts, &logf);
    let mut env = Table::new("envelope", &["t", "sqrt_t", "log_envelope"]);
    for (t, l) in ts.iter().zip(&logf) {
        env.push(row![*t, t.sqrt(), *l]);
    }
    tables.push(modes);
    tables.push(env);
    let checks = vec![
        Check::new("fitted_rate_vs_im_tau", worst_rate, format!("<= {}", tol.rate_rel), worst_rate <= tol.rate_rel),
        Check::new("rate_log_k_spread", spread, format!("<= {}", tol.rate_spread), spread <= tol.rate_spread),
        Check::new("envelope_c", fit.c, "finite, > 0", fit.c.is_finite() && fit.c > 0.0),
        Check::new("energy_balance", worst_balance, format!("<= {}", tol.numeric), worst_balance <= tol.numeric),
    ];
    let summary = json!({ "envelope": fit, "runs": runs.iter().map(|r| json!({"k": r.k, "tau": r.tau, "fit": r.fit, "duhamel_ratio": r.duhamel_ratio})).collect::<Vec<_>>() });
    Ok(ScenarioOutput { tables, summary, checks })
}

fn decay_overdamped(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let tol = &cfg.tolerances;
    let ev = &cfg.evolve;
    let profiles = evolution::random_admissible_bumps(ev.profiles, cfg.seed);
    let results = par_map(&profiles, |a| -> Result<_> {
        let c = evolution::overdamped_rate(a, ev.overdamped_n, ev.overdamped_t, ev.overdamped_dt, cfg.seed)?;
        let f = evolution::overdamped_rate(a, 2 * ev.overdamped_n, ev.overdamped_t, ev.overdamped_dt, cfg.seed)?;
        Ok((c, f))
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut t = Table::new("overdamped", &["profile", "n", "c_coarse", "c_fine", "refinement_rel", "balance_defect", "max_increase"]);
    let (mut worst_ref, mut worst_bal, mut worst_inc, mut min_rate) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for (i, (c, f)) in results.iter().enumerate() {
        let rel = (c.fit.param - f.fit.param).abs() / f.fit.param;
        let bal = c.record.balance_defect.max(f.record.balance_defect) / f.record.e0();
        let inc = c.record.max_increase.max(f.record.max_increase) / f.record.e0();
        worst_ref = worst_ref.max(rel);
        worst_bal = worst_bal.max(bal);
        worst_inc = worst_inc.max(inc);
        min_rate = min_rate.min(1.0 / f.fit.param);
        t.push(row![i, c.n, c.fit.param, f.fit.param, rel, bal, inc]);
    }
    let checks = vec![
        Check::new("refinement_rel", worst_ref, format!("<= {}", tol.refinement_rel), worst_ref <= tol.refinement_rel),
        Check::new("min_rate", min_rate, "> 0", min_rate > 0.0),
        Check::new("dissipation_identity", worst_bal, format!("<= {}", tol.numeric), worst_bal <= tol.numeric),
        Check::new("energy_increase", worst_inc, "<= 1e-10", worst_inc <= 1e-10),
    ];
    let summary = json!({ "profiles": profiles, "fits": results.iter().map(|(c, f)| json!([c.fit, f.fit])).collect::<Vec<_>>() });
    Ok(ScenarioOutput { tables: vec![t], summary, checks })
}

fn resolvent_scan(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let tol = &cfg.tolerances;
    let rc = &cfg.resolvent;
    let hs = cfg.hs();
    let mut pts = Table::new("resolvent", &["variant", "re_z", "im_z", "h", "s_min"]);
    let mut exps = Table::new("exponents", &["variant", "nu", "ci95", "nu_log_corrected"]);
    let mut checks = Vec::new();
    let mut summary = serde_json::Map::new();
    for &v in &rc.variants {
        let scan = resolvent::scan_inverse_norm(v, &cfg.damping, &cfg.geometry, &hs, &rc.scan_box, rc.ppw, cfg.seed)?;
        for p in &scan.points {
            let mut r = vec![v.name().to_string()];
            r.extend(row![p.re, p.im, p.h, p.s_min]);
            pts.push(r);
        }
        let mut r = vec![v.name().to_string()];
        r.extend(row![scan.fit.nu, scan.fit.ci95, scan.fit.nu_log_corrected]);
        exps.push(r);
        let nu = scan.fit.nu;
        match v {
            Variant::ViscousFlat => checks.push(Check::new(
                "nu_viscous_flat",
                nu,
                format!("in [{}, {}]", tol.nu_flat[0], tol.nu_flat[1]),
                nu >= tol.nu_flat[0] && nu <= tol.nu_flat[1],
            )),
            Variant::ViscousBarrier => {
                checks.push(Check::new("nu_viscous_barrier", nu, format!(">= {}", tol.nu_barrier_min), nu >= tol.nu_barrier_min))
            }
            Variant::MultiplicativeBarrier => {}
        }
        checks.push(Check::new(&format!("apriori_{}", v.name()), scan.apriori_residual, format!("<= {}", tol.numeric), scan.apriori_residual <= tol.numeric));
        checks.push(Check::new(&format!("smoothness_{}", v.name()), scan.smoothness_factor, "<= 10", scan.smoothness_factor <= 10.0));
        summary.insert(v.name().into(), json!({ "fit": scan.fit, "s_line": scan.s_line, "h": scan.h_list }));
    }
    let mut tables = vec![pts, exps];
    if rc.cutoff {
        let mut ct = Table::new("cutoff", &["barrier", "h", "norm"]);
        for barrier in [false, true] {
            let model = CutoffModel { barrier, ..CutoffModel::default() };
            let c = resolvent::cutoff_resolvent_estimate(&model, &hs, cfg.seed)?;
            for (h, n) in c.h_list.iter().zip(&c.norms) {
                ct.push(row![barrier as u8, *h, *n]);
            }
            summary.insert(format!("cutoff_barrier_{barrier}"), json!(c.fit));
        }
        tables.push(ct);
    }
    Ok(ScenarioOutput { tables, summary: Value::Object(summary), checks })
}

/// Egorov residual, unitarity and group-law defects for coherent states at each `h`.
pub fn egorov_row(h: f64, n_modes: usize) -> Result<[f64; 3]> {
    let basis = HermiteBasisGrid::new(n_modes, h)?;
    let f = basis.sample(coherent_state(0.3, -0.2, h));
    let egorov = egorov_check(&f, &basis)?;
    let n0 = basis.norm(&f);
    let g = fio_apply(0.7, &f, &basis)?;
    let unitarity = (basis.norm(&g) - n0).abs() / n0;
    let gg = fio_apply(0.4, &g, &basis)?;
    let direct = fio_apply(1.1, &f, &basis)?;
    let diff: Vec<C64> = gg.iter().zip(&direct).map(|(a, b)| a - b).collect();
    Ok([egorov, unitarity, basis.norm(&diff) / n0])
}

fn egorov_suite(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let tol = cfg.tolerances.numeric;
    let hs = cfg.hs();
    let rows = par_map(&hs, |&h| egorov_row(h, cfg.egorov_modes)).into_iter().collect::<Result<Vec<_>>>()?;
    let mut t = Table::new("egorov", &["h", "egorov_residual", "unitarity", "group_law"]);
    for (h, r) in hs.iter().zip(&rows) {
        t.push(row![*h, r[0], r[1], r[2]]);
    }
    let worst = |i: usize| rows.iter().map(|r| r[i]).fold(0.0, f64::max);
    let checks = vec![
        Check::new("egorov_residual", worst(0), format!("<= {tol}"), worst(0) <= tol),
        Check::new("unitarity", worst(1), format!("<= {tol}"), worst(1) <= tol),
        Check::new("group_law", worst(2), format!("<= {tol}"), worst(2) <= tol),
    ];
    Ok(ScenarioOutput { tables: vec![t], summary: json!({ "h": hs, "rows": rows }), checks })
}

fn read_table(dir: &Path, name: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let path = dir.join(format!("{name}.csv"));
    if !path.exists() {
        return Err(Error::MissingArtifact(path.display().to_string()));
    }
    let mut r = csv::Reader::from_path(&path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.map(|x| x.iter().map(String::from).collect())).collect::<std::result::Result<Vec<Vec<String>>, _>>().map_err(csv_err)?;
    Ok((header, rows))
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Result<Vec<f64>> {
    let j = header.iter().position(|h| h == name).ok_or_else(|| Error::MissingArtifact(format!("column {name}")))?;
    rows.iter().map(|r| r[j].parse::<f64>().map_err(|e| Error::MissingArtifact(format!("{name}: {e}")))).collect()
}

/// Summary text and plot-ready tables derived from the artifacts of a finished run.
pub fn report(dir: &Path) -> Result<String> {
    let mpath = dir.join(MANIFEST);
    if !mpath.exists() {
        return Err(Error::MissingArtifact(mpath.display().to_string()));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&mpath)?)?;
    let mut text = format!("scenario {:?}  schema {}  {:.1}s\n", manifest.scenario, manifest.schema_version, manifest.seconds);
    match manifest.scenario {
        Scenario::QuasimodeSweep => {
            let (h, r) = read_table(dir, "quasimode")?;
            let mut t = Table::new("plot_residual", &["log_h", "log_residual"]);
            let (x, y) = (column(&h, &r, "log_h")?, column(&h, &r, "log_residual")?);
            for (a, b) in x.iter().zip(&y) {
                t.push(row![*a, *b]);
            }
            t.write(dir)?;
            let (_, slope, _) = evolution::linear_fit(&x, &y);
            text += &format!("residual slope {slope:.3}\n");
        }
        Scenario::DecaySubexp => {
            let (h, r) = read_table(dir, "envelope")?;
            let (t, st, lf) = (column(&h, &r, "t")?, column(&h, &r, "sqrt_t")?, column(&h, &r, "log_envelope")?);
            let mut p = Table::new("plot_envelope", &["sqrt_t", "log_envelope"]);
            for (a, b) in st.iter().zip(&lf) {
                p.push(row![*a, *b]);
            }
            p.write(dir)?;
            let fit = evolution::fit_envelope(&t, &lf);
            text += &format!("c_delta {:.4}  rms(sqrt t) {:.3e}  rms(t) {:.3e}\n", fit.c, fit.rms_sqrt, fit.rms_exp);
            let (h, r) = read_table(dir, "mode_rates")?;
            for (k, rate) in column(&h, &r, "k")?.iter().zip(column(&h, &r, "rate_log_k")?) {
                text += &format!("k {k:>6}  Im tau log k {rate:.4}\n");
            }
        }
        Scenario::ResolventScan => {
            let (h, r) = read_table(dir, "exponents")?;
            let (nu, ci) = (column(&h, &r, "nu")?, column(&h, &r, "ci95")?);
            for (i, row) in r.iter().enumerate() {
                text += &format!("{:<24} nu {:.3} +/- {:.3}\n", row[0], nu[i], ci[i]);
            }
            let (h, r) = read_table(dir, "resolvent")?;
            let (hh, s) = (column(&h, &r, "h")?, column(&h, &r, "s_min")?);
            let mut p = Table::new("plot_resolvent", &["variant", "log_inv_h", "log_inv_s_min"]);
            for (i, row) in r.iter().enumerate() {
                let mut v = vec![row[0].clone()];
                v.extend(row![(1.0 / hh[i]).ln(), (1.0 / s[i]).ln()]);
                p.push(v);
            }
            p.write(dir)?;
        }
        Scenario::DecayOverdamped => {
            let (h, r) = read_table(dir, "overdamped")?;
            for (i, c) in column(&h, &r, "c_fine")?.iter().enumerate() {
                text += &format!("profile {i}  C {c:.4}\n");
            }
        }
        Scenario::OracleSweep => {
            let (h, r) = read_table(dir, "oracle_match")?;
            let (k, e) = (column(&h, &r, "k")?, column(&h, &r, "im_rel_error")?);
            for (a, b) in k.iter().zip(&e) {
                text += &format!("k {a:>6}  Im relative error {b:.3}\n");
            }
        }
        Scenario::EgorovSuite => {
            let (h, r) = read_table(dir, "egorov")?;
            let (hh, e) = (column(&h, &r, "h")?, column(&h, &r, "egorov_residual")?);
            for (a, b) in hh.iter().zip(&e) {
                text += &format!("h {a:<8} residual {b:.3e}\n");
            }
        }
    }
    for c in &manifest.checks {
        text += &format!("{:<5} {:<28} {:<14.6e} {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    fs::write(dir.join("summary.txt"), &text)?;
    Ok(text)
}
