//! Experiment dispatch, CSV/JSON writers and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use swarmorg::config::{ExperimentKind, OracleCheck, SimConfig};
use swarmorg::control1d::run_selforg_1d;
use swarmorg::density::estimate_density_2d;
use swarmorg::oracle::{run_check, OracleReport};
use swarmorg::swarm2d::run_selforg_2d;

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub rows: usize,
    pub contents: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdCheck {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub version: String,
    pub command: String,
    pub preset: Option<String>,
    pub seed: u64,
    pub config: SimConfig,
    /// Iterations actually executed, keyed by stage.
    pub iterations: BTreeMap<String, usize>,
    pub files: Vec<OutputFile>,
    /// Wall-clock seconds, keyed by phase.
    pub timings: BTreeMap<String, f64>,
    pub checks: Vec<ThresholdCheck>,
    pub passed: bool,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, preset: Option<String>, config: SimConfig) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA,
            version: env!("SWARMORG_VERSION").to_string(),
            command: command.to_string(),
            preset,
            seed: config.seed,
            config,
            iterations: BTreeMap::new(),
            files: Vec::new(),
            timings: BTreeMap::new(),
            checks: Vec::new(),
            passed: false,
            error: None,
        }
    }

    fn check(&mut self, name: &str, value: f64, limit: Option<f64>) {
        if let Some(limit) = limit {
            self.checks.push(ThresholdCheck {
                name: name.to_string(),
                value,
                limit,
                passed: value <= limit,
            });
        }
    }
}

struct Out<'a> {
    dir: &'a Path,
    files: Vec<OutputFile>,
}

impl<'a> Out<'a> {
    fn csv<R: Serialize>(&mut self, name: &str, contents: &'static str, rows: &[R]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.files.push(OutputFile {
            path: name.to_string(),
            rows: rows.len(),
            contents,
        });
        Ok(())
    }

    fn json<S: Serialize>(&mut self, name: &str, contents: &'static str, value: &S) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(value)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        self.files.push(OutputFile {
            path: name.to_string(),
            rows: 1,
            contents,
        });
        Ok(())
    }
}

#[derive(Serialize)]
struct DensityRow1D {
    iter: usize,
    agent: usize,
    x: f64,
    rho: f64,
    rho_star: f64,
}

#[derive(Serialize)]
struct BoundaryRow {
    stage: u8,
    iter: usize,
    k: usize,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct AgentRow {
    stage: u8,
    iter: usize,
    agent: usize,
    boundary: bool,
    x: f64,
    y: f64,
    pseudo_x: f64,
    pseudo_y: f64,
    rho: f64,
}

#[derive(Serialize)]
struct MapRow {
    x: f64,
    y: f64,
    psi1: f64,
    psi2: f64,
}

#[derive(Serialize)]
struct CheckRow<'a> {
    check: &'a str,
    passed: bool,
}

fn run_1d(cfg: &SimConfig, m: &mut RunManifest, out: &mut Out) -> Result<()> {
    let t = Instant::now();
    let run = run_selforg_1d::<f64>(cfg)?;
    m.timings
        .insert("simulate".into(), t.elapsed().as_secs_f64());
    m.iterations.insert("k".into(), cfg.iterations.k);
    m.iterations.insert("halved_steps".into(), run.halved_steps);

    let t = Instant::now();
    out.csv(
        "metrics_1d.csv",
        "iter, t, e_density, max_x_residual, length",
        &run.metrics,
    )?;
    let rows: Vec<DensityRow1D> = run
        .snapshots
        .iter()
        .flat_map(|s| {
            (0..s.positions.len()).map(move |i| DensityRow1D {
                iter: s.iter,
                agent: i,
                x: s.positions[i],
                rho: s.density[i],
                rho_star: s.target[i],
            })
        })
        .collect();
    out.csv(
        "density_1d.csv",
        "density snapshots: iter, agent, x, rho, rho_star",
        &rows,
    )?;
    m.timings.insert("write".into(), t.elapsed().as_secs_f64());

    let e0 = run.metrics.first().map(|r| r.e_density).unwrap_or(f64::NAN);
    let ek = run.metrics.last().map(|r| r.e_density).unwrap_or(f64::NAN);
    m.check("e_ratio_1d", ek / e0, cfg.thresholds.e_ratio_1d);
    Ok(())
}

fn run_2d(cfg: &SimConfig, m: &mut RunManifest, out: &mut Out) -> Result<()> {
    let t = Instant::now();
    let run = run_selforg_2d::<f64>(cfg)?;
    m.timings
        .insert("simulate".into(), t.elapsed().as_secs_f64());
    m.iterations.insert("k1".into(), cfg.iterations.k1);
    m.iterations.insert("k2".into(), run.pseudoloc_rounds);
    m.iterations.insert("k".into(), cfg.iterations.k);

    let t = Instant::now();
    out.csv(
        "stage1.csv",
        "iter, t, hausdorff, max_boundary_error, gradient_fallbacks, capped, contained",
        &run.stage1,
    )?;
    out.csv("stage2.csv", "round, residual", &run.stage2)?;
    out.csv(
        "stage3.csv",
        "iter, t, e_rho, energy, kinetic, gradient_fallbacks, contained",
        &run.stage3,
    )?;
    let order = &run.swarm.boundary_order;
    let mut boundary = Vec::new();
    let mut agents = Vec::new();
    for s in &run.snapshots {
        for (k, &id) in order.iter().enumerate() {
            boundary.push(BoundaryRow {
                stage: s.stage,
                iter: s.iter,
                k,
                x: s.positions[id].x,
                y: s.positions[id].y,
            });
        }
        let rho = estimate_density_2d(&s.positions, run.kernel_width)?;
        for i in 0..s.positions.len() {
            agents.push(AgentRow {
                stage: s.stage,
                iter: s.iter,
                agent: i,
                boundary: run.swarm.is_boundary(i),
                x: s.positions[i].x,
                y: s.positions[i].y,
                pseudo_x: s.pseudo[i].x,
                pseudo_y: s.pseudo[i].y,
                rho: rho.values[i],
            });
        }
    }
    out.csv(
        "boundary_2d.csv",
        "boundary polylines: stage, iter, k, x, y",
        &boundary,
    )?;
    out.csv(
        "agents_2d.csv",
        "agent snapshots: stage, iter, agent, boundary, x, y, pseudo_x, pseudo_y, rho",
        &agents,
    )?;
    let map = &run.target.map;
    let dom = &map.field.domain;
    let rows: Vec<MapRow> = (0..dom.len())
        .map(|k| {
            let p = dom.node_position(k);
            let v = map.field.values[k];
            MapRow {
                x: p.x,
                y: p.y,
                psi1: v.x,
                psi2: v.y,
            }
        })
        .collect();
    out.csv(
        "harmonic_map.csv",
        "grid harmonic map: x, y, psi1, psi2",
        &rows,
    )?;
    let summary = serde_json::json!({
        "radius": run.radius,
        "kernel_width": run.kernel_width,
        "spacing": run.spacing,
        "closure_residual": run.closure_residual,
        "pseudoloc_rounds": run.pseudoloc_rounds,
        "pseudoloc_converged": run.pseudoloc_converged,
        "pseudoloc_omega": run.pseudoloc_omega,
        "fallbacks": run.fallbacks,
        "e_true_start": run.e_true_start,
        "e_true_end": run.e_true_end,
    });
    out.json(
        "summary_2d.json",
        "graph widths, Stage-2 outcome, fallback counters",
        &summary,
    )?;
    m.timings.insert("write".into(), t.elapsed().as_secs_f64());

    if let Some(dh) = run.final_hausdorff() {
        m.check("hausdorff", dh, cfg.thresholds.hausdorff);
    }
    if let (Some(a), Some(b)) = (run.stage3.first(), run.stage3.last()) {
        m.check("e_ratio_2d", b.e_rho / a.e_rho, cfg.thresholds.e_ratio_2d);
    }
    Ok(())
}

fn run_oracle(
    cfg: &SimConfig,
    only: Option<OracleCheck>,
    m: &mut RunManifest,
    out: &mut Out,
) -> Result<()> {
    let checks = match only {
        Some(c) => vec![c],
        None => cfg.oracle.checks.clone(),
    };
    let mut reports: Vec<OracleReport> = Vec::new();
    for c in checks {
        let t = Instant::now();
        let rep = run_check(c, &cfg.oracle)?;
        m.timings
            .insert(c.name().to_string(), t.elapsed().as_secs_f64());
        out.json(&format!("oracle_{}.json", c.name()), "oracle report", &rep)?;
        m.checks.push(ThresholdCheck {
            name: c.name().to_string(),
            value: if rep.passed { 0.0 } else { 1.0 },
            limit: 0.0,
            passed: rep.passed,
        });
        reports.push(rep);
    }
    let rows: Vec<CheckRow> = reports
        .iter()
        .map(|r| CheckRow {
            check: &r.check,
            passed: r.passed,
        })
        .collect();
    out.csv("oracle.csv", "check, passed", &rows)?;
    Ok(())
}

/// What to run.
pub enum Job {
    OneD,
    TwoD,
    Oracle(Option<OracleCheck>),
}

impl Job {
    fn experiment(&self) -> ExperimentKind {
        match self {
            Job::OneD => ExperimentKind::SelfOrg1d,
            Job::TwoD => ExperimentKind::SelfOrg2d,
            Job::Oracle(_) => ExperimentKind::Oracle,
        }
    }
}

/// Runs `job` and writes its outputs plus `manifest.json` into `dir`. The
/// manifest is written even when the run fails; the returned manifest says
/// whether every configured threshold held.
pub fn run_experiment(
    job: Job,
    cfg: SimConfig,
    command: &str,
    preset: Option<String>,
    dir: &Path,
) -> Result<RunManifest> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut m = RunManifest::new(command, preset, cfg.clone());
    let mut out = Out {
        dir,
        files: Vec::new(),
    };
    let t = Instant::now();
    let result = if cfg.experiment != job.experiment() {
        Err(anyhow::anyhow!(
            "config is for experiment {:?}, but the command runs {:?}",
            cfg.experiment,
            job.experiment()
        ))
    } else {
        match job {
            Job::OneD => run_1d(&cfg, &mut m, &mut out),
            Job::TwoD => run_2d(&cfg, &mut m, &mut out),
            Job::Oracle(c) => run_oracle(&cfg, c, &mut m, &mut out),
        }
    };
    m.timings.insert("total".into(), t.elapsed().as_secs_f64());
    m.files = out.files;
    match result {
        Ok(()) => m.passed = m.checks.iter().all(|c| c.passed),
        Err(e) => m.error = Some(format!("{e:#}")),
    }
    let path: PathBuf = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(m)
}
