use anyhow::Context;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use pwolff_core::kmiter::{self, check_trace, CorollaryComponents, TheoremReport, TraceCheck};
use pwolff_core::measure::{Sign, SpaceTimeKind, SpaceTimeMeasure, SpatialMeasure};
use pwolff_core::pde::{solve, weak_residual, GridSolution, SolveManifest, SolverConfig};
use pwolff_core::potential::{parabolic_potential, wolff_potential, write_potential_csv, PotentialSummary};

use crate::config::{DataSpec, RunConfig, SolutionSpec};
use crate::output::Artifacts;
use crate::suites::{self, random_bump, SuiteReport};
use crate::Failure;

/// The spatial factor of a time-independent measure, if it is one.
fn spatial_part(m: &SpaceTimeMeasure) -> Option<SpatialMeasure> {
    match m.kind() {
        SpaceTimeKind::TimeProduct(s) => Some(s.clone()),
        SpaceTimeKind::Sum(parts) => {
            let parts: Option<Vec<_>> = parts.iter().map(spatial_part).collect();
            SpatialMeasure::sum(m.dim(), parts?).ok()
        }
        _ if m.is_zero() => Some(SpatialMeasure::zero(m.dim())),
        _ => None,
    }
}

#[derive(Serialize)]
struct PotentialRow {
    #[serde(flatten)]
    summary: PotentialSummary,
    wolff: Option<f64>,
}

pub fn potential(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let params = cfg.params().map_err(Failure::Input)?;
    let mu = cfg.measure(params.n).map_err(Failure::Input)?;
    let pc = cfg.potential.as_ref().context("missing [potential] section").map_err(Failure::Input)?;
    if let Some(q) = pc.points.iter().find(|q| q.x.len() != params.n) {
        return Err(Failure::Input(anyhow::anyhow!("query point {:?} is not in dimension {}", q.x, params.n)));
    }
    let abs = mu.abs();
    let spatial = pc.wolff_beta.and_then(|b| spatial_part(&abs).map(|s| (b, s)));
    let rows = pc
        .points
        .par_iter()
        .map(|q| -> anyhow::Result<_> {
            let r = parabolic_potential(&params, &abs, &q.x, q.t, pc.rho)?;
            let w = match &spatial {
                Some((beta, nu)) => Some(wolff_potential(&params, nu, &q.x, pc.rho, *beta)?.value),
                None => None,
            };
            Ok((q.x.clone(), q.t, pc.rho, r, w))
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(Failure::classify)?;

    let mut art = Artifacts::default();
    let table: Vec<_> = rows.iter().map(|(x, t, rho, r, _)| (x.clone(), *t, *rho, r.clone())).collect();
    let mut buf = Vec::new();
    write_potential_csv(&mut buf, &table).map_err(|e| Failure::Runtime(e.into()))?;
    art.add("potential.csv", buf);

    let summary: Vec<PotentialRow> = rows
        .iter()
        .map(|(x, t, rho, r, w)| PotentialRow { summary: PotentialSummary::new(x, *t, *rho, r), wolff: *w })
        .collect();
    art.add_json("potential_summary.json", &summary).map_err(Failure::Runtime)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=params.n).map(|k| format!("x{k}")).collect();
    header.extend(["t0", "rho", "P_p", "W_p", "truncated_at", "tail_estimate"].map(String::from));
    w.write_record(&header).map_err(|e| Failure::Runtime(e.into()))?;
    for row in &summary {
        let s = &row.summary;
        let mut rec: Vec<String> = s.x0.iter().map(|v| format!("{v:e}")).collect();
        rec.push(format!("{:e}", s.t0));
        rec.push(format!("{:e}", s.rho));
        rec.push(format!("{:e}", s.value));
        rec.push(row.wolff.map(|v| format!("{v:e}")).unwrap_or_default());
        rec.push(s.truncated_at.to_string());
        rec.push(format!("{:e}", s.tail_estimate));
        w.write_record(&rec).map_err(|e| Failure::Runtime(e.into()))?;
    }
    art.add("potential_summary.csv", w.into_inner().map_err(|e| Failure::Runtime(anyhow::anyhow!("{e}")))?);
    Ok(art)
}

#[derive(Serialize)]
struct ResidualRow {
    center: f64,
    t_center: f64,
    radius: f64,
    t_radius: f64,
    residual: f64,
    truncation_estimate: f64,
}

pub fn solve_cmd(cfg: &RunConfig, seed: u64) -> Result<Artifacts, Failure> {
    let sc = cfg.solve.as_ref().context("missing [solve] section").map_err(Failure::Input)?;
    let p = match (sc.p, &cfg.params) {
        (Some(p), _) => p,
        (None, Some(params)) => params.p,
        (None, None) => return Err(Failure::Input(anyhow::anyhow!("[solve] needs `p` or a [params] section"))),
    };
    let dim = sc.geometry.dim();
    let mu = cfg.measure(dim).map_err(Failure::Input)?;
    let mut solver = SolverConfig::new(p, sc.geometry, sc.cells, sc.t0, sc.k, sc.steps);
    solver.eps = sc.eps;
    solver.boundary = sc.boundary;
    if let Some(v) = sc.picard_tol {
        solver.picard_tol = v;
    }
    if let Some(v) = sc.picard_max {
        solver.picard_max = v;
    }
    let boundary = sc.boundary_data.clone().unwrap_or_else(|| match &sc.initial {
        DataSpec::Exact { .. } => sc.initial.clone(),
        _ => DataSpec::Zero,
    });
    let initial = |c: f64| sc.initial.eval(c, sc.t0);
    let bdata = |c: f64, t: f64| boundary.eval(c, t);
    let u = solve(&solver, &initial, &bdata, &mu).map_err(|e| Failure::classify(e.into()))?;

    let mut art = Artifacts::default();
    let every = sc.snapshot_every.unwrap_or(sc.steps.max(1)).max(1);
    let mut levels: Vec<usize> = (0..u.levels).step_by(every).collect();
    if levels.last() != Some(&(u.levels - 1)) {
        levels.push(u.levels - 1);
    }
    let mut buf = Vec::new();
    u.write_snapshots(&mut buf, &levels).map_err(|e| Failure::Runtime(e.into()))?;
    art.add("snapshots.csv", buf);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residuals = Vec::new();
    for _ in 0..sc.residual_bumps {
        let b = random_bump(&mut rng, &u.geometry, u.t0, u.t_end());
        let r = weak_residual(&u, &mu, &b).map_err(|e| Failure::classify(e.into()))?;
        residuals.push(ResidualRow {
            center: b.center,
            t_center: b.t_center,
            radius: b.radius,
            t_radius: b.t_radius,
            residual: r.residual,
            truncation_estimate: r.truncation_estimate,
        });
    }
    if !residuals.is_empty() {
        art.add_json("residuals.json", &residuals).map_err(Failure::Runtime)?;
    }
    let manifest = SolveManifest::new(&u, residuals.iter().map(|r| r.residual.abs()).collect());
    art.add_json("manifest.json", &manifest).map_err(Failure::Runtime)?;
    art.add("solution.json", serde_json::to_vec(&u).map_err(|e| Failure::Runtime(e.into()))?);

    if let Some(refine) = &sc.refinement {
        let exact = sc
            .initial
            .exact()
            .context("a refinement study needs exact initial data")
            .map_err(Failure::Input)?;
        let grids: Vec<(usize, usize)> = (0..refine.levels)
            .map(|l| (sc.cells << l, sc.steps * refine.time_factor.pow(l as u32)))
            .collect();
        let t_end = sc.t0 + sc.k * sc.steps as f64;
        let study = suites::refinement_study(exact, sc.geometry, sc.boundary, sc.t0, t_end, &grids)
            .map_err(Failure::classify)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Failure::Runtime(e.into());
        w.write_record(["level", "cells", "steps", "err_max", "mass_drift", "unconverged_steps"]).map_err(io)?;
        for (i, l) in study.iter().enumerate() {
            w.write_record([
                i.to_string(),
                l.cells.to_string(),
                l.steps.to_string(),
                format!("{:e}", l.err_max),
                format!("{:e}", l.mass_drift),
                l.unconverged.to_string(),
            ])
            .map_err(io)?;
        }
        art.add("refinement.csv", w.into_inner().map_err(|e| Failure::Runtime(anyhow::anyhow!("{e}")))?);
    }
    Ok(art)
}

#[derive(Serialize)]
struct KmSummary {
    l_inf: f64,
    tail: f64,
    converged: bool,
    hit_j_max: bool,
    steps: usize,
    delta_rho_theta: f64,
    corollary: CorollaryComponents,
    trace_check: TraceCheck,
    u_plus: Option<f64>,
    theorem: Option<TheoremReport>,
}

pub fn km(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let params = cfg.params().map_err(Failure::Input)?;
    let kc = cfg.km.as_ref().context("missing [km] section").map_err(Failure::Input)?;
    let u = match &kc.solution {
        SolutionSpec::File { path } => {
            let path = cfg.base.join(path);
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading solution {}", path.display()))
                .map_err(Failure::Input)?;
            serde_json::from_str::<GridSolution>(&text)
                .with_context(|| format!("parsing solution {}", path.display()))
                .map_err(Failure::Input)?
        }
        SolutionSpec::Exact { solution, geometry, cells, t0, k, steps } => {
            if solution.p() != params.p || solution.dim() != params.n {
                return Err(Failure::Input(anyhow::anyhow!(
                    "exact solution has p = {}, N = {}; [params] has p = {}, N = {}",
                    solution.p(),
                    solution.dim(),
                    params.p,
                    params.n
                )));
            }
            GridSolution::from_fn(*geometry, params.p, *cells, *t0, *k, *steps, |c, t| solution.eval(c.abs(), t))
                .map_err(|e| Failure::Input(e.into()))?
        }
    };
    let mu = cfg.measure(u.dim()).map_err(Failure::Input)?;
    let theta = kc.theta(params.p).map_err(Failure::Input)?;
    let r = kmiter::run(&u, &mu.plus, &params, &kc.settings, &kc.y, kc.s, kc.rho, theta)
        .map_err(|e| Failure::classify(e.into()))?;
    let theorem = if kc.theorem {
        Some(
            kmiter::theorem_check(&u, &mu, &kc.y, kc.s, kc.rho, theta, &params, Sign::Plus)
                .map_err(|e| Failure::classify(e.into()))?,
        )
    } else {
        None
    };
    let summary = KmSummary {
        l_inf: r.l_inf,
        tail: r.tail,
        converged: r.converged,
        hit_j_max: r.hit_j_max,
        steps: r.states.len(),
        delta_rho_theta: r.delta_rho_theta,
        corollary: r.corollary.clone(),
        trace_check: check_trace(&r, &params, theta),
        u_plus: u.value(&kc.y, kc.s).map(|v| v.max(0.0)),
        theorem,
    };
    let mut art = Artifacts::default();
    let mut buf = Vec::new();
    kmiter::write_trace_csv(&mut buf, &r).map_err(|e| Failure::Runtime(e.into()))?;
    art.add("km_trace.csv", buf);
    art.add_json("km_summary.json", &summary).map_err(Failure::Runtime)?;
    Ok(art)
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    passed: bool,
    failing: Vec<String>,
    suites: Vec<SuiteReport>,
}

/// Runs the suites; the artifacts are returned even when a suite fails so
/// the report can be inspected.
pub fn verify(cfg: &RunConfig, seed: u64) -> Result<(Artifacts, Vec<String>), Failure> {
    let reports = suites::run(&cfg.verify.suites, seed, cfg.verify.autonomous_cases).map_err(Failure::Input)?;
    if reports.is_empty() {
        return Err(Failure::Input(anyhow::anyhow!("no suites selected")));
    }
    let failing: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect();
    let report = VerifyReport { seed, passed: failing.is_empty(), failing: failing.clone(), suites: reports };
    let mut art = Artifacts::default();
    art.add_json("verify_report.json", &report).map_err(Failure::Runtime)?;
    Ok((art, failing))
}
