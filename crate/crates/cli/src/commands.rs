//! Subcommand implementations.
//!
//! Every command validates the configuration, performs its runs (grid
//! points and seeds go through the worker pool) and emits data CSVs plus a
//! JSON manifest carrying the resolved configuration, its hash, the gap
//! reports and per-run iteration counts.  Commands return whether all of
//! their gates passed; the binary exits non-zero otherwise.

use anyhow::{bail, Context, Result};
use perron_core::flow::integrate_mild;
use perron_core::gap::{
    check_c, check_cs_derivative, check_cs_foliation, check_cs_smooth, check_cu_derivative,
    check_cu_gap, check_cu_smooth, GapInput, GapReport,
};
use perron_core::lyapunov_perron::{
    intersect, solve_cu, solve_leaf, FoliationLeaf, ManifoldGraph,
};
use perron_core::model::{modes_in, project, span_basis, LinearModel, Span};
use perron_core::verify::{
    check_gradient_leaf, check_gradient_manifold, check_invariance_manifold,
    check_leaf_convergence, oracle_bvp_compare, VerificationReport,
};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};

use crate::artifacts::{heat_map_svg, line_plot_svg, read_csv, write_csv, write_json};
use crate::config::{Resolved, RunConfig};

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    config_hash: String,
    config: &'a RunConfig,
    /// Source of the convolution constants (scanned pair or pinned value).
    #[serde(skip_serializing_if = "Option::is_none")]
    c_source: Option<perron_core::semigroup::CProvider>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    gap_reports: Vec<GapReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    runs: Vec<RunRecord>,
    outputs: Vec<String>,
    pass: bool,
}

#[derive(Serialize)]
struct RunRecord {
    label: String,
    iterations: usize,
    max_ratio: f64,
    residual: f64,
}

fn ensure_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.5 * (min + max)];
    }
    (0..points)
        .map(|i| min + (max - min) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Cartesian grid over the first `min(2, span dim)` basis directions.
fn span_grid(
    model: &dyn LinearModel,
    span: Span,
    min: f64,
    max: f64,
    points: usize,
) -> (usize, Vec<Vec<f64>>) {
    let dims = modes_in(model, span).len().min(2);
    let axis = linspace(min, max, points);
    let mut coords = Vec::new();
    if dims == 0 {
        return (0, coords);
    }
    if dims == 1 {
        for &a in &axis {
            coords.push(vec![a]);
        }
    } else {
        for &a in &axis {
            for &b in &axis {
                coords.push(vec![a, b]);
            }
        }
    }
    (dims, coords)
}

fn state_from_coords(
    model: &dyn LinearModel,
    span: Span,
    base: &[f64],
    coords: &[f64],
) -> Vec<f64> {
    let basis = span_basis(model, span);
    let mut state = base.to_vec();
    for (c, dir) in coords.iter().zip(basis.iter()) {
        for (s, d) in state.iter_mut().zip(dir) {
            *s += c * d;
        }
    }
    state
}

pub fn cmd_sample_noise(resolved: &Resolved, out: &Path) -> Result<bool> {
    ensure_out(out)?;
    let n = &resolved.config.noise;
    let seeds: Vec<u64> = (0..n.seeds).map(|k| n.seed.wrapping_add(k)).collect();
    let tables: Vec<(u64, Vec<Vec<f64>>)> = seeds
        .par_iter()
        .map(|&seed| -> Result<(u64, Vec<Vec<f64>>)> {
            let path = resolved.sample_path(seed)?;
            let ou = resolved.ou(seed)?;
            let grid = ou.grid();
            let mut rows = Vec::with_capacity(grid.len());
            for k in 0..grid.len() {
                let t = grid.node(k);
                rows.push(vec![t, path.value_at(t)?, ou.z_values()[k]]);
            }
            Ok((seed, rows))
        })
        .collect::<Result<_>>()?;
    let header = vec!["t".to_string(), "omega".to_string(), "z".to_string()];
    let mut outputs = Vec::new();
    for (seed, rows) in &tables {
        let file = out.join(format!("noise_{seed}.csv"));
        write_csv(&file, &header, rows)?;
        outputs.push(file.file_name().unwrap().to_string_lossy().into_owned());
    }
    let manifest = Manifest {
        command: "sample-noise",
        config_hash: resolved.config.hash(),
        config: &resolved.config,
        c_source: None,
        gap_reports: vec![],
        runs: vec![],
        outputs,
        pass: true,
    };
    write_json(&out.join("noise-manifest.json"), &manifest)?;
    Ok(true)
}

/// A gap check either evaluates to a report or is inadmissible at the
/// configured rates; both outcomes belong in the record.
#[derive(Serialize)]
#[serde(untagged)]
enum GapEntry {
    Report(GapReport),
    Inadmissible { name: String, error: String },
}

impl GapEntry {
    fn passed(&self) -> bool {
        matches!(self, GapEntry::Report(r) if r.pass)
    }
}

fn all_gap_entries(resolved: &Resolved) -> Result<Vec<GapEntry>> {
    let rates = resolved.rates();
    let c = resolved.c_provider(rates.zeta)?;
    let input = GapInput {
        constants: resolved.model.constants(),
        lipschitz: resolved.nonlinearity.lipschitz(),
        rates: &rates,
        c: &c,
        corrected_shift: resolved.config.lp.corrected_shift,
    };
    fn push(entries: &mut Vec<GapEntry>, name: &str, r: perron_core::Result<Vec<GapReport>>) {
        match r {
            Ok(reps) => entries.extend(reps.into_iter().map(GapEntry::Report)),
            Err(e) => entries.push(GapEntry::Inadmissible {
                name: name.into(),
                error: e.to_string(),
            }),
        }
    }
    let mut entries = Vec::new();
    push(&mut entries, "cu-manifold-gap", check_cu_gap(&input).map(|r| vec![r]));
    push(
        &mut entries,
        &format!("cu-smooth-gap-order-1..{}", rates.k),
        check_cu_smooth(&input, rates.k),
    );
    push(&mut entries, "center-manifold-gap", check_c(&input).map(|r| vec![r]));
    push(&mut entries, "cs-foliation-gap", check_cs_foliation(&input));
    push(
        &mut entries,
        &format!("cs-smooth-gap-order-1..{}", rates.k),
        check_cs_smooth(&input, rates.k),
    );
    push(
        &mut entries,
        "cu-derivative-gap",
        check_cu_derivative(&input).map(|r| vec![r]),
    );
    push(
        &mut entries,
        "cs-derivative-gap",
        check_cs_derivative(&input).map(|r| vec![r]),
    );
    Ok(entries)
}

#[derive(Serialize)]
struct GapManifest<'a> {
    command: &'static str,
    config_hash: String,
    config: &'a RunConfig,
    checks: Vec<GapEntry>,
    pass: bool,
}

pub fn cmd_check_gaps(resolved: &Resolved, out: &Path) -> Result<bool> {
    ensure_out(out)?;
    let entries = all_gap_entries(resolved)?;
    let pass = entries.iter().all(|e| e.passed());
    for e in &entries {
        match e {
            GapEntry::Report(r) => println!(
                "{:<28} lhs = {:<12.6} threshold = {:<8.4} margin = {:<12.6} {}",
                r.name,
                r.lhs,
                r.threshold,
                r.margin,
                if r.pass { "pass" } else { "FAIL" }
            ),
            GapEntry::Inadmissible { name, error } => {
                println!("{name:<28} FAIL (inadmissible rates): {error}");
            }
        }
    }
    let manifest = GapManifest {
        command: "check-gaps",
        config_hash: resolved.config.hash(),
        config: &resolved.config,
        checks: entries,
        pass,
    };
    write_json(&out.join("gap-report.json"), &manifest)?;
    Ok(pass)
}

pub fn cmd_solve_manifold(resolved: &Resolved, out: &Path) -> Result<bool> {
    ensure_out(out)?;
    let cfg = resolved.lp_config(true)?;
    let ou = resolved.ou(resolved.config.noise.seed)?;
    let model = resolved.model.as_ref();
    let g = &resolved.config.manifold;
    let (dims, coords) = span_grid(model, Span::CenterUnstable, g.min, g.max, g.points);
    if dims == 0 {
        bail!("model has no center-unstable directions to sample");
    }
    let zero = vec![0.0; model.dim()];
    let results: Vec<(Vec<f64>, perron_core::lyapunov_perron::CuFixedPoint)> = coords
        .par_iter()
        .map(|c| -> Result<_> {
            let xi = state_from_coords(model, Span::CenterUnstable, &zero, c);
            let fp = solve_cu(model, &resolved.nonlinearity, &ou, &xi, &cfg)?;
            Ok((c.clone(), fp))
        })
        .collect::<Result<_>>()?;
    let mut header: Vec<String> = (0..dims).map(|i| format!("xi_{i}")).collect();
    header.extend((0..model.dim()).map(|i| format!("h_{i}")));
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut report = None;
    for (c, fp) in &results {
        let mut row = c.clone();
        row.extend(fp.h_value.iter());
        rows.push(row);
        runs.push(RunRecord {
            label: format!("xi = {c:?}"),
            iterations: fp.stats.iterations,
            max_ratio: fp.stats.max_ratio,
            residual: fp.stats.residual,
        });
        report.get_or_insert_with(|| fp.report.clone());
    }
    write_csv(&out.join("manifold.csv"), &header, &rows)?;
    let manifest = Manifest {
        command: "solve-manifold",
        config_hash: resolved.config.hash(),
        config: &resolved.config,
        c_source: Some(cfg.c.clone()),
        gap_reports: report.into_iter().collect(),
        runs,
        outputs: vec!["manifold.csv".into()],
        pass: true,
    };
    write_json(&out.join("manifold-manifest.json"), &manifest)?;
    Ok(true)
}

fn anchor_of(resolved: &Resolved) -> Result<Vec<f64>> {
    let anchor = &resolved.config.foliation.anchor;
    if anchor.is_empty() {
        return Ok(vec![0.0; resolved.model.dim()]);
    }
    if anchor.len() != resolved.model.dim() {
        bail!(
            "foliation.anchor has {} entries but the model dimension is {}",
            anchor.len(),
            resolved.model.dim()
        );
    }
    Ok(anchor.clone())
}

pub fn cmd_solve_foliation(resolved: &Resolved, out: &Path) -> Result<bool> {
    ensure_out(out)?;
    let cfg = resolved.lp_config(false)?;
    let ou = resolved.ou(resolved.config.noise.seed)?;
    let model = resolved.model.as_ref();
    let anchor = anchor_of(resolved)?;
    let g = &resolved.config.foliation.grid;
    let (dims, coords) = span_grid(model, Span::CenterStable, g.min, g.max, g.points);
    if dims == 0 {
        bail!("model has no center-stable directions to sample");
    }
    // one shared base trajectory through the anchor
    let base = if resolved.nonlinearity.is_zero() {
        None
    } else {
        Some(integrate_mild(
            model,
            &resolved.nonlinearity,
            &ou,
            &anchor,
            cfg.t_horizon,
            &cfg.plan,
        )?)
    };
    let anchor_cs = project(model, Span::CenterStable, &anchor);
    let results: Vec<(Vec<f64>, perron_core::lyapunov_perron::LeafFixedPoint)> = coords
        .par_iter()
        .map(|c| -> Result<_> {
            let iota = state_from_coords(model, Span::CenterStable, &anchor_cs, c);
            let fp = solve_leaf(
                model,
                &resolved.nonlinearity,
                &ou,
                &anchor,
                &iota,
                &cfg,
                base.as_ref(),
            )?;
            Ok((c.clone(), fp))
        })
        .collect::<Result<_>>()?;
    let mut header: Vec<String> = (0..dims).map(|i| format!("iota_{i}")).collect();
    header.extend((0..model.dim()).map(|i| format!("l_{i}")));
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut report = None;
    for (c, fp) in &results {
        let mut row = c.clone();
        row.extend(fp.l_value.iter());
        rows.push(row);
        runs.push(RunRecord {
            label: format!("iota offset = {c:?}"),
            iterations: fp.stats.iterations,
            max_ratio: fp.stats.max_ratio,
            residual: fp.stats.residual,
        });
        report.get_or_insert_with(|| fp.report.clone());
    }
    write_csv(&out.join("foliation.csv"), &header, &rows)?;
    let manifest = Manifest {
        command: "solve-foliation",
        config_hash: resolved.config.hash(),
        config: &resolved.config,
        c_source: Some(cfg.c.clone()),
        gap_reports: report.into_iter().collect(),
        runs,
        outputs: vec!["foliation.csv".into()],
        pass: true,
    };
    write_json(&out.join("foliation-manifest.json"), &manifest)?;
    Ok(true)
}

#[derive(Serialize)]
struct IntersectionOutput {
    point: Vec<f64>,
    iterations: usize,
    residual_leaf: f64,
    residual_manifold: f64,
    k_u: f64,
    k_s: f64,
}

pub fn cmd_intersect(resolved: &Resolved, out: &Path) -> Result<bool> {
    ensure_out(out)?;
    let cfg_cu = resolved.lp_config(true)?;
    let cfg_cs = resolved.lp_config(false)?;
    let ou = resolved.ou(resolved.config.noise.seed)?;
    let model = resolved.model.as_ref();
    let anchor = anchor_of(resolved)?;
    let mut graph = ManifoldGraph::new(model, &resolved.nonlinearity, &ou, cfg_cu)?;
    let mut leaf = FoliationLeaf::new(model, &resolved.nonlinearity, &ou, anchor, cfg_cs)?;
    let hit = intersect(&mut graph, &mut leaf, None)?;
    println!(
        "intersection after {} iterations: residuals leaf {:.3e}, manifold {:.3e}",
        hit.iterations, hit.residual_leaf, hit.residual_manifold
    );
    let output = IntersectionOutput {
        point: hit.point.clone(),
        iterations: hit.iterations,
        residual_leaf: hit.residual_leaf,
        residual_manifold: hit.residual_manifold,
        k_u: graph.lipschitz_bound(),
        k_s: leaf.lipschitz_bound(),
    };
    write_json(&out.join("intersection.json"), &output)?;
    let manifest = Manifest {
        command: "intersect",
        config_hash: resolved.config.hash(),
        config: &resolved.config,
        c_source: Some(graph.config().c.clone()),
        gap_reports: vec![graph.report.clone(), leaf.report.clone()],
        runs: vec![],
        outputs: vec!["intersection.json".into()],
        pass: true,
    };
    write_json(&out.join("intersect-manifest.json"), &manifest)?;
    Ok(true)
}

#[derive(Serialize)]
struct VerificationManifest<'a> {
    command: &'static str,
    config_hash: String,
    config: &'a RunConfig,
    reports: Vec<VerificationReport>,
    skipped: Vec<String>,
    pass: bool,
}

pub fn cmd_verify(resolved: &Resolved, out: &Path) -> Result<bool> {
    ensure_out(out)?;
    let model = resolved.model.as_ref();
    let nl = &resolved.nonlinearity;
    let n = &resolved.config.noise;
    let v = &resolved.config.verify;
    let cfg_cu = resolved.lp_config(true)?;
    let cfg_cs = resolved.lp_config(false)?;
    let path = resolved.sample_path(n.seed)?;
    let ou = resolved.ou(n.seed)?;
    let mut reports = Vec::new();
    let mut skipped = Vec::new();

    // deterministic sample points in the center-unstable span
    let cu_dims = modes_in(model, Span::CenterUnstable).len();
    let zero = vec![0.0; model.dim()];
    let xi_samples: Vec<Vec<f64>> = (0..v.samples)
        .map(|i| {
            let coords: Vec<f64> = (0..cu_dims.min(2))
                .map(|d| 0.3 * ((i + 1) as f64 * 0.7 + d as f64 * 1.3).sin())
                .collect();
            state_from_coords(model, Span::CenterUnstable, &zero, &coords)
        })
        .collect();

    reports.push(check_invariance_manifold(
        model,
        nl,
        &path,
        n.mu,
        n.tail_cut,
        &cfg_cu,
        v.flow_time,
        &xi_samples,
        v.invariance_tol_steps * n.dt,
    )?);

    // trajectory dump of the first sample for inspection
    {
        let start = {
            let fp = solve_cu(model, nl, &ou, &xi_samples[0], &cfg_cu)?;
            xi_samples[0]
                .iter()
                .zip(&fp.h_value)
                .map(|(a, b)| a + b)
                .collect::<Vec<f64>>()
        };
        let traj = integrate_mild(model, nl, &ou, &start, v.flow_time, &cfg_cu.plan)?;
        let mut header = vec!["t".to_string()];
        header.extend((0..model.dim()).map(|i| format!("v_{i}")));
        header.push("frame".into());
        let rows: Vec<Vec<f64>> = (0..traj.len())
            .map(|k| {
                let mut row = vec![traj.time(k)];
                row.extend(traj.values[k].iter());
                row.push(0.0); // conjugated frame tag
                row
            })
            .collect();
        write_csv(&out.join("trajectory.csv"), &header, &rows)?;
    }

    if nl.has_jacobian() {
        reports.push(check_gradient_manifold(
            model,
            nl,
            &ou,
            &cfg_cu,
            &xi_samples[0],
            v.fd_step,
            v.gradient_tol,
        )?);
    } else {
        skipped.push("manifold-gradient: nonlinearity carries no Jacobian".into());
    }

    // leaf checks through the configured anchor
    let anchor = anchor_of(resolved)?;
    let anchor_cs = project(model, Span::CenterStable, &anchor);
    let mut leaf = FoliationLeaf::new(model, nl, &ou, anchor.clone(), cfg_cs.clone())?;
    let mut iota2 = anchor_cs.clone();
    let cs_basis = span_basis(model, Span::CenterStable);
    for (s, d) in iota2.iter_mut().zip(&cs_basis[0]) {
        *s += 0.25 * d;
    }
    let point_of = |leaf: &mut FoliationLeaf<'_, dyn LinearModel + Send + Sync>,
                    iota: &[f64]|
     -> Result<Vec<f64>> {
        let l = leaf.l(iota)?;
        Ok(iota.iter().zip(&l).map(|(a, b)| a + b).collect())
    };
    let p1 = point_of(&mut leaf, &anchor_cs)?;
    let p2 = point_of(&mut leaf, &iota2)?;
    reports.push(check_leaf_convergence(
        model,
        nl,
        &ou,
        &[(p1, p2)],
        resolved.config.rates.eta_cs,
        v.leaf_window,
        &cfg_cs.plan,
        v.leaf_growth_tol,
    )?);

    if nl.has_jacobian() {
        reports.push(check_gradient_leaf(
            model,
            nl,
            &ou,
            &cfg_cs,
            &anchor,
            &anchor_cs,
            v.fd_step,
            v.gradient_tol,
        )?);
    } else {
        skipped.push("leaf-gradient: nonlinearity carries no Jacobian".into());
    }

    if model.x0_dim() <= 4 {
        reports.push(oracle_bvp_compare(
            model,
            nl,
            &ou,
            &xi_samples,
            &cfg_cu,
            v.oracle_tol,
        )?);
    } else {
        skipped.push(format!(
            "collocation-oracle: model has {} modes (> 4)",
            model.x0_dim()
        ));
    }

    // per-rung convolution residuals against the analytic limit
    {
        use perron_core::noise::{OuProcess, TimeGrid};
        use perron_core::semigroup::{convolution_limit, ladder_values};
        let dt = n.dt;
        let frozen = OuProcess::frozen(TimeGrid::new(0.0, 1.0, dt)?, 0.0);
        let steps = (1.0 / dt).round() as usize;
        let probe = vec![vec![1.0; model.dim()]; steps + 1];
        let t_probe = 1.0;
        let plan = resolved.plan()?;
        let rungs = ladder_values(model, &frozen, &probe, t_probe, &plan)?;
        let exact = convolution_limit(model, &frozen, &probe, t_probe, resolved.quadrature())?;
        let rows: Vec<Vec<f64>> = rungs
            .iter()
            .map(|(lambda, value)| {
                let residual: f64 = value
                    .iter()
                    .zip(&exact)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                vec![*lambda, residual]
            })
            .collect();
        write_csv(
            &out.join("ladder-diagnostics.csv"),
            &["lambda".to_string(), "residual".to_string()],
            &rows,
        )?;
    }

    let pass = reports.iter().all(|r| r.pass);
    for r in &reports {
        println!(
            "{:<22} worst residual = {:<12.4e} tolerance = {:<10.2e} {}",
            r.name,
            r.worst_residual,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    for s in &skipped {
        println!("skipped: {s}");
    }
    let manifest = VerificationManifest {
        command: "verify",
        config_hash: resolved.config.hash(),
        config: &resolved.config,
        reports,
        skipped,
        pass,
    };
    write_json(&out.join("verification-manifest.json"), &manifest)?;
    Ok(pass)
}

pub fn cmd_plot(input: &Path, output: Option<PathBuf>) -> Result<bool> {
    let (header, rows) = read_csv(input)?;
    if rows.is_empty() {
        bail!("no data rows in {}", input.display());
    }
    let is_input =
        |name: &str| name.starts_with("xi_") || name.starts_with("iota_") || name == "t";
    let input_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| is_input(h))
        .map(|(i, _)| i)
        .collect();
    let output_cols: Vec<usize> = (0..header.len())
        .filter(|i| !input_cols.contains(i))
        .collect();
    if input_cols.is_empty() || output_cols.is_empty() {
        bail!("csv needs input columns (t/xi_*/iota_*) and value columns");
    }
    let varying: Vec<usize> = input_cols
        .iter()
        .copied()
        .filter(|&c| {
            let first = rows[0][c];
            rows.iter().any(|r| r[c] != first)
        })
        .collect();
    let svg = match varying.len() {
        0 => bail!("no varying input column to plot against"),
        1 => {
            let xc = varying[0];
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.sort_by(|&a, &b| rows[a][xc].partial_cmp(&rows[b][xc]).unwrap());
            let x: Vec<f64> = order.iter().map(|&r| rows[r][xc]).collect();
            let series: Vec<(String, Vec<f64>)> = output_cols
                .iter()
                .map(|&c| {
                    (
                        header[c].clone(),
                        order.iter().map(|&r| rows[r][c]).collect(),
                    )
                })
                .collect();
            line_plot_svg(&header[xc], &x, &series)
        }
        _ => {
            let (xc, yc) = (varying[0], varying[1]);
            let mut xs: Vec<f64> = rows.iter().map(|r| r[xc]).collect();
            let mut ys: Vec<f64> = rows.iter().map(|r| r[yc]).collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xs.dedup();
            ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ys.dedup();
            let mut values = vec![0.0; xs.len() * ys.len()];
            for r in &rows {
                let i = xs.iter().position(|&v| v == r[xc]).unwrap();
                let j = ys.iter().position(|&v| v == r[yc]).unwrap();
                let norm: f64 = output_cols.iter().map(|&c| r[c] * r[c]).sum::<f64>().sqrt();
                values[j * xs.len() + i] = norm;
            }
            heat_map_svg(&header[xc], &header[yc], &xs, &ys, &values)
        }
    };
    let target = output.unwrap_or_else(|| input.with_extension("svg"));
    std::fs::write(&target, svg).with_context(|| format!("writing {}", target.display()))?;
    println!("wrote {}", target.display());
    Ok(true)
}
