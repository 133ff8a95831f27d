use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use biostab_core::config::CaseConfig;
use biostab_core::stability::{period, reconstruct_evolution, BranchSelect, CriticalPoint, NeutralPoint};

use crate::args::{Cli, Common, KRange, Verb};
use crate::case::Case;
use crate::output::{cell_text, sci, Manifest, Table};
use crate::{CliError, Result};

pub const RESULT_COLUMNS: [&str; 12] = [
    "vc",
    "tau_h",
    "omega",
    "b_flux",
    "a_coeff",
    "lambda_c",
    "r_c",
    "im_sigma",
    "mode",
    "branch",
    "top_boundary",
    "status",
];

pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.verb {
        Verb::Steady { common } => steady(&common),
        Verb::Neutral { common, range } => neutral(&common, &range),
        Verb::Critical { common, range } => critical(&common, &range),
        Verb::Sweep {
            common,
            range,
            sweep_file,
            workers,
        } => sweep(&common, &range, &sweep_file, workers),
        Verb::Evolve {
            common,
            range,
            k,
            periods,
            frames,
            x_samples,
        } => evolve(&common, &range, k, periods, frames, x_samples),
    }
}

fn load(common: &Common, range: &KRange) -> Result<CaseConfig> {
    let mut cfg = CaseConfig::from_path(&common.config)?;
    let n = &mut cfg.numerics;
    n.k_min = range.k_min.unwrap_or(n.k_min);
    n.k_max = range.k_max.unwrap_or(n.k_max);
    n.k_step = range.k_step.unwrap_or(n.k_step);
    cfg.validate()?;
    Ok(cfg)
}

fn manifest(command: &str, cfg: &CaseConfig, arguments: Vec<(String, String)>) -> Result<Manifest> {
    let taxis = biostab_core::default_taxis(cfg.params.critical_intensity)?.id();
    Ok(Manifest::new(command, arguments, cfg.to_text(), taxis))
}

fn steady(common: &Common) -> Result<Vec<PathBuf>> {
    let cfg = load(common, &KRange::default())?;
    let case = Case::prepare(&cfg)?;
    let f = &case.field;
    let mut rad = Table::new(&["tau", "z", "g_s", "q_s"]);
    rad.comments.push("uniform suspension".into());
    for (j, &t) in f.tau_grid.iter().enumerate() {
        rad.push(vec![sci(t), sci(1.0 - t / f.tau_h), sci(f.g_s[j]), sci(f.q_s[j])]);
    }
    let s = &case.state;
    let mut base = Table::new(&["z", "tau", "n_s", "g_s", "q_s", "m_s"]);
    base.comments.push(format!("taxis {}", case.taxis.id()));
    for j in 0..s.z_grid.len() {
        base.push(vec![
            sci(s.z_grid[j]),
            sci(s.tau_of_z[j]),
            sci(s.n_s[j]),
            sci(s.g_s_of_z[j]),
            sci(s.q_s_of_z[j]),
            sci(s.m_s[j]),
        ]);
    }
    manifest("steady", &cfg, vec![])?.emit(
        &common.out,
        &[("radiative.csv".into(), rad), ("basic_state.csv".into(), base)],
    )
}

fn neutral(common: &Common, range: &KRange) -> Result<Vec<PathBuf>> {
    let cfg = load(common, range)?;
    let case = Case::prepare(&cfg)?;
    let solver = case.solver()?;
    let curve = case.neutral_curve(&solver)?;
    let mut rows: Vec<(f64, String, Vec<String>)> = Vec::new();
    let point_row = |p: &NeutralPoint| {
        (
            p.k,
            p.branch.to_string(),
            vec![sci(p.k), sci(p.rayleigh), sci(p.sigma_im.abs()), p.branch.to_string(), p.mode.to_string(), "ok".into()],
        )
    };
    rows.extend(curve.points.iter().map(point_row));
    rows.extend(curve.secondary.iter().map(point_row));
    for (k, e) in &curve.failures {
        warn!("k={k}: {e}");
        rows.push((*k, String::new(), vec![sci(*k), String::new(), String::new(), String::new(), String::new(), cell_text(&format!("error: {e}"))]));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut table = Table::new(&["k", "rayleigh", "im_sigma", "branch", "mode", "status"]);
    if let Some(kb) = curve.branch_point {
        table.comments.push(format!("oscillatory branch ends at k_b = {}", sci(kb)));
    }
    table.rows = rows.into_iter().map(|r| r.2).collect();
    manifest("neutral", &cfg, vec![])?.emit(&common.out, &[("neutral.csv".into(), table)])
}

fn result_row(cfg: &CaseConfig, outcome: &Result<CriticalPoint>) -> Vec<String> {
    let p = &cfg.params;
    let mut row = vec![
        sci(p.swim_speed),
        sci(p.extinction),
        sci(p.albedo),
        sci(p.diffuse_flux),
        sci(p.aniso_coeff),
    ];
    match outcome {
        Ok(cp) => {
            row.extend([sci(cp.lambda_c), sci(cp.r_c), sci(cp.sigma_im.abs()), cp.mode.to_string(), cp.branch.to_string()]);
            row.push(p.top_boundary.to_string());
            row.push(if cp.boundary_minimum { "boundary_minimum".into() } else { "ok".into() });
        }
        Err(e) => {
            row.extend(std::iter::repeat_n(String::new(), 5));
            row.push(p.top_boundary.to_string());
            row.push(cell_text(&format!("error: {e}")));
        }
    }
    row
}

fn critical(common: &Common, range: &KRange) -> Result<Vec<PathBuf>> {
    let cfg = load(common, range)?;
    let cp = Case::prepare(&cfg)?.critical()?;
    info!("R_c = {} at k_c = {} ({})", cp.r_c, cp.k_c, cp.branch);
    let mut table = Table::new(&RESULT_COLUMNS);
    table.push(result_row(&cfg, &Ok(cp)));
    manifest("critical", &cfg, vec![])?.emit(&common.out, &[("critical.csv".into(), table)])
}

/// Header of config keys, then one whitespace- or comma-separated tuple
/// per line. `#` starts a comment.
pub fn parse_sweep(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(str::to_string).collect::<Vec<_>>());
    let Some(keys) = lines.next() else {
        return Ok((Vec::new(), Vec::new()));
    };
    let known = |k: &str| {
        biostab_core::config::PHYSICAL_KEYS.contains(&k) || biostab_core::config::NUMERIC_KEYS.contains(&k)
    };
    let unknown: Vec<_> = keys.iter().filter(|k| !known(k)).cloned().collect();
    if !unknown.is_empty() {
        return Err(CliError::Config(format!("sweep file: unknown keys: {}", unknown.join(", "))));
    }
    Ok((keys, lines.collect()))
}

fn sweep_row(base: &CaseConfig, keys: &[String], values: &[String]) -> (CaseConfig, Result<CriticalPoint>) {
    let mut cfg = *base;
    if values.len() != keys.len() {
        let e = CliError::Config(format!("expected {} values, got {}", keys.len(), values.len()));
        return (cfg, Err(e));
    }
    for (k, v) in keys.iter().zip(values) {
        if let Err(e) = cfg.set(k, v) {
            return (cfg, Err(e.into()));
        }
    }
    let outcome = cfg
        .validate()
        .map_err(CliError::from)
        .and_then(|_| Case::prepare(&cfg))
        .and_then(|case| case.critical());
    (cfg, outcome)
}

fn sweep(common: &Common, range: &KRange, file: &Path, workers: Option<usize>) -> Result<Vec<PathBuf>> {
    let base = load(common, range)?;
    let text = std::fs::read_to_string(file)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", file.display())))?;
    let (keys, tuples) = parse_sweep(&text)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let results: Vec<(CaseConfig, Result<CriticalPoint>)> =
        pool.install(|| tuples.par_iter().map(|t| sweep_row(&base, &keys, t)).collect());
    let mut table = Table::new(&RESULT_COLUMNS);
    table.comments.push(format!("sweep keys: {}", keys.join(" ")));
    let mut failed = 0;
    for (cfg, outcome) in &results {
        if let Err(e) = outcome {
            warn!("sweep row failed: {e}");
            failed += 1;
        }
        table.push(result_row(cfg, outcome));
    }
    let args = vec![("sweep".to_string(), text)];
    let written = manifest("sweep", &base, args)?.emit(&common.out, &[("sweep.csv".into(), table)])?;
    if failed > 0 {
        return Err(CliError::PartialSweep { failed, total: results.len() });
    }
    Ok(written)
}

fn evolve(
    common: &Common,
    range: &KRange,
    k: Option<f64>,
    periods: usize,
    frames: usize,
    x_samples: usize,
) -> Result<Vec<PathBuf>> {
    let cfg = load(common, range)?;
    if frames == 0 || x_samples == 0 {
        return Err(CliError::Config("--frames and --x-samples must be >= 1".into()));
    }
    if let Some(k) = k {
        if !(k > 0.0 && k.is_finite()) {
            return Err(CliError::Config(format!("--k must be > 0, got {k}")));
        }
    }
    let case = Case::prepare(&cfg)?;
    let k = match k {
        Some(k) => k,
        None => case.critical()?.k_c,
    };
    let solver = case.solver()?;
    let (pt, mode) = solver.neutral_mode(k, None, BranchSelect::Lowest)?;
    let span = if periods == 0 {
        0.0
    } else {
        let t_p = period(&pt).map_err(|e| {
            CliError::Solver(format!("{e}; the neutral point at k = {k} is stationary, rerun with --periods 0 for a single snapshot"))
        })?;
        t_p * periods as f64
    };
    let n_frames = if periods == 0 { 1 } else { frames };
    let times: Vec<f64> = (0..n_frames)
        .map(|i| if n_frames == 1 { 0.0 } else { span * i as f64 / (n_frames - 1) as f64 })
        .collect();
    let ev = reconstruct_evolution(&pt, &mode, &case.state.z_grid, &times, x_samples)?;
    let mut tables = Vec::new();
    for (f, &t) in times.iter().enumerate() {
        let mut table = Table::new(&["x", "z", "w1", "n1"]);
        table.comments.push(format!("t = {}", sci(t)));
        for (iz, &z) in ev.z.iter().enumerate() {
            for (ix, &x) in ev.x.iter().enumerate() {
                table.push(vec![sci(x), sci(z), sci(ev.w[f][(iz, ix)]), sci(ev.n[f][(iz, ix)])]);
            }
        }
        tables.push((format!("frame_{f:04}.csv"), table));
    }
    // The phase portrait is sampled more finely than the frames.
    let samples = 64 * periods.max(1) + 1;
    let fine: Vec<f64> = (0..samples).map(|i| span * i as f64 / (samples - 1) as f64).collect();
    let portrait = reconstruct_evolution(&pt, &mode, &case.state.z_grid, &fine, 1)?;
    let mut table = Table::new(&["t", "w1", "dw1_dt"]);
    table.comments.push(format!(
        "k = {}, R = {}, im_sigma = {}, branch = {}, z = {}",
        sci(pt.k),
        sci(pt.rayleigh),
        sci(pt.sigma_im.abs()),
        pt.branch,
        sci(portrait.portrait_z)
    ));
    for (t, (w, dw)) in fine.iter().zip(&portrait.portrait) {
        table.push(vec![sci(*t), sci(*w), sci(*dw)]);
    }
    tables.push(("portrait.csv".into(), table));
    let args = vec![
        ("k".to_string(), sci(k)),
        ("periods".to_string(), periods.to_string()),
        ("frames".to_string(), frames.to_string()),
        ("x_samples".to_string(), x_samples.to_string()),
    ];
    manifest("evolve", &cfg, args)?.emit(&common.out, &tables)
}
