//! File formats: CSV tables, JSON summaries and static SVG plots.
//!
//! Lengths in CSV outputs are millimeters except the raw trajectory dump,
//! which keeps SI meters. Floats are written with Rust's shortest round-trip
//! formatting or a fixed precision, so identical inputs give identical bytes.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::emulator::{EmulatorError, OscillationTrace, OscillatorFit, PdGains};
use crate::model::HybridState;
use crate::sim::{EpisodeOutcome, EpisodeStatus, FailureReason, HopEnergy};
use crate::sweep::{best_stiffness_map, success_region, SweepError, SweepResult, WinnerMap};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Trace(#[from] EmulatorError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<fs::File, OutputError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    fs::File::create(path).map_err(io_err(path))
}

fn mm(v: f64) -> String {
    format!("{:.6}", v * 1000.0)
}

fn opt_mm(v: Option<f64>) -> String {
    v.map(mm).unwrap_or_default()
}

pub fn write_trajectory_csv<W: Write>(
    w: W,
    states: &[HybridState<f64>],
) -> Result<(), OutputError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["time_s", "phase", "x_b_m", "v_b_m_s", "x_t_m", "v_t_m_s"])?;
    for s in states {
        out.write_record([
            s.time.to_string(),
            s.phase.as_str().to_string(),
            s.body_pos.to_string(),
            s.body_vel.to_string(),
            s.toe_pos.to_string(),
            s.toe_vel.to_string(),
        ])?;
    }
    out.flush().map_err(|e| OutputError::Csv(e.into()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTotals {
    pub injected_j: f64,
    pub dissipated_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub status: EpisodeStatus,
    pub failure: Option<FailureReason>,
    pub precompression_mm: f64,
    pub steady_apex_mean_mm: Option<f64>,
    pub steady_apex_std_mm: Option<f64>,
    pub hop_count: usize,
    pub apex_heights_mm: Vec<f64>,
    pub energy_totals: EnergyTotals,
    pub energy_per_hop: Vec<HopEnergy<f64>>,
}

impl SimulationSummary {
    pub fn from_outcome(outcome: &EpisodeOutcome<f64>) -> Self {
        Self {
            status: outcome.status,
            failure: outcome.failure.clone(),
            precompression_mm: outcome.precompression * 1000.0,
            steady_apex_mean_mm: outcome.steady_mean().map(|v| v * 1000.0),
            steady_apex_std_mm: outcome.steady_std().map(|v| v * 1000.0),
            hop_count: outcome.hops.len(),
            apex_heights_mm: outcome.apex_heights().iter().map(|v| v * 1000.0).collect(),
            energy_totals: EnergyTotals {
                injected_j: outcome.energy.iter().map(HopEnergy::injected).sum(),
                dissipated_j: outcome.energy.iter().map(HopEnergy::dissipated).sum(),
            },
            energy_per_hop: outcome.energy.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(io_err(path))?;
    Ok(())
}

/// Every run of the sweep, one row per (cell, leg stiffness), in sweep order.
pub fn write_sweep_csv<W: Write>(
    w: W,
    result: &SweepResult,
    tie_threshold: f64,
) -> Result<(), OutputError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "k_g_N_m",
        "d_g_Ns_m",
        "k_l_N_m",
        "d_l_Ns_m",
        "E_in_J",
        "status",
        "apex_mean_mm",
        "apex_std_mm",
        "winner_flag",
    ])?;
    for &d_l in &result.leg_damping {
        for &e in &result.energy {
            let cells = result.cells(d_l, e, tie_threshold)?;
            let (i_dl, i_e) = result.slice(d_l, e)?;
            let n_dg = result.ground_damping.len();
            for (c, cell) in cells.iter().enumerate() {
                let (i_kg, i_dg) = (c / n_dg, c % n_dg);
                for (i_kl, &k_l) in result.leg_stiffness.iter().enumerate() {
                    let run = result.run(i_dl, i_e, i_kg, i_dg, i_kl);
                    let winner = cell.winners.contains(&k_l);
                    out.write_record([
                        cell.ground_stiffness.to_string(),
                        cell.ground_damping.to_string(),
                        k_l.to_string(),
                        d_l.to_string(),
                        e.to_string(),
                        run.status.as_str().to_string(),
                        opt_mm(run.apex_mean),
                        opt_mm(run.apex_std),
                        u8::from(winner).to_string(),
                    ])?;
                }
            }
        }
    }
    out.flush().map_err(|e| OutputError::Csv(e.into()))?;
    Ok(())
}

fn join_winners(w: &[f64]) -> String {
    if w.is_empty() {
        "FAIL".into()
    } else {
        w.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
    }
}

pub fn write_winner_map_csv<W: Write>(w: W, map: &WinnerMap) -> Result<(), OutputError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k_g_N_m", "d_g_Ns_m", "winners"])?;
    for (i, &k) in map.ground_stiffness.iter().enumerate() {
        for (j, &d) in map.ground_damping.iter().enumerate() {
            let cell = &map.cells[i * map.ground_damping.len() + j];
            out.write_record([k.to_string(), d.to_string(), join_winners(cell)])?;
        }
    }
    out.flush().map_err(|e| OutputError::Csv(e.into()))?;
    Ok(())
}

fn parse_f64(field: &str, what: &str) -> Result<f64, OutputError> {
    field
        .trim()
        .parse()
        .map_err(|_| OutputError::Format(format!("bad {what} value {field:?}")))
}

/// Reads a winner map. Rows must cover a full rectangular grid in
/// stiffness-major order.
pub fn read_winner_map_csv<R: Read>(r: R) -> Result<WinnerMap, OutputError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["k_g_N_m", "d_g_Ns_m", "winners"] {
        return Err(OutputError::Format(format!(
            "unexpected winner-map header {headers:?}"
        )));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let k = parse_f64(&rec[0], "k_g_N_m")?;
        let d = parse_f64(&rec[1], "d_g_Ns_m")?;
        let winners = if rec[2].trim() == "FAIL" {
            Vec::new()
        } else {
            rec[2]
                .split(';')
                .map(|s| parse_f64(s, "winner"))
                .collect::<Result<Vec<_>, _>>()?
        };
        rows.push((k, d, winners));
    }
    let mut ks: Vec<f64> = Vec::new();
    let mut ds: Vec<f64> = Vec::new();
    for (k, d, _) in &rows {
        if !ks.contains(k) {
            ks.push(*k);
        }
        if !ds.contains(d) {
            ds.push(*d);
        }
    }
    if rows.is_empty() || rows.len() != ks.len() * ds.len() {
        return Err(OutputError::Format("winner map is not a full grid".into()));
    }
    for (n, (k, d, _)) in rows.iter().enumerate() {
        if *k != ks[n / ds.len()] || *d != ds[n % ds.len()] {
            return Err(OutputError::Format(
                "winner map rows are not in stiffness-major order".into(),
            ));
        }
    }
    Ok(WinnerMap {
        ground_stiffness: ks,
        ground_damping: ds,
        cells: rows.into_iter().map(|r| r.2).collect(),
    })
}

/// Reads a trace file: a `mass_kg=<value>` line, then CSV columns `t_s,r_m`.
pub fn read_trace_csv<R: Read>(r: R) -> Result<OscillationTrace, OutputError> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader
        .read_line(&mut first)
        .map_err(|e| OutputError::Format(e.to_string()))?;
    let mass = first
        .trim()
        .strip_prefix("mass_kg=")
        .ok_or_else(|| OutputError::Format("trace must start with mass_kg=<value>".into()))
        .and_then(|v| parse_f64(v, "mass_kg"))?;
    let mut rd = csv::Reader::from_reader(reader);
    let headers = rd.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["t_s", "r_m"] {
        return Err(OutputError::Format(format!(
            "expected columns t_s,r_m, got {headers:?}"
        )));
    }
    let (mut t, mut x) = (Vec::new(), Vec::new());
    for rec in rd.records() {
        let rec = rec?;
        t.push(parse_f64(&rec[0], "t_s")?);
        x.push(parse_f64(&rec[1], "r_m")?);
    }
    Ok(OscillationTrace::new(t, x, mass)?)
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &OscillationTrace) -> Result<(), OutputError> {
    writeln!(w, "mass_kg={}", trace.mass()).map_err(|e| OutputError::Csv(e.into()))?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t_s", "r_m"])?;
    for (t, r) in trace.times().iter().zip(trace.positions()) {
        out.write_record([t.to_string(), r.to_string()])?;
    }
    out.flush().map_err(|e| OutputError::Csv(e.into()))?;
    Ok(())
}

/// Appends one calibration row, writing the header first if the file is new.
pub fn append_calibration_row(
    path: &Path,
    gains: &PdGains<f64>,
    fit: &OscillatorFit,
) -> Result<(), OutputError> {
    let fresh = !path.exists();
    if fresh {
        create(path)?;
    }
    let f = fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut out = csv::Writer::from_writer(f);
    if fresh {
        out.write_record(["Kp", "Kd", "kg_N_m", "dg_Ns_m", "r2"])?;
    }
    out.write_record([
        gains.kp.to_string(),
        gains.kd.to_string(),
        fit.ground_stiffness.to_string(),
        fit.ground_damping.to_string(),
        fit.r_squared.to_string(),
    ])?;
    out.flush().map_err(io_err(path))?;
    Ok(())
}

/// One calibration table row: `(gains, stiffness, damping, r2)`.
pub type CalibrationRow = (PdGains<f64>, f64, f64, f64);

/// Reads a table written by `append_calibration_row`.
pub fn read_calibration_csv<R: Read>(r: R) -> Result<Vec<CalibrationRow>, OutputError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(OutputError::Format(format!(
                "calibration row has {} fields",
                rec.len()
            )));
        }
        let v: Vec<f64> = (0..5)
            .map(|i| parse_f64(&rec[i], "calibration"))
            .collect::<Result<_, _>>()?;
        rows.push((PdGains { kp: v[0], kd: v[1] }, v[2], v[3], v[4]));
    }
    Ok(rows)
}

pub fn write_success_region_csv<W: Write>(
    w: W,
    region: &crate::sweep::SuccessRegion,
) -> Result<(), OutputError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k_g_N_m", "d_g_Ns_m", "success"])?;
    for (i, &k) in region.ground_stiffness.iter().enumerate() {
        for (j, &d) in region.ground_damping.iter().enumerate() {
            out.write_record([
                k.to_string(),
                d.to_string(),
                u8::from(region.get(i, j)).to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| OutputError::Csv(e.into()))?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

const VIRIDIS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn viridis(u: f64) -> String {
    let u = u.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (u.floor() as usize).min(VIRIDIS.len() - 2);
    let f = u - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

const CELL_W: f64 = 36.0;
const CELL_H: f64 = 22.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;

/// Grid heatmap with damping on x and stiffness on y (stiff at the top).
/// `None` cells are left blank.
fn heatmap_svg(
    title: &str,
    stiffness: &[f64],
    damping: &[f64],
    fill: &dyn Fn(usize, usize) -> Option<String>,
    legend: &[(String, String)],
) -> String {
    let (nk, nd) = (stiffness.len(), damping.len());
    let grid_w = CELL_W * nd as f64;
    let grid_h = CELL_H * nk as f64;
    let width = LEFT + grid_w + 170.0;
    let height = TOP + grid_h + 50.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-size="13" text-anchor="middle">{title}</text>"#,
        LEFT + grid_w / 2.0
    );
    for (i, k) in stiffness.iter().enumerate() {
        let y = TOP + CELL_H * (nk - 1 - i) as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + CELL_H * 0.7,
            k
        );
        for j in 0..nd {
            let x = LEFT + CELL_W * j as f64;
            match fill(i, j) {
                Some(color) => {
                    let _ = writeln!(
                        s,
                        r##"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{color}" stroke="#ffffff"/>"##
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        r##"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="none" stroke="#dddddd"/>"##
                    );
                }
            }
        }
    }
    for (j, d) in damping.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{d}</text>"#,
            LEFT + CELL_W * (j as f64 + 0.5),
            TOP + grid_h + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">ground damping (Ns/m)</text>"#,
        LEFT + grid_w / 2.0,
        TOP + grid_h + 36.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">ground stiffness (N/m)</text>"#,
        TOP + grid_h / 2.0,
        TOP + grid_h / 2.0
    );
    for (n, (color, label)) in legend.iter().enumerate() {
        let y = TOP + 18.0 * n as f64;
        let x = LEFT + grid_w + 16.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="12" height="12" fill="{color}"/><text x="{}" y="{}">{label}</text>"#,
            x + 18.0,
            y + 10.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Cells colored by winner set; ties get their own color.
pub fn winner_heatmap_svg(title: &str, map: &WinnerMap) -> String {
    let sets: BTreeSet<String> = map
        .cells
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| join_winners(c))
        .collect();
    let sets: Vec<String> = sets.into_iter().collect();
    let color_of = |c: &[f64]| {
        let key = join_winners(c);
        let n = sets.iter().position(|s| *s == key).unwrap_or(0);
        PALETTE[n % PALETTE.len()].to_string()
    };
    let nd = map.ground_damping.len();
    let fill = |i: usize, j: usize| {
        let c = &map.cells[i * nd + j];
        (!c.is_empty()).then(|| color_of(c))
    };
    let legend: Vec<(String, String)> = sets
        .iter()
        .enumerate()
        .map(|(n, s)| {
            (
                PALETTE[n % PALETTE.len()].to_string(),
                format!("k_l = {} N/m", s.replace(';', " / ")),
            )
        })
        .collect();
    heatmap_svg(title, &map.ground_stiffness, &map.ground_damping, &fill, &legend)
}

/// Cells colored by best steady apex height.
pub fn apex_heatmap_svg(
    title: &str,
    stiffness: &[f64],
    damping: &[f64],
    best_apex: &[Option<f64>],
) -> String {
    let (lo, hi) = best_apex
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let nd = damping.len();
    let fill = |i: usize, j: usize| best_apex[i * nd + j].map(|v| viridis((v - lo) / span));
    let legend = if lo.is_finite() {
        vec![
            (viridis(0.0), format!("{:.2} mm", lo * 1000.0)),
            (viridis(0.5), format!("{:.2} mm", (lo + hi) * 500.0)),
            (viridis(1.0), format!("{:.2} mm", hi * 1000.0)),
        ]
    } else {
        Vec::new()
    };
    heatmap_svg(title, stiffness, damping, &fill, &legend)
}

fn slice_tag(d_l: f64, e: f64) -> String {
    format!("dl{d_l}_E{e}")
}

/// Writes the full sweep table plus per-slice winner maps, success regions
/// and heatmaps into `dir`. Returns the written paths in creation order.
pub fn write_sweep_outputs(
    result: &SweepResult,
    tie_threshold: f64,
    dir: &Path,
) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let path = dir.join("sweep.csv");
    write_sweep_csv(create(&path)?, result, tie_threshold)?;
    written.push(path);
    for &d_l in &result.leg_damping {
        for &e in &result.energy {
            let tag = slice_tag(d_l, e);
            let map = best_stiffness_map(result, d_l, e, tie_threshold)?;
            let path = dir.join(format!("winners_{tag}.csv"));
            write_winner_map_csv(create(&path)?, &map)?;
            written.push(path);

            let region = success_region(result, d_l, e)?;
            let path = dir.join(format!("success_{tag}.csv"));
            write_success_region_csv(create(&path)?, &region)?;
            written.push(path);

            let title = format!("best leg stiffness, d_l = {d_l} Ns/m, E = {e} J");
            let path = dir.join(format!("winners_{tag}.svg"));
            fs::write(&path, winner_heatmap_svg(&title, &map)).map_err(io_err(&path))?;
            written.push(path);

            let best: Vec<Option<f64>> = result
                .cells(d_l, e, tie_threshold)?
                .iter()
                .map(|c| c.best_apex())
                .collect();
            let title = format!("steady apex height, d_l = {d_l} Ns/m, E = {e} J");
            let path = dir.join(format!("apex_{tag}.svg"));
            fs::write(
                &path,
                apex_heatmap_svg(&title, &result.ground_stiffness, &result.ground_damping, &best),
            )
            .map_err(io_err(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Body orbit for one drop height.
#[derive(Debug, Clone, PartialEq)]
pub struct PortraitOrbit {
    pub drop_height: f64,
    pub states: Vec<HybridState<f64>>,
}

pub fn write_portrait_csv<W: Write>(w: W, orbits: &[PortraitOrbit]) -> Result<(), OutputError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["drop_height_m", "time_s", "phase", "x_b_mm", "v_b_m_s"])?;
    for orbit in orbits {
        for s in &orbit.states {
            out.write_record([
                orbit.drop_height.to_string(),
                s.time.to_string(),
                s.phase.as_str().to_string(),
                mm(s.body_pos),
                s.body_vel.to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| OutputError::Csv(e.into()))?;
    Ok(())
}

/// Body position against velocity, one polyline per drop height.
pub fn portrait_svg(title: &str, orbits: &[PortraitOrbit]) -> String {
    let pts = orbits.iter().flat_map(|o| o.states.iter());
    let (mut x0, mut x1, mut v0, mut v1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for s in pts {
        x0 = x0.min(s.body_pos);
        x1 = x1.max(s.body_pos);
        v0 = v0.min(s.body_vel);
        v1 = v1.max(s.body_vel);
    }
    if !x0.is_finite() {
        (x0, x1, v0, v1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (w, h, left, top) = (520.0, 360.0, 70.0, 40.0);
    let sx = |x: f64| left + (x - x0) / (x1 - x0).max(1e-12) * w;
    let sy = |v: f64| top + h - (v - v0) / (v1 - v0).max(1e-12) * h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        left + w + 160.0,
        top + h + 50.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-size="13" text-anchor="middle">{title}</text>"#,
        left + w / 2.0
    );
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="#888888"/>"##
    );
    for (n, orbit) in orbits.iter().enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        let mut d = String::new();
        for (k, st) in orbit.states.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2}",
                if k == 0 { "M" } else { " L" },
                sx(st.body_pos),
                sy(st.body_vel)
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="0.8"/>"#
        );
        let y = top + 18.0 * n as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{y}" width="12" height="12" fill="{color}"/><text x="{}" y="{}">drop {:.1} mm</text>"#,
            left + w + 16.0,
            left + w + 34.0,
            y + 10.0,
            orbit.drop_height * 1000.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">body height ({:.1} to {:.1} mm)</text>"#,
        left + w / 2.0,
        top + h + 30.0,
        x0 * 1000.0,
        x1 * 1000.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">body velocity ({v0:.2} to {v1:.2} m/s)</text>"#,
        top + h / 2.0,
        top + h / 2.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> WinnerMap {
        WinnerMap {
            ground_stiffness: vec![2400.0, 2600.0],
            ground_damping: vec![15.0, 20.0, 25.0],
            cells: vec![
                vec![3000.0],
                vec![3000.0, 4000.0],
                vec![],
                vec![5000.0],
                vec![4000.0],
                vec![4000.0, 5000.0],
            ],
        }
    }

    #[test]
    fn winner_map_round_trip() {
        let mut buf = Vec::new();
        write_winner_map_csv(&mut buf, &map()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k_g_N_m,d_g_Ns_m,winners\n"));
        assert!(text.contains("2400,20,3000;4000\n"));
        assert!(text.contains("2400,25,FAIL\n"));
        assert_eq!(read_winner_map_csv(buf.as_slice()).unwrap(), map());
    }

    #[test]
    fn winner_map_rejects_ragged_grid() {
        let text = "k_g_N_m,d_g_Ns_m,winners\n2400,15,3000\n2400,20,3000\n2600,15,3000\n";
        assert!(read_winner_map_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn trace_round_trip() {
        let t: Vec<f64> = (0..25).map(|i| i as f64 * 0.01).collect();
        let r: Vec<f64> = t.iter().map(|x| (10.0 * x).sin() * 0.01).collect();
        let trace = OscillationTrace::new(t, r, 1.25).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        assert!(buf.starts_with(b"mass_kg=1.25\nt_s,r_m\n"));
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), trace);
    }

    #[test]
    fn trace_requires_mass_line() {
        assert!(read_trace_csv("t_s,r_m\n0,0\n".as_bytes()).is_err());
        assert!(read_trace_csv("".as_bytes()).is_err());
        assert!(read_trace_csv("mass_kg=1\nt_s,r_m\n0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn heatmap_leaves_failures_blank() {
        let svg = winner_heatmap_svg("t", &map());
        assert_eq!(svg.matches(r##"fill="none" stroke="#dddddd""##).count(), 1);
        assert!(svg.contains("k_l = 3000 / 4000 N/m"));
        let apex = apex_heatmap_svg("t", &[1.0], &[1.0, 2.0], &[Some(0.01), None]);
        assert_eq!(apex.matches(r##"fill="none" stroke="#dddddd""##).count(), 1);
    }

    #[test]
    fn viridis_endpoints() {
        assert_eq!(viridis(0.0), "#440154");
        assert_eq!(viridis(1.0), "#fde725");
    }
}
