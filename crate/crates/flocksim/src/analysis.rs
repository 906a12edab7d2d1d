//! Effectiveness, scaling fits, layouts and run exports (CSV, JSON, SVG).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{Phase, Tally};
use crate::model::{classify_condition, HostBand, NamedCondition, PreservationStatus, SimConfig};
use crate::sim::{RunResult, Simulation, Terminator, World};

/// Mean of per-family status values, rescaled from 1..4 to 0..1.
pub fn effectiveness(world: &World) -> Result<f64> {
    if world.families.is_empty() {
        return Err(Error::Precondition("effectiveness of zero DOs".into()));
    }
    Ok(effectiveness_of(world.families.iter().map(|f| f.status())))
}

pub fn effectiveness_of(statuses: impl IntoIterator<Item = PreservationStatus>) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    for s in statuses {
        n += 1;
        sum += (s.value() - 1) as f64 / 3.0;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectivenessPoint {
    pub t: u64,
    pub effectiveness: f64,
    pub cumulative_messages: u64,
}

/// Effectiveness against cumulative messages, one point per bin.
pub fn cost_curve(result: &RunResult) -> Vec<EffectivenessPoint> {
    result
        .series
        .iter()
        .map(|b| EffectivenessPoint { t: b.t, effectiveness: b.effectiveness, cumulative_messages: b.cumulative_sent })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingSlot {
    pub ring: u32,
    pub slot: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeRingLayout {
    pub positions: Vec<RingSlot>,
}

pub fn ring_capacity(ring: u32) -> u32 {
    if ring == 0 {
        1
    } else {
        8 * ring
    }
}

impl TreeRingLayout {
    pub fn ring_counts(&self) -> Vec<u32> {
        let rings = self.positions.last().map(|p| p.ring + 1).unwrap_or(0);
        let mut counts = vec![0; rings as usize];
        for p in &self.positions {
            counts[p.ring as usize] += 1;
        }
        counts
    }
}

/// Oldest DO at the centre, later DOs on successive rings.
pub fn tree_ring_layout(count: usize) -> TreeRingLayout {
    let mut positions = Vec::with_capacity(count);
    let (mut ring, mut slot) = (0u32, 0u32);
    for _ in 0..count {
        if slot == ring_capacity(ring) {
            ring += 1;
            slot = 0;
        }
        positions.push(RingSlot { ring, slot });
        slot += 1;
    }
    TreeRingLayout { positions }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub sizes: Vec<f64>,
    pub totals: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    /// Log-log slope of the per-DO marginal cost between successive sizes;
    /// absent when some marginal cost is not positive.
    pub marginal_slope: Option<f64>,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>().sqrt();
    (slope, intercept, residual)
}

/// Log-log least-squares fit of message totals against system size.
pub fn fit_growth_exponent(sweep: &[(u64, f64)]) -> Result<ScalingFit> {
    let mut pts = sweep.to_vec();
    pts.sort_by_key(|p| p.0);
    pts.dedup_by_key(|p| p.0);
    if pts.len() < 3 {
        return Err(Error::Precondition(format!("fit needs at least 3 distinct sizes, got {}", pts.len())));
    }
    if let Some(p) = pts.iter().find(|p| p.0 == 0 || p.1.is_nan() || p.1 <= 0.0) {
        return Err(Error::Precondition(format!("non-positive value at n = {}: {}", p.0, p.1)));
    }
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, residual) = least_squares(&xs, &ys);

    let mut mx = Vec::new();
    let mut my = Vec::new();
    let mut marginal_ok = true;
    for w in pts.windows(2) {
        let m = (w[1].1 - w[0].1) / (w[1].0 - w[0].0) as f64;
        if m.is_nan() || m <= 0.0 {
            marginal_ok = false;
            break;
        }
        mx.push(((w[0].0 + w[1].0) as f64 / 2.0).ln());
        my.push(m.ln());
    }
    let marginal_slope = (marginal_ok && mx.len() >= 2).then(|| least_squares(&mx, &my).0);
    Ok(ScalingFit {
        sizes: pts.iter().map(|p| p.0 as f64).collect(),
        totals: pts.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        residual,
        marginal_slope,
    })
}

pub const CSV_HEADER: [&str; 15] = [
    "t",
    "phase",
    "effectiveness",
    "cumulative_sent",
    "cumulative_received",
    "status_none",
    "status_partial",
    "status_min",
    "status_max",
    "host_grey",
    "host_white",
    "host_red",
    "host_yellow",
    "host_green",
    "host_blue",
];

fn frac(count: u64, total: u64) -> String {
    if total == 0 {
        format!("{:.6}", 0.0)
    } else {
        format!("{:.6}", count as f64 / total as f64)
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Growth => "growth",
        Phase::Maintenance => "maintenance",
    }
}

/// Time series as CSV text, one row per bin.
pub fn timeseries_csv(result: &RunResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let map = |e: csv::Error| Error::Csv { path: "<memory>".into(), source: e };
    w.write_record(CSV_HEADER).map_err(map)?;
    for b in &result.series {
        let dos: u64 = b.status_counts.iter().sum();
        let hosts: u64 = b.band_counts.iter().sum();
        let mut row = vec![
            b.t.to_string(),
            phase_name(b.phase).to_string(),
            format!("{:.6}", b.effectiveness),
            b.cumulative_sent.to_string(),
            b.cumulative_received.to_string(),
        ];
        row.extend(b.status_counts.iter().map(|c| frac(*c, dos)));
        row.extend(b.band_counts.iter().map(|c| frac(*c, hosts)));
        w.write_record(&row).map_err(map)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Precondition(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_timeseries_csv(result: &RunResult, path: &Path) -> Result<()> {
    let text = timeseries_csv(result)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTotals {
    pub growth: Tally,
    pub maintenance: Tally,
    pub total: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: SimConfig,
    pub seed: u64,
    pub condition: NamedCondition,
    pub terminator: Terminator,
    pub final_t: u64,
    pub steady_state_t: Option<u64>,
    pub growth_end_t: Option<u64>,
    pub messages: PhaseTotals,
    pub final_effectiveness: f64,
    pub status_counts: [u64; 4],
    pub zero_copy_fraction: f64,
    pub discovered_hosts: usize,
    pub hosts_with_unused_capacity: usize,
    pub sacrifices: u64,
    pub edges: usize,
}

pub fn summarize(result: &RunResult) -> RunSummary {
    RunSummary {
        config: result.config.clone(),
        seed: result.seed,
        condition: classify_condition(&result.config),
        terminator: result.terminator,
        final_t: result.final_t,
        steady_state_t: result.steady_state_t,
        growth_end_t: result.growth_end_t,
        messages: PhaseTotals {
            growth: result.ledger.growth,
            maintenance: result.ledger.maintenance,
            total: result.ledger.total(),
        },
        final_effectiveness: result.final_effectiveness(),
        status_counts: result.world.status_counts(),
        zero_copy_fraction: result.world.zero_copy_fraction(),
        discovered_hosts: result.world.discovered_hosts(),
        hosts_with_unused_capacity: result.world.hosts_with_unused_capacity(),
        sacrifices: result.sacrifices,
        edges: result.world.graph.edge_count(),
    }
}

pub fn summary_json(result: &RunResult) -> String {
    let mut s = serde_json::to_string_pretty(&summarize(result)).expect("summary serializes");
    s.push('\n');
    s
}

pub fn emit_summary_json(result: &RunResult, path: &Path) -> Result<()> {
    fs::write(path, summary_json(result)).map_err(|e| Error::io(path, e))
}

pub fn read_summary_json(path: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: path.into(), source: e })
}

fn fill(color: &str) -> &'static str {
    match color {
        "grey" => "#9e9e9e",
        "white" => "#ffffff",
        "red" => "#d62728",
        "yellow" => "#f2c200",
        "green" => "#2ca02c",
        "blue" => "#1f5fbf",
        _ => "#000000",
    }
}

/// World state at event time `t`, rebuilt by replaying the run.
pub fn world_at(config: &SimConfig, t: u64) -> Result<World> {
    let mut sim = Simulation::new(config.clone())?;
    while sim.t() < t {
        if !sim.step()? {
            break;
        }
    }
    Ok(sim.world().clone())
}

/// Four-quadrant snapshot: DO tree rings (left), host grid (right),
/// status and band histograms beneath, status line on top.
pub fn snapshot_svg(result: &RunResult, t: u64) -> Result<String> {
    if t > result.final_t {
        return Err(Error::Precondition(format!("snapshot t = {t} beyond run length {}", result.final_t)));
    }
    let world = world_at(&result.config, t)?;
    Ok(render_svg(&world, t))
}

pub fn render_svg(world: &World, t: u64) -> String {
    let (w, h) = (1000.0, 760.0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#f4f4f4"/>"##);
    let _ = writeln!(
        s,
        r#"<text id="status" x="20" y="28" font-family="monospace" font-size="18">t={t} DOs={} hosts={}</text>"#,
        world.families.len(),
        world.discovered_hosts()
    );

    let (cx, cy) = (250.0, 280.0);
    let layout = tree_ring_layout(world.families.len());
    let rings = layout.ring_counts().len().max(1) as f64;
    let step = 220.0 / rings;
    let _ = writeln!(s, r#"<g id="dos">"#);
    for (f, pos) in world.families.iter().zip(&layout.positions) {
        let radius = pos.ring as f64 * step;
        let angle = if pos.ring == 0 {
            0.0
        } else {
            2.0 * std::f64::consts::PI * pos.slot as f64 / ring_capacity(pos.ring) as f64
        };
        let x = cx + radius * angle.cos();
        let y = cy + radius * angle.sin();
        let r = (step * 0.45).clamp(1.0, 12.0);
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{}" stroke="#333" stroke-width="0.3"/>"##,
            fill(f.status().color())
        );
    }
    let _ = writeln!(s, "</g>");

    let cols = (world.hosts.len() as f64).sqrt().ceil().max(1.0) as usize;
    let cell = 440.0 / cols as f64;
    let _ = writeln!(s, r#"<g id="hosts">"#);
    for (i, host) in world.hosts.iter().enumerate() {
        let x = 530.0 + (i % cols) as f64 * cell;
        let y = 60.0 + (i / cols) as f64 * cell;
        let _ = writeln!(
            s,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{c:.2}" height="{c:.2}" fill="{}" stroke="#555" stroke-width="0.2"/>"##,
            fill(host.band().color()),
            c = cell
        );
    }
    let _ = writeln!(s, "</g>");

    let statuses = world.status_counts();
    let colors: Vec<&str> = PreservationStatus::ALL.iter().map(|p| p.color()).collect();
    histogram(&mut s, "status-histogram", 40.0, 540.0, &statuses, &colors);
    let bands = world.band_counts();
    let colors: Vec<&str> = HostBand::ALL.iter().map(|b| b.color()).collect();
    histogram(&mut s, "host-histogram", 530.0, 540.0, &bands, &colors);
    let _ = writeln!(s, "</svg>");
    s
}

fn histogram(s: &mut String, id: &str, x0: f64, y0: f64, counts: &[u64], colors: &[&str]) {
    let total: u64 = counts.iter().sum();
    let bar_w = 420.0 / counts.len() as f64;
    let _ = writeln!(s, r#"<g id="{id}">"#);
    let _ = writeln!(s, r##"<rect x="{x0}" y="{y0}" width="430" height="200" fill="none" stroke="#333"/>"##);
    for (i, (c, color)) in counts.iter().zip(colors).enumerate() {
        let frac = if total == 0 { 0.0 } else { *c as f64 / total as f64 };
        let bh = 180.0 * frac;
        let x = x0 + 5.0 + i as f64 * bar_w;
        let y = y0 + 190.0 - bh;
        let _ = writeln!(
            s,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{bh:.2}" fill="{}" stroke="#333" stroke-width="0.5"/>"##,
            bar_w - 6.0,
            fill(color)
        );
    }
    let _ = writeln!(s, "</g>");
}

pub fn emit_snapshot_svg(result: &RunResult, t: u64, path: &Path) -> Result<()> {
    let svg = snapshot_svg(result, t)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
