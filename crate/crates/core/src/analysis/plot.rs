//! Self-contained SVG output: design-space scatter plots and trajectory overviews.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::export::fmt_real;
use super::regions::{format_condition, Region};
use super::EvaluationRecord;
use crate::scenario::ScenarioSpec;
use crate::sim::{SimulationOutput, EGO, PEDESTRIAN};

const WIDTH: f64 = 560.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

const CRITICAL_COLOR: &str = "#d62728";
const SAFE_COLOR: &str = "#1f77b4";
const REGION_COLOR: &str = "#800080";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn axis_label(spec: &ScenarioSpec, i: usize) -> String {
    let p = &spec.parameters[i];
    if p.unit.is_empty() {
        p.name.clone()
    } else {
        format!("{} [{}]", p.name, p.unit)
    }
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// SVG scatter of `records` projected onto variables `i` (x) and `j` (y),
/// with every region drawn as a rectangle.
pub fn design_space_svg(records: &[EvaluationRecord], regions: &[Region], spec: &ScenarioSpec, i: usize, j: usize) -> String {
    let (pi, pj) = (&spec.parameters[i], &spec.parameters[j]);
    let axes = Axes { x: (pi.lower, pi.upper), y: (pj.lower, pj.upper) };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{} vs {}</text>"#,
        WIDTH / 2.0,
        escape(&pj.name),
        escape(&pi.name)
    );

    // frame and ticks
    let (x0, x1, y0, y1) = (axes.px(pi.lower), axes.px(pi.upper), axes.py(pj.lower), axes.py(pj.upper));
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for t in 0..=TICKS {
        let f = t as f64 / TICKS as f64;
        let xv = pi.lower + f * pi.width();
        let yv = pj.lower + f * pj.width();
        let (x, y) = (axes.px(xv), axes.py(yv));
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"#, y0 + 18.0);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#, x0 - 8.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(&axis_label(spec, i))
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(&axis_label(spec, j))
    );

    for region in regions {
        let (a, b) = (region.intervals[i], region.intervals[j]);
        let (rx0, rx1, ry0, ry1) = (axes.px(a.lower), axes.px(a.upper), axes.py(b.lower), axes.py(b.upper));
        let _ = writeln!(
            s,
            r#"<rect class="region" x="{rx0:.2}" y="{ry1:.2}" width="{:.2}" height="{:.2}" fill="{REGION_COLOR}" fill-opacity="0.15" stroke="{REGION_COLOR}" stroke-width="2"><title>{}</title></rect>"#,
            rx1 - rx0,
            ry0 - ry1,
            escape(&format_condition(region, spec))
        );
    }

    // non-critical first so critical marks stay on top
    for critical in [false, true] {
        for r in records.iter().filter(|r| r.critical == critical) {
            let (x, y) = (axes.px(r.input.values[i]), axes.py(r.input.values[j]));
            if critical {
                let _ = writeln!(
                    s,
                    r#"<rect class="critical" x="{:.2}" y="{:.2}" width="6" height="6" fill="{CRITICAL_COLOR}"/>"#,
                    x - 3.0,
                    y - 3.0
                );
            } else {
                let _ = writeln!(
                    s,
                    r#"<circle class="non-critical" cx="{x:.2}" cy="{y:.2}" r="3" fill="none" stroke="{SAFE_COLOR}"/>"#
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

fn pair_csv(records: &[EvaluationRecord], spec: &ScenarioSpec, i: usize, j: usize) -> String {
    let mut s = format!("index,{},{},critical\n", spec.parameters[i].name, spec.parameters[j].name);
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.index,
            fmt_real(r.input.values[i]),
            fmt_real(r.input.values[j]),
            r.critical
        );
    }
    s
}

/// One `design_space_<a>_<b>.svg` plus `.csv` twin per unordered variable pair.
pub fn export_design_space_plots(
    records: &[EvaluationRecord],
    regions: &[Region],
    spec: &ScenarioSpec,
    outdir: &Path,
) -> io::Result<Vec<PathBuf>> {
    let d = spec.dim();
    if d < 2 {
        log::warn!("design space plots need at least two search variables, found {d}");
        return Ok(Vec::new());
    }
    fs::create_dir_all(outdir)?;
    let mut written = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let stem = format!(
                "design_space_{}_{}",
                file_stem(&spec.parameters[i].name),
                file_stem(&spec.parameters[j].name)
            );
            let svg = outdir.join(format!("{stem}.svg"));
            fs::write(&svg, design_space_svg(records, regions, spec, i, j))?;
            fs::write(outdir.join(format!("{stem}.csv")), pair_csv(records, spec, i, j))?;
            written.push(svg);
        }
    }
    Ok(written)
}

fn actor_color(name: &str) -> &'static str {
    match name {
        EGO => SAFE_COLOR,
        PEDESTRIAN => "#ff7f0e",
        _ => "#7f7f7f",
    }
}

/// Static top-down view of all actor paths; a marker sits at the ego
/// position at the collision time when there was a collision.
pub fn trajectory_svg(output: &SimulationOutput, record: &EvaluationRecord) -> String {
    let (w, h, pad) = (640.0, 320.0, 30.0);
    let points = output.actors.values().flatten();
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    if !xmin.is_finite() {
        (xmin, xmax, ymin, ymax) = (0.0, 1.0, 0.0, 1.0);
    }
    let (xmin, xmax, ymin, ymax) = (xmin - 2.0, xmax + 2.0, ymin - 2.0, ymax + 2.0);
    let scale = ((w - 2.0 * pad) / (xmax - xmin)).min((h - 2.0 * pad) / (ymax - ymin));
    let px = |x: f64| pad + (x - xmin) * scale;
    let py = |y: f64| h - pad - (y - ymin) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let values: Vec<String> = record.input.values.iter().map(|v| format!("{v:.2}")).collect();
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="18">test {} [{}] collision={}</text>"#,
        record.index,
        values.join(", "),
        output.collision
    );
    for (name, states) in &output.actors {
        let path: Vec<String> = states.iter().map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y))).collect();
        let color = actor_color(name);
        let _ = writeln!(
            s,
            r#"<polyline class="path" data-actor="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(name),
            path.join(" ")
        );
        if let Some(first) = states.first() {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
                px(first.x),
                py(first.y) - 6.0,
                escape(name)
            );
        }
    }
    if let (Some(t), Ok(ego)) = (output.collision_time, output.actor(EGO)) {
        let k = ((t / output.dt).round() as usize).min(ego.len().saturating_sub(1));
        if let Some(p) = ego.get(k) {
            let _ = writeln!(
                s,
                r#"<circle id="collision" class="collision" cx="{:.2}" cy="{:.2}" r="7" fill="none" stroke="{CRITICAL_COLOR}" stroke-width="3"><title>collision at t={t:.2} s</title></circle>"#,
                px(p.x),
                py(p.y)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
