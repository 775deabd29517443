//! Hand-rolled SVG charts: fitness-over-generations lines and per-actuator
//! action staircases. Plain text output keeps the files diffable.

use evoxel_core::evolution::FitnessReport;
use evoxel_core::io::RunRow;

const COLORS: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 45.0;

fn polyline(points: &[(f64, f64)], color: &str, width: f64) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    format!(
        r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
        coords.join(" ")
    )
}

/// Best fitness per generation, one line per population, plus a black
/// best-so-far envelope across all populations. The y axis is fixed to the
/// 0-100 fitness scale.
pub fn fitness_svg(runs: &[(String, Vec<RunRow>)]) -> String {
    let max_gen = runs
        .iter()
        .flat_map(|(_, rows)| rows.iter().map(|r| r.generation))
        .max()
        .unwrap_or(1)
        .max(1);
    let min_gen = runs
        .iter()
        .flat_map(|(_, rows)| rows.iter().map(|r| r.generation))
        .min()
        .unwrap_or(0);
    let span = (max_gen - min_gen).max(1) as f64;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |gen: u64| MARGIN_LEFT + (gen - min_gen) as f64 / span * plot_w;
    let y_of = |fitness: f64| {
        let clamped = fitness.clamp(0.0, 100.0);
        MARGIN_TOP + (100.0 - clamped) / 100.0 * plot_h
    };

    let mut svg = format!(
        r#"<svg version="1.1" width="{WIDTH}" height="{HEIGHT}" xmlns="http://www.w3.org/2000/svg">"#
    );
    svg.push('\n');
    svg.push_str(&format!(
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    ));
    svg.push('\n');

    // Axes and horizontal grid every 20 fitness units.
    for tick in (0..=5).map(|i| i as f64 * 20.0) {
        let y = y_of(tick);
        svg.push_str(&format!(
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            WIDTH - MARGIN_RIGHT
        ));
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="12" text-anchor="end">{tick}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        ));
        svg.push('\n');
    }
    svg.push_str(&format!(
        r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="12" text-anchor="middle">generation</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    ));
    svg.push_str(&format!(
        r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.2})">fitness</text>"#,
        14.0,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));
    svg.push('\n');

    for (i, (label, rows)) in runs.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (x_of(r.generation), y_of(r.best_fitness)))
            .collect();
        svg.push_str(&polyline(&points, color, 1.2));
        svg.push('\n');
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="11" fill="{color}">{label}</text>"#,
            WIDTH - MARGIN_RIGHT - 120.0,
            MARGIN_TOP + 14.0 * (i as f64 + 1.0)
        ));
        svg.push('\n');
    }

    // Best-so-far envelope across every population.
    let mut per_generation: std::collections::BTreeMap<u64, f64> =
        std::collections::BTreeMap::new();
    for (_, rows) in runs {
        for r in rows {
            let entry = per_generation.entry(r.generation).or_insert(f64::INFINITY);
            *entry = entry.min(r.best_fitness);
        }
    }
    let mut best = f64::INFINITY;
    let envelope: Vec<(f64, f64)> = per_generation
        .iter()
        .map(|(&gen, &fit)| {
            best = best.min(fit);
            (x_of(gen), y_of(best))
        })
        .collect();
    svg.push_str(&polyline(&envelope, "black", 2.5));
    svg.push('\n');
    svg.push_str("</svg>\n");
    svg
}

/// One staircase panel per actuator showing its applied action value (0.6 to
/// 1.6) over control ticks.
pub fn actions_svg(report: &FitnessReport) -> String {
    let actuators = report
        .action_trace
        .first()
        .map(|a| a.len())
        .unwrap_or_default();
    let ticks = report.action_trace.len().max(1) as f64;
    let panel_h = 52.0;
    let gap = 12.0;
    let height = MARGIN_TOP + actuators as f64 * (panel_h + gap) + 30.0;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;

    let mut svg = format!(
        r#"<svg version="1.1" width="{WIDTH}" height="{height:.0}" xmlns="http://www.w3.org/2000/svg">"#
    );
    svg.push('\n');
    svg.push_str(&format!(
        r#"<rect width="{WIDTH}" height="{height:.0}" fill="white"/>"#
    ));
    svg.push('\n');

    for actuator in 0..actuators {
        let top = MARGIN_TOP + actuator as f64 * (panel_h + gap);
        let y_of = |value: f64| top + (1.6 - value) / 1.0 * panel_h;
        let color = COLORS[actuator % COLORS.len()];
        // Staircase: hold each tick's value for its full interval.
        let mut points = Vec::with_capacity(report.action_trace.len() * 2);
        for (tick, action) in report.action_trace.iter().enumerate() {
            let value = action.values()[actuator];
            let x0 = MARGIN_LEFT + tick as f64 / ticks * plot_w;
            let x1 = MARGIN_LEFT + (tick as f64 + 1.0) / ticks * plot_w;
            points.push((x0, y_of(value)));
            points.push((x1, y_of(value)));
        }
        svg.push_str(&format!(
            r##"<rect x="{MARGIN_LEFT}" y="{top:.2}" width="{plot_w:.2}" height="{panel_h}" fill="none" stroke="#cccccc"/>"##
        ));
        svg.push_str(&polyline(&points, color, 1.5));
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="11">actuator {actuator}</text>"#,
            MARGIN_LEFT + 4.0,
            top + 12.0
        ));
        svg.push('\n');
    }
    svg.push_str(&format!(
        r#"<text x="{:.2}" y="{height:.0}" font-family="monospace" font-size="12" text-anchor="middle" dy="-8">control tick</text>"#,
        MARGIN_LEFT + plot_w / 2.0
    ));
    svg.push('\n');
    svg.push_str("</svg>\n");
    svg
}
