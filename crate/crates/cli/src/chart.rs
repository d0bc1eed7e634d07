//! Static SVG line chart of an ascending/descending sweep.

use std::fmt::Write;

use bridge_core::importance::{Direction, RankedSweep};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn color(d: Direction) -> &'static str {
    match d {
        Direction::Ascending => "#d62728",
        Direction::Descending => "#2ca02c",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Raw sweep points plus the per-size mean as a polyline, one series per
/// direction. `meta` is embedded verbatim in the `<desc>` element.
pub fn sweep_svg(sweep: &RankedSweep, title: &str, meta: &str) -> String {
    let t_max = sweep.points.iter().map(|p| p.t).max().unwrap_or(1).max(1) as f64;
    let (mut y_lo, mut y_hi) = sweep
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.metric), hi.max(p.metric)));
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    y_lo = y_lo.min(0.0);
    if y_hi - y_lo < 1e-12 {
        y_hi = y_lo + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |t: f64| LEFT + if t_max > 1.0 { (t - 1.0) / (t_max - 1.0) } else { 0.5 } * plot_w;
    let y = |v: f64| TOP + (1.0 - (v - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<desc>{}</desc>", escape(meta));
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        TOP - 15.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<g id="axes" stroke="black"><line x1="{LEFT}" y1="{}" x2="{}" y2="{}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h,
        TOP + plot_h
    );
    for i in 0..=4 {
        let v = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let py = y(v);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let ticks: Vec<usize> = {
        let mut v: Vec<usize> = (0..=4).map(|i| 1 + ((t_max - 1.0) * i as f64 / 4.0).round() as usize).collect();
        v.dedup();
        v
    };
    for t in ticks {
        let px = x(t as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{t}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">subset size t</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">metric</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (i, d) in [Direction::Ascending, Direction::Descending].into_iter().enumerate() {
        let c = color(d);
        let _ = writeln!(s, r#"<g class="series" data-direction="{d}">"#);
        for p in sweep.points.iter().filter(|p| p.direction == d) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{c}" fill-opacity="0.5"/>"#,
                x(p.t as f64),
                y(p.metric)
            );
        }
        let pts: Vec<String> = sweep
            .mean_curve(d)
            .iter()
            .map(|&(t, v)| format!("{:.2},{:.2}", x(t as f64), y(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{d}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use bridge_core::importance::SweepPoint;

    fn sweep() -> RankedSweep {
        let mut points = Vec::new();
        for d in [Direction::Ascending, Direction::Descending] {
            for t in [1, 3, 5] {
                let metric = if d == Direction::Descending { 0.9 } else { 0.1 * t as f64 };
                points.push(SweepPoint {
                    direction: d,
                    t,
                    replicate: 0,
                    metric,
                });
            }
        }
        RankedSweep {
            order: vec![0, 1, 2, 3, 4],
            points,
        }
    }

    #[test]
    fn two_labelled_series() {
        let svg = sweep_svg(&sweep(), "sweep", "config_hash=ab seed=1");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 6);
        assert!(svg.contains(">descending</text>"));
        assert!(svg.contains(">ascending</text>"));
        assert!(svg.contains("config_hash=ab seed=1"));
    }

    #[test]
    fn markup_in_title_is_escaped() {
        let svg = sweep_svg(&sweep(), "a<b & c", "");
        assert!(svg.contains("a&lt;b &amp; c"));
    }
}
