//! Static SVG plot of singlet and triplet populations.

use std::fmt::Write;

use radpair::{SimulationRecord, Theory};

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 55.0;
const MAX_POINTS: usize = 800;

fn dash(theory: Theory) -> &'static str {
    match theory {
        Theory::Nonlinear => "",
        Theory::Traditional => " stroke-dasharray=\"8 5\"",
        Theory::NonReacting => " stroke-dasharray=\"2 4\"",
    }
}

/// `Tr{Q_S ρ}` and `Tr{Q_T ρ}` against time for each record, on shared axes.
pub fn population_svg(records: &[&SimulationRecord]) -> String {
    let t_max = records
        .iter()
        .filter_map(|r| r.rows.last().map(|row| row.t))
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let x = |t: f64| LEFT + pw * t / t_max;
    let y = |v: f64| TOP + ph * (1.0 - v.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>"
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let yy = y(v);
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{yy:.2}\" x2=\"{LEFT}\" y2=\"{yy:.2}\" stroke=\"black\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{v:.2}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            yy + 4.0
        );
    }
    for k in 0..=5 {
        let t = t_max * k as f64 / 5.0;
        let xx = x(t);
        let _ = writeln!(
            s,
            "<line x1=\"{xx:.2}\" y1=\"{}\" x2=\"{xx:.2}\" y2=\"{}\" stroke=\"black\"/><text x=\"{xx:.2}\" y=\"{}\" text-anchor=\"middle\">{t:.3}</text>",
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0
        );
    }
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">t</text>", LEFT + pw / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">population</text>",
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let mut legend_y = TOP + 10.0;
    for rec in records {
        let step = rec.rows.len().div_ceil(MAX_POINTS).max(1);
        let last = rec.rows.len().saturating_sub(1);
        for (label, color, pick) in [
            ("Tr QS", "#1f4e9c", 0usize),
            ("Tr QT", "#c0392b", 1usize),
        ] {
            let mut pts = String::new();
            for (i, r) in rec.rows.iter().enumerate() {
                if i % step == 0 || i == last {
                    let v = if pick == 0 { r.tr_qs } else { r.tr_qt };
                    let _ = write!(pts, "{:.2},{:.2} ", x(r.t), y(v));
                }
            }
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{} points=\"{}\"/>",
                dash(rec.theory),
                pts.trim_end()
            );
            let lx = W - RIGHT + 15.0;
            let _ = writeln!(
                s,
                "<line x1=\"{lx}\" y1=\"{legend_y}\" x2=\"{}\" y2=\"{legend_y}\" stroke=\"{color}\" stroke-width=\"2\"{}/><text x=\"{}\" y=\"{}\">{label} {}</text>",
                lx + 30.0,
                dash(rec.theory),
                lx + 36.0,
                legend_y + 4.0,
                rec.theory
            );
            legend_y += 20.0;
        }
    }
    s.push_str("</svg>\n");
    s
}
