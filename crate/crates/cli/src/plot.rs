//! Grayscale SVG heatmaps of grid fields.

use std::fmt::Write;

use pinn::GridField;

const PLOT_W: f64 = 480.0;
const PLOT_H: f64 = 360.0;
const MARGIN: f64 = 60.0;

/// Gray level in `[0, 1]` of `v` on the range `[lo, hi]`: black at the
/// minimum, white at the maximum, mid-gray for a constant field.
pub fn gray(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

/// One rectangle per cell, axis 0 horizontal and axis 1 pointing up.
/// Non-finite cells are left unfilled and do not affect the gray scale.
pub fn render_svg(field: &GridField, labels: [&str; 2], title: &str) -> String {
    let finite = field.values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let (n0, n1) = field.shape;
    let cw = PLOT_W / n0 as f64;
    let ch = PLOT_H / n1 as f64;
    let width = PLOT_W + 2.0 * MARGIN;
    let height = PLOT_H + 2.0 * MARGIN;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges" stroke="none">"#);
    for i in 0..n0 {
        for j in 0..n1 {
            let v = field.get(i, j);
            let x = MARGIN + i as f64 * cw;
            let y = MARGIN + PLOT_H - (j + 1) as f64 * ch;
            let fill = if v.is_finite() {
                let g = (255.0 * gray(v, lo, hi)).round() as u8;
                format!("rgb({g},{g},{g})")
            } else {
                "none".to_string()
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{cw:.3}" height="{ch:.3}" fill="{fill}"/>"#
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>"#
    );
    let text = |s: &mut String, x: f64, y: f64, anchor: &str, body: String| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{}</text>"#,
            escape(&body)
        );
    };
    let [(a0, a1), (b0, b1)] = field.ranges;
    let bottom = MARGIN + PLOT_H;
    text(&mut s, MARGIN, bottom + 16.0, "start", format!("{a0}"));
    text(
        &mut s,
        MARGIN + PLOT_W,
        bottom + 16.0,
        "end",
        format!("{a1}"),
    );
    text(
        &mut s,
        MARGIN + PLOT_W / 2.0,
        bottom + 36.0,
        "middle",
        labels[0].to_string(),
    );
    text(&mut s, MARGIN - 6.0, bottom, "end", format!("{b0}"));
    text(&mut s, MARGIN - 6.0, MARGIN + 12.0, "end", format!("{b1}"));
    text(
        &mut s,
        MARGIN - 24.0,
        MARGIN + PLOT_H / 2.0,
        "end",
        labels[1].to_string(),
    );
    text(
        &mut s,
        MARGIN + PLOT_W / 2.0,
        MARGIN - 20.0,
        "middle",
        format!("{title}  [min {lo:.4e}, max {hi:.4e}]"),
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_scale_ends_and_degenerate_range() {
        assert_eq!(gray(1.0, 1.0, 3.0), 0.0);
        assert_eq!(gray(3.0, 1.0, 3.0), 1.0);
        assert_eq!(gray(2.0, 1.0, 3.0), 0.5);
        assert_eq!(gray(7.0, 7.0, 7.0), 0.5);
    }

    #[test]
    fn one_rect_per_cell() {
        let f = GridField::from_fn((3, 5), [(0.0, 1.0), (0.0, 2.0)], |x, t| x + t);
        let svg = render_svg(&f, ["x", "t"], "f");
        // Cells plus the frame.
        assert_eq!(svg.matches("<rect").count(), 3 * 5 + 1);
        assert!(svg.contains("rgb(0,0,0)") && svg.contains("rgb(255,255,255)"));
        assert!(svg.contains(">t</text>"));
    }
}
