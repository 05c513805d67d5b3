//! Minimal built-in SVG output for the two plots worth eyeballing directly:
//! the log-log rank-frequency curve and the transition-probability heatmap.
//! Everything else ships as CSV for external plotting tools.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

/// Log-log rank-frequency polyline with plain axes.
pub fn rank_frequency_svg(counts: &[u64]) -> String {
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let inner_w = WIDTH - 2.0 * MARGIN;
    let inner_h = HEIGHT - 2.0 * MARGIN;
    let _ = write!(
        svg,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
    );
    if !counts.is_empty() {
        let max_rank = (counts.len() as f64).log10().max(1e-9);
        let max_count = (counts[0].max(1) as f64).log10().max(1e-9);
        let mut points = String::new();
        for (i, &c) in counts.iter().enumerate() {
            let x = MARGIN + ((i + 1) as f64).log10() / max_rank * inner_w;
            let y = HEIGHT - MARGIN - (c.max(1) as f64).log10() / max_count * inner_h;
            let _ = write!(points, "{x:.2},{y:.2} ");
        }
        let _ = write!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
            points.trim_end()
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">log10 rank</text>"#,
        x = WIDTH / 2.0,
        y = HEIGHT - 12.0,
    );
    let _ = write!(
        svg,
        r#"<text x="14" y="{y}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {y})">log10 count</text>"#,
        y = HEIGHT / 2.0,
    );
    svg.push_str("</svg>");
    svg
}

/// Grayscale K x K transition heatmap; darker means more probable.
pub fn transition_heatmap_svg(probs: &[Vec<f64>]) -> String {
    let k = probs.len();
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    if k > 0 {
        let side = (WIDTH.min(HEIGHT) - 2.0 * MARGIN) / k as f64;
        for (i, row) in probs.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                let shade = (255.0 * (1.0 - p.clamp(0.0, 1.0))).round() as u8;
                let _ = write!(
                    svg,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{side:.2}" height="{side:.2}" fill="rgb({shade},{shade},{shade})"/>"#,
                    x = MARGIN + j as f64 * side,
                    y = MARGIN + i as f64 * side,
                );
            }
        }
    }
    svg.push_str("</svg>");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_frequency_svg_is_well_formed() {
        let svg = rank_frequency_svg(&[100, 50, 25, 12, 6]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>"));
        assert!(svg.contains("polyline"));
    }

    #[test]
    fn heatmap_draws_k_squared_cells() {
        let probs = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let svg = transition_heatmap_svg(&probs);
        assert_eq!(svg.matches("<rect").count(), 1 + 4); // background + cells
    }
}
