//! Static SVG renderings. Output depends only on the inputs, with every
//! coordinate printed at fixed precision.

use std::fmt::Write;

use crate::diagnostics::{CalibrationBin, LrCurve};
use crate::explain::{BeeswarmPoint, FeatureRanking};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Canvas {
    out: String,
    x_range: (f64, f64),
    y_range: (f64, f64),
    height: f64,
    left: f64,
}

impl Canvas {
    fn new(title: &str, x_range: (f64, f64), y_range: (f64, f64), height: f64, left: f64) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH:.0} {height:.0}\">"
        );
        let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
            WIDTH / 2.0,
            escape(title)
        );
        Self {
            out,
            x_range,
            y_range,
            height,
            left,
        }
    }

    fn sx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.left + (x - lo) / (hi - lo) * (WIDTH - self.left - MARGIN / 2.0)
    }

    fn sy(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.height - MARGIN - (y - lo) / (hi - lo) * (self.height - 1.5 * MARGIN)
    }

    fn axes(&mut self, x_label: &str, y_label: &str, x_ticks: &[f64], y_ticks: &[f64]) {
        let (x0, x1) = (self.sx(self.x_range.0), self.sx(self.x_range.1));
        let (y0, y1) = (self.sy(self.y_range.0), self.sy(self.y_range.1));
        let _ = writeln!(
            self.out,
            "<path d=\"M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}\" fill=\"none\" stroke=\"black\"/>"
        );
        for &t in x_ticks {
            let x = self.sx(t);
            let _ = writeln!(
                self.out,
                "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                y0 + 16.0,
                tick_label(t)
            );
        }
        for &t in y_ticks {
            let y = self.sy(t);
            let _ = writeln!(
                self.out,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                x0 - 6.0,
                y + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            self.out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
            (x0 + x1) / 2.0,
            self.height - 14.0,
            escape(x_label)
        );
        let ym = (y0 + y1) / 2.0;
        let _ = writeln!(
            self.out,
            "<text x=\"16\" y=\"{ym:.2}\" transform=\"rotate(-90 16 {ym:.2})\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
            escape(y_label)
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, dashed: bool) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, self.sx(x), self.sy(y));
        }
        let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(
            self.out,
            "<path d=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"{dash}/>",
            d.trim_end()
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r:.1}\" fill=\"{fill}\"/>",
            self.sx(x),
            self.sy(y)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn tick_label(t: f64) -> String {
    let s = format!("{t:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Observed rate against mean predicted probability per bin, with the
/// identity diagonal.
pub fn calibration_svg(bins: &[CalibrationBin]) -> String {
    let mut c = Canvas::new("Calibration curve", (0.0, 1.0), (0.0, 1.0), HEIGHT, MARGIN);
    let grid = ticks(0.0, 1.0, 5);
    c.axes("Mean predicted probability", "Observed positive rate", &grid, &grid);
    c.polyline(&[(0.0, 0.0), (1.0, 1.0)], "gray", true);
    let pts: Vec<(f64, f64)> = bins.iter().map(|b| (b.mean_predicted, b.observed_rate)).collect();
    c.polyline(&pts, "steelblue", false);
    for &(x, y) in &pts {
        c.circle(x, y, 3.5, "steelblue");
    }
    c.finish()
}

/// Finite positive likelihood ratios across thresholds; the maximizing
/// threshold is marked.
pub fn lr_svg(curve: &LrCurve) -> String {
    let finite: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| !p.infinite)
        .map(|p| (p.threshold, p.lr_positive))
        .collect();
    let y_max = finite.iter().map(|p| p.1).fold(1.0f64, f64::max);
    let y_max = (y_max * 1.1).ceil().max(2.0);
    let mut c = Canvas::new("Positive likelihood ratio", (0.0, 1.0), (0.0, y_max), HEIGHT, MARGIN);
    c.axes(
        "Decision threshold",
        "LR+",
        &ticks(0.0, 1.0, 5),
        &ticks(0.0, y_max, 4),
    );
    c.polyline(&[(0.0, 1.0), (1.0, 1.0)], "gray", true);
    c.polyline(&finite, "darkred", false);
    if let (Some(t), Some(lr)) = (curve.argmax_threshold, curve.max_lr) {
        c.circle(t, lr, 5.0, "orange");
    }
    c.finish()
}

fn value_colour(frac: f64) -> String {
    let r = (40.0 + 215.0 * frac).round() as u8;
    let b = (255.0 - 215.0 * frac).round() as u8;
    format!("#{r:02x}30{b:02x}")
}

/// Summary plot: one lane per ranked feature (top to bottom in ranking
/// order), attribution on the x axis, colour from the feature value rank.
pub fn beeswarm_svg(points: &[BeeswarmPoint], ranking: &FeatureRanking) -> String {
    let lanes = ranking.features.len().max(1);
    let height = (MARGIN * 2.0 + 28.0 * lanes as f64).max(200.0);
    let max_abs = points
        .iter()
        .map(|p| p.attribution.abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let mut c = Canvas::new("Feature attributions", (-max_abs, max_abs), (0.0, lanes as f64), height, 180.0);
    c.axes("Attribution", "", &ticks(-max_abs, max_abs, 4), &[]);
    c.polyline(&[(0.0, 0.0), (0.0, lanes as f64)], "gray", true);
    for (lane, ranked) in ranking.features.iter().enumerate() {
        let y_mid = lanes as f64 - lane as f64 - 0.5;
        let _ = writeln!(
            c.out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" class=\"lane\">{}</text>",
            c.left - 8.0,
            c.sy(y_mid) + 4.0,
            escape(&ranked.feature)
        );
        let mut lane_pts: Vec<&BeeswarmPoint> = points.iter().filter(|p| p.feature == ranked.feature).collect();
        lane_pts.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.row.cmp(&b.row)));
        let n = lane_pts.len().max(2) - 1;
        let mut ordered: Vec<(usize, &BeeswarmPoint)> = lane_pts.into_iter().enumerate().collect();
        ordered.sort_by_key(|(_, p)| p.row);
        for (rank, p) in ordered {
            // deterministic vertical spread from the row index
            let jitter = ((p.row as f64 * 0.618_033_988_749_895).fract() - 0.5) * 0.6;
            c.circle(p.attribution, y_mid + jitter, 2.0, &value_colour(rank as f64 / n as f64));
        }
    }
    c.finish()
}

/// Lane labels in drawing order, read back from a rendered beeswarm.
pub fn beeswarm_lanes(svg: &str) -> Vec<String> {
    svg.lines()
        .filter(|l| l.contains("class=\"lane\""))
        .filter_map(|l| {
            let start = l.find('>')? + 1;
            let end = l.rfind("</text>")?;
            Some(
                l[start..end]
                    .replace("&quot;", "\"")
                    .replace("&gt;", ">")
                    .replace("&lt;", "<")
                    .replace("&amp;", "&"),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::RankedFeature;

    #[test]
    fn calibration_plot_has_diagonal_and_points() {
        let bins = [
            CalibrationBin { mean_predicted: 0.2, observed_rate: 0.25, count: 5 },
            CalibrationBin { mean_predicted: 0.7, observed_rate: 0.6, count: 5 },
        ];
        let svg = calibration_svg(&bins);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg, calibration_svg(&bins));
    }

    #[test]
    fn lanes_follow_ranking() {
        let ranking = FeatureRanking {
            features: ["b<1", "a", "c"]
                .iter()
                .map(|n| RankedFeature { feature: n.to_string(), mean_abs: 0.1 })
                .collect(),
        };
        let points: Vec<BeeswarmPoint> = ["a", "b<1", "c"]
            .iter()
            .flat_map(|f| {
                (0..3).map(move |row| BeeswarmPoint {
                    feature: f.to_string(),
                    row,
                    value: row as f64,
                    attribution: 0.1 * row as f64 - 0.1,
                    raw_value: None,
                })
            })
            .collect();
        let svg = beeswarm_svg(&points, &ranking);
        assert_eq!(beeswarm_lanes(&svg), ["b<1", "a", "c"]);
        assert_eq!(svg.matches("<circle").count(), 9);
    }

    #[test]
    fn tick_labels_are_trimmed() {
        assert_eq!(tick_label(0.5), "0.5");
        assert_eq!(tick_label(1.0), "1");
        assert_eq!(tick_label(-0.0), "0");
    }
}
