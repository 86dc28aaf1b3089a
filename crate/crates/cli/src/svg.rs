//! Static SVG figures rendered from a finished report.

use std::fmt::Write as _;

use hmdim_core::metrics::RocCurve;
use hmdim_core::pipeline::{CvReport, FeatureImportance};

const W: f64 = 480.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    out: String,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            width / 2.0,
            escape(title)
        );
        Self { out, width, height }
    }

    fn plot_w(&self) -> f64 {
        self.width - 2.0 * MARGIN
    }

    fn plot_h(&self) -> f64 {
        self.height - 2.0 * MARGIN
    }

    /// Map data in [x0,x1]×[y0,y1] to pixels.
    fn px(&self, x: f64, (x0, x1): (f64, f64)) -> f64 {
        MARGIN + (x - x0) / (x1 - x0) * self.plot_w()
    }

    fn py(&self, y: f64, (y0, y1): (f64, f64)) -> f64 {
        self.height - MARGIN - (y - y0) / (y1 - y0) * self.plot_h()
    }

    fn axes(&mut self, xr: (f64, f64), yr: (f64, f64), xlabel: &str, ylabel: &str, ticks: usize) {
        let (l, r) = (MARGIN, self.width - MARGIN);
        let (t, b) = (MARGIN, self.height - MARGIN);
        let _ = writeln!(self.out, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
        for i in 0..=ticks {
            let f = i as f64 / ticks as f64;
            let xv = xr.0 + f * (xr.1 - xr.0);
            let yv = yr.0 + f * (yr.1 - yr.0);
            let x = self.px(xv, xr);
            let y = self.py(yv, yr);
            let _ = writeln!(self.out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"#, b + 16.0);
            let _ = writeln!(self.out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#, l - 6.0, y + 4.0);
        }
        let _ = writeln!(
            self.out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (l + r) / 2.0,
            self.height - 14.0,
            escape(xlabel)
        );
        let _ = writeln!(
            self.out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0,
            escape(ylabel)
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool) {
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let dash = if dashed { r#" stroke-dasharray="4 4""# } else { "" };
        let _ = writeln!(
            self.out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            coords.join(" ")
        );
    }

    fn legend(&mut self, entries: &[(String, &str)]) {
        let x = self.width - MARGIN - 150.0;
        let mut y = self.height - MARGIN - 14.0 * entries.len() as f64 - 6.0;
        for (label, color) in entries {
            let _ = writeln!(
                self.out,
                r#"<line x1="{x}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
                y - 4.0,
                x + 18.0,
                y - 4.0
            );
            let _ = writeln!(self.out, r#"<text x="{}" y="{y:.2}">{}</text>"#, x + 24.0, escape(label));
            y += 14.0;
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// One-vs-rest ROC curves of one seed, one line per class.
pub fn roc_svg(title: &str, curves: &[RocCurve]) -> String {
    let mut f = Frame::new(W, H, title);
    let unit = (0.0, 1.0);
    f.axes(unit, unit, "false positive rate", "true positive rate", 5);
    let diag = [(f.px(0.0, unit), f.py(0.0, unit)), (f.px(1.0, unit), f.py(1.0, unit))];
    f.polyline(&diag, "#999999", true);
    let mut legend = Vec::new();
    for c in curves {
        let color = COLORS[usize::from(c.class) % COLORS.len()];
        let pts: Vec<(f64, f64)> = c.points.iter().map(|p| (f.px(p.fpr, unit), f.py(p.tpr, unit))).collect();
        f.polyline(&pts, color, false);
        legend.push((format!("{}D (AUC = {:.3})", c.class, c.auc), color));
    }
    f.legend(&legend);
    f.finish()
}

/// Per-fold cross-validation scores with the mean as a dashed line.
pub fn cv_svg(cv: &CvReport) -> String {
    let title = format!("{}-fold CV, {} (mean F1 = {:.3})", cv.k, cv.model, cv.mean_f1);
    let mut f = Frame::new(W, H, &title);
    let lo = cv.fold_f1.iter().copied().fold(1.0f64, f64::min);
    let y0 = ((lo - 0.05) * 20.0).floor().max(0.0) / 20.0;
    let yr = (y0, 1.0);
    let xr = (0.5, cv.k as f64 + 0.5);
    f.axes(xr, yr, "fold", "macro F1", 4);
    let pts: Vec<(f64, f64)> =
        cv.fold_f1.iter().enumerate().map(|(i, &v)| (f.px(i as f64 + 1.0, xr), f.py(v, yr))).collect();
    f.polyline(&pts, COLORS[0], false);
    for (x, y) in &pts {
        let _ = writeln!(f.out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, COLORS[0]);
    }
    let mean = [(f.px(xr.0, xr), f.py(cv.mean_f1, yr)), (f.px(xr.1, xr), f.py(cv.mean_f1, yr))];
    f.polyline(&mean, COLORS[1], true);
    f.legend(&[("fold F1".into(), COLORS[0]), (format!("mean {:.3}", cv.mean_f1), COLORS[1])]);
    f.finish()
}

/// Horizontal bars, largest importance first.
pub fn importance_svg(importance: &[FeatureImportance]) -> String {
    let mut rows: Vec<&FeatureImportance> = importance.iter().collect();
    rows.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    let bar = 16.0;
    let height = 2.0 * MARGIN + bar * rows.len() as f64;
    let label_w = 190.0;
    let mut f = Frame::new(W + label_w, height, "feature importance");
    let max = rows.first().map_or(1.0, |r| r.importance).max(f64::MIN_POSITIVE);
    let span = W - MARGIN - 20.0;
    for (i, r) in rows.iter().enumerate() {
        let y = MARGIN + i as f64 * bar;
        let w = r.importance / max * span;
        let _ = writeln!(
            f.out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            label_w,
            y + bar * 0.75,
            escape(&r.feature)
        );
        let _ = writeln!(
            f.out,
            r#"<rect x="{:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="{}"/>"#,
            label_w + 6.0,
            y + 2.0,
            bar - 4.0,
            COLORS[2]
        );
        let _ = writeln!(
            f.out,
            r#"<text x="{:.2}" y="{:.2}">{:.3}</text>"#,
            label_w + 10.0 + w,
            y + bar * 0.75,
            r.importance
        );
    }
    f.finish()
}
