//! Self-contained SVG rendering of a study report: a log-log error plot with
//! the fitted line, plus a panel with the a-priori bound ratios per eps.

use super::report::ConvergenceReport;
use std::io::Write;
use std::path::Path;

const W: f64 = 920.0;
const H: f64 = 520.0;

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let fx = (x - self.xmin) / (self.xmax - self.xmin).max(1e-300);
        let fy = (y - self.ymin) / (self.ymax - self.ymin).max(1e-300);
        (self.x0 + fx * self.w, self.y0 + self.h - fy * self.h)
    }
}

/// Write the study plot; fails on an empty report or unwritable path.
pub fn emit_plot(report: &ConvergenceReport, path: &Path) -> std::io::Result<()> {
    if report.records.is_empty() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "cannot plot a report with no records",
        ));
    }
    let pts: Vec<(f64, f64)> = report
        .records
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (r.eps_value.ln(), r.error.ln()))
        .collect();
    let (xmin, xmax) = pad(minmax(pts.iter().map(|p| p.0)));
    let (ymin, ymax) = pad(minmax(pts.iter().map(|p| p.1)));
    let err_frame = Frame {
        x0: 70.0,
        y0: 40.0,
        w: 440.0,
        h: 420.0,
        xmin,
        xmax,
        ymin,
        ymax,
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&axes(&err_frame, "ln eps", "ln rel L2 error"));

    // Fitted line behind the markers.
    if let Some(fit) = &report.fit {
        let (x1, y1) = err_frame.map(xmin, fit.slope * xmin + fit.intercept);
        let (x2, y2) = err_frame.map(xmax, fit.slope * xmax + fit.intercept);
        svg.push_str(&format!(
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"#888\" stroke-dasharray=\"6 4\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{:.0}\" y=\"{:.0}\" font-size=\"13\" fill=\"#444\">slope {:.3}</text>\n",
            err_frame.x0 + 10.0,
            err_frame.y0 + 18.0,
            fit.slope
        ));
    }
    for (x, y) in &pts {
        let (cx, cy) = err_frame.map(*x, *y);
        svg.push_str(&format!(
            "<circle class=\"pt\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4.5\" fill=\"#1f6fb2\"/>\n"
        ));
    }

    // Diagnostics panel: c1/c2 ratios per record.
    let diag = Frame {
        x0: 590.0,
        y0: 40.0,
        w: 300.0,
        h: 420.0,
        xmin,
        xmax,
        ymin: 0.0,
        ymax: 1.2,
    };
    svg.push_str(&axes(&diag, "ln eps", "a-priori ratios"));
    let (gx1, gy) = diag.map(xmin, 1.0);
    let (gx2, _) = diag.map(xmax, 1.0);
    svg.push_str(&format!(
        "<line x1=\"{gx1:.2}\" y1=\"{gy:.2}\" x2=\"{gx2:.2}\" y2=\"{gy:.2}\" stroke=\"#bbb\"/>\n"
    ));
    for r in &report.records {
        let x = r.eps_value.ln();
        let (c1x, c1y) = diag.map(x, r.c1_ratio.min(1.2));
        let (c2x, c2y) = diag.map(x, r.c2_ratio.min(1.2));
        svg.push_str(&format!(
            "<rect class=\"c1\" x=\"{:.2}\" y=\"{c1y:.2}\" width=\"7\" height=\"7\" fill=\"#b23a1f\"/>\n",
            c1x - 3.5
        ));
        svg.push_str(&format!(
            "<circle class=\"c2\" cx=\"{c2x:.2}\" cy=\"{c2y:.2}\" r=\"3.5\" fill=\"#2a9d4e\"/>\n"
        ));
    }
    svg.push_str(
        "<text x=\"600\" y=\"30\" font-size=\"13\" fill=\"#b23a1f\">squares: m|u|/|f|</text>\n",
    );
    svg.push_str(
        "<text x=\"760\" y=\"30\" font-size=\"13\" fill=\"#2a9d4e\">dots: energy bound</text>\n",
    );
    svg.push_str("</svg>\n");

    let mut f = std::fs::File::create(path)?;
    f.write_all(svg.as_bytes())
}

fn minmax(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn pad((lo, hi): (f64, f64)) -> (f64, f64) {
    let span = (hi - lo).max(1e-9);
    (lo - 0.08 * span, hi + 0.08 * span)
}

fn axes(f: &Frame, xlabel: &str, ylabel: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#333\"/>\n",
        f.x0, f.y0, f.w, f.h
    ));
    s.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{:.0}\" font-size=\"13\" fill=\"#333\">{xlabel}</text>\n",
        f.x0 + f.w / 2.0 - 20.0,
        f.y0 + f.h + 30.0
    ));
    s.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{:.0}\" font-size=\"13\" fill=\"#333\" transform=\"rotate(-90 {:.0} {:.0})\">{ylabel}</text>\n",
        f.x0 - 45.0,
        f.y0 + f.h / 2.0,
        f.x0 - 45.0,
        f.y0 + f.h / 2.0
    ));
    for j in 0..=4 {
        let xv = f.xmin + (f.xmax - f.xmin) * j as f64 / 4.0;
        let yv = f.ymin + (f.ymax - f.ymin) * j as f64 / 4.0;
        let (tx, _) = f.map(xv, f.ymin);
        let (_, ty) = f.map(f.xmin, yv);
        s.push_str(&format!(
            "<text x=\"{:.0}\" y=\"{:.0}\" font-size=\"10\" fill=\"#555\">{:.2}</text>\n",
            tx - 10.0,
            f.y0 + f.h + 14.0,
            xv
        ));
        s.push_str(&format!(
            "<text x=\"{:.0}\" y=\"{:.0}\" font-size=\"10\" fill=\"#555\">{:.2}</text>\n",
            f.x0 - 40.0,
            ty + 4.0,
            yv
        ));
    }
    s
}
