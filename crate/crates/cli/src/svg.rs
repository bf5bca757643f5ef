//! Minimal static SVG charts: box plots, strip plots, scatter plots with a
//! fitted line, and mean +- error-bar series.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Linear map from a data range onto a pixel range, padded 5% each side.
#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        let (lo, hi) = if !(lo.is_finite() && hi.is_finite()) {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = (hi - lo) * 0.05;
            (lo - pad, hi + pad)
        };
        Self { lo, hi, a, b }
    }

    fn at(&self, x: f64) -> f64 {
        self.a + (x - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }

    fn ticks(&self) -> Vec<f64> {
        let span = self.hi - self.lo;
        let raw = span / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        (first..)
            .map(|i| i as f64 * step)
            .take_while(|t| *t <= self.hi + 1e-12)
            .collect()
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            esc(title)
        )
        .unwrap();
        Self { out }
    }

    fn y_axis(&mut self, y: &Scale, label: &str) {
        let o = &mut self.out;
        writeln!(
            o,
            r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
            H - BOTTOM
        )
        .unwrap();
        for t in y.ticks() {
            let py = y.at(t);
            writeln!(
                o,
                r#"<line x1="{}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#,
                LEFT - 4.0
            )
            .unwrap();
            writeln!(
                o,
                r##"<line x1="{LEFT}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#eeeeee"/>"##,
                W - RIGHT
            )
            .unwrap();
            writeln!(
                o,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 7.0,
                py + 4.0,
                fmt_tick(t)
            )
            .unwrap();
        }
        writeln!(
            o,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0,
            esc(label)
        )
        .unwrap();
    }

    fn x_axis_numeric(&mut self, x: &Scale, label: &str) {
        let o = &mut self.out;
        let base = H - BOTTOM;
        writeln!(
            o,
            r#"<line x1="{LEFT}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
            W - RIGHT
        )
        .unwrap();
        for t in x.ticks() {
            let px = x.at(t);
            writeln!(
                o,
                r#"<line x1="{px:.2}" y1="{base}" x2="{px:.2}" y2="{}" stroke="black"/>"#,
                base + 4.0
            )
            .unwrap();
            writeln!(
                o,
                r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
                base + 18.0,
                fmt_tick(t)
            )
            .unwrap();
        }
        self.x_label(label);
    }

    fn x_axis_categories(&mut self, labels: &[String], label: &str) -> Vec<f64> {
        let base = H - BOTTOM;
        let slot = (W - LEFT - RIGHT) / labels.len().max(1) as f64;
        let centers: Vec<f64> = (0..labels.len())
            .map(|k| LEFT + slot * (k as f64 + 0.5))
            .collect();
        let o = &mut self.out;
        writeln!(
            o,
            r#"<line x1="{LEFT}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
            W - RIGHT
        )
        .unwrap();
        for (c, l) in centers.iter().zip(labels) {
            writeln!(
                o,
                r#"<text x="{c:.2}" y="{}" text-anchor="middle">{}</text>"#,
                base + 18.0,
                esc(l)
            )
            .unwrap();
        }
        self.x_label(label);
        centers
    }

    fn x_label(&mut self, label: &str) {
        writeln!(
            self.out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 16.0,
            esc(label)
        )
        .unwrap();
    }

    fn legend(&mut self, names: &[String]) {
        for (k, name) in names.iter().enumerate() {
            let y = TOP + 8.0 + 16.0 * k as f64;
            let color = PALETTE[k % PALETTE.len()];
            writeln!(
                self.out,
                r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
                W - RIGHT - 150.0,
                y - 9.0,
                W - RIGHT - 135.0,
                y,
                esc(name)
            )
            .unwrap();
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Type-7 quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One box per group: quartiles, median, whiskers to the most extreme
/// points within 1.5 IQR, outliers as dots.
pub fn box_plot(title: &str, y_label: &str, groups: &[(String, Vec<f64>)]) -> String {
    let mut c = Canvas::new(title);
    let (lo, hi) = range(groups.iter().flat_map(|(_, v)| v.iter().copied()));
    let y = Scale::new(lo, hi, H - BOTTOM, TOP);
    c.y_axis(&y, y_label);
    let labels: Vec<String> = groups
        .iter()
        .map(|(l, v)| format!("{l} (n={})", v.len()))
        .collect();
    let centers = c.x_axis_categories(&labels, "");
    let half = ((W - LEFT - RIGHT) / groups.len().max(1) as f64 * 0.25).min(40.0);
    for (k, ((_, values), cx)) in groups.iter().zip(&centers).enumerate() {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            continue;
        }
        v.sort_by(f64::total_cmp);
        let (q1, med, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let lo_w = v
            .iter()
            .copied()
            .find(|&x| x >= q1 - 1.5 * iqr)
            .unwrap_or(q1);
        let hi_w = v
            .iter()
            .rev()
            .copied()
            .find(|&x| x <= q3 + 1.5 * iqr)
            .unwrap_or(q3);
        let color = PALETTE[k % PALETTE.len()];
        let o = &mut c.out;
        writeln!(
            o,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y.at(lo_w),
            y.at(hi_w)
        )
        .unwrap();
        writeln!(
            o,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.35" stroke="black"/>"#,
            cx - half,
            y.at(q3),
            2.0 * half,
            (y.at(q1) - y.at(q3)).max(0.5)
        )
        .unwrap();
        writeln!(
            o,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y.at(med),
            cx + half,
            y.at(med)
        )
        .unwrap();
        for &x in v.iter().filter(|&&x| x < lo_w || x > hi_w) {
            writeln!(
                o,
                r#"<circle cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="black"/>"#,
                y.at(x)
            )
            .unwrap();
        }
    }
    c.finish()
}

/// Points per category, spread evenly across the slot, with a reference
/// line at `reference` (e.g. z = 0).
pub fn strip_plot(
    title: &str,
    y_label: &str,
    groups: &[(String, Vec<f64>)],
    reference: Option<f64>,
) -> String {
    let mut c = Canvas::new(title);
    let (mut lo, mut hi) = range(groups.iter().flat_map(|(_, v)| v.iter().copied()));
    if let Some(r) = reference {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let y = Scale::new(lo, hi, H - BOTTOM, TOP);
    c.y_axis(&y, y_label);
    let labels: Vec<String> = groups.iter().map(|(l, _)| l.clone()).collect();
    let centers = c.x_axis_categories(&labels, "");
    let half = (W - LEFT - RIGHT) / groups.len().max(1) as f64 * 0.35;
    if let Some(r) = reference {
        writeln!(
            c.out,
            r#"<line x1="{LEFT}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
            y.at(r),
            W - RIGHT,
            y.at(r)
        )
        .unwrap();
    }
    for (k, ((_, values), cx)) in groups.iter().zip(&centers).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let m = values.len().max(2) as f64 - 1.0;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let px = if values.len() == 1 {
                *cx
            } else {
                cx - half + 2.0 * half * i as f64 / m
            };
            writeln!(
                c.out,
                r#"<circle cx="{px:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                y.at(v)
            )
            .unwrap();
        }
    }
    c.finish()
}

/// Scatter of `(x, y)` with the least-squares line `y = a + b x` drawn over
/// the x range.
pub fn scatter(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64)],
    line: Option<(f64, f64)>,
) -> String {
    let mut c = Canvas::new(title);
    let (xl, xh) = range(points.iter().map(|p| p.0));
    let (yl, yh) = range(points.iter().map(|p| p.1));
    let x = Scale::new(xl, xh, LEFT, W - RIGHT);
    let y = Scale::new(yl, yh, H - BOTTOM, TOP);
    c.y_axis(&y, y_label);
    c.x_axis_numeric(&x, x_label);
    for &(px, py) in points {
        writeln!(
            c.out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.7"/>"#,
            x.at(px),
            y.at(py),
            PALETTE[0]
        )
        .unwrap();
    }
    if let (Some((a, b)), true) = (line, xl.is_finite()) {
        let (y0, y1) = (a + b * xl, a + b * xh);
        writeln!(
            c.out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
            x.at(xl),
            y.at(y0).clamp(TOP, H - BOTTOM),
            x.at(xh),
            y.at(y1).clamp(TOP, H - BOTTOM),
            PALETTE[1]
        )
        .unwrap();
    }
    c.finish()
}

/// Series of `(x, mean, standard error)` drawn as markers with error bars
/// joined by lines.
pub fn error_bars(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64, f64)>)],
) -> String {
    let mut c = Canvas::new(title);
    let all = || series.iter().flat_map(|(_, s)| s.iter());
    let (xl, xh) = range(all().map(|p| p.0));
    let (yl, _) = range(all().map(|p| p.1 - p.2));
    let (_, yh) = range(all().map(|p| p.1 + p.2));
    let x = Scale::new(xl, xh, LEFT, W - RIGHT);
    let y = Scale::new(yl, yh, H - BOTTOM, TOP);
    c.y_axis(&y, y_label);
    c.x_axis_numeric(&x, x_label);
    for (k, (_, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(px, m, _)| format!("{:.2},{:.2}", x.at(px), y.at(m)))
            .collect();
        writeln!(
            c.out,
            r#"<polyline points="{}" fill="none" stroke="{color}"/>"#,
            path.join(" ")
        )
        .unwrap();
        for &(px, m, se) in pts {
            let cx = x.at(px);
            writeln!(
                c.out,
                r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="{color}"/><circle cx="{cx:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                y.at(m - se),
                y.at(m + se),
                y.at(m)
            )
            .unwrap();
        }
    }
    let names: Vec<String> = series.iter().map(|(n, _)| n.clone()).collect();
    c.legend(&names);
    c.finish()
}
