//! Minimal SVG charts: line and marker series on linear or log axes.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
    Dashed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub style: Style,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, color: &'static str, style: Style, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            color,
            style,
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_log: bool,
    pub y_log: bool,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            lo -= pad;
            hi += pad;
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        } else {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Axis { lo, hi, log }
    }

    fn unit(&self, v: f64) -> Option<f64> {
        let v = if self.log { v.log10() } else { v };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    /// Tick positions in data coordinates.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
            let mut out = Vec::new();
            let mut e = self.lo;
            while e <= self.hi + 1e-9 {
                out.push(10f64.powf(e));
                e += step;
            }
            return out;
        }
        let raw = (self.hi - self.lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let mut out = Vec::new();
        let mut t = (self.lo / step).ceil() * step;
        while t <= self.hi + 1e-9 * step {
            out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
            t += step;
        }
        out
    }
}

fn label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.log10().round() as i64)
    } else if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_log: false,
            y_log: false,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.x_log = true;
        self.y_log = true;
        self
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    /// Renders the chart; `meta` goes into a leading XML comment.
    pub fn render(&self, meta: &str) -> String {
        let pts = || self.series.iter().flat_map(|s| s.points.iter());
        let ax = Axis::fit(pts().map(|p| p.0), self.x_log);
        let ay = Axis::fit(pts().map(|p| p.1), self.y_log);
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |v: f64| ax.unit(v).map(|u| LEFT + u * pw);
        let sy = |v: f64| ay.unit(v).map(|u| TOP + (1.0 - u) * ph);

        let mut o = String::new();
        let _ = writeln!(o, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">");
        let _ = writeln!(o, "<!-- {} -->", esc(meta).replace("--", "- -"));
        let _ = writeln!(o, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        let _ = writeln!(o, "<text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>", LEFT + pw / 2.0, esc(&self.title));
        let _ = writeln!(o, "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>");
        for t in ax.ticks() {
            if let Some(x) = sx(t) {
                let _ = writeln!(o, "<line x1=\"{x:.2}\" y1=\"{TOP}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#e0e0e0\"/>", TOP + ph);
                let _ = writeln!(o, "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", TOP + ph + 16.0, label(t, ax.log));
            }
        }
        for t in ay.ticks() {
            if let Some(y) = sy(t) {
                let _ = writeln!(o, "<line x1=\"{LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#e0e0e0\"/>", LEFT + pw);
                let _ = writeln!(o, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>", LEFT - 6.0, y + 4.0, label(t, ay.log));
            }
        }
        let _ = writeln!(o, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", LEFT + pw / 2.0, H - 14.0, esc(&self.x_label));
        let _ = writeln!(
            o,
            "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );
        for (i, s) in self.series.iter().enumerate() {
            let mapped: Vec<(f64, f64)> = s.points.iter().filter_map(|&(x, y)| Some((sx(x)?, sy(y)?))).collect();
            match s.style {
                Style::Markers => {
                    for (x, y) in &mapped {
                        let _ = writeln!(o, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2\" fill=\"{}\"/>", s.color);
                    }
                }
                Style::Line | Style::Dashed => {
                    let path: Vec<String> = mapped.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let dash = if s.style == Style::Dashed { " stroke-dasharray=\"6 4\"" } else { "" };
                    let _ = writeln!(
                        o,
                        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{dash}/>",
                        path.join(" "),
                        s.color
                    );
                    for (x, y) in &mapped {
                        let _ = writeln!(o, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"1.5\" fill=\"{}\"/>", s.color);
                    }
                }
            }
            let ly = TOP + 12.0 + 18.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(o, "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"12\" height=\"4\" fill=\"{}\"/>", ly - 4.0, s.color);
            let _ = writeln!(o, "<text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>", lx + 18.0, esc(&s.label));
        }
        o.push_str("</svg>\n");
        o
    }
}

/// `(mu, omega)` scatter of a measure run, split by membership.
pub fn diophantine_slice(title: &str, inside: Vec<(f64, f64)>, outside: Vec<(f64, f64)>, x_label: &str, y_label: &str) -> Plot {
    Plot::new(title, x_label, y_label)
        .with(Series::new("in set", "#1f77b4", Style::Markers, inside))
        .with(Series::new("excluded", "#d62728", Style::Markers, outside))
}

/// Remainder after one step against the remainder before, with a slope-2 guide.
pub fn remainder_loglog(points: &[(f64, f64)]) -> Plot {
    let mut plot = Plot::new("KAM step remainder", "|P| before", "|P| after")
        .log_log()
        .with(Series::new("measured", "#1f77b4", Style::Line, points.to_vec()));
    if let Some(&(x0, y0)) = points.first() {
        let guide = points.iter().map(|&(x, _)| (x, y0 * (x / x0).powi(2))).collect();
        plot = plot.with(Series::new("slope 2", "#7f7f7f", Style::Dashed, guide));
    }
    plot
}

/// Real and imaginary parts of the Floquet exponent across a sweep.
pub fn floquet_sweep(mus: &[f64], re: &[f64], im: &[f64]) -> Plot {
    let zip = |v: &[f64]| mus.iter().copied().zip(v.iter().copied()).collect();
    Plot::new("Floquet exponents along the sweep", "mu", "exponent")
        .with(Series::new("max Re", "#d62728", Style::Line, zip(re)))
        .with(Series::new("max Im", "#1f77b4", Style::Line, zip(im)))
}
