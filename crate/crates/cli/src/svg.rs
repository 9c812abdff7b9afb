//! Minimal self-contained SVG output: line/scatter plots and heatmaps.
//! No external renderer; everything is plain shapes and text.

use std::fmt::Write as _;

use anyhow::{bail, Result};

pub const W: f64 = 640.0;
pub const H: f64 = 440.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 36.0;
const MB: f64 = 52.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub label: String,
    pub color: String,
    pub points: bool,
}

impl Series {
    pub fn line(x: Vec<f64>, y: Vec<f64>, label: &str, color: &str) -> Self {
        Series {
            x,
            y,
            label: label.into(),
            color: color.into(),
            points: false,
        }
    }

    pub fn scatter(x: Vec<f64>, y: Vec<f64>, label: &str, color: &str) -> Self {
        Series {
            x,
            y,
            label: label.into(),
            color: color.into(),
            points: true,
        }
    }
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    } * mag;
    let start = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = start;
    while t <= hi + step * 1e-9 {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Line/scatter plot; `log_y` plots log10 of positive values.
pub fn line_plot(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    log_y: bool,
) -> Result<String> {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for (&x, &y) in s.x.iter().zip(&s.y) {
            if log_y && y <= 0.0 {
                continue;
            }
            xs.push(x);
            ys.push(if log_y { y.log10() } else { y });
        }
    }
    if xs.is_empty() {
        bail!("no plottable data for '{title}'");
    }
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let px = |x: f64| ML + (x - x0) / (x1 - x0).max(1e-300) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - y0) / (y1 - y0).max(1e-300) * (H - MT - MB);

    let mut out = header(title);
    // axes + ticks
    for t in nice_ticks(x0, x1, 6) {
        let x = px(t);
        let _ = writeln!(
            out,
            "<line x1='{x:.1}' y1='{:.1}' x2='{x:.1}' y2='{:.1}' stroke='#ddd'/>",
            MT,
            H - MB
        );
        let _ = writeln!(
            out,
            "<text x='{x:.1}' y='{:.1}' font-size='11' text-anchor='middle'>{}</text>",
            H - MB + 16.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(y0, y1, 6) {
        let y = py(t);
        let _ = writeln!(
            out,
            "<line x1='{:.1}' y1='{y:.1}' x2='{:.1}' y2='{y:.1}' stroke='#ddd'/>",
            ML,
            W - MR
        );
        let label = if log_y {
            format!("1e{}", fmt_tick(t))
        } else {
            fmt_tick(t)
        };
        let _ = writeln!(
            out,
            "<text x='{:.1}' y='{y:.1}' font-size='11' text-anchor='end' dy='4'>{label}</text>",
            ML - 6.0
        );
    }
    frame(&mut out, xlabel, ylabel);

    for s in series {
        let mut path = String::new();
        let mut started = false;
        for (&x, &y) in s.x.iter().zip(&s.y) {
            if log_y && y <= 0.0 {
                started = false;
                continue;
            }
            let yy = if log_y { y.log10() } else { y };
            let cmd = if started { 'L' } else { 'M' };
            let _ = write!(path, "{cmd}{:.2} {:.2} ", px(x), py(yy));
            started = true;
            if s.points {
                started = false;
            }
        }
        if s.points {
            for (&x, &y) in s.x.iter().zip(&s.y) {
                if log_y && y <= 0.0 {
                    continue;
                }
                let yy = if log_y { y.log10() } else { y };
                let _ = writeln!(
                    out,
                    "<circle cx='{:.2}' cy='{:.2}' r='3' fill='{}'/>",
                    px(x),
                    py(yy),
                    s.color
                );
            }
        } else {
            let _ = writeln!(
                out,
                "<path d='{path}' fill='none' stroke='{}' stroke-width='1.6'/>",
                s.color
            );
        }
    }
    // legend
    for (i, s) in series.iter().enumerate() {
        if s.label.is_empty() {
            continue;
        }
        let y = MT + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            "<line x1='{:.1}' y1='{y:.1}' x2='{:.1}' y2='{y:.1}' stroke='{}' stroke-width='2'/>",
            W - MR - 120.0,
            W - MR - 100.0,
            s.color
        );
        let _ = writeln!(
            out,
            "<text x='{:.1}' y='{y:.1}' font-size='11' dy='4'>{}</text>",
            W - MR - 94.0,
            s.label
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Heatmap of a phase-space field (values indexed [re][im]).
pub fn heatmap(
    title: &str,
    re: &[f64],
    im: &[f64],
    values: &dyn Fn(usize, usize) -> f64,
    diverging: bool,
) -> Result<String> {
    let n_re = re.len();
    let n_im = im.len();
    if n_re < 2 || n_im < 2 {
        bail!("no plottable field for '{title}'");
    }
    let mut vmax = 0.0f64;
    for i in 0..n_re {
        for j in 0..n_im {
            vmax = vmax.max(values(i, j).abs());
        }
    }
    let vmax = vmax.max(1e-300);
    let px = |i: usize| ML + i as f64 / (n_re - 1) as f64 * (W - ML - MR);
    let py = |j: usize| H - MB - j as f64 / (n_im - 1) as f64 * (H - MT - MB);
    let cw = (W - ML - MR) / (n_re - 1) as f64;
    let ch = (H - MT - MB) / (n_im - 1) as f64;

    let mut out = header(title);
    for i in 0..n_re {
        for j in 0..n_im {
            let v = values(i, j);
            let color = if diverging {
                diverging_color(v / vmax)
            } else {
                sequential_color((v / vmax).clamp(0.0, 1.0))
            };
            let _ = writeln!(
                out,
                "<rect x='{:.2}' y='{:.2}' width='{:.2}' height='{:.2}' fill='{color}'/>",
                px(i) - cw / 2.0,
                py(j) - ch / 2.0,
                cw + 0.3,
                ch + 0.3
            );
        }
    }
    // ticks from the coordinate ranges
    for t in nice_ticks(re[0], re[n_re - 1], 6) {
        let x = ML + (t - re[0]) / (re[n_re - 1] - re[0]) * (W - ML - MR);
        let _ = writeln!(
            out,
            "<text x='{x:.1}' y='{:.1}' font-size='11' text-anchor='middle'>{}</text>",
            H - MB + 16.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(im[0], im[n_im - 1], 6) {
        let y = H - MB - (t - im[0]) / (im[n_im - 1] - im[0]) * (H - MT - MB);
        let _ = writeln!(
            out,
            "<text x='{:.1}' y='{y:.1}' font-size='11' text-anchor='end' dy='4'>{}</text>",
            ML - 6.0,
            fmt_tick(t)
        );
    }
    frame(&mut out, "Re", "Im");
    out.push_str("</svg>\n");
    Ok(out)
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in v {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.04;
    (lo - pad, hi + pad)
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns='http://www.w3.org/2000/svg' width='{W}' height='{H}' \
         viewBox='0 0 {W} {H}' font-family='sans-serif'>\n\
         <rect width='{W}' height='{H}' fill='white'/>\n\
         <text x='{:.1}' y='22' font-size='14' text-anchor='middle'>{title}</text>\n",
        W / 2.0
    )
}

fn frame(out: &mut String, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        "<rect x='{ML}' y='{MT}' width='{:.1}' height='{:.1}' fill='none' stroke='#333'/>",
        W - ML - MR,
        H - MT - MB
    );
    let _ = writeln!(
        out,
        "<text x='{:.1}' y='{:.1}' font-size='12' text-anchor='middle'>{xlabel}</text>",
        ML + (W - ML - MR) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        out,
        "<text x='16' y='{:.1}' font-size='12' text-anchor='middle' transform='rotate(-90 16 {:.1})'>{ylabel}</text>",
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    );
}

fn sequential_color(t: f64) -> String {
    // dark blue -> teal -> yellow
    let anchors = [(68, 1, 84), (33, 145, 140), (253, 231, 37)];
    gradient(&anchors, t)
}

fn diverging_color(t: f64) -> String {
    // blue -> white -> red over [-1, 1]
    let anchors = [(33, 102, 172), (247, 247, 247), (178, 24, 43)];
    gradient(&anchors, (t + 1.0) / 2.0)
}

fn gradient(anchors: &[(u8, u8, u8)], t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (anchors.len() - 1) as f64;
    let i = (t.floor() as usize).min(anchors.len() - 2);
    let f = t - i as f64;
    let (r0, g0, b0) = anchors[i];
    let (r1, g1, b1) = anchors[i + 1];
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(r0, r1), mix(g0, g1), mix(b0, b1))
}
