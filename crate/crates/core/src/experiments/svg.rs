//! Self-contained SVG line plots built from result rows.

use super::ResultRow;
use std::collections::BTreeMap;
use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Mean/std of the empirical values and mean of the analytic values per x.
struct Series {
    x: Vec<f64>,
    mean: Vec<f64>,
    std: Vec<f64>,
    analytic: Vec<Option<f64>>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn collect(rows: &[ResultRow], metric: &str) -> BTreeMap<String, Series> {
    let mut grouped: BTreeMap<String, BTreeMap<u64, (f64, Vec<f64>, Vec<f64>)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let e = grouped.entry(r.method.clone()).or_default().entry(r.param.to_bits()).or_insert((r.param, vec![], vec![]));
        if let Some(v) = r.value {
            e.1.push(v);
        }
        if let Some(a) = r.analytic {
            e.2.push(a);
        }
    }
    grouped
        .into_iter()
        .map(|(method, by_x)| {
            let mut pts: Vec<_> = by_x.into_values().collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut s = Series { x: vec![], mean: vec![], std: vec![], analytic: vec![] };
            for (x, vals, an) in pts {
                let (m, sd) = if vals.is_empty() { (f64::NAN, 0.0) } else { mean_std(&vals) };
                s.x.push(x);
                s.mean.push(m);
                s.std.push(sd);
                s.analytic.push(if an.is_empty() { None } else { Some(mean_std(&an).0) });
            }
            (method, s)
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Plots `metric` against the param column: one colour per method, mean line,
/// shaded ±2 std band over seeds and a dashed analytic overlay.
pub fn plot(rows: &[ResultRow], metric: &str, x_label: &str, title: &str) -> String {
    let series = collect(rows, metric);
    let xs: Vec<f64> = series.values().flat_map(|s| s.x.iter().copied()).collect();
    let log_x = !xs.is_empty() && xs.iter().all(|&x| x > 0.0) && {
        let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &x| (a.min(x), b.max(x)));
        hi / lo > 100.0
    };
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let (mut x0, mut x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(tx(x)), b.max(tx(x))));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let mut ys: Vec<f64> = vec![];
    for s in series.values() {
        for i in 0..s.x.len() {
            if s.mean[i].is_finite() {
                ys.push(s.mean[i] - 2.0 * s.std[i]);
                ys.push(s.mean[i] + 2.0 * s.std[i]);
            }
            if let Some(a) = s.analytic[i].filter(|a| a.is_finite()) {
                ys.push(a);
            }
        }
    }
    let (mut y0, mut y1) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.05;
        y1 += 0.05;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (tx(x) - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(out, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let yv = y0 + t * (y1 - y0);
        let y = py(yv);
        let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_tick(yv));
        let xv = x0 + t * (x1 - x0);
        let x = LEFT + t * pw;
        let label = if log_x { fmt_tick(10f64.powf(xv)) } else { fmt_tick(xv) };
        let _ = writeln!(out, r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#eee"/>"##, TOP + ph);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, TOP + ph + 18.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0, escape(x_label));
    let _ = writeln!(out, r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#, TOP + ph / 2.0, TOP + ph / 2.0, escape(metric));

    for (idx, (method, s)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let ok: Vec<usize> = (0..s.x.len()).filter(|&i| s.mean[i].is_finite()).collect();
        if !ok.is_empty() {
            let mut band = String::new();
            for &i in &ok {
                let _ = write!(band, "{:.2},{:.2} ", px(s.x[i]), py(s.mean[i] + 2.0 * s.std[i]));
            }
            for &i in ok.iter().rev() {
                let _ = write!(band, "{:.2},{:.2} ", px(s.x[i]), py(s.mean[i] - 2.0 * s.std[i]));
            }
            let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, band.trim_end());
            let line: Vec<String> = ok.iter().map(|&i| format!("{:.2},{:.2}", px(s.x[i]), py(s.mean[i]))).collect();
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        }
        let an: Vec<String> = (0..s.x.len())
            .filter_map(|i| s.analytic[i].filter(|a| a.is_finite()).map(|a| format!("{:.2},{:.2}", px(s.x[i]), py(a))))
            .collect();
        if !an.is_empty() {
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="6 4"/>"#, an.join(" "));
        }
        let ly = TOP + 14.0 + 20.0 * idx as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 22.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 28.0, ly + 4.0, escape(method));
    }
    let ly = TOP + 14.0 + 20.0 * series.len() as f64 + 10.0;
    let lx = LEFT + pw + 14.0;
    let _ = writeln!(out, r##"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="#444" stroke-dasharray="6 4"/>"##, lx + 22.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}">analytic</text>"#, lx + 28.0, ly + 4.0);
    out.push_str("</svg>\n");
    out
}
