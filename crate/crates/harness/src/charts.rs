//! Static SVG charts. Every chart carries its data table in a `<metadata>`
//! element, formatted exactly like the report CSV.

use crate::compare::{num, seed_dirs, ComparisonReport, MetricRow, HEADLINE, SPEED_BINS};
use anyhow::{Context, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 2] = ["#7f7f7f", "#1f77b4"];
const SERIES: [&str; 2] = ["baseline", "model"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(title: &str, data: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<metadata><![CDATA[\n{data}]]></metadata>");
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    s
}

fn nice_max(v: f64) -> f64 {
    if !(v > 0.0) || !v.is_finite() {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * mag >= v {
            return m * mag;
        }
    }
    10.0 * mag
}

fn axes(s: &mut String, ymax: f64, ylabel: &str) {
    let (x0, y0, y1) = (LEFT, H - BOTTOM, TOP);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#, W - RIGHT);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        let y = y0 - (y0 - y1) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, trim(v));
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn trim(v: f64) -> String {
    let t = format!("{v:.3}");
    t.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn legend(s: &mut String) {
    for (k, name) in SERIES.iter().enumerate() {
        let x = W - RIGHT - 160.0 + 80.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{x}" y="34" width="10" height="10" fill="{}"/>"#, COLORS[k]);
        let _ = writeln!(s, r#"<text x="{}" y="43">{name}</text>"#, x + 14.0);
    }
}

fn y_of(v: f64, ymax: f64) -> f64 {
    (H - BOTTOM) - (H - BOTTOM - TOP) * (v.max(0.0) / ymax)
}

/// Two bars for one report row.
pub fn bar_chart(row: &MetricRow) -> String {
    let data = format!(
        "series,value\nbaseline,{}\nmodel,{}\npercent_change,{}\np_value,{}\n",
        num(row.baseline_mean),
        num(row.model_mean),
        num(row.percent_change),
        num(row.p_value)
    );
    let mut s = open(&row.metric, &data);
    let ymax = nice_max(row.baseline_mean.max(row.model_mean));
    axes(&mut s, ymax, &row.unit);
    let slot = (W - LEFT - RIGHT) / 2.0;
    for (k, v) in [row.baseline_mean, row.model_mean].into_iter().enumerate() {
        let x = LEFT + slot * k as f64 + slot * 0.25;
        let y = y_of(v, ymax);
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{}</title></rect>"#,
            slot * 0.5,
            (H - BOTTOM) - y,
            COLORS[k],
            num(v)
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, x + slot * 0.25, y - 4.0, trim(v));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, x + slot * 0.25, H - BOTTOM + 18.0, SERIES[k]);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">change {:+.1}%, p = {:.2e}</text>"#,
        W / 2.0,
        H - 14.0,
        row.percent_change,
        row.p_value
    );
    s.push_str("</svg>\n");
    s
}

/// Grouped bars over the speed bins. Empty bins draw zero-height bars.
pub fn speed_bin_chart(rows: &[&MetricRow]) -> String {
    let mut data = String::from("bin,baseline,model\n");
    for r in rows {
        let _ = writeln!(data, "{},{},{}", r.metric, num(r.baseline_mean), num(r.model_mean));
    }
    let mut s = open("time in speed bins", &data);
    let ymax = nice_max(rows.iter().map(|r| r.baseline_mean.max(r.model_mean)).fold(0.0, f64::max));
    axes(&mut s, ymax, "s per vehicle");
    legend(&mut s);
    let slot = (W - LEFT - RIGHT) / rows.len().max(1) as f64;
    for (i, r) in rows.iter().enumerate() {
        for (k, v) in [r.baseline_mean, r.model_mean].into_iter().enumerate() {
            let x = LEFT + slot * i as f64 + slot * (0.1 + 0.4 * k as f64);
            let y = y_of(v, ymax);
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{}</title></rect>"#,
                slot * 0.4,
                (H - BOTTOM) - y,
                COLORS[k],
                num(v)
            );
        }
        let label = r.metric.trim_start_matches("time_").replace('_', "-");
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{label}</text>"#, LEFT + slot * (i as f64 + 0.5), H - BOTTOM + 18.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Mean per-vehicle stopped time at each decision boundary, averaged over seeds.
pub fn stopped_series(dir: &Path) -> Result<Vec<(f64, f64)>> {
    let mut by_time: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for seed in seed_dirs(dir)? {
        let path = seed.join("timeline.csv");
        let mut r = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
        let h = r.headers()?.clone();
        let ti = h.iter().position(|c| c == "time").context("timeline has no time column")?;
        let si = h.iter().position(|c| c == "mean_stopped").context("timeline has no mean_stopped column")?;
        for rec in r.records() {
            let rec = rec?;
            let t: f64 = rec[ti].parse()?;
            let v: f64 = rec[si].parse()?;
            let e = by_time.entry((t * 1000.0).round() as u64).or_insert((t, 0.0, 0));
            e.1 += v;
            e.2 += 1;
        }
    }
    Ok(by_time.into_values().map(|(t, sum, n)| (t, sum / n as f64)).collect())
}

pub fn timeline_chart(baseline: &[(f64, f64)], model: &[(f64, f64)]) -> String {
    let mut data = String::from("series,time,mean_stopped\n");
    for (name, pts) in SERIES.iter().zip([baseline, model]) {
        for (t, v) in pts {
            let _ = writeln!(data, "{name},{},{}", num(*t), num(*v));
        }
    }
    let mut s = open("stopped time over the episode", &data);
    let ymax = nice_max(baseline.iter().chain(model).map(|p| p.1).fold(0.0, f64::max));
    let tmax = baseline.iter().chain(model).map(|p| p.0).fold(0.0, f64::max).max(1.0);
    axes(&mut s, ymax, "stopped s per vehicle");
    legend(&mut s);
    let x_of = |t: f64| LEFT + (W - LEFT - RIGHT) * t / tmax;
    for (k, pts) in [baseline, model].into_iter().enumerate() {
        let mut d = format!("{:.2},{:.2}", x_of(0.0), y_of(0.0, ymax));
        for (t, v) in pts {
            let _ = write!(d, " {:.2},{:.2}", x_of(*t), y_of(*v, ymax));
        }
        let _ = writeln!(s, r#"<polyline points="{d}" fill="none" stroke="{}" stroke-width="2"/>"#, COLORS[k]);
    }
    for k in 0..=4 {
        let t = tmax * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, x_of(t), H - BOTTOM + 18.0, trim(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">simulated time (s)</text>"#, W / 2.0, H - 14.0);
    s.push_str("</svg>\n");
    s
}

/// One bar chart per headline metric plus the speed-bin and stopped-time
/// composites. Returns the written paths.
pub fn render_charts(report: &ComparisonReport, baseline_dir: &Path, model_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    let mut put = |name: String, svg: String| -> Result<()> {
        let p = out.join(name);
        std::fs::write(&p, svg).with_context(|| format!("writing {}", p.display()))?;
        written.push(p);
        Ok(())
    };
    for m in HEADLINE {
        if let Some(row) = report.get(m.name) {
            put(format!("{}.svg", m.name), bar_chart(row))?;
        }
    }
    let bins: Vec<&MetricRow> = SPEED_BINS.iter().filter_map(|m| report.get(m.name)).collect();
    put("speed_bins.svg".into(), speed_bin_chart(&bins))?;
    let b = stopped_series(baseline_dir)?;
    let m = stopped_series(model_dir)?;
    put("stopped_timeline.svg".into(), timeline_chart(&b, &m))?;
    Ok(written)
}

/// The CSV table embedded in an SVG written by this module.
pub fn embedded_data(svg: &str) -> Option<&str> {
    let start = svg.find("<![CDATA[")? + "<![CDATA[".len();
    let end = svg[start..].find("]]>")? + start;
    Some(svg[start..end].trim_start_matches('\n'))
}
