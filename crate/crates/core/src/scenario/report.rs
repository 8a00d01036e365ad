//! `metrics.csv` and grouped-bar SVG charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{MetricsRow, ScenarioError, SweepFamily};
use crate::routing::PresetName;
use crate::Standard;

pub const CSV_HEADER: &str = "protocol,mac_variant,n_nodes,speed_mps,seed,throughput_Bps,e2ed_s,nrl,sent,delivered,control_tx,drops_queue,drops_noroute,collisions";

/// Writes through a temporary file and renames, so an aborted run never
/// leaves a truncated file at `path`.
fn write_atomic(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| ScenarioError::Invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

pub fn csv_string(rows: &[MetricsRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv_line());
        s.push('\n');
    }
    s
}

pub fn write_csv(rows: &[MetricsRow], path: &Path) -> Result<(), ScenarioError> {
    write_atomic(path, &csv_string(rows))
}

#[derive(Debug, Clone, Copy)]
enum Metric {
    Throughput,
    E2ed,
    Nrl,
}

impl Metric {
    const ALL: [Metric; 3] = [Metric::Throughput, Metric::E2ed, Metric::Nrl];

    fn name(self) -> &'static str {
        match self {
            Metric::Throughput => "throughput",
            Metric::E2ed => "e2ed",
            Metric::Nrl => "nrl",
        }
    }

    fn unit(self) -> &'static str {
        match self {
            Metric::Throughput => "bytes/s",
            Metric::E2ed => "s",
            Metric::Nrl => "control tx per delivery",
        }
    }

    fn value(self, r: &MetricsRow) -> Option<f64> {
        match self {
            Metric::Throughput => Some(r.throughput_bps),
            Metric::E2ed => r.e2ed_s,
            Metric::Nrl => r.nrl,
        }
    }
}

const PALETTE: [&str; 6] = [
    "#4e79a7", "#a0cbe8", "#f28e2b", "#ffbe7d", "#59a14f", "#8cd17d",
];

/// Seed-averaged value per (sweep point, protocol). Undefined cells are
/// left out of the mean; a point with none defined has no bar.
fn group_means(
    rows: &[&MetricsRow],
    family: SweepFamily,
    metric: Metric,
) -> BTreeMap<(u64, PresetName), f64> {
    let mut acc: BTreeMap<(u64, PresetName), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let x = match family {
            SweepFamily::Density => r.n_nodes as f64,
            SweepFamily::Mobility => r.speed_mps,
        };
        if let Some(v) = metric.value(r) {
            let e = acc.entry((x.to_bits(), r.protocol)).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn render_svg(
    title: &str,
    x_label: &str,
    unit: &str,
    points: &[f64],
    protocols: &[PresetName],
    means: &BTreeMap<(u64, PresetName), f64>,
) -> String {
    let (w, h) = (720.0, 420.0);
    let (left, right, top, bottom) = (70.0, 160.0, 40.0, 60.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let max = means.values().cloned().fold(0.0_f64, f64::max);
    let y_max = if max > 0.0 { max * 1.1 } else { 1.0 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{title}</text>"#,
        left + plot_w / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        top + plot_h
    );
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let y = top + plot_h - plot_h * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y:.1}" x2="{left}" y2="{y:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"##,
            left - 4.0,
            left - 6.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    let group_w = plot_w / points.len().max(1) as f64;
    let bar_w = group_w * 0.8 / protocols.len().max(1) as f64;
    for (gi, &x) in points.iter().enumerate() {
        let gx = left + gi as f64 * group_w + group_w * 0.1;
        for (pi, &p) in protocols.iter().enumerate() {
            if let Some(&v) = means.get(&(x.to_bits(), p)) {
                let bh = plot_h * v / y_max;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"><title>{p} {}: {v:.6}</title></rect>"#,
                    gx + pi as f64 * bar_w,
                    top + plot_h - bh,
                    bar_w,
                    bh,
                    PALETTE[pi % PALETTE.len()],
                    fmt_tick(x)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            left + (gi as f64 + 0.5) * group_w,
            top + plot_h + 18.0,
            fmt_tick(x)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        left + plot_w / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{unit}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for (pi, p) in protocols.iter().enumerate() {
        let y = top + 10.0 + pi as f64 * 20.0;
        let x = left + plot_w + 20.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{p}</text>"#,
            PALETTE[pi % PALETTE.len()],
            x + 18.0,
            y + 10.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e9 {
        format!("{}", v as i64)
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

/// Writes `metrics.csv` and one chart per metric, sweep family and MAC
/// variant present in `rows`. Returns the paths written.
pub fn emit_report(
    rows: &[MetricsRow],
    families: &[SweepFamily],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ScenarioError> {
    if rows.is_empty() {
        return Err(ScenarioError::Invalid("no rows to report".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let csv = out_dir.join("metrics.csv");
    write_csv(rows, &csv)?;
    written.push(csv);

    let mut macs: Vec<Standard> = rows.iter().map(|r| r.mac_variant).collect();
    macs.sort();
    macs.dedup();
    for &family in families {
        for &mac in &macs {
            let subset: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.mac_variant == mac && SweepFamily::classify(r).contains(&family))
                .collect();
            if subset.is_empty() {
                continue;
            }
            let mut points: Vec<f64> = subset
                .iter()
                .map(|r| match family {
                    SweepFamily::Density => r.n_nodes as f64,
                    SweepFamily::Mobility => r.speed_mps,
                })
                .collect();
            points.sort_by(f64::total_cmp);
            points.dedup();
            let mut protocols: Vec<PresetName> = subset.iter().map(|r| r.protocol).collect();
            protocols.sort();
            protocols.dedup();
            let x_label = match family {
                SweepFamily::Density => "nodes",
                SweepFamily::Mobility => "speed (m/s)",
            };
            let mac_tag = match mac {
                Standard::Dot11 => "80211",
                Standard::Dot11p => "80211p",
            };
            for metric in Metric::ALL {
                let means = group_means(&subset, family, metric);
                let title = format!("{} vs {} ({mac})", metric.name(), x_label);
                let svg = render_svg(&title, x_label, metric.unit(), &points, &protocols, &means);
                let path = out_dir.join(format!("{}_{}_{}.svg", metric.name(), family, mac_tag));
                write_atomic(&path, &svg)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
