// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::accuracy::AccuracyCurve;
use crate::error::{io_err, Error, Result};

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;

pub fn curves_csv(curves: &[AccuracyCurve]) -> String {
    let mut out = String::from("class,offset,layer,accuracy,n\n");
    for c in curves {
        for (layer, p) in &c.points {
            writeln!(
                out,
                "{},{},{},{:.6},{}",
                c.class, c.offset, layer, p.accuracy, p.n
            )
            .unwrap();
        }
    }
    out
}

fn svg_chart(offset: i32, curves: &[&AccuracyCurve]) -> String {
    let layers: Vec<i32> = curves.iter().flat_map(|c| c.points.keys().copied()).collect();
    let lo = layers.iter().copied().min().unwrap_or(0) as f64;
    let hi = layers.iter().copied().max().unwrap_or(1) as f64;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |l: i32| MARGIN + (l as f64 - lo) / span * (WIDTH - 2.0 * MARGIN);
    let y = |a: f64| HEIGHT - MARGIN - a * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">offset i = {offset}</text>"#,
        WIDTH / 2.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        y(0.0),
        WIDTH - MARGIN,
        y(0.0)
    )
    .unwrap();
    writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{:.1}" x2="{MARGIN}" y2="{:.1}" stroke="black"/>"#,
        y(0.0),
        y(1.0)
    )
    .unwrap();
    for tick in [0.0, 0.5, 1.0] {
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{tick:.1}</text>"#,
            MARGIN - 4.0,
            y(tick) + 3.0
        )
        .unwrap();
    }
    for l in [lo as i32, hi as i32] {
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="10">{l}</text>"#,
            x(l),
            y(0.0) + 14.0
        )
        .unwrap();
    }
    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|(&l, p)| format!("{:.1},{:.1}", x(l), y(p.accuracy)))
            .collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 4.0,
            MARGIN + 14.0 * k as f64,
            super::html::escape(&c.class)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `curves.csv` and one `curves_offset_<i>.svg` per offset into
/// `dir`, returning the written paths.
pub fn export_curves(curves: &[AccuracyCurve], dir: &Path) -> Result<Vec<PathBuf>> {
    if curves.is_empty() {
        return Err(Error::Config("no accuracy curves to export".into()));
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let csv_path = dir.join("curves.csv");
    std::fs::write(&csv_path, curves_csv(curves)).map_err(io_err(&csv_path))?;
    written.push(csv_path);

    let mut by_offset: BTreeMap<i32, Vec<&AccuracyCurve>> = BTreeMap::new();
    for c in curves {
        by_offset.entry(c.offset).or_default().push(c);
    }
    for (offset, group) in by_offset {
        let path = dir.join(format!("curves_offset_{offset}.svg"));
        std::fs::write(&path, svg_chart(offset, &group)).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
