//! SVG and CSV output for piecewise-affine maps.

use std::fmt::Write as _;
use std::io::Write;

use super::{nearest_atoms, PiecewiseAffineMap};
use crate::error::Result;
use crate::mat::Mat2;

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22",
    "#aec7e8", "#ffbb78", "#98df8a",
];
const OFF_ATOM: &str = "#d0d0d0";

/// Cells colored by nearest atom (within `radius`), with a legend.
pub fn write_svg<W: Write>(map: &PiecewiseAffineMap, atoms: &[Mat2], radius: f64, mut w: W) -> Result<()> {
    let size = 800.0;
    let d = map.domain;
    let scale = size / d.width().max(d.height());
    let (pw, ph) = (d.width() * scale, d.height() * scale);
    let legend_h = 20.0 * (atoms.len() + 2) as f64;
    let labels = nearest_atoms(map, atoms, radius);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        pw + 260.0,
        ph.max(legend_h),
        pw + 260.0,
        ph.max(legend_h)
    )
    .unwrap();
    // One path per color keeps the file small.
    let mut paths = vec![String::new(); atoms.len() + 1];
    for (c, lab) in map.cells.iter().zip(&labels) {
        let buf = &mut paths[lab.map_or(atoms.len(), |i| i)];
        for (k, &vi) in c.v.iter().enumerate() {
            let p = map.vertices[vi];
            let x = (p[0] - d.x_min) * scale;
            let y = (d.y_max - p[1]) * scale;
            write!(buf, "{}{:.2} {:.2}", if k == 0 { "M" } else { "L" }, x, y).unwrap();
        }
        buf.push('Z');
    }
    for (i, p) in paths.iter().enumerate() {
        if p.is_empty() {
            continue;
        }
        let color = if i == atoms.len() { OFF_ATOM } else { PALETTE[i % PALETTE.len()] };
        writeln!(s, r#"<path fill="{color}" stroke="none" d="{p}"/>"#).unwrap();
    }
    for (i, a) in atoms.iter().chain(std::iter::once(&Mat2::zero())).enumerate() {
        let y = 20.0 * (i + 1) as f64;
        let (color, text) = if i == atoms.len() {
            (OFF_ATOM, "off-atom".to_string())
        } else {
            let e = a.entries();
            (PALETTE[i % PALETTE.len()], format!("{i}: [{} {}; {} {}]", e[0], e[1], e[2], e[3]))
        };
        writeln!(
            s,
            r#"<rect x="{:.0}" y="{:.0}" width="14" height="14" fill="{color}"/><text x="{:.0}" y="{:.0}" font-family="monospace" font-size="12">{text}</text>"#,
            pw + 10.0,
            y - 12.0,
            pw + 30.0,
            y
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// One row per cell: vertices, area, affine data, det, tree node, atom.
pub fn write_csv<W: Write>(map: &PiecewiseAffineMap, atoms: &[Mat2], radius: f64, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "cell", "x1", "y1", "x2", "y2", "x3", "y3", "area", "a11", "a12", "a21", "a22", "b1", "b2", "det", "node",
        "atom",
    ])?;
    let labels = nearest_atoms(map, atoms, radius);
    for (i, (c, lab)) in map.cells.iter().zip(&labels).enumerate() {
        let mut row = vec![i.to_string()];
        for &vi in &c.v {
            row.push(map.vertices[vi][0].to_string());
            row.push(map.vertices[vi][1].to_string());
        }
        row.push(map.cell_area(c).to_string());
        row.extend(c.grad.entries().iter().map(f64::to_string));
        row.push(c.offset[0].to_string());
        row.push(c.offset[1].to_string());
        row.push(c.grad.det().to_string());
        row.push(c.node.map_or(String::new(), |n| n.to_string()));
        row.push(lab.map_or(String::new(), |n| n.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
