//! SVG preview of an electrode map: the unit cell tiled 3×3.

use std::fmt::Write as _;

use trap_forge::lattice::{BravaisLattice, PatchGrid};
use trap_forge::Result;

use crate::map::ElectrodeMap;

const RF_FILL: &str = "#1f5fbf";
const SIZE_PX: f64 = 600.0;

fn gray(v: f64) -> String {
    // 1 → dark, 0 → light, so interior patches read between ground and rf.
    let level = (235.0 - 170.0 * v).round().clamp(0.0, 255.0) as u8;
    format!("#{level:02x}{level:02x}{level:02x}")
}

fn fmt(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

/// Renders `map` to SVG. rf patches are filled, ground patches left empty,
/// interior patches gray-scaled by value and traps marked with triangles.
/// Identical maps give identical bytes.
pub fn render_svg(map: &ElectrodeMap) -> Result<String> {
    let lattice = BravaisLattice::new(map.a1, map.a2)?;
    let grid = PatchGrid::new(&lattice, map.grid)?;
    let corners = [[0.0, 0.0], map.a1, [map.a1[0] + map.a2[0], map.a1[1] + map.a2[1]], map.a2];
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for s1 in -1..=1 {
        for s2 in -1..=1 {
            for c in &corners {
                let p = [c[0] + s1 as f64 * map.a1[0] + s2 as f64 * map.a2[0], c[1] + s1 as f64 * map.a1[1] + s2 as f64 * map.a2[1]];
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let px = SIZE_PX / span;
    let (w, h) = ((hi[0] - lo[0]) * px, (hi[1] - lo[1]) * px);
    let marker = 0.03 * lattice.cell_diameter().min(span);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        fmt(w),
        fmt(h),
        fmt(w),
        fmt(h)
    );
    let _ = writeln!(s, "<defs>");
    let _ = writeln!(s, r#"<g id="cell">"#);
    let _ = writeln!(
        s,
        r##"<polygon class="outline" points="{}" fill="none" stroke="#999999" stroke-width="{}"/>"##,
        points(&corners),
        fmt(0.002 * span)
    );
    for (i, &v) in map.values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let poly: Vec<[f64; 2]> = grid.patch_polygon(i)?.iter().map(|f| lattice.to_cartesian(*f)).collect();
        let (class, fill) = if v == 1.0 { ("rf", RF_FILL.to_string()) } else { ("interior", gray(v)) };
        let _ = writeln!(s, r##"<polygon class="{class}" points="{}" fill="{fill}" stroke="{fill}" stroke-width="{}"/>"##, points(&poly), fmt(0.001 * span));
    }
    for t in &map.traps {
        let c = lattice.to_cartesian(t.position.frac);
        let tri = [[c[0], c[1] + marker], [c[0] - 0.866 * marker, c[1] - 0.5 * marker], [c[0] + 0.866 * marker, c[1] - 0.5 * marker]];
        let _ = writeln!(s, r##"<polygon class="trap" points="{}" fill="#d62728"><title>{}</title></polygon>"##, points(&tri), t.label);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</defs>");
    // y axis up: flip about the horizontal midline, then shift the bounding box to the origin.
    let _ = writeln!(s, r#"<g transform="translate({},{}) scale({},{})">"#, fmt(-lo[0] * px), fmt(hi[1] * px), fmt(px), fmt(-px));
    for s2 in -1..=1 {
        for s1 in -1..=1 {
            let off = [s1 as f64 * map.a1[0] + s2 as f64 * map.a2[0], s1 as f64 * map.a1[1] + s2 as f64 * map.a2[1]];
            let _ = writeln!(s, r##"<use xlink:href="#cell" href="#cell" transform="translate({},{})"/>"##, fmt(off[0]), fmt(off[1]));
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

fn points(poly: &[[f64; 2]]) -> String {
    poly.iter().map(|p| format!("{},{}", fmt(p[0]), fmt(p[1]))).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::MapTrap;
    use trap_forge::lattice::GridKind;
    use trap_forge::Position;

    fn map(values: Vec<f64>) -> ElectrodeMap {
        ElectrodeMap {
            a1: [1.0, 0.0],
            a2: [0.0, 1.0],
            grid: GridKind::Oblique { n1: 4, n2: 4 },
            n_cut: 8,
            rail_tol: 1e-7,
            scale: 1.0,
            traps: vec![MapTrap {
                label: "t".into(),
                position: Position::new(0.5, 0.5, 0.2),
                gamma: [[-0.5, 0.0, 0.0], [0.0, -0.5, 0.0], [0.0, 0.0, 1.0]],
                kappa: 0.1,
            }],
            values,
        }
    }

    #[test]
    fn all_ones_fills_every_patch() {
        let svg = render_svg(&map(vec![1.0; 16])).unwrap();
        assert_eq!(svg.matches(r#"class="rf""#).count(), 16);
        assert_eq!(svg.matches(r#"class="interior""#).count(), 0);
        assert_eq!(svg.matches("<use ").count(), 9);
    }

    #[test]
    fn interior_patches_are_gray() {
        let mut v = vec![0.0; 16];
        v[1] = 0.5;
        v[5] = 0.25;
        v[9] = 0.75;
        v[0] = 1.0;
        let svg = render_svg(&map(v)).unwrap();
        assert_eq!(svg.matches(r#"class="interior""#).count(), 3);
        assert_eq!(svg.matches(r#"class="rf""#).count(), 1);
    }

    #[test]
    fn output_is_deterministic() {
        let m = map((0..16).map(|i| (i % 3) as f64 / 2.0).collect());
        assert_eq!(render_svg(&m).unwrap(), render_svg(&m).unwrap());
    }
}
