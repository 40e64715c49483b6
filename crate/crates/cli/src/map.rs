//! Plain-text electrode map: a small header followed by the patch amplitudes.
//!
//! ```text
//! # trap-forge electrode map
//! format 1
//! a1 1 0
//! a2 0 1
//! grid oblique 48 48          (or: grid hexagonal 48)
//! n_cut 96
//! rail_tol 1e-7
//! scale 8.084035481127916
//! trap t 0.5 0.5 0.2 gamma -0.5 0 0 0 -0.5 0 0 0 1 kappa 0.2037
//! values
//! 0 0 1 1 0.4375 ...
//! ```
//!
//! `values` holds one line per patch row `q`; each line lists the `n1·s`
//! patches of that row in index order (`s` = 2 for hexagonal grids). Railed
//! patches are written as `0` or `1`, interior ones as decimals.

use std::fmt::Write as _;

use trap_forge::lattice::GridKind;
use trap_forge::{Error, Position, Result};

const MAGIC: &str = "# trap-forge electrode map";

#[derive(Debug, Clone, PartialEq)]
pub struct MapTrap {
    pub label: String,
    pub position: Position,
    pub gamma: [[f64; 3]; 3],
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeMap {
    pub a1: [f64; 2],
    pub a2: [f64; 2],
    pub grid: GridKind,
    pub n_cut: usize,
    pub rail_tol: f64,
    pub scale: f64,
    pub traps: Vec<MapTrap>,
    pub values: Vec<f64>,
}

/// Sets amplitudes within `tol` of a rail exactly onto it.
pub fn snap_rails(a: &[f64], tol: f64) -> Vec<f64> {
    a.iter()
        .map(|&v| {
            if v <= tol {
                0.0
            } else if v >= 1.0 - tol {
                1.0
            } else {
                v
            }
        })
        .collect()
}

impl ElectrodeMap {
    pub fn interior_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0 && v != 1.0).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "format 1");
        let _ = writeln!(s, "a1 {} {}", self.a1[0], self.a1[1]);
        let _ = writeln!(s, "a2 {} {}", self.a2[0], self.a2[1]);
        match self.grid {
            GridKind::Oblique { n1, n2 } => {
                let _ = writeln!(s, "grid oblique {n1} {n2}");
            }
            GridKind::Hexagonal { n } => {
                let _ = writeln!(s, "grid hexagonal {n}");
            }
        }
        let _ = writeln!(s, "n_cut {}", self.n_cut);
        let _ = writeln!(s, "rail_tol {:e}", self.rail_tol);
        let _ = writeln!(s, "scale {}", self.scale);
        for t in &self.traps {
            let _ = write!(s, "trap {} {} {} {} gamma", t.label, t.position.frac[0], t.position.frac[1], t.position.z);
            for v in t.gamma.iter().flatten() {
                let _ = write!(s, " {v}");
            }
            let _ = writeln!(s, " kappa {}", t.kappa);
        }
        let _ = writeln!(s, "values");
        let (n1, _) = self.grid.dims();
        let per_row = n1 * self.grid.shapes_per_cell();
        for row in self.values.chunks(per_row) {
            let line: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn parse(text: &str) -> Result<ElectrodeMap> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let bad = |line: usize, message: String| Error::MapFormat { line, message };
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => return Err(bad(1, format!("expected header line '{MAGIC}'"))),
        }
        let mut a1 = None;
        let mut a2 = None;
        let mut grid = None;
        let mut n_cut = None;
        let mut rail_tol = None;
        let mut scale = None;
        let mut traps: Vec<MapTrap> = Vec::new();
        let mut body_start = None;
        for (no, line) in lines.by_ref() {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let Some((&key, rest)) = tokens.split_first() else { continue };
            if key.starts_with('#') {
                continue;
            }
            match key {
                "format" => {
                    if rest != ["1"] {
                        return Err(bad(no, format!("unsupported format {}", rest.join(" "))));
                    }
                }
                "a1" => a1 = Some(floats::<2>(no, rest)?),
                "a2" => a2 = Some(floats::<2>(no, rest)?),
                "grid" => {
                    grid = Some(match rest {
                        ["oblique", n1, n2] => GridKind::Oblique { n1: int(no, n1)?, n2: int(no, n2)? },
                        ["hexagonal", n] => GridKind::Hexagonal { n: int(no, n)? },
                        _ => return Err(bad(no, format!("unrecognized grid '{}'", rest.join(" ")))),
                    })
                }
                "n_cut" => n_cut = Some(int(no, single(no, rest)?)?),
                "rail_tol" => rail_tol = Some(float(no, single(no, rest)?)?),
                "scale" => scale = Some(float(no, single(no, rest)?)?),
                "trap" => traps.push(parse_trap(no, rest)?),
                "values" => {
                    body_start = Some(no);
                    break;
                }
                other => return Err(bad(no, format!("unknown header key '{other}'"))),
            }
        }
        let Some(body_line) = body_start else { return Err(bad(0, "missing 'values' section".into())) };
        let missing = |what: &str| bad(body_line, format!("header is missing '{what}'"));
        let grid = grid.ok_or_else(|| missing("grid"))?;
        let mut values = Vec::with_capacity(grid.patch_count());
        for (no, line) in lines {
            for tok in line.split_whitespace() {
                let v = float(no, tok)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad(no, format!("amplitude {v} outside [0, 1]")));
                }
                values.push(v);
            }
        }
        if values.len() != grid.patch_count() {
            return Err(bad(
                body_line,
                format!("body has {} values, grid needs {}", values.len(), grid.patch_count()),
            ));
        }
        Ok(ElectrodeMap {
            a1: a1.ok_or_else(|| missing("a1"))?,
            a2: a2.ok_or_else(|| missing("a2"))?,
            grid,
            n_cut: n_cut.ok_or_else(|| missing("n_cut"))?,
            rail_tol: rail_tol.ok_or_else(|| missing("rail_tol"))?,
            scale: scale.ok_or_else(|| missing("scale"))?,
            traps,
            values,
        })
    }
}

fn format_value(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v == 1.0 {
        "1".into()
    } else {
        format!("{v}")
    }
}

fn parse_trap(no: usize, rest: &[&str]) -> Result<MapTrap> {
    // label x y z gamma g00..g22 kappa k
    if rest.len() != 16 || rest[4] != "gamma" || rest[14] != "kappa" {
        return Err(Error::MapFormat {
            line: no,
            message: "trap line must read 'trap <label> <x> <y> <z> gamma <9 values> kappa <value>'".into(),
        });
    }
    let p = floats::<3>(no, &rest[1..4])?;
    let g = floats::<9>(no, &rest[5..14])?;
    Ok(MapTrap {
        label: rest[0].to_string(),
        position: Position::new(p[0], p[1], p[2]),
        gamma: [[g[0], g[1], g[2]], [g[3], g[4], g[5]], [g[6], g[7], g[8]]],
        kappa: float(no, rest[15])?,
    })
}

fn single<'a>(no: usize, rest: &[&'a str]) -> Result<&'a str> {
    match rest {
        [one] => Ok(one),
        _ => Err(Error::MapFormat { line: no, message: format!("expected one value, got {}", rest.len()) }),
    }
}

fn float(no: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::MapFormat { line: no, message: format!("'{tok}' is not a finite number") })
}

fn int(no: usize, tok: &str) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| Error::MapFormat { line: no, message: format!("'{tok}' is not a count") })
}

fn floats<const N: usize>(no: usize, toks: &[&str]) -> Result<[f64; N]> {
    if toks.len() != N {
        return Err(Error::MapFormat { line: no, message: format!("expected {N} numbers, got {}", toks.len()) });
    }
    let mut out = [0.0; N];
    for (o, t) in out.iter_mut().zip(toks) {
        *o = float(no, t)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ElectrodeMap {
        ElectrodeMap {
            a1: [1.0, 0.0],
            a2: [0.5, 0.75f64.sqrt()],
            grid: GridKind::Hexagonal { n: 2 },
            n_cut: 4,
            rail_tol: 1e-7,
            scale: 1.25,
            traps: vec![MapTrap {
                label: "t0".into(),
                position: Position::new(1.0 / 3.0, 1.0 / 3.0, 0.5),
                gamma: [[-0.5, 0.0, 0.0], [0.0, -0.5, 0.0], [0.0, 0.0, 1.0]],
                kappa: 0.1,
            }],
            values: vec![0.0, 1.0, 0.25, 1.0, 0.0, 0.0, 1.0, 0.123456789012345],
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = sample();
        let text = m.to_text();
        assert_eq!(ElectrodeMap::parse(&text).unwrap(), m);
        assert_eq!(m.interior_count(), 2);
    }

    #[test]
    fn wrong_body_length_names_a_line() {
        let mut text = sample().to_text();
        text.push_str("1\n");
        match ElectrodeMap::parse(&text) {
            Err(Error::MapFormat { message, .. }) => assert!(message.contains("9 values")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garbage_value_is_located() {
        let text = sample().to_text().replace("0.25", "zz");
        match ElectrodeMap::parse(&text) {
            Err(Error::MapFormat { line, .. }) => assert_eq!(line, 11),
            other => panic!("unexpected {other:?}"),
        }
    }
}
