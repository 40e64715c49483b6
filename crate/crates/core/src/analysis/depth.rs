use std::collections::HashMap;

use log::warn;
use rayon::slice::ParallelSliceMut;
use serde::{Deserialize, Serialize};

use super::grid::PseudoGrid;
use crate::field::Position;
use crate::scalar::Real;

/// Where an ion leaves a trap at the depth saddle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "to", rename_all = "snake_case")]
pub enum Escape {
    /// Through the upper boundary of the sampled region.
    Upward,
    /// Down to the electrode plane.
    Plane,
    /// Into the basin of another trap.
    Trap { label: String },
}

/// A trap seeded into the merge pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Site<T> {
    pub label: String,
    pub position: Position<T>,
    /// Refined `ψ` at the trap.
    pub psi: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Depth<T> {
    /// `z²·(ψ_saddle − ψ_min)`: depth in units of the trap's energy scale.
    pub tau: T,
    pub psi_min: T,
    pub psi_saddle: T,
    pub saddle: Position<T>,
    pub escape: Escape,
    /// The barrier is within two level quanta of the grid.
    pub unresolved: bool,
}

#[derive(Default)]
struct Component {
    top: bool,
    bottom: bool,
    sites: Vec<usize>,
}

struct Forest {
    parent: Vec<u32>,
}

impl Forest {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }
}

/// Depth of every site by a merge-level sweep: cells enter in order of
/// increasing `ψ` and join their already accepted neighbours; a site's depth
/// is fixed the moment its basin touches the top or bottom layer or the
/// basin of another site.
pub fn trap_depths<T: Real>(grid: &PseudoGrid<T>, sites: &[Site<T>]) -> Vec<Depth<T>> {
    let n = grid.len();
    assert!(n < u32::MAX as usize, "grid too large for the merge pass");
    let (_, _, nz) = grid.dims();
    let values = grid.values();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.par_sort_unstable_by(|&a, &b| values[a as usize].partial_cmp(&values[b as usize]).unwrap().then(a.cmp(&b)));

    let mut seeds: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, site) in sites.iter().enumerate() {
        seeds.entry(grid.nearest(site.position)).or_default().push(s);
    }
    let mut forest = Forest { parent: (0..n as u32).collect() };
    let mut accepted = vec![false; n];
    let mut comps: HashMap<u32, Component> = HashMap::new();
    let mut result: Vec<Option<(usize, Escape)>> = vec![None; sites.len()];
    let mut remaining = sites.len();
    let mut nb = Vec::with_capacity(26);

    for &c in &order {
        if remaining == 0 {
            break;
        }
        let cu = c as usize;
        accepted[cu] = true;
        let (_, _, k) = grid.unravel(cu);
        let mut comp = Component { top: k + 1 == nz, bottom: k == 0, sites: seeds.remove(&cu).unwrap_or_default() };
        for &s in &comp.sites {
            if let Some(route) = boundary_route(&comp) {
                result[s] = Some((cu, route));
                remaining -= 1;
            }
        }
        let mut root = c;
        grid.neighbors(cu, &mut nb);
        for &m in &nb {
            if !accepted[m] {
                continue;
            }
            let other_root = forest.find(m as u32);
            if other_root == root {
                continue;
            }
            let other = comps.remove(&other_root).unwrap_or_default();
            remaining -= settle(&comp, &other, sites, cu, &mut result);
            remaining -= settle(&other, &comp, sites, cu, &mut result);
            comp.top |= other.top;
            comp.bottom |= other.bottom;
            comp.sites.extend(other.sites);
            forest.parent[other_root as usize] = root;
            root = forest.find(root);
        }
        comps.insert(root, comp);
    }

    sites
        .iter()
        .zip(result)
        .map(|(site, r)| {
            let (cell, escape) = r.unwrap_or((grid.nearest(site.position), Escape::Upward));
            let psi_saddle = values[cell];
            let barrier = (psi_saddle - site.psi).max(T::zero());
            grid.neighbors(cell, &mut nb);
            let quantum = nb.iter().map(|&m| (values[m] - psi_saddle).abs()).fold(T::zero(), T::max);
            let unresolved = barrier < T::lit(2.0) * quantum;
            if unresolved {
                warn!("trap '{}': depth barrier {barrier:e} is within two grid quanta; refine the landscape grid", site.label);
            }
            let z = site.position.z;
            Depth { tau: z * z * barrier, psi_min: site.psi, psi_saddle, saddle: grid.position(cell), escape, unresolved }
        })
        .collect()
}

fn boundary_route(c: &Component) -> Option<Escape> {
    if c.top {
        Some(Escape::Upward)
    } else if c.bottom {
        Some(Escape::Plane)
    } else {
        None
    }
}

/// Records escapes for unsettled sites of `a` joining `b`; returns how many settled.
fn settle<T>(a: &Component, b: &Component, sites: &[Site<T>], cell: usize, result: &mut [Option<(usize, Escape)>]) -> usize {
    let route = boundary_route(b).or_else(|| b.sites.first().map(|&s| Escape::Trap { label: sites[s].label.clone() }));
    let Some(route) = route else { return 0 };
    let mut count = 0;
    for &s in &a.sites {
        if result[s].is_none() {
            result[s] = Some((cell, route.clone()));
            count += 1;
        }
    }
    count
}
