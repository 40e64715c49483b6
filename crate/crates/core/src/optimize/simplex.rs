//! Dense bounded-variable revised simplex.
//!
//! Solves `max cᵀx  s.t.  M·x = r,  l ≤ x ≤ u` with few rows and many
//! columns. Nonbasic variables always sit at a finite bound (or at zero when
//! free), so the optimum returned is a basic solution: at most `m` variables
//! lie strictly between their bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense linear program with column-major constraint storage.
#[derive(Debug, Clone)]
pub struct BoundedLp<T> {
    m: usize,
    n: usize,
    cols: Vec<T>,
    rhs: Vec<T>,
    cost: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> BoundedLp<T> {
    /// `m` rows, `n` variables, all costs zero and bounds `[0, 1]`.
    pub fn new(m: usize, n: usize) -> Self {
        BoundedLp {
            m,
            n,
            cols: vec![T::zero(); m * n],
            rhs: vec![T::zero(); m],
            cost: vec![T::zero(); n],
            lower: vec![T::zero(); n],
            upper: vec![T::one(); n],
        }
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    pub fn set_entry(&mut self, row: usize, var: usize, v: T) {
        self.cols[var * self.m + row] = v;
    }

    pub fn entry(&self, row: usize, var: usize) -> T {
        self.cols[var * self.m + row]
    }

    pub fn set_rhs(&mut self, row: usize, v: T) {
        self.rhs[row] = v;
    }

    pub fn set_cost(&mut self, var: usize, c: T) {
        self.cost[var] = c;
    }

    /// Bounds may be infinite.
    pub fn set_bounds(&mut self, var: usize, lower: T, upper: T) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    fn column(&self, j: usize) -> &[T] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOptions<T> {
    /// Reduced-cost threshold for optimality.
    pub optimality_tol: T,
    /// Primal feasibility slack used by the Harris ratio test.
    pub feasibility_tol: T,
    /// Smallest accepted pivot, relative to the largest entry of the pivot column.
    pub pivot_tol: T,
    pub max_iterations: usize,
    pub refactor_every: usize,
    /// Seeds the randomized pricing used to escape degenerate stalls.
    pub seed: u64,
}

impl<T: Real> Default for SimplexOptions<T> {
    fn default() -> Self {
        SimplexOptions {
            optimality_tol: T::lit(1e-11),
            feasibility_tol: T::lit(1e-11),
            pivot_tol: T::lit(1e-10),
            max_iterations: 2_000_000,
            refactor_every: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Row duals `y` of the final basis.
    pub duals: Vec<T>,
    /// Reduced costs `c − Mᵀy` of the structural variables.
    pub reduced_costs: Vec<T>,
    /// Upper bound on the objective certified by `y` (`+∞` if `y` is not
    /// dual feasible).
    pub dual_bound: T,
    /// Structural variables in the final basis.
    pub basic: Vec<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic variable held at zero.
    Zero,
}

/// Degenerate pivots in a row before pricing turns random.
const RANDOM_AFTER: usize = 20;
/// Bound perturbation used in phase 2, relative to `1 + |bound|`.
const PERTURBATION: f64 = 1e-7;

struct Simplex<'a, T: Real> {
    lp: &'a BoundedLp<T>,
    opts: &'a SimplexOptions<T>,
    m: usize,
    /// Sign of each artificial column `±e_k`.
    art_sign: Vec<T>,
    lo: Vec<T>,
    hi: Vec<T>,
    cost: Vec<T>,
    x: Vec<T>,
    status: Vec<Status>,
    basis: Vec<usize>,
    /// Row-major `m × m` basis inverse.
    binv: Vec<T>,
    iterations: usize,
    rng: ChaCha8Rng,
}

/// Solves `lp`, returning a basic optimal solution.
pub fn solve_lp<T: Real>(lp: &BoundedLp<T>, opts: &SimplexOptions<T>) -> Result<LpSolution<T>> {
    match solve_once(lp, opts) {
        Err(Error::Solver(msg)) => {
            log::warn!("simplex: {msg}; retrying with conservative pivoting");
            let careful = SimplexOptions {
                pivot_tol: opts.pivot_tol * T::lit(1e3),
                refactor_every: (opts.refactor_every / 4).max(1),
                seed: opts.seed.wrapping_add(1),
                ..opts.clone()
            };
            solve_once(lp, &careful)
        }
        other => other,
    }
}

fn solve_once<T: Real>(lp: &BoundedLp<T>, opts: &SimplexOptions<T>) -> Result<LpSolution<T>> {
    let mut s = Simplex::new(lp, opts);
    let infeasibility = s.artificial_sum();
    let rhs_scale = T::one() + lp.rhs.iter().fold(T::zero(), |a, r| a.max(r.abs()));
    if infeasibility > opts.feasibility_tol * rhs_scale {
        s.cost = vec![T::zero(); s.total()];
        for k in 0..s.m {
            s.cost[lp.n + k] = -T::one();
        }
        s.run()?;
        let left = s.artificial_sum();
        if left > T::lit(1e-8) * rhs_scale {
            return Err(Error::Infeasible { rows: (0..s.m).filter(|&k| s.x[lp.n + k] > T::lit(1e-8)).collect() });
        }
    }
    for k in 0..s.m {
        let j = lp.n + k;
        s.hi[j] = T::zero();
        s.x[j] = s.x[j].max(T::zero()).min(T::zero());
        if s.status[j] == Status::AtUpper {
            s.status[j] = Status::AtLower;
        }
    }
    s.cost = lp.cost.clone();
    s.cost.extend(std::iter::repeat(T::zero()).take(s.m));
    // Phase 2 from the all-zero vertex is massively degenerate (every row
    // has zero right-hand side), so it runs on randomly widened bounds; the
    // true bounds are restored afterwards and repaired by dual pivots.
    let (lo, hi) = (s.lo.clone(), s.hi.clone());
    s.perturb_bounds();
    s.refactor()?;
    s.run()?;
    s.lo = lo;
    s.hi = hi;
    s.snap_nonbasic();
    s.refactor()?;
    s.dual_cleanup()?;
    s.run()?;
    s.refactor()?;
    Ok(s.finish())
}

impl<'a, T: Real> Simplex<'a, T> {
    fn new(lp: &'a BoundedLp<T>, opts: &'a SimplexOptions<T>) -> Self {
        let m = lp.m;
        let total = lp.n + m;
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        lo.extend(std::iter::repeat(T::zero()).take(m));
        hi.extend(std::iter::repeat(T::infinity()).take(m));
        let mut x = vec![T::zero(); total];
        let mut status = vec![Status::Basic; total];
        for j in 0..lp.n {
            if lo[j].is_finite() {
                x[j] = lo[j];
                status[j] = Status::AtLower;
            } else if hi[j].is_finite() {
                x[j] = hi[j];
                status[j] = Status::AtUpper;
            } else {
                status[j] = Status::Zero;
            }
        }
        let mut residual = lp.rhs.clone();
        for j in 0..lp.n {
            if x[j] != T::zero() {
                for (r, c) in residual.iter_mut().zip(lp.column(j)) {
                    *r = *r - *c * x[j];
                }
            }
        }
        let art_sign: Vec<T> = residual.iter().map(|r| if *r < T::zero() { -T::one() } else { T::one() }).collect();
        let mut binv = vec![T::zero(); m * m];
        for k in 0..m {
            x[lp.n + k] = residual[k].abs();
            binv[k * m + k] = art_sign[k];
        }
        Simplex {
            lp,
            opts,
            m,
            art_sign,
            lo,
            hi,
            cost: vec![T::zero(); total],
            x,
            status,
            basis: (lp.n..total).collect(),
            binv,
            iterations: 0,
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
        }
    }

    fn total(&self) -> usize {
        self.lp.n + self.m
    }

    fn artificial_sum(&self) -> T {
        self.x[self.lp.n..].iter().copied().sum()
    }

    fn col_dot(&self, j: usize, y: &[T]) -> T {
        if j < self.lp.n {
            self.lp.column(j).iter().zip(y).map(|(&a, &b)| a * b).sum()
        } else {
            let k = j - self.lp.n;
            self.art_sign[k] * y[k]
        }
    }

    /// `B⁻¹ · column(j)`.
    fn ftran(&self, j: usize) -> Vec<T> {
        let m = self.m;
        let mut w = vec![T::zero(); m];
        if j < self.lp.n {
            let col = self.lp.column(j);
            for (r, wr) in w.iter_mut().enumerate() {
                let row = &self.binv[r * m..(r + 1) * m];
                *wr = row.iter().zip(col).map(|(&a, &b)| a * b).sum();
            }
        } else {
            let k = j - self.lp.n;
            for (r, wr) in w.iter_mut().enumerate() {
                *wr = self.binv[r * m + k] * self.art_sign[k];
            }
        }
        w
    }

    fn duals(&self) -> Vec<T> {
        let m = self.m;
        let mut y = vec![T::zero(); m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = self.cost[j];
            if c != T::zero() {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = *yi + c * self.binv[k * m + i];
                }
            }
        }
        y
    }

    /// Rebuilds `B⁻¹` from scratch and recomputes basic values.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut b = vec![T::zero(); m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            if j < self.lp.n {
                for (r, &v) in self.lp.column(j).iter().enumerate() {
                    b[r * m + k] = v;
                }
            } else {
                let a = j - self.lp.n;
                b[a * m + k] = self.art_sign[a];
            }
        }
        self.binv = invert(b, m).ok_or_else(|| Error::Solver("basis matrix became singular".into()))?;
        let mut residual = self.lp.rhs.clone();
        for j in 0..self.total() {
            if self.status[j] != Status::Basic && self.x[j] != T::zero() {
                if j < self.lp.n {
                    for (r, c) in residual.iter_mut().zip(self.lp.column(j)) {
                        *r = *r - *c * self.x[j];
                    }
                } else {
                    let k = j - self.lp.n;
                    residual[k] = residual[k] - self.art_sign[k] * self.x[j];
                }
            }
        }
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = (0..m).map(|i| self.binv[k * m + i] * residual[i]).sum();
        }
        Ok(())
    }

    fn perturb_bounds(&mut self) {
        let eps = T::lit(PERTURBATION);
        for j in 0..self.total() {
            if self.lo[j].is_finite() {
                let u = T::lit(self.rng.random_range(1.0..2.0));
                self.lo[j] = self.lo[j] - eps * u * (T::one() + self.lo[j].abs());
            }
            if self.hi[j].is_finite() {
                let u = T::lit(self.rng.random_range(1.0..2.0));
                self.hi[j] = self.hi[j] + eps * u * (T::one() + self.hi[j].abs());
            }
        }
        self.snap_nonbasic();
    }

    /// Puts nonbasic variables back on their current bounds.
    fn snap_nonbasic(&mut self) {
        for j in 0..self.total() {
            match self.status[j] {
                Status::AtLower => self.x[j] = self.lo[j],
                Status::AtUpper => self.x[j] = self.hi[j],
                _ => {}
            }
        }
    }

    /// Dual simplex pivots from a dual-feasible basis until every basic
    /// variable is within its bounds.
    fn dual_cleanup(&mut self) -> Result<()> {
        let m = self.m;
        let ftol = self.opts.feasibility_tol;
        let mut since_refactor = 0usize;
        let mut alphas: Vec<(usize, T)> = Vec::new();
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(Error::Solver(format!("iteration limit {} reached", self.opts.max_iterations)));
            }
            if since_refactor >= self.opts.refactor_every {
                self.refactor()?;
                since_refactor = 0;
            }
            let mut worst: Option<(usize, bool, T)> = None;
            for (k, &j) in self.basis.iter().enumerate() {
                let (below, v) = if self.x[j] < self.lo[j] {
                    (true, self.lo[j] - self.x[j])
                } else if self.x[j] > self.hi[j] {
                    (false, self.x[j] - self.hi[j])
                } else {
                    continue;
                };
                let limit = ftol * (T::one() + if below { self.lo[j].abs() } else { self.hi[j].abs() });
                if v > limit && worst.is_none_or(|(_, _, w)| v > w) {
                    worst = Some((k, below, v));
                }
            }
            let Some((r, below, _)) = worst else { return Ok(()) };
            let rho: Vec<T> = self.binv[r * m..(r + 1) * m].to_vec();
            alphas.clear();
            for j in 0..self.total() {
                if self.status[j] != Status::Basic && self.lo[j] != self.hi[j] {
                    alphas.push((j, self.col_dot(j, &rho)));
                }
            }
            let amax = alphas.iter().fold(T::one(), |a, (_, v)| a.max(v.abs()));
            let tol = self.opts.pivot_tol * amax;
            let y = self.duals();
            let mut best: Option<(usize, T, T, T)> = None;
            for &(j, alpha) in &alphas {
                if alpha.abs() <= tol {
                    continue;
                }
                // Moving j by dir·t changes the violated basic variable by −alpha·dir·t.
                let dir = if below { -alpha.signum() } else { alpha.signum() };
                let allowed = match self.status[j] {
                    Status::AtLower => dir > T::zero(),
                    Status::AtUpper => dir < T::zero(),
                    Status::Zero => true,
                    Status::Basic => false,
                };
                if !allowed {
                    continue;
                }
                let d = self.cost[j] - self.col_dot(j, &y);
                let ratio = d.abs() / alpha.abs();
                let better = match best {
                    None => true,
                    Some((_, _, br, ba)) => ratio < br || (ratio == br && alpha.abs() > ba),
                };
                if better {
                    best = Some((j, dir, ratio, alpha.abs()));
                }
            }
            let Some((q, dir, _, _)) = best else {
                return Err(Error::Solver("dual cleanup found no entering column".into()));
            };
            let w = self.ftran(q);
            let leaving = self.basis[r];
            let target = if below { self.lo[leaving] } else { self.hi[leaving] };
            let t = (self.x[leaving] - target) / (dir * w[r]);
            self.x[q] = self.x[q] + dir * t;
            for (k, &j) in self.basis.iter().enumerate() {
                self.x[j] = self.x[j] - dir * t * w[k];
            }
            self.x[leaving] = target;
            self.status[leaving] = if below { Status::AtLower } else { Status::AtUpper };
            self.status[q] = Status::Basic;
            self.basis[r] = q;
            self.pivot(r, &w);
            self.iterations += 1;
            since_refactor += 1;
        }
    }

    fn run(&mut self) -> Result<()> {
        let tol = self.opts.optimality_tol;
        let mut degenerate_streak = 0usize;
        let mut since_refactor = 0usize;
        let mut eligible: Vec<(usize, T, T)> = Vec::new();
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(Error::Solver(format!("iteration limit {} reached", self.opts.max_iterations)));
            }
            if since_refactor >= self.opts.refactor_every {
                self.refactor()?;
                since_refactor = 0;
            }
            let y = self.duals();
            eligible.clear();
            for j in 0..self.total() {
                let st = self.status[j];
                if st == Status::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = self.cost[j] - self.col_dot(j, &y);
                let dir = match st {
                    Status::AtLower if d > tol => T::one(),
                    Status::AtUpper if d < -tol => -T::one(),
                    Status::Zero if d.abs() > tol => d.signum(),
                    _ => continue,
                };
                eligible.push((j, dir, d.abs()));
            }
            if eligible.is_empty() {
                return Ok(());
            }
            let (q, dir) = if degenerate_streak > RANDOM_AFTER {
                let (j, dir, _) = eligible[self.rng.random_range(0..eligible.len())];
                (j, dir)
            } else {
                let best = eligible
                    .iter()
                    .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(b.0.cmp(&a.0)))
                    .unwrap();
                (best.0, best.1)
            };
            let w = self.ftran(q);
            let step = self.ratio_test(q, dir, &w)?;
            self.iterations += 1;
            since_refactor += 1;
            let t = step.length;
            if t <= self.opts.feasibility_tol {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.x[q] = self.x[q] + dir * t;
            for (k, &j) in self.basis.iter().enumerate() {
                self.x[j] = self.x[j] - dir * t * w[k];
            }
            match step.leaving {
                None => {
                    // bound flip
                    if dir > T::zero() {
                        self.x[q] = self.hi[q];
                        self.status[q] = Status::AtUpper;
                    } else {
                        self.x[q] = self.lo[q];
                        self.status[q] = Status::AtLower;
                    }
                }
                Some((r, to_upper)) => {
                    let leaving = self.basis[r];
                    if to_upper {
                        self.x[leaving] = self.hi[leaving];
                        self.status[leaving] = Status::AtUpper;
                    } else {
                        self.x[leaving] = self.lo[leaving];
                        self.status[leaving] = Status::AtLower;
                    }
                    self.status[q] = Status::Basic;
                    self.basis[r] = q;
                    self.pivot(r, &w);
                }
            }
        }
    }

    fn ratio_test(&self, q: usize, dir: T, w: &[T]) -> Result<Step<T>> {
        let delta = self.opts.feasibility_tol;
        let own = self.hi[q] - self.lo[q];
        let wmax = w.iter().fold(T::one(), |a, v| a.max(v.abs()));
        let tol = self.opts.pivot_tol * wmax;
        let mut relaxed = if own.is_finite() { own } else { T::infinity() };
        for (k, &j) in self.basis.iter().enumerate() {
            let alpha = dir * w[k];
            if alpha.abs() <= tol {
                continue;
            }
            let r = if alpha > T::zero() {
                (self.x[j] - self.lo[j] + delta) / alpha
            } else {
                (self.hi[j] - self.x[j] + delta) / -alpha
            };
            if r < relaxed {
                relaxed = r;
            }
        }
        if !relaxed.is_finite() {
            return Err(Error::Unbounded);
        }
        let mut chosen: Option<(usize, T, T, bool)> = None;
        for (k, &j) in self.basis.iter().enumerate() {
            let alpha = dir * w[k];
            if alpha.abs() <= tol {
                continue;
            }
            let (exact, to_upper) = if alpha > T::zero() {
                ((self.x[j] - self.lo[j]) / alpha, false)
            } else {
                ((self.hi[j] - self.x[j]) / -alpha, true)
            };
            if !exact.is_finite() || exact > relaxed {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((_, _, a, _)) => alpha.abs() > a,
            };
            if better {
                chosen = Some((k, exact.max(T::zero()), alpha.abs(), to_upper));
            }
        }
        match chosen {
            Some((k, t, _, to_upper)) if !(own.is_finite() && own <= t) => {
                Ok(Step { length: t, leaving: Some((k, to_upper)) })
            }
            _ if own.is_finite() => Ok(Step { length: own, leaving: None }),
            _ => Err(Error::Solver("ratio test found no blocking variable".into())),
        }
    }

    /// Product-form update of `B⁻¹` after column `w` enters at position `r`.
    fn pivot(&mut self, r: usize, w: &[T]) {
        let m = self.m;
        let piv = w[r];
        for i in 0..m {
            self.binv[r * m + i] = self.binv[r * m + i] / piv;
        }
        for k in 0..m {
            if k == r || w[k] == T::zero() {
                continue;
            }
            let f = w[k];
            for i in 0..m {
                self.binv[k * m + i] = self.binv[k * m + i] - f * self.binv[r * m + i];
            }
        }
    }

    fn finish(self) -> LpSolution<T> {
        let n = self.lp.n;
        let y = self.duals();
        let tol = self.opts.optimality_tol;
        let mut bound: T = self.lp.rhs.iter().zip(&y).map(|(&r, &v)| r * v).sum();
        let mut reduced = Vec::with_capacity(n);
        for j in 0..n {
            let d = if self.status[j] == Status::Basic { T::zero() } else { self.cost[j] - self.col_dot(j, &y) };
            reduced.push(d);
            let term = if d > tol {
                d * self.hi[j]
            } else if d < -tol {
                d * self.lo[j]
            } else {
                // within tolerance: charge the actual position
                d * self.x[j]
            };
            bound = bound + term;
        }
        let x: Vec<T> = self.x[..n].to_vec();
        let objective = x.iter().zip(&self.lp.cost).map(|(&a, &c)| a * c).sum();
        LpSolution {
            objective,
            duals: y,
            reduced_costs: reduced,
            dual_bound: if bound.is_nan() { T::infinity() } else { bound },
            basic: self.basis.iter().copied().filter(|&j| j < n).collect(),
            iterations: self.iterations,
            x,
        }
    }
}

struct Step<T> {
    length: T,
    /// Basis position leaving and whether it leaves at its upper bound;
    /// `None` for a bound flip of the entering variable.
    leaving: Option<(usize, bool)>,
}

/// Gauss–Jordan inverse with partial pivoting of a row-major `m × m` matrix.
fn invert<T: Real>(mut a: Vec<T>, m: usize) -> Option<Vec<T>> {
    let mut inv = vec![T::zero(); m * m];
    for k in 0..m {
        inv[k * m + k] = T::one();
    }
    let scale = a.iter().fold(T::zero(), |s, v| s.max(v.abs()));
    for col in 0..m {
        let piv = (col..m).max_by(|&r, &s| a[r * m + col].abs().partial_cmp(&a[s * m + col].abs()).unwrap())?;
        if !(a[piv * m + col].abs() > T::EPS * scale) {
            return None;
        }
        if piv != col {
            for i in 0..m {
                a.swap(piv * m + i, col * m + i);
                inv.swap(piv * m + i, col * m + i);
            }
        }
        let p = a[col * m + col];
        for i in 0..m {
            a[col * m + i] = a[col * m + i] / p;
            inv[col * m + i] = inv[col * m + i] / p;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = a[r * m + col];
            if f == T::zero() {
                continue;
            }
            for i in 0..m {
                a[r * m + i] = a[r * m + i] - f * a[col * m + i];
                inv[r * m + i] = inv[r * m + i] - f * inv[col * m + i];
            }
        }
    }
    Some(inv)
}
