//! Acceptance suite. Every test prints one line
//! `[acceptance] <id> <name>: PASS|FAIL | <measured values>` and then asserts.
//!
//! Run with `cargo test -p trap-forge --test acceptance -- --nocapture`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use trap_forge::analysis::{
    find_minima, kappa, physical_units, pseudopotential_grid, trap_depths, AnalysisOptions, GridOptions,
    PhysicalParams, Report, Site,
};
use trap_forge::constraints::{
    assemble, curvature_from_frequencies, cylindrical_quadrupole,
};
use trap_forge::field::{build_basis, patch_fourier_coeff, Derivative, Order};
use trap_forge::lattice::GridKind;
use trap_forge::optimize::{inhomogeneous_solution, project_scale, round_rails, solve, SolverOptions};
use trap_forge::patterns::annulus;
use trap_forge::synthesis::{synthesize, SuppressionMode, SuppressionPolicy, Synthesis};
use trap_forge::{BravaisLattice, FourierBasis, PatchGrid, Position, TrapSpec};

/// Desk resolution used throughout.
const N: usize = 48;

fn verdict(id: &str, name: &str, pass: bool, detail: &str) {
    println!("[acceptance] {id} {name}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn square_basis(n: usize) -> FourierBasis {
    let lattice = BravaisLattice::square(1.0).unwrap();
    let grid = PatchGrid::new(&lattice, GridKind::Oblique { n1: n, n2: n }).unwrap();
    build_basis(&lattice, &grid, 2 * n).unwrap()
}

fn hex_basis(n: usize) -> FourierBasis {
    let lattice = BravaisLattice::hexagonal(1.0).unwrap();
    let grid = PatchGrid::new(&lattice, GridKind::Hexagonal { n }).unwrap();
    build_basis(&lattice, &grid, 2 * n).unwrap()
}

fn centre_trap(z: f64) -> TrapSpec {
    TrapSpec::new("t", Position::new(0.5, 0.5, z), cylindrical_quadrupole())
}

fn hex_trap(z: f64) -> TrapSpec {
    TrapSpec::new("t", Position::new(1.0 / 3.0, 1.0 / 3.0, z), cylindrical_quadrupole())
}

fn plain(basis: &FourierBasis, traps: &[TrapSpec]) -> Synthesis<f64> {
    synthesize(basis, traps, &[], &SolverOptions::default(), &AnalysisOptions::default(), None).unwrap()
}

fn det3(h: &[[f64; 3]; 3]) -> f64 {
    h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn c1_ring_reference() {
    // Anti-aliased annuli, outer radius b = 0.1, cell 10 b, ratio 4.98.
    let n = 160;
    let basis = square_basis(n);
    let (lattice, grid) = (basis.lattice(), basis.grid());
    let b = 0.1;
    let r_in = b / 4.98;
    let a = annulus(lattice, grid, [0.5, 0.5], r_in, b, 8);
    let field = basis.field(&a).unwrap();
    let ez = |z: f64| field.evaluate(Position::new(0.5, 0.5, z), Order::Gradient).unwrap().gradient[2];
    let (mut lo, mut hi) = (0.05 * b, 0.6 * b);
    assert!(ez(lo).signum() != ez(hi).signum(), "no on-axis null bracketed");
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ez(mid).signum() == ez(lo).signum() {
            lo = mid
        } else {
            hi = mid
        }
    }
    let z0 = 0.5 * (lo + hi);
    let h = field.evaluate(Position::new(0.5, 0.5, z0), Order::Hessian).unwrap().hessian;
    let kappa = z0 * z0 * det3(&h).abs().cbrt();
    let opts = GridOptions { nx: 96, ny: 96, nz: 128, z_lo: Some(0.2 * z0), z_hi: Some(6.0 * z0) };
    let pg = pseudopotential_grid(&field, &opts, z0).unwrap();
    let trap = TrapSpec::new("ring", Position::new(0.5, 0.5, z0), cylindrical_quadrupole());
    let minima = find_minima(&pg, &field, std::slice::from_ref(&trap), 0.05).unwrap();
    let site = minima.iter().find(|m| m.designed == Some(0)).map(|m| (m.position, m.psi));
    let (pos, psi) = site.unwrap_or((trap.position, 0.0));
    let tau = trap_depths(&pg, &[Site { label: "ring".into(), position: pos, psi }])[0].tau;
    let pass = rel(kappa, 0.298) <= 0.05 && rel(tau, 0.0196) <= 0.15 && site.is_some();
    verdict(
        "1",
        "ring reference",
        pass,
        &format!("z0/r_in = {:.4}, kappa = {kappa:.4} (0.298 ± 5%), tau = {tau:.5} (0.0196 ± 15%)", z0 / r_in),
    );
    assert!(pass);
}

/// Best symmetric ring electrode with its on-axis null at `z`.
///
/// For each inner radius the outer radius is scanned; where `E_z(z)` changes
/// sign between neighbouring rings the exact null is the convex combination
/// of the two amplitude vectors, which is again a valid electrode.
fn ring_scan(basis: &FourierBasis, z: f64) -> f64 {
    let (lattice, grid) = (basis.lattice(), basis.grid());
    let p = Position::new(0.5, 0.5, z);
    let ez_row = basis.evaluate_row(p, Derivative::Dz).unwrap();
    let hzz_row = basis.evaluate_row(p, Derivative::Dzz).unwrap();
    let steps = 50;
    let r_max = 0.5;
    let mut best = 0.0f64;
    for i in 0..steps {
        let r_in = r_max * i as f64 / steps as f64;
        let mut prev: Option<(f64, f64)> = None;
        for j in 1..=steps {
            let r_out = r_in + (r_max - r_in) * j as f64 / steps as f64;
            let a = annulus(lattice, grid, [0.5, 0.5], r_in, r_out, 8);
            let (ez, hzz) = (dot(&ez_row, &a), dot(&hzz_row, &a));
            if let Some((ez0, hzz0)) = prev {
                if ez0 == 0.0 || ez0.signum() != ez.signum() {
                    let t = ez0 / (ez0 - ez);
                    let h = (1.0 - t) * hzz0 + t * hzz;
                    best = best.max(z * z * h.abs() * 0.25f64.cbrt());
                }
            }
            prev = Some((ez, hzz));
        }
    }
    best
}

#[test]
fn c2_parametric_ring_oracle() {
    let basis = square_basis(N);
    let opts = SolverOptions::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for &z in &[0.2, 0.3, 0.4, 0.5] {
        let system = assemble(&basis, &[centre_trap(z)], &[]).unwrap();
        let r = solve(&system, &opts).unwrap();
        let kappa_lp = kappa(r.scale, &system.traps)[0];
        let kappa_ring = ring_scan(&basis, z);
        let ratio = kappa_ring / kappa_lp;
        pass &= kappa_ring <= kappa_lp * (1.0 + opts.gap_tol) + 1e-12 && ratio >= 0.85;
        detail.push(format!("z={z}: ring/LP = {ratio:.3}"));
    }
    verdict("2", "parametric-ring oracle", pass, &format!("{} (need 0.85 ≤ ratio ≤ 1)", detail.join(", ")));
    assert!(pass);
}

#[test]
fn c3_railing_and_rounding() {
    let cases: Vec<(&str, FourierBasis, Vec<TrapSpec>)> = vec![
        ("square z=0.2", square_basis(N), vec![centre_trap(0.2)]),
        ("square z=1", square_basis(N), vec![centre_trap(1.0)]),
        ("hex z=0.75", hex_basis(N), vec![hex_trap(0.75)]),
        ("bilayer", hex_basis(N), bilayer_traps()),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, basis, traps) in &cases {
        let system = assemble(basis, traps, &[]).unwrap();
        let r = solve(&system, &SolverOptions::default()).unwrap();
        let bound = system.rows.len() + system.inequalities.len();
        let rounding = round_rails(&r, basis, &system, 0.5).unwrap();
        let change =
            rounding.traps.iter().map(|t| (t.field_after - t.field_before).abs()).fold(0.0, f64::max);
        // The rounding bound covers square lattices; other cases are reported only.
        let gated = name.starts_with("square");
        pass &= r.basic && r.railing.interior <= bound && (!gated || change < 1e-3);
        let tag = if gated { "" } else { " (info)" };
        detail.push(format!("{name}: interior {}/{bound}, rounding Δfield {change:.1e}{tag}", r.railing.interior));
    }
    verdict("3", "railing and rounding", pass, &detail.join("; "));
    assert!(pass);
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[test]
fn c4_asymptotic_decay() {
    let basis = square_basis(N);
    let (mut kz, mut lk, mut lt) = (Vec::new(), Vec::new(), Vec::new());
    let mut modes = Vec::new();
    for i in 0..7 {
        let z = 0.6 + 0.1 * i as f64;
        let s = plain(&basis, &[centre_trap(z)]);
        let km = s.report.dominant_mode.as_ref().unwrap().wavenumber;
        let t = &s.report.traps[0];
        modes.push(format!("{:.2}", km / TAU));
        kz.push(km * z);
        lk.push(t.kappa.ln() - 2.0 * (km * z).ln());
        lt.push(t.depth.tau.ln());
    }
    let (sk, st) = (fit_slope(&kz, &lk), fit_slope(&kz, &lt));
    let pass = (sk + 1.0).abs() <= 0.15 && (st + 2.0).abs() <= 0.5;
    verdict(
        "4",
        "asymptotic decay",
        pass,
        &format!("kappa slope {sk:.3} (-1 ± 15%), tau slope {st:.3} (-2 ± 25%), k_m/2π = [{}]", modes.join(", ")),
    );
    assert!(pass);
}

#[test]
fn c5_unit_conversions() {
    let p = PhysicalParams::beryllium(50.0, 200e6, 1.0);
    let r = physical_units(1.0, &cylindrical_quadrupole(), 30e-6, &p);
    let (f, e) = (r.mean_frequency_hz, r.energy_scale_ev);
    let pass = rel(f, 53e6) <= 0.01 && rel(e, 4.7) <= 0.02;
    verdict("5", "unit conversions", pass, &format!("ω̄/(2πκ) = {:.3} MHz (53 ± 1%), Φ̂ = {e:.3} eV (4.7 ± 2%)", f / 1e6));
    assert!(pass);
}

#[test]
fn c6_golden_ratio() {
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let (gamma, signs) = curvature_from_frequencies([1.0 / phi, 1.0, phi], axes).unwrap();
    let trace = (gamma[0][0] + gamma[1][1] + gamma[2][2]).abs();
    let equal = curvature_from_frequencies([1.0, 1.0, 1.0], axes);
    let pass = signs == [-1, -1, 1] && trace < 1e-12 && equal.is_err();
    verdict("6", "golden-ratio constructor", pass, &format!("signs {signs:?}, trace {trace:.1e}, (1,1,1) rejected: {}", equal.is_err()));
    assert!(pass);
}

fn suppression_case(basis: &FourierBasis, trap: TrapSpec, policy: &SuppressionPolicy) -> (Report<f64>, f64, usize, usize) {
    let s = synthesize(basis, &[trap], &[], &SolverOptions::default(), &AnalysisOptions::default(), Some(policy)).unwrap();
    let before = s.kappa_unsuppressed[0];
    let reduction = 1.0 - s.report.traps[0].kappa / before;
    let initial = plain(basis, &[s.system.traps[0].clone()]).report.spurious.len();
    (s.report, reduction, initial, s.system.extras.len())
}

#[test]
fn c7_spurious_suppression() {
    let square_policy = SuppressionPolicy { rounds: 4, fraction: 0.01, mode: SuppressionMode::AtMost, heights: vec![1.0] };
    let (sq, sq_red, sq_initial, sq_extras) = suppression_case(&square_basis(N), centre_trap(0.2), &square_policy);
    let hex_policy = hex_suppression_policy();
    let (hx, hx_red, hx_initial, hx_extras) = suppression_case(&hex_basis(N), hex_trap(1.0), &hex_policy);
    let sq_pass = sq_initial > 0 && sq.spurious.is_empty() && sq_red < 0.01;
    let hx_pass = hx.spurious.is_empty() && hx_red <= 0.25;
    verdict(
        "7",
        "spurious suppression",
        sq_pass && hx_pass,
        &format!(
            "square z/d=0.2: {sq_initial} → {} spurious, κ reduced {:.3}% (< 1%) with {sq_extras} constraints; \
             triangular z/d=1: {hx_initial} → {} spurious, κ reduced {:.1}% (≤ 25%) with {hx_extras} constraints",
            sq.spurious.len(),
            100.0 * sq_red,
            hx.spurious.len(),
            100.0 * hx_red
        ),
    );
    assert!(sq_pass && hx_pass);
}

fn hex_suppression_policy() -> SuppressionPolicy {
    SuppressionPolicy {
        rounds: 6,
        fraction: 0.01,
        mode: SuppressionMode::FollowAbove,
        heights: vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0],
    }
}

/// Gauss–Legendre nodes and weights on [0, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (1.0 - x), 0.5 * w)
        })
        .collect()
}

/// ∫ over the triangle of e^{-ik·s}, by a Duffy map onto the unit square.
fn triangle_integral(tri: &[[f64; 2]], k: [f64; 2], rule: &[(f64, f64)]) -> (f64, f64) {
    let e1 = [tri[1][0] - tri[0][0], tri[1][1] - tri[0][1]];
    let e2 = [tri[2][0] - tri[0][0], tri[2][1] - tri[0][1]];
    let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    let (mut re, mut im) = (0.0, 0.0);
    for &(u, wu) in rule {
        for &(v, wv) in rule {
            let (s, t) = (u, v * (1.0 - u));
            let x = tri[0][0] + s * e1[0] + t * e2[0];
            let y = tri[0][1] + s * e1[1] + t * e2[1];
            let ph = -(k[0] * x + k[1] * y);
            let w = wu * wv * (1.0 - u) * jac;
            re += w * ph.cos();
            im += w * ph.sin();
        }
    }
    (re, im)
}

#[test]
fn c8_property_suite() {
    let mut failures = Vec::new();
    let mut check = |name: &str, value: f64, limit: f64| {
        if !(value < limit) {
            failures.push(format!("{name} = {value:.2e} (limit {limit:.0e})"));
        }
        format!("{name} {value:.1e}")
    };
    let mut detail = Vec::new();

    let basis = square_basis(24);
    let system = assemble(&basis, &[centre_trap(0.3)], &[]).unwrap();
    let r = solve(&system, &SolverOptions::default()).unwrap();
    let field = basis.field(&r.a).unwrap();

    let mut trace_worst = 0.0f64;
    let mut fd_worst = 0.0f64;
    for (x, y, z) in [(0.13, 0.71, 0.2), (0.5, 0.5, 0.3), (0.91, 0.07, 0.45), (0.33, 0.4, 0.8)] {
        let s = field.evaluate(Position::new(x, y, z), Order::Hessian).unwrap();
        let h = s.hessian;
        let norm = h.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        trace_worst = trace_worst.max((h[0][0] + h[1][1] + h[2][2]).abs() / norm);
        // Central differences of the potential in Cartesian coordinates.
        let cart = basis.lattice().to_cartesian([x, y]);
        let phi = |dx: [f64; 3]| {
            let f = basis.lattice().to_fractional([cart[0] + dx[0], cart[1] + dx[1]]);
            field.evaluate(Position::new(f[0], f[1], z + dx[2]), Order::Value).unwrap().value
        };
        let step = 1e-4;
        for axis in 0..3 {
            let mut d = [0.0; 3];
            d[axis] = step;
            let fd = (phi(d) - phi(d.map(|v| -v))) / (2.0 * step);
            // Field scale that stays finite at the trap itself.
            let scale = s.gradient.iter().map(|g| g.abs()).fold(norm * z, f64::max);
            fd_worst = fd_worst.max((fd - s.gradient[axis]).abs() / scale);
        }
    }
    detail.push(check("Laplace trace", trace_worst, 1e-10));
    detail.push(check("finite differences", fd_worst, 1e-6));

    let inhom = inhomogeneous_solution(&system.rows, &system.rhs).unwrap();
    let flipped: Vec<f64> = r.a.iter().map(|v| 1.0 - v).collect();
    let complement = (project_scale(&flipped, &inhom.g) + r.scale).abs() / r.scale.abs();
    detail.push(check("complement C(1-a)+C(a)", complement, 1e-9));

    let ones = vec![1.0; basis.grid().len()];
    let uniform = basis.field(&ones).unwrap();
    let s = uniform.evaluate(Position::new(0.37, 0.61, 0.25), Order::Hessian).unwrap();
    let residue = s.gradient.iter().chain(s.hessian.iter().flatten()).map(|v| v.abs()).fold(0.0, f64::max);
    let psi = s.gradient.iter().map(|g| g * g).sum::<f64>();
    detail.push(check("all-ones field", residue, 1e-12));
    detail.push(check("all-ones psi", psi, 1e-24));

    let rule = gauss_legendre(24);
    let mut quad_worst = 0.0f64;
    let hex = hex_basis(6);
    for g in [&basis, &hex] {
        for shape in g.grid().base_shapes() {
            for (m1, m2) in [(0, 0), (1, 0), (0, 1), (2, -1), (-3, 4), (5, 5)] {
                let k = [TAU * m1 as f64, TAU * m2 as f64];
                let exact = patch_fourier_coeff(shape, m1, m2);
                // Fan triangulation from the first vertex.
                let (mut re, mut im) = (0.0, 0.0);
                for w in 1..shape.len() - 1 {
                    let (a, b) = triangle_integral(&[shape[0], shape[w], shape[w + 1]], k, &rule);
                    re += a;
                    im += b;
                }
                let area = patch_fourier_coeff(shape, 0, 0).re;
                quad_worst = quad_worst.max(((exact.re - re).powi(2) + (exact.im - im).powi(2)).sqrt() / area);
            }
        }
    }
    detail.push(check("patch coefficients vs quadrature", quad_worst, 1e-10));

    // Minimum-norm solution via the normal equations: g = Aᵀ(AAᵀ)⁻¹b.
    let (m, n) = (system.rows.len(), system.rows[0].len());
    let a = DMatrix::from_fn(m, n, |i, j| system.rows[i][j]);
    let b = DVector::from_vec(system.rhs.clone());
    let y = (&a * a.transpose()).lu().solve(&b).unwrap();
    let oracle = a.transpose() * y;
    let g = DVector::from_vec(inhom.g.clone());
    detail.push(check("minimum-norm g vs oracle", (&g - &oracle).norm() / oracle.norm(), 1e-8));

    let pass = failures.is_empty();
    verdict("8", "property suite", pass, &detail.join(", "));
    assert!(pass, "{failures:?}");
}

/// Two traps per hexagonal cell, stacked like adjacent (111) planes of a
/// cubic lattice with edge `b/√2`; frequencies (φ⁻¹, 1, φ) along the three
/// nearest-neighbour directions.
fn bilayer_traps() -> Vec<TrapSpec> {
    let lattice = BravaisLattice::hexagonal(1.0).unwrap();
    let dz = 1.0 / (2.0 * 6f64.sqrt());
    let (z_lo, z_hi) = (0.4 - dz, 0.4 + dz);
    let lower = [1.0 / 3.0, 1.0 / 3.0];
    let upper = [2.0 / 3.0, 2.0 / 3.0];
    let mut axes = [[0.0; 3]; 3];
    for (k, off) in [[1.0 / 3.0, 1.0 / 3.0], [-2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, -2.0 / 3.0]].iter().enumerate() {
        let c = lattice.to_cartesian(*off);
        let v = [c[0], c[1], z_hi - z_lo];
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        axes[k] = v.map(|x| x / len);
    }
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    let (gamma, _) = curvature_from_frequencies([1.0 / phi, 1.0, phi], axes).unwrap();
    vec![
        TrapSpec::new("minus", Position::new(lower[0], lower[1], z_lo), gamma),
        TrapSpec::new("plus", Position::new(upper[0], upper[1], z_hi), gamma),
    ]
}

#[test]
fn c9_bilayer_ratio() {
    let traps = bilayer_traps();
    let s = plain(&hex_basis(N), &traps);
    let (minus, plus) = (&s.report.traps[0], &s.report.traps[1]);
    let ratio = minus.kappa / plus.kappa;
    let evaluated = minus.kappa_evaluated / plus.kappa_evaluated;
    let target = 0.0022 / 0.020;
    let pass = s.result.scale > 0.0 && ratio > target / 2.0 && ratio < target * 2.0;
    verdict(
        "9",
        "bilayer curvature ratio",
        pass,
        &format!(
            "κ−/κ+ = {ratio:.4} (evaluated {evaluated:.4}; target {target:.3} within ×2), κ− = {:.3e}, κ+ = {:.3e}, spurious {}",
            minus.kappa,
            plus.kappa,
            s.report.spurious.len()
        ),
    );
    assert!(pass);
}
