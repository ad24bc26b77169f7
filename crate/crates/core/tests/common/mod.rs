//! Test-side oracles, written from the force laws without the crate's block
//! code, plus a corpus of small networks.

#![allow(dead_code)]

use fibernet::network::{
    assign_coefficients, generate_fiber_network, generate_perturbed, generate_structured_with, BondCoefficients,
    CoefficientScheme, FiberCoefficients, FiberParams, Network, PairSelection, UniformRange,
};
use nalgebra::{DMatrix, DVector};

type V2 = [f64; 2];

fn sub(a: V2, b: V2) -> V2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: V2, b: V2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn unit(v: V2) -> (V2, f64) {
    let l = v[0].hypot(v[1]);
    ([v[0] / l, v[1] / l], l)
}

/// Counterclockwise quarter turn.
fn rot(v: V2) -> V2 {
    [-v[1], v[0]]
}

fn disp(u: &[f64], i: usize) -> V2 {
    [u[2 * i], u[2 * i + 1]]
}

fn add_force(f: &mut [f64], i: usize, v: V2) {
    f[2 * i] += v[0];
    f[2 * i + 1] += v[1];
}

/// Internal nodal forces for displacement `u`, straight from the force
/// laws: edge extension, angular deviation with the linearized angle, and
/// the Poisson effect. Degenerate pairs (overlapping edges) are skipped.
pub fn internal_forces(net: &Network, u: &[f64]) -> Vec<f64> {
    let x = |i: usize| net.nodes[i].position;
    let mut f = vec![0.0; 2 * net.nodes.len()];
    for e in &net.edges {
        let [i, j] = e.nodes;
        for (me, other) in [(i, j), (j, i)] {
            let (d, l) = unit(sub(x(other), x(me)));
            let dl = dot(sub(disp(u, other), disp(u, me)), d);
            let s = e.k * e.a / l * dl;
            add_force(&mut f, me, [s * d[0], s * d[1]]);
        }
    }
    for p in &net.pairs {
        let j = p.center;
        let (oi, ol) = (p.outer[0], p.outer[1]);
        let (di, li) = unit(sub(x(oi), x(j)));
        let (dl, ll) = unit(sub(x(ol), x(j)));
        if dot(di, dl) > 1.0 - 1e-12 {
            continue;
        }
        let ni = rot(di);
        let nl = {
            let r = rot(dl);
            [-r[0], -r[1]]
        };
        // angular deviation
        let dtheta = dot(sub(disp(u, oi), disp(u, j)), ni) / li + dot(sub(disp(u, ol), disp(u, j)), nl) / ll;
        let fa_i = {
            let s = -p.kappa * p.volume / li * dtheta;
            [s * ni[0], s * ni[1]]
        };
        let fa_l = {
            let s = -p.kappa * p.volume / ll * dtheta;
            [s * nl[0], s * nl[1]]
        };
        add_force(&mut f, oi, fa_i);
        add_force(&mut f, ol, fa_l);
        add_force(&mut f, j, [-fa_i[0] - fa_l[0], -fa_i[1] - fa_l[1]]);

        // Poisson effect
        let ei = &net.edges[p.edges[0]];
        let el = &net.edges[p.edges[1]];
        let ext_i = dot(sub(disp(u, oi), disp(u, j)), di);
        let ext_l = dot(sub(disp(u, ol), disp(u, j)), dl);
        let fp = |a_k: f64, l_k: f64, d_k: V2, n_k: V2, ext_k: f64, w_o: f64, l_o: f64, d_o: V2, ext_o: f64| {
            let s = -p.eta * a_k / l_k * (ext_k + p.gamma * w_o * ext_o / (2.0 * l_o) * dot(n_k, d_o).abs());
            [s * d_k[0], s * d_k[1]]
        };
        let fp_i = fp(ei.a, li, di, ni, ext_i, el.w, ll, dl, ext_l);
        let fp_l = fp(el.a, ll, dl, nl, ext_l, ei.w, li, di, ext_i);
        add_force(&mut f, oi, fp_i);
        add_force(&mut f, ol, fp_l);
        add_force(&mut f, j, [-fp_i[0] - fp_l[0], -fp_i[1] - fp_l[1]]);
    }
    f
}

/// Dense `K` with `K u = -f_internal(u)`, probed column by column and
/// symmetrized.
pub fn dense_stiffness(net: &Network) -> DMatrix<f64> {
    let n = 2 * net.nodes.len();
    let mut k = DMatrix::zeros(n, n);
    let mut u = vec![0.0; n];
    for c in 0..n {
        u[c] = 1.0;
        let f = internal_forces(net, &u);
        for r in 0..n {
            k[(r, c)] = -f[r];
        }
        u[c] = 0.0;
    }
    (&k + k.transpose()) * 0.5
}

pub fn to_dense(k: &fibernet::linalg::CsrMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(k.nrows(), k.ncols());
    for (r, c, v) in k.iter() {
        d[(r, c)] += v;
    }
    d
}

pub fn to_vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Random coefficients around unit values with widths scaled to the grid.
pub fn grid_random(h: f64) -> CoefficientScheme {
    let w = 0.2 * h;
    let nominal = FiberCoefficients {
        k: 1.0,
        a: w * 1e-3,
        w,
        kappa: 1.0,
        eta: 0.3,
        gamma: 0.3,
    };
    CoefficientScheme::random_around(nominal, 0.5, 1.5, 1e-3)
}

pub fn fiber_random() -> CoefficientScheme {
    CoefficientScheme::Fiber {
        fiber: FiberCoefficients {
            k: 1.0,
            a: 1e-4,
            w: 1e-2,
            kappa: 1.0,
            eta: 0.3,
            gamma: 0.3,
        },
        bond: BondCoefficients {
            kappa: 1.0,
            eta: 0.3,
            gamma: 0.0,
        },
        spread: Some(UniformRange::new(0.5, 1.5)),
        thickness: 1e-2,
    }
}

/// Small fiber networks (at most `max_nodes` nodes) on the unit square.
pub fn small_fiber_networks(count: usize, max_nodes: usize) -> Vec<Network> {
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < count && seed < 10_000 {
        seed += 1;
        let params = FiberParams::new(1.0, 5, 0.7, 2, seed);
        let Ok(net) = generate_fiber_network(&params) else {
            continue;
        };
        if net.nodes.len() <= max_nodes {
            out.push(assign_coefficients(net, &fiber_random(), seed).unwrap());
        }
    }
    out
}

/// At least ten networks with at most 50 nodes covering every generator,
/// pair selection and coefficient scheme.
pub fn small_corpus() -> Vec<(String, Network)> {
    let mut out = Vec::new();
    for (m, sel) in [
        (2, PairSelection::All),
        (3, PairSelection::All),
        (4, PairSelection::Collinear),
        (5, PairSelection::Perpendicular),
        (6, PairSelection::All),
    ] {
        let net = generate_structured_with(m, 1.0, sel).unwrap();
        let net = assign_coefficients(net, &grid_random(1.0 / m as f64), m as u64).unwrap();
        out.push((format!("structured m={m} {sel:?}"), net));
    }
    for (m, seed) in [(3, 1), (4, 2), (5, 3), (6, 4)] {
        let net = generate_perturbed(m, 1.0, 0.3, seed).unwrap();
        let net = assign_coefficients(net, &grid_random(1.0 / m as f64), seed + 10).unwrap();
        out.push((format!("perturbed m={m} seed={seed}"), net));
    }
    for (k, net) in small_fiber_networks(4, 50).into_iter().enumerate() {
        out.push((format!("fiber #{k}"), net));
    }
    out
}

/// Translations in x and y and the linearized rotation about the centroid.
pub fn rigid_modes(net: &Network) -> [Vec<f64>; 3] {
    let n = net.nodes.len();
    let c = net.nodes.iter().fold([0.0, 0.0], |acc, nd| {
        [acc[0] + nd.position[0] / n as f64, acc[1] + nd.position[1] / n as f64]
    });
    let mut tx = vec![0.0; 2 * n];
    let mut ty = vec![0.0; 2 * n];
    let mut r = vec![0.0; 2 * n];
    for (i, nd) in net.nodes.iter().enumerate() {
        tx[2 * i] = 1.0;
        ty[2 * i + 1] = 1.0;
        r[2 * i] = -(nd.position[1] - c[1]);
        r[2 * i + 1] = nd.position[0] - c[0];
    }
    [tx, ty, r]
}

/// Least-squares slope of `ln err` against `ln H`.
pub fn slope(h: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Mean squared residual of the least-squares line through
/// `(ln H, ln err)`.
pub fn residual_variance(h: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let b = slope(h, err);
    let a = (y.iter().sum::<f64>() - b * x.iter().sum::<f64>()) / n;
    x.iter().zip(&y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum::<f64>() / n
}
