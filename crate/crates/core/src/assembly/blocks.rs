//! Element stiffness blocks for edges and edge pairs.
//!
//! Each block is the linear map from the displacements of its nodes to the
//! external forces balancing the internal ones, i.e. the contribution to `K`
//! in `K u = F`. Degrees of freedom are interleaved: node `n` owns `2n`
//! (x) and `2n + 1` (y).

use crate::network::{Edge, EdgePair};
use crate::{Error, Result};

/// Dense `N x N` block with the global dofs it scatters to.
#[derive(Clone, Debug, PartialEq)]
pub struct Block<const N: usize> {
    pub dofs: [usize; N],
    /// Row-major entries.
    pub matrix: [[f64; N]; N],
}

impl<const N: usize> Block<N> {
    /// `½ uᵀ B u` over the block's dofs, with `u` a global vector.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let local: [f64; N] = std::array::from_fn(|k| u[self.dofs[k]]);
        let mut e = 0.0;
        for r in 0..N {
            for c in 0..N {
                e += local[r] * self.matrix[r][c] * local[c];
            }
        }
        0.5 * e
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for r in 0..N {
            for c in 0..N {
                m = m.max((self.matrix[r][c] - self.matrix[c][r]).abs());
            }
        }
        m
    }
}

/// How the Poisson cross coupling between the two edges of a pair is weighted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PoissonCross {
    /// Each row uses its own `a_k · w_other` product, as the force law is written.
    #[default]
    AsWritten,
    /// Both rows use the mean product; the resulting block is symmetric.
    Averaged,
}

pub(crate) fn rot90(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Unit direction and length of `to - from`.
fn direction(from: [f64; 2], to: [f64; 2]) -> Option<([f64; 2], f64)> {
    let d = [to[0] - from[0], to[1] - from[1]];
    let len = d[0].hypot(d[1]);
    (len > 0.0).then(|| ([d[0] / len, d[1] / len], len))
}

fn node_dofs<const M: usize, const N: usize>(nodes: [usize; M]) -> [usize; N] {
    debug_assert_eq!(2 * M, N);
    std::array::from_fn(|k| 2 * nodes[k / 2] + k % 2)
}

/// Axial spring `s [[D, -D], [-D, D]]` with `s = k a / L` and `D = d dᵀ`.
pub fn edge_extension_block(edge: &Edge, positions: &[[f64; 2]]) -> Result<Block<4>> {
    let [i, o] = edge.nodes;
    let (d, len) = direction(positions[i], positions[o])
        .ok_or_else(|| Error::Geometry(format!("edge {} has zero length", edge.id)))?;
    let s = edge.k * edge.a / len;
    let mut m = [[0.0; 4]; 4];
    for r in 0..2 {
        for c in 0..2 {
            let v = s * d[r] * d[c];
            m[r][c] = v;
            m[r + 2][c + 2] = v;
            m[r][c + 2] = -v;
            m[r + 2][c] = -v;
        }
    }
    Ok(Block {
        dofs: node_dofs([i, o]),
        matrix: m,
    })
}

/// Geometry shared by the pair blocks: directions from the center towards
/// the outer nodes, lengths and the outward normals.
#[derive(Clone, Copy, Debug)]
pub struct PairFrame {
    pub d: [[f64; 2]; 2],
    pub len: [f64; 2],
    pub n: [[f64; 2]; 2],
}

impl PairFrame {
    /// Normals use opposite rotational senses on the two edges,
    /// `n₁ = R90 d₁` and `n₂ = -R90 d₂`, so that a rigid rotation leaves the
    /// linearized angle unchanged.
    pub fn new(pair: &EdgePair, positions: &[[f64; 2]]) -> Result<Self> {
        let center = positions[pair.center];
        let mk = |k: usize| {
            direction(center, positions[pair.outer[k]]).ok_or_else(|| {
                Error::Geometry(format!("edge {} of pair {} has zero length", pair.edges[k], pair.id))
            })
        };
        let (d0, l0) = mk(0)?;
        let (d1, l1) = mk(1)?;
        let r1 = rot90(d1);
        Ok(Self {
            d: [d0, d1],
            len: [l0, l1],
            n: [rot90(d0), [-r1[0], -r1[1]]],
        })
    }

    /// Both edges leave the center in the same direction (overlapping edges).
    pub fn is_degenerate(&self) -> bool {
        dot(self.d[0], self.d[1]) > 1.0 - 1e-12
    }

    /// Gradient of the linearized angle change with respect to the
    /// displacements of (outer₁, center, outer₂).
    pub fn angle_gradient(&self) -> [f64; 6] {
        let gi = [self.n[0][0] / self.len[0], self.n[0][1] / self.len[0]];
        let gl = [self.n[1][0] / self.len[1], self.n[1][1] / self.len[1]];
        [gi[0], gi[1], -gi[0] - gl[0], -gi[1] - gl[1], gl[0], gl[1]]
    }
}

fn pair_dofs(pair: &EdgePair) -> [usize; 6] {
    node_dofs([pair.outer[0], pair.center, pair.outer[1]])
}

/// Angular stiffness `κ V g gᵀ` with `g` the gradient of the linearized
/// angle change.
pub fn angular_deviation_block(pair: &EdgePair, positions: &[[f64; 2]]) -> Result<Block<6>> {
    let frame = PairFrame::new(pair, positions)?;
    let g = frame.angle_gradient();
    let s = pair.kappa * pair.volume;
    let mut m = [[0.0; 6]; 6];
    for r in 0..6 {
        for c in 0..6 {
            m[r][c] = s * g[r] * g[c];
        }
    }
    Ok(Block {
        dofs: pair_dofs(pair),
        matrix: m,
    })
}

/// Poisson coupling of an edge pair. Rows of the outer nodes follow the
/// force law directly; the center row balances them.
pub fn poisson_block(pair: &EdgePair, edges: &[Edge], positions: &[[f64; 2]], cross: PoissonCross) -> Result<Block<6>> {
    let frame = PairFrame::new(pair, positions)?;
    let e = [&edges[pair.edges[0]], &edges[pair.edges[1]]];
    let alpha = [
        pair.eta * e[0].a / frame.len[0],
        pair.eta * e[1].a / frame.len[1],
    ];
    // |n_k · d_other| for k = outer₁ and outer₂
    let c = [dot(frame.n[0], frame.d[1]).abs(), dot(frame.n[1], frame.d[0]).abs()];
    let beta = [
        pair.gamma * e[1].w * c[0] / (2.0 * frame.len[1]),
        pair.gamma * e[0].w * c[1] / (2.0 * frame.len[0]),
    ];
    let mut coupling = [alpha[0] * beta[0], alpha[1] * beta[1]];
    if cross == PoissonCross::Averaged {
        let mean = 0.5 * (coupling[0] + coupling[1]);
        coupling = [mean, mean];
    }

    // local node slots: 0 = outer₁, 1 = center, 2 = outer₂
    let mut m = [[0.0; 6]; 6];
    for (k, slot, other_slot) in [(0usize, 0usize, 2usize), (1, 2, 0)] {
        let o = 1 - k;
        let (dk, dother) = (frame.d[k], frame.d[o]);
        for r in 0..2 {
            for col in 0..2 {
                let own = alpha[k] * dk[r] * dk[col];
                let crossv = coupling[k] * dk[r] * dother[col];
                m[2 * slot + r][2 * slot + col] += own;
                m[2 * slot + r][2 + col] -= own + crossv;
                m[2 * slot + r][2 * other_slot + col] += crossv;
            }
        }
    }
    for r in 0..2 {
        for col in 0..6 {
            m[2 + r][col] = -(m[r][col] + m[4 + r][col]);
        }
    }
    Ok(Block {
        dofs: pair_dofs(pair),
        matrix: m,
    })
}
