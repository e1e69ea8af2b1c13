use std::sync::Arc;

use crate::banded::BandedMatrix;
use crate::error::Result;
use crate::field::{Closure, Field};
use crate::geometry::{BoundaryRole, Mesh};

use super::{biharmonic, laplacian};

/// Stencil reach of the biharmonic operator, in nodes.
const REACH: usize = 2;
/// Colors per axis for probing: nodes of one color are at least
/// `2 * REACH + 1` apart, so their stencils never overlap.
const COLORS: usize = 2 * REACH + 1;

/// The discrete operators restricted to the free unknowns of a
/// configuration: interior nodes for hinged problems, everything except the
/// clamped end for the cantilever.
///
/// Both matrices act on unknown vectors and use the homogeneous boundary
/// closure. `bending` is `Δ_h²` (including `μ₁` on a free end), `laplace` is
/// `Δ_h`. `bending` is symmetric in the trapezoid-weighted inner product;
/// `laplace` is too on hinged configurations.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    mesh: Arc<Mesh>,
    mu1: f64,
    nodes: Vec<usize>,
    slots: Vec<Option<usize>>,
    weights: Vec<f64>,
    bandwidth: usize,
    bending: BandedMatrix,
    laplace: BandedMatrix,
}

impl DiscreteSystem {
    pub fn new(mesh: &Arc<Mesh>, mu1: f64) -> Result<Self> {
        let mut slots = vec![None; mesh.len()];
        let mut nodes = Vec::new();
        for (n, slot) in slots.iter_mut().enumerate() {
            let (i, j) = mesh.ij(n);
            if is_unknown(mesh, i, j) {
                *slot = Some(nodes.len());
                nodes.push(n);
            }
        }
        let weights = nodes.iter().map(|&n| mesh.area_weights()[n]).collect();
        let mut bandwidth = 0;
        for (r, &n) in nodes.iter().enumerate() {
            let (i, j) = mesh.ij(n);
            for (a, b) in neighbourhood(mesh, i, j) {
                if let Some(c) = slots[mesh.index(a, b)] {
                    bandwidth = bandwidth.max(r.abs_diff(c));
                }
            }
        }
        let mut system = Self {
            mesh: Arc::clone(mesh),
            mu1,
            bending: BandedMatrix::zeros(nodes.len(), bandwidth, bandwidth),
            laplace: BandedMatrix::zeros(nodes.len(), bandwidth, bandwidth),
            nodes,
            slots,
            weights,
            bandwidth,
        };
        system.assemble()?;
        Ok(system)
    }

    fn assemble(&mut self) -> Result<()> {
        let mesh = Arc::clone(&self.mesh);
        let closure = self.homogeneous_closure();
        let color_rows = if mesh.dim() == 2 { COLORS } else { 1 };
        for cj in 0..color_rows {
            for ci in 0..COLORS {
                let colored = |n: usize| {
                    let (i, j) = mesh.ij(n);
                    i % COLORS == ci && j % COLORS == cj
                };
                let probe: Vec<f64> = (0..mesh.len())
                    .map(|n| {
                        if self.slots[n].is_some() && colored(n) {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let probe = Field::from_physical(&mesh, &probe).closed(&closure)?;
                let bih = biharmonic(&probe)?;
                let lap = laplacian(&probe)?;
                for (r, &n) in self.nodes.iter().enumerate() {
                    let (i, j) = mesh.ij(n);
                    let source = neighbourhood(&mesh, i, j)
                        .map(|(a, b)| mesh.index(a, b))
                        .find(|&m| colored(m) && self.slots[m].is_some());
                    if let Some(m) = source {
                        let c = self.slots[m].unwrap();
                        self.bending.set(r, c, bih.at(n));
                        self.laplace.set(r, c, lap.at(n));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Physical node index of every unknown.
    pub fn unknown_nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Unknown slot of a physical node, if it is free.
    pub fn slot(&self, node: usize) -> Option<usize> {
        self.slots[node]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bending(&self) -> &BandedMatrix {
        &self.bending
    }

    pub fn laplace(&self) -> &BandedMatrix {
        &self.laplace
    }

    pub fn homogeneous_closure(&self) -> Closure {
        Closure::homogeneous(&self.mesh, self.mu1)
    }

    pub fn gather(&self, field: &Field) -> Vec<f64> {
        self.nodes.iter().map(|&n| field.at(n)).collect()
    }

    pub fn gather_slice(&self, values: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&n| values[n]).collect()
    }

    /// Field with the given unknown values and zeros on constrained nodes;
    /// ghosts are left open.
    pub fn scatter(&self, values: &[f64]) -> Field {
        let mut physical = vec![0.0; self.mesh.len()];
        for (&n, &v) in self.nodes.iter().zip(values) {
            physical[n] = v;
        }
        Field::from_physical(&self.mesh, &physical)
    }

    /// Trapezoid-weighted inner product of unknown vectors.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }
}

fn is_unknown(mesh: &Mesh, i: usize, j: usize) -> bool {
    let [nx, ny] = mesh.nodes();
    let on_left = i == 0;
    let on_right = i == nx - 1;
    if mesh.dim() == 1 {
        use crate::geometry::Segment;
        let constrained = |s: Segment| mesh.role(s) != Some(BoundaryRole::FreeDamped);
        return !(on_left && constrained(Segment::Left) || on_right && constrained(Segment::Right));
    }
    !(on_left || on_right || j == 0 || j == ny - 1)
}

fn neighbourhood(mesh: &Mesh, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> {
    let [nx, ny] = mesh.nodes();
    let r = REACH;
    let (j0, j1) = if mesh.dim() == 2 {
        (j.saturating_sub(r), (j + r).min(ny - 1))
    } else {
        (0, 0)
    };
    let (i0, i1) = (i.saturating_sub(r), (i + r).min(nx - 1));
    (j0..=j1).flat_map(move |b| (i0..=i1).map(move |a| (a, b)))
}
