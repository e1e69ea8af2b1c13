//! Scalar grid functions with ghost layers.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryRole, Mesh, Segment, GHOST_LAYERS};

/// Boundary data used to fill the ghost layers of one segment.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeClosure {
    /// Prescribed bending moment `Δu = M` at every node of the segment.
    /// Layer 1 reproduces the moment through the centered Laplacian; layer 2
    /// is the odd reflection about the boundary node.
    Hinged { moments: Vec<f64> },
    /// `∂ν u = 0` by even reflection.
    Clamped,
    /// Free end of a beam: `uₓₓ = 0` and `∂ν uₓₓ - μ₁ u = shear`.
    Free { mu1: f64, shear: f64 },
}

/// Ghost data for every segment of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Closure {
    pub edges: Vec<(Segment, EdgeClosure)>,
}

impl Closure {
    /// Homogeneous closure of the mesh's configuration: zero moments on
    /// hinged edges, zero shear on free ends.
    pub fn homogeneous(mesh: &Mesh, mu1: f64) -> Self {
        let edges = mesh
            .segments()
            .iter()
            .map(|&s| {
                let closure = match mesh.role(s).expect("partition covers every segment") {
                    BoundaryRole::HingedDamped => EdgeClosure::Hinged {
                        moments: vec![0.0; segment_len(mesh, s)],
                    },
                    BoundaryRole::Clamped => EdgeClosure::Clamped,
                    BoundaryRole::FreeDamped => EdgeClosure::Free { mu1, shear: 0.0 },
                };
                (s, closure)
            })
            .collect();
        Self { edges }
    }
}

fn segment_len(mesh: &Mesh, s: Segment) -> usize {
    if mesh.dim() == 1 {
        1
    } else if s.normal_axis() == 0 {
        mesh.ny()
    } else {
        mesh.nx()
    }
}

/// Values on the extended grid of a mesh. Ghost values are only ever
/// written by [`Field::close`] or by sampling an analytic function.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    ghost_layers: u8,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.ghost_layers == other.ghost_layers
            && self.values == other.values
            && *self.mesh == *other.mesh
    }
}

impl Field {
    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            values: vec![0.0; mesh.ext_len()],
            ghost_layers: 0,
        }
    }

    /// Sample `f` at physical nodes; ghosts stay unset.
    pub fn from_fn(mesh: &Arc<Mesh>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut field = Self::zeros(mesh);
        for j in 0..mesh.ny() {
            for i in 0..mesh.nx() {
                let k = mesh.ext_index(i as isize, j as isize).unwrap();
                field.values[k] = f(mesh.coords(i, j));
            }
        }
        field
    }

    /// Sample `f` on the whole extended grid, ghosts included.
    pub fn from_fn_extended(mesh: &Arc<Mesh>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut field = Self::zeros(mesh);
        let g = GHOST_LAYERS as isize;
        let [nx, ny] = mesh.nodes();
        let (j0, j1) = if mesh.dim() == 2 {
            (-g, ny as isize + g)
        } else {
            (0, 1)
        };
        for j in j0..j1 {
            for i in -g..nx as isize + g {
                let k = mesh.ext_index(i, j).unwrap();
                field.values[k] = f(mesh.coords_ext(i, j));
            }
        }
        field.ghost_layers = GHOST_LAYERS as u8;
        field
    }

    /// Build from physical-node values in row-major order.
    pub fn from_physical(mesh: &Arc<Mesh>, values: &[f64]) -> Self {
        assert_eq!(values.len(), mesh.len(), "physical value count");
        let mut field = Self::zeros(mesh);
        for (n, &v) in values.iter().enumerate() {
            let (i, j) = mesh.ij(n);
            let k = mesh.ext_index(i as isize, j as isize).unwrap();
            field.values[k] = v;
        }
        field
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn ghost_layers(&self) -> u8 {
        self.ghost_layers
    }

    pub(crate) fn set_ghost_layers(&mut self, layers: u8) {
        self.ghost_layers = layers;
    }

    pub fn same_mesh(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    pub fn check_same_mesh(&self, other: &Field) -> Result<()> {
        if self.same_mesh(other) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    pub fn require_layers(&self, needed: u8) -> Result<()> {
        if self.ghost_layers < needed {
            Err(Error::Unclosed {
                needed,
                have: self.ghost_layers,
            })
        } else {
            Ok(())
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.mesh.ext_index(i as isize, j as isize).unwrap()]
    }

    #[inline]
    pub fn get_ext(&self, i: isize, j: isize) -> f64 {
        self.values[self
            .mesh
            .ext_index(i, j)
            .expect("node inside extended grid")]
    }

    #[inline]
    pub(crate) fn set_ext(&mut self, i: isize, j: isize, v: f64) {
        let k = self
            .mesh
            .ext_index(i, j)
            .expect("node inside extended grid");
        self.values[k] = v;
    }

    /// Overwrite a physical value. Invalidates the ghost closure.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.set_ext(i as isize, j as isize, v);
        self.ghost_layers = 0;
    }

    /// Value at physical node with row-major index `n`.
    #[inline]
    pub fn at(&self, n: usize) -> f64 {
        let (i, j) = self.mesh.ij(n);
        self.get(i, j)
    }

    /// Physical values in row-major order.
    pub fn physical(&self) -> Vec<f64> {
        (0..self.mesh.len()).map(|n| self.at(n)).collect()
    }

    pub fn is_finite(&self) -> bool {
        (0..self.mesh.len()).all(|n| self.at(n).is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.mesh.len())
            .map(|n| self.at(n).abs())
            .fold(0.0, f64::max)
    }

    /// Extended-grid linear combination `a·self + b·other`; the result keeps
    /// the smaller of the two closures.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check_same_mesh(other)?;
        Ok(Field {
            mesh: Arc::clone(&self.mesh),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            ghost_layers: self.ghost_layers.min(other.ghost_layers),
        })
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|x| a * x).collect(),
            ghost_layers: self.ghost_layers,
        }
    }

    /// Fill both ghost layers from boundary data.
    pub fn close(&mut self, closure: &Closure) -> Result<()> {
        let mesh = Arc::clone(&self.mesh);
        for (segment, edge) in &closure.edges {
            let nodes = mesh.segment_nodes(*segment)?;
            let h = mesh.normal_spacing(*segment);
            let tangential_h = if mesh.dim() == 2 {
                mesh.spacing()[1 - segment.normal_axis()]
            } else {
                1.0
            };
            for (k, &(i, j)) in nodes.iter().enumerate() {
                let (i, j) = (i as isize, j as isize);
                let at = |s: isize, f: &Field| {
                    let (a, b) = mesh.step_normal(*segment, i, j, s);
                    f.get_ext(a, b)
                };
                let ub = self.get_ext(i, j);
                let u1 = at(-1, self);
                let u2 = at(-2, self);
                let (g1, g2) = match edge {
                    EdgeClosure::Hinged { moments } => {
                        if moments.len() != nodes.len() {
                            return Err(Error::InvalidParameter(format!(
                                "{segment:?}: {} moments for {} nodes",
                                moments.len(),
                                nodes.len()
                            )));
                        }
                        let tangential = if mesh.dim() == 2 && k > 0 && k + 1 < nodes.len() {
                            let (a0, b0) = nodes[k - 1];
                            let (a1, b1) = nodes[k + 1];
                            (self.get(a0, b0) - 2.0 * ub + self.get(a1, b1))
                                / (tangential_h * tangential_h)
                        } else {
                            0.0
                        };
                        let g1 = 2.0 * ub - u1 + h * h * (moments[k] - tangential);
                        (g1, 2.0 * ub - u2)
                    }
                    EdgeClosure::Clamped => (u1, u2),
                    EdgeClosure::Free { mu1, shear } => {
                        if mesh.dim() != 1 {
                            return Err(Error::InvalidParameter(
                                "free closure is one-dimensional".into(),
                            ));
                        }
                        let g1 = 2.0 * ub - u1;
                        let g2 = 2.0 * g1 - 2.0 * u1 + u2 + 2.0 * h * h * h * (mu1 * ub + shear);
                        (g1, g2)
                    }
                };
                let (a, b) = mesh.step_normal(*segment, i, j, 1);
                self.set_ext(a, b, g1);
                let (a, b) = mesh.step_normal(*segment, i, j, 2);
                self.set_ext(a, b, g2);
            }
        }
        self.ghost_layers = GHOST_LAYERS as u8;
        Ok(())
    }

    pub fn closed(mut self, closure: &Closure) -> Result<Self> {
        self.close(closure)?;
        Ok(self)
    }
}
