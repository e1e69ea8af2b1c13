//! Finite-difference operators and quadratures on a [`Mesh`].
//!
//! Every stencil is second order: centered in the interior, one-sided
//! three-point at boundaries, trapezoid quadrature throughout.

mod eigen;
mod system;

use std::sync::Arc;

pub use eigen::{
    dirichlet_laplace_eigenvalue, smallest_eigenvalue, smallest_eigenvalue_of,
    smallest_eigenvalue_with, EigenOptions,
};
pub use system::DiscreteSystem;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{BoundaryRole, Mesh, Segment};

/// Default Poisson modulus.
pub const DEFAULT_POISSON: f64 = 0.3;

/// Material and loading parameters. The load is stored at physical nodes in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    pub gamma: f64,
    pub mu: f64,
    pub mu1: f64,
    pub load: Vec<f64>,
}

impl PhysicsParams {
    pub fn new(gamma: f64, mu: f64, mu1: f64, load: Vec<f64>) -> Result<Self> {
        let params = Self {
            gamma,
            mu,
            mu1,
            load,
        };
        params.validate()?;
        Ok(params)
    }

    /// No load, `μ = 1`, `μ₁ = 0`.
    pub fn unloaded(mesh: &Mesh, gamma: f64) -> Self {
        Self {
            gamma,
            mu: 1.0,
            mu1: 0.0,
            load: vec![0.0; mesh.len()],
        }
    }

    pub fn with_load(mut self, mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        self.load = (0..mesh.len())
            .map(|n| {
                let (i, j) = mesh.ij(n);
                f(mesh.coords(i, j))
            })
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mu must lie in (0, 1], got {}",
                self.mu
            )));
        }
        if !(self.mu1 >= 0.0 && self.mu1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mu1 must be >= 0, got {}",
                self.mu1
            )));
        }
        if self.load.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("load has non-finite values".into()));
        }
        Ok(())
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.load.len() != mesh.len() {
            return Err(Error::InvalidParameter(format!(
                "load has {} values, mesh has {} nodes",
                self.load.len(),
                mesh.len()
            )));
        }
        Ok(())
    }

    pub fn load_field(&self, mesh: &Arc<Mesh>) -> Field {
        Field::from_physical(mesh, &self.load)
    }

    /// `‖p‖²` with trapezoid weights.
    pub fn load_norm_sq(&self, mesh: &Mesh) -> f64 {
        self.load
            .iter()
            .zip(mesh.area_weights())
            .map(|(p, w)| w * p * p)
            .sum()
    }
}

fn lap_at(u: &Field, h: [f64; 2], dim: usize, i: isize, j: isize) -> f64 {
    let c = u.get_ext(i, j);
    let mut s = (u.get_ext(i - 1, j) - 2.0 * c + u.get_ext(i + 1, j)) / (h[0] * h[0]);
    if dim == 2 {
        s += (u.get_ext(i, j - 1) - 2.0 * c + u.get_ext(i, j + 1)) / (h[1] * h[1]);
    }
    s
}

/// Centered Laplacian at every physical node. With two closed ghost layers
/// the result is also evaluated on the first ghost layer (corner ghosts
/// excepted), so it can be differentiated once more.
pub fn laplacian(u: &Field) -> Result<Field> {
    u.require_layers(1)?;
    let mesh = u.mesh();
    let h = mesh.spacing();
    let dim = mesh.dim();
    let [nx, ny] = mesh.nodes();
    let mut out = Field::zeros(mesh);
    let (j0, j1) = if dim == 2 { (0, ny as isize) } else { (0, 1) };
    for j in j0..j1 {
        for i in 0..nx as isize {
            out.set_ext(i, j, lap_at(u, h, dim, i, j));
        }
    }
    if u.ghost_layers() >= 2 {
        for j in j0..j1 {
            for i in [-1, nx as isize] {
                if dim == 2 && (j == 0 || j == ny as isize - 1) {
                    continue;
                }
                out.set_ext(i, j, lap_at(u, h, dim, i, j));
            }
        }
        if dim == 2 {
            for i in 1..nx as isize - 1 {
                for j in [-1, ny as isize] {
                    out.set_ext(i, j, lap_at(u, h, dim, i, j));
                }
            }
        }
        out.set_ghost_layers(1);
    }
    Ok(out)
}

/// `Δ_h(Δ_h u)` at physical nodes. Rectangle corners are set to zero since
/// the composed stencil reaches diagonal ghosts there.
pub fn biharmonic(u: &Field) -> Result<Field> {
    u.require_layers(2)?;
    let mut out = laplacian(&laplacian(u)?)?;
    out.set_ghost_layers(0);
    let mesh = Arc::clone(u.mesh());
    if mesh.dim() == 2 {
        let [nx, ny] = mesh.nodes();
        for (i, j) in [(0, 0), (nx - 1, 0), (0, ny - 1), (nx - 1, ny - 1)] {
            out.set_ext(i as isize, j as isize, 0.0);
        }
    }
    Ok(out)
}

fn one_sided_or_centered(h: f64, n: usize, idx: usize, sample: impl Fn(isize) -> f64) -> f64 {
    let k = idx as isize;
    if idx == 0 {
        (-3.0 * sample(0) + 4.0 * sample(1) - sample(2)) / (2.0 * h)
    } else if idx == n - 1 {
        (3.0 * sample(k) - 4.0 * sample(k - 1) + sample(k - 2)) / (2.0 * h)
    } else {
        (sample(k + 1) - sample(k - 1)) / (2.0 * h)
    }
}

/// Gradient at every physical node, physical values only.
pub fn gradient(u: &Field) -> Vec<[f64; 2]> {
    let mesh = u.mesh();
    let h = mesh.spacing();
    let [nx, ny] = mesh.nodes();
    (0..mesh.len())
        .map(|n| {
            let (i, j) = mesh.ij(n);
            let gx = one_sided_or_centered(h[0], nx, i, |a| u.get_ext(a, j as isize));
            let gy = if mesh.dim() == 2 {
                one_sided_or_centered(h[1], ny, j, |b| u.get_ext(i as isize, b))
            } else {
                0.0
            };
            [gx, gy]
        })
        .collect()
}

/// `‖∇u‖²`: nodal gradients, trapezoid quadrature.
pub fn gradient_norm_sq(u: &Field) -> f64 {
    gradient(u)
        .iter()
        .zip(u.mesh().area_weights())
        .map(|(g, w)| w * (g[0] * g[0] + g[1] * g[1]))
        .sum()
}

/// `‖∇u‖²` from forward differences on grid edges, each edge weighted by the
/// trapezoid weight across it. For `u` vanishing on the boundary this equals
/// `-(Δ_h u, u)` exactly, which is the form the time stepper conserves.
pub fn edge_gradient_norm_sq(u: &Field) -> f64 {
    let mesh = u.mesh();
    let h = mesh.spacing();
    let [nx, ny] = mesh.nodes();
    let dim = mesh.dim();
    let tw = |k: usize, n: usize, hk: f64| if k == 0 || k == n - 1 { 0.5 * hk } else { hk };
    let mut sum = 0.0;
    for j in 0..ny {
        let wy = if dim == 2 { tw(j, ny, h[1]) } else { 1.0 };
        for i in 0..nx - 1 {
            let d = u.get(i + 1, j) - u.get(i, j);
            sum += wy * d * d / h[0];
        }
    }
    if dim == 2 {
        for i in 0..nx {
            let wx = tw(i, nx, h[0]);
            for j in 0..ny - 1 {
                let d = u.get(i, j + 1) - u.get(i, j);
                sum += wx * d * d / h[1];
            }
        }
    }
    sum
}

/// `γ - ‖∇u‖²`.
pub fn berger_coefficient(u: &Field, params: &PhysicsParams) -> f64 {
    params.gamma - gradient_norm_sq(u)
}

/// `[u, v] = uₓₓv_yy + u_yyvₓₓ - 2uₓ_y vₓ_y` at interior nodes; zero elsewhere
/// and identically zero on an interval.
pub fn von_karman_bracket(u: &Field, v: &Field) -> Result<Field> {
    u.check_same_mesh(v)?;
    let mesh = u.mesh();
    let mut out = Field::zeros(mesh);
    if mesh.dim() == 1 {
        return Ok(out);
    }
    let [hx, hy] = mesh.spacing();
    let second = |f: &Field, i: isize, j: isize| {
        let c = f.get_ext(i, j);
        let xx = (f.get_ext(i - 1, j) - 2.0 * c + f.get_ext(i + 1, j)) / (hx * hx);
        let yy = (f.get_ext(i, j - 1) - 2.0 * c + f.get_ext(i, j + 1)) / (hy * hy);
        let xy = (f.get_ext(i + 1, j + 1) - f.get_ext(i + 1, j - 1) - f.get_ext(i - 1, j + 1)
            + f.get_ext(i - 1, j - 1))
            / (4.0 * hx * hy);
        (xx, yy, xy)
    };
    for (i, j) in mesh.interior_nodes() {
        let (i, j) = (i as isize, j as isize);
        let (uxx, uyy, uxy) = second(u, i, j);
        let (vxx, vyy, vxy) = second(v, i, j);
        out.set_ext(i, j, uxx * vyy + uyy * vxx - 2.0 * uxy * vxy);
    }
    Ok(out)
}

/// Trapezoid inner product over physical nodes.
pub fn inner(u: &Field, v: &Field) -> Result<f64> {
    u.check_same_mesh(v)?;
    Ok(inner_unchecked(u, v))
}

fn inner_unchecked(u: &Field, v: &Field) -> f64 {
    u.mesh()
        .area_weights()
        .iter()
        .enumerate()
        .map(|(n, w)| w * u.at(n) * v.at(n))
        .sum()
}

pub fn norm_sq(u: &Field) -> f64 {
    inner_unchecked(u, u)
}

/// `a(u, v) = ∫ΔuΔv - (1-μ)∫[u,v] + μ₁∫_{Γ₁}uv`.
///
/// The Laplacians are evaluated at every physical node from the closed
/// ghosts; the bracket only at interior nodes.
pub fn bilinear_a(u: &Field, v: &Field, params: &PhysicsParams) -> Result<f64> {
    u.check_same_mesh(v)?;
    let lu = laplacian(u)?;
    let lv = laplacian(v)?;
    let mut total = inner_unchecked(&lu, &lv);
    if params.mu != 1.0 {
        let bracket = von_karman_bracket(u, v)?;
        let weights = u.mesh().area_weights();
        let b: f64 = (0..weights.len()).map(|n| weights[n] * bracket.at(n)).sum();
        total -= (1.0 - params.mu) * b;
    }
    if params.mu1 != 0.0 {
        let mesh = u.mesh();
        for &s in mesh.segments() {
            if mesh.role(s) != Some(BoundaryRole::FreeDamped) {
                continue;
            }
            let nodes = mesh.segment_nodes(s)?;
            let weights = mesh.segment_weights(s)?;
            for ((i, j), w) in nodes.into_iter().zip(weights) {
                total += params.mu1 * w * u.get(i, j) * v.get(i, j);
            }
        }
    }
    Ok(total)
}

/// One-sided second-order `∂ν u` at each node of `segment` (corners
/// included), in [`Mesh::segment_nodes`] order.
pub fn normal_derivative_trace(u: &Field, segment: Segment) -> Result<Vec<f64>> {
    let mesh = u.mesh();
    let nodes = mesh.segment_nodes(segment)?;
    let h = mesh.normal_spacing(segment);
    Ok(nodes
        .into_iter()
        .map(|(i, j)| {
            let (i, j) = (i as isize, j as isize);
            let (a1, b1) = mesh.step_normal(segment, i, j, -1);
            let (a2, b2) = mesh.step_normal(segment, i, j, -2);
            (3.0 * u.get_ext(i, j) - 4.0 * u.get_ext(a1, b1) + u.get_ext(a2, b2)) / (2.0 * h)
        })
        .collect())
}

/// `∂νν u` at each node of `segment` from the centered difference across
/// the boundary (needs one closed ghost layer).
pub fn second_normal_trace(u: &Field, segment: Segment) -> Result<Vec<f64>> {
    u.require_layers(1)?;
    let mesh = u.mesh();
    let nodes = mesh.segment_nodes(segment)?;
    let h = mesh.normal_spacing(segment);
    Ok(nodes
        .into_iter()
        .map(|(i, j)| {
            let (i, j) = (i as isize, j as isize);
            let (a1, b1) = mesh.step_normal(segment, i, j, -1);
            let (g1, c1) = mesh.step_normal(segment, i, j, 1);
            (u.get_ext(g1, c1) - 2.0 * u.get_ext(i, j) + u.get_ext(a1, b1)) / (h * h)
        })
        .collect())
}

/// Derivative along an edge of values sampled at its nodes: centered inside,
/// one-sided at the two ends.
pub fn tangential_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    if n < 3 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            if k == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if k == n - 1 {
                (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h)
            } else {
                (values[k + 1] - values[k - 1]) / (2.0 * h)
            }
        })
        .collect()
}
