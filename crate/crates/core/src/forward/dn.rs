use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;

use super::dirichlet::DirichletSystem;
use super::grid::BoxGrid;

/// Boundary functions on which the DN map is tested; stored as full-grid
/// vectors whose interior entries are ignored.
#[derive(Debug, Clone)]
pub struct BoundaryBasis {
    pub name: String,
    pub traces: Vec<Vec<Complex64>>,
}

impl BoundaryBasis {
    /// Indicator of each boundary node.
    pub fn nodal(grid: &BoxGrid) -> Self {
        let traces = grid
            .boundary_indices()
            .into_iter()
            .map(|b| {
                let mut v = vec![Complex64::default(); grid.len()];
                v[b] = Complex64::new(1.0, 0.0);
                v
            })
            .collect();
        Self {
            name: "nodal".into(),
            traces,
        }
    }

    /// Traces of low-order trigonometric products `cos/sin` on the box.
    pub fn trigonometric(grid: &BoxGrid, order: usize) -> Self {
        let mut traces = Vec::new();
        let len: [f64; 3] = std::array::from_fn(|d| grid.hi[d] - grid.lo[d]);
        for a in 0..=order {
            for b in 0..=order - a {
                for c in 0..=order - a - b {
                    traces.push(grid.trace(&grid.sample(|x| {
                        let t = |d: usize, k: usize| {
                            (std::f64::consts::PI * k as f64 * (x[d] - grid.lo[d]) / len[d]).cos()
                        };
                        Complex64::new(t(0, a) * t(1, b) * t(2, c), 0.0)
                    })));
                }
            }
        }
        Self {
            name: format!("trig{order}"),
            traces,
        }
    }

    pub fn from_traces(name: &str, grid: &BoxGrid, traces: Vec<Vec<Complex64>>) -> Self {
        Self {
            name: name.into(),
            traces: traces.iter().map(|t| grid.trace(t)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }
    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }
}

/// `entries[(i, k)] = ⟨Λ_{q} f_i, f_k⟩`, computed weakly.
#[derive(Debug, Clone)]
pub struct DNMapMatrix {
    pub basis: String,
    pub entries: DMatrix<Complex64>,
    /// Largest interior residual over the Dirichlet solves.
    pub max_residual: f64,
    pub grid: BoxGrid,
}

impl DNMapMatrix {
    /// `‖N − Nᵀ‖_max / ‖N‖_max`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = &self.entries;
        let scale = n.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let mut d: f64 = 0.0;
        for i in 0..n.nrows() {
            for k in 0..n.ncols() {
                d = d.max((n[(i, k)] - n[(k, i)]).norm());
            }
        }
        d / scale
    }

    pub fn difference(&self, other: &Self) -> DMatrix<Complex64> {
        &self.entries - &other.entries
    }
}

/// Solve one Dirichlet problem per basis function, in parallel, and pair weakly.
pub fn dn_map(sys: &DirichletSystem, basis: &BoundaryBasis) -> Result<DNMapMatrix> {
    let sols = basis
        .traces
        .par_iter()
        .map(|f| sys.solve(f))
        .collect::<Result<Vec<_>>>()?;
    let n = basis.len();
    let rows: Vec<Vec<Complex64>> = sols
        .par_iter()
        .map(|s| basis.traces.iter().map(|h| sys.dn_pairing(&s.u, h)).collect())
        .collect();
    let entries = DMatrix::from_fn(n, n, |i, k| rows[i][k]);
    Ok(DNMapMatrix {
        basis: basis.name.clone(),
        entries,
        max_residual: sols.iter().map(|s| s.residual).fold(0.0, f64::max),
        grid: sys.grid().clone(),
    })
}

/// Both sides of `∫_{∂M}(Λ₁ − Λ₂)(u₁|) u₂ dS = ∫_M (q₁ − q₂) u₁ u₂ dV`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityCheck {
    pub volume: Complex64,
    pub boundary: Complex64,
    /// Residual scale `Σ_j ‖R_j‖_{L²} ‖companion‖_{L²}` of the solves entering the boundary side.
    pub pde_residual: f64,
}

impl IdentityCheck {
    pub fn defect(&self) -> f64 {
        (self.volume - self.boundary).norm()
    }
}

fn l2(grid: &BoxGrid, u: &[Complex64]) -> f64 {
    (0..grid.len()).map(|p| grid.node_weight(p) * u[p].norm_sqr()).sum::<f64>().sqrt()
}

/// `u₁` solves with `q₁` and trace `f₁`, `u₂` with `q₂` and trace `f₂`.
/// The boundary side solves `q₂` with trace `f₁` as well and uses weak
/// pairings with the zero-interior extension of `f₂`.
pub fn integral_identity_residual(
    sys1: &DirichletSystem,
    sys2: &DirichletSystem,
    f1: &[Complex64],
    f2: &[Complex64],
) -> Result<IdentityCheck> {
    let u1 = sys1.solve(f1)?;
    let u2 = sys2.solve(f2)?;
    let w = sys2.solve(f1)?;
    let grid = sys1.grid();
    let dq: Vec<Complex64> = sys1.potential().iter().zip(sys2.potential()).map(|(a, b)| a - b).collect();
    let volume = sys1.volume_integral(&dq, &u1.u, &u2.u);
    let boundary = sys1.dn_pairing(&u1.u, f2) - sys2.dn_pairing(&w.u, f2);
    let n2 = l2(grid, &u2.u);
    let pde_residual = u1.residual * n2 + w.residual * n2 + u2.residual * l2(grid, &u1.u);
    Ok(IdentityCheck {
        volume,
        boundary,
        pde_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> BoxGrid {
        BoxGrid::new([-0.4, -0.5, -0.5], [0.4, 0.5, 0.5], [7, 8, 8]).unwrap()
    }

    #[test]
    fn nodal_dn_map_is_symmetric() {
        let g = grid();
        let sys = DirichletSystem::from_fn(g.clone(), |x| Complex64::new(2.0 + x[0] - x[1] * x[2], 0.0)).unwrap();
        let n = dn_map(&sys, &BoundaryBasis::nodal(&g)).unwrap();
        assert!(n.symmetry_defect() < 1e-8, "{}", n.symmetry_defect());
    }

    #[test]
    fn duality_for_complex_potential() {
        let g = grid();
        let qf = |x: [f64; 3]| Complex64::new(1.0 + x[0], 2.0 * x[1] + 0.5);
        let sys = DirichletSystem::from_fn(g.clone(), qf).unwrap();
        let sys_bar = DirichletSystem::from_fn(g.clone(), |x| qf(x).conj()).unwrap();
        let f = g.sample(|x| Complex64::new(x[0] * x[1], x[2]));
        let h = g.sample(|x| Complex64::new((2.0 * x[2]).sin(), x[0] * x[0]));
        let hb: Vec<Complex64> = h.iter().map(|v| v.conj()).collect();
        let fb: Vec<Complex64> = f.iter().map(|v| v.conj()).collect();
        // ⟨Λ_q f, h̄⟩ = conj ⟨Λ_{q̄} h, f̄⟩
        let lhs = sys.dn_pairing(&sys.solve(&f).unwrap().u, &hb);
        let rhs = sys_bar.dn_pairing(&sys_bar.solve(&h).unwrap().u, &fb).conj();
        assert!((lhs - rhs).norm() < 1e-8 * lhs.norm().max(1.0), "{lhs} {rhs}");
    }

    #[test]
    fn identity_sides_agree() {
        let g = grid();
        let sys1 = DirichletSystem::from_fn(g.clone(), |x| {
            Complex64::new(3.0 * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * 10.0).exp(), 0.0)
        })
        .unwrap();
        let sys2 = DirichletSystem::new(g.clone(), vec![Complex64::default(); g.len()]).unwrap();
        let f1 = g.sample(|x| Complex64::new(1.0 + x[0], 0.0));
        let f2 = g.sample(|x| Complex64::new(1.0 - x[1], 0.2));
        let c = integral_identity_residual(&sys1, &sys2, &f1, &f2).unwrap();
        assert!(c.volume.norm() > 1e-2);
        assert!(c.defect() <= 10.0 * c.pde_residual.max(1e-14), "{c:?}");
        // identical potentials
        let c0 = integral_identity_residual(&sys2, &sys2, &f1, &f2).unwrap();
        assert_eq!(c0.volume, Complex64::default());
        assert!(c0.boundary.norm() < 1e-10);
    }
}
