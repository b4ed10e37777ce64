//! Discretization of the (s,Φ)-Gagliardo modular on Ω = (0,1)^N, N ∈ {1, 2}.
//!
//! Functions are continuous and piecewise linear (intervals in 1-D, right
//! triangles from split squares in 2-D) and vanish on ∂Ω and outside Ω.
//! The double integral is split into
//!
//! * element self-interactions, integrated exactly along rays: for a simplex
//!   E the overlap |E ∩ (E+z)| is |E|(1 − |z|/R(θ))^N, which reduces the
//!   singular part to the one-dimensional kernel K of the N-function;
//! * distinct element pairs, with centroid distance and vertex sampling of
//!   |u(x) − u(y)|;
//! * the interaction with the exterior, where u = 0, through the exact radial
//!   integral ∫_R^∞ Φ(a r^{−s}) dr/r = F(a R^{−s})/s.
//!
//! As s → 1 the modular tends to Σ_E |E|·Ψ(|∇u|_E) exactly, the discrete form
//! of the local energy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nfunc::{NFunction, SampledFunction};
use crate::psi::PsiFunction;
use crate::quad::{solve_increasing, GaussLegendre};
use crate::scalar::{pairwise_sum, Scalar};

const NONE: u32 = u32::MAX;
/// Largest number of ordered element pairs handled by the dense method.
pub const PAIR_CAPACITY: u64 = 100_000_000;
const ANGLES_PER_SECTOR: usize = 16;

/// Uniform grid on (0,1)^dim with `n_interior` unknowns per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDomain {
    pub dim: usize,
    #[serde(rename = "n")]
    pub n_interior: usize,
    /// Width of the zero layer around Ω, in cells. The exterior is integrated
    /// in closed form, so this is informational only.
    #[serde(default)]
    pub halo: usize,
}

impl GridDomain {
    pub fn new(dim: usize, n_interior: usize, halo: usize) -> Result<Self> {
        let g = GridDomain {
            dim,
            n_interior,
            halo,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::invalid(format!("grid dimension {} not in {{1, 2}}", self.dim)));
        }
        if self.n_interior == 0 {
            return Err(Error::invalid("grid needs at least one interior node"));
        }
        Ok(())
    }

    pub fn h<T: Scalar>(&self) -> T {
        T::one() / T::from_usize_lossy(self.n_interior + 1)
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_interior.pow(self.dim as u32)
    }

    /// Lumped nodal measure h^dim.
    pub fn cell_measure<T: Scalar>(&self) -> T {
        self.h::<T>().powi(self.dim as i32)
    }

    /// Coordinates of unknown `k`.
    pub fn node_coords<T: Scalar>(&self, k: usize) -> Vec<T> {
        let n = self.n_interior;
        let h = self.h::<T>();
        if self.dim == 1 {
            vec![T::from_usize_lossy(k + 1) * h]
        } else {
            vec![T::from_usize_lossy(k % n + 1) * h, T::from_usize_lossy(k / n + 1) * h]
        }
    }

    /// Unknowns as a sampled function with lumped weights.
    pub fn sampled<T: Scalar>(&self, u: &[T]) -> Result<SampledFunction<T>> {
        SampledFunction::uniform(u.to_vec(), self.cell_measure())
    }

    /// Index of the unknown mirrored through the centre of Ω.
    pub fn reflect(&self, k: usize) -> usize {
        self.n_unknowns() - 1 - k
    }

    /// CSV with coordinate columns and the value column.
    pub fn to_csv<T: Scalar>(&self, u: &[T]) -> String {
        let mut out = if self.dim == 1 { "x,u\n".to_string() } else { "x,y,u\n".to_string() };
        for (k, v) in u.iter().enumerate() {
            let c = self.node_coords::<T>(k);
            for x in c {
                out.push_str(&format!("{},", x.to_f64_lossy()));
            }
            out.push_str(&format!("{}\n", v.to_f64_lossy()));
        }
        out
    }
}

/// Values on the interior nodes of a grid (zero on ∂Ω and outside).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(values: Vec<T>) -> Self {
        GridFunction { values }
    }

    pub fn positive_part(&self) -> Self {
        GridFunction::new(self.values.iter().map(|&v| v.max(T::zero())).collect())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= T::zero())
    }
}

/// Energies assembled from the nodal unknowns.
pub trait DiscreteEnergy<T: Scalar>: Sync {
    fn grid(&self) -> &GridDomain;
    fn value(&self, u: &[T]) -> Result<T>;
    fn gradient(&self, u: &[T]) -> Result<Vec<T>>;
    /// Dense row-major Hessian.
    fn hessian(&self, u: &[T]) -> Result<Vec<T>>;
}

/// A linear functional ℓ·u of at most three unknowns.
#[derive(Clone, Copy, Debug)]
struct Stencil<T> {
    nodes: [u32; 3],
    coefs: [T; 3],
}

impl<T: Scalar> Stencil<T> {
    fn apply(&self, u: &[T]) -> T {
        let mut x = T::zero();
        for k in 0..3 {
            if self.nodes[k] != NONE {
                x += self.coefs[k] * u[self.nodes[k] as usize];
            }
        }
        x
    }

    fn scatter(&self, g: &mut [T], c: T) {
        for k in 0..3 {
            if self.nodes[k] != NONE {
                g[self.nodes[k] as usize] += c * self.coefs[k];
            }
        }
    }

    fn scatter_outer(&self, hess: &mut [T], n: usize, c: T) {
        for a in 0..3 {
            if self.nodes[a] == NONE {
                continue;
            }
            for b in 0..3 {
                if self.nodes[b] == NONE {
                    continue;
                }
                hess[self.nodes[a] as usize * n + self.nodes[b] as usize] += c * self.coefs[a] * self.coefs[b];
            }
        }
    }
}

/// Mesh elements with vertex unknowns (NONE on ∂Ω), centroid, gradient map.
#[derive(Clone, Debug)]
struct Mesh<T> {
    dim: usize,
    /// Squares per axis in 2-D, intervals in 1-D.
    cells: usize,
    measure: T,
    vertices: Vec<[u32; 3]>,
    centroids: Vec<[T; 2]>,
    /// Rows of the gradient map g = G·u_E, per element (one row in 1-D).
    grads: Vec<[Stencil<T>; 2]>,
}

impl<T: Scalar> Mesh<T> {
    fn new(grid: &GridDomain) -> Self {
        let n = grid.n_interior;
        let cells = n + 1;
        let h: T = grid.h();
        let inv_h = T::one() / h;
        let unknown = |i: usize, j: usize| -> u32 {
            if grid.dim == 1 {
                if (1..=n).contains(&i) {
                    (i - 1) as u32
                } else {
                    NONE
                }
            } else if (1..=n).contains(&i) && (1..=n).contains(&j) {
                ((i - 1) + n * (j - 1)) as u32
            } else {
                NONE
            }
        };
        let mut vertices = Vec::new();
        let mut centroids = Vec::new();
        let mut grads = Vec::new();
        let third = T::lit(1.0 / 3.0);
        if grid.dim == 1 {
            for k in 0..cells {
                let (a, b) = (unknown(k, 0), unknown(k + 1, 0));
                vertices.push([a, b, NONE]);
                centroids.push([(T::from_usize_lossy(k) + T::lit(0.5)) * h, T::zero()]);
                let row = Stencil {
                    nodes: [a, b, NONE],
                    coefs: [-inv_h, inv_h, T::zero()],
                };
                grads.push([row, row]);
            }
        } else {
            for j in 0..cells {
                for i in 0..cells {
                    let (fi, fj) = (T::from_usize_lossy(i), T::from_usize_lossy(j));
                    // lower-left triangle, right angle at (i, j)
                    let (v0, v1, v2) = (unknown(i, j), unknown(i + 1, j), unknown(i, j + 1));
                    vertices.push([v0, v1, v2]);
                    centroids.push([(fi + third) * h, (fj + third) * h]);
                    grads.push([
                        Stencil {
                            nodes: [v0, v1, NONE],
                            coefs: [-inv_h, inv_h, T::zero()],
                        },
                        Stencil {
                            nodes: [v0, v2, NONE],
                            coefs: [-inv_h, inv_h, T::zero()],
                        },
                    ]);
                    // upper-right triangle, right angle at (i+1, j+1)
                    let (w0, w1, w2) = (unknown(i + 1, j + 1), unknown(i, j + 1), unknown(i + 1, j));
                    vertices.push([w0, w1, w2]);
                    let two_thirds = T::lit(2.0 / 3.0);
                    centroids.push([(fi + two_thirds) * h, (fj + two_thirds) * h]);
                    grads.push([
                        Stencil {
                            nodes: [w0, w1, NONE],
                            coefs: [inv_h, -inv_h, T::zero()],
                        },
                        Stencil {
                            nodes: [w0, w2, NONE],
                            coefs: [inv_h, -inv_h, T::zero()],
                        },
                    ]);
                }
            }
        }
        let measure = if grid.dim == 1 { h } else { h * h / T::lit(2.0) };
        Mesh {
            dim: grid.dim,
            cells,
            measure,
            vertices,
            centroids,
            grads,
        }
    }

    fn len(&self) -> usize {
        self.vertices.len()
    }

    fn vertex_count(&self) -> usize {
        self.dim + 1
    }

    fn values(&self, e: usize, u: &[T]) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for (k, &v) in self.vertices[e].iter().enumerate() {
            if v != NONE {
                out[k] = u[v as usize];
            }
        }
        out
    }

    /// Stencil of θ·∇u on element `e`.
    fn directional(&self, e: usize, c: T, s: T, scale: T) -> Stencil<T> {
        let [gx, gy] = self.grads[e];
        if self.dim == 1 {
            return Stencil {
                nodes: gx.nodes,
                coefs: [gx.coefs[0] * c * scale, gx.coefs[1] * c * scale, T::zero()],
            };
        }
        // both rows share their first node
        Stencil {
            nodes: [gx.nodes[0], gx.nodes[1], gy.nodes[1]],
            coefs: [
                (gx.coefs[0] * c + gy.coefs[0] * s) * scale,
                gx.coefs[1] * c * scale,
                gy.coefs[1] * s * scale,
            ],
        }
    }

    /// Centroid distance, computed from integer offsets so that it is
    /// exactly symmetric in (a, b).
    fn centroid_distance(&self, a: usize, b: usize) -> T {
        let h = T::one() / T::from_usize_lossy(self.cells);
        if self.dim == 1 {
            return T::from_usize_lossy(a.abs_diff(b)) * h;
        }
        let m = self.cells;
        let (sa, sb) = (a / 2, b / 2);
        let dx = (sb % m) as f64 - (sa % m) as f64;
        let dy = (sb / m) as f64 - (sa / m) as f64;
        let shift = ((b % 2) as f64 - (a % 2) as f64) / 3.0;
        let (ox, oy) = (T::lit(dx + shift), T::lit(dy + shift));
        (ox * ox + oy * oy).sqrt() * h
    }

    /// Offset-table key for the ordered pair (a, b).
    fn pair_key(&self, a: usize, b: usize) -> usize {
        if self.dim == 1 {
            a.abs_diff(b)
        } else {
            let m = self.cells;
            let (sa, sb) = (a / 2, b / 2);
            let dx = (sb % m) as isize - (sa % m) as isize + m as isize - 1;
            let dy = (sb / m) as isize - (sa / m) as isize + m as isize - 1;
            let span = 2 * m - 1;
            ((dy as usize * span + dx as usize) * 2 + a % 2) * 2 + b % 2
        }
    }

    fn key_count(&self) -> usize {
        if self.dim == 1 {
            self.cells
        } else {
            let span = 2 * self.cells - 1;
            span * span * 4
        }
    }
}

/// Nodes and weights of a Gauss–Legendre rule on each of the given angular
/// sectors.
fn sector_rule<T: Scalar>(cuts: &[T], gl: &GaussLegendre<T>) -> Vec<(T, T)> {
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            out.extend(gl.mapped(w[0], w[1]));
        }
    }
    out
}

/// Distance from `c` to the boundary of the unit square along angle θ.
fn ray_exit<T: Scalar>(c: [T; 2], th: T) -> T {
    let (dx, dy) = (th.cos(), th.sin());
    let mut best = T::infinity();
    let tiny = T::epsilon();
    if dx > tiny {
        best = best.min((T::one() - c[0]) / dx);
    } else if dx < -tiny {
        best = best.min(-c[0] / dx);
    }
    if dy > tiny {
        best = best.min((T::one() - c[1]) / dy);
    } else if dy < -tiny {
        best = best.min(-c[1] / dy);
    }
    best
}

#[derive(Clone, Copy, Debug)]
struct SelfTerm<T> {
    stencil: Stencil<T>,
    weight: T,
}

#[derive(Clone, Copy, Debug)]
struct ExteriorTerm<T> {
    node: u32,
    weight: T,
    scale: T,
}

/// Precomputed geometry of the (s,Φ)-modular on one grid.
#[derive(Clone, Debug)]
pub struct FracEnergyContext<T> {
    grid: GridDomain,
    nf: NFunction<T>,
    s: T,
    mu: T,
    mesh: Mesh<T>,
    /// Per offset key: (1−s)|E_a||E_b|/d^N / (#v_a #v_b), and d^{−s}.
    pair_weight: Vec<T>,
    pair_scale: Vec<T>,
    self_terms: Vec<SelfTerm<T>>,
    exterior: Vec<ExteriorTerm<T>>,
}

/// Precomputes the element geometry for the modular at order `s`.
pub fn build_context<T: Scalar>(grid: &GridDomain, nf: &NFunction<T>, s: T) -> Result<FracEnergyContext<T>> {
    grid.validate()?;
    if !(s > T::zero() && s < T::one()) {
        return Err(Error::invalid(format!("fractional order s = {s} outside (0, 1)")));
    }
    let mesh = Mesh::<T>::new(grid);
    let e = mesh.len() as u64;
    let pairs = e * e.saturating_sub(1);
    if pairs > PAIR_CAPACITY {
        return Err(Error::CapacityExceeded {
            pairs,
            capacity: PAIR_CAPACITY,
        });
    }
    let mu = T::one() - s;
    let dim = grid.dim;
    let h: T = grid.h();
    let nv = T::from_usize_lossy(mesh.vertex_count());

    // offset tables
    let mut pair_weight = vec![T::zero(); mesh.key_count()];
    let mut pair_scale = vec![T::zero(); mesh.key_count()];
    let anchors: Vec<usize> = if dim == 1 {
        vec![0]
    } else {
        let m = mesh.cells;
        let mut v = Vec::new();
        for (sx, sy) in [(0, 0), (m - 1, 0), (0, m - 1), (m - 1, m - 1)] {
            for t in 0..2 {
                v.push(2 * (sx + m * sy) + t);
            }
        }
        v
    };
    // every offset is realised with one of the corner elements as anchor
    for &a in &anchors {
        for b in 0..mesh.len() {
            if a == b {
                continue;
            }
            let key = mesh.pair_key(a, b);
            let d = mesh.centroid_distance(a, b);
            pair_weight[key] = mu * mesh.measure * mesh.measure / d.powi(dim as i32) / (nv * nv);
            pair_scale[key] = d.powf(-s);
        }
    }

    // self-interaction: Σ_θ w_θ K(|θ·∇u| R(θ)^μ) per element
    let mut self_terms = Vec::new();
    if dim == 1 {
        for e in 0..mesh.len() {
            let st = mesh.directional(e, T::one(), T::zero(), h.powf(mu));
            self_terms.push(SelfTerm {
                stencil: st,
                weight: T::lit(2.0) * mesh.measure,
            });
        }
    } else {
        let gl = GaussLegendre::<T>::new(ANGLES_PER_SECTOR);
        let pi = T::PI();
        let cuts = [T::zero(), pi / T::lit(2.0), T::lit(0.75) * pi, pi];
        let rule = sector_rule(&cuts, &gl);
        for e in 0..mesh.len() {
            for &(th, w) in &rule {
                let (c, sn) = (th.cos(), th.sin());
                let r = if th <= pi / T::lit(2.0) {
                    h / (c + sn)
                } else if th <= T::lit(0.75) * pi {
                    h / sn
                } else {
                    -h / c
                };
                self_terms.push(SelfTerm {
                    stencil: mesh.directional(e, c, sn, r.powf(mu)),
                    weight: T::lit(2.0) * mesh.measure * w,
                });
            }
        }
    }

    // exterior: (2μ/s)·|E|/#v · Σ_θ w_θ F(|u_i| ρ(θ)^{−s}) per vertex
    let mut exterior = Vec::new();
    let ext_factor = T::lit(2.0) * mu / s * mesh.measure / nv;
    for e in 0..mesh.len() {
        let c = mesh.centroids[e];
        let rays: Vec<(T, T)> = if dim == 1 {
            vec![(c[0], T::one()), (T::one() - c[0], T::one())]
        } else {
            let gl = GaussLegendre::<T>::new(ANGLES_PER_SECTOR);
            let mut cuts: Vec<T> = [[T::one(), T::one()], [T::zero(), T::one()], [T::zero(), T::zero()], [T::one(), T::zero()]]
                .iter()
                .map(|corner| {
                    let a = (corner[1] - c[1]).atan2(corner[0] - c[0]);
                    if a < T::zero() {
                        a + T::TAU()
                    } else {
                        a
                    }
                })
                .collect();
            cuts.push(T::zero());
            cuts.push(T::TAU());
            cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite angles"));
            sector_rule(&cuts, &gl)
                .into_iter()
                .map(|(th, w)| (ray_exit(c, th), w))
                .collect()
        };
        for &v in &mesh.vertices[e] {
            if v == NONE {
                continue;
            }
            for &(rho, w) in &rays {
                exterior.push(ExteriorTerm {
                    node: v,
                    weight: ext_factor * w,
                    scale: rho.powf(-s),
                });
            }
        }
    }

    Ok(FracEnergyContext {
        grid: *grid,
        nf: nf.clone(),
        s,
        mu,
        mesh,
        pair_weight,
        pair_scale,
        self_terms,
        exterior,
    })
}

/// Φ'' evaluated away from 0 when the density blows up there.
fn bounded_second<T: Scalar>(v: T, fallback: impl Fn() -> T) -> T {
    if v.is_finite() {
        v
    } else {
        fallback()
    }
}

impl<T: Scalar> FracEnergyContext<T> {
    pub fn s(&self) -> T {
        self.s
    }

    pub fn nfunction(&self) -> &NFunction<T> {
        &self.nf
    }

    pub fn element_count(&self) -> usize {
        self.mesh.len()
    }

    /// Number of ordered pairs of distinct elements.
    pub fn pair_count(&self) -> u64 {
        let e = self.mesh.len() as u64;
        e * (e - 1)
    }

    /// Far-field weight (1−s)|E_a||E_b|/d_ab^N of an ordered element pair.
    pub fn pair_weight(&self, a: usize, b: usize) -> T {
        let nv = T::from_usize_lossy(self.mesh.vertex_count());
        self.pair_weight[self.mesh.pair_key(a, b)] * nv * nv
    }

    fn far_energy(&self, u: &[T]) -> T {
        let rows: Vec<T> = (0..self.mesh.len())
            .into_par_iter()
            .map(|a| {
                let mut terms = Vec::with_capacity(self.mesh.len());
                let ua = self.mesh.values(a, u);
                let nv = self.mesh.vertex_count();
                for b in 0..self.mesh.len() {
                    if b == a {
                        continue;
                    }
                    let key = self.mesh.pair_key(a, b);
                    let (w, sc) = (self.pair_weight[key], self.pair_scale[key]);
                    let ub = self.mesh.values(b, u);
                    let mut acc = T::zero();
                    for &x in &ua[..nv] {
                        for &y in &ub[..nv] {
                            acc += self.nf.raw_value((x - y) * sc);
                        }
                    }
                    terms.push(w * acc);
                }
                pairwise_sum(&terms)
            })
            .collect();
        pairwise_sum(&rows)
    }

    fn local_energy(&self, u: &[T]) -> T {
        let selfs: Vec<T> = self
            .self_terms
            .par_iter()
            .map(|t| t.weight * self.nf.self_kernel(t.stencil.apply(u), self.mu, self.grid.dim)[0])
            .collect();
        let ext: Vec<T> = self
            .exterior
            .par_iter()
            .map(|t| t.weight * self.nf.log_primitive_derivs(u[t.node as usize] * t.scale)[0])
            .collect();
        pairwise_sum(&selfs) + pairwise_sum(&ext)
    }

    /// I₁(u) = (1−s)∬ Φ(|u(x)−u(y)|/|x−y|^s) dx dy/|x−y|^N over ℝ^N × ℝ^N.
    pub fn modular(&self, u: &[T]) -> Result<T> {
        self.check_len(u)?;
        let v = self.far_energy(u) + self.local_energy(u);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::non_finite("fractional modular"))
        }
    }

    fn check_len(&self, u: &[T]) -> Result<()> {
        if u.len() != self.grid.n_unknowns() {
            return Err(Error::invalid(format!(
                "grid function has {} values, grid has {} unknowns",
                u.len(),
                self.grid.n_unknowns()
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("grid function"));
        }
        Ok(())
    }

    /// ∂I₁/∂u_i for every unknown.
    pub fn gradient(&self, u: &[T]) -> Result<Vec<T>> {
        self.check_len(u)?;
        let n = u.len();
        let nv = self.mesh.vertex_count();
        let two = T::lit(2.0);
        // far field: both orderings of a pair give the same derivative
        let rows: Vec<[T; 3]> = (0..self.mesh.len())
            .into_par_iter()
            .map(|a| {
                let ua = self.mesh.values(a, u);
                let mut acc = [T::zero(); 3];
                for (k, &x) in ua[..nv].iter().enumerate() {
                    if self.mesh.vertices[a][k] == NONE {
                        continue;
                    }
                    let mut terms = Vec::with_capacity(self.mesh.len() * nv);
                    for b in 0..self.mesh.len() {
                        if b == a {
                            continue;
                        }
                        let key = self.mesh.pair_key(a, b);
                        let (w, sc) = (self.pair_weight[key], self.pair_scale[key]);
                        let ub = self.mesh.values(b, u);
                        for &y in &ub[..nv] {
                            let d = x - y;
                            let f = self.nf.raw_derivative(d.abs() * sc);
                            terms.push(if d < T::zero() { -w * sc * f } else { w * sc * f });
                        }
                    }
                    acc[k] = two * pairwise_sum(&terms);
                }
                acc
            })
            .collect();
        let mut g = vec![T::zero(); n];
        for (a, row) in rows.iter().enumerate() {
            for k in 0..nv {
                let v = self.mesh.vertices[a][k];
                if v != NONE {
                    g[v as usize] += row[k];
                }
            }
        }
        for t in &self.self_terms {
            let x = t.stencil.apply(u);
            let d = self.nf.self_kernel(x.abs(), self.mu, self.grid.dim)[1];
            let c = if x < T::zero() { -t.weight * d } else { t.weight * d };
            t.stencil.scatter(&mut g, c);
        }
        for t in &self.exterior {
            let x = u[t.node as usize];
            let d = self.nf.log_primitive_derivs(x.abs() * t.scale)[1];
            let c = t.weight * t.scale * d;
            g[t.node as usize] += if x < T::zero() { -c } else { c };
        }
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::non_finite("modular gradient"))
        }
    }

    /// Dense Hessian of I₁.
    pub fn hessian(&self, u: &[T]) -> Result<Vec<T>> {
        self.check_len(u)?;
        let n = u.len();
        let nv = self.mesh.vertex_count();
        let mut hess = vec![T::zero(); n * n];
        let tiny = T::epsilon().sqrt();
        let phi2 = |x: T| bounded_second(self.nf.raw_second_derivative(x), || self.nf.raw_second_derivative(x.max(tiny)));
        for a in 0..self.mesh.len() {
            let ua = self.mesh.values(a, u);
            let va = self.mesh.vertices[a];
            for b in (a + 1)..self.mesh.len() {
                let key = self.mesh.pair_key(a, b);
                let (w, sc) = (self.pair_weight[key], self.pair_scale[key]);
                let ub = self.mesh.values(b, u);
                let vb = self.mesh.vertices[b];
                for i in 0..nv {
                    for j in 0..nv {
                        let (p, q) = (va[i], vb[j]);
                        if p == NONE && q == NONE {
                            continue;
                        }
                        // the ordered pairs (a,b) and (b,a) coincide
                        let c = T::lit(2.0) * w * sc * sc * phi2((ua[i] - ub[j]).abs() * sc);
                        if p != NONE {
                            hess[p as usize * n + p as usize] += c;
                        }
                        if q != NONE {
                            hess[q as usize * n + q as usize] += c;
                        }
                        if p != NONE && q != NONE {
                            hess[p as usize * n + q as usize] -= c;
                            hess[q as usize * n + p as usize] -= c;
                        }
                    }
                }
            }
        }
        for t in &self.self_terms {
            let x = t.stencil.apply(u).abs();
            let mut d2 = self.nf.self_kernel(x, self.mu, self.grid.dim)[2];
            if !d2.is_finite() {
                d2 = self.nf.self_kernel(x.max(tiny), self.mu, self.grid.dim)[2];
            }
            t.stencil.scatter_outer(&mut hess, n, t.weight * d2);
        }
        for t in &self.exterior {
            let i = t.node as usize;
            let x = u[i].abs() * t.scale;
            let mut d2 = self.nf.log_primitive_derivs(x)[2];
            if !d2.is_finite() {
                d2 = self.nf.log_primitive_derivs(x.max(tiny))[2];
            }
            hess[i * n + i] += t.weight * t.scale * t.scale * d2;
        }
        if hess.iter().all(|v| v.is_finite()) {
            Ok(hess)
        } else {
            Err(Error::non_finite("modular Hessian"))
        }
    }

    /// ⟨(−Δ_Φ)^s u, v⟩ = ½ Σ_i g_i(u) v_i.
    pub fn weak_pairing(&self, u: &[T], v: &[T]) -> Result<T> {
        self.check_len(v)?;
        let g = self.gradient(u)?;
        let terms: Vec<T> = g.iter().zip(v).map(|(&a, &b)| a * b).collect();
        Ok(T::lit(0.5) * pairwise_sum(&terms))
    }

    /// inf{λ > 0 : I₁(u/λ) ≤ 1}.
    pub fn seminorm(&self, u: &[T]) -> Result<T> {
        self.check_len(u)?;
        if u.iter().all(|&v| v == T::zero()) {
            return Ok(T::zero());
        }
        let x = solve_increasing(
            |x: T| {
                let scaled: Vec<T> = u.iter().map(|&v| v * x).collect();
                self.modular(&scaled).ok()
            },
            T::one(),
            1e-12,
            2000,
            "Gagliardo seminorm",
        )?;
        Ok(T::one() / x)
    }

    /// Poincaré slack ∬Φ(C|D_s u|)dμ − ρ_Φ(u), i.e. I₁(C·u)/(1−s) − ρ_Φ(u).
    pub fn poincare_slack(&self, u: &[T], c: T) -> Result<T> {
        let scaled: Vec<T> = u.iter().map(|&v| c * v).collect();
        let lhs = self.modular(&scaled)? / self.mu;
        let rho = crate::nfunc::modular_rho(&self.nf, &self.grid.sampled(u)?)?;
        Ok(lhs - rho)
    }
}

impl<T: Scalar> DiscreteEnergy<T> for FracEnergyContext<T> {
    fn grid(&self) -> &GridDomain {
        &self.grid
    }

    fn value(&self, u: &[T]) -> Result<T> {
        self.modular(u)
    }

    fn gradient(&self, u: &[T]) -> Result<Vec<T>> {
        FracEnergyContext::gradient(self, u)
    }

    fn hessian(&self, u: &[T]) -> Result<Vec<T>> {
        FracEnergyContext::hessian(self, u)
    }
}

pub fn modular_i1<T: Scalar>(ctx: &FracEnergyContext<T>, u: &[T]) -> Result<T> {
    ctx.modular(u)
}

pub fn gagliardo_seminorm<T: Scalar>(ctx: &FracEnergyContext<T>, u: &[T]) -> Result<T> {
    ctx.seminorm(u)
}

pub fn weak_pairing<T: Scalar>(ctx: &FracEnergyContext<T>, u: &[T], v: &[T]) -> Result<T> {
    ctx.weak_pairing(u, v)
}

pub fn energy_gradient<T: Scalar>(ctx: &FracEnergyContext<T>, u: &[T]) -> Result<Vec<T>> {
    ctx.gradient(u)
}

/// Poincaré slack with C = diam(Ω).
pub fn poincare_check<T: Scalar>(ctx: &FracEnergyContext<T>, u: &[T]) -> Result<T> {
    let diam = T::from_usize_lossy(ctx.grid.dim).sqrt();
    ctx.poincare_slack(u, diam)
}

/// The local energy Σ_E |E| Ψ(|∇u|_E).
#[derive(Clone, Debug)]
pub struct LocalEnergy<T> {
    grid: GridDomain,
    psi: PsiFunction<T>,
    mesh: Mesh<T>,
}

impl<T: Scalar> LocalEnergy<T> {
    pub fn new(grid: &GridDomain, psi: PsiFunction<T>) -> Result<Self> {
        grid.validate()?;
        if psi.dim() != grid.dim {
            return Err(Error::invalid(format!(
                "Ψ built for dimension {} on a {}-D grid",
                psi.dim(),
                grid.dim
            )));
        }
        Ok(LocalEnergy {
            grid: *grid,
            psi,
            mesh: Mesh::new(grid),
        })
    }

    pub fn psi(&self) -> &PsiFunction<T> {
        &self.psi
    }

    fn gradient_at(&self, e: usize, u: &[T]) -> (T, T) {
        let [gx, gy] = self.mesh.grads[e];
        if self.grid.dim == 1 {
            (gx.apply(u), T::zero())
        } else {
            (gx.apply(u), gy.apply(u))
        }
    }
}

impl<T: Scalar> DiscreteEnergy<T> for LocalEnergy<T> {
    fn grid(&self) -> &GridDomain {
        &self.grid
    }

    fn value(&self, u: &[T]) -> Result<T> {
        let terms: Vec<T> = (0..self.mesh.len())
            .into_par_iter()
            .map(|e| {
                let (gx, gy) = self.gradient_at(e, u);
                self.mesh.measure * self.psi.raw_derivs((gx * gx + gy * gy).sqrt())[0]
            })
            .collect();
        let v = pairwise_sum(&terms);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::non_finite("local modular"))
        }
    }

    fn gradient(&self, u: &[T]) -> Result<Vec<T>> {
        let mut g = vec![T::zero(); u.len()];
        for e in 0..self.mesh.len() {
            let (gx, gy) = self.gradient_at(e, u);
            let norm = (gx * gx + gy * gy).sqrt();
            if norm == T::zero() {
                continue;
            }
            let d = self.psi.raw_derivs(norm)[1] * self.mesh.measure / norm;
            let [rx, ry] = self.mesh.grads[e];
            rx.scatter(&mut g, d * gx);
            if self.grid.dim == 2 {
                ry.scatter(&mut g, d * gy);
            }
        }
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::non_finite("local modular gradient"))
        }
    }

    fn hessian(&self, u: &[T]) -> Result<Vec<T>> {
        let n = u.len();
        let mut hess = vec![T::zero(); n * n];
        let tiny = T::epsilon().sqrt();
        for e in 0..self.mesh.len() {
            let (gx, gy) = self.gradient_at(e, u);
            let norm = (gx * gx + gy * gy).sqrt();
            let d = self.psi.raw_derivs(norm.max(tiny));
            let m = self.mesh.measure;
            let [rx, ry] = self.mesh.grads[e];
            if self.grid.dim == 1 {
                rx.scatter_outer(&mut hess, n, m * d[2]);
                continue;
            }
            // ∇²Ψ(|g|) = Ψ'' ĝĝᵀ + (Ψ'/|g|)(I − ĝĝᵀ)
            let (ex, ey) = if norm > T::zero() { (gx / norm, gy / norm) } else { (T::one(), T::zero()) };
            let tangential = d[1] / norm.max(tiny);
            let a = [
                [d[2] * ex * ex + tangential * (T::one() - ex * ex), (d[2] - tangential) * ex * ey],
                [(d[2] - tangential) * ex * ey, d[2] * ey * ey + tangential * (T::one() - ey * ey)],
            ];
            let rows = [rx, ry];
            for (p, rp) in rows.iter().enumerate() {
                for (q, rq) in rows.iter().enumerate() {
                    for i in 0..3 {
                        if rp.nodes[i] == NONE {
                            continue;
                        }
                        for j in 0..3 {
                            if rq.nodes[j] == NONE {
                                continue;
                            }
                            hess[rp.nodes[i] as usize * n + rq.nodes[j] as usize] +=
                                m * a[p][q] * rp.coefs[i] * rq.coefs[j];
                        }
                    }
                }
            }
        }
        if hess.iter().all(|v| v.is_finite()) {
            Ok(hess)
        } else {
            Err(Error::non_finite("local modular Hessian"))
        }
    }
}

/// Σ_E |E| Ψ(|∇u|_E) with u = 0 on ∂Ω.
pub fn local_modular<T: Scalar>(psi: &PsiFunction<T>, grid: &GridDomain, u: &[T]) -> Result<T> {
    LocalEnergy::new(grid, psi.clone())?.value(u)
}
