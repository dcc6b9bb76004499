//! Curved quadrilateral meshes with Lagrangian isoparametric geometry.
//!
//! Each element carries `(p+1)^2` geometry nodes on an equispaced reference
//! grid, ordered lexicographically with `u` varying fastest. Local edges are
//! numbered `0: v = -1`, `1: u = +1`, `2: v = +1`, `3: u = -1`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quadrature::gauss_legendre;
use crate::scalar::Scalar;

/// Relative permittivity and permeability as functions of physical `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Materials {
    pub eps_r: Expr,
    pub mu_r: Expr,
}

impl Materials {
    pub fn parse(eps_r: &str, mu_r: &str) -> Result<Self> {
        Ok(Materials {
            eps_r: Expr::parse(eps_r)?,
            mu_r: Expr::parse(mu_r)?,
        })
    }

    pub fn homogeneous(eps_r: f64, mu_r: f64) -> Self {
        Materials {
            eps_r: Expr::constant(eps_r),
            mu_r: Expr::constant(mu_r),
        }
    }

    /// Permittivity profile of the curved cavity example, `2 exp(x + y + 2)`, with `mu_r = 1`.
    pub fn graded_cavity() -> Self {
        Materials::parse("2*exp(x+y+2)", "1").expect("built-in material parses")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurvedQuadElement {
    pub order: usize,
    pub nodes: Vec<usize>,
}

impl CurvedQuadElement {
    pub fn node_at(&self, i: usize, j: usize) -> usize {
        self.nodes[j * (self.order + 1) + i]
    }

    /// Geometry node ids along a local edge, in the direction of increasing local coordinate.
    pub fn edge_nodes(&self, edge: usize) -> Vec<usize> {
        let p = self.order;
        (0..=p)
            .map(|k| match edge {
                0 => self.node_at(k, 0),
                1 => self.node_at(p, k),
                2 => self.node_at(k, p),
                3 => self.node_at(0, k),
                _ => panic!("local edge index {edge} out of range"),
            })
            .collect()
    }

    /// `(start, end)` corner nodes of a local edge.
    pub fn edge_corners(&self, edge: usize) -> (usize, usize) {
        let nodes = self.edge_nodes(edge);
        (nodes[0], nodes[self.order])
    }
}

/// `(element, local edge)` pairs per geometric edge, keyed by sorted corner node ids.
pub type EdgeOwners = HashMap<(usize, usize), Vec<(usize, usize)>>;

/// Physical position and covariant Jacobian entries at one reference point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapSample<S> {
    pub x: S,
    pub y: S,
    pub x_u: S,
    pub x_v: S,
    pub y_u: S,
    pub y_v: S,
    pub jac: S,
}

#[derive(Clone, Debug)]
pub struct Mesh<S> {
    pub nodes: Vec<[S; 2]>,
    pub elements: Vec<CurvedQuadElement>,
    pub boundary_edges: BTreeSet<(usize, usize)>,
    pub materials: Materials,
}

/// Equispaced Lagrange interpolation on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    grid: Vec<f64>,
}

impl LagrangeBasis {
    pub fn equispaced(order: usize) -> Self {
        assert!(order >= 1, "geometric order must be at least 1");
        let grid = (0..=order)
            .map(|k| -1.0 + 2.0 * k as f64 / order as f64)
            .collect();
        LagrangeBasis { grid }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values<S: Scalar>(&self, x: S) -> Vec<S> {
        let g: Vec<S> = self.grid.iter().map(|&t| S::lit(t)).collect();
        (0..g.len())
            .map(|i| {
                g.iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i)
                    .fold(S::one(), |acc, (_, &gk)| acc * (x - gk) / (g[i] - gk))
            })
            .collect()
    }

    /// Analytic derivatives, stable at the grid points themselves.
    pub fn derivatives<S: Scalar>(&self, x: S) -> Vec<S> {
        let g: Vec<S> = self.grid.iter().map(|&t| S::lit(t)).collect();
        let n = g.len();
        (0..n)
            .map(|i| {
                let mut total = S::zero();
                for k in (0..n).filter(|&k| k != i) {
                    let mut term = S::one() / (g[i] - g[k]);
                    for l in (0..n).filter(|&l| l != i && l != k) {
                        term *= (x - g[l]) / (g[i] - g[l]);
                    }
                    total += term;
                }
                total
            })
            .collect()
    }
}

impl<S: Scalar> Mesh<S> {
    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    /// Maps reference `(u, v)` through element `elem`.
    pub fn map_and_jacobian(&self, elem: usize, u: S, v: S) -> MapSample<S> {
        let element = &self.elements[elem];
        let basis = LagrangeBasis::equispaced(element.order);
        map_with_tables(
            element,
            &self.nodes,
            &basis.values(u),
            &basis.derivatives(u),
            &basis.values(v),
            &basis.derivatives(v),
        )
    }

    /// Samples the element map on the tensor grid `us x vs`; result is indexed `[i * vs.len() + j]`.
    pub fn sample_grid(&self, elem: usize, us: &[S], vs: &[S]) -> Vec<MapSample<S>> {
        let element = &self.elements[elem];
        let basis = LagrangeBasis::equispaced(element.order);
        let lu: Vec<_> = us
            .iter()
            .map(|&u| (basis.values(u), basis.derivatives(u)))
            .collect();
        let lv: Vec<_> = vs
            .iter()
            .map(|&v| (basis.values(v), basis.derivatives(v)))
            .collect();
        let mut out = Vec::with_capacity(us.len() * vs.len());
        for (vu, du) in &lu {
            for (vv, dv) in &lv {
                out.push(map_with_tables(element, &self.nodes, vu, du, vv, dv));
            }
        }
        out
    }

    /// Checks node references, node counts, Jacobian sign, shared-edge
    /// geometry and boundary edge consistency.
    pub fn validate(&self) -> Result<()> {
        for (e, el) in self.elements.iter().enumerate() {
            if el.order == 0 {
                return Err(Error::mesh(e, "geometric order must be at least 1"));
            }
            let want = (el.order + 1) * (el.order + 1);
            if el.nodes.len() != want {
                return Err(Error::mesh(
                    e,
                    format!(
                        "order {} needs {want} nodes, found {}",
                        el.order,
                        el.nodes.len()
                    ),
                ));
            }
            if let Some(&bad) = el.nodes.iter().find(|&&n| n >= self.nodes.len()) {
                return Err(Error::mesh(e, format!("dangling node reference {bad}")));
            }
        }
        for (e, &(el, edge)) in self.boundary_edges.iter().enumerate() {
            if el >= self.elements.len() || edge > 3 {
                return Err(Error::mesh(
                    None,
                    format!("boundary edge #{e} = [{el}, {edge}] is out of range"),
                ));
            }
        }
        for e in 0..self.elements.len() {
            self.check_orientation(e)?;
        }
        let owners = self.edge_owners()?;
        let single: BTreeSet<(usize, usize)> = owners
            .values()
            .filter(|o| o.len() == 1)
            .map(|o| o[0])
            .collect();
        if let Some(&(e, edge)) = single.difference(&self.boundary_edges).next() {
            return Err(Error::mesh(
                e,
                format!("edge {edge} has no neighbour but is not listed as a boundary edge (hanging node?)"),
            ));
        }
        if let Some(&(e, edge)) = self.boundary_edges.difference(&single).next() {
            return Err(Error::mesh(
                e,
                format!("boundary edge {edge} is shared with another element"),
            ));
        }
        Ok(())
    }

    fn check_orientation(&self, e: usize) -> Result<()> {
        let n = (2 * self.elements[e].order).max(2);
        let rule = gauss_legendre::<S>(n);
        let samples = self.sample_grid(e, &rule.nodes, &rule.nodes);
        for (k, s) in samples.iter().enumerate() {
            if !(s.jac > S::zero()) {
                return Err(Error::Geometry {
                    element: e,
                    u: rule.nodes[k / n].as_f64(),
                    v: rule.nodes[k % n].as_f64(),
                    jacobian: s.jac.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Elements incident to each geometric edge, keyed by sorted corner node ids.
    ///
    /// Fails on edges shared by more than two elements or whose geometry
    /// node sequences disagree.
    pub fn edge_owners(&self) -> Result<EdgeOwners> {
        let mut owners = EdgeOwners::new();
        for (e, el) in self.elements.iter().enumerate() {
            for edge in 0..4 {
                let (a, b) = el.edge_corners(edge);
                if a == b {
                    return Err(Error::mesh(e, format!("edge {edge} is degenerate")));
                }
                owners
                    .entry((a.min(b), a.max(b)))
                    .or_default()
                    .push((e, edge));
            }
        }
        for list in owners.values() {
            if list.len() > 2 {
                let (e, edge) = list[2];
                return Err(Error::mesh(
                    e,
                    format!("edge {edge} is shared by more than two elements"),
                ));
            }
            if let [(e0, k0), (e1, k1)] = list[..] {
                let first = self.elements[e0].edge_nodes(k0);
                let mut second = self.elements[e1].edge_nodes(k1);
                if first != second {
                    second.reverse();
                    if first != second {
                        return Err(Error::mesh(
                            e1,
                            format!("edge {k1} does not match edge {k0} of element {e0}"),
                        ));
                    }
                }
            }
        }
        Ok(owners)
    }

    /// Serializes to the JSON mesh file format.
    pub fn to_json(&self) -> Result<String> {
        let file = MeshFile {
            version: 1,
            nodes: self
                .nodes
                .iter()
                .map(|p| [p[0].as_f64(), p[1].as_f64()])
                .collect(),
            elements: self
                .elements
                .iter()
                .map(|el| ElementRecord {
                    order: el.order,
                    nodes: el.nodes.clone(),
                })
                .collect(),
            boundary_edges: self.boundary_edges.iter().map(|&(e, k)| [e, k]).collect(),
            materials: MaterialRecord {
                eps_r: self.materials.eps_r.to_string(),
                mu_r: self.materials.mu_r.to_string(),
            },
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

fn map_with_tables<S: Scalar>(
    element: &CurvedQuadElement,
    nodes: &[[S; 2]],
    lu: &[S],
    du: &[S],
    lv: &[S],
    dv: &[S],
) -> MapSample<S> {
    let p1 = element.order + 1;
    let z = S::zero();
    let (mut x, mut y, mut x_u, mut x_v, mut y_u, mut y_v) = (z, z, z, z, z, z);
    for j in 0..p1 {
        for i in 0..p1 {
            let [nx, ny] = nodes[element.nodes[j * p1 + i]];
            let w = lu[i] * lv[j];
            let wu = du[i] * lv[j];
            let wv = lu[i] * dv[j];
            x += w * nx;
            y += w * ny;
            x_u += wu * nx;
            y_u += wu * ny;
            x_v += wv * nx;
            y_v += wv * ny;
        }
    }
    MapSample {
        x,
        y,
        x_u,
        x_v,
        y_u,
        y_v,
        jac: x_u * y_v - x_v * y_u,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    version: u32,
    nodes: Vec<[f64; 2]>,
    elements: Vec<ElementRecord>,
    boundary_edges: Vec<[usize; 2]>,
    materials: MaterialRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementRecord {
    order: usize,
    nodes: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialRecord {
    eps_r: String,
    mu_r: String,
}

/// Parses and validates a JSON mesh file.
pub fn load_mesh<S: Scalar>(bytes: &[u8]) -> Result<Mesh<S>> {
    let file: MeshFile = serde_json::from_slice(bytes)?;
    if file.version != 1 {
        return Err(Error::mesh(
            None,
            format!("unsupported mesh version {}", file.version),
        ));
    }
    let mesh = Mesh {
        nodes: file
            .nodes
            .iter()
            .map(|&[x, y]| [S::lit(x), S::lit(y)])
            .collect(),
        elements: file
            .elements
            .into_iter()
            .map(|r| CurvedQuadElement {
                order: r.order,
                nodes: r.nodes,
            })
            .collect(),
        boundary_edges: file.boundary_edges.iter().map(|&[e, k]| (e, k)).collect(),
        materials: Materials::parse(&file.materials.eps_r, &file.materials.mu_r)?,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Region bounded by `x = -1`, `y = -1`, a top curve `y = top(x)` and a right
/// curve `x = right(y)`, filled by transfinite interpolation.
#[derive(Clone, Debug)]
pub struct DomainSpec {
    pub top: Expr,
    pub right: Expr,
    pub materials: Materials,
}

impl DomainSpec {
    /// Top `f(x) = -0.2 (x^2 - 1)^2 + 1`, right `g(y) = 0.2 (y^2 - 1)^2 + 1`,
    /// `eps_r = 2 exp(x + y + 2)`, `mu_r = 1`.
    pub fn curved_cavity() -> Self {
        DomainSpec {
            top: Expr::parse("-0.2*(x^2-1)^2+1").expect("built-in curve parses"),
            right: Expr::parse("0.2*(y^2-1)^2+1").expect("built-in curve parses"),
            materials: Materials::graded_cavity(),
        }
    }

    /// The square `[-1, 1]^2` with homogeneous vacuum.
    pub fn square() -> Self {
        DomainSpec {
            top: Expr::constant(1.0),
            right: Expr::constant(1.0),
            materials: Materials::homogeneous(1.0, 1.0),
        }
    }

    fn top_at(&self, x: f64) -> Result<f64> {
        Ok(self.top.eval(x, 0.0)?)
    }

    fn right_at(&self, y: f64) -> Result<f64> {
        Ok(self.right.eval(0.0, y)?)
    }

    /// Intersection of the top and right curves.
    fn top_right_corner(&self) -> Result<(f64, f64)> {
        let (mut x, mut y) = (1.0, 1.0);
        for _ in 0..200 {
            let nx = self.right_at(y)?;
            let ny = self.top_at(nx)?;
            if (nx - x).abs() <= 1e-15 && (ny - y).abs() <= 1e-15 {
                return Ok((nx, ny));
            }
            x = nx;
            y = ny;
        }
        Err(Error::mesh(
            None,
            "top and right boundary curves do not intersect",
        ))
    }

    /// Maps `(s, t) in [-1, 1]^2` to the physical domain (Coons patch).
    pub fn transfinite(&self, s: f64, t: f64) -> Result<[f64; 2]> {
        let p00 = [-1.0, -1.0];
        let p10 = [self.right_at(-1.0)?, -1.0];
        let p01 = [-1.0, self.top_at(-1.0)?];
        let (cx, cy) = self.top_right_corner()?;
        let p11 = [cx, cy];
        let xi = 0.5 * (s + 1.0);
        let eta = 0.5 * (t + 1.0);
        let bottom = [p00[0] + xi * (p10[0] - p00[0]), -1.0];
        let top_x = p01[0] + xi * (p11[0] - p01[0]);
        let top = [top_x, self.top_at(top_x)?];
        let left = [-1.0, p00[1] + eta * (p01[1] - p00[1])];
        let right_y = p10[1] + eta * (p11[1] - p10[1]);
        let right = [self.right_at(right_y)?, right_y];
        let mut out = [0.0; 2];
        for c in 0..2 {
            out[c] = (1.0 - eta) * bottom[c] + eta * top[c] + (1.0 - xi) * left[c] + xi * right[c]
                - ((1.0 - xi) * (1.0 - eta) * p00[c]
                    + xi * (1.0 - eta) * p10[c]
                    + (1.0 - xi) * eta * p01[c]
                    + xi * eta * p11[c]);
        }
        Ok(out)
    }
}

/// Structured `nx x ny` mesh of order-`p` elements over `spec`.
///
/// Elements are numbered row by row from the bottom-left; geometry nodes are
/// shared through a global `(nx p + 1) x (ny p + 1)` grid.
pub fn generate_domain<S: Scalar>(
    spec: &DomainSpec,
    nx: usize,
    ny: usize,
    p: usize,
) -> Result<Mesh<S>> {
    if nx == 0 || ny == 0 || p == 0 {
        return Err(Error::Usage("mesh generator needs nx, ny, p >= 1".into()));
    }
    let gx = nx * p + 1;
    let gy = ny * p + 1;
    let mut nodes = Vec::with_capacity(gx * gy);
    for j in 0..gy {
        let t = -1.0 + 2.0 * j as f64 / (gy - 1) as f64;
        for i in 0..gx {
            let s = -1.0 + 2.0 * i as f64 / (gx - 1) as f64;
            let [x, y] = spec.transfinite(s, t)?;
            nodes.push([S::lit(x), S::lit(y)]);
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    let mut boundary_edges = BTreeSet::new();
    for ey in 0..ny {
        for ex in 0..nx {
            let e = elements.len();
            let mut ids = Vec::with_capacity((p + 1) * (p + 1));
            for j in 0..=p {
                for i in 0..=p {
                    ids.push((ey * p + j) * gx + ex * p + i);
                }
            }
            elements.push(CurvedQuadElement {
                order: p,
                nodes: ids,
            });
            if ey == 0 {
                boundary_edges.insert((e, 0));
            }
            if ex == nx - 1 {
                boundary_edges.insert((e, 1));
            }
            if ey == ny - 1 {
                boundary_edges.insert((e, 2));
            }
            if ex == 0 {
                boundary_edges.insert((e, 3));
            }
        }
    }
    let mesh = Mesh {
        nodes,
        elements,
        boundary_edges,
        materials: spec.materials.clone(),
    };
    mesh.validate()?;
    Ok(mesh)
}

/// The curved, graded-permittivity cavity: `nx x ny` elements of order `p`.
pub fn generate_curved_cavity<S: Scalar>(nx: usize, ny: usize, p: usize) -> Result<Mesh<S>> {
    generate_domain(&DomainSpec::curved_cavity(), nx, ny, p)
}

/// Single element covering `[-1, 1]^2` with identity geometry of order `p`.
pub fn reference_square<S: Scalar>(p: usize, materials: Materials) -> Mesh<S> {
    let spec = DomainSpec {
        materials,
        ..DomainSpec::square()
    };
    generate_domain(&spec, 1, 1, p).expect("reference square is valid")
}
