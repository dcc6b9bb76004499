//! Global numbering of the conforming hierarchical basis.
//!
//! After the conforming transform, `E_u` mode `(m, a)` is an edge mode on
//! local edge 0 (`a = 0`) or 2 (`a = 1`) and interior for `a >= 2`; `E_v`
//! mode `(a, n)` lives on edge 3 (`a = 0`), edge 1 (`a = 1`) or the interior.
//! The tangential trace of an edge mode along its edge is `U_k` of the edge
//! coordinate, so a neighbour that walks the edge the other way sees it
//! multiplied by `(-1)^(k+1)`.

use std::collections::{BTreeSet, HashMap};

use crate::assembly::Orders;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Scalar;

/// Which way a shared edge is oriented globally.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EdgeDirection {
    /// From the lower to the higher global corner node id.
    #[default]
    LowToHigh,
    HighToLow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalDof {
    /// Index in the unconstrained global numbering.
    pub global: usize,
    pub sign: i8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElementDofs {
    /// Indexed like [`Orders::u_index`].
    pub u: Vec<LocalDof>,
    /// Indexed like [`Orders::v_index`].
    pub v: Vec<LocalDof>,
}

impl ElementDofs {
    /// DOFs in local matrix order, `E_u` block first.
    pub fn iter(&self) -> impl Iterator<Item = &LocalDof> {
        self.u.iter().chain(&self.v)
    }
}

#[derive(Clone, Debug)]
pub struct DofMap {
    pub orders: Orders,
    pub elements: Vec<ElementDofs>,
    pub global_count: usize,
    /// Sorted global indices eliminated by the PEC condition.
    pub constrained: Vec<usize>,
    free_index: Vec<Option<usize>>,
}

impl DofMap {
    pub fn free_count(&self) -> usize {
        self.global_count - self.constrained.len()
    }

    /// Position of a global DOF among the free ones, `None` if constrained.
    pub fn free_index(&self, global: usize) -> Option<usize> {
        self.free_index[global]
    }
}

/// Local edge that carries each edge mode, and the mode count along it.
fn edge_mode_count(orders: Orders, edge: usize) -> usize {
    if edge.is_multiple_of(2) {
        orders.m
    } else {
        orders.n
    }
}

pub fn build_connectivity<S: Scalar>(mesh: &Mesh<S>, orders: Orders) -> Result<DofMap> {
    build_connectivity_with(mesh, orders, EdgeDirection::LowToHigh)
}

pub fn build_connectivity_with<S: Scalar>(
    mesh: &Mesh<S>,
    orders: Orders,
    direction: EdgeDirection,
) -> Result<DofMap> {
    let owners = mesh
        .edge_owners()
        .map_err(|e| Error::Connectivity(e.to_string()))?;
    for list in owners.values() {
        if list.len() == 1 && !mesh.boundary_edges.contains(&list[0]) {
            let (e, k) = list[0];
            return Err(Error::Connectivity(format!(
                "edge {k} of element {e} has no neighbour and is not on the boundary (non-conforming mesh)"
            )));
        }
        if let [(e0, k0), (e1, k1)] = list[..] {
            if edge_mode_count(orders, k0) != edge_mode_count(orders, k1) {
                return Err(Error::Connectivity(format!(
                    "edge {k0} of element {e0} and edge {k1} of element {e1} carry different mode counts for {orders}"
                )));
            }
        }
    }

    let mut next = 0usize;
    let mut edge_start: HashMap<(usize, usize), usize> = HashMap::new();
    let mut constrained = BTreeSet::new();
    let mut elements = Vec::with_capacity(mesh.elements.len());
    let sentinel = LocalDof {
        global: usize::MAX,
        sign: 0,
    };

    for (e, el) in mesh.elements.iter().enumerate() {
        let mut dofs = ElementDofs {
            u: vec![sentinel; orders.u_len()],
            v: vec![sentinel; orders.v_len()],
        };
        for edge in 0..4 {
            let (a, b) = el.edge_corners(edge);
            let key = (a.min(b), a.max(b));
            let count = edge_mode_count(orders, edge);
            let start = *edge_start.entry(key).or_insert_with(|| {
                let s = next;
                next += count;
                s
            });
            if mesh.boundary_edges.contains(&(e, edge)) {
                constrained.extend(start..start + count);
            }
            let forward = match direction {
                EdgeDirection::LowToHigh => a < b,
                EdgeDirection::HighToLow => a > b,
            };
            for k in 0..count {
                let sign = if forward || k % 2 == 1 { 1 } else { -1 };
                let dof = LocalDof {
                    global: start + k,
                    sign,
                };
                match edge {
                    0 => dofs.u[orders.u_index(k, 0)] = dof,
                    2 => dofs.u[orders.u_index(k, 1)] = dof,
                    3 => dofs.v[orders.v_index(0, k)] = dof,
                    _ => dofs.v[orders.v_index(1, k)] = dof,
                }
            }
        }
        for slot in dofs.u.iter_mut().chain(dofs.v.iter_mut()) {
            if slot.sign == 0 {
                *slot = LocalDof {
                    global: next,
                    sign: 1,
                };
                next += 1;
            }
        }
        elements.push(dofs);
    }

    let mut free_index = vec![None; next];
    let mut free = 0;
    for (g, slot) in free_index.iter_mut().enumerate() {
        if !constrained.contains(&g) {
            *slot = Some(free);
            free += 1;
        }
    }
    Ok(DofMap {
        orders,
        elements,
        global_count: next,
        constrained: constrained.into_iter().collect(),
        free_index,
    })
}
