//! Mapping between nodal world coordinates and the solver's unknown vector.
//!
//! Unknown layout: free nodal components (node-major, in order of first
//! appearance), then one pressure `p` per element, then one coupling
//! multiplier `q` per element when the coupling constraint is active.

use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::tensor::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct DofState {
    /// Deformed world coordinates per node.
    pub coords: Vec<Vec3>,
    /// Element pressures (kPa).
    pub p: Vec<f64>,
    /// Element coupling multipliers (kPa); present only for coupled free-contraction solves.
    pub q: Option<Vec<f64>>,
}

impl DofState {
    /// Undeformed configuration with zero multipliers.
    pub fn reference(mesh: &Mesh, coupling: bool) -> Self {
        DofState {
            coords: mesh.nodes.clone(),
            p: vec![0.0; mesh.element_count()],
            q: coupling.then(|| vec![0.0; mesh.element_count()]),
        }
    }
}

/// Essential boundary condition on one world component of a face set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Component held at its reference value.
    Pin { set: String, component: usize },
    /// Component prescribed to an absolute world value.
    Prescribe { set: String, component: usize, value: f64 },
    /// All nodes of the set share one unknown for this component.
    Tie { set: String, component: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Free(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub slots: Vec<[Slot; 3]>,
    pub nodal_unknowns: usize,
    pub elements: usize,
    pub coupling: bool,
}

impl DofMap {
    /// Pins and prescriptions take precedence over ties; later prescriptions
    /// override earlier ones on shared nodes.
    pub fn new(mesh: &Mesh, constraints: &[Constraint], coupling: bool) -> Result<Self> {
        #[derive(Clone, Copy)]
        enum Mark {
            Open,
            Fixed(f64),
            Tied(usize),
        }
        let mut marks = vec![[Mark::Open; 3]; mesh.node_count()];
        let mut n_ties = 0;
        for c in constraints {
            if let Constraint::Tie { set, component } = c {
                check_component(*component)?;
                for n in mesh.face_set_nodes(set)? {
                    marks[n][*component] = Mark::Tied(n_ties);
                }
                n_ties += 1;
            }
        }
        for c in constraints {
            match c {
                Constraint::Pin { set, component } => {
                    check_component(*component)?;
                    for n in mesh.face_set_nodes(set)? {
                        marks[n][*component] = Mark::Fixed(mesh.nodes[n][*component]);
                    }
                }
                Constraint::Prescribe { set, component, value } => {
                    check_component(*component)?;
                    if !value.is_finite() {
                        return Err(Error::Config(format!("prescribed value on '{set}' not finite")));
                    }
                    for n in mesh.face_set_nodes(set)? {
                        marks[n][*component] = Mark::Fixed(*value);
                    }
                }
                Constraint::Tie { .. } => {}
            }
        }
        let mut tie_index: Vec<Option<usize>> = vec![None; n_ties];
        let mut next = 0;
        let slots = marks
            .iter()
            .map(|m| {
                m.map(|mark| match mark {
                    Mark::Fixed(v) => Slot::Fixed(v),
                    Mark::Open => {
                        next += 1;
                        Slot::Free(next - 1)
                    }
                    Mark::Tied(t) => Slot::Free(*tie_index[t].get_or_insert_with(|| {
                        next += 1;
                        next - 1
                    })),
                })
            })
            .collect();
        Ok(DofMap {
            slots,
            nodal_unknowns: next,
            elements: mesh.element_count(),
            coupling,
        })
    }

    pub fn unknown_count(&self) -> usize {
        self.nodal_unknowns + self.elements * if self.coupling { 2 } else { 1 }
    }

    pub fn pressure_row(&self, e: usize) -> usize {
        self.nodal_unknowns + e
    }

    pub fn coupling_row(&self, e: usize) -> Option<usize> {
        self.coupling.then(|| self.nodal_unknowns + self.elements + e)
    }

    pub fn to_state(&self, x: &[f64]) -> DofState {
        debug_assert_eq!(x.len(), self.unknown_count());
        let coords = self
            .slots
            .iter()
            .map(|s| {
                Vec3::from(s.map(|slot| match slot {
                    Slot::Free(i) => x[i],
                    Slot::Fixed(v) => v,
                }))
            })
            .collect();
        let m = self.nodal_unknowns;
        let e = self.elements;
        DofState {
            coords,
            p: x[m..m + e].to_vec(),
            q: self.coupling.then(|| x[m + e..m + 2 * e].to_vec()),
        }
    }

    /// Gathers unknowns from a state; for ties the first node in the set wins.
    /// Multipliers absent from `state` are taken as zero.
    pub fn to_unknowns(&self, state: &DofState) -> Vec<f64> {
        let mut x = vec![0.0; self.unknown_count()];
        let mut seen = vec![false; self.nodal_unknowns];
        for (n, slots) in self.slots.iter().enumerate() {
            for (c, slot) in slots.iter().enumerate() {
                if let Slot::Free(i) = *slot {
                    if !seen[i] {
                        x[i] = state.coords[n][c];
                        seen[i] = true;
                    }
                }
            }
        }
        let m = self.nodal_unknowns;
        x[m..m + self.elements].copy_from_slice(&state.p);
        if self.coupling {
            if let Some(q) = &state.q {
                x[m + self.elements..].copy_from_slice(q);
            }
        }
        x
    }

    /// Overwrites fixed slots of a state with their prescribed values.
    pub fn impose(&self, state: &mut DofState) {
        for (n, slots) in self.slots.iter().enumerate() {
            for (c, slot) in slots.iter().enumerate() {
                if let Slot::Fixed(v) = *slot {
                    state.coords[n][c] = v;
                }
            }
        }
    }
}

fn check_component(c: usize) -> Result<()> {
    if c > 2 {
        return Err(Error::Config(format!("component index must be 0..=2, got {c}")));
    }
    Ok(())
}
