//! Circuits as directed graphs of computing elements and named signal nodes.
//!
//! A [`Netlist`] is plain data. [`validate`] checks its structural rules and
//! [`lower`] turns a valid netlist into an executable [`OdeSystem`]. The text
//! file format lives in [`format`].

pub mod format;
mod lower;
mod validate;

use crate::elements::{Element, ElementKind};
use crate::expr::Expr;
use std::collections::{BTreeMap, BTreeSet};

pub use lower::{lower, DomainFault, OdeSystem, StateKind, StateSlot, Workspace};
pub use validate::{validate, Diagnostic, Rule};

/// The node whose signal is reported as the circuit's solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub node: String,
    /// Optional readout `h(v, t)` applied to the node signal after simulation.
    pub transform: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Netlist {
    pub nodes: BTreeSet<String>,
    pub elements: BTreeMap<String, Element>,
    pub output: Option<Output>,
}

impl Netlist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&mut self, name: impl Into<String>) -> &mut Self {
        self.nodes.insert(name.into());
        self
    }

    /// Insert an element, returning the previous one with the same id.
    pub fn add(&mut self, id: impl Into<String>, element: Element) -> Option<Element> {
        self.elements.insert(id.into(), element)
    }

    pub fn set_output(&mut self, node: impl Into<String>, transform: Option<Expr>) -> &mut Self {
        self.output = Some(Output {
            node: node.into(),
            transform,
        });
        self
    }

    pub fn count(&self, kind: ElementKind) -> usize {
        self.elements.values().filter(|e| e.kind() == kind).count()
    }

    /// Elements driving `node`.
    pub fn drivers<'a>(&'a self, node: &'a str) -> impl Iterator<Item = (&'a String, &'a Element)> + 'a {
        self.elements.iter().filter(move |(_, e)| e.output() == node)
    }
}
