//! Generation-by-generation simulation and labeled genealogies.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use super::sampler::OffspringSampler;
use crate::error::{Error, Result};
use crate::model::LFModel;
use crate::scalar::Scalar;
use crate::spectral::{Criticality, SpectralSummary};

pub const DEFAULT_POPULATION_CAP: u64 = 10_000_000;

/// Type counts `Z^(0), ..., Z^(n)`; every particle reproduces independently.
pub fn simulate_generations<T: Scalar, R: Rng + ?Sized>(
    model: &LFModel<T>,
    init: &[u64],
    n: usize,
    rng: &mut R,
    cap: u64,
) -> Result<Vec<Vec<u64>>> {
    if init.len() != model.n_types() {
        return Err(Error::Domain(format!(
            "initial vector has {} entries, model has {} types",
            init.len(),
            model.n_types()
        )));
    }
    let sampler = OffspringSampler::new(model);
    let mut out = Vec::with_capacity(n + 1);
    out.push(init.to_vec());
    for generation in 1..=n {
        let prev = &out[generation - 1];
        let mut next = vec![0u64; prev.len()];
        let mut total = 0u64;
        for (i, &count) in prev.iter().enumerate() {
            for _ in 0..count {
                total += sampler.add_offspring(i, rng, &mut next);
            }
            if total > cap {
                return Err(Error::PopulationOverflow { generation, cap });
            }
        }
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Skeleton,
    Doomed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub type_index: usize,
    pub generation: usize,
}

/// Genealogy up to a horizon with each node labeled skeleton or doomed.
///
/// Nodes are stored breadth-first, so the children of a node occupy a
/// contiguous id range after it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenealogyTree {
    pub nodes: Vec<TreeNode>,
    pub labels: Vec<Label>,
    pub horizon: usize,
    #[serde(skip)]
    children: Vec<(usize, usize)>,
}

impl GenealogyTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children(&self, id: usize) -> std::ops::Range<usize> {
        let (start, count) = self.children[id];
        start..start + count
    }

    pub fn root_label(&self) -> Label {
        self.labels[0]
    }

    /// Number of nodes per generation.
    pub fn generation_sizes(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.horizon + 1];
        for node in &self.nodes {
            out[node.generation] += 1;
        }
        out
    }

    /// `(S^(k), D^(k))` for `k = 0..=horizon`.
    pub fn label_counts(&self) -> Vec<(u64, u64)> {
        let mut out = vec![(0u64, 0u64); self.horizon + 1];
        for (node, label) in self.nodes.iter().zip(&self.labels) {
            let slot = &mut out[node.generation];
            match label {
                Label::Skeleton => slot.0 += 1,
                Label::Doomed => slot.1 += 1,
            }
        }
        out
    }

    /// Type counts of generation `k`.
    pub fn type_counts(&self, k: usize, n_types: usize) -> Vec<u64> {
        let mut out = vec![0u64; n_types];
        for node in self.nodes.iter().filter(|n| n.generation == k) {
            out[node.type_index] += 1;
        }
        out
    }

    /// Structural checks: generations increase by one along edges, an
    /// internal node is skeleton iff some child is, and nodes that die out
    /// before the horizon are doomed.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.nodes.first().map(|n| (n.parent, n.generation)) != Some((None, 0)) {
            return Err("root must be node 0 at generation 0".into());
        }
        for node in &self.nodes {
            let kids = self.children(node.id);
            for c in kids.clone() {
                if self.nodes[c].parent != Some(node.id) {
                    return Err(format!("node {c} does not point back to parent {}", node.id));
                }
                if self.nodes[c].generation != node.generation + 1 {
                    return Err(format!("node {c} skips a generation"));
                }
            }
            if node.generation < self.horizon {
                let any_skeleton = kids.clone().any(|c| self.labels[c] == Label::Skeleton);
                let expected = if any_skeleton { Label::Skeleton } else { Label::Doomed };
                if self.labels[node.id] != expected {
                    return Err(format!("node {} mislabeled", node.id));
                }
            } else if !kids.is_empty() {
                return Err(format!("horizon node {} has children", node.id));
            }
        }
        Ok(())
    }

    /// Graphviz rendering: skeleton-to-skeleton edges solid, all others
    /// dotted.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph genealogy {\n  node [shape=circle, fontsize=10];\n");
        for (node, label) in self.nodes.iter().zip(&self.labels) {
            let style = match label {
                Label::Skeleton => "solid",
                Label::Doomed => "dashed",
            };
            let _ = writeln!(
                out,
                "  n{} [label=\"{}\", style={style}];",
                node.id,
                node.type_index + 1
            );
        }
        for node in &self.nodes {
            if let Some(p) = node.parent {
                let style = if self.labels[p] == Label::Skeleton && self.labels[node.id] == Label::Skeleton {
                    "solid"
                } else {
                    "dotted"
                };
                let _ = writeln!(out, "  n{p} -> n{} [style={style}];", node.id);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Simulates the genealogy of one type-`root_type` particle up to `horizon`
/// and labels it.
///
/// A horizon node of type `j` is skeleton with probability `1 - q_j`,
/// independently; given its type, whether its line survives forever does
/// not depend on the rest of the tree, so the labels have the exact joint
/// law. Earlier nodes are skeleton iff some child is.
pub fn simulate_tree_labeled<T: Scalar, R: Rng + ?Sized>(
    model: &LFModel<T>,
    summary: &SpectralSummary<T>,
    root_type: usize,
    horizon: usize,
    rng: &mut R,
    cap: u64,
) -> Result<GenealogyTree> {
    if summary.class != Criticality::Supercritical {
        return Err(Error::NotSupercritical {
            class: summary.class,
        });
    }
    model.check_type(root_type)?;
    let sampler = OffspringSampler::new(model);
    simulate_tree_with(&sampler, &summary.q, root_type, horizon, rng, cap)
}

pub(crate) fn simulate_tree_with<T: Scalar, R: Rng + ?Sized>(
    sampler: &OffspringSampler,
    q: &[T],
    root_type: usize,
    horizon: usize,
    rng: &mut R,
    cap: u64,
) -> Result<GenealogyTree> {
    let mut nodes = vec![TreeNode {
        id: 0,
        parent: None,
        type_index: root_type,
        generation: 0,
    }];
    let mut children = vec![(0usize, 0usize)];
    let mut kids = Vec::new();
    let mut gen_start = 0;
    for generation in 0..horizon {
        let gen_end = nodes.len();
        for parent in gen_start..gen_end {
            kids.clear();
            sampler.sample_children(nodes[parent].type_index, rng, &mut kids);
            children[parent] = (nodes.len(), kids.len());
            for &t in &kids {
                let id = nodes.len();
                nodes.push(TreeNode {
                    id,
                    parent: Some(parent),
                    type_index: t,
                    generation: generation + 1,
                });
                children.push((0, 0));
            }
            if nodes.len() as u64 > cap {
                return Err(Error::PopulationOverflow {
                    generation: generation + 1,
                    cap,
                });
            }
        }
        gen_start = gen_end;
    }

    let mut labels = vec![Label::Doomed; nodes.len()];
    for id in gen_start..nodes.len() {
        let survive = T::one() - q[nodes[id].type_index];
        if rng.gen::<f64>() < survive.to_f64_lossy() {
            labels[id] = Label::Skeleton;
        }
    }
    for id in (0..gen_start).rev() {
        let (start, count) = children[id];
        if labels[start..start + count].contains(&Label::Skeleton) {
            labels[id] = Label::Skeleton;
        }
    }

    Ok(GenealogyTree {
        nodes,
        labels,
        horizon,
        children,
    })
}
