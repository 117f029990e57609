use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{DecisionTree, Node, NodeId, Predicate, TreeError};
use crate::mdp::Mdp;

/// JSON form of a tree: `{"root": 0, "nodes": [...]}` where each node is
/// `{"id", "kind": "inner", "var", "bound", "left", "right"}` or
/// `{"id", "kind": "leaf", "action"}`. Variables and actions are indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub root: NodeId,
    pub nodes: Vec<NodeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeDocument {
    Inner {
        id: NodeId,
        var: usize,
        bound: i64,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        id: NodeId,
        action: usize,
    },
}

impl NodeDocument {
    fn id(&self) -> NodeId {
        match self {
            NodeDocument::Inner { id, .. } | NodeDocument::Leaf { id, .. } => *id,
        }
    }
}

impl DecisionTree {
    pub fn to_document(&self) -> TreeDocument {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| match *n {
                Node::Inner { pred, left, right } => NodeDocument::Inner {
                    id,
                    var: pred.var,
                    bound: pred.bound,
                    left,
                    right,
                },
                Node::Leaf { action } => NodeDocument::Leaf { id, action },
            })
            .collect();
        TreeDocument {
            root: self.root,
            nodes,
        }
    }

    pub fn from_document(doc: &TreeDocument) -> Result<DecisionTree, TreeError> {
        let mut nodes: Vec<Option<Node>> = vec![None; doc.nodes.len()];
        for nd in &doc.nodes {
            let id = nd.id();
            let slot = nodes.get_mut(id).ok_or(TreeError::MissingNode(id))?;
            if slot.is_some() {
                return Err(TreeError::Syntax(format!("node id {id} used twice")));
            }
            *slot = Some(match *nd {
                NodeDocument::Inner {
                    var,
                    bound,
                    left,
                    right,
                    ..
                } => Node::Inner {
                    pred: Predicate { var, bound },
                    left,
                    right,
                },
                NodeDocument::Leaf { action, .. } => Node::Leaf { action },
            });
        }
        let nodes = nodes
            .into_iter()
            .enumerate()
            .map(|(i, n)| n.ok_or(TreeError::MissingNode(i)))
            .collect::<Result<Vec<_>, _>>()?;
        DecisionTree::new(nodes, doc.root)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tree documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<DecisionTree, TreeError> {
        let doc: TreeDocument =
            serde_json::from_str(text).map_err(|e| TreeError::Syntax(e.to_string()))?;
        DecisionTree::from_document(&doc)
    }

    /// Graphviz rendering with predicates written `v<i><=b` and leaves
    /// `a<k>`.
    pub fn to_dot(&self) -> String {
        self.dot_with(|v| format!("v{v}"), |a| format!("a{a}"))
    }

    /// Graphviz rendering using the variable names and action labels of `m`.
    pub fn to_dot_named(&self, m: &Mdp) -> String {
        self.dot_with(
            |v| m.variables()[v].name.clone(),
            |a| m.action_label(a).to_string(),
        )
    }

    fn dot_with(&self, var: impl Fn(usize) -> String, action: impl Fn(usize) -> String) -> String {
        let mut out = String::from("digraph tree {\n");
        for n in self.topology().subtree(self.root) {
            match self.nodes[n] {
                Node::Inner { pred, left, right } => {
                    let _ = writeln!(out, "  n{n} [label=\"{}<={}\"];", var(pred.var), pred.bound);
                    let _ = writeln!(out, "  n{n} -> n{left} [label=\"true\"];");
                    let _ = writeln!(out, "  n{n} -> n{right} [label=\"false\"];");
                }
                Node::Leaf { action: a } => {
                    let _ = writeln!(out, "  n{n} [shape=box, label=\"{}\"];", action(a));
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::tests::split;

    #[test]
    fn json_round_trip() {
        let t = split(1, -3, 0, 2);
        let text = t.to_json();
        assert_eq!(DecisionTree::from_json(&text).unwrap(), t);
        assert_eq!(DecisionTree::from_json(&text).unwrap().to_json(), text);
        assert!(text.contains("\"kind\": \"inner\""));
    }

    #[test]
    fn json_rejects_broken_trees() {
        let text = r#"{"root": 0, "nodes": [{"id": 0, "kind": "inner", "var": 0, "bound": 1, "left": 1, "right": 2}, {"id": 1, "kind": "leaf", "action": 0}]}"#;
        assert_eq!(DecisionTree::from_json(text), Err(TreeError::MissingNode(2)));
        assert!(matches!(DecisionTree::from_json("[1]"), Err(TreeError::Syntax(_))));
    }

    #[test]
    fn dot_output() {
        let leaf = DecisionTree::leaf(1).to_dot();
        assert_eq!(leaf, "digraph tree {\n  n0 [shape=box, label=\"a1\"];\n}\n");
        let dot = split(0, 1, 0, 1).to_dot();
        assert!(dot.contains("n0 [label=\"v0<=1\"]"));
        assert_eq!(dot.matches("shape=box").count(), 2);
    }
}
