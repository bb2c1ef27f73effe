use serde::{Deserialize, Serialize};

use super::{MethodSignature, ModelError, Temperature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Pending,
    InProgress,
    Verified,
    /// Failed `t` generations in its last allowed visit.
    Exhausted,
    /// Killed by the global timeout or discarded by a parent's rollback.
    Aborted,
}

/// A goal waiting in a node's working list. Lifted methods come with the
/// body produced by decomposition; generated sub-lemmas have none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub signature: MethodSignature,
    #[serde(default)]
    pub seed_body: Option<String>,
}

impl Goal {
    pub fn new(signature: MethodSignature) -> Self {
        Goal { signature, seed_body: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofNode {
    pub id: NodeId,
    pub parent_id: Option<NodeId>,
    pub signature: MethodSignature,
    /// Whole-program snapshot the node starts from.
    pub base_code: String,
    pub textual_proof: Option<String>,
    /// Body to augment instead of synthesizing one (lifted methods, the root method).
    pub seed_body: Option<String>,
    pub working_list: Vec<Goal>,
    /// Goals present before any visit; restored on every retry.
    pub seeded_goals: Vec<Goal>,
    pub generation_attempts: u32,
    pub retries_used: u32,
    pub temperature: Temperature,
    pub status: NodeStatus,
    pub children: Vec<NodeId>,
    /// Verified working code once the node succeeds.
    pub verified_code: Option<String>,
}

/// Arena of proof nodes linked by parent pointers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProofTree {
    nodes: Vec<ProofNode>,
}

impl ProofTree {
    pub fn new() -> Self {
        ProofTree { nodes: Vec::new() }
    }

    pub fn root(&self) -> Option<NodeId> {
        self.nodes.first().map(|n| n.id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ProofNode> {
        self.nodes.iter()
    }

    pub fn get(&self, id: NodeId) -> &ProofNode {
        &self.nodes[id.0]
    }

    pub fn get_mut(&mut self, id: NodeId) -> &mut ProofNode {
        &mut self.nodes[id.0]
    }

    /// Adds a node; the first node added becomes the root and must have no parent.
    pub fn add_node(
        &mut self,
        parent: Option<NodeId>,
        signature: MethodSignature,
        base_code: String,
        textual_proof: Option<String>,
        temperature: Temperature,
    ) -> Result<NodeId, ModelError> {
        match (self.nodes.is_empty(), parent) {
            (true, Some(_)) => return Err(ModelError::Tree("the root node cannot have a parent".into())),
            (false, None) => return Err(ModelError::Tree("only the root node may be parentless".into())),
            (false, Some(p)) if p.0 >= self.nodes.len() => {
                return Err(ModelError::Tree(format!("unknown parent {p}")));
            }
            _ => {}
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(ProofNode {
            id,
            parent_id: parent,
            signature,
            base_code,
            textual_proof,
            seed_body: None,
            working_list: Vec::new(),
            seeded_goals: Vec::new(),
            generation_attempts: 0,
            retries_used: 0,
            temperature,
            status: NodeStatus::Pending,
            children: Vec::new(),
            verified_code: None,
        });
        if let Some(p) = parent {
            self.nodes[p.0].children.push(id);
        }
        Ok(id)
    }

    /// Ancestors from the parent up to the root.
    pub fn ancestors(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut cur = self.nodes[id.0].parent_id;
        while let Some(p) = cur {
            if out.contains(&p) || out.len() > self.nodes.len() {
                break;
            }
            out.push(p);
            cur = self.nodes[p.0].parent_id;
        }
        out
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.ancestors(id).len()
    }

    /// All nodes below `id`, in depth-first pre-order.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.nodes[id.0].children.iter().rev().copied().collect();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n.0].children.iter().rev().copied());
        }
        out
    }

    /// Walks every parent chain and reports the first cycle found.
    pub fn check_acyclic(&self) -> Result<(), ModelError> {
        for node in &self.nodes {
            let mut seen = 0usize;
            let mut cur = node.parent_id;
            while let Some(p) = cur {
                seen += 1;
                if seen > self.nodes.len() {
                    return Err(ModelError::Tree(format!("parent cycle through {}", node.id)));
                }
                cur = self.nodes[p.0].parent_id;
            }
            if node.id.0 != 0 && node.parent_id.is_none() {
                return Err(ModelError::Tree(format!("{} has no parent", node.id)));
            }
        }
        Ok(())
    }

    /// Marks the subtree below `id` aborted and detaches it.
    pub fn discard_subtree(&mut self, id: NodeId) -> Vec<NodeId> {
        let gone = self.descendants(id);
        for n in &gone {
            self.nodes[n.0].status = NodeStatus::Aborted;
        }
        self.nodes[id.0].children.clear();
        gone
    }

    /// Sends a verified node back to pending, aborting whatever was built under it.
    pub fn invalidate(&mut self, id: NodeId) -> Vec<NodeId> {
        let gone = self.discard_subtree(id);
        let node = &mut self.nodes[id.0];
        node.status = NodeStatus::Pending;
        node.verified_code = None;
        gone
    }

    /// Verified nodes must have one child per working-list entry.
    pub fn check_children_consistent(&self) -> Result<(), ModelError> {
        for node in &self.nodes {
            if node.status == NodeStatus::Verified && node.children.len() != node.working_list.len() {
                return Err(ModelError::Tree(format!(
                    "{} is verified with {} pending goals but {} children",
                    node.id,
                    node.working_list.len(),
                    node.children.len()
                )));
            }
        }
        Ok(())
    }
}
