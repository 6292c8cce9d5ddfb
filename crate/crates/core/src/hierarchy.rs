//! Class taxonomies: balanced trees with ancestor and proxy-set queries.
//!
//! A hierarchy has a single root whose immediate children head the `object`,
//! `background`, and `ignored` subtrees. Leaves sit at level 0 and correspond
//! one-to-one to known classes; the root sits at level `L - 1`. Ragged input
//! trees are balanced by inserting passthrough (single-child) nodes above
//! shallow leaves, so the ancestor of a class is well defined at every level.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HierarchyError {
    #[error("hierarchy file must contain exactly one root node, found {0}")]
    RootCount(usize),
    #[error("duplicate node name '{0}'")]
    DuplicateName(String),
    #[error("leaf class '{0}' does not name a leaf node")]
    MissingLeafClass(String),
    #[error("leaf node '{0}' is not listed in leaf_classes")]
    UnlistedLeaf(String),
    #[error("root child '{0}' has no subtree tag")]
    UntaggedRootChild(String),
    #[error("subtree entry '{0}' does not name a root child")]
    UnknownSubtreeEntry(String),
    #[error("subtree entry '{0}' is tagged more than once")]
    DoublyTagged(String),
    #[error("unknown class id {0}")]
    UnknownClass(usize),
    #[error("unknown node name '{0}'")]
    UnknownNodeName(String),
    #[error("level {level} out of range for depth-{depth} hierarchy")]
    LevelOutOfRange { level: usize, depth: usize },
}

/// Dense node index, assigned in file order (balancing nodes come last).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct NodeId(pub usize);

/// Known-class index; doubles as the index of the class's leaf proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct ClassId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SubtreeTag {
    Object,
    Background,
    Ignored,
}

/// One node of the input tree, as stored in the hierarchy file.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct NodeSpec {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub children: Vec<NodeSpec>,
}

impl NodeSpec {
    pub fn leaf(name: &str) -> Self {
        Self {
            name: name.to_string(),
            children: Vec::new(),
        }
    }

    pub fn branch(name: &str, children: Vec<NodeSpec>) -> Self {
        Self {
            name: name.to_string(),
            children,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SubtreeSpec {
    #[cfg_attr(feature = "serde", serde(default))]
    pub object: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub background: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub ignored: Vec<String>,
}

/// Parsed content of a hierarchy file: a single-rooted node tree, the known
/// class names, and the subtree tags of the root's children.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct HierarchySpec {
    pub nodes: Vec<NodeSpec>,
    pub leaf_classes: Vec<String>,
    pub subtrees: SubtreeSpec,
}

#[derive(Debug, Clone)]
pub struct HierarchyNode {
    pub id: NodeId,
    pub name: String,
    /// 0 for leaves, `L - 1` for the root.
    pub level: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Inserted during balancing; its proxy equals its single child's point.
    pub passthrough: bool,
}

/// Immutable, balanced taxonomy.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    nodes: Vec<HierarchyNode>,
    depth: usize,
    root: NodeId,
    /// Leaf node per class, indexed by `ClassId`.
    leaves: Vec<NodeId>,
    /// Class per leaf node (None for internal nodes).
    class_of: Vec<Option<ClassId>>,
    tags: Vec<Option<SubtreeTag>>,
    /// Node ids grouped by level, ascending ids within a level.
    levels: Vec<Vec<NodeId>>,
    name_index: BTreeMap<String, NodeId>,
}

/// Build a validated, balanced [`Hierarchy`] from parsed file content.
pub fn build_hierarchy(spec: &HierarchySpec) -> Result<Hierarchy, HierarchyError> {
    Hierarchy::build(spec)
}

impl Hierarchy {
    pub fn build(spec: &HierarchySpec) -> Result<Self, HierarchyError> {
        if spec.nodes.len() != 1 {
            return Err(HierarchyError::RootCount(spec.nodes.len()));
        }

        // Flatten in file (preorder) order; ids are dense in that order.
        let mut nodes: Vec<HierarchyNode> = Vec::new();
        let mut names: BTreeSet<String> = BTreeSet::new();
        flatten(&spec.nodes[0], None, &mut nodes, &mut names)?;
        let root = NodeId(0);

        // Leaf classes must be a bijection onto the leaf nodes.
        let mut leaves = Vec::with_capacity(spec.leaf_classes.len());
        let mut seen = BTreeSet::new();
        for class_name in &spec.leaf_classes {
            if !seen.insert(class_name.clone()) {
                return Err(HierarchyError::DuplicateName(class_name.clone()));
            }
            let node = nodes
                .iter()
                .find(|n| &n.name == class_name && n.children.is_empty())
                .ok_or_else(|| HierarchyError::MissingLeafClass(class_name.clone()))?;
            leaves.push(node.id);
        }
        for n in &nodes {
            if n.children.is_empty() && !seen.contains(&n.name) {
                return Err(HierarchyError::UnlistedLeaf(n.name.clone()));
            }
        }

        // Root children partition into the three subtree tags.
        let mut child_tags: BTreeMap<NodeId, SubtreeTag> = BTreeMap::new();
        let tag_lists = [
            (SubtreeTag::Object, &spec.subtrees.object),
            (SubtreeTag::Background, &spec.subtrees.background),
            (SubtreeTag::Ignored, &spec.subtrees.ignored),
        ];
        for (tag, list) in tag_lists {
            for name in list {
                let child = nodes[root.0]
                    .children
                    .iter()
                    .copied()
                    .find(|id| &nodes[id.0].name == name)
                    .ok_or_else(|| HierarchyError::UnknownSubtreeEntry(name.clone()))?;
                if child_tags.insert(child, tag).is_some() {
                    return Err(HierarchyError::DoublyTagged(name.clone()));
                }
            }
        }
        for child in &nodes[root.0].children {
            if !child_tags.contains_key(child) {
                return Err(HierarchyError::UntaggedRootChild(
                    nodes[child.0].name.clone(),
                ));
            }
        }

        // Balance: pad shallow leaves with passthrough chains so every leaf
        // sits at the maximum depth.
        let depth_of = |nodes: &[HierarchyNode], mut id: NodeId| {
            let mut d = 0;
            while let Some(p) = nodes[id.0].parent {
                d += 1;
                id = p;
            }
            d
        };
        let max_depth = (0..nodes.len())
            .filter(|i| nodes[*i].children.is_empty())
            .map(|i| depth_of(&nodes, NodeId(i)))
            .max()
            .unwrap_or(0);
        let leaf_ids: Vec<NodeId> = (0..nodes.len())
            .filter(|i| nodes[*i].children.is_empty())
            .map(NodeId)
            .collect();
        for leaf in leaf_ids {
            let gap = max_depth - depth_of(&nodes, leaf);
            let mut lower = leaf;
            for k in 0..gap {
                let pad = NodeId(nodes.len());
                let parent = nodes[lower.0].parent.expect("padded node has a parent");
                let slot = nodes[parent.0]
                    .children
                    .iter()
                    .position(|c| *c == lower)
                    .expect("child listed under its parent");
                nodes[parent.0].children[slot] = pad;
                nodes[lower.0].parent = Some(pad);
                let name = format!("{}::pad{}", nodes[leaf.0].name, k + 1);
                nodes.push(HierarchyNode {
                    id: pad,
                    name,
                    level: 0,
                    parent: Some(parent),
                    children: vec![lower],
                    passthrough: true,
                });
                lower = pad;
            }
        }

        // Levels count down from the root: level = (L - 1) - depth.
        let depth_levels = max_depth + 1;
        for i in 0..nodes.len() {
            nodes[i].level = depth_levels - 1 - depth_of(&nodes, NodeId(i));
        }

        // Propagate subtree tags from the root's original children downward,
        // and upward across any passthrough chain balancing put above them.
        let mut tags: Vec<Option<SubtreeTag>> = vec![None; nodes.len()];
        for (child, tag) in &child_tags {
            let mut stack = vec![*child];
            while let Some(id) = stack.pop() {
                tags[id.0] = Some(*tag);
                stack.extend(nodes[id.0].children.iter().copied());
            }
            let mut up = nodes[child.0].parent;
            while let Some(p) = up {
                if p == root {
                    break;
                }
                tags[p.0] = Some(*tag);
                up = nodes[p.0].parent;
            }
        }

        let mut levels = vec![Vec::new(); depth_levels];
        for n in &nodes {
            levels[n.level].push(n.id);
        }
        for level in &mut levels {
            level.sort_unstable();
        }

        let mut class_of = vec![None; nodes.len()];
        for (k, leaf) in leaves.iter().enumerate() {
            class_of[leaf.0] = Some(ClassId(k));
        }

        let name_index = nodes.iter().map(|n| (n.name.clone(), n.id)).collect();

        Ok(Self {
            nodes,
            depth: depth_levels,
            root,
            leaves,
            class_of,
            tags,
            levels,
            name_index,
        })
    }

    /// Number of levels `L`.
    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn class_count(&self) -> usize {
        self.leaves.len()
    }

    #[inline]
    pub fn root(&self) -> NodeId {
        self.root
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &HierarchyNode {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &HierarchyNode> {
        self.nodes.iter()
    }

    pub fn node_by_name(&self, name: &str) -> Result<NodeId, HierarchyError> {
        self.name_index
            .get(name)
            .copied()
            .ok_or_else(|| HierarchyError::UnknownNodeName(name.to_string()))
    }

    pub fn leaf_of(&self, class: ClassId) -> Result<NodeId, HierarchyError> {
        self.leaves
            .get(class.0)
            .copied()
            .ok_or(HierarchyError::UnknownClass(class.0))
    }

    #[inline]
    pub fn class_of_leaf(&self, id: NodeId) -> Option<ClassId> {
        self.class_of[id.0]
    }

    #[inline]
    pub fn subtree_tag(&self, id: NodeId) -> Option<SubtreeTag> {
        self.tags[id.0]
    }

    #[inline]
    pub fn is_passthrough(&self, id: NodeId) -> bool {
        self.nodes[id.0].passthrough
    }

    /// Node ids at a level, ascending.
    pub fn level_nodes(&self, level: usize) -> Result<&[NodeId], HierarchyError> {
        self.levels
            .get(level)
            .map(Vec::as_slice)
            .ok_or(HierarchyError::LevelOutOfRange {
                level,
                depth: self.depth,
            })
    }

    /// Ancestor of `class` at `level`: the class's own leaf at level 0, the
    /// root at level `L - 1`.
    pub fn ancestor(&self, class: ClassId, level: usize) -> Result<NodeId, HierarchyError> {
        if level >= self.depth {
            return Err(HierarchyError::LevelOutOfRange {
                level,
                depth: self.depth,
            });
        }
        let mut id = self.leaf_of(class)?;
        for _ in 0..level {
            id = self.nodes[id.0].parent.expect("non-root node has a parent");
        }
        Ok(id)
    }

    /// Positive proxy set: the class's ancestors ordered by level, `0..L-1`.
    pub fn positive_set(&self, class: ClassId) -> Result<Vec<NodeId>, HierarchyError> {
        let mut out = Vec::with_capacity(self.depth);
        let mut id = self.leaf_of(class)?;
        out.push(id);
        while let Some(p) = self.nodes[id.0].parent {
            out.push(p);
            id = p;
        }
        debug_assert_eq!(out.len(), self.depth);
        Ok(out)
    }

    /// Negative proxy set: all nodes not in the positive set, ascending ids.
    pub fn negative_set(&self, class: ClassId) -> Result<Vec<NodeId>, HierarchyError> {
        let positives = self.positive_set(class)?;
        let mut is_pos = vec![false; self.nodes.len()];
        for p in &positives {
            is_pos[p.0] = true;
        }
        Ok((0..self.nodes.len())
            .filter(|i| !is_pos[*i])
            .map(NodeId)
            .collect())
    }

    /// All node ids tagged as part of the object subtree.
    pub fn object_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .map(NodeId)
            .filter(|id| self.tags[id.0] == Some(SubtreeTag::Object))
            .collect()
    }

    /// Serialize back to file content. The emitted tree is the balanced one,
    /// so building it again is a fixed point.
    pub fn to_spec(&self) -> HierarchySpec {
        fn emit(h: &Hierarchy, id: NodeId) -> NodeSpec {
            NodeSpec {
                name: h.nodes[id.0].name.clone(),
                children: h.nodes[id.0].children.iter().map(|c| emit(h, *c)).collect(),
            }
        }
        let mut subtrees = SubtreeSpec::default();
        for child in &self.nodes[self.root.0].children {
            let name = self.nodes[child.0].name.clone();
            match self.tags[child.0] {
                Some(SubtreeTag::Object) => subtrees.object.push(name),
                Some(SubtreeTag::Background) => subtrees.background.push(name),
                Some(SubtreeTag::Ignored) => subtrees.ignored.push(name),
                None => unreachable!("root children are always tagged"),
            }
        }
        HierarchySpec {
            nodes: vec![emit(self, self.root)],
            leaf_classes: self
                .leaves
                .iter()
                .map(|id| self.nodes[id.0].name.clone())
                .collect(),
            subtrees,
        }
    }
}

fn flatten(
    spec: &NodeSpec,
    parent: Option<NodeId>,
    nodes: &mut Vec<HierarchyNode>,
    names: &mut BTreeSet<String>,
) -> Result<NodeId, HierarchyError> {
    if !names.insert(spec.name.clone()) {
        return Err(HierarchyError::DuplicateName(spec.name.clone()));
    }
    let id = NodeId(nodes.len());
    nodes.push(HierarchyNode {
        id,
        name: spec.name.clone(),
        level: 0,
        parent,
        children: Vec::new(),
        passthrough: false,
    });
    for child in &spec.children {
        let cid = flatten(child, Some(id), nodes, names)?;
        nodes[id.0].children.push(cid);
    }
    Ok(id)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Balanced 4-level taxonomy: 8 leaves under 4 mid groups under
    /// {object, background}, plus an ignored branch padded by balancing.
    pub fn h4() -> HierarchySpec {
        HierarchySpec {
            nodes: vec![NodeSpec::branch(
                "root",
                vec![
                    NodeSpec::branch(
                        "object",
                        vec![
                            NodeSpec::branch(
                                "vehicle",
                                vec![NodeSpec::leaf("car"), NodeSpec::leaf("truck")],
                            ),
                            NodeSpec::branch(
                                "human",
                                vec![NodeSpec::leaf("person"), NodeSpec::leaf("rider")],
                            ),
                        ],
                    ),
                    NodeSpec::branch(
                        "background",
                        vec![
                            NodeSpec::branch(
                                "flat",
                                vec![NodeSpec::leaf("road"), NodeSpec::leaf("sidewalk")],
                            ),
                            NodeSpec::branch(
                                "nature",
                                vec![NodeSpec::leaf("vegetation"), NodeSpec::leaf("terrain")],
                            ),
                        ],
                    ),
                    NodeSpec::branch("ignored", vec![NodeSpec::leaf("void")]),
                ],
            )],
            leaf_classes: [
                "car",
                "truck",
                "person",
                "rider",
                "road",
                "sidewalk",
                "vegetation",
                "terrain",
                "void",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            subtrees: SubtreeSpec {
                object: vec!["object".to_string()],
                background: vec!["background".to_string()],
                ignored: vec!["ignored".to_string()],
            },
        }
    }

    /// Minimal 3-level tree with two leaves.
    pub fn h3_two_leaves() -> HierarchySpec {
        HierarchySpec {
            nodes: vec![NodeSpec::branch(
                "root",
                vec![
                    NodeSpec::branch("object", vec![NodeSpec::leaf("thing")]),
                    NodeSpec::branch("background", vec![NodeSpec::leaf("stuff")]),
                ],
            )],
            leaf_classes: vec!["thing".to_string(), "stuff".to_string()],
            subtrees: SubtreeSpec {
                object: vec!["object".to_string()],
                background: vec!["background".to_string()],
                ignored: vec![],
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn builds_balanced_h4() {
        let h = build_hierarchy(&h4()).unwrap();
        assert_eq!(h.depth(), 4);
        assert_eq!(h.class_count(), 9);
        // The ignored branch (root -> ignored -> void) gains one passthrough.
        assert_eq!(h.node_count(), 1 + 3 + 4 + 9 + 1);
        let void_leaf = h.leaf_of(ClassId(8)).unwrap();
        let pad = h.node(void_leaf).parent.unwrap();
        assert!(h.is_passthrough(pad));
        assert_eq!(h.node(pad).children, vec![void_leaf]);
        // Balancing preserves tags and the leaf set.
        assert_eq!(h.subtree_tag(pad), Some(SubtreeTag::Ignored));
        assert_eq!(h.subtree_tag(void_leaf), Some(SubtreeTag::Ignored));
        assert_eq!(h.level_nodes(0).unwrap().len(), 9);
    }

    #[test]
    fn leaf_directly_under_root_gets_padded() {
        let spec = HierarchySpec {
            nodes: vec![NodeSpec::branch(
                "root",
                vec![
                    NodeSpec::branch("object", vec![NodeSpec::leaf("a"), NodeSpec::leaf("b")]),
                    NodeSpec::leaf("bg"),
                ],
            )],
            leaf_classes: vec!["a".into(), "b".into(), "bg".into()],
            subtrees: SubtreeSpec {
                object: vec!["object".into()],
                background: vec!["bg".into()],
                ignored: vec![],
            },
        };
        let h = build_hierarchy(&spec).unwrap();
        assert_eq!(h.depth(), 3);
        let bg = h.node_by_name("bg").unwrap();
        assert_eq!(h.node(bg).level, 0);
        let pad = h.node(bg).parent.unwrap();
        assert!(h.is_passthrough(pad));
        assert_eq!(h.node(pad).level, 1);
        assert_eq!(h.node(pad).parent, Some(h.root()));
        assert_eq!(h.subtree_tag(bg), Some(SubtreeTag::Background));
        assert_eq!(h.subtree_tag(pad), Some(SubtreeTag::Background));
        // Serialization handles a passthrough sitting directly under the root.
        let spec2 = h.to_spec();
        assert!(spec2.subtrees.background.contains(&"bg::pad1".to_string()));
        build_hierarchy(&spec2).unwrap();
    }

    #[test]
    fn two_roots_rejected() {
        let mut spec = h4();
        spec.nodes.push(NodeSpec::leaf("other_root"));
        assert!(matches!(
            build_hierarchy(&spec),
            Err(HierarchyError::RootCount(2))
        ));
    }

    #[test]
    fn validation_errors() {
        let mut spec = h4();
        spec.leaf_classes.push("no_such_leaf".into());
        assert!(matches!(
            build_hierarchy(&spec),
            Err(HierarchyError::MissingLeafClass(_))
        ));

        let mut spec = h4();
        spec.leaf_classes.pop();
        assert!(matches!(
            build_hierarchy(&spec),
            Err(HierarchyError::UnlistedLeaf(_))
        ));

        let mut spec = h4();
        spec.subtrees.ignored.clear();
        assert!(matches!(
            build_hierarchy(&spec),
            Err(HierarchyError::UntaggedRootChild(_))
        ));

        let mut spec = h4();
        spec.subtrees.background.push("object".into());
        assert!(matches!(
            build_hierarchy(&spec),
            Err(HierarchyError::DoublyTagged(_))
        ));

        let mut spec = h4();
        spec.subtrees.object.push("vehicle".into());
        assert!(matches!(
            build_hierarchy(&spec),
            Err(HierarchyError::UnknownSubtreeEntry(_))
        ));
    }

    #[test]
    fn ancestor_chain() {
        let h = build_hierarchy(&h4()).unwrap();
        let car = ClassId(0);
        assert_eq!(h.ancestor(car, 0).unwrap(), h.leaf_of(car).unwrap());
        assert_eq!(
            h.ancestor(car, 1).unwrap(),
            h.node_by_name("vehicle").unwrap()
        );
        assert_eq!(
            h.ancestor(car, 2).unwrap(),
            h.node_by_name("object").unwrap()
        );
        assert_eq!(h.ancestor(car, 3).unwrap(), h.root());
        assert!(matches!(
            h.ancestor(car, 4),
            Err(HierarchyError::LevelOutOfRange { .. })
        ));
        assert!(matches!(
            h.ancestor(ClassId(99), 0),
            Err(HierarchyError::UnknownClass(99))
        ));
        // pi_{l+1}(y) = parent(pi_l(y)) for every class and level.
        for class in 0..h.class_count() {
            for level in 0..h.depth() - 1 {
                let a = h.ancestor(ClassId(class), level).unwrap();
                let b = h.ancestor(ClassId(class), level + 1).unwrap();
                assert_eq!(h.node(a).parent, Some(b));
            }
        }
    }

    #[test]
    fn positive_and_negative_sets_partition() {
        let h = build_hierarchy(&h4()).unwrap();
        for class in 0..h.class_count() {
            let pos = h.positive_set(ClassId(class)).unwrap();
            let neg = h.negative_set(ClassId(class)).unwrap();
            assert_eq!(pos.len(), h.depth());
            assert_eq!(pos.len() + neg.len(), h.node_count());
            let mut all: Vec<usize> = pos.iter().chain(neg.iter()).map(|n| n.0).collect();
            all.sort_unstable();
            assert_eq!(all, (0..h.node_count()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn sibling_positive_sets_share_upper_levels() {
        let h = build_hierarchy(&h4()).unwrap();
        // car and truck share the vehicle parent.
        let pos_car = h.positive_set(ClassId(0)).unwrap();
        let pos_truck = h.positive_set(ClassId(1)).unwrap();
        assert_ne!(pos_car[0], pos_truck[0]);
        assert_eq!(&pos_car[1..], &pos_truck[1..]);
        // car and road agree only at the root.
        let pos_road = h.positive_set(ClassId(4)).unwrap();
        assert_eq!(pos_car[3], pos_road[3]);
        assert_ne!(pos_car[2], pos_road[2]);
    }

    #[test]
    fn level_counts_non_increasing() {
        let h = build_hierarchy(&h4()).unwrap();
        for l in 0..h.depth() - 1 {
            assert!(h.level_nodes(l).unwrap().len() >= h.level_nodes(l + 1).unwrap().len());
        }
    }

    #[test]
    fn roundtrip_is_isomorphic() {
        let h = build_hierarchy(&h4()).unwrap();
        let spec2 = h.to_spec();
        let h2 = build_hierarchy(&spec2).unwrap();
        assert_eq!(h.depth(), h2.depth());
        assert_eq!(h.node_count(), h2.node_count());
        assert_eq!(h.to_spec(), h2.to_spec());
        // Same ancestor structure under matching class order.
        for class in 0..h.class_count() {
            for level in 0..h.depth() {
                let a = &h.node(h.ancestor(ClassId(class), level).unwrap()).name;
                let b = &h2.node(h2.ancestor(ClassId(class), level).unwrap()).name;
                assert_eq!(a, b);
            }
        }
    }
}
