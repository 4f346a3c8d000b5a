//! Graphs of infinite cyclic groups, their presentations and realizations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::complexes::{build_multiwarp_space, circle_cover_on, EdgeSpec, GraphOfSpacesSpec, MultiWarpSpace, VertexSpec};
use crate::error::{Error, Result};
use crate::metric::SpaceDescriptor;
use crate::quotient::MapDescriptor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupVertex {
    pub id: String,
}

/// Oriented edge whose edge group ℤ maps into the origin's ℤ by z ↦ z·k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupEdge {
    pub id: String,
    pub bar: String,
    pub origin: String,
    pub k: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphOfGroupsSpec {
    pub vertices: Vec<GroupVertex>,
    #[serde(default)]
    pub edges: Vec<GroupEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Vec<String>>,
    /// Edges of a maximal tree, at most one per pair; computed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<Vec<String>>,
}

/// A generator raised to a nonzero power.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Syllable {
    pub generator: String,
    pub power: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub lhs: Vec<Syllable>,
    pub rhs: Vec<Syllable>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub generators: Vec<String>,
    pub relations: Vec<Relation>,
    /// Stable letters removed from the presentation, e.g. ("tb", "t^-1").
    pub eliminations: Vec<(String, String)>,
}

fn syl(g: &str, power: i64) -> Option<Syllable> {
    (power != 0).then(|| Syllable {
        generator: g.into(),
        power,
    })
}

fn write_word(f: &mut fmt::Formatter<'_>, w: &[Syllable]) -> fmt::Result {
    if w.is_empty() {
        return write!(f, "1");
    }
    for (i, s) in w.iter().enumerate() {
        if i > 0 {
            write!(f, " ")?;
        }
        match s.power {
            1 => write!(f, "{}", s.generator)?,
            p => write!(f, "{}^{p}", s.generator)?,
        }
    }
    Ok(())
}

impl fmt::Display for Presentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}", self.generators.join(", "))?;
        if !self.relations.is_empty() {
            write!(f, " | ")?;
            for (i, r) in self.relations.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write_word(f, &r.lhs)?;
                write!(f, " = ")?;
                write_word(f, &r.rhs)?;
            }
        }
        write!(f, "⟩")
    }
}

/// The degree-k local isometry Circle(1) → (1/|k|)·Circle(1).
pub fn circle_cover(k: i64) -> Result<MapDescriptor> {
    circle_cover_on(1.0, k)
}

impl GraphOfGroupsSpec {
    /// The circle graph of spaces: X_v = Y_e = Circle(1), φ_e of degree k_e.
    pub fn to_spaces(&self) -> GraphOfSpacesSpec {
        GraphOfSpacesSpec {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexSpec {
                    id: v.id.clone(),
                    space: SpaceDescriptor::circle(1.0),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    id: e.id.clone(),
                    bar: e.bar.clone(),
                    origin: e.origin.clone(),
                    k: Some(e.k),
                    map: None,
                    edge_space: None,
                    lambda: None,
                })
                .collect(),
            orientation: self.orientation.clone(),
            tree: self.tree.clone(),
        }
    }

    /// Orientation and a checked maximal tree (as oriented edge ids).
    fn structure(&self) -> Result<(Vec<String>, BTreeSet<String>)> {
        let resolved = self.to_spaces().resolve()?;
        let oriented = resolved.oriented.clone();
        let edges: BTreeMap<&str, &GroupEdge> = self.edges.iter().map(|e| (e.id.as_str(), e)).collect();
        let ends = |id: &str| {
            let e = edges[id];
            (e.origin.clone(), edges[e.bar.as_str()].origin.clone())
        };
        let vertex_ids: Vec<&str> = self.vertices.iter().map(|v| v.id.as_str()).collect();

        let tree: Vec<String> = match &self.tree {
            Some(t) => {
                let mut out = Vec::new();
                for (i, id) in t.iter().enumerate() {
                    let Some(e) = edges.get(id.as_str()) else {
                        return Err(Error::spec(format!("tree[{i}]"), format!("no edge `{id}`")));
                    };
                    let canon = if oriented.contains(id) { id.clone() } else { e.bar.clone() };
                    if out.contains(&canon) {
                        return Err(Error::spec(format!("tree[{i}]"), "edge pair listed twice"));
                    }
                    out.push(canon);
                }
                out
            }
            None => {
                // Breadth-first spanning tree over the orientation.
                let mut seen = BTreeSet::from([vertex_ids[0].to_string()]);
                let mut queue = VecDeque::from([vertex_ids[0].to_string()]);
                let mut out = Vec::new();
                while let Some(v) = queue.pop_front() {
                    for e in &oriented {
                        let (a, b) = ends(e);
                        let other = if a == v { b } else if b == v { a } else { continue };
                        if seen.insert(other.clone()) {
                            out.push(e.clone());
                            queue.push_back(other);
                        }
                    }
                }
                out
            }
        };

        // A maximal tree has |V| - 1 edges and connects every vertex.
        let mut parent: BTreeMap<String, String> = vertex_ids.iter().map(|v| (v.to_string(), v.to_string())).collect();
        fn find(p: &mut BTreeMap<String, String>, v: &str) -> String {
            let mut r = v.to_string();
            while p[&r] != r {
                r = p[&r].clone();
            }
            r
        }
        for e in &tree {
            let (a, b) = ends(e);
            let (ra, rb) = (find(&mut parent, &a), find(&mut parent, &b));
            if ra == rb {
                return Err(Error::spec("tree", format!("edge `{e}` closes a cycle")));
            }
            parent.insert(ra, rb);
        }
        if tree.len() + 1 != vertex_ids.len() {
            return Err(Error::spec(
                "tree",
                if self.tree.is_some() { "does not span the graph" } else { "the graph is disconnected" },
            ));
        }
        Ok((oriented, tree.into_iter().collect()))
    }

    pub fn validate(&self) -> Result<()> {
        self.structure().map(|_| ())
    }
}

/// Presentation of π₁ of the graph of groups: one generator per vertex, one
/// stable letter per non-tree edge, one relation per edge pair.
pub fn serre_presentation(spec: &GraphOfGroupsSpec) -> Result<Presentation> {
    let (oriented, tree) = spec.structure()?;
    let edges: BTreeMap<&str, &GroupEdge> = spec.edges.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut generators: Vec<String> = spec.vertices.iter().map(|v| v.id.clone()).collect();
    let mut relations = Vec::new();
    let mut eliminations = Vec::new();
    for id in &oriented {
        let e = edges[id.as_str()];
        let bar = edges[e.bar.as_str()];
        let a_e = syl(&e.origin, e.k);
        let a_bar = syl(&bar.origin, bar.k);
        let lhs = if tree.contains(id) {
            eliminations.push((id.clone(), "1".to_string()));
            eliminations.push((bar.id.clone(), "1".to_string()));
            a_e.into_iter().collect()
        } else {
            generators.push(id.clone());
            eliminations.push((bar.id.clone(), format!("{id}^-1")));
            [syl(id, 1), a_e, syl(id, -1)].into_iter().flatten().collect()
        };
        relations.push(Relation {
            lhs,
            rhs: a_bar.into_iter().collect(),
        });
    }
    Ok(Presentation {
        generators,
        relations,
        eliminations,
    })
}

/// The circle graph of spaces realizing `spec`, its multiwarped space and
/// the presentation of the group it carries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub spaces: GraphOfSpacesSpec,
    pub multiwarp: MultiWarpSpace,
    pub presentation: Presentation,
}

pub fn realize_graph_of_groups(spec: &GraphOfGroupsSpec) -> Result<Realization> {
    let presentation = serre_presentation(spec)?;
    let spaces = spec.to_spaces();
    let multiwarp = build_multiwarp_space(&spaces)?;
    Ok(Realization {
        spaces,
        multiwarp,
        presentation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(m: i64, n: i64) -> GraphOfGroupsSpec {
        GraphOfGroupsSpec {
            vertices: vec![GroupVertex { id: "a".into() }],
            edges: vec![
                GroupEdge {
                    id: "t".into(),
                    bar: "tb".into(),
                    origin: "a".into(),
                    k: m,
                },
                GroupEdge {
                    id: "tb".into(),
                    bar: "t".into(),
                    origin: "a".into(),
                    k: n,
                },
            ],
            orientation: None,
            tree: None,
        }
    }

    #[test]
    fn baumslag_solitar_text() {
        let p = serre_presentation(&bs(1, 2)).unwrap();
        assert_eq!(p.to_string(), "⟨a, t | t a t^-1 = a^2⟩");
        assert_eq!(p.generators, vec!["a", "t"]);
        assert_eq!(p.eliminations, vec![("tb".to_string(), "t^-1".to_string())]);
        assert_eq!(serre_presentation(&bs(2, 3)).unwrap().to_string(), "⟨a, t | t a^2 t^-1 = a^3⟩");
        assert_eq!(serre_presentation(&bs(1, -1)).unwrap().to_string(), "⟨a, t | t a t^-1 = a^-1⟩");
    }

    #[test]
    fn tree_edges_drop_their_letter() {
        let spec = GraphOfGroupsSpec {
            vertices: vec![GroupVertex { id: "a".into() }, GroupVertex { id: "b".into() }],
            edges: vec![
                GroupEdge {
                    id: "e".into(),
                    bar: "eb".into(),
                    origin: "a".into(),
                    k: 2,
                },
                GroupEdge {
                    id: "eb".into(),
                    bar: "e".into(),
                    origin: "b".into(),
                    k: 3,
                },
            ],
            orientation: None,
            tree: None,
        };
        let p = serre_presentation(&spec).unwrap();
        assert_eq!(p.to_string(), "⟨a, b | a^2 = b^3⟩");

        let mut bad = spec.clone();
        bad.tree = Some(vec![]);
        assert!(bad.validate().unwrap_err().to_string().contains("tree"));
    }

    #[test]
    fn bad_tree_in_loop() {
        let mut s = bs(1, 2);
        s.tree = Some(vec!["t".into()]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let p = serre_presentation(&bs(1, 2)).unwrap();
        let back: Presentation = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn circle_cover_lambda() {
        let m = circle_cover(-3).unwrap();
        assert_eq!(m.codomain, SpaceDescriptor::scaled(1.0 / 3.0, SpaceDescriptor::circle(1.0)));
        assert!(circle_cover(0).is_err());
    }
}
