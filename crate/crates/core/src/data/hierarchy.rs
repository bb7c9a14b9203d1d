//! Two-level label hierarchy: every group has exactly one parent
//! category, every category has at least one group, names are unique
//! within their level.
//!
//! JSON form: `{"categories": [...], "groups": [{"name": ..., "category": ...}]}`
//! with the parent referenced by name.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GroupFile {
    name: String,
    category: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HierarchyFile {
    categories: Vec<String>,
    groups: Vec<GroupFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HierarchyFile", into = "HierarchyFile")]
pub struct LabelHierarchy {
    categories: Vec<String>,
    group_names: Vec<String>,
    group_parent: Vec<usize>,
}

impl TryFrom<HierarchyFile> for LabelHierarchy {
    type Error = DataError;

    fn try_from(file: HierarchyFile) -> Result<Self, DataError> {
        let mut group_names = Vec::with_capacity(file.groups.len());
        let mut group_parent = Vec::with_capacity(file.groups.len());
        for g in &file.groups {
            let parent = file
                .categories
                .iter()
                .position(|c| *c == g.category)
                .ok_or_else(|| {
                    DataError::Hierarchy(format!(
                        "group {:?} references unknown category {:?}",
                        g.name, g.category
                    ))
                })?;
            group_names.push(g.name.clone());
            group_parent.push(parent);
        }
        LabelHierarchy::new_indexed(file.categories, group_names, group_parent)
    }
}

impl From<LabelHierarchy> for HierarchyFile {
    fn from(h: LabelHierarchy) -> HierarchyFile {
        HierarchyFile {
            groups: h
                .group_names
                .iter()
                .zip(&h.group_parent)
                .map(|(name, &parent)| GroupFile {
                    name: name.clone(),
                    category: h.categories[parent].clone(),
                })
                .collect(),
            categories: h.categories,
        }
    }
}

impl LabelHierarchy {
    /// Builds and validates a hierarchy from category names and
    /// `(group name, parent category index)` pairs.
    pub fn new(categories: Vec<String>, groups: Vec<(String, usize)>) -> Result<Self, DataError> {
        let (names, parents) = groups.into_iter().unzip();
        Self::new_indexed(categories, names, parents)
    }

    fn new_indexed(
        categories: Vec<String>,
        group_names: Vec<String>,
        group_parent: Vec<usize>,
    ) -> Result<Self, DataError> {
        if categories.is_empty() {
            return Err(DataError::Hierarchy("no categories".to_string()));
        }
        if group_names.is_empty() {
            return Err(DataError::Hierarchy("no groups".to_string()));
        }
        for (i, c) in categories.iter().enumerate() {
            if categories[..i].contains(c) {
                return Err(DataError::Hierarchy(format!("duplicate category {c:?}")));
            }
        }
        for (i, g) in group_names.iter().enumerate() {
            if group_names[..i].contains(g) {
                return Err(DataError::Hierarchy(format!("duplicate group {g:?}")));
            }
        }
        for (&p, g) in group_parent.iter().zip(&group_names) {
            if p >= categories.len() {
                return Err(DataError::Hierarchy(format!(
                    "group {g:?} has parent index {p} out of range"
                )));
            }
        }
        for (c, name) in categories.iter().enumerate() {
            if !group_parent.contains(&c) {
                return Err(DataError::Hierarchy(format!(
                    "category {name:?} has no groups"
                )));
            }
        }
        Ok(LabelHierarchy {
            categories,
            group_names,
            group_parent,
        })
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_names.len()
    }

    pub fn category_name(&self, c: usize) -> &str {
        &self.categories[c]
    }

    pub fn group_name(&self, g: usize) -> &str {
        &self.group_names[g]
    }

    pub fn group_parent(&self, g: usize) -> usize {
        self.group_parent[g]
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.group_names.iter().position(|g| g == name)
    }

    pub fn groups_of(&self, category: usize) -> Vec<usize> {
        self.group_parent
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == category)
            .map(|(g, _)| g)
            .collect()
    }

    /// True when two groups share a parent category.
    pub fn siblings(&self, a: usize, b: usize) -> bool {
        self.group_parent[a] == self.group_parent[b]
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| DataError::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let text = serde_json::to_string_pretty(self).expect("hierarchy serializes");
        fs::write(path, text).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> LabelHierarchy {
        LabelHierarchy::new(
            vec!["alpha".into(), "beta".into()],
            vec![
                ("a1".into(), 0),
                ("a2".into(), 0),
                ("b1".into(), 1),
                ("b2".into(), 1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trips_through_json() {
        let h = tiny();
        let text = serde_json::to_string(&h).unwrap();
        assert!(text.contains("\"category\":\"alpha\""));
        let back: LabelHierarchy = serde_json::from_str(&text).unwrap();
        assert_eq!(h, back);
    }

    #[test]
    fn rejects_unknown_parent() {
        let res: Result<LabelHierarchy, _> =
            serde_json::from_str(r#"{"categories":["x"],"groups":[{"name":"g","category":"y"}]}"#);
        assert!(res.is_err());
    }

    #[test]
    fn rejects_empty_category() {
        let err = LabelHierarchy::new(
            vec!["x".into(), "y".into()],
            vec![("g".into(), 0)],
        )
        .unwrap_err();
        assert!(err.to_string().contains("no groups"));
    }

    #[test]
    fn rejects_duplicates() {
        assert!(LabelHierarchy::new(
            vec!["x".into(), "x".into()],
            vec![("g".into(), 0), ("h".into(), 1)]
        )
        .is_err());
        assert!(LabelHierarchy::new(
            vec!["x".into()],
            vec![("g".into(), 0), ("g".into(), 0)]
        )
        .is_err());
    }

    #[test]
    fn sibling_and_parent_queries() {
        let h = tiny();
        assert!(h.siblings(0, 1));
        assert!(!h.siblings(0, 2));
        assert_eq!(h.group_parent(3), 1);
        assert_eq!(h.groups_of(0), vec![0, 1]);
        assert_eq!(h.group_index("b1"), Some(2));
        assert_eq!(h.category_index("beta"), Some(1));
    }
}
