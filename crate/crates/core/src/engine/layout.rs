//! Name registry of the global state vector.

use std::collections::HashMap;

/// Bijection between slot positions and dotted slot names such as
/// `pipe.main.0.sup.T_f` or `storage.s.1.2`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateLayout {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl StateLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a slot and returns its position.
    ///
    /// # Panics
    /// If the name is already registered.
    pub fn push(&mut self, name: String) -> usize {
        let k = self.names.len();
        let prev = self.index.insert(name.clone(), k);
        assert!(prev.is_none(), "duplicate state slot `{name}`");
        self.names.push(name);
        k
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, k: usize) -> &str {
        &self.names[k]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bijection() {
        let mut l = StateLayout::new();
        for k in 0..50 {
            assert_eq!(l.push(format!("s.{k}")), k);
        }
        for k in 0..50 {
            assert_eq!(l.get(l.name(k)), Some(k));
        }
        assert_eq!(l.get("nope"), None);
    }

    #[test]
    #[should_panic(expected = "duplicate")]
    fn duplicates_panic() {
        let mut l = StateLayout::new();
        l.push("a".into());
        l.push("a".into());
    }
}
