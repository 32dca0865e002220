//! Diagnostic reports shared by the validators.

use std::fmt;

/// A list of violations found by a diagnostic pass. Empty means valid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport<T> {
    violations: Vec<T>,
}

impl<T> Default for ValidationReport<T> {
    fn default() -> Self {
        Self {
            violations: Vec::new(),
        }
    }
}

impl<T> ValidationReport<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, violation: T) {
        self.violations.push(violation);
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.violations.iter()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.violations
    }
}

impl<T> FromIterator<T> for ValidationReport<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Self {
            violations: iter.into_iter().collect(),
        }
    }
}

impl<T> Extend<T> for ValidationReport<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        self.violations.extend(iter);
    }
}

impl<'a, T> IntoIterator for &'a ValidationReport<T> {
    type Item = &'a T;
    type IntoIter = std::slice::Iter<'a, T>;

    fn into_iter(self) -> Self::IntoIter {
        self.violations.iter()
    }
}

impl<T: fmt::Display> fmt::Display for ValidationReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "- {v}")?;
        }
        Ok(())
    }
}
