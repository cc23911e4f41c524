use serde::{Deserialize, Serialize};

/// Effect values over a contiguous run of integer levels (ages, periods or cohorts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectPath {
    pub index: Vec<usize>,
    pub value: Vec<f64>,
}

impl EffectPath {
    pub fn new(first: usize, value: Vec<f64>) -> Self {
        EffectPath {
            index: (first..first + value.len()).collect(),
            value,
        }
    }

    pub fn first_index(&self) -> Option<usize> {
        self.index.first().copied()
    }

    pub fn last_index(&self) -> Option<usize> {
        self.index.last().copied()
    }

    pub fn get(&self, level: usize) -> Option<f64> {
        let first = self.first_index()?;
        level
            .checked_sub(first)
            .and_then(|i| self.value.get(i))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}
