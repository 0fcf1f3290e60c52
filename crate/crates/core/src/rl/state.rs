use std::collections::BTreeMap;

use crate::diff::Tensor;
use crate::error::{Error, Result};

/// Ordered list of named arrays collected for a checkpoint.
#[derive(Default, Debug)]
pub struct StateWriter {
    pub entries: Vec<(String, Vec<f64>)>,
}

impl StateWriter {
    pub fn array(&mut self, name: &str, data: Vec<f64>) {
        self.entries.push((name.to_string(), data));
    }

    pub fn tensors(&mut self, prefix: &str, params: &[&Tensor]) {
        for (i, p) in params.iter().enumerate() {
            self.array(&format!("{prefix}.{i}"), p.data().to_vec());
        }
    }

    pub fn arrays(&mut self, prefix: &str, parts: Vec<Vec<f64>>) {
        for (i, p) in parts.into_iter().enumerate() {
            self.array(&format!("{prefix}.{i}"), p);
        }
    }
}

/// Named arrays being restored; every lookup consumes its entry.
#[derive(Debug)]
pub struct StateMap {
    entries: BTreeMap<String, Vec<f64>>,
}

impl StateMap {
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Self {
        StateMap {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn take(&mut self, name: &str) -> Result<Vec<f64>> {
        self.entries
            .remove(name)
            .ok_or_else(|| Error::input(format!("missing state array `{name}`")))
    }

    pub fn take_len(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        let data = self.take(name)?;
        if data.len() != len {
            return Err(Error::input(format!(
                "state array `{name}` has {} values, expected {len}",
                data.len()
            )));
        }
        Ok(data)
    }

    pub fn tensors(&mut self, prefix: &str, params: Vec<&mut Tensor>) -> Result<()> {
        let mut loaded = Vec::with_capacity(params.len());
        for (i, p) in params.iter().enumerate() {
            loaded.push(self.take_len(&format!("{prefix}.{i}"), p.len())?);
        }
        for (p, data) in params.into_iter().zip(loaded) {
            p.data_mut().copy_from_slice(&data);
        }
        Ok(())
    }

    pub fn arrays(&mut self, prefix: &str, count: usize) -> Result<Vec<Vec<f64>>> {
        (0..count)
            .map(|i| self.take(&format!("{prefix}.{i}")))
            .collect()
    }

    pub fn remaining(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
