//! The directory layout shared by `simulate`, `infer` and `learn`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skm_core::epidemic::{compile, ContactGraph, EpidemicParams};
use skm_core::io::{load_contacts, load_ids, load_observations, load_states, read_json, IdMap};
use skm_core::model::Observations;
use skm_core::{SkmError, SkmSystem};

use crate::manifest::Run;

pub const IDS: &str = "ids.jsonl";
pub const CONTACTS: &str = "contacts.jsonl";
pub const OBSERVATIONS: &str = "observations.jsonl";
pub const TRUTH: &str = "truth.jsonl";
pub const MODEL: &str = "model.json";

/// Epidemic constants and the initial prevalence of a dataset.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelFile {
    pub params: EpidemicParams,
    pub initial_prevalence: f64,
}

pub struct Dataset {
    pub ids: IdMap,
    pub graph: ContactGraph,
    pub observations: Observations,
    pub model: ModelFile,
}

impl Dataset {
    /// Loads and hashes every input file of `dir`.
    pub fn load(dir: &Path, run: &mut Run) -> Result<Dataset, SkmError> {
        let mut file = |name: &str| -> Result<PathBuf, SkmError> {
            let p = dir.join(name);
            run.input(&p)?;
            Ok(p)
        };
        let ids = load_ids(&file(IDS)?)?;
        let observations = load_observations(&file(OBSERVATIONS)?, &ids, None)?;
        let contacts = load_contacts(&file(CONTACTS)?, Some(&ids), Some(observations.horizon()))?;
        let model: ModelFile = read_json(&file(MODEL)?)?;
        if contacts.graph.horizon() != observations.horizon() {
            return Err(SkmError::Dimension(format!(
                "contacts span T={} but observations T={}",
                contacts.graph.horizon(),
                observations.horizon()
            )));
        }
        Ok(Dataset {
            ids,
            graph: contacts.graph,
            observations,
            model,
        })
    }

    pub fn system(&self, params: &EpidemicParams) -> Result<SkmSystem, SkmError> {
        compile(&self.graph, params, self.model.initial_prevalence)
    }
}

/// Loads a truth file, hashing it.
pub fn load_truth(path: &Path, ids: &IdMap, run: &mut Run) -> Result<Vec<Vec<usize>>, SkmError> {
    run.input(path)?;
    load_states(path, ids)
}
