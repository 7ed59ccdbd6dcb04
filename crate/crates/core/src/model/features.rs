use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::{read_feature_csv, read_labels_csv, write_feature_csv, write_labels_csv};
use super::{Label, Phase};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Ocular,
    Cardiac,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Ocular, Modality::Cardiac];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Ocular => "ocular",
            Modality::Cardiac => "cardiac",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ocular" => Ok(Modality::Ocular),
            "cardiac" => Ok(Modality::Cardiac),
            other => Err(Error::invalid(format!("unknown modality {other:?}"))),
        }
    }
}

/// One analysis window. `values` is aligned with the owning table's registry;
/// `None` marks a feature that could not be computed for this window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub participant_id: String,
    pub phase: Phase,
    pub window_index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub values: Vec<Option<f64>>,
}

/// Feature windows sharing one ordered feature registry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    registry: Vec<String>,
    windows: Vec<FeatureWindow>,
}

impl FeatureTable {
    pub fn new(registry: Vec<String>) -> Self {
        Self {
            registry,
            windows: Vec::new(),
        }
    }

    pub fn registry(&self) -> &[String] {
        &self.registry
    }

    pub fn windows(&self) -> &[FeatureWindow] {
        &self.windows
    }

    pub fn windows_mut(&mut self) -> &mut [FeatureWindow] {
        &mut self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn push(&mut self, window: FeatureWindow) -> Result<()> {
        if window.values.len() != self.registry.len() {
            return Err(Error::invalid(format!(
                "window has {} values for a {}-feature registry",
                window.values.len(),
                self.registry.len()
            )));
        }
        if !(window.t_end > window.t_start) {
            return Err(Error::invalid("window t_end must exceed t_start"));
        }
        if let Some(bad) = window.values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature value {bad}")));
        }
        self.windows.push(window);
        Ok(())
    }

    pub fn extend(&mut self, other: FeatureTable) -> Result<()> {
        if other.registry != self.registry {
            return Err(Error::invalid("cannot merge tables with different registries"));
        }
        self.windows.extend(other.windows);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.registry.iter().position(|r| r == name)
    }

    pub fn value(&self, window: usize, name: &str) -> Option<f64> {
        let c = self.column(name)?;
        self.windows[window].values[c]
    }

    /// Keeps only the named columns, in the order given.
    pub fn select(&self, names: &[String]) -> Result<FeatureTable> {
        let cols = names
            .iter()
            .map(|n| {
                self.column(n)
                    .ok_or_else(|| Error::invalid(format!("unknown feature {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            registry: names.to_vec(),
            windows: self
                .windows
                .iter()
                .map(|w| FeatureWindow {
                    values: cols.iter().map(|&c| w.values[c]).collect(),
                    ..w.clone()
                })
                .collect(),
        })
    }

    pub fn filter_phase(&self, phase: Phase) -> FeatureTable {
        FeatureTable {
            registry: self.registry.clone(),
            windows: self
                .windows
                .iter()
                .filter(|w| w.phase == phase)
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantRecord {
    pub id: String,
    pub label: Label,
    pub ocular: FeatureTable,
    pub cardiac: FeatureTable,
}

impl ParticipantRecord {
    pub fn table(&self, modality: Modality) -> &FeatureTable {
        match modality {
            Modality::Ocular => &self.ocular,
            Modality::Cardiac => &self.cardiac,
        }
    }

    pub fn table_mut(&mut self, modality: Modality) -> &mut FeatureTable {
        match modality {
            Modality::Ocular => &mut self.ocular,
            Modality::Cardiac => &mut self.cardiac,
        }
    }
}

/// Participant-level labels plus per-modality window tables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub participants: Vec<ParticipantRecord>,
}

impl Dataset {
    pub fn new(participants: Vec<ParticipantRecord>) -> Result<Self> {
        let ds = Dataset { participants };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for p in &self.participants {
            if seen.insert(p.id.as_str(), ()).is_some() {
                return Err(Error::invalid(format!("duplicate participant {:?}", p.id)));
            }
        }
        if let Some(first) = self.participants.first() {
            for p in &self.participants[1..] {
                for m in Modality::ALL {
                    if p.table(m).registry() != first.table(m).registry() {
                        return Err(Error::invalid(format!(
                            "participant {:?} has a different {m} feature registry",
                            p.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn registry(&self, modality: Modality) -> &[String] {
        self.participants
            .first()
            .map(|p| p.table(modality).registry())
            .unwrap_or(&[])
    }

    pub fn participant(&self, id: &str) -> Option<&ParticipantRecord> {
        self.participants.iter().find(|p| p.id == id)
    }

    pub fn labels(&self) -> BTreeMap<String, Label> {
        self.participants
            .iter()
            .map(|p| (p.id.clone(), p.label))
            .collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.participants.iter().filter(|p| p.label == label).count()
    }

    /// Restricts one modality to the named feature columns.
    pub fn select_features(&self, modality: Modality, names: &[String]) -> Result<Dataset> {
        let mut out = self.clone();
        for p in &mut out.participants {
            *p.table_mut(modality) = p.table(modality).select(names)?;
        }
        Ok(out)
    }

    /// Copy with labels permuted across participants.
    pub fn with_shuffled_labels(&self, seed: u64) -> Dataset {
        let mut labels: Vec<Label> = self.participants.iter().map(|p| p.label).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut out = self.clone();
        for (p, l) in out.participants.iter_mut().zip(labels) {
            p.label = l;
        }
        out
    }

    /// Writes `<id>_ocular.csv`, `<id>_cardiac.csv` per participant and `labels.csv`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for p in &self.participants {
            for m in Modality::ALL {
                write_feature_csv(&dir.join(format!("{}_{}.csv", p.id, m)), p.table(m))?;
            }
        }
        let labels: Vec<(String, Label)> = self
            .participants
            .iter()
            .map(|p| (p.id.clone(), p.label))
            .collect();
        write_labels_csv(&dir.join("labels.csv"), &labels)
    }

    pub fn load_dir(dir: &Path) -> Result<Dataset> {
        let labels = read_labels_csv(&dir.join("labels.csv"))?;
        if labels.is_empty() {
            return Err(Error::data(format!("{}: no participants in labels.csv", dir.display())));
        }
        let mut participants = Vec::with_capacity(labels.len());
        for (id, label) in labels {
            let ocular = read_feature_csv(&dir.join(format!("{id}_ocular.csv")))?;
            let cardiac = read_feature_csv(&dir.join(format!("{id}_cardiac.csv")))?;
            for (m, t) in [(Modality::Ocular, &ocular), (Modality::Cardiac, &cardiac)] {
                if let Some(w) = t.windows().iter().find(|w| w.participant_id != id) {
                    return Err(Error::data(format!(
                        "{id}_{m}.csv contains a row for participant {:?}",
                        w.participant_id
                    )));
                }
            }
            participants.push(ParticipantRecord {
                id,
                label,
                ocular,
                cardiac,
            });
        }
        Dataset::new(participants)
    }
}
