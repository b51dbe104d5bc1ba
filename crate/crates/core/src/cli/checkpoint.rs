//! JSON checkpoints: config snapshot, vocabulary and every parameter,
//! grouped into `gat`, `textenc` and `projections` sections.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, ParamStore};
use crate::error::{Error, Result};
use crate::model::RelationModel;
use crate::textenc::Vocabulary;
use crate::training::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedArray {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TextSection {
    vocabulary: Vec<String>,
    params: Vec<NamedArray>,
}

#[derive(Serialize, Deserialize)]
struct Sections {
    gat: Vec<NamedArray>,
    textenc: TextSection,
    projections: Vec<NamedArray>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format_version: u32,
    seed: u64,
    config: TrainConfig,
    sections: Sections,
}

/// A trained model together with the configuration that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: RelationModel,
}

fn section_of(name: &str) -> Result<&'static str> {
    match name.split('.').next() {
        Some("gat") => Ok("gat"),
        Some("textenc") => Ok("textenc"),
        Some("proj") => Ok("projections"),
        _ => Err(Error::Checkpoint(format!("parameter {name:?} has no section"))),
    }
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let mut gat = Vec::new();
        let mut text = Vec::new();
        let mut projections = Vec::new();
        for (_, name, m) in self.model.store.iter() {
            let arr = NamedArray {
                name: name.to_string(),
                shape: [m.rows(), m.cols()],
                data: m.as_slice().to_vec(),
            };
            match section_of(name)? {
                "gat" => gat.push(arr),
                "textenc" => text.push(arr),
                _ => projections.push(arr),
            }
        }
        let doc = Document {
            format_version: FORMAT_VERSION,
            seed: self.config.seed,
            config: self.config.clone(),
            sections: Sections {
                gat,
                textenc: TextSection {
                    vocabulary: self.model.vocab.tokens().to_vec(),
                    params: text,
                },
                projections,
            },
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(text)?;
        let version = probe
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Checkpoint("missing format_version".into()))?;
        if version > u64::from(FORMAT_VERSION) {
            return Err(Error::Checkpoint(format!(
                "format_version {version} is newer than supported version {FORMAT_VERSION}"
            )));
        }
        let doc: Document = serde_json::from_value(probe)?;
        doc.config.validate()?;
        if doc.seed != doc.config.seed {
            return Err(Error::Checkpoint("seed record disagrees with config".into()));
        }
        let vocab = Vocabulary::from_tokens(doc.sections.textenc.vocabulary)?;
        let mut store = ParamStore::new();
        let arrays = doc
            .sections
            .textenc
            .params
            .into_iter()
            .chain(doc.sections.gat)
            .chain(doc.sections.projections);
        for arr in arrays {
            let [r, c] = arr.shape;
            if arr.data.len() != r * c {
                return Err(Error::Checkpoint(format!(
                    "parameter {}: {} values for shape {r}x{c}",
                    arr.name,
                    arr.data.len()
                )));
            }
            if store.find(&arr.name).is_some() {
                return Err(Error::Checkpoint(format!("duplicate parameter {}", arr.name)));
            }
            store.add(arr.name, Matrix::from_vec(r, c, arr.data)?);
        }
        let model = RelationModel::from_parts(doc.config.model_config(), vocab, store)?;
        Ok(Self {
            config: doc.config,
            model,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Checkpoint {
        let config = TrainConfig {
            encoder_dim: 4,
            graph_dim: 3,
            max_len: 16,
            ..TrainConfig::default()
        };
        let vocab = Vocabulary::build(["bee", "honey"]);
        let model = RelationModel::init(config.model_config(), vocab, 5).unwrap();
        Checkpoint { config, model }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let ck = tiny();
        let a = ck.to_json().unwrap();
        let back = Checkpoint::from_json(&a).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_json().unwrap(), a);
    }

    #[test]
    fn newer_version_rejected() {
        let a = tiny()
            .to_json()
            .unwrap()
            .replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        let err = Checkpoint::from_json(&a).unwrap_err();
        assert!(err.to_string().contains("newer"), "{err}");
    }

    #[test]
    fn truncated_array_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&tiny().to_json().unwrap()).unwrap();
        v["sections"]["gat"][0]["data"].as_array_mut().unwrap().pop();
        assert!(Checkpoint::from_json(&v.to_string()).is_err());
    }
}
