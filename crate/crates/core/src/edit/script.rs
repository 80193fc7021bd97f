//! Declarative composition scripts.
//!
//! ```json
//! {
//!   "input": "arm.ply",
//!   "output": "composed.ply",
//!   "steps": [
//!     {"op": "load", "name": "mug", "path": "mug.ply"},
//!     {"op": "transform", "name": "mug", "transform": [0.4, 0.1, 0.02, 1, 0, 0, 0, 0.5]},
//!     {"op": "merge", "base": "main", "addition": "mug", "into": "main"},
//!     {"op": "save", "name": "main", "path": "debug.ply"}
//!   ]
//! }
//! ```
//!
//! `input` is loaded as the scene named `main` and `output` saves `main`
//! after the last step. Transforms are inline (16 or 8 numbers) or a path to
//! a transform file. Relative paths resolve against the script's directory.
//! Every step is checked before any file is written.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{merge_scenes, transform_object, transform_scene, MergeOptions, ObjectAnchor};
use crate::error::{Error, Result};
use crate::kinematics::bind_labels;
use crate::splat::{load_labels, load_splat_file, save_splat_file, GaussianScene};
use crate::transform::{SimilarityTransform, TransformRecord};

pub const MAIN_SCENE: &str = "main";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransformSpec {
    Inline(TransformRecord),
    File(PathBuf),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ScriptStep {
    Load {
        name: String,
        path: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
        /// Joint count used to range-check labels.
        #[serde(default)]
        joint_count: Option<usize>,
    },
    Transform {
        name: String,
        transform: TransformSpec,
    },
    TransformObject {
        name: String,
        anchor: [f64; 3],
        /// Rotation matrix, row-major.
        rotation: [f64; 9],
        translation: [f64; 3],
    },
    Merge {
        base: String,
        addition: String,
        into: String,
        #[serde(default)]
        transform: Option<TransformSpec>,
        #[serde(default)]
        pad_sh: bool,
        #[serde(default)]
        keep_labels: bool,
    },
    Save {
        name: String,
        path: PathBuf,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionScript {
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub steps: Vec<ScriptStep>,
}

impl CompositionScript {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
    }

    /// Checks names are defined before use and every input file exists.
    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        let mut defined = BTreeSet::new();
        let exists = |p: &Path| -> Result<()> {
            let full = base_dir.join(p);
            if full.is_file() {
                Ok(())
            } else {
                Err(Error::Config(format!("missing input file {}", full.display())))
            }
        };
        let need = |defined: &BTreeSet<String>, name: &str, i: usize| -> Result<()> {
            if defined.contains(name) {
                Ok(())
            } else {
                Err(Error::Config(format!("step {i}: scene {name:?} is not defined")))
            }
        };
        if let Some(input) = &self.input {
            exists(input)?;
            defined.insert(MAIN_SCENE.to_string());
        }
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                ScriptStep::Load { name, path, labels, .. } => {
                    exists(path)?;
                    if let Some(l) = labels {
                        exists(l)?;
                    }
                    defined.insert(name.clone());
                }
                ScriptStep::Transform { name, transform } => {
                    need(&defined, name, i)?;
                    resolve_transform(transform, base_dir)?;
                }
                ScriptStep::TransformObject { name, .. } => need(&defined, name, i)?,
                ScriptStep::Merge {
                    base,
                    addition,
                    into,
                    transform,
                    ..
                } => {
                    need(&defined, base, i)?;
                    need(&defined, addition, i)?;
                    if let Some(t) = transform {
                        resolve_transform(t, base_dir)?;
                    }
                    defined.insert(into.clone());
                }
                ScriptStep::Save { name, .. } => need(&defined, name, i)?,
            }
        }
        if self.output.is_some() && !defined.contains(MAIN_SCENE) {
            return Err(Error::Config("output requested but no scene named \"main\"".into()));
        }
        Ok(())
    }
}

fn resolve_transform(spec: &TransformSpec, base_dir: &Path) -> Result<SimilarityTransform> {
    match spec {
        TransformSpec::Inline(rec) => rec.to_transform(),
        TransformSpec::File(p) => SimilarityTransform::load(&base_dir.join(p)),
    }
}

/// Runs a script; returns the named scenes that exist at the end.
pub fn run_script(script: &CompositionScript, base_dir: &Path) -> Result<BTreeMap<String, GaussianScene>> {
    script.validate(base_dir)?;
    let mut scenes: BTreeMap<String, GaussianScene> = BTreeMap::new();
    let get = |scenes: &BTreeMap<String, GaussianScene>, name: &str| -> Result<GaussianScene> {
        scenes
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("scene {name:?} is not defined")))
    };
    if let Some(input) = &script.input {
        scenes.insert(MAIN_SCENE.into(), load_splat_file(&base_dir.join(input))?);
    }
    for step in &script.steps {
        match step {
            ScriptStep::Load {
                name,
                path,
                labels,
                joint_count,
            } => {
                let mut scene = load_splat_file(&base_dir.join(path))?;
                if let Some(l) = labels {
                    let labels = load_labels(&base_dir.join(l))?;
                    let max = joint_count.unwrap_or(u32::MAX as usize);
                    scene = bind_labels(&scene, &labels, max)?;
                }
                scenes.insert(name.clone(), scene);
            }
            ScriptStep::Transform { name, transform } => {
                let t = resolve_transform(transform, base_dir)?;
                let out = transform_scene(&get(&scenes, name)?, &t)?;
                scenes.insert(name.clone(), out);
            }
            ScriptStep::TransformObject {
                name,
                anchor,
                rotation,
                translation,
            } => {
                let anchor = ObjectAnchor::new((*anchor).into())?;
                let r = nalgebra::Matrix3::from_row_slice(rotation);
                let out = transform_object(&get(&scenes, name)?, &anchor, &r, &(*translation).into())?;
                scenes.insert(name.clone(), out);
            }
            ScriptStep::Merge {
                base,
                addition,
                into,
                transform,
                pad_sh,
                keep_labels,
            } => {
                let t = match transform {
                    Some(t) => resolve_transform(t, base_dir)?,
                    None => SimilarityTransform::identity(),
                };
                let merged = merge_scenes(
                    &get(&scenes, base)?,
                    &get(&scenes, addition)?,
                    &t,
                    MergeOptions {
                        pad_sh: *pad_sh,
                        keep_labels: *keep_labels,
                    },
                )?;
                scenes.insert(into.clone(), merged);
            }
            ScriptStep::Save { name, path } => {
                save_splat_file(&get(&scenes, name)?, &base_dir.join(path))?;
            }
        }
    }
    if let Some(out) = &script.output {
        save_splat_file(&get(&scenes, MAIN_SCENE)?, &base_dir.join(out))?;
    }
    Ok(scenes)
}
