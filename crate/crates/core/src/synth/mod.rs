//! Trajectory replay and dataset generation.
//!
//! A [`SynthesisJob`] drives the labelled arm scene along a trajectory,
//! places object scenes at their per-frame poses, optionally swaps the
//! static background and renders every frame from every camera. Outputs
//! are PNG images, PFM depth maps, `manifest.jsonl` and a resolved copy of
//! the job configuration.

mod orbit;
mod trajectory;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::express_object;
use crate::edit::{merge_scenes, MergeOptions, ObjectAnchor};
use crate::error::{Error, Result};
use crate::kinematics::{bind_labels, drive_scene, JointState, LimitViolation, MdhChain};
use crate::render::{render_with, CameraModel, CameraRecord, RenderOptions, RenderOutput};
use crate::splat::{load_labels, load_splat_file, write_splat, GaussianScene};
use crate::transform::SimilarityTransform;

pub use orbit::{novel_view_sweep, OrbitSpec};
pub use trajectory::{Trajectory, TrajectoryFrame};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const RESOLVED_CONFIG_FILE: &str = "job_config_resolved.json";

/// Camera entry in a job file: a camera record plus an optional id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(flatten)]
    pub camera: CameraRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub scene: PathBuf,
    /// Point of the object scene that lands on the object pose's origin.
    pub anchor: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSwapSpec {
    pub scene: PathBuf,
    #[serde(default)]
    pub transform: SimilarityTransform,
}

/// Job file. Relative paths resolve against the job file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub base_scene: PathBuf,
    pub chain: PathBuf,
    pub labels: PathBuf,
    pub trajectory: PathBuf,
    /// Joint state the scene was captured in; zeros when absent.
    #[serde(default)]
    pub canonical: Option<Vec<f64>>,
    #[serde(default)]
    pub cameras: Vec<CameraSpec>,
    #[serde(default)]
    pub orbit: Option<OrbitSpec>,
    #[serde(default)]
    pub objects: BTreeMap<String, ObjectSpec>,
    #[serde(default)]
    pub scene_swap: Option<SceneSwapSpec>,
    /// Maps simulator coordinates into the scene frame; identity when absent.
    #[serde(default)]
    pub sim_to_gs: Option<SimilarityTransform>,
    #[serde(default)]
    pub background: [f64; 3],
    pub output_dir: PathBuf,
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
    }

    /// Copy with every path made absolute against `base_dir`.
    pub fn resolved(&self, base_dir: &Path) -> JobConfig {
        let abs = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        let mut out = self.clone();
        out.base_scene = abs(&self.base_scene);
        out.chain = abs(&self.chain);
        out.labels = abs(&self.labels);
        out.trajectory = abs(&self.trajectory);
        out.output_dir = abs(&self.output_dir);
        for o in out.objects.values_mut() {
            o.scene = abs(&o.scene);
        }
        if let Some(s) = out.scene_swap.as_mut() {
            s.scene = abs(&s.scene);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedCamera {
    pub id: String,
    pub camera: CameraModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlacedObject {
    pub scene: GaussianScene,
    pub anchor: ObjectAnchor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSwap {
    pub background: GaussianScene,
    pub transform: SimilarityTransform,
}

/// Fully loaded, validated job.
#[derive(Clone, Debug)]
pub struct SynthesisJob {
    /// Arm scene with joint labels bound.
    pub scene: GaussianScene,
    pub chain: MdhChain,
    pub canonical: JointState,
    pub trajectory: Trajectory,
    pub cameras: Vec<NamedCamera>,
    pub objects: BTreeMap<String, PlacedObject>,
    pub scene_swap: Option<SceneSwap>,
    pub sim_to_gs: SimilarityTransform,
    pub background: [f64; 3],
    pub output_dir: PathBuf,
}

impl SynthesisJob {
    /// Loads every referenced file; nothing is written.
    pub fn load(path: &Path) -> Result<(Self, JobConfig)> {
        let cfg = JobConfig::load(path)?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        let resolved = cfg.resolved(base_dir);
        Ok((Self::from_config(&resolved)?, resolved))
    }

    pub fn from_config(cfg: &JobConfig) -> Result<Self> {
        for (what, p) in [
            ("base_scene", &cfg.base_scene),
            ("chain", &cfg.chain),
            ("labels", &cfg.labels),
            ("trajectory", &cfg.trajectory),
        ] {
            if !p.is_file() {
                return Err(Error::Config(format!("{what}: {} does not exist", p.display())));
            }
        }
        let chain = MdhChain::load(&cfg.chain)?;
        let raw = load_splat_file(&cfg.base_scene)?;
        let labels = load_labels(&cfg.labels)?;
        let scene = bind_labels(&raw, &labels, chain.joint_count())?;
        let trajectory = Trajectory::load(&cfg.trajectory)?;
        let canonical = match &cfg.canonical {
            Some(v) => JointState(v.clone()),
            None => chain.zero_state(),
        };
        let mut cameras = Vec::new();
        for (i, c) in cfg.cameras.iter().enumerate() {
            cameras.push(NamedCamera {
                id: c.id.clone().unwrap_or_else(|| format!("cam{i}")),
                camera: CameraModel::from_record(&c.camera)?,
            });
        }
        if let Some(orbit) = &cfg.orbit {
            let start = cameras.len();
            for (i, camera) in novel_view_sweep(orbit)?.into_iter().enumerate() {
                cameras.push(NamedCamera {
                    id: format!("orbit{}", start + i),
                    camera,
                });
            }
        }
        let mut objects = BTreeMap::new();
        for (id, o) in &cfg.objects {
            objects.insert(
                id.clone(),
                PlacedObject {
                    scene: load_splat_file(&o.scene)?,
                    anchor: ObjectAnchor::new(Vector3::from(o.anchor))?,
                },
            );
        }
        let scene_swap = match &cfg.scene_swap {
            Some(s) => Some(SceneSwap {
                background: load_splat_file(&s.scene)?,
                transform: s.transform,
            }),
            None => None,
        };
        let job = SynthesisJob {
            scene,
            chain,
            canonical,
            trajectory,
            cameras,
            objects,
            scene_swap,
            sim_to_gs: cfg.sim_to_gs.unwrap_or_default(),
            background: cfg.background,
            output_dir: cfg.output_dir.clone(),
        };
        job.validate()?;
        Ok(job)
    }

    /// Consistency checks that must pass before any rendering.
    pub fn validate(&self) -> Result<()> {
        let j = self.chain.joint_count();
        self.chain.check_state(&self.canonical)?;
        if self.trajectory.joint_count() != j {
            return Err(Error::Config(format!(
                "trajectory has {} joints, chain has {j}",
                self.trajectory.joint_count()
            )));
        }
        if !self.scene.labels_bound() {
            return Err(Error::UnboundLabels);
        }
        if self.cameras.is_empty() {
            return Err(Error::Config("job has no cameras".into()));
        }
        let mut ids = BTreeSet::new();
        for c in &self.cameras {
            if !ids.insert(&c.id) {
                return Err(Error::Config(format!("duplicate camera id {}", c.id)));
            }
        }
        for (k, f) in self.trajectory.frames().iter().enumerate() {
            if let Some(id) = f.objects.keys().find(|id| !self.objects.contains_key(*id)) {
                return Err(Error::Config(format!("frame {k}: unknown object id {id}")));
            }
        }
        Ok(())
    }

    /// Scene for one trajectory row plus the limits it violates.
    pub fn compose_frame(&self, frame: &TrajectoryFrame) -> Result<(GaussianScene, Vec<LimitViolation>)> {
        let state = frame.joint_state();
        let violations = self.chain.limit_violations(&state);
        let mut scene = drive_scene(&self.scene, &self.chain, &self.canonical, &state)?;
        if let Some(swap) = &self.scene_swap {
            scene.gaussians.retain(|g| g.joint_label != Some(0));
            scene = merge_scenes(&scene, &swap.background, &swap.transform, MergeOptions {
                pad_sh: true,
                keep_labels: false,
            })?;
        }
        for (id, pose) in &frame.objects {
            let obj = &self.objects[id];
            let placement = express_object(pose, &self.sim_to_gs)
                .compose(&SimilarityTransform::translation(-obj.anchor.center));
            scene = merge_scenes(&scene, &obj.scene, &placement, MergeOptions {
                pad_sh: true,
                keep_labels: false,
            })?;
        }
        Ok((scene, violations))
    }

    /// Renders row `index` from every camera, in camera order.
    pub fn render_frame(&self, index: usize) -> Result<Vec<RenderOutput>> {
        let frame = self
            .trajectory
            .frames()
            .get(index)
            .ok_or_else(|| Error::Config(format!("frame {index} out of range")))?;
        let (scene, _) = self.compose_frame(frame)?;
        let opts = RenderOptions {
            background: self.background,
        };
        Ok(self.cameras.iter().map(|c| render_with(&scene, &c.camera, &opts)).collect())
    }

    /// Content digest of everything that influences the output.
    pub fn config_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        let mut put = |tag: &str, bytes: &[u8]| {
            h.update(tag.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        put("scene", &write_splat(&self.scene)?);
        let labels: Vec<u8> = self.scene.gaussians.iter().flat_map(|g| g.joint_label.unwrap_or(0).to_le_bytes()).collect();
        put("labels", &labels);
        put("chain", self.chain.to_text().as_bytes());
        put("canonical", serde_json::to_string(&self.canonical)?.as_bytes());
        put("trajectory", self.trajectory.to_jsonl()?.as_bytes());
        for c in &self.cameras {
            put("camera", c.id.as_bytes());
            put("camera", serde_json::to_string(&c.camera.to_record())?.as_bytes());
        }
        for (id, o) in &self.objects {
            put("object", id.as_bytes());
            put("object", &write_splat(&o.scene)?);
            put("object", serde_json::to_string(&o.anchor.center)?.as_bytes());
        }
        if let Some(s) = &self.scene_swap {
            put("swap", &write_splat(&s.background)?);
            put("swap", serde_json::to_string(&s.transform)?.as_bytes());
        }
        put("sim_to_gs", serde_json::to_string(&self.sim_to_gs)?.as_bytes());
        put("background", serde_json::to_string(&self.background)?.as_bytes());
        Ok(hex::encode(h.finalize()))
    }

    /// Renders every frame and writes the dataset into `output_dir`.
    pub fn replay(&self) -> Result<DatasetManifest> {
        self.validate()?;
        let out = &self.output_dir;
        for sub in ["images", "depth"] {
            let d = out.join(sub);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        let opts = RenderOptions {
            background: self.background,
        };
        let per_frame: Vec<Vec<ManifestRecord>> = self
            .trajectory
            .frames()
            .par_iter()
            .enumerate()
            .map(|(k, frame)| {
                let (scene, violations) = self.compose_frame(frame)?;
                let object_poses: BTreeMap<String, SimilarityTransform> = frame
                    .objects
                    .iter()
                    .map(|(id, p)| (id.clone(), express_object(p, &self.sim_to_gs)))
                    .collect();
                let mut records = Vec::with_capacity(self.cameras.len());
                for c in &self.cameras {
                    let r = render_with(&scene, &c.camera, &opts);
                    let image = format!("images/frame_{k:06}_{}.png", c.id);
                    let depth = format!("depth/frame_{k:06}_{}.pfm", c.id);
                    r.rgb.save_png(&out.join(&image))?;
                    r.depth.save_pfm(&out.join(&depth))?;
                    records.push(ManifestRecord {
                        frame: k,
                        timestamp: frame.timestamp,
                        camera: c.id.clone(),
                        image,
                        depth,
                        width: c.camera.width(),
                        height: c.camera.height(),
                        joint_state: frame.joints.clone(),
                        object_poses: object_poses.clone(),
                        flagged: !violations.is_empty(),
                        limit_violations: violations.clone(),
                    });
                }
                Ok(records)
            })
            .collect::<Result<_>>()?;
        let manifest = DatasetManifest {
            header: ManifestHeader {
                engine_version: ENGINE_VERSION.to_string(),
                config_hash: self.config_hash()?,
                frames: self.trajectory.len(),
                cameras: self.cameras.iter().map(|c| c.id.clone()).collect(),
            },
            records: per_frame.into_iter().flatten().collect(),
        };
        manifest.save(&out.join(MANIFEST_FILE))?;
        Ok(manifest)
    }
}

/// Loads a job file, replays it and writes the resolved configuration
/// alongside the dataset.
pub fn replay_job_file(path: &Path) -> Result<DatasetManifest> {
    let (job, resolved) = SynthesisJob::load(path)?;
    let manifest = job.replay()?;
    let p = job.output_dir.join(RESOLVED_CONFIG_FILE);
    std::fs::write(&p, serde_json::to_string_pretty(&resolved)?).map_err(|e| Error::io(&p, e))?;
    Ok(manifest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub engine_version: String,
    pub config_hash: String,
    pub frames: usize,
    pub cameras: Vec<String>,
}

/// One rendered view. Paths are relative to the dataset directory; object
/// poses are in the scene frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub frame: usize,
    pub timestamp: f64,
    pub camera: String,
    pub image: String,
    pub depth: String,
    pub width: usize,
    pub height: usize,
    pub joint_state: Vec<f64>,
    pub object_poses: BTreeMap<String, SimilarityTransform>,
    pub flagged: bool,
    pub limit_violations: Vec<LimitViolation>,
}

/// Header line followed by one record per (frame, camera), frame-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_jsonl()?.as_bytes())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| Error::parse(&name, 1, "empty manifest"))?;
        let header: ManifestHeader =
            serde_json::from_str(first).map_err(|e| Error::parse(&name, 1, e.to_string()))?;
        let records = lines
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(&name, i + 1, e.to_string())))
            .collect::<Result<_>>()?;
        Ok(Self { header, records })
    }
}
