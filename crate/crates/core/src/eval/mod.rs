//! Closed-loop policy evaluation.
//!
//! An [`Episode`] owns the joint state of one run. It emits an observation,
//! consumes one client message at a time and answers each with exactly one
//! [`ServerMessage`]. Actions are joint-space; safety is checked with joint
//! limits, a table plane under every joint frame and an optional
//! end-effector workspace box. A violating action is never applied.
//!
//! [`serve`] hosts episodes over TCP and persists transcripts;
//! [`run_client`] is a scripted client for tests and demos.

mod client;
mod protocol;
mod server;

use std::collections::BTreeMap;
use std::path::Path;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{bind_labels, drive_scene, forward_kinematics, JointState, MdhChain};
use crate::render::{render_with, CameraModel, CameraRecord, RenderOptions};
use crate::splat::{load_labels, load_splat_file, GaussianScene};
use crate::transform::SimilarityTransform;

pub use client::{run_client, ClientRun};
pub use protocol::{
    read_frame, send, write_frame, ActionMessage, ActionMode, ClientMessage, EndNotice, Observation, ServerMessage,
    TerminationReason, MAX_FRAME_BYTES,
};
pub use server::{load_transcript, replay_transcript, serve, ServeOptions, SessionSummary, TranscriptEntry, TranscriptReplay};

/// Immutable rendering context shared by all episodes.
#[derive(Clone, Debug)]
pub struct EvalWorld {
    /// Labelled arm scene in its canonical pose.
    pub scene: GaussianScene,
    pub chain: MdhChain,
    pub canonical: JointState,
    pub camera: CameraModel,
    pub background: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl WorkspaceBox {
    pub fn contains(&self, p: &nalgebra::Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Applied actions before the episode ends with `step_budget`.
    pub budget: usize,
    /// Initial joint state; the world's canonical state when absent.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    /// Every joint frame origin must stay at or above this height.
    #[serde(default)]
    pub table_z: Option<f64>,
    /// The end-effector origin must stay inside this box.
    #[serde(default)]
    pub workspace: Option<WorkspaceBox>,
    /// Reported with every observation; objects are static here.
    #[serde(default)]
    pub object_poses: BTreeMap<String, SimilarityTransform>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            initial: None,
            table_z: None,
            workspace: None,
            object_poses: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    pub step: usize,
    pub joint_state: Vec<f64>,
    pub object_poses: BTreeMap<String, SimilarityTransform>,
    pub terminated: Option<TerminationReason>,
}

/// One closed-loop run. Once terminated the state never changes.
pub struct Episode<'w> {
    world: &'w EvalWorld,
    cfg: EpisodeConfig,
    state: EpisodeState,
}

impl<'w> Episode<'w> {
    pub fn new(world: &'w EvalWorld, cfg: EpisodeConfig) -> Result<Self> {
        let initial = JointState(cfg.initial.clone().unwrap_or_else(|| world.canonical.0.clone()));
        world.chain.check_state(&initial)?;
        if !world.chain.limit_violations(&initial).is_empty() {
            return Err(Error::Config("initial joint state violates joint limits".into()));
        }
        if let Some(reason) = safety_violation(world, &cfg, &initial)? {
            return Err(Error::Config(format!("initial joint state is unsafe: {}", reason.as_str())));
        }
        let state = EpisodeState {
            step: 0,
            joint_state: initial.0,
            object_poses: cfg.object_poses.clone(),
            terminated: None,
        };
        Ok(Self { world, cfg, state })
    }

    pub fn state(&self) -> &EpisodeState {
        &self.state
    }

    pub fn is_terminated(&self) -> bool {
        self.state.terminated.is_some()
    }

    /// Renders the current state.
    pub fn observe(&self) -> Result<Observation> {
        let w = self.world;
        let scene = drive_scene(&w.scene, &w.chain, &w.canonical, &JointState(self.state.joint_state.clone()))?;
        let img = render_with(&scene, &w.camera, &RenderOptions { background: w.background }).rgb;
        Ok(Observation {
            step: self.state.step,
            joint_state: self.state.joint_state.clone(),
            object_poses: self.state.object_poses.clone(),
            image: base64::engine::general_purpose::STANDARD.encode(img.encode_png()?),
            width: img.width,
            height: img.height,
        })
    }

    fn end(&mut self, reason: TerminationReason, error: Option<String>) -> ServerMessage {
        self.state.terminated = Some(reason);
        ServerMessage::End(EndNotice {
            reason,
            steps: self.state.step,
            error,
        })
    }

    /// Answers one raw client message.
    pub fn handle_raw(&mut self, body: &[u8]) -> Result<ServerMessage> {
        match serde_json::from_slice::<ClientMessage>(body) {
            Ok(ClientMessage::Act(a)) => self.step(&a),
            Err(e) => Ok(self.client_error(format!("malformed message: {e}"))),
        }
    }

    pub fn client_error(&mut self, message: String) -> ServerMessage {
        if let Some(reason) = self.state.terminated {
            return ServerMessage::End(EndNotice {
                reason,
                steps: self.state.step,
                error: Some(message),
            });
        }
        self.end(TerminationReason::ClientError, Some(message))
    }

    /// Applies one action. `done` ends the episode without applying it.
    pub fn step(&mut self, action: &ActionMessage) -> Result<ServerMessage> {
        if let Some(reason) = self.state.terminated {
            return Ok(ServerMessage::End(EndNotice {
                reason,
                steps: self.state.step,
                error: Some("episode already terminated".into()),
            }));
        }
        if action.done {
            return Ok(self.end(TerminationReason::Done, None));
        }
        let n = self.state.joint_state.len();
        if action.joints.len() != n {
            return Ok(self.client_error(format!("action has {} joints, expected {n}", action.joints.len())));
        }
        if action.joints.iter().any(|v| !v.is_finite()) {
            return Ok(self.client_error("action contains non-finite values".into()));
        }
        let next: Vec<f64> = match action.mode {
            ActionMode::Absolute => action.joints.clone(),
            ActionMode::Delta => self.state.joint_state.iter().zip(&action.joints).map(|(a, b)| a + b).collect(),
        };
        let next = JointState(next);
        let violations = self.world.chain.limit_violations(&next);
        if let Some(v) = violations.first() {
            let msg = format!("joint {} angle {:.6} outside [{:.6}, {:.6}]", v.joint, v.angle, v.min, v.max);
            return Ok(self.end(TerminationReason::LimitViolation, Some(msg)));
        }
        if let Some(reason) = safety_violation(self.world, &self.cfg, &next)? {
            return Ok(self.end(reason, None));
        }
        self.state.joint_state = next.0;
        self.state.step += 1;
        if self.state.step >= self.cfg.budget {
            return Ok(self.end(TerminationReason::StepBudget, None));
        }
        Ok(ServerMessage::Obs(self.observe()?))
    }
}

fn safety_violation(world: &EvalWorld, cfg: &EpisodeConfig, state: &JointState) -> Result<Option<TerminationReason>> {
    if cfg.table_z.is_none() && cfg.workspace.is_none() {
        return Ok(None);
    }
    let frames = forward_kinematics(&world.chain, state)?;
    if let Some(z) = cfg.table_z {
        if frames.iter().any(|f| f.translation_vector().z < z) {
            return Ok(Some(TerminationReason::WorkspaceViolation));
        }
    }
    if let (Some(b), Some(ee)) = (cfg.workspace, frames.last()) {
        if !b.contains(&ee.translation_vector()) {
            return Ok(Some(TerminationReason::WorkspaceViolation));
        }
    }
    Ok(None)
}

/// File form of a served episode. Paths resolve against the file's
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    pub scene: std::path::PathBuf,
    pub chain: std::path::PathBuf,
    pub labels: std::path::PathBuf,
    pub camera: CameraRecord,
    #[serde(default)]
    pub canonical: Option<Vec<f64>>,
    #[serde(default)]
    pub background: [f64; 3],
    pub episode: EpisodeConfig,
}

impl ServeConfig {
    pub fn load(path: &Path) -> Result<(EvalWorld, EpisodeConfig)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ServeConfig = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let abs = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let chain = MdhChain::load(&abs(&cfg.chain))?;
        let raw = load_splat_file(&abs(&cfg.scene))?;
        let labels = load_labels(&abs(&cfg.labels))?;
        let scene = bind_labels(&raw, &labels, chain.joint_count())?;
        let canonical = match cfg.canonical {
            Some(v) => JointState(v),
            None => chain.zero_state(),
        };
        chain.check_state(&canonical)?;
        let world = EvalWorld {
            scene,
            chain,
            canonical,
            camera: CameraModel::from_record(&cfg.camera)?,
            background: cfg.background,
        };
        // surfaces a bad initial state as a config error before serving
        Episode::new(&world, cfg.episode.clone())?;
        Ok((world, cfg.episode))
    }
}
