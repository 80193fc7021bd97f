use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::protocol::{read_frame, send, ClientMessage, ServerMessage, TerminationReason};
use super::{Episode, EpisodeConfig, EvalWorld};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ServeOptions {
    /// Stop after this many sessions; serve forever when `None`.
    pub max_sessions: Option<usize>,
    /// Run sessions on their own threads, each with an independent state.
    pub concurrent: bool,
    pub transcript_dir: PathBuf,
    pub read_timeout: Option<Duration>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            max_sessions: None,
            concurrent: false,
            transcript_dir: PathBuf::from("transcripts"),
            read_timeout: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session: usize,
    pub reason: TerminationReason,
    pub steps: usize,
    pub final_joint_state: Vec<f64>,
    pub transcript: PathBuf,
}

/// Transcript line. `dir` is `"s2c"` or `"c2s"`; `t` is seconds since the
/// session started. Unparseable client bytes are stored as a JSON string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub t: f64,
    pub dir: String,
    pub msg: serde_json::Value,
}

struct Transcript {
    out: BufWriter<File>,
    start: Instant,
    path: PathBuf,
}

impl Transcript {
    fn create(path: PathBuf) -> Result<Self> {
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            out: BufWriter::new(f),
            start: Instant::now(),
            path,
        })
    }

    fn record(&mut self, dir: &str, msg: serde_json::Value) -> Result<()> {
        let entry = TranscriptEntry {
            t: self.start.elapsed().as_secs_f64(),
            dir: dir.to_string(),
            msg,
        };
        let line = serde_json::to_string(&entry)?;
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))?;
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }

    fn record_server(&mut self, msg: &ServerMessage) -> Result<()> {
        self.record("s2c", serde_json::to_value(msg)?)
    }

    fn record_client(&mut self, body: &[u8]) -> Result<()> {
        let v = serde_json::from_slice(body)
            .unwrap_or_else(|_| serde_json::Value::String(String::from_utf8_lossy(body).into_owned()));
        self.record("c2s", v)
    }
}

/// Runs one episode over an accepted connection.
fn run_session(
    world: &EvalWorld,
    cfg: &EpisodeConfig,
    mut stream: TcpStream,
    session: usize,
    opts: &ServeOptions,
) -> Result<SessionSummary> {
    stream
        .set_read_timeout(opts.read_timeout)
        .map_err(|e| Error::Protocol(format!("socket setup failed: {e}")))?;
    let _ = stream.set_nodelay(true);
    let path = opts.transcript_dir.join(format!("episode_{session:04}.jsonl"));
    let mut transcript = Transcript::create(path.clone())?;
    let mut ep = Episode::new(world, cfg.clone())?;

    let first = ServerMessage::Obs(ep.observe()?);
    transcript.record_server(&first)?;
    let mut link_ok = send(&mut stream, &first).is_ok();
    while link_ok && !ep.is_terminated() {
        let reply = match read_frame(&mut stream) {
            Ok(Some(body)) => {
                transcript.record_client(&body)?;
                ep.handle_raw(&body)?
            }
            Ok(None) => {
                ep.client_error("client disconnected".into());
                break;
            }
            Err(e) => {
                ep.client_error(e.to_string());
                break;
            }
        };
        transcript.record_server(&reply)?;
        link_ok = send(&mut stream, &reply).is_ok();
    }
    if !ep.is_terminated() {
        let end = ep.client_error("connection lost".into());
        transcript.record_server(&end)?;
    }
    log::info!(
        "session {session} ended: {} after {} steps",
        ep.state().terminated.map_or("?", |r| r.as_str()),
        ep.state().step
    );
    Ok(SessionSummary {
        session,
        reason: ep.state().terminated.unwrap_or(TerminationReason::ClientError),
        steps: ep.state().step,
        final_joint_state: ep.state().joint_state.clone(),
        transcript: path,
    })
}

/// Accepts connections and runs one episode per connection.
pub fn serve(
    listener: &TcpListener,
    world: &EvalWorld,
    cfg: &EpisodeConfig,
    opts: &ServeOptions,
) -> Result<Vec<SessionSummary>> {
    Episode::new(world, cfg.clone())?;
    std::fs::create_dir_all(&opts.transcript_dir).map_err(|e| Error::io(&opts.transcript_dir, e))?;
    let limit = opts.max_sessions.unwrap_or(usize::MAX);
    if !opts.concurrent {
        let mut out = Vec::new();
        for session in 0..limit {
            let (stream, peer) = listener
                .accept()
                .map_err(|e| Error::Protocol(format!("accept failed: {e}")))?;
            log::info!("session {session} from {peer}");
            out.push(run_session(world, cfg, stream, session, opts)?);
        }
        return Ok(out);
    }
    std::thread::scope(|s| {
        let mut handles = Vec::new();
        for session in 0..limit {
            let (stream, peer) = listener
                .accept()
                .map_err(|e| Error::Protocol(format!("accept failed: {e}")))?;
            log::info!("session {session} from {peer}");
            handles.push(s.spawn(move || run_session(world, cfg, stream, session, opts)));
        }
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| Error::Protocol("session thread panicked".into()))?)
            .collect()
    })
}

pub fn load_transcript(path: &Path) -> Result<Vec<TranscriptEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(&name, i + 1, e.to_string())))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptReplay {
    pub messages_compared: usize,
    /// Index (into server messages) of the first difference, if any.
    pub first_mismatch: Option<usize>,
    pub reason: Option<TerminationReason>,
}

impl TranscriptReplay {
    pub fn matches(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// Feeds the recorded client messages into a fresh episode and compares
/// every server reply with the recorded one.
pub fn replay_transcript(world: &EvalWorld, cfg: &EpisodeConfig, path: &Path) -> Result<TranscriptReplay> {
    let entries = load_transcript(path)?;
    let recorded: Vec<&serde_json::Value> = entries.iter().filter(|e| e.dir == "s2c").map(|e| &e.msg).collect();
    let mut ep = Episode::new(world, cfg.clone())?;
    let mut produced = vec![serde_json::to_value(ServerMessage::Obs(ep.observe()?))?];
    for e in entries.iter().filter(|e| e.dir == "c2s") {
        if ep.is_terminated() {
            break;
        }
        let reply = match serde_json::from_value::<ClientMessage>(e.msg.clone()) {
            Ok(ClientMessage::Act(a)) => ep.step(&a)?,
            Err(_) => {
                let body = match &e.msg {
                    serde_json::Value::String(s) => s.clone().into_bytes(),
                    other => serde_json::to_vec(other)?,
                };
                ep.handle_raw(&body)?
            }
        };
        produced.push(serde_json::to_value(reply)?);
    }
    // a recorded trailing end after a disconnect has no client message
    let compared = produced.len().min(recorded.len());
    let first_mismatch = (0..compared).find(|&i| strip_error(&produced[i]) != strip_error(recorded[i]));
    Ok(TranscriptReplay {
        messages_compared: compared,
        first_mismatch,
        reason: ep.state().terminated,
    })
}

/// Error strings may embed parser positions; only the structure matters.
fn strip_error(v: &serde_json::Value) -> serde_json::Value {
    let mut v = v.clone();
    if let Some(obj) = v.as_object_mut() {
        if obj.contains_key("error") {
            obj.insert("error".into(), serde_json::Value::Bool(true));
        }
    }
    v
}
