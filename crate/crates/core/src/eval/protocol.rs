//! Wire format: 4-byte big-endian length prefix, then a UTF-8 JSON body.

use std::collections::BTreeMap;
use std::io::{ErrorKind, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::SimilarityTransform;

/// Frames larger than this are rejected.
pub const MAX_FRAME_BYTES: usize = 64 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Done,
    StepBudget,
    LimitViolation,
    WorkspaceViolation,
    ClientError,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::Done => "done",
            TerminationReason::StepBudget => "step_budget",
            TerminationReason::LimitViolation => "limit_violation",
            TerminationReason::WorkspaceViolation => "workspace_violation",
            TerminationReason::ClientError => "client_error",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    Absolute,
    Delta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionMessage {
    pub mode: ActionMode,
    pub joints: Vec<f64>,
    #[serde(default)]
    pub done: bool,
}

/// Rendered frame plus state. `image` is a base64 PNG.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub step: usize,
    pub joint_state: Vec<f64>,
    pub object_poses: BTreeMap<String, SimilarityTransform>,
    pub image: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndNotice {
    pub reason: TerminationReason,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Obs(Observation),
    End(EndNotice),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Act(ActionMessage),
}

/// Writes one length-prefixed frame.
pub fn write_frame<W: Write>(w: &mut W, body: &[u8]) -> Result<()> {
    if body.len() > MAX_FRAME_BYTES {
        return Err(Error::Protocol(format!("frame of {} bytes exceeds limit", body.len())));
    }
    let io = |e: std::io::Error| Error::Protocol(format!("write failed: {e}"));
    w.write_all(&(body.len() as u32).to_be_bytes()).map_err(io)?;
    w.write_all(body).map_err(io)?;
    w.flush().map_err(io)
}

/// Reads one frame; `None` on a clean end of stream before a length prefix.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(Error::Protocol("stream ended inside a length prefix".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::Protocol(format!("read failed: {e}"))),
        }
    }
    let n = u32::from_be_bytes(len) as usize;
    if n > MAX_FRAME_BYTES {
        return Err(Error::Protocol(format!("frame of {n} bytes exceeds limit")));
    }
    let mut body = vec![0u8; n];
    r.read_exact(&mut body)
        .map_err(|e| Error::Protocol(format!("stream ended inside a {n}-byte frame: {e}")))?;
    Ok(Some(body))
}

pub fn send<W: Write, T: Serialize>(w: &mut W, msg: &T) -> Result<()> {
    write_frame(w, &serde_json::to_vec(msg)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"{\"a\":1}").unwrap();
        write_frame(&mut buf, b"").unwrap();
        assert_eq!(&buf[..4], &[0, 0, 0, 7]);
        let mut r = std::io::Cursor::new(buf);
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"{\"a\":1}");
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"");
        assert_eq!(read_frame(&mut r).unwrap(), None);
    }

    #[test]
    fn truncated_frame_is_an_error() {
        let mut r = std::io::Cursor::new(vec![0, 0, 0, 9, b'x']);
        assert!(read_frame(&mut r).is_err());
        let mut r = std::io::Cursor::new(vec![0, 0]);
        assert!(read_frame(&mut r).is_err());
    }

    #[test]
    fn message_shapes() {
        let act: ClientMessage =
            serde_json::from_str(r#"{"type":"act","mode":"delta","joints":[0.1,0.0]}"#).unwrap();
        let ClientMessage::Act(a) = act;
        assert_eq!(a.mode, ActionMode::Delta);
        assert!(!a.done);
        let end = ServerMessage::End(EndNotice {
            reason: TerminationReason::StepBudget,
            steps: 10,
            error: None,
        });
        assert_eq!(
            serde_json::to_string(&end).unwrap(),
            r#"{"type":"end","reason":"step_budget","steps":10}"#
        );
    }
}
