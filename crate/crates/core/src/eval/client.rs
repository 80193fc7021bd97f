use std::net::{TcpStream, ToSocketAddrs};

use base64::Engine as _;

use super::protocol::{read_frame, send, ActionMessage, ClientMessage, EndNotice, Observation, ServerMessage};
use crate::error::{Error, Result};
use crate::raster::RgbImage;

#[derive(Clone, Debug, PartialEq)]
pub struct ClientRun {
    pub observations: Vec<Observation>,
    pub end: EndNotice,
}

impl Observation {
    pub fn decode_image(&self) -> Result<RgbImage> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.image)
            .map_err(|e| Error::Protocol(format!("bad image encoding: {e}")))?;
        RgbImage::decode_png(&bytes)
    }
}

/// Connects, then answers every observation with `policy` until the
/// server ends the episode.
pub fn run_client<A, F>(addr: A, mut policy: F) -> Result<ClientRun>
where
    A: ToSocketAddrs,
    F: FnMut(&Observation) -> ActionMessage,
{
    let mut stream = TcpStream::connect(addr).map_err(|e| Error::Protocol(format!("connect failed: {e}")))?;
    let _ = stream.set_nodelay(true);
    let mut observations = Vec::new();
    loop {
        let body = read_frame(&mut stream)?
            .ok_or_else(|| Error::Protocol("server closed the connection without an end message".into()))?;
        match serde_json::from_slice::<ServerMessage>(&body)? {
            ServerMessage::Obs(o) => {
                let action = policy(&o);
                observations.push(o);
                send(&mut stream, &ClientMessage::Act(action))?;
            }
            ServerMessage::End(end) => return Ok(ClientRun { observations, end }),
        }
    }
}
