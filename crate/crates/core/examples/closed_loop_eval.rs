//! Hosts an evaluation episode over TCP and drives it with a scripted
//! client, then replays the transcript.

use std::net::TcpListener;

use gstwin::eval::{replay_transcript, run_client, serve, ActionMessage, ActionMode, EpisodeConfig, EvalWorld, ServeOptions};
use gstwin::synthetic::{arm_scene, camera, ur5_chain};
use nalgebra::Vector3;

fn main() -> gstwin::Result<()> {
    let chain = ur5_chain();
    let canonical = chain.zero_state();
    let world = EvalWorld {
        scene: arm_scene(&chain, &canonical, 10)?,
        chain,
        canonical,
        camera: camera(128, 96, 65.0, Vector3::new(1.2, -1.2, 0.8), Vector3::new(0.0, 0.0, 0.3))?,
        background: [0.0; 3],
    };
    let cfg = EpisodeConfig {
        budget: 20,
        initial: Some(vec![0.0, -1.2, 0.6, 0.0, 0.0, 0.0]),
        table_z: Some(-0.01),
        ..Default::default()
    };
    let transcripts = std::env::temp_dir().join("gstwin-transcripts");
    let opts = ServeOptions { max_sessions: Some(1), transcript_dir: transcripts, ..Default::default() };
    let listener = TcpListener::bind("127.0.0.1:0").map_err(|e| gstwin::Error::Protocol(e.to_string()))?;
    let addr = listener.local_addr().map_err(|e| gstwin::Error::Protocol(e.to_string()))?;

    let (sessions, run) = std::thread::scope(|s| {
        let server = s.spawn(|| serve(&listener, &world, &cfg, &opts));
        // a policy that sweeps the base joint and stops after ten steps
        let run = run_client(addr, |obs| ActionMessage {
            mode: ActionMode::Delta,
            joints: vec![0.05, 0.0, 0.0, 0.0, 0.0, 0.0],
            done: obs.step >= 10,
        });
        (server.join().expect("server thread"), run)
    });
    let (sessions, run) = (sessions?, run?);
    println!(
        "episode ended with {} after {} steps, {} observations received",
        run.end.reason.as_str(),
        run.end.steps,
        run.observations.len()
    );
    let replay = replay_transcript(&world, &cfg, &sessions[0].transcript)?;
    println!(
        "transcript {} replays {} messages: {}",
        sessions[0].transcript.display(),
        replay.messages_compared,
        if replay.matches() { "identical" } else { "MISMATCH" }
    );
    Ok(())
}
