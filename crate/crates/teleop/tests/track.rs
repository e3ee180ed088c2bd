mod common;

use std::net::SocketAddr;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use nalgebra::{UnitQuaternion, Vector3};
use openarms::arm::{open_arms_chain, Pose, Profile};
use openarms::ik::IkStatus;
use openarms_teleop::wire::{ErrorFrame, PoseMsg, SessionHello, TrackReply, TrackRequest};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Socket = WebSocketStream<MaybeTlsStream<TcpStream>>;

const IDLE: Duration = Duration::from_secs(60);

async fn open(addr: SocketAddr, query: &str) -> (Socket, SessionHello) {
    let (mut ws, _) = connect_async(format!("ws://{addr}/track{query}")).await.unwrap();
    let hello = next_text(&mut ws).await;
    (ws, serde_json::from_str(&hello).unwrap())
}

async fn next_text(ws: &mut Socket) -> String {
    loop {
        match ws.next().await.expect("stream open").unwrap() {
            Message::Text(t) => return t.to_string(),
            Message::Ping(_) | Message::Pong(_) => continue,
            other => panic!("unexpected frame {other:?}"),
        }
    }
}

fn request(seq: u64, pose: &Pose) -> String {
    let m = PoseMsg::from_pose(pose);
    serde_json::to_string(&TrackRequest { seq, position: m.position, quaternion: m.quaternion }).unwrap()
}

async fn exchange(ws: &mut Socket, seq: u64, pose: &Pose) -> TrackReply {
    ws.send(Message::text(request(seq, pose))).await.unwrap();
    let text = next_text(ws).await;
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"))
}

/// Dense straight-line hand path between two reachable poses.
fn hand_path(n: usize) -> Vec<Pose> {
    let chain = open_arms_chain(&Profile::Default).unwrap();
    let a = chain.forward_kinematics(&[0.478, -0.273, 0.198, -0.298, 0.914, 0.122, -0.084]).unwrap();
    let b = chain.forward_kinematics(&[0.263, -0.060, -0.282, -0.429, 0.841, 0.004, -0.030]).unwrap();
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            Pose::new(a.position.lerp(&b.position, t), a.orientation.slerp(&b.orientation, t))
        })
        .collect()
}

fn max_step(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[tokio::test]
async fn hello_then_replies() {
    let addr = common::spawn(common::service(), IDLE).await;
    let (mut ws, hello) = open(addr, "").await;
    assert_eq!(hello.dof, 7);
    assert_eq!(hello.idle_timeout_s, 60.0);
    let pose = hand_path(2)[0];
    let r = exchange(&mut ws, 9, &pose).await;
    assert_eq!(r.seq, 9);
    assert_eq!(r.result.joints.len(), 7);
    let (_, other) = open(addr, "").await;
    assert_ne!(hello.session, other.session);
}

#[tokio::test]
async fn constant_target_constant_joints() {
    let addr = common::spawn(common::service(), IDLE).await;
    let (mut ws, _) = open(addr, "").await;
    let pose = hand_path(2)[0];
    let first = exchange(&mut ws, 0, &pose).await;
    assert_eq!(first.result.status, IkStatus::Exact);
    for seq in 1..50 {
        let r = exchange(&mut ws, seq, &pose).await;
        assert_eq!(r.result.joints, first.result.joints, "seq {seq}");
    }
}

#[tokio::test]
async fn hand_path_is_smooth_and_timely() {
    let addr = common::spawn(common::service(), IDLE).await;
    let path = hand_path(200);
    let chain = open_arms_chain(&Profile::Default).unwrap();
    let start = chain.forward_kinematics(&[0.478, -0.273, 0.198, -0.298, 0.914, 0.122, -0.084]).unwrap();
    assert!((start.position - path[0].position).norm() < 1e-15);
    let (mut ws, _) = open(addr, "?seed=0.478,-0.273,0.198,-0.298,0.914,0.122,-0.084").await;

    let mut prev: Option<Vec<f64>> = None;
    let (mut worst, mut total) = (0.0f64, Duration::ZERO);
    for (seq, pose) in path.iter().enumerate() {
        let sent = Instant::now();
        let r = exchange(&mut ws, seq as u64, pose).await;
        total += sent.elapsed();
        assert_eq!(r.seq, seq as u64);
        assert_eq!(r.result.status, IkStatus::Exact, "seq {seq}");
        if let Some(p) = &prev {
            worst = worst.max(max_step(p, &r.result.joints));
        }
        prev = Some(r.result.joints);
    }
    assert!(worst <= 0.05, "max joint step {worst}");
    let mean = total / path.len() as u32;
    assert!(mean <= Duration::from_millis(20), "mean round trip {mean:?}");
}

#[tokio::test]
async fn malformed_message_gets_error_frame() {
    let addr = common::spawn(common::service(), IDLE).await;
    let (mut ws, _) = open(addr, "").await;
    let path = hand_path(3);
    let a = exchange(&mut ws, 0, &path[0]).await;

    ws.send(Message::text(r#"{"seq": 1, "position": [0.1, 0.2], "quaternion": [1, 0, 0, 0]}"#)).await.unwrap();
    let err: ErrorFrame = serde_json::from_str(&next_text(&mut ws).await).unwrap();
    assert_eq!(err.seq, Some(1));
    assert!(!err.error.is_empty());

    ws.send(Message::text("garbage")).await.unwrap();
    let err: ErrorFrame = serde_json::from_str(&next_text(&mut ws).await).unwrap();
    assert_eq!(err.seq, None);

    ws.send(Message::binary(vec![1u8, 2, 3])).await.unwrap();
    let err: ErrorFrame = serde_json::from_str(&next_text(&mut ws).await).unwrap();
    assert_eq!(err.seq, None);

    let b = exchange(&mut ws, 2, &path[1]).await;
    assert_eq!(b.seq, 2);

    // The rejected frames left the seed alone: a clean session agrees.
    let (mut clean, _) = open(addr, "").await;
    assert_eq!(exchange(&mut clean, 0, &path[0]).await.result.joints, a.result.joints);
    assert_eq!(exchange(&mut clean, 1, &path[1]).await.result.joints, b.result.joints);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn parallel_sessions_keep_order() {
    let addr = common::spawn(common::service(), IDLE).await;
    const MESSAGES: u64 = 1000;
    let tasks: Vec<_> = (0..4)
        .map(|s| {
            tokio::spawn(async move {
                let (ws, _) = open(addr, "").await;
                let (mut tx, mut rx) = ws.split();
                let base = hand_path(2)[s % 2];
                let writer = tokio::spawn(async move {
                    for seq in 0..MESSAGES {
                        // A small circle around the start pose.
                        let t = seq as f64 * 0.01 + s as f64;
                        let offset = Vector3::new(0.01 * t.cos(), 0.01 * t.sin(), 0.0);
                        let pose = Pose::new(base.position + offset, base.orientation);
                        tx.send(Message::text(request(seq, &pose))).await.unwrap();
                    }
                    tx
                });
                for expected in 0..MESSAGES {
                    let text = match rx.next().await.unwrap().unwrap() {
                        Message::Text(t) => t.to_string(),
                        other => panic!("unexpected frame {other:?}"),
                    };
                    let r: TrackReply = serde_json::from_str(&text).unwrap();
                    assert_eq!(r.seq, expected, "session {s}");
                }
                drop(writer.await.unwrap());
            })
        })
        .collect();
    for t in tasks {
        t.await.unwrap();
    }
}

#[tokio::test]
async fn replay_is_deterministic() {
    let path = hand_path(60);
    let mut runs = Vec::new();
    for _ in 0..2 {
        // A fresh server each time.
        let addr = common::spawn(common::service(), IDLE).await;
        let (mut ws, _) = open(addr, "?seed=0.1,0.2,0,0.3,0,0,0").await;
        let mut joints = Vec::new();
        for (seq, pose) in path.iter().enumerate() {
            joints.push(exchange(&mut ws, seq as u64, pose).await.result.joints);
        }
        runs.push(joints);
    }
    assert_eq!(runs[0], runs[1]);
}

#[tokio::test]
async fn idle_session_expires() {
    let addr = common::spawn(common::service(), Duration::from_millis(300)).await;
    let (mut ws, _) = open(addr, "").await;
    let pose = Pose::new(Vector3::new(0.2, 0.0, -0.4), UnitQuaternion::identity());
    exchange(&mut ws, 0, &pose).await;
    let started = Instant::now();
    match tokio::time::timeout(Duration::from_secs(5), ws.next()).await.unwrap() {
        Some(Ok(Message::Close(Some(frame)))) => {
            assert_eq!(frame.code, CloseCode::Normal);
            assert_eq!(frame.reason.as_str(), "session expired");
        }
        other => panic!("expected a close frame, got {other:?}"),
    }
    assert!(started.elapsed() >= Duration::from_millis(250));
}

#[tokio::test]
async fn bad_seed_is_refused() {
    let addr = common::spawn(common::service(), IDLE).await;
    assert!(connect_async(format!("ws://{addr}/track?seed=1,2,3")).await.is_err());
    assert!(connect_async(format!("ws://{addr}/track?seed=a,b")).await.is_err());
}
