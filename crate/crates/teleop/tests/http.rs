mod common;

use std::time::Duration;

use nalgebra::{Matrix3, Matrix4, Vector3};
use openarms::arm::OPEN_ARMS_JOINTS;
use openarms::grasp::{CameraModel, WIDTH_SCALE};
use openarms::nn::{build_network, random_weights, NetworkSpec};
use openarms_teleop::wire::{ChainInfo, DepthPayload, GraspRequest, GraspResponse, IkResponse, PoseMsg};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const IDLE: Duration = Duration::from_secs(60);

async fn post(addr: std::net::SocketAddr, path: &str, body: &Value) -> (u16, Value) {
    let resp = reqwest::Client::new()
        .post(format!("http://{addr}{path}"))
        .json(body)
        .send()
        .await
        .unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().await.unwrap())
}

fn rotation_from_wxyz(q: [f64; 4]) -> Matrix3<f64> {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y),
    )
}

fn homogeneous(p: &PoseMsg) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation_from_wxyz(p.quaternion));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&Vector3::from(p.position));
    m
}

/// Rodrigues rotation about a unit axis.
fn axis_angle(axis: [f64; 3], angle: f64) -> Matrix4<f64> {
    let k = Vector3::from(axis);
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    let r = Matrix3::identity() + angle.sin() * kx + (1.0 - angle.cos()) * kx * kx;
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m
}

/// Forward kinematics rebuilt from the `/chain` description alone.
fn oracle_fk(chain: &ChainInfo, q: &[f64]) -> Matrix4<f64> {
    let mut t = homogeneous(&chain.base);
    for (j, &a) in chain.joints.iter().zip(q) {
        t = t * homogeneous(&j.offset) * axis_angle(j.axis, a);
    }
    t * homogeneous(&chain.tool)
}

fn assert_pose_matches(pose: &PoseMsg, m: &Matrix4<f64>, tol: f64) {
    let r = rotation_from_wxyz(pose.quaternion);
    let dp = (Vector3::from(pose.position) - m.fixed_view::<3, 1>(0, 3)).norm();
    let dr = (r - m.fixed_view::<3, 3>(0, 0)).norm();
    assert!(dp < tol && dr < tol, "pose {pose:?} vs oracle {m}: dp {dp:e}, dr {dr:e}");
}

#[tokio::test]
async fn chain_describes_the_arm() {
    let addr = common::spawn(common::service(), IDLE).await;
    let chain: ChainInfo = reqwest::get(format!("http://{addr}/chain")).await.unwrap().json().await.unwrap();
    assert_eq!(chain.dof, 7);
    for (j, (name, span_deg)) in chain.joints.iter().zip(OPEN_ARMS_JOINTS) {
        assert_eq!(j.name, name);
        assert!((j.limits[1] - j.limits[0] - span_deg.to_radians()).abs() < 1e-12);
    }
}

#[tokio::test]
async fn fk_matches_chain_description() {
    let addr = common::spawn(common::service(), IDLE).await;
    let chain: ChainInfo = reqwest::get(format!("http://{addr}/chain")).await.unwrap().json().await.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..50 {
        let q: Vec<f64> = if i == 0 {
            vec![0.0; 7]
        } else {
            chain.joints.iter().map(|j| rng.random_range(j.limits[0]..j.limits[1])).collect()
        };
        let (status, body) = post(addr, "/fk", &json!({ "joints": q })).await;
        assert_eq!(status, 200, "{body}");
        let pose: PoseMsg = serde_json::from_value(body).unwrap();
        assert_pose_matches(&pose, &oracle_fk(&chain, &q), 1e-12);
    }

    // Home pose: hanging straight down by the sum of the link offsets.
    let (_, body) = post(addr, "/fk", &json!({ "joints": vec![0.0; 7] })).await;
    let home: PoseMsg = serde_json::from_value(body).unwrap();
    let drop: f64 = chain.joints.iter().map(|j| j.offset.position[2]).sum::<f64>() + chain.tool.position[2];
    assert!((home.position[2] - drop).abs() < 1e-12 && home.position[0].abs() < 1e-12);
    assert_eq!(home.quaternion, [1.0, 0.0, 0.0, 0.0]);
}

#[tokio::test]
async fn quaternion_is_w_first() {
    let addr = common::spawn(common::service(), IDLE).await;
    // Shoulder yaw alone turns the tool about the z axis by the joint angle.
    let (_, body) = post(addr, "/fk", &json!({ "joints": [0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0] })).await;
    let pose: PoseMsg = serde_json::from_value(body).unwrap();
    let [w, x, y, z] = pose.quaternion;
    let expected = [0.25f64.cos(), 0.0, 0.0, 0.25f64.sin()];
    let sign = if w < 0.0 { -1.0 } else { 1.0 };
    for (got, want) in [w, x, y, z].iter().zip(expected) {
        assert!((sign * got - want).abs() < 1e-12, "{:?}", pose.quaternion);
    }
}

#[tokio::test]
async fn fk_rejects_bad_requests() {
    let addr = common::spawn(common::service(), IDLE).await;
    let (status, body) = post(addr, "/fk", &json!({ "joints": vec![0.0; 6] })).await;
    assert_eq!(status, 400);
    assert_eq!(body["kind"], "request");
    assert!(body["error"].as_str().unwrap().contains("expected 7 values, got 6"), "{body}");

    let resp = reqwest::Client::new()
        .post(format!("http://{addr}/fk"))
        .body(r#"{"joints": [0, 0, 0, 1e999, 0, 0, 0]}"#)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["kind"], "request");

    let resp = reqwest::Client::new().post(format!("http://{addr}/fk")).body("{").send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 400);
}

#[tokio::test]
async fn ik_round_trip() {
    let addr = common::spawn(common::service(), IDLE).await;
    let chain: ChainInfo = reqwest::get(format!("http://{addr}/chain")).await.unwrap().json().await.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let q: Vec<f64> = chain.joints.iter().map(|j| rng.random_range(j.limits[0]..j.limits[1])).collect();
        let (_, body) = post(addr, "/fk", &json!({ "joints": q })).await;
        let target: PoseMsg = serde_json::from_value(body).unwrap();
        let (status, body) = post(addr, "/ik", &serde_json::to_value(&target).unwrap()).await;
        assert_eq!(status, 200, "{body}");
        let r: IkResponse = serde_json::from_value(body).unwrap();
        assert_eq!(r.status, openarms::ik::IkStatus::Exact);
        assert!(r.pos_err <= 1e-3 && r.ori_err <= 1e-2);

        // Judge the answer independently of the solver's own report.
        let reached = oracle_fk(&chain, &r.joints);
        let goal = homogeneous(&target);
        let dp = (reached.fixed_view::<3, 1>(0, 3) - goal.fixed_view::<3, 1>(0, 3)).norm();
        let rel = reached.fixed_view::<3, 3>(0, 0).transpose() * goal.fixed_view::<3, 3>(0, 0);
        let angle = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
        assert!(dp <= 1e-3 && angle <= 1e-2, "dp {dp}, angle {angle}");
        for (v, j) in r.joints.iter().zip(&chain.joints) {
            assert!((j.limits[0]..=j.limits[1]).contains(v));
        }
    }
}

#[tokio::test]
async fn ik_far_target_is_best_fit() {
    let addr = common::spawn(common::service(), IDLE).await;
    let chain: ChainInfo = reqwest::get(format!("http://{addr}/chain")).await.unwrap().json().await.unwrap();
    let (status, body) = post(addr, "/ik", &json!({ "position": [3.0, 0.0, 0.0], "quaternion": [1, 0, 0, 0] })).await;
    assert_eq!(status, 200, "{body}");
    let r: IkResponse = serde_json::from_value(body).unwrap();
    assert_eq!(r.status, openarms::ik::IkStatus::BestFit);
    assert!(r.pos_err > 1.0);
    for (v, j) in r.joints.iter().zip(&chain.joints) {
        assert!((j.limits[0]..=j.limits[1]).contains(v));
    }
}

#[tokio::test]
async fn ik_rejects_bad_requests() {
    let addr = common::spawn(common::service(), IDLE).await;
    let (status, body) = post(addr, "/ik", &json!({ "position": [0.1, 0.0, -0.5], "quaternion": [0, 0, 0, 0] })).await;
    assert_eq!(status, 400);
    assert!(body["error"].as_str().unwrap().contains("quaternion"), "{body}");

    let (status, _) = post(addr, "/ik", &json!({ "position": [0.1, 0.0], "quaternion": [1, 0, 0, 0] })).await;
    assert_eq!(status, 400);

    let bad_seed = json!({ "position": [0.1, 0.0, -0.5], "quaternion": [1, 0, 0, 0], "seed": vec![0.0; 3] });
    let (status, _) = post(addr, "/ik", &bad_seed).await;
    assert_eq!(status, 400);
}

fn block_scene() -> DepthPayload {
    let (width, height) = (160, 120);
    let mut values = vec![Some(0.70); width * height];
    for v in 50..70 {
        for u in 40..120 {
            values[v * width + u] = Some(0.64);
        }
    }
    values[3] = None;
    DepthPayload { width, height, values }
}

fn grasp_request(world: bool) -> Value {
    serde_json::to_value(GraspRequest { depth: Some(block_scene()), top_k: Some(3), world, ..Default::default() }).unwrap()
}

#[tokio::test]
async fn grasp_on_block_scene() {
    let addr = common::spawn(common::service(), IDLE).await;
    let (status, body) = post(addr, "/grasp", &grasp_request(false)).await;
    assert_eq!(status, 200, "{body}");
    let resp: GraspResponse = serde_json::from_value(body).unwrap();
    assert!(!resp.grasps.is_empty() && resp.grasps.len() <= 3);
    for pair in resp.grasps.windows(2) {
        assert!(pair[0].quality >= pair[1].quality);
    }
    for g in &resp.grasps {
        assert!(g.world.is_none());
        let [u, v] = g.center;
        assert!((40.0..120.0).contains(&u) && (50.0..70.0).contains(&v), "{g:?}");
        // Closing across the 20 px side means a near-vertical closing axis.
        assert!(g.angle.abs() > 80f64.to_radians(), "{g:?}");
    }
}

#[tokio::test]
async fn grasp_world_needs_camera() {
    let addr = common::spawn(common::service(), IDLE).await;
    let (status, body) = post(addr, "/grasp", &grasp_request(true)).await;
    assert_eq!(status, 409);
    assert_eq!(body["kind"], "config");

    let (status, body) = post(addr, "/grasp", &json!({ "predictor": "network", "depth": block_scene() })).await;
    assert_eq!(status, 409, "{body}");

    let (status, _) = post(addr, "/grasp", &json!({ "top_k": 3 })).await;
    assert_eq!(status, 400);
    let (status, _) = post(addr, "/grasp", &json!({ "depth": { "width": 4, "height": 4, "values": [0.5] } })).await;
    assert_eq!(status, 400);
}

#[tokio::test]
async fn grasp_identity_extrinsic_gives_camera_frame() {
    let (fx, fy, cx, cy) = (200.0, 210.0, 80.0, 60.0);
    let cam = CameraModel::new(fx, fy, cx, cy, openarms::arm::Transform::identity());
    let addr = common::spawn(common::service().with_camera(cam), IDLE).await;
    let (status, body) = post(addr, "/grasp", &grasp_request(true)).await;
    assert_eq!(status, 200, "{body}");
    let resp: GraspResponse = serde_json::from_value(body).unwrap();
    let scene = block_scene();
    for g in &resp.grasps {
        let w = g.world.as_ref().expect("world pose");
        let [u, v] = g.center;
        let z = scene.values[v.round() as usize * scene.width + u.round() as usize].unwrap();
        let expected = [(u - cx) * z / fx, (v - cy) * z / fy, z];
        for (a, b) in w.position.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{w:?} vs {expected:?}");
        }
        assert!((w.phi - g.angle).abs() < 1e-12);
        assert!((w.width - g.width * z / fx).abs() < 1e-9);
        assert_eq!(w.quality, g.quality);
    }
}

#[tokio::test]
async fn grasp_from_file_and_network() {
    let net = build_network(&NetworkSpec::default(), &random_weights(&NetworkSpec::default(), 3)).unwrap();
    let addr = common::spawn(common::service().with_network(net), IDLE).await;
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/cornell_mini/pcd0100d.pgm");
    let (status, body) = post(addr, "/grasp", &json!({ "depth_path": path, "top_k": 2 })).await;
    assert_eq!(status, 200, "{body}");
    let (status, body) = post(addr, "/grasp", &json!({ "depth_path": path, "predictor": "network" })).await;
    assert_eq!(status, 200, "{body}");
    let resp: GraspResponse = serde_json::from_value(body).unwrap();
    for g in &resp.grasps {
        assert!(g.width >= 0.0 && g.width <= WIDTH_SCALE * 96.0 / 400.0 + 1e-9, "{g:?}");
    }
    let (status, _) = post(addr, "/grasp", &json!({ "depth_path": "/nonexistent.pgm" })).await;
    assert_eq!(status, 400);
}
