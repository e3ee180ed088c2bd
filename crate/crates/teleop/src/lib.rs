//! Teleoperation service for the Open Arms toolkit: forward and inverse
//! kinematics, grasp detection and seeded IK tracking over HTTP and a
//! WebSocket stream.

pub mod server;
pub mod session;
pub mod wire;

use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use openarms::arm::KinematicChain;
use openarms::cornell::{read_depth_csv, read_depth_pgm, DepthImage};
use openarms::detect::{detect_grasps, detection_to_world, DetectConfig};
use openarms::grasp::CameraModel;
use openarms::ik::{solve_two_stage, IkConfig};
use openarms::nn::{heuristic_predictor, HeuristicPredictor, Network, Predictor};

pub use session::TrackSession;
use wire::{
    ChainInfo, DepthPayload, FkRequest, GraspEntry, GraspRequest, GraspResponse, IkRequest, IkResponse, PoseMsg, WorldGrasp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or out-of-contract request.
    Request,
    /// The server lacks what the request needs (camera, weights).
    Config,
    Internal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
}

impl ApiError {
    pub fn request(msg: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Request, message: msg.into() }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Config, message: msg.into() }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Internal, message: msg.into() }
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ApiError {}

/// Shared, immutable state behind every endpoint.
pub struct Service {
    chain: KinematicChain,
    loose: IkConfig,
    tight: IkConfig,
    camera: Option<CameraModel>,
    network: Option<Network>,
    heuristic: HeuristicPredictor,
    next_session: AtomicU64,
}

impl Service {
    /// Two-stage IK with the default loose and tight configs, no camera, no
    /// network.
    pub fn new(chain: KinematicChain) -> Self {
        Self {
            chain,
            loose: IkConfig::loose(),
            tight: IkConfig::tight(),
            camera: None,
            network: None,
            heuristic: heuristic_predictor(),
            next_session: AtomicU64::new(1),
        }
    }

    pub fn with_camera(mut self, camera: CameraModel) -> Self {
        self.camera = Some(camera);
        self
    }

    pub fn with_network(mut self, network: Network) -> Self {
        self.network = Some(network);
        self
    }

    pub fn chain(&self) -> &KinematicChain {
        &self.chain
    }

    pub fn configs(&self) -> (&IkConfig, &IkConfig) {
        (&self.loose, &self.tight)
    }

    pub fn chain_info(&self) -> ChainInfo {
        ChainInfo::from_chain(&self.chain)
    }

    pub fn fk(&self, req: &FkRequest) -> Result<PoseMsg, ApiError> {
        self.check_joints(&req.joints, "joints")?;
        let pose = self.chain.forward_kinematics(&req.joints).map_err(|e| ApiError::request(e.to_string()))?;
        Ok(PoseMsg::from_pose(&pose))
    }

    pub fn ik(&self, req: &IkRequest) -> Result<IkResponse, ApiError> {
        let target = PoseMsg { position: req.position, quaternion: req.quaternion }.to_pose()?;
        let seed = match &req.seed {
            Some(s) => {
                self.check_joints(s, "seed")?;
                s.clone()
            }
            None => vec![0.0; self.chain.dof()],
        };
        let r = solve_two_stage(&self.chain, &target, &seed, &self.loose, &self.tight)
            .map_err(|e| ApiError::request(e.to_string()))?;
        Ok(IkResponse::from(&r))
    }

    pub(crate) fn check_joints(&self, q: &[f64], what: &str) -> Result<(), ApiError> {
        if q.len() != self.chain.dof() {
            return Err(ApiError::request(format!("{what}: expected {} values, got {}", self.chain.dof(), q.len())));
        }
        if !q.iter().all(|v| v.is_finite()) {
            return Err(ApiError::request(format!("{what}: values must be finite")));
        }
        Ok(())
    }

    pub fn grasp(&self, req: &GraspRequest) -> Result<GraspResponse, ApiError> {
        if req.world && self.camera.is_none() {
            return Err(ApiError::config("robot-frame output requested but no camera model is configured"));
        }
        let depth = match (&req.depth, &req.depth_path) {
            (Some(p), None) => inline_depth(p)?,
            (None, Some(path)) => load_depth(Path::new(path)).map_err(ApiError::request)?,
            _ => return Err(ApiError::request("give exactly one of `depth` and `depth_path`")),
        };
        let top_k = req.top_k.unwrap_or(DetectConfig::default().top_k);
        if top_k == 0 {
            return Err(ApiError::request("top_k must be at least 1"));
        }
        let (predictor, input_size): (&dyn Predictor, usize) = match req.predictor.as_deref().unwrap_or("heuristic") {
            "heuristic" => (&self.heuristic, DetectConfig::default().input_size),
            "network" => match &self.network {
                Some(n) => (n, n.spec().input.1),
                None => return Err(ApiError::config("no network weights are loaded")),
            },
            other => return Err(ApiError::request(format!("unknown predictor `{other}`"))),
        };
        let cfg = DetectConfig { input_size, top_k, ..Default::default() };
        let detections = detect_grasps(&depth, predictor, &cfg).map_err(|e| ApiError::request(e.to_string()))?;
        let grasps = detections
            .iter()
            .map(|d| {
                let world = self
                    .camera
                    .as_ref()
                    .map(|cam| detection_to_world(d, &depth, cam).map(|w| WorldGrasp::from(&w)))
                    .transpose()
                    .map_err(|e| ApiError::request(e.to_string()))?;
                Ok(GraspEntry::new(&d.rect, d.pixel.quality, world))
            })
            .collect::<Result<_, ApiError>>()?;
        Ok(GraspResponse { grasps })
    }

    /// Opens a tracking session seeded with `seed` (zeros if absent).
    pub fn open_session(self: &Arc<Self>, seed: Option<Vec<f64>>) -> Result<TrackSession, ApiError> {
        let seed = match seed {
            Some(s) => {
                self.check_joints(&s, "seed")?;
                s
            }
            None => vec![0.0; self.chain.dof()],
        };
        let id = format!("s{}", self.next_session.fetch_add(1, Ordering::Relaxed));
        Ok(TrackSession::new(id, Arc::clone(self), seed))
    }
}

fn inline_depth(p: &DepthPayload) -> Result<DepthImage, ApiError> {
    if p.values.len() != p.width * p.height {
        return Err(ApiError::request(format!(
            "depth: {}x{} image needs {} values, got {}",
            p.width,
            p.height,
            p.width * p.height,
            p.values.len()
        )));
    }
    let valid: Vec<bool> = p.values.iter().map(|v| v.is_some_and(|d| d.is_finite() && d > 0.0)).collect();
    let values = p.values.iter().zip(&valid).map(|(v, &ok)| if ok { v.unwrap_or(0.0) } else { 0.0 }).collect();
    DepthImage::with_mask(p.width, p.height, values, valid).map_err(|e| ApiError::request(e.to_string()))
}

/// Reads a PGM depth file, or the CSV form when the extension is `.csv`.
pub fn load_depth(path: &Path) -> Result<DepthImage, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = String::from_utf8(bytes).map_err(|_| format!("{}: not UTF-8", path.display()))?;
        read_depth_csv(&text)
    } else {
        read_depth_pgm(&bytes)
    };
    parsed.map_err(|e| format!("{}: {e}", path.display()))
}
