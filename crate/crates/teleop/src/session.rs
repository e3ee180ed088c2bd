use std::sync::Arc;
use std::time::{Duration, Instant};

use openarms::ik::{solve_two_stage, IkResult};

use crate::wire::{ErrorFrame, IkResponse, PoseMsg, TrackReply, TrackRequest};
use crate::{ApiError, Service};

/// One IK tracking stream. Each solve is seeded with the previous answer;
/// a rejected message leaves the seed untouched. Transport-independent: the
/// WebSocket handler feeds it text frames, tests can call it directly.
pub struct TrackSession {
    id: String,
    service: Arc<Service>,
    seed: Vec<f64>,
    last: Option<IkResult>,
    last_active: Instant,
}

impl TrackSession {
    pub(crate) fn new(id: String, service: Arc<Service>, seed: Vec<f64>) -> Self {
        Self { id, service, seed, last: None, last_active: Instant::now() }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Seed of the next solve.
    pub fn seed(&self) -> &[f64] {
        &self.seed
    }

    pub fn last_result(&self) -> Option<&IkResult> {
        self.last.as_ref()
    }

    pub fn idle_for(&self) -> Duration {
        self.last_active.elapsed()
    }

    pub fn step(&mut self, req: &TrackRequest) -> Result<TrackReply, ApiError> {
        self.last_active = Instant::now();
        let target = PoseMsg { position: req.position, quaternion: req.quaternion }.to_pose()?;
        let (loose, tight) = self.service.configs();
        let r = solve_two_stage(self.service.chain(), &target, &self.seed, loose, tight)
            .map_err(|e| ApiError::request(e.to_string()))?;
        self.seed.clone_from(&r.joints.0);
        let reply = TrackReply { seq: req.seq, result: IkResponse::from(&r) };
        self.last = Some(r);
        Ok(reply)
    }

    /// Parses one text frame and returns the reply frame: a [`TrackReply`] or,
    /// for anything unusable, an [`ErrorFrame`] carrying the message's `seq`
    /// when it could be read.
    pub fn handle_text(&mut self, text: &str) -> String {
        self.last_active = Instant::now();
        let reply = match serde_json::from_str::<TrackRequest>(text) {
            Ok(req) => self.step(&req).map_err(|e| (Some(req.seq), e.message)),
            Err(e) => {
                let seq = serde_json::from_str::<serde_json::Value>(text)
                    .ok()
                    .and_then(|v| v.get("seq").and_then(|s| s.as_u64()));
                Err((seq, format!("malformed track message: {e}")))
            }
        };
        match reply {
            Ok(r) => serde_json::to_string(&r),
            Err((seq, error)) => serde_json::to_string(&ErrorFrame { seq, error }),
        }
        .expect("wire types serialize")
    }
}
