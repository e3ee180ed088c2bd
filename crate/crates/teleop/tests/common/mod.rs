#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use openarms::arm::{open_arms_chain, Profile};
use openarms_teleop::server::{router, serve};
use openarms_teleop::Service;

pub fn service() -> Service {
    Service::new(open_arms_chain(&Profile::Default).unwrap())
}

/// Serves on an ephemeral local port for the rest of the test.
pub async fn spawn(service: Service, idle: Duration) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, router(Arc::new(service), idle)));
    addr
}
