//! Test-side bridge process: answers every request with the latents it was
//! sent, which makes it equivalent to `IdentityPredictor`.

use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use mvtex_core::bridge::wire::Frame;
use mvtex_core::bridge::{BridgeRequest, BridgeResponse};

pub struct EchoServer {
    pub address: String,
    pub requests: Arc<AtomicUsize>,
}

/// Starts an echo bridge on an ephemeral port. With `fail_at = Some(n)` the
/// n-th request (0-based) gets an error reply instead.
pub fn spawn_echo(fail_at: Option<usize>) -> EchoServer {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let address = listener.local_addr().unwrap().to_string();
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let reply = match Frame::read_from(&stream).and_then(|f| BridgeRequest::from_frame(&f)) {
                Ok(_) if fail_at == Some(n) => BridgeResponse::Error("model exploded".into()),
                Ok(req) => BridgeResponse::Ok(req.views.into_iter().map(|v| v.latent).collect()),
                Err(e) => BridgeResponse::Error(e.to_string()),
            };
            let _ = reply.to_frame().write_to(&stream);
        }
    });
    EchoServer { address, requests }
}
