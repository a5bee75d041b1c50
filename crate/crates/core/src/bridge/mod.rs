//! Client side of the external model bridge: typed requests and responses
//! over [`wire`] frames, and a [`NoisePredictor`] that forwards to a remote
//! process.

mod prompt;
pub mod wire;

use std::net::TcpStream;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::denoise::{AttentionPlan, Capabilities, NoisePredictor, PredictBatch, PredictError};
use crate::geometry::GBuffer;
use crate::grid::{GridRole, LatentGrid};

pub use prompt::{bucket_for, directional_prompt, view_bucket, ViewBucket, TOP_ELEVATION_DEG};
use wire::{Frame, Tensor, WireError, PROTOCOL_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BridgeOp {
    PredictNoise,
    DecodeLatent,
}

impl BridgeOp {
    fn as_str(self) -> &'static str {
        match self {
            BridgeOp::PredictNoise => "predict-noise",
            BridgeOp::DecodeLatent => "decode-latent",
        }
    }

    fn parse(s: &str) -> Result<Self, WireError> {
        match s {
            "predict-noise" => Ok(BridgeOp::PredictNoise),
            "decode-latent" => Ok(BridgeOp::DecodeLatent),
            _ => Err(WireError::Malformed(format!("unknown op {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditioningKind {
    #[default]
    Depth,
    Normal,
}

impl ConditioningKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditioningKind::Depth => "depth",
            ConditioningKind::Normal => "normal",
        }
    }
}

impl std::str::FromStr for ConditioningKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "depth" => Ok(Self::Depth),
            "normal" => Ok(Self::Normal),
            _ => Err(format!("unknown conditioning {s:?} (expected depth or normal)")),
        }
    }
}

/// Depth (1 nearest, 0 farthest and background) or world-space normals
/// (zero on background) of a view.
pub fn conditioning_image(gbuf: &GBuffer, kind: ConditioningKind) -> LatentGrid {
    match kind {
        ConditioningKind::Depth => {
            let covered = || (0..gbuf.len()).filter(|&p| gbuf.mask[p]).map(|p| gbuf.depth[p]);
            let near = covered().fold(f64::INFINITY, f64::min);
            let far = covered().fold(f64::NEG_INFINITY, f64::max);
            let span = (far - near).max(1e-12);
            let data = (0..gbuf.len())
                .map(|p| if gbuf.mask[p] { (1.0 - (gbuf.depth[p] - near) / span) as f32 } else { 0.0 })
                .collect();
            LatentGrid::from_vec(gbuf.width, gbuf.height, 1, GridRole::Rgb, data).expect("sized")
        }
        ConditioningKind::Normal => {
            let data = (0..gbuf.len())
                .flat_map(|p| {
                    let n = if gbuf.mask[p] { gbuf.normal[p] } else { Default::default() };
                    [n.x as f32, n.y as f32, n.z as f32]
                })
                .collect();
            LatentGrid::from_vec(gbuf.width, gbuf.height, 3, GridRole::Rgb, data).expect("sized")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewRequest {
    pub index: usize,
    pub prompt: String,
    pub latent: LatentGrid,
    pub conditioning: Option<LatentGrid>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeRequest {
    pub version: u32,
    pub op: BridgeOp,
    pub t: usize,
    pub alpha_bar: f64,
    pub conditioning: ConditioningKind,
    pub views: Vec<ViewRequest>,
    pub plan: Option<AttentionPlan>,
}

fn grid_tensor(name: String, g: &LatentGrid) -> Tensor {
    Tensor::new(name, vec![g.height, g.width, g.channels], g.data.clone())
}

fn tensor_grid(t: &Tensor, role: GridRole) -> Result<LatentGrid, WireError> {
    let [h, w, c] = t.dims[..] else {
        return Err(WireError::Malformed(format!("tensor {} is not 3-d", t.name)));
    };
    LatentGrid::from_vec(w, h, c, role, t.data.clone()).map_err(|e| WireError::Malformed(e.to_string()))
}

impl BridgeRequest {
    pub fn validate(&self) -> Result<(), WireError> {
        let Some(first) = self.views.first() else {
            return Err(WireError::Malformed("request has no views".into()));
        };
        for v in &self.views {
            if !v.latent.same_shape(&first.latent) {
                return Err(WireError::Malformed(format!("view {} latent shape differs", v.index)));
            }
            if self.op == BridgeOp::PredictNoise && v.prompt.is_empty() {
                return Err(WireError::Malformed(format!("view {} has an empty prompt", v.index)));
            }
        }
        Ok(())
    }

    pub fn to_frame(&self) -> Result<Frame, WireError> {
        self.validate()?;
        let mut f = Frame::default();
        f.push("version", self.version);
        f.push("op", self.op.as_str());
        f.push("t", self.t);
        f.push("alpha_bar", self.alpha_bar);
        f.push("conditioning", self.conditioning.as_str());
        f.push("views", self.views.len());
        for (i, v) in self.views.iter().enumerate() {
            f.push(&format!("view.{i}.index"), v.index);
            f.push(&format!("view.{i}.prompt"), &v.prompt);
            f.tensors.push(grid_tensor(format!("latent.{i}"), &v.latent));
            if let Some(c) = &v.conditioning {
                f.tensors.push(grid_tensor(format!("cond.{i}"), c));
            }
        }
        if let Some(plan) = &self.plan {
            f.push("plan.beta", plan.beta);
            f.push("plan.t_ref", plan.t_ref);
            f.push("plan.reference", plan.reference);
            for (i, s) in plan.sources.iter().enumerate() {
                let s: Vec<String> = s.iter().map(usize::to_string).collect();
                f.push(&format!("plan.sources.{i}"), s.join(","));
            }
        }
        Ok(f)
    }

    pub fn from_frame(f: &Frame) -> Result<Self, WireError> {
        let n: usize = f.parse("views")?;
        let views = (0..n)
            .map(|i| {
                let latent = f
                    .tensor(&format!("latent.{i}"))
                    .ok_or_else(|| WireError::Malformed(format!("missing latent.{i}")))?;
                Ok(ViewRequest {
                    index: f.parse(&format!("view.{i}.index"))?,
                    prompt: f.require(&format!("view.{i}.prompt"))?.to_string(),
                    latent: tensor_grid(latent, GridRole::ViewLatent)?,
                    conditioning: f.tensor(&format!("cond.{i}")).map(|t| tensor_grid(t, GridRole::Rgb)).transpose()?,
                })
            })
            .collect::<Result<Vec<_>, WireError>>()?;
        let plan = if f.get("plan.beta").is_some() {
            let sources = (0..n)
                .map(|i| {
                    let raw = f.require(&format!("plan.sources.{i}"))?;
                    raw.split(',')
                        .map(|s| s.parse().map_err(|_| WireError::Malformed(format!("plan.sources.{i}: {raw:?}"))))
                        .collect()
                })
                .collect::<Result<_, WireError>>()?;
            Some(AttentionPlan {
                sources,
                reference: f.parse("plan.reference")?,
                beta: f.parse("plan.beta")?,
                t_ref: f.parse("plan.t_ref")?,
            })
        } else {
            None
        };
        let req = Self {
            version: f.parse("version")?,
            op: BridgeOp::parse(f.require("op")?)?,
            t: f.parse("t")?,
            alpha_bar: f.parse("alpha_bar")?,
            conditioning: f.require("conditioning")?.parse().map_err(WireError::Malformed)?,
            views,
            plan,
        };
        req.validate()?;
        Ok(req)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BridgeResponse {
    Ok(Vec<LatentGrid>),
    Error(String),
}

impl BridgeResponse {
    pub fn to_frame(&self) -> Frame {
        let mut f = Frame::default();
        match self {
            BridgeResponse::Ok(grids) => {
                f.push("status", "ok");
                f.push("views", grids.len());
                for (i, g) in grids.iter().enumerate() {
                    f.tensors.push(grid_tensor(format!("out.{i}"), g));
                }
            }
            BridgeResponse::Error(msg) => {
                f.push("status", "error");
                f.push("error", msg);
            }
        }
        f
    }

    pub fn from_frame(f: &Frame, role: GridRole) -> Result<Self, WireError> {
        match f.require("status")? {
            "ok" => {
                let n: usize = f.parse("views")?;
                let grids = (0..n)
                    .map(|i| {
                        let t = f
                            .tensor(&format!("out.{i}"))
                            .ok_or_else(|| WireError::Malformed(format!("missing out.{i}")))?;
                        tensor_grid(t, role)
                    })
                    .collect::<Result<_, _>>()?;
                Ok(BridgeResponse::Ok(grids))
            }
            "error" => Ok(BridgeResponse::Error(f.get("error").unwrap_or("unspecified").to_string())),
            other => Err(WireError::Malformed(format!("unknown status {other:?}"))),
        }
    }
}

/// Forwards noise prediction and decoding to a bridge process over TCP,
/// one connection per batch.
#[derive(Debug, Clone)]
pub struct BridgePredictor {
    pub address: String,
    pub prompt: String,
    pub conditioning: ConditioningKind,
    pub timeout: Option<Duration>,
}

impl BridgePredictor {
    pub fn new(address: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            address: address.into(),
            prompt: prompt.into(),
            conditioning: ConditioningKind::Depth,
            timeout: Some(Duration::from_secs(600)),
        }
    }

    pub fn call(&self, req: &BridgeRequest, role: GridRole) -> Result<Vec<LatentGrid>, PredictError> {
        let err = |e: WireError| PredictError::Bridge(e.to_string());
        let frame = req.to_frame().map_err(err)?;
        let stream = TcpStream::connect(&self.address)
            .map_err(|e| PredictError::Bridge(format!("connect {}: {e}", self.address)))?;
        stream.set_read_timeout(self.timeout).map_err(|e| err(e.into()))?;
        frame.write_to(&stream).map_err(err)?;
        let reply = Frame::read_from(&stream).map_err(err)?;
        match BridgeResponse::from_frame(&reply, role).map_err(err)? {
            BridgeResponse::Ok(grids) if grids.len() == req.views.len() => Ok(grids),
            BridgeResponse::Ok(grids) => Err(PredictError::BatchSize {
                got: grids.len(),
                expected: req.views.len(),
            }),
            BridgeResponse::Error(msg) => Err(PredictError::Bridge(msg)),
        }
    }
}

impl NoisePredictor for BridgePredictor {
    fn predict(&self, batch: &PredictBatch<'_>) -> Result<Vec<LatentGrid>, PredictError> {
        let views = batch
            .latents
            .iter()
            .enumerate()
            .map(|(i, z)| ViewRequest {
                index: i,
                prompt: directional_prompt(&self.prompt, &batch.cameras[i]),
                latent: z.clone(),
                conditioning: Some(conditioning_image(&batch.gbuffers[i], self.conditioning)),
            })
            .collect();
        let req = BridgeRequest {
            version: PROTOCOL_VERSION,
            op: BridgeOp::PredictNoise,
            t: batch.t,
            alpha_bar: batch.alpha_bar,
            conditioning: self.conditioning,
            views,
            plan: Some(batch.plan.clone()),
        };
        let out = self.call(&req, GridRole::ViewLatent)?;
        for (view, (o, z)) in out.iter().zip(batch.latents).enumerate() {
            if !o.same_shape(z) {
                return Err(PredictError::View {
                    view,
                    msg: "bridge returned a tensor of the wrong shape".into(),
                });
            }
        }
        Ok(out)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            attention_reuse: true,
            decode: true,
        }
    }

    fn decode(&self, latents: &[LatentGrid]) -> Result<Vec<LatentGrid>, PredictError> {
        let req = BridgeRequest {
            version: PROTOCOL_VERSION,
            op: BridgeOp::DecodeLatent,
            t: 0,
            alpha_bar: 1.0,
            conditioning: self.conditioning,
            views: latents
                .iter()
                .enumerate()
                .map(|(index, l)| ViewRequest {
                    index,
                    prompt: String::new(),
                    latent: l.clone(),
                    conditioning: None,
                })
                .collect(),
            plan: None,
        };
        self.call(&req, GridRole::Rgb)
    }
}
