//! Client for the out-of-process model server.
//!
//! Wire format: one JSON object per line over TCP. Requests are
//! `{"id", "cmd", "args"}`, responses `{"id", "ok", "result" | "error"}`.
//! Tensors travel as `{"shape": [...], "data": "<base64 of little-endian f32>"}`.
//! One request is in flight per connection at a time.

use std::any::Any;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::explainers::{Explainer, ExplainerProperties};
use crate::models::{Normalization, Predictor, Randomizable};
use crate::tensor::{ImageTensor, SaliencyMap, Shape};

/// Capabilities reported by the server's `info` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeInfo {
    pub input_shape: [usize; 3],
    pub num_classes: usize,
    pub num_layers: usize,
    pub explainers: Vec<String>,
}

impl BridgeInfo {
    pub fn shape(&self) -> Shape {
        let [c, h, w] = self.input_shape;
        Shape::new(c, h, w)
    }
}

/// Encodes values as a shaped base64 tensor. Values are narrowed to `f32`.
pub fn encode_tensor(shape: &[usize], data: &[f64]) -> Value {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for &v in data {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    json!({ "shape": shape, "data": STANDARD.encode(bytes) })
}

pub fn decode_tensor(value: &Value) -> Result<(Vec<usize>, Vec<f64>)> {
    let shape: Vec<usize> = value
        .get("shape")
        .and_then(|s| serde_json::from_value(s.clone()).ok())
        .ok_or_else(|| Error::Bridge("tensor without a valid shape".into()))?;
    let encoded = value
        .get("data")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Bridge("tensor without base64 data".into()))?;
    let bytes = STANDARD
        .decode(encoded)
        .map_err(|e| Error::Bridge(format!("malformed base64 tensor: {e}")))?;
    let expected: usize = shape.iter().product();
    if bytes.len() != expected * 4 {
        return Err(Error::Bridge(format!(
            "tensor of shape {shape:?} carries {} bytes, expected {}",
            bytes.len(),
            expected * 4
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok((shape, data))
}

/// Randomization applied on the server: top `k` layers with `seed`.
/// `None` is the pristine model.
type LayerState = Option<(usize, u64)>;

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
    state: LayerState,
}

impl Connection {
    fn call(&mut self, cmd: &str, args: Value) -> Result<Value> {
        let id = self.next_id;
        self.next_id += 1;
        let mut line = serde_json::to_string(&json!({ "id": id, "cmd": cmd, "args": args }))
            .map_err(|e| Error::Bridge(e.to_string()))?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;

        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(Error::Bridge(format!("server closed the connection during {cmd:?}")));
        }
        let reply: Value = serde_json::from_str(&reply)
            .map_err(|e| Error::Bridge(format!("unparseable response to {cmd:?}: {e}")))?;
        if reply.get("id").and_then(Value::as_u64) != Some(id) {
            return Err(Error::Bridge(format!(
                "response id {:?} does not match request {id}",
                reply.get("id")
            )));
        }
        if reply.get("ok").and_then(Value::as_bool) == Some(true) {
            Ok(reply.get("result").cloned().unwrap_or(Value::Null))
        } else {
            let msg = reply
                .get("error")
                .map(|e| e.as_str().map(str::to_owned).unwrap_or_else(|| e.to_string()))
                .unwrap_or_else(|| "unspecified error".into());
            Err(Error::Bridge(format!("{cmd}: {msg}")))
        }
    }

    /// Brings the server to `want`, replaying reset and randomize as needed.
    fn ensure(&mut self, want: LayerState) -> Result<()> {
        if self.state == want {
            return Ok(());
        }
        self.call("reset", json!({}))?;
        self.state = None;
        if let Some((k, seed)) = want {
            self.call("randomize", json!({ "k": k, "seed": seed }))?;
            self.state = want;
        }
        Ok(())
    }
}

/// A single connection to the server. Requests are serialized.
pub struct BridgeClient {
    conn: Mutex<Connection>,
    info: BridgeInfo,
}

impl BridgeClient {
    pub fn connect(addr: impl ToSocketAddrs, timeout: Option<Duration>) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(timeout)?;
        stream.set_nodelay(true)?;
        let mut conn = Connection {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            next_id: 0,
            state: None,
        };
        let info: BridgeInfo = serde_json::from_value(conn.call("info", json!({}))?)
            .map_err(|e| Error::Bridge(format!("bad info response: {e}")))?;
        // start from pristine weights whatever a previous client left behind
        conn.call("reset", json!({}))?;
        Ok(Self {
            conn: Mutex::new(conn),
            info,
        })
    }

    pub fn info(&self) -> &BridgeInfo {
        &self.info
    }

    fn with_state<T>(&self, state: LayerState, f: impl FnOnce(&mut Connection) -> Result<T>) -> Result<T> {
        let mut conn = self.conn.lock().map_err(|_| Error::Bridge("connection poisoned".into()))?;
        conn.ensure(state)?;
        f(&mut conn)
    }

    fn predict_batch(&self, state: LayerState, images: &[ImageTensor]) -> Result<Vec<Vec<f64>>> {
        let Some(first) = images.first() else {
            return Ok(Vec::new());
        };
        let s = first.shape();
        let mut data = Vec::with_capacity(images.len() * s.len());
        for img in images {
            if img.shape() != s {
                return Err(Error::Input("batch images differ in shape".into()));
            }
            data.extend_from_slice(img.data());
        }
        let args = json!({ "images": encode_tensor(&[images.len(), s.channels, s.height, s.width], &data) });
        let result = self.with_state(state, |c| c.call("predict", args))?;
        let (shape, probs) = decode_tensor(&result)?;
        if shape != [images.len(), self.info.num_classes] {
            return Err(Error::Bridge(format!(
                "predict returned shape {shape:?}, expected [{}, {}]",
                images.len(),
                self.info.num_classes
            )));
        }
        Ok(probs.chunks(self.info.num_classes).map(<[f64]>::to_vec).collect())
    }

    fn explain(&self, state: LayerState, method: &str, image: &ImageTensor, class: usize, seed: u64) -> Result<SaliencyMap> {
        let s = image.shape();
        let args = json!({
            "method": method,
            "image": encode_tensor(&[s.channels, s.height, s.width], image.data()),
            "class": class,
            "seed": seed,
        });
        let result = self.with_state(state, |c| c.call("explain", args))?;
        let (shape, data) = decode_tensor(&result)?;
        if shape != [s.height, s.width] {
            return Err(Error::Bridge(format!(
                "explanation has shape {shape:?}, expected [{}, {}]",
                s.height, s.width
            )));
        }
        SaliencyMap::new(s.height, s.width, data)
    }
}

/// Remote model. Images are normalized (if configured) just before they
/// are sent, so perturbations happen in `[0, 1]` space.
#[derive(Clone)]
pub struct BridgePredictor {
    client: Arc<BridgeClient>,
    normalization: Option<Normalization>,
    state: LayerState,
}

impl BridgePredictor {
    pub fn new(client: Arc<BridgeClient>, normalization: Option<Normalization>) -> Self {
        Self {
            client,
            normalization,
            state: None,
        }
    }

    pub fn info(&self) -> &BridgeInfo {
        self.client.info()
    }

    fn prepare(&self, image: &ImageTensor) -> Result<ImageTensor> {
        crate::models::check_shape(self, image)?;
        match &self.normalization {
            Some(n) => n.apply(image),
            None => Ok(image.clone()),
        }
    }

    pub fn predict_many(&self, images: &[ImageTensor]) -> Result<Vec<Vec<f64>>> {
        let prepared = images.iter().map(|i| self.prepare(i)).collect::<Result<Vec<_>>>()?;
        self.client.predict_batch(self.state, &prepared)
    }
}

impl Predictor for BridgePredictor {
    fn shape(&self) -> Shape {
        self.client.info().shape()
    }

    fn num_classes(&self) -> usize {
        self.client.info().num_classes
    }

    fn predict(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        let mut out = self.predict_many(std::slice::from_ref(image))?;
        Ok(out.remove(0))
    }

    fn concurrent(&self) -> bool {
        false
    }

    fn as_any(&self) -> Option<&dyn Any> {
        Some(self)
    }
}

impl Randomizable for BridgePredictor {
    fn num_layers(&self) -> usize {
        self.client.info().num_layers
    }

    fn randomize_top_layers(&self, k: usize, seed: u64) -> Result<Box<dyn Predictor>> {
        if k > self.num_layers() {
            return Err(Error::Parameter(format!(
                "cannot randomize {k} of {} layers",
                self.num_layers()
            )));
        }
        if self.state.is_some() {
            return Err(Error::Parameter("model is already randomized".into()));
        }
        let mut copy = self.clone();
        copy.state = (k > 0).then_some((k, seed));
        Ok(Box::new(copy))
    }
}

/// Explainer hosted by the server. Only works with a [`BridgePredictor`].
pub struct BridgeExplainer {
    method: String,
}

impl BridgeExplainer {
    pub fn new(method: impl Into<String>) -> Self {
        Self { method: method.into() }
    }
}

impl Explainer for BridgeExplainer {
    fn name(&self) -> &str {
        &self.method
    }

    fn properties(&self) -> ExplainerProperties {
        ExplainerProperties {
            input_dependent: true,
            model_dependent: true,
            class_dependent: true,
            deterministic: false,
        }
    }

    fn explain(&self, model: &dyn Predictor, image: &ImageTensor, class: usize, seed: u64) -> Result<SaliencyMap> {
        let bridge = model
            .as_any()
            .and_then(|m| m.downcast_ref::<BridgePredictor>())
            .ok_or_else(|| {
                Error::Config(format!("bridge explainer {:?} needs a bridge model", self.method))
            })?;
        let prepared = bridge.prepare(image)?;
        bridge
            .client
            .explain(bridge.state, &self.method, &prepared, class, seed)
    }
}
