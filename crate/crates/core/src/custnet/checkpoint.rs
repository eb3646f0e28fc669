//! Single-file model checkpoint.
//!
//! Layout: 8-byte magic, format version (u32 LE), header length (u64 LE),
//! JSON header, then every parameter tensor followed by every batch-norm
//! state tensor as little-endian `f64`, in node order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layers::LayerSpec;
use super::network::{Network, Node, Taps};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CNGCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeHeader {
    name: String,
    spec: LayerSpec,
    inputs: Vec<usize>,
    out_shape: Vec<usize>,
    params: Vec<Vec<usize>>,
    state: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    input_shape: Vec<usize>,
    n_classes: usize,
    rng_seed: u64,
    taps: Taps,
    /// Name of the Grad-CAM target layer, for readers of the header alone.
    gradcam_layer: Option<String>,
    train_config_hash: String,
    run_config_hash: String,
    nodes: Vec<NodeHeader>,
}

/// A network plus the hashes of the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub train_config_hash: String,
    pub run_config_hash: String,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let net = &self.network;
        let header = Header {
            input_shape: net.input_shape.clone(),
            n_classes: net.n_classes,
            rng_seed: net.rng_seed,
            taps: net.taps,
            gradcam_layer: net.taps.gradcam.map(|id| net.nodes[id].name.clone()),
            train_config_hash: self.train_config_hash.clone(),
            run_config_hash: self.run_config_hash.clone(),
            nodes: net
                .nodes
                .iter()
                .map(|n| NodeHeader {
                    name: n.name.clone(),
                    spec: n.spec.clone(),
                    inputs: n.inputs.clone(),
                    out_shape: n.out_shape.clone(),
                    params: n.params.iter().map(|t| t.shape.clone()).collect(),
                    state: n.state.iter().map(|t| t.shape.clone()).collect(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in net.nodes.iter().flat_map(|n| &n.params).chain(net.nodes.iter().flat_map(|n| &n.state)) {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("checkpoint: {m}"));
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic header"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = bytes.get(20..20 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body)?;
        let mut blob = &bytes[20 + hlen..];
        let mut take = |shape: &[usize]| -> Result<Tensor> {
            let n: usize = shape.iter().product();
            if blob.len() < n * 8 {
                return Err(bad("truncated tensor data"));
            }
            let data = blob[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            blob = &blob[n * 8..];
            Tensor::new(shape.to_vec(), data)
        };
        let mut params = Vec::new();
        for n in &header.nodes {
            params.push(n.params.iter().map(|s| take(s)).collect::<Result<Vec<_>>>()?);
        }
        let mut states = Vec::new();
        for n in &header.nodes {
            states.push(n.state.iter().map(|s| take(s)).collect::<Result<Vec<_>>>()?);
        }
        if !blob.is_empty() {
            return Err(bad("trailing bytes"));
        }
        let nodes = header
            .nodes
            .into_iter()
            .zip(params.into_iter().zip(states))
            .map(|(h, (params, state))| Node {
                name: h.name,
                spec: h.spec,
                inputs: h.inputs,
                out_shape: h.out_shape,
                params,
                state,
            })
            .collect();
        let network = Network {
            nodes,
            input_shape: header.input_shape,
            n_classes: header.n_classes,
            rng_seed: header.rng_seed,
            taps: header.taps,
        };
        network.check_shapes()?;
        Ok(Checkpoint {
            network,
            train_config_hash: header.train_config_hash,
            run_config_hash: header.run_config_hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// SHA-256 over the architecture and every parameter and state value.
/// Identifies a trained network independently of the config hashes.
pub fn network_fingerprint(net: &Network) -> String {
    let ck = Checkpoint {
        network: net.clone(),
        train_config_hash: String::new(),
        run_config_hash: String::new(),
    };
    let bytes = ck.to_bytes().expect("network header serializes");
    hex(&Sha256::digest(&bytes))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::custnet::build::{build_custnet, CustNetConfig};

    #[test]
    fn round_trip_is_exact() {
        let net = build_custnet(&CustNetConfig::scaled(16, 16, 1)).unwrap();
        let ck = Checkpoint {
            network: net,
            train_config_hash: "abc".into(),
            run_config_hash: "def".into(),
        };
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let net = build_custnet(&CustNetConfig::scaled(16, 16, 1)).unwrap();
        let ck = Checkpoint {
            network: net,
            train_config_hash: String::new(),
            run_config_hash: String::new(),
        };
        let mut bytes = ck.to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        let mut net = build_custnet(&CustNetConfig::scaled(16, 16, 1)).unwrap();
        let a = network_fingerprint(&net);
        assert_eq!(a, network_fingerprint(&net));
        net.nodes[1].params[0].data[0] += 1e-12;
        assert_ne!(a, network_fingerprint(&net));
    }
}
