//! Binary containers for layers and networks.
//!
//! Every container starts with an 8-byte magic, a little-endian `u32` header
//! length and a UTF-8 JSON header. Payloads are little-endian `f64`s.
//! The byte layout is described in `docs/formats.md`.
//!
//! Layer record (`FTLR\x01\0\0\0`): header
//! `{"kind","order","input","output","activation"}`, then each weight matrix
//! column-major in mode order (dense layers have one), then the bias in
//! canonical order.
//!
//! Network container (`FTNW\x01\0\0\0`): header
//! `{"layers":[{"kind","input","output"}…],"boundaries":[{"after","from","to"}…]}`,
//! then one layer record per layer.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::layer::TensorLayer;
use crate::network::{DenseLayer, Layer, Network};
use crate::tensor::{DenseTensor, Matrix, Shape};

pub const LAYER_MAGIC: [u8; 8] = *b"FTLR\x01\0\0\0";
pub const NETWORK_MAGIC: [u8; 8] = *b"FTNW\x01\0\0\0";

const MAX_HEADER: u32 = 1 << 24;
const MAX_VALUES: usize = 1 << 28;

#[derive(Debug, Serialize, Deserialize)]
struct LayerHeader {
    kind: String,
    order: usize,
    input: Vec<usize>,
    output: Vec<usize>,
    activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub kind: String,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

/// A reshape between consecutive layers whose extents differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub after: usize,
    pub from: Vec<usize>,
    pub to: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkManifest {
    pub layers: Vec<LayerSummary>,
    pub boundaries: Vec<Boundary>,
}

impl NetworkManifest {
    pub fn of(net: &Network) -> Self {
        let layers: Vec<LayerSummary> = net
            .layers()
            .iter()
            .map(|l| LayerSummary {
                kind: l.kind().to_string(),
                input: l.input_extents(),
                output: l.output_extents(),
            })
            .collect();
        let boundaries = layers
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].output != w[1].input)
            .map(|(i, w)| Boundary {
                after: i,
                from: w[0].output.clone(),
                to: w[1].input.clone(),
            })
            .collect();
        NetworkManifest { layers, boundaries }
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Length(format!("truncated {what}")),
        _ => Error::io("<stream>", e),
    })
}

fn write_all(w: &mut impl Write, bytes: &[u8]) -> Result<()> {
    w.write_all(bytes).map_err(|e| Error::io("<stream>", e))
}

pub(crate) fn write_header<T: Serialize>(w: &mut impl Write, magic: &[u8; 8], header: &T) -> Result<()> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Format(e.to_string()))?;
    write_all(w, magic)?;
    write_all(w, &(json.len() as u32).to_le_bytes())?;
    write_all(w, &json)
}

pub(crate) fn read_header<T: for<'de> Deserialize<'de>>(
    r: &mut impl Read,
    magic: &[u8; 8],
    what: &str,
) -> Result<T> {
    let mut m = [0u8; 8];
    read_exact(r, &mut m, what)?;
    if &m != magic {
        return Err(Error::Format(format!("bad {what} magic {m:?}")));
    }
    let mut len = [0u8; 4];
    read_exact(r, &mut len, what)?;
    let len = u32::from_le_bytes(len);
    if len > MAX_HEADER {
        return Err(Error::Format(format!("{what} header of {len} bytes is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    read_exact(r, &mut json, what)?;
    serde_json::from_slice(&json).map_err(|e| Error::Format(format!("{what} header: {e}")))
}

fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_all(w, &buf)
}

fn read_f64s(r: &mut impl Read, n: usize, what: &str) -> Result<Vec<f64>> {
    if n > MAX_VALUES {
        return Err(Error::Format(format!("{what} of {n} values is implausible")));
    }
    let mut buf = vec![0u8; n * 8];
    read_exact(r, &mut buf, what)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn write_layer(w: &mut impl Write, layer: &Layer) -> Result<()> {
    let input = layer.input_extents();
    let header = LayerHeader {
        kind: layer.kind().to_string(),
        order: input.len(),
        input,
        output: layer.output_extents(),
        activation: layer.activation(),
    };
    write_header(w, &LAYER_MAGIC, &header)?;
    for block in layer.param_blocks() {
        write_f64s(w, block)?;
    }
    Ok(())
}

pub fn read_layer(r: &mut impl Read) -> Result<Layer> {
    let h: LayerHeader = read_header(r, &LAYER_MAGIC, "layer record")?;
    if h.input.len() != h.order || h.output.len() != h.order {
        return Err(Error::Format(format!(
            "layer header order {} disagrees with extents {:?} → {:?}",
            h.order, h.input, h.output
        )));
    }
    let malformed = |e: Error| Error::Format(format!("layer record: {e}"));
    match h.kind.as_str() {
        "tensor" => {
            Shape::new(h.input.clone()).map_err(malformed)?;
            let bias_shape = Shape::new(h.output.clone()).map_err(malformed)?;
            let mut weights = Vec::with_capacity(h.order);
            for (&i, &j) in h.input.iter().zip(&h.output) {
                let data = read_f64s(r, i.saturating_mul(j), "weight matrix")?;
                weights.push(Matrix::new(j, i, data).map_err(malformed)?);
            }
            let bias = read_f64s(r, bias_shape.numel(), "bias tensor")?;
            let bias = DenseTensor::new(bias_shape, bias).map_err(malformed)?;
            Ok(TensorLayer::new(weights, bias, h.activation)
                .map_err(malformed)?
                .into())
        }
        "dense" => {
            if h.order != 1 {
                return Err(Error::Format("dense layer record must have order 1".into()));
            }
            let (i, j) = (h.input[0], h.output[0]);
            if i == 0 || j == 0 {
                return Err(Error::Format("dense layer with zero width".into()));
            }
            let weight = Matrix::new(j, i, read_f64s(r, i.saturating_mul(j), "weight matrix")?).map_err(malformed)?;
            let bias = read_f64s(r, j, "bias vector")?;
            Ok(DenseLayer::new(weight, bias, h.activation)
                .map_err(malformed)?
                .into())
        }
        other => Err(Error::Format(format!("unknown layer kind `{other}`"))),
    }
}

pub fn write_network(w: &mut impl Write, net: &Network) -> Result<()> {
    write_header(w, &NETWORK_MAGIC, &NetworkManifest::of(net))?;
    for layer in net.layers() {
        write_layer(w, layer)?;
    }
    Ok(())
}

pub fn read_network(r: &mut impl Read) -> Result<Network> {
    let manifest: NetworkManifest = read_header(r, &NETWORK_MAGIC, "network container")?;
    if manifest.layers.is_empty() {
        return Err(Error::Format("network manifest lists no layers".into()));
    }
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for (i, summary) in manifest.layers.iter().enumerate() {
        let layer = read_layer(r)?;
        if layer.kind() != summary.kind
            || layer.input_extents() != summary.input
            || layer.output_extents() != summary.output
        {
            return Err(Error::Format(format!("layer {i} disagrees with the manifest")));
        }
        layers.push(layer);
    }
    let net = Network::new(layers).map_err(|e| Error::Format(format!("network container: {e}")))?;
    if NetworkManifest::of(&net) != manifest {
        return Err(Error::Format("network manifest boundaries are inconsistent".into()));
    }
    Ok(net)
}

impl TensorLayer {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_layer(&mut buf, &Layer::Tensor(self.clone())).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        match read_layer(&mut bytes)? {
            Layer::Tensor(l) => Ok(l),
            Layer::Dense(_) => Err(Error::Format("expected a tensor layer record".into())),
        }
    }
}

impl Network {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_network(&mut buf, self).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        read_network(&mut bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_net(seed: u64) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = TensorLayer::init(&[2, 3], &[2, 2], Activation::LeakyRelu(0.2), &mut rng).unwrap();
        let b = DenseLayer::init(4, 3, Activation::Tanh, &mut rng).unwrap();
        let c = TensorLayer::init(&[3], &[1], Activation::Sigmoid, &mut rng).unwrap();
        Network::new(vec![a.into(), b.into(), c.into()]).unwrap()
    }

    #[test]
    fn layer_byte_layout() {
        let layer = TensorLayer::new(
            vec![Matrix::new(1, 2, vec![1.0, 2.0]).unwrap()],
            DenseTensor::from_vec(vec![1], vec![-0.5]).unwrap(),
            Activation::Sigmoid,
        )
        .unwrap();
        let bytes = layer.to_bytes();
        assert_eq!(&bytes[..8], b"FTLR\x01\0\0\0");
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[12..12 + hlen]).unwrap();
        assert_eq!(
            header,
            r#"{"kind":"tensor","order":1,"input":[2],"output":[1],"activation":"sigmoid"}"#
        );
        let payload = &bytes[12 + hlen..];
        assert_eq!(payload.len(), 24);
        assert_eq!(&payload[..8], &1.0f64.to_le_bytes());
        assert_eq!(&payload[16..], &(-0.5f64).to_le_bytes());
        assert_eq!(TensorLayer::from_bytes(&bytes).unwrap(), layer);
    }

    #[test]
    fn network_manifest_lists_boundaries() {
        let net = sample_net(1);
        let m = NetworkManifest::of(&net);
        assert_eq!(m.layers.len(), 3);
        assert_eq!(
            m.boundaries,
            vec![Boundary { after: 0, from: vec![2, 2], to: vec![4] }]
        );
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = sample_net(2).to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Network::from_bytes(&bad), Err(Error::Format(_))));
        assert!(matches!(
            Network::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Length(_))
        ));
        assert!(matches!(Network::from_bytes(&[]), Err(Error::Length(_))));
    }

    proptest! {
        #[test]
        fn networks_round_trip(seed in any::<u64>()) {
            let net = sample_net(seed);
            prop_assert_eq!(Network::from_bytes(&net.to_bytes()).unwrap(), net);
        }
    }
}
