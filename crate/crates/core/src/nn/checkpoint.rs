//! Checkpoint layout:
//!
//! ```text
//! "SFNET1"                  6 bytes
//! header_len                u32 little-endian
//! header                    UTF-8 JSON {"input": Shape, "layers": [LayerSpec]}
//! parameters                f32 little-endian; per layer, weights then biases
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{LayerSpec, Shape, TinyNet};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"SFNET1";

#[derive(Serialize, Deserialize)]
struct Header {
    input: Shape,
    layers: Vec<LayerSpec>,
}

pub fn write_checkpoint(net: &TinyNet, mut w: impl Write) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        input: net.input_shape(),
        layers: net.specs(),
    })?;
    let mut buf = Vec::with_capacity(10 + header.len() + 4 * net.num_params());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for layer in net.layers() {
        for &v in layer.weights.iter().chain(&layer.bias) {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<TinyNet> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 10 {
        return Err(Error::Truncated(format!("{} bytes is shorter than the preamble", bytes.len())));
    }
    if &bytes[..6] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic { expected: "SFNET1" });
    }
    let header_len = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let header_end = 10usize
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::Truncated("header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[10..header_end])
        .map_err(|e| Error::BadHeader(e.to_string()))?;
    let mut net = TinyNet::new(header.input, &header.layers)?;

    let blob = &bytes[header_end..];
    let expected = 4 * net.num_params();
    if blob.len() < expected {
        return Err(Error::Truncated(format!(
            "parameter blob has {} bytes, expected {expected}",
            blob.len()
        )));
    }
    if blob.len() > expected {
        return Err(Error::BadValue(format!(
            "{} trailing bytes after parameters",
            blob.len() - expected
        )));
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    let mut index = 0;
    for layer in net.layers_mut() {
        for p in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            let v = values.next().expect("length checked");
            if !v.is_finite() {
                return Err(Error::NonFinite(index));
            }
            *p = v as f64;
            index += 1;
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetBuilder;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> TinyNet {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = NetBuilder::new(Shape::image(1, 5, 5))
            .conv2d(2, 3, 1)
            .relu()
            .flatten()
            .dense(4)
            .relu()
            .dense(2)
            .build_random(&mut rng)
            .unwrap();
        net.insert_projection(0, vec![0.6, 0.8].repeat(9), vec![0.1; 18]).unwrap();
        net.quantize_to_f32();
        net
    }

    #[test]
    fn round_trip_after_quantization_is_exact() {
        let net = net();
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        assert_eq!(&buf[..6], CHECKPOINT_MAGIC);
        assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), net);
    }

    #[test]
    fn rejects_corruption() {
        let mut buf = Vec::new();
        write_checkpoint(&net(), &mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(bad.as_slice()), Err(Error::BadMagic { .. })));

        let short = &buf[..buf.len() - 3];
        assert!(matches!(read_checkpoint(short), Err(Error::Truncated(_))));

        let mut nan = buf.clone();
        let n = nan.len();
        nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(read_checkpoint(nan.as_slice()), Err(Error::NonFinite(_))));
    }
}
