use super::mlp::{Activation, Layer, Mlp};
use super::vae::VaeSurrogate;
use crate::codec::{ByteReader, ByteWriter};

use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"XFW1";
const MAX_WIDTH: u32 = 1 << 20;

/// Serialises a list of networks as `XFW1`: magic, network count, then per
/// network its layer count and per layer `in, out, activation, weights, bias`.
pub fn encode_networks(nets: &[&Mlp]) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u32(nets.len() as u32);
    for net in nets {
        w.u32(net.layers.len() as u32);
        for l in &net.layers {
            w.u32(l.inputs as u32);
            w.u32(l.outputs as u32);
            w.u8(l.activation.code());
            l.weights.iter().for_each(|&v| w.f64(v));
            l.bias.iter().for_each(|&v| w.f64(v));
        }
    }
    w.into_inner()
}

pub fn decode_networks(bytes: &[u8]) -> Result<Vec<Mlp>> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4)?;
    if magic != MAGIC {
        if magic.starts_with(b"XFW") {
            return Err(Error::VersionMismatch(String::from_utf8_lossy(magic).into_owned()));
        }
        return Err(Error::corrupt("not a weight blob"));
    }
    let count = r.u32()?;
    let mut nets = Vec::new();
    for _ in 0..count {
        let layers = r.u32()?;
        let mut net = Mlp { layers: Vec::new() };
        for _ in 0..layers {
            let (inputs, outputs) = (r.u32()?, r.u32()?);
            if inputs == 0 || outputs == 0 || inputs > MAX_WIDTH || outputs > MAX_WIDTH {
                return Err(Error::corrupt("layer shape out of range"));
            }
            let activation = Activation::from_code(r.u8()?).ok_or_else(|| Error::corrupt("unknown activation"))?;
            let (inputs, outputs) = (inputs as usize, outputs as usize);
            if r.remaining() < 8 * (inputs * outputs + outputs) {
                return Err(Error::corrupt("truncated layer"));
            }
            let mut layer = Layer::zeros(inputs, outputs, activation);
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v = r.f64()?;
            }
            if let Some(prev) = net.layers.last() {
                if prev.outputs != inputs {
                    return Err(Error::corrupt("layer shapes do not compose"));
                }
            }
            net.layers.push(layer);
        }
        if net.layers.is_empty() {
            return Err(Error::corrupt("network without layers"));
        }
        if !net.all_finite() {
            return Err(Error::NonFinite);
        }
        nets.push(net);
    }
    r.finish()?;
    Ok(nets)
}

pub fn save_surrogate(vae: &VaeSurrogate) -> Vec<u8> {
    encode_networks(&[&vae.encoder, &vae.decoder, &vae.scorer])
}

pub fn load_surrogate(bytes: &[u8]) -> Result<VaeSurrogate> {
    let mut nets = decode_networks(bytes)?;
    if nets.len() != 3 {
        return Err(Error::corrupt("surrogate blob must hold three networks"));
    }
    let scorer = nets.pop().unwrap();
    let decoder = nets.pop().unwrap();
    let encoder = nets.pop().unwrap();
    let latent_dim = decoder.input_dim();
    if encoder.output_dim() != 2 * latent_dim || scorer.input_dim() != latent_dim || scorer.output_dim() != 1 {
        return Err(Error::corrupt("surrogate networks do not fit together"));
    }
    Ok(VaeSurrogate { encoder, decoder, scorer, latent_dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn surrogate_round_trip() {
        let vae = VaeSurrogate::new(12, &mut rng::seeded(2));
        let bytes = save_surrogate(&vae);
        assert_eq!(&bytes[..4], b"XFW1");
        assert_eq!(load_surrogate(&bytes).unwrap(), vae);
    }

    #[test]
    fn rejects_bad_blobs() {
        let vae = VaeSurrogate::new(5, &mut rng::seeded(2));
        let mut bytes = save_surrogate(&vae);
        assert!(matches!(load_surrogate(&bytes[..bytes.len() - 3]), Err(Error::Corrupt(_))));
        bytes[3] = b'9';
        assert!(matches!(load_surrogate(&bytes), Err(Error::VersionMismatch(_))));
        assert!(load_surrogate(b"nope").is_err());
        let one = encode_networks(&[&vae.encoder]);
        assert!(load_surrogate(&one).is_err());
        assert_eq!(decode_networks(&one).unwrap()[0], vae.encoder);
    }
}
