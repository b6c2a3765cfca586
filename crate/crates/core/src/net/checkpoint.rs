//! Versioned binary checkpoints: magic bytes, architecture descriptor,
//! then little-endian 64-bit floats for the flat parameter vector.

use std::io::Write;
use std::path::Path;

use super::{Activation, LayerSpec, Network, NetworkConfig, ParamVector};
use crate::io::IoError;
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"FAECKPT1";

const TAG_DENSE: u8 = 1;
const TAG_CONV: u8 = 2;
const TAG_ACT: u8 = 3;

fn act_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Sigmoid => 2,
        Activation::Identity => 3,
    }
}

fn act_from_code(c: u8) -> Option<Activation> {
    Some(match c {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        2 => Activation::Sigmoid,
        3 => Activation::Identity,
        _ => return None,
    })
}

pub fn write_checkpoint<S: Scalar>(
    path: &Path,
    net: &Network,
    params: &ParamVector<S>,
) -> Result<(), IoError> {
    let cfg = net.config();
    let mut buf = Vec::with_capacity(64 + params.len() * 8);
    buf.extend_from_slice(MAGIC);
    let (h, w, c) = cfg.input;
    for v in [h as u32, w as u32, c as u32, cfg.layers.len() as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for layer in &cfg.layers {
        match *layer {
            LayerSpec::Dense { out } => {
                buf.push(TAG_DENSE);
                buf.extend_from_slice(&(out as u32).to_le_bytes());
            }
            LayerSpec::Conv { out_channels, kernel, stride, pad } => {
                buf.push(TAG_CONV);
                for v in [out_channels as u32, kernel as u32, stride as u32, pad as u32] {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            LayerSpec::Activation(a) => {
                buf.push(TAG_ACT);
                buf.push(act_code(a));
            }
        }
    }
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for &v in params.values() {
        buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<S: Scalar>(path: &Path) -> Result<(Network, ParamVector<S>), IoError> {
    let bytes = std::fs::read(path)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], IoError> {
        if bytes.len() < *pos + n {
            return Err(IoError::format(path, "truncated checkpoint"));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 8)? != MAGIC {
        return Err(IoError::format(path, "bad magic"));
    }
    let read_u32 = |pos: &mut usize| -> Result<u32, IoError> {
        let s = take(pos, 4)?;
        Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    };
    let h = read_u32(&mut pos)? as usize;
    let w = read_u32(&mut pos)? as usize;
    let c = read_u32(&mut pos)? as usize;
    let n_layers = read_u32(&mut pos)? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let tag = take(&mut pos, 1)?[0];
        match tag {
            TAG_DENSE => {
                let out = read_u32(&mut pos)? as usize;
                layers.push(LayerSpec::Dense { out });
            }
            TAG_CONV => {
                let out_channels = read_u32(&mut pos)? as usize;
                let kernel = read_u32(&mut pos)? as usize;
                let stride = read_u32(&mut pos)? as usize;
                let pad = read_u32(&mut pos)? as usize;
                layers.push(LayerSpec::Conv { out_channels, kernel, stride, pad });
            }
            TAG_ACT => {
                let code = take(&mut pos, 1)?[0];
                let act = act_from_code(code)
                    .ok_or_else(|| IoError::format(path, format!("bad activation code {code}")))?;
                layers.push(LayerSpec::Activation(act));
            }
            other => return Err(IoError::format(path, format!("bad layer tag {other}"))),
        }
    }
    let net = Network::new(NetworkConfig { input: (h, w, c), layers })
        .map_err(|e| IoError::format(path, e.to_string()))?;
    let plen = take(&mut pos, 8)?;
    let plen = u64::from_le_bytes(plen.try_into().expect("8 bytes")) as usize;
    if plen != net.param_len() {
        return Err(IoError::format(
            path,
            format!("parameter count {plen} does not match architecture ({})", net.param_len()),
        ));
    }
    let mut values = Vec::with_capacity(plen);
    for _ in 0..plen {
        let s = take(&mut pos, 8)?;
        values.push(S::cst(f64::from_le_bytes(s.try_into().expect("8 bytes"))));
    }
    let params = ParamVector::from_values(values)
        .map_err(|_| IoError::format(path, "non-finite parameter"))?;
    Ok((net, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, NetworkConfig};
    use crate::rng::Seeder;

    #[test]
    fn checkpoint_roundtrip_and_byte_stability() {
        let net = Network::new(NetworkConfig::conv_stack(
            (8, 8, 1),
            &[4],
            3,
            Activation::Tanh,
            Activation::Identity,
        ))
        .unwrap();
        let params: ParamVector<f64> = net.init_params(&mut Seeder::new(3).stream("init"));
        let dir = std::env::temp_dir().join("fae-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("a.ckpt");
        let p2 = dir.join("b.ckpt");
        write_checkpoint(&p1, &net, &params).unwrap();
        write_checkpoint(&p2, &net, &params).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let (net2, params2) = read_checkpoint::<f64>(&p1).unwrap();
        assert_eq!(net.config(), net2.config());
        assert_eq!(params.values(), params2.values());
    }

    #[test]
    fn rejects_corrupted_files() {
        let dir = std::env::temp_dir().join("fae-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("bad.ckpt");
        std::fs::write(&p, b"NOTMAGIC").unwrap();
        assert!(read_checkpoint::<f64>(&p).is_err());
    }
}
