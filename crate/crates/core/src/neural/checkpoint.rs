//! Network checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! [8]  magic "OXQNET01"
//! u32  input_dim
//! u32  hidden_layers
//! u32  hidden_width
//! u32  output_dim
//! f64  leaky_slope
//! u64  parameter count P
//! P x f64 parameters, layer by layer: fan_in x fan_out weights (row-major), then biases
//! ```
//!
//! `save_network` also writes a `<path>.cfg` text sidecar with the same configuration.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{NetConfig, QNetwork};
use crate::error::{Error, Result};

pub const NETWORK_MAGIC: &[u8; 8] = b"OXQNET01";

pub fn write_network<W: Write>(w: &mut W, net: &QNetwork) -> Result<()> {
    let cfg = net.config();
    w.write_all(NETWORK_MAGIC)?;
    for dim in [cfg.input_dim, cfg.hidden_layers, cfg.hidden_width, cfg.output_dim] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    w.write_all(&cfg.leaky_slope.to_le_bytes())?;
    w.write_all(&(net.param_count() as u64).to_le_bytes())?;
    for p in net.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_network<R: Read>(r: &mut R) -> Result<QNetwork> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != NETWORK_MAGIC {
        return Err(Error::Format("not a network checkpoint (bad magic)".into()));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = read_u32(r)? as usize;
    }
    let leaky_slope = read_f64(r)?;
    let config = NetConfig {
        input_dim: dims[0],
        hidden_layers: dims[1],
        hidden_width: dims[2],
        output_dim: dims[3],
        leaky_slope,
    };
    config.validate()?;
    let count = read_u64(r)? as usize;
    if count != config.param_count() {
        return Err(Error::Format(format!(
            "checkpoint declares {count} parameters, configuration needs {}",
            config.param_count()
        )));
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        params.push(read_f64(r)?);
    }
    QNetwork::from_params(config, params)
}

pub fn sidecar_text(cfg: &NetConfig) -> String {
    format!(
        "format = OXQNET01\ninput_dim = {}\nhidden_layers = {}\nhidden_width = {}\noutput_dim = {}\nleaky_slope = {}\nparam_count = {}\n",
        cfg.input_dim,
        cfg.hidden_layers,
        cfg.hidden_width,
        cfg.output_dim,
        cfg.leaky_slope,
        cfg.param_count()
    )
}

pub fn save_network(path: &Path, net: &QNetwork) -> Result<()> {
    let mut buf = Vec::new();
    write_network(&mut buf, net)?;
    fs::write(path, buf)?;
    fs::write(sidecar_path(path), sidecar_text(net.config()))?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<QNetwork> {
    let bytes = fs::read(path)?;
    read_network(&mut bytes.as_slice())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".cfg");
    name.into()
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = QNetwork::new(NetConfig::q_network(4), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let mut buf = Vec::new();
        write_network(&mut buf, &net).unwrap();
        assert_eq!(buf.len(), 8 + 16 + 8 + 8 + 8 * 3901);
        let back = read_network(&mut buf.as_slice()).unwrap();
        assert!(net
            .params()
            .iter()
            .zip(back.params())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(net.config(), back.config());
    }

    #[test]
    fn header_layout() {
        let net = QNetwork::zeros(NetConfig::q_network(3)).unwrap();
        let mut buf = Vec::new();
        write_network(&mut buf, &net).unwrap();
        assert_eq!(&buf[..8], b"OXQNET01");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 5);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 30);
        assert_eq!(u32::from_le_bytes(buf[20..24].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 0.01);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let net = QNetwork::zeros(NetConfig::q_network(3)).unwrap();
        let mut buf = Vec::new();
        write_network(&mut buf, &net).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_network(&mut bad.as_slice()), Err(Error::Format(_))));
        let truncated = &buf[..buf.len() - 3];
        assert!(read_network(&mut &truncated[..]).is_err());
    }

    #[test]
    fn file_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("main.qnet");
        let net = QNetwork::new(NetConfig::q_network(3), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        save_network(&path, &net).unwrap();
        assert_eq!(load_network(&path).unwrap(), net);
        let side = std::fs::read_to_string(sidecar_path(&path)).unwrap();
        assert!(side.contains("hidden_width = 30"));
    }
}
