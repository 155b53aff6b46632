//! Checkpoint files: magic `SYMNAVCK`, the variant tag, a config hash, the
//! config text and then every parameter tensor in declaration order.

use std::io::{Read, Write};

use sha2::{Digest, Sha256};
use symnav_tensor::io::{read_tensor, write_tensor};

use crate::error::NnError;
use crate::network::{GlobalPolicyNetwork, ModelVariant, NetConfig};

pub const MAGIC: &[u8; 8] = b"SYMNAVCK";

/// First eight bytes of the SHA-256 of the config text, little-endian.
pub fn config_hash(config: &NetConfig) -> u64 {
    let digest = Sha256::digest(config.to_text().as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R, limit: usize) -> Result<String, NnError> {
    let n = read_u32(r)? as usize;
    if n > limit {
        return Err(NnError::Checkpoint(format!("string of {n} bytes exceeds {limit}")));
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| NnError::Checkpoint("header text is not UTF-8".into()))
}

pub fn save_checkpoint<W: Write>(w: &mut W, net: &GlobalPolicyNetwork) -> Result<(), NnError> {
    w.write_all(MAGIC)?;
    write_str(w, net.variant().tag())?;
    w.write_all(&config_hash(net.config()).to_le_bytes())?;
    write_str(w, &net.config().to_text())?;
    w.write_all(&(net.params().len() as u32).to_le_bytes())?;
    for t in net.params().tensors() {
        write_tensor(w, t)?;
    }
    Ok(())
}

pub fn load_checkpoint<R: Read>(r: &mut R) -> Result<GlobalPolicyNetwork, NnError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint(format!("bad magic {magic:?}")));
    }
    let variant: ModelVariant = read_str(r, 64)?.parse()?;
    let mut hb = [0u8; 8];
    r.read_exact(&mut hb)?;
    let hash = u64::from_le_bytes(hb);
    let text = read_str(r, 1 << 16)?;
    let mut config = NetConfig::default();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| NnError::Checkpoint(format!("config line {line:?} lacks '='")))?;
        if !config.apply_pair(k.trim(), v.trim())? {
            return Err(NnError::Checkpoint(format!("unknown config key {k:?}")));
        }
    }
    if config_hash(&config) != hash {
        return Err(NnError::Checkpoint("config hash does not match config text".into()));
    }
    let mut net = GlobalPolicyNetwork::new(variant, config, 0)?;
    let count = read_u32(r)? as usize;
    if count != net.params().len() {
        return Err(NnError::Checkpoint(format!(
            "{count} tensors stored, architecture has {}",
            net.params().len()
        )));
    }
    let ids: Vec<_> = net.params().ids().collect();
    for id in ids {
        let t = read_tensor(r)?;
        net.params_mut()
            .set(id, t)
            .map_err(|e| NnError::Checkpoint(format!("parameter {}: {e}", id.index())))?;
    }
    Ok(net)
}

/// Loads and checks that the stored variant is `expected`.
pub fn load_checkpoint_as<R: Read>(r: &mut R, expected: ModelVariant) -> Result<GlobalPolicyNetwork, NnError> {
    let net = load_checkpoint(r)?;
    if net.variant() != expected {
        return Err(NnError::VariantMismatch {
            expected: expected.tag().into(),
            found: net.variant().tag().into(),
        });
    }
    Ok(net)
}
