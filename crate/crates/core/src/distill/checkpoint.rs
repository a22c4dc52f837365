use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;

use crate::error::{Error, Result};
use crate::nn::{Arch, PolicyConfig, PolicyParams};
use crate::tensor::Tensor;

use super::codec::{Reader, Writer};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CGCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// 64-bit FNV-1a digest.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// A named list of `f64` tensors with a text header, sealed by a checksum.
/// Checkpoints and attention exports share this layout.
pub(crate) fn tensor_table_bytes(tag: &str, header: &str, tensors: &[(String, &Tensor)]) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.str(tag);
    w.str(header);
    w.len(tensors.len());
    for (name, t) in tensors {
        w.str(name);
        w.len(t.shape().len());
        for &d in t.shape() {
            w.len(d);
        }
        w.f64s(t.data());
    }
    let sum = fnv1a(&w.buf);
    w.bytes(&sum.to_le_bytes());
    w.buf
}

pub(crate) struct TensorTable {
    pub tag: String,
    pub header: String,
    pub tensors: Vec<(String, Tensor)>,
}

pub(crate) fn parse_tensor_table(bytes: &[u8]) -> Result<TensorTable> {
    if bytes.len() < 12 {
        return Err(Error::Corruption("file too short".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if fnv1a(body) != stored {
        return Err(Error::Corruption("checksum mismatch".into()));
    }
    let mut r = Reader::new(body);
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Corruption("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Corruption(format!("unsupported version {version}")));
    }
    let tag = r.str()?;
    let header = r.str()?;
    let n = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(n.min(4096));
    for _ in 0..n {
        let name = r.str()?;
        let nd = r.u32()? as usize;
        let shape = (0..nd).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let len = len.ok_or_else(|| Error::Corruption(format!("tensor '{name}' is too large")))?;
        let data = r.f64s(len)?;
        tensors.push((name, Tensor::new(shape, data)?));
    }
    if !r.is_done() {
        return Err(Error::Corruption("trailing bytes before the checksum".into()));
    }
    Ok(TensorTable { tag, header, tensors })
}

pub fn checkpoint_bytes(params: &PolicyParams) -> Vec<u8> {
    let named: Vec<(String, &Tensor)> = params.names.iter().cloned().zip(params.tensors.iter()).collect();
    tensor_table_bytes(params.config.arch.as_str(), &params.config.to_text(), &named)
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<PolicyParams> {
    let table = parse_tensor_table(bytes)?;
    let config = PolicyConfig::from_text(&table.header)?;
    if table.tag != config.arch.as_str() {
        return Err(Error::Corruption(format!("arch tag '{}' disagrees with config '{}'", table.tag, config.arch)));
    }
    let (names, tensors) = table.tensors.into_iter().unzip();
    let params = PolicyParams { config, names, tensors };
    params.check_layout().map_err(|e| Error::Corruption(e.to_string()))?;
    Ok(params)
}

pub fn save_checkpoint(params: &PolicyParams, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyParams> {
    params_from_bytes(&std::fs::read(path)?)
}

/// Loads a checkpoint that must hold a policy of architecture `arch`.
pub fn load_checkpoint_as(path: &Path, arch: Arch) -> Result<PolicyParams> {
    let p = load_checkpoint(path)?;
    if p.config.arch != arch {
        return Err(Error::Config(format!("checkpoint holds a {} policy, expected {arch}", p.config.arch)));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;

    fn params() -> PolicyParams {
        let c = PolicyConfig { embed: 8, attn_hidden: 8, layers: 1, max_nodes: 12, ..PolicyConfig::default() };
        init_params(&c, 4).unwrap()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        let p = params();
        save_checkpoint(&p, &path).unwrap();
        let q = load_checkpoint(&path).unwrap();
        assert_eq!(p.names, q.names);
        for (a, b) in p.tensors.iter().zip(&q.tensors) {
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn truncation_and_bit_flips_are_detected() {
        let b = checkpoint_bytes(&params());
        assert!(matches!(params_from_bytes(&b[..b.len() - 10]), Err(Error::Corruption(_))));
        let mut flipped = b.clone();
        flipped[40] ^= 1;
        assert!(matches!(params_from_bytes(&flipped), Err(Error::Corruption(_))));
    }

    #[test]
    fn wrong_arch_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        save_checkpoint(&params(), &path).unwrap();
        assert!(matches!(load_checkpoint_as(&path, Arch::Mlp), Err(Error::Config(_))));
        assert!(load_checkpoint_as(&path, Arch::Transformer).is_ok());
    }
}
