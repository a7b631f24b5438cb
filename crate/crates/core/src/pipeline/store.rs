//! SBWD: extracted descriptors for a whole dataset in one binary artifact.

use crate::artifact::{ArtifactMeta, Reader, Writer};
use crate::error::{Error, Result};
use crate::sift::{Descriptor, DescriptorSet, DESCRIPTOR_LEN};

const SBWD_MAGIC: &[u8; 4] = b"SBWD";

pub fn descriptors_to_bytes(sets: &[DescriptorSet], meta: &ArtifactMeta) -> Vec<u8> {
    let mut w = Writer::new(SBWD_MAGIC);
    w.u64(sets.len() as u64);
    for s in sets {
        w.str(&s.image_id).u64(s.len() as u64);
        for d in &s.descriptors {
            w.f64s(d.as_slice());
        }
    }
    w.finish(meta)
}

pub fn descriptors_from_bytes(bytes: &[u8]) -> Result<(Vec<DescriptorSet>, ArtifactMeta)> {
    let mut r = Reader::new(bytes, SBWD_MAGIC, "descriptor bundle")?;
    let n = r.u64()? as usize;
    let mut sets = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let id = r.str()?;
        let count = r.u64()? as usize;
        let mut descs = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let v: Box<[f64; DESCRIPTOR_LEN]> = r
                .f64s(DESCRIPTOR_LEN)?
                .into_boxed_slice()
                .try_into()
                .map_err(|_| Error::artifact("descriptor bundle", "short descriptor"))?;
            descs.push(Descriptor::from_normalized(v));
        }
        sets.push(DescriptorSet::new(id, descs));
    }
    Ok((sets, r.finish()?))
}
