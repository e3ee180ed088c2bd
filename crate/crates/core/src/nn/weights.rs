use super::{NnError, Tensor};

const MAGIC: &[u8; 4] = b"GGRW";

/// Named tensors in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightBundle {
    entries: Vec<(String, Tensor)>,
}

impl WeightBundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a tensor. Replacing keeps the original position.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = t,
            None => self.entries.push((name, t)),
        }
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        let i = self.entries.iter().position(|(n, _)| n == name)?;
        Some(self.entries.remove(i).1)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Serializes to the little-endian `GGRW` layout: magic, u32 tensor count,
/// then per tensor a u16 name length, the UTF-8 name, a u8 rank, u32 dims
/// and the f32 payload.
pub fn write_weights(bundle: &WeightBundle) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(bundle.len() as u32).to_le_bytes());
    for (name, t) in bundle.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| NnError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_weights(data: &[u8]) -> Result<WeightBundle, NnError> {
    let mut r = Reader { data, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(NnError::Format("bad magic".into()));
    }
    let count = r.u32()?;
    let mut bundle = WeightBundle::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| NnError::Format("tensor name is not UTF-8".into()))?
            .to_string();
        if bundle.get(&name).is_some() {
            return Err(NnError::Format(format!("duplicate tensor `{name}`")));
        }
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let payload = r.take(n.checked_mul(4).ok_or_else(|| NnError::Format("tensor too large".into()))?)?;
        let values: Vec<f32> = payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NnError::Format(format!("tensor `{name}` holds non-finite values")));
        }
        bundle.insert(name, Tensor::new(shape, values)?);
    }
    if r.pos != data.len() {
        return Err(NnError::Format(format!("{} trailing bytes", data.len() - r.pos)));
    }
    Ok(bundle)
}
