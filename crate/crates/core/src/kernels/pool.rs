use super::FeatureMap;
use crate::error::{Error, Result};

/// Argmax positions recorded by [`maxpool1d`], one per output element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    pub input_length: usize,
    pub argmax: Vec<usize>,
}

/// Max-pooling with window 2, stride 2. A trailing odd element is dropped and
/// ties go to the earlier position.
pub fn maxpool1d(input: &FeatureMap) -> Result<(FeatureMap, PoolIndices)> {
    let len = input.length();
    if len < 2 {
        return Err(Error::Shape(format!("max-pool needs length >= 2, got {len}")));
    }
    let out_len = len / 2;
    let mut out = Vec::with_capacity(input.channels() * out_len);
    let mut argmax = Vec::with_capacity(input.channels() * out_len);
    for c in 0..input.channels() {
        let row = input.row(c);
        for j in 0..out_len {
            let (a, b) = (row[2 * j], row[2 * j + 1]);
            if b > a {
                out.push(b);
                argmax.push(2 * j + 1);
            } else {
                out.push(a);
                argmax.push(2 * j);
            }
        }
    }
    Ok((
        FeatureMap::from_raw(input.channels(), out_len, out),
        PoolIndices {
            input_length: len,
            argmax,
        },
    ))
}

pub fn maxpool1d_backward(grad_out: &FeatureMap, indices: &PoolIndices) -> Result<FeatureMap> {
    let out_len = grad_out.length();
    if indices.argmax.len() != grad_out.channels() * out_len {
        return Err(Error::Shape("pool indices do not match upstream gradient".into()));
    }
    let len = indices.input_length;
    let mut g = vec![0.0; grad_out.channels() * len];
    for (n, (&gv, &src)) in grad_out.values().iter().zip(&indices.argmax).enumerate() {
        let c = n / out_len;
        g[c * len + src] += gv;
    }
    Ok(FeatureMap::from_raw(grad_out.channels(), len, g))
}
