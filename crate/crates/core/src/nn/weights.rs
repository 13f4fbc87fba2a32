//! `CNNW` weight files: `"CNNW" | version u16 | layer count u8`, then per
//! layer `in, out, k_f, k_t, dil_f, dil_t` as u32, activation u8, time
//! padding u8, weights and biases as f64. All little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::{Activation, ConvLayer, ConvLayerSpec, TimePadding};
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"CNNW";
pub const WEIGHTS_VERSION: u16 = 1;

fn u32_of(v: usize) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::format(format!("{v} does not fit in u32")))
}

pub fn write_weights<W: Write>(w: &mut W, layers: &[ConvLayer]) -> Result<()> {
    let count = u8::try_from(layers.len()).map_err(|_| Error::format("too many layers"))?;
    w.write_all(WEIGHTS_MAGIC)?;
    w.write_all(&WEIGHTS_VERSION.to_le_bytes())?;
    w.write_all(&[count])?;
    for layer in layers {
        let s = &layer.spec;
        for v in [
            s.in_channels,
            s.out_channels,
            s.kernel.0,
            s.kernel.1,
            s.dilation.0,
            s.dilation.1,
        ] {
            w.write_all(&u32_of(v)?)?;
        }
        let padding = match s.time_padding {
            TimePadding::Causal => 0u8,
            TimePadding::Valid => 1u8,
        };
        w.write_all(&[s.activation.code(), padding])?;
        for x in layer.weights.iter().chain(&layer.bias) {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn fill<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::format("truncated weight file"),
        _ => Error::Io(e),
    })
}

pub fn read_weights<R: Read>(r: &mut R) -> Result<Vec<ConvLayer>> {
    let mut head = [0u8; 7];
    fill(r, &mut head)?;
    if &head[..4] != WEIGHTS_MAGIC {
        return Err(Error::format("bad magic, expected \"CNNW\""));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != WEIGHTS_VERSION {
        return Err(Error::format(format!("unsupported weight file version {version}")));
    }
    let mut layers = Vec::with_capacity(head[6] as usize);
    for _ in 0..head[6] {
        let mut fields = [0u8; 26];
        fill(r, &mut fields)?;
        let u = |i: usize| u32::from_le_bytes(fields[4 * i..4 * i + 4].try_into().unwrap()) as usize;
        let activation = Activation::from_code(fields[24])
            .ok_or_else(|| Error::format(format!("unknown activation code {}", fields[24])))?;
        let time_padding = match fields[25] {
            0 => TimePadding::Causal,
            1 => TimePadding::Valid,
            other => return Err(Error::format(format!("unknown padding code {other}"))),
        };
        let spec = ConvLayerSpec {
            in_channels: u(0),
            out_channels: u(1),
            kernel: (u(2), u(3)),
            dilation: (u(4), u(5)),
            activation,
            time_padding,
        };
        spec.validate().map_err(|e| Error::format(e.to_string()))?;
        let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            fill(r, &mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let weights = read_f64s(spec.weight_count())?;
        let bias = read_f64s(spec.out_channels)?;
        layers.push(ConvLayer::from_parts(spec, weights, bias)?);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::format("trailing bytes after last layer"));
    }
    Ok(layers)
}

pub fn save_weights(layers: &[ConvLayer], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_weights(&mut w, layers)?;
    w.flush()?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Vec<ConvLayer>> {
    read_weights(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer() -> ConvLayer {
        let spec = ConvLayerSpec {
            in_channels: 2,
            out_channels: 1,
            kernel: (1, 2),
            dilation: (1, 3),
            activation: Activation::Sigmoid,
            time_padding: TimePadding::Valid,
        };
        ConvLayer::from_parts(spec, vec![0.5, -1.0, 2.0, 1e-300], vec![-0.0]).unwrap()
    }

    #[test]
    fn layout_and_round_trip() {
        let mut buf = Vec::new();
        write_weights(&mut buf, &[layer()]).unwrap();
        assert_eq!(&buf[..7], b"CNNW\x01\x00\x01");
        assert_eq!(buf.len(), 7 + 26 + 5 * 8);
        let back = read_weights(&mut buf.as_slice()).unwrap();
        assert_eq!(back, vec![layer()]);
        assert_eq!(back[0].bias[0].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn corrupt_files() {
        let mut buf = Vec::new();
        write_weights(&mut buf, &[layer()]).unwrap();
        let mut bad = buf.clone();
        bad[1] = b'X';
        assert!(matches!(read_weights(&mut bad.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_weights(&mut &buf[..buf.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(read_weights(&mut &[][..]), Err(Error::Format(_))));
    }
}
