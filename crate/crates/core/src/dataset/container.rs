//! Little-endian binary container for CFR series and datasets.
//!
//! ```text
//! header   "CFRD" | version u16
//! block*   role u8 | dtype u8 | rank u8 | dims u64 x rank | payload (row-major)
//! end      0xFF
//! footer   scale f64 | threshold f64
//! ```
//!
//! dtype 0 is `f64`, dtype 1 is `u64`. Series files store the CFR as a
//! rank-3 `(J, F, 2)` block of real/imaginary parts plus metadata blocks and
//! carry `scale = 1`, `threshold = 0` in the footer.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::DatasetSplit;
use crate::error::{Error, Result};
use crate::sim::{CfrSeries, CfrSnapshot};
use crate::tensor::Tensor4;

pub const MAGIC: &[u8; 4] = b"CFRD";
pub const FORMAT_VERSION: u16 = 1;
const END_TAG: u8 = 0xFF;
const DTYPE_F64: u8 = 0;
const DTYPE_U64: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Role {
    XTrain = 1,
    XTest = 2,
    YPredTrain = 3,
    YPredTest = 4,
    YClsTrain = 5,
    YClsTest = 6,
    /// `(J, F, 2)` CFR values.
    Series = 16,
    /// `[delta_t, band_low_hz, band_high_hz, first_t_index]`.
    SeriesMeta = 17,
    /// `[scenario_fingerprint]`.
    Fingerprint = 18,
}

impl Role {
    fn from_u8(tag: u8) -> Result<Role> {
        Ok(match tag {
            1 => Role::XTrain,
            2 => Role::XTest,
            3 => Role::YPredTrain,
            4 => Role::YPredTest,
            5 => Role::YClsTrain,
            6 => Role::YClsTest,
            16 => Role::Series,
            17 => Role::SeriesMeta,
            18 => Role::Fingerprint,
            other => return Err(Error::format(format!("unknown tensor role {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockData {
    F64(Vec<f64>),
    U64(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub role: Role,
    pub dims: Vec<usize>,
    pub data: BlockData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub blocks: Vec<Block>,
    pub scale: f64,
    pub threshold: f64,
}

impl Container {
    fn take(&mut self, role: Role) -> Result<Block> {
        let idx = self
            .blocks
            .iter()
            .position(|b| b.role == role)
            .ok_or_else(|| Error::format(format!("missing {role:?} block")))?;
        Ok(self.blocks.remove(idx))
    }
}

fn tensor_block(role: Role, t: &Tensor4) -> Block {
    Block {
        role,
        dims: t.dims().to_vec(),
        data: BlockData::F64(t.data().to_vec()),
    }
}

pub fn write_container<W: Write>(w: &mut W, container: &Container) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for block in &container.blocks {
        let (dtype, len) = match &block.data {
            BlockData::F64(v) => (DTYPE_F64, v.len()),
            BlockData::U64(v) => (DTYPE_U64, v.len()),
        };
        if block.dims.iter().product::<usize>() != len || block.dims.len() > u8::MAX as usize {
            return Err(Error::shape(format!("{:?} block dims do not match its data", block.role)));
        }
        w.write_all(&[block.role as u8, dtype, block.dims.len() as u8])?;
        for &d in &block.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        match &block.data {
            BlockData::F64(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))?,
            BlockData::U64(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))?,
        }
    }
    w.write_all(&[END_TAG])?;
    w.write_all(&container.scale.to_le_bytes())?;
    w.write_all(&container.threshold.to_le_bytes())?;
    Ok(())
}

fn read_exact_or_format<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::format(format!("truncated file while reading {what}")),
        _ => Error::Io(e),
    })
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact_or_format(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_payload<R: Read, T>(
    r: &mut R,
    len: usize,
    decode: impl Fn([u8; 8]) -> T,
) -> Result<Vec<T>> {
    const CHUNK: usize = 8192;
    let mut out = Vec::new();
    let mut buf = vec![0u8; CHUNK * 8];
    let mut remaining = len;
    while remaining > 0 {
        let n = remaining.min(CHUNK);
        read_exact_or_format(r, &mut buf[..n * 8], "tensor payload")?;
        out.extend(buf[..n * 8].chunks_exact(8).map(|c| decode(c.try_into().unwrap())));
        remaining -= n;
    }
    Ok(out)
}

pub fn read_container<R: Read>(r: &mut R) -> Result<Container> {
    let mut magic = [0u8; 4];
    read_exact_or_format(r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::format(format!("bad magic {magic:?}, expected \"CFRD\"")));
    }
    let mut version = [0u8; 2];
    read_exact_or_format(r, &mut version, "version")?;
    let version = u16::from_le_bytes(version);
    if version != FORMAT_VERSION {
        return Err(Error::format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }

    let mut blocks = Vec::new();
    loop {
        let mut tag = [0u8; 1];
        read_exact_or_format(r, &mut tag, "block tag")?;
        if tag[0] == END_TAG {
            break;
        }
        let role = Role::from_u8(tag[0])?;
        let mut head = [0u8; 2];
        read_exact_or_format(r, &mut head, "block header")?;
        let [dtype, rank] = head;
        let dims = (0..rank)
            .map(|_| {
                let d = read_u64(r, "dims")?;
                usize::try_from(d).map_err(|_| Error::format("dimension overflows usize"))
            })
            .collect::<Result<Vec<_>>>()?;
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::format("tensor size overflows"))?;
        let data = match dtype {
            DTYPE_F64 => BlockData::F64(read_payload(r, len, f64::from_le_bytes)?),
            DTYPE_U64 => BlockData::U64(read_payload(r, len, u64::from_le_bytes)?),
            other => return Err(Error::format(format!("unknown dtype code {other}"))),
        };
        blocks.push(Block { role, dims, data });
    }
    let scale = f64::from_bits(read_u64(r, "footer")?);
    let threshold = f64::from_bits(read_u64(r, "footer")?);
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing)? {
        0 => Ok(Container { blocks, scale, threshold }),
        _ => Err(Error::format("trailing bytes after footer")),
    }
}

fn block_tensor(block: Block) -> Result<Tensor4> {
    let dims: [usize; 4] = block
        .dims
        .as_slice()
        .try_into()
        .map_err(|_| Error::format(format!("{:?} block must be rank 4", block.role)))?;
    match block.data {
        BlockData::F64(v) => Tensor4::from_vec(dims, v),
        BlockData::U64(_) => Err(Error::format(format!("{:?} block must be f64", block.role))),
    }
}

pub fn write_dataset<W: Write>(w: &mut W, split: &DatasetSplit) -> Result<()> {
    let container = Container {
        blocks: vec![
            tensor_block(Role::XTrain, &split.x_train),
            tensor_block(Role::XTest, &split.x_test),
            tensor_block(Role::YPredTrain, &split.y_pred_train),
            tensor_block(Role::YPredTest, &split.y_pred_test),
            tensor_block(Role::YClsTrain, &split.y_cls_train),
            tensor_block(Role::YClsTest, &split.y_cls_test),
        ],
        scale: split.scale,
        threshold: split.threshold,
    };
    write_container(w, &container)
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<DatasetSplit> {
    let mut c = read_container(r)?;
    let x_train = block_tensor(c.take(Role::XTrain)?)?;
    let y_pred_train = block_tensor(c.take(Role::YPredTrain)?)?;
    let split = DatasetSplit {
        t_len: x_train.dims()[2],
        span_d: y_pred_train.dims()[3],
        x_test: block_tensor(c.take(Role::XTest)?)?,
        y_pred_test: block_tensor(c.take(Role::YPredTest)?)?,
        y_cls_train: block_tensor(c.take(Role::YClsTrain)?)?,
        y_cls_test: block_tensor(c.take(Role::YClsTest)?)?,
        x_train,
        y_pred_train,
        scale: c.scale,
        threshold: c.threshold,
    };
    split.validate()?;
    Ok(split)
}

pub fn write_series<W: Write>(w: &mut W, series: &CfrSeries) -> Result<()> {
    series.validate()?;
    let first = series
        .snapshots
        .first()
        .ok_or_else(|| Error::format("cannot store an empty series"))?;
    let mut values = Vec::with_capacity(series.len() * series.bins() * 2);
    for s in &series.snapshots {
        for h in &s.values {
            values.push(h.re);
            values.push(h.im);
        }
    }
    let container = Container {
        blocks: vec![
            Block {
                role: Role::Series,
                dims: vec![series.len(), series.bins(), 2],
                data: BlockData::F64(values),
            },
            Block {
                role: Role::SeriesMeta,
                dims: vec![4],
                data: BlockData::F64(vec![
                    series.delta_t,
                    first.band_hz.0,
                    first.band_hz.1,
                    first.t_index as f64,
                ]),
            },
            Block {
                role: Role::Fingerprint,
                dims: vec![1],
                data: BlockData::U64(vec![series.scenario_fingerprint]),
            },
        ],
        scale: 1.0,
        threshold: 0.0,
    };
    write_container(w, &container)
}

pub fn read_series<R: Read>(r: &mut R) -> Result<CfrSeries> {
    let mut c = read_container(r)?;
    let values = c.take(Role::Series)?;
    let meta = c.take(Role::SeriesMeta)?;
    let fp = c.take(Role::Fingerprint)?;
    let (BlockData::F64(values_data), [j, f, 2]) = (values.data, values.dims.as_slice()) else {
        return Err(Error::format("series block must be f64 with dims (J, F, 2)"));
    };
    let BlockData::F64(meta) = meta.data else {
        return Err(Error::format("series metadata must be f64"));
    };
    let BlockData::U64(fp) = fp.data else {
        return Err(Error::format("fingerprint must be u64"));
    };
    if meta.len() != 4 || fp.len() != 1 {
        return Err(Error::format("malformed series metadata"));
    }
    let (j, f) = (*j, *f);
    let first_t = meta[3] as usize;
    let snapshots = (0..j)
        .map(|k| CfrSnapshot {
            values: values_data[k * f * 2..(k + 1) * f * 2]
                .chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
            t_index: first_t + k,
            band_hz: (meta[1], meta[2]),
        })
        .collect();
    let series = CfrSeries {
        snapshots,
        delta_t: meta[0],
        scenario_fingerprint: fp[0],
    };
    series.validate()?;
    Ok(series)
}

pub fn save_dataset(split: &DatasetSplit, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, split)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetSplit> {
    read_dataset(&mut BufReader::new(File::open(path)?))
}

pub fn save_series(series: &CfrSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_series(&mut w, series)?;
    w.flush()?;
    Ok(())
}

pub fn load_series(path: impl AsRef<Path>) -> Result<CfrSeries> {
    read_series(&mut BufReader::new(File::open(path)?))
}
