//! A small HDF5 reader and writer.
//!
//! Enough of the format to read the point-cloud archives in circulation
//! (written by h5py with default settings) and to write equivalent files:
//!
//! * superblock versions 0 to 3, 8-byte offsets and lengths
//! * version 1 and 2 object headers, including continuation blocks
//! * groups stored as symbol tables (v1 B-tree + local heap) or as compact
//!   link messages; dense link storage is not supported
//! * contiguous, compact and v1-B-tree chunked datasets, with the deflate,
//!   shuffle and fletcher32 filters
//! * little- and big-endian integers of 1 to 8 bytes and IEEE floats
//!
//! The writer always produces superblock 0, a symbol-table root group and
//! contiguous datasets.

use std::fs;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

const SIGNATURE: [u8; 8] = [0x89, b'H', b'D', b'F', b'\r', b'\n', 0x1a, b'\n'];
const UNDEFINED: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum H5Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not an HDF5 file")]
    NotHdf5,
    #[error("unsupported HDF5 feature: {0}")]
    Unsupported(String),
    #[error("corrupt HDF5 structure: {0}")]
    Corrupt(String),
    #[error("no object named {0:?}")]
    NotFound(String),
}

pub type Result<T> = std::result::Result<T, H5Error>;

fn corrupt(msg: impl Into<String>) -> H5Error {
    H5Error::Corrupt(msg.into())
}

/// Bounds-checked little-endian reader over the file image.
#[derive(Clone, Copy)]
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn at(buf: &'a [u8], pos: u64) -> Result<Self> {
        let pos = usize::try_from(pos).map_err(|_| corrupt("address out of range"))?;
        if pos > buf.len() {
            return Err(corrupt(format!("address {pos} past end of file")));
        }
        Ok(Self { buf, pos })
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt(format!("read of {n} bytes at {} runs past end", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn skip(&mut self, n: usize) -> Result<()> {
        self.bytes(n).map(|_| ())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    /// Unsigned integer of `n` bytes (1..=8).
    fn uint(&mut self, n: usize) -> Result<u64> {
        let b = self.bytes(n)?;
        Ok(b.iter()
            .rev()
            .fold(0u64, |acc, &x| (acc << 8) | u64::from(x)))
    }

    fn expect(&mut self, sig: &[u8]) -> Result<()> {
        if self.bytes(sig.len())? == sig {
            Ok(())
        } else {
            Err(corrupt(format!(
                "expected signature {:?} at {}",
                String::from_utf8_lossy(sig),
                self.pos - sig.len()
            )))
        }
    }
}

/// Element type of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    Int {
        size: usize,
        signed: bool,
        big_endian: bool,
    },
    Float {
        size: usize,
        big_endian: bool,
    },
}

impl DataType {
    pub fn size(self) -> usize {
        match self {
            Self::Int { size, .. } | Self::Float { size, .. } => size,
        }
    }
}

#[derive(Debug, Clone)]
enum Layout {
    Compact(Vec<u8>),
    Contiguous { address: u64, size: u64 },
    Chunked { btree: u64, chunk: Vec<u64> },
}

#[derive(Debug, Clone, Copy)]
enum Filter {
    Deflate,
    Shuffle,
    Fletcher32,
}

#[derive(Debug, Default)]
struct Messages {
    shape: Option<Vec<u64>>,
    dtype: Option<DataType>,
    layout: Option<Layout>,
    filters: Vec<Filter>,
    symbol_table: Option<(u64, u64)>,
    links: Vec<(String, u64)>,
    dense_links: bool,
}

/// An HDF5 file held in memory.
pub struct H5File {
    data: Vec<u8>,
    base: u64,
    root: u64,
}

impl H5File {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let mut data = Vec::new();
        fs::File::open(path)?.read_to_end(&mut data)?;
        Self::from_bytes(data)
    }

    pub fn from_bytes(data: Vec<u8>) -> Result<Self> {
        // The superblock may sit at 0, 512, 1024, ...
        let mut at = 0usize;
        loop {
            if at + 8 > data.len() {
                return Err(H5Error::NotHdf5);
            }
            if data[at..at + 8] == SIGNATURE {
                break;
            }
            at = if at == 0 { 512 } else { at * 2 };
        }
        let mut c = Cursor::at(&data, at as u64 + 8)?;
        let version = c.u8()?;
        let (base, root) = match version {
            0 | 1 => {
                c.skip(4)?;
                let (so, sl) = (c.u8()?, c.u8()?);
                check_sizes(so, sl)?;
                c.skip(1 + 2 + 2 + 4)?;
                if version == 1 {
                    c.skip(4)?;
                }
                let base = c.u64()?;
                c.skip(8 * 3)?;
                // root symbol table entry: name offset, then header address
                c.skip(8)?;
                (base, c.u64()?)
            }
            2 | 3 => {
                let (so, sl) = (c.u8()?, c.u8()?);
                check_sizes(so, sl)?;
                c.skip(1)?;
                let base = c.u64()?;
                c.skip(8 + 8)?;
                (base, c.u64()?)
            }
            v => return Err(H5Error::Unsupported(format!("superblock version {v}"))),
        };
        Ok(Self { data, base, root })
    }

    fn cursor(&self, address: u64) -> Result<Cursor<'_>> {
        if address == UNDEFINED {
            return Err(corrupt("dereferenced an undefined address"));
        }
        Cursor::at(&self.data, self.base.wrapping_add(address))
    }

    /// Names of the members of the root group, sorted.
    pub fn member_names(&self) -> Result<Vec<String>> {
        let mut names: Vec<String> = self
            .group_links(self.root)?
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        names.sort();
        Ok(names)
    }

    /// Opens a dataset by `/`-separated path from the root group.
    pub fn dataset(&self, path: &str) -> Result<Dataset<'_>> {
        let mut address = self.root;
        for part in path.split('/').filter(|p| !p.is_empty()) {
            address = self
                .group_links(address)?
                .into_iter()
                .find(|(n, _)| n == part)
                .map(|(_, a)| a)
                .ok_or_else(|| H5Error::NotFound(path.to_string()))?;
        }
        let msgs = self.read_header(address)?;
        let missing = |what: &str| corrupt(format!("{path:?} has no {what} message"));
        Ok(Dataset {
            file: self,
            name: path.to_string(),
            shape: msgs.shape.ok_or_else(|| missing("dataspace"))?,
            dtype: msgs.dtype.ok_or_else(|| missing("datatype"))?,
            layout: msgs.layout.ok_or_else(|| missing("layout"))?,
            filters: msgs.filters,
        })
    }

    fn group_links(&self, address: u64) -> Result<Vec<(String, u64)>> {
        let msgs = self.read_header(address)?;
        if let Some((btree, heap)) = msgs.symbol_table {
            let heap_data = self.local_heap(heap)?;
            let mut out = Vec::new();
            self.walk_group_btree(btree, heap_data, &mut out, 0)?;
            return Ok(out);
        }
        if msgs.dense_links {
            return Err(H5Error::Unsupported("dense link storage".into()));
        }
        Ok(msgs.links)
    }

    /// Data segment of a local heap.
    fn local_heap(&self, address: u64) -> Result<&[u8]> {
        let mut c = self.cursor(address)?;
        c.expect(b"HEAP")?;
        c.skip(4)?;
        let size = c.u64()? as usize;
        c.skip(8)?;
        let data = c.u64()?;
        self.cursor(data)?.bytes(size)
    }

    fn walk_group_btree(
        &self,
        address: u64,
        heap: &[u8],
        out: &mut Vec<(String, u64)>,
        depth: usize,
    ) -> Result<()> {
        if depth > 64 {
            return Err(corrupt("group B-tree too deep"));
        }
        let mut c = self.cursor(address)?;
        c.expect(b"TREE")?;
        if c.u8()? != 0 {
            return Err(corrupt("expected a group B-tree node"));
        }
        let level = c.u8()?;
        let used = c.u16()? as usize;
        c.skip(16)?;
        for _ in 0..used {
            c.skip(8)?; // key
            let child = c.u64()?;
            if level > 0 {
                self.walk_group_btree(child, heap, out, depth + 1)?;
            } else {
                self.read_symbol_node(child, heap, out)?;
            }
        }
        Ok(())
    }

    fn read_symbol_node(
        &self,
        address: u64,
        heap: &[u8],
        out: &mut Vec<(String, u64)>,
    ) -> Result<()> {
        let mut c = self.cursor(address)?;
        c.expect(b"SNOD")?;
        c.skip(2)?;
        let n = c.u16()?;
        for _ in 0..n {
            let name_off = c.u64()? as usize;
            let header = c.u64()?;
            c.skip(4 + 4 + 16)?;
            let tail = heap
                .get(name_off..)
                .ok_or_else(|| corrupt("symbol name offset outside heap"))?;
            let end = tail.iter().position(|&b| b == 0).unwrap_or(tail.len());
            out.push((String::from_utf8_lossy(&tail[..end]).into_owned(), header));
        }
        Ok(())
    }

    fn read_header(&self, address: u64) -> Result<Messages> {
        let mut msgs = Messages::default();
        let c = self.cursor(address)?;
        if c.buf.get(c.pos..c.pos + 4) == Some(b"OHDR") {
            self.read_header_v2(c, &mut msgs)?;
        } else {
            self.read_header_v1(c, &mut msgs)?;
        }
        Ok(msgs)
    }

    fn read_header_v1(&self, mut c: Cursor<'_>, msgs: &mut Messages) -> Result<()> {
        let version = c.u8()?;
        if version != 1 {
            return Err(H5Error::Unsupported(format!(
                "object header version {version}"
            )));
        }
        c.skip(1)?;
        let count = c.u16()? as usize;
        c.skip(4)?;
        let size = c.u32()? as usize;
        c.skip(4)?; // align to 8
        let mut blocks = vec![(c.pos, size)];
        let mut seen = 0;
        while let Some((start, len)) = blocks.pop() {
            let mut b = Cursor {
                buf: c.buf,
                pos: start,
            };
            let end = start + len;
            while seen < count && b.pos + 8 <= end {
                let kind = b.u16()?;
                let msg_len = b.u16()? as usize;
                b.skip(4)?;
                let body = b.bytes(msg_len)?;
                seen += 1;
                if let Some(cont) = self.message(kind, body, msgs)? {
                    blocks.push(cont);
                }
            }
        }
        Ok(())
    }

    fn read_header_v2(&self, mut c: Cursor<'_>, msgs: &mut Messages) -> Result<()> {
        c.expect(b"OHDR")?;
        let version = c.u8()?;
        if version != 2 {
            return Err(H5Error::Unsupported(format!(
                "object header version {version}"
            )));
        }
        let flags = c.u8()?;
        if flags & 0x20 != 0 {
            c.skip(16)?;
        }
        if flags & 0x10 != 0 {
            c.skip(4)?;
        }
        let size = c.uint(1 << (flags & 0x03))? as usize;
        let tracks_order = flags & 0x04 != 0;
        let mut blocks = vec![(c.pos, size)];
        while let Some((start, len)) = blocks.pop() {
            let mut b = Cursor {
                buf: c.buf,
                pos: start,
            };
            let end = start + len;
            // a message header is 4 bytes (+2 with creation order)
            let header_len = if tracks_order { 6 } else { 4 };
            while b.pos + header_len <= end {
                let kind = u16::from(b.u8()?);
                let msg_len = b.u16()? as usize;
                b.skip(1)?;
                if tracks_order {
                    b.skip(2)?;
                }
                let body = b.bytes(msg_len)?;
                if let Some((addr, len)) = self.message(kind, body, msgs)? {
                    // continuation blocks start with "OCHK" and end in a checksum
                    let mut k = Cursor {
                        buf: c.buf,
                        pos: addr,
                    };
                    k.expect(b"OCHK")?;
                    blocks.push((k.pos, len.saturating_sub(8)));
                }
            }
        }
        Ok(())
    }

    /// Decodes one header message. Returns a continuation block, if any, as
    /// `(file position, length)`.
    fn message(
        &self,
        kind: u16,
        body: &[u8],
        msgs: &mut Messages,
    ) -> Result<Option<(usize, usize)>> {
        let mut c = Cursor { buf: body, pos: 0 };
        match kind {
            0x0001 => msgs.shape = Some(parse_dataspace(&mut c)?),
            0x0003 => msgs.dtype = Some(parse_datatype(&mut c)?),
            0x0008 => msgs.layout = Some(parse_layout(&mut c)?),
            0x000B => msgs.filters = parse_filters(&mut c)?,
            0x0011 => msgs.symbol_table = Some((c.u64()?, c.u64()?)),
            0x0006 => {
                if let Some(link) = parse_link(&mut c)? {
                    msgs.links.push(link);
                }
            }
            0x0002 => {
                // link info: a defined fractal heap address means dense storage
                c.skip(1)?;
                let flags = c.u8()?;
                if flags & 0x01 != 0 {
                    c.skip(8)?;
                }
                if c.u64()? != UNDEFINED {
                    msgs.dense_links = true;
                }
            }
            0x0010 => {
                let addr = self.base.wrapping_add(c.u64()?);
                let len = c.u64()?;
                let addr = usize::try_from(addr).map_err(|_| corrupt("continuation address"))?;
                let len = usize::try_from(len).map_err(|_| corrupt("continuation length"))?;
                if addr.checked_add(len).is_none_or(|e| e > self.data.len()) {
                    return Err(corrupt("continuation block past end of file"));
                }
                return Ok(Some((addr, len)));
            }
            _ => {}
        }
        Ok(None)
    }

    /// Concatenated chunks of a v1-B-tree chunked dataset, as raw
    /// (unfiltered) bytes in row-major order.
    fn read_chunked(&self, ds: &Dataset<'_>, btree: u64, chunk: &[u64]) -> Result<Vec<u8>> {
        let rank = ds.shape.len();
        let elem = ds.dtype.size();
        if chunk.len() != rank + 1 {
            return Err(corrupt("chunk rank does not match dataspace"));
        }
        let total = ds.len() * elem;
        let mut out = vec![0u8; total];
        let mut chunks = Vec::new();
        self.collect_chunks(btree, rank, &mut chunks, 0)?;
        let chunk_elems: usize = chunk[..rank].iter().map(|&d| d as usize).product();
        for (offsets, address, size, mask) in chunks {
            let raw = self.cursor(address)?.bytes(size)?;
            let bytes = unfilter(raw, &ds.filters, mask, elem)?;
            if bytes.len() < chunk_elems * elem {
                return Err(corrupt("chunk shorter than its declared shape"));
            }
            scatter_chunk(&bytes, &offsets, &chunk[..rank], &ds.shape, elem, &mut out);
        }
        Ok(out)
    }

    fn collect_chunks(
        &self,
        address: u64,
        rank: usize,
        out: &mut Vec<(Vec<u64>, u64, usize, u32)>,
        depth: usize,
    ) -> Result<()> {
        if depth > 64 {
            return Err(corrupt("chunk B-tree too deep"));
        }
        let mut c = self.cursor(address)?;
        c.expect(b"TREE")?;
        if c.u8()? != 1 {
            return Err(corrupt("expected a chunk B-tree node"));
        }
        let level = c.u8()?;
        let used = c.u16()? as usize;
        c.skip(16)?;
        for _ in 0..used {
            let size = c.u32()? as usize;
            let mask = c.u32()?;
            let offsets: Vec<u64> = (0..=rank).map(|_| c.u64()).collect::<Result<_>>()?;
            let child = c.u64()?;
            if level > 0 {
                self.collect_chunks(child, rank, out, depth + 1)?;
            } else {
                out.push((offsets[..rank].to_vec(), child, size, mask));
            }
        }
        Ok(())
    }
}

fn check_sizes(offsets: u8, lengths: u8) -> Result<()> {
    if offsets == 8 && lengths == 8 {
        Ok(())
    } else {
        Err(H5Error::Unsupported(format!(
            "{offsets}-byte offsets / {lengths}-byte lengths"
        )))
    }
}

fn parse_dataspace(c: &mut Cursor<'_>) -> Result<Vec<u64>> {
    let version = c.u8()?;
    let rank = c.u8()? as usize;
    let _flags = c.u8()?;
    match version {
        1 => c.skip(5)?,
        2 => c.skip(1)?,
        v => return Err(H5Error::Unsupported(format!("dataspace version {v}"))),
    }
    (0..rank).map(|_| c.u64()).collect()
}

fn parse_datatype(c: &mut Cursor<'_>) -> Result<DataType> {
    let class_version = c.u8()?;
    let bits = c.bytes(3)?;
    let size = c.u32()? as usize;
    let big_endian = bits[0] & 0x01 != 0;
    match class_version & 0x0f {
        0 if (1..=8).contains(&size) => Ok(DataType::Int {
            size,
            signed: bits[0] & 0x08 != 0,
            big_endian,
        }),
        1 if size == 4 || size == 8 => Ok(DataType::Float { size, big_endian }),
        class => Err(H5Error::Unsupported(format!(
            "datatype class {class} of size {size}"
        ))),
    }
}

fn parse_layout(c: &mut Cursor<'_>) -> Result<Layout> {
    let version = c.u8()?;
    match version {
        1 | 2 => {
            let dims = c.u8()? as usize;
            let class = c.u8()?;
            c.skip(5)?;
            let address = if class != 0 { Some(c.u64()?) } else { None };
            let sizes: Vec<u64> = (0..dims)
                .map(|_| c.u32().map(u64::from))
                .collect::<Result<_>>()?;
            match class {
                0 => {
                    let n = c.u32()? as usize;
                    Ok(Layout::Compact(c.bytes(n)?.to_vec()))
                }
                1 => {
                    let size = sizes.iter().product();
                    Ok(Layout::Contiguous {
                        address: address.unwrap(),
                        size,
                    })
                }
                2 => {
                    let elem = u64::from(c.u32()?);
                    let mut chunk = sizes;
                    chunk.push(elem);
                    Ok(Layout::Chunked {
                        btree: address.unwrap(),
                        chunk,
                    })
                }
                k => Err(H5Error::Unsupported(format!("layout class {k}"))),
            }
        }
        3 | 4 => {
            let class = c.u8()?;
            match class {
                0 => {
                    let n = c.u16()? as usize;
                    Ok(Layout::Compact(c.bytes(n)?.to_vec()))
                }
                1 => Ok(Layout::Contiguous {
                    address: c.u64()?,
                    size: c.u64()?,
                }),
                2 if version == 3 => {
                    let dims = c.u8()? as usize;
                    let btree = c.u64()?;
                    let chunk = (0..dims)
                        .map(|_| c.u32().map(u64::from))
                        .collect::<Result<_>>()?;
                    Ok(Layout::Chunked { btree, chunk })
                }
                k => Err(H5Error::Unsupported(format!(
                    "layout version {version} class {k}"
                ))),
            }
        }
        v => Err(H5Error::Unsupported(format!("layout version {v}"))),
    }
}

fn parse_filters(c: &mut Cursor<'_>) -> Result<Vec<Filter>> {
    let version = c.u8()?;
    let n = c.u8()? as usize;
    if version == 1 {
        c.skip(6)?;
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let id = c.u16()?;
        let name_len = if version == 1 || id >= 256 {
            c.u16()? as usize
        } else {
            0
        };
        let _flags = c.u16()?;
        let values = c.u16()? as usize;
        if name_len > 0 {
            let padded = if version == 1 {
                name_len.div_ceil(8) * 8
            } else {
                name_len
            };
            c.skip(padded)?;
        }
        c.skip(4 * values)?;
        if version == 1 && values % 2 == 1 {
            c.skip(4)?;
        }
        out.push(match id {
            1 => Filter::Deflate,
            2 => Filter::Shuffle,
            3 => Filter::Fletcher32,
            other => return Err(H5Error::Unsupported(format!("filter {other}"))),
        });
    }
    Ok(out)
}

fn parse_link(c: &mut Cursor<'_>) -> Result<Option<(String, u64)>> {
    if c.u8()? != 1 {
        return Err(H5Error::Unsupported("link message version".into()));
    }
    let flags = c.u8()?;
    let kind = if flags & 0x08 != 0 { c.u8()? } else { 0 };
    if flags & 0x04 != 0 {
        c.skip(8)?;
    }
    if flags & 0x10 != 0 {
        c.skip(1)?;
    }
    let name_len = c.uint(1 << (flags & 0x03))? as usize;
    let name = String::from_utf8_lossy(c.bytes(name_len)?).into_owned();
    if kind != 0 {
        return Ok(None); // soft or external link
    }
    Ok(Some((name, c.u64()?)))
}

/// Undoes the filter pipeline of one chunk. `mask` bit `i` set means filter
/// `i` was skipped for this chunk.
fn unfilter(raw: &[u8], filters: &[Filter], mask: u32, elem: usize) -> Result<Vec<u8>> {
    let mut data = raw.to_vec();
    for (i, f) in filters.iter().enumerate().rev() {
        if mask & (1 << i) != 0 {
            continue;
        }
        data = match f {
            Filter::Deflate => {
                let mut out = Vec::new();
                flate2::read::ZlibDecoder::new(&data[..])
                    .read_to_end(&mut out)
                    .map_err(|e| corrupt(format!("deflate: {e}")))?;
                out
            }
            Filter::Shuffle => {
                let n = data.len() / elem;
                let mut out = vec![0u8; data.len()];
                for b in 0..elem {
                    for i in 0..n {
                        out[i * elem + b] = data[b * n + i];
                    }
                }
                out[n * elem..].copy_from_slice(&data[n * elem..]);
                out
            }
            Filter::Fletcher32 => {
                if data.len() < 4 {
                    return Err(corrupt("fletcher32 chunk too short"));
                }
                data.truncate(data.len() - 4);
                data
            }
        };
    }
    Ok(data)
}

/// Copies one chunk into the row-major output, clipping at the dataset edge.
fn scatter_chunk(
    chunk: &[u8],
    offsets: &[u64],
    chunk_dims: &[u64],
    shape: &[u64],
    elem: usize,
    out: &mut [u8],
) {
    let rank = shape.len();
    if rank == 0 {
        out.copy_from_slice(&chunk[..out.len()]);
        return;
    }
    let mut strides = vec![1usize; rank];
    for d in (0..rank - 1).rev() {
        strides[d] = strides[d + 1] * shape[d + 1] as usize;
    }
    let inner = chunk_dims[rank - 1] as usize;
    let inner_valid = inner.min(shape[rank - 1].saturating_sub(offsets[rank - 1]) as usize);
    // iterate over all chunk rows (every index but the last dimension)
    let rows: usize = chunk_dims[..rank - 1].iter().map(|&d| d as usize).product();
    let mut idx = vec![0u64; rank - 1];
    for row in 0..rows {
        let mut inside = true;
        let mut dst = offsets[rank - 1] as usize;
        for d in 0..rank - 1 {
            let g = offsets[d] + idx[d];
            if g >= shape[d] {
                inside = false;
                break;
            }
            dst += g as usize * strides[d];
        }
        if inside && inner_valid > 0 {
            let src = row * inner * elem;
            out[dst * elem..(dst + inner_valid) * elem]
                .copy_from_slice(&chunk[src..src + inner_valid * elem]);
        }
        for d in (0..rank - 1).rev() {
            idx[d] += 1;
            if idx[d] < chunk_dims[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

pub struct Dataset<'a> {
    file: &'a H5File,
    name: String,
    shape: Vec<u64>,
    dtype: DataType,
    layout: Layout,
    filters: Vec<Filter>,
}

impl Dataset<'_> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[u64] {
        &self.shape
    }

    pub fn dtype(&self) -> DataType {
        self.dtype
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        self.shape.iter().map(|&d| d as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn raw(&self) -> Result<Vec<u8>> {
        let need = self.len() * self.dtype.size();
        let bytes = match &self.layout {
            Layout::Compact(b) => b.clone(),
            Layout::Contiguous { address, .. } if *address == UNDEFINED => vec![0; need],
            Layout::Contiguous { size, .. } if (*size as usize) < need => {
                return Err(corrupt(format!(
                    "{:?} stores {size} bytes, shape needs {need}",
                    self.name
                )))
            }
            Layout::Contiguous { address, .. } => self.file.cursor(*address)?.bytes(need)?.to_vec(),
            Layout::Chunked { btree, .. } if *btree == UNDEFINED => vec![0; need],
            Layout::Chunked { btree, chunk } => self.file.read_chunked(self, *btree, chunk)?,
        };
        if bytes.len() < need {
            return Err(corrupt(format!(
                "{:?} holds {} bytes, shape needs {need}",
                self.name,
                bytes.len()
            )));
        }
        Ok(bytes)
    }

    /// All elements converted to `f32` (floats narrowed, integers cast).
    pub fn read_f32(&self) -> Result<Vec<f32>> {
        let raw = self.raw()?;
        let n = self.len();
        Ok(match self.dtype {
            DataType::Float {
                size: 4,
                big_endian,
            } => raw[..4 * n]
                .chunks_exact(4)
                .map(|b| {
                    let b: [u8; 4] = b.try_into().unwrap();
                    if big_endian {
                        f32::from_be_bytes(b)
                    } else {
                        f32::from_le_bytes(b)
                    }
                })
                .collect(),
            _ => self
                .read_f64_from(&raw)?
                .into_iter()
                .map(|v| v as f32)
                .collect(),
        })
    }

    pub fn read_f64(&self) -> Result<Vec<f64>> {
        self.read_f64_from(&self.raw()?)
    }

    fn read_f64_from(&self, raw: &[u8]) -> Result<Vec<f64>> {
        let n = self.len();
        match self.dtype {
            DataType::Float { size, big_endian } => Ok(raw[..size * n]
                .chunks_exact(size)
                .map(|b| {
                    let mut le = b.to_vec();
                    if big_endian {
                        le.reverse();
                    }
                    if size == 4 {
                        f64::from(f32::from_le_bytes(le[..].try_into().unwrap()))
                    } else {
                        f64::from_le_bytes(le[..].try_into().unwrap())
                    }
                })
                .collect()),
            DataType::Int { .. } => Ok(self.ints_from(raw).into_iter().map(|v| v as f64).collect()),
        }
    }

    /// All elements as `i64`. Fails for float datasets.
    pub fn read_i64(&self) -> Result<Vec<i64>> {
        match self.dtype {
            DataType::Int { .. } => Ok(self.ints_from(&self.raw()?)),
            DataType::Float { .. } => Err(H5Error::Unsupported(format!(
                "{:?} is a float dataset, integers expected",
                self.name
            ))),
        }
    }

    fn ints_from(&self, raw: &[u8]) -> Vec<i64> {
        let DataType::Int {
            size,
            signed,
            big_endian,
        } = self.dtype
        else {
            unreachable!()
        };
        raw[..size * self.len()]
            .chunks_exact(size)
            .map(|b| {
                let v = if big_endian {
                    b.iter().fold(0u64, |acc, &x| (acc << 8) | u64::from(x))
                } else {
                    b.iter()
                        .rev()
                        .fold(0u64, |acc, &x| (acc << 8) | u64::from(x))
                };
                let bits = 8 * size as u32;
                if signed && bits < 64 && v >> (bits - 1) & 1 == 1 {
                    (v | (u64::MAX << bits)) as i64
                } else {
                    v as i64
                }
            })
            .collect()
    }
}

/// Element data for [`H5Writer`].
#[derive(Debug, Clone)]
pub enum WriteData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
    I32(Vec<i32>),
    I64(Vec<i64>),
}

impl WriteData {
    fn len(&self) -> usize {
        match self {
            Self::F32(v) => v.len(),
            Self::F64(v) => v.len(),
            Self::U8(v) => v.len(),
            Self::I32(v) => v.len(),
            Self::I64(v) => v.len(),
        }
    }

    fn bytes(&self) -> Vec<u8> {
        match self {
            Self::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Self::F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Self::U8(v) => v.clone(),
            Self::I32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Self::I64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    /// Datatype message body.
    fn datatype_message(&self) -> Vec<u8> {
        let mut m = Vec::new();
        let int = |m: &mut Vec<u8>, size: u32, signed: bool| {
            m.push(0x10);
            m.extend_from_slice(&[if signed { 0x08 } else { 0x00 }, 0, 0]);
            m.extend_from_slice(&size.to_le_bytes());
            m.extend_from_slice(&0u16.to_le_bytes());
            m.extend_from_slice(&((size * 8) as u16).to_le_bytes());
        };
        match self {
            Self::F32(_) => {
                m.extend_from_slice(&[0x11, 0x20, 31, 0]);
                m.extend_from_slice(&4u32.to_le_bytes());
                m.extend_from_slice(&0u16.to_le_bytes());
                m.extend_from_slice(&32u16.to_le_bytes());
                m.extend_from_slice(&[23, 8, 0, 23]);
                m.extend_from_slice(&127u32.to_le_bytes());
            }
            Self::F64(_) => {
                m.extend_from_slice(&[0x11, 0x20, 63, 0]);
                m.extend_from_slice(&8u32.to_le_bytes());
                m.extend_from_slice(&0u16.to_le_bytes());
                m.extend_from_slice(&64u16.to_le_bytes());
                m.extend_from_slice(&[52, 11, 0, 52]);
                m.extend_from_slice(&1023u32.to_le_bytes());
            }
            Self::U8(_) => int(&mut m, 1, false),
            Self::I32(_) => int(&mut m, 4, true),
            Self::I64(_) => int(&mut m, 8, true),
        }
        m
    }
}

/// Builds a flat HDF5 file of named contiguous datasets.
#[derive(Debug, Default)]
pub struct H5Writer {
    datasets: Vec<(String, Vec<u64>, WriteData)>,
}

/// Symbol-table entries per leaf node (2 x the default leaf K of 4).
const MAX_ROOT_MEMBERS: usize = 8;
const GROUP_LEAF_K: u16 = 4;
const GROUP_INTERNAL_K: u16 = 16;

impl H5Writer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a root-level dataset. Panics if `data` does not fill `shape`,
    /// if the name is reused, or past eight datasets.
    pub fn add(&mut self, name: &str, shape: &[u64], data: WriteData) -> &mut Self {
        let n: u64 = shape.iter().product();
        assert_eq!(n as usize, data.len(), "data does not fill shape {shape:?}");
        assert!(!name.is_empty() && !name.contains('/') && !name.contains('\0'));
        assert!(
            self.datasets.iter().all(|(n, ..)| n != name),
            "duplicate dataset {name}"
        );
        assert!(
            self.datasets.len() < MAX_ROOT_MEMBERS,
            "at most {MAX_ROOT_MEMBERS} datasets"
        );
        self.datasets.push((name.to_string(), shape.to_vec(), data));
        self
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut members: Vec<&(String, Vec<u64>, WriteData)> = self.datasets.iter().collect();
        members.sort_by(|a, b| a.0.cmp(&b.0));

        // local heap data: "" at offset 0, then each name, 8-byte aligned
        let mut heap = vec![0u8; 8];
        let mut name_offsets = Vec::new();
        for (name, ..) in &members {
            name_offsets.push(heap.len() as u64);
            heap.extend_from_slice(name.as_bytes());
            heap.push(0);
            heap.resize(heap.len().div_ceil(8) * 8, 0);
        }
        // leave some free space in the heap, described by a free block
        let free_at = heap.len() as u64;
        heap.extend_from_slice(&[0u8; 16]);
        heap[free_at as usize..free_at as usize + 8].copy_from_slice(&1u64.to_le_bytes());
        heap[free_at as usize + 8..free_at as usize + 16].copy_from_slice(&16u64.to_le_bytes());

        let superblock_len = 96u64;
        let root_header_len = 16 + 8 + 16;
        let btree_len =
            24 + (2 * u64::from(GROUP_INTERNAL_K) + 1) * 8 + 2 * u64::from(GROUP_INTERNAL_K) * 8;
        let snod_len = 8 + 2 * u64::from(GROUP_LEAF_K) * 40;
        let heap_header_len = 32u64;

        let root_addr = superblock_len;
        let btree_addr = root_addr + root_header_len;
        let snod_addr = btree_addr + btree_len;
        let heap_addr = snod_addr + snod_len;
        let heap_data_addr = heap_addr + heap_header_len;
        let mut cursor = heap_data_addr + heap.len() as u64;

        let mut headers = Vec::new();
        for (_, shape, data) in &members {
            let header_addr = cursor;
            let header = dataset_header(shape, data, 0);
            let data_addr = header_addr + header.len() as u64;
            let header = dataset_header(shape, data, data_addr);
            let raw = data.bytes();
            cursor = data_addr + raw.len() as u64;
            headers.push((header_addr, header, raw));
        }
        let eof = cursor;

        let mut out = Vec::with_capacity(eof as usize);
        // superblock v0
        out.extend_from_slice(&SIGNATURE);
        out.extend_from_slice(&[0, 0, 0, 0, 0, 8, 8, 0]);
        out.extend_from_slice(&GROUP_LEAF_K.to_le_bytes());
        out.extend_from_slice(&GROUP_INTERNAL_K.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&0u64.to_le_bytes());
        out.extend_from_slice(&UNDEFINED.to_le_bytes());
        out.extend_from_slice(&eof.to_le_bytes());
        out.extend_from_slice(&UNDEFINED.to_le_bytes());
        out.extend_from_slice(&symbol_entry(0, root_addr, Some((btree_addr, heap_addr))));
        debug_assert_eq!(out.len() as u64, superblock_len);

        // root object header: one symbol table message
        let mut stab = Vec::new();
        stab.extend_from_slice(&btree_addr.to_le_bytes());
        stab.extend_from_slice(&heap_addr.to_le_bytes());
        out.extend_from_slice(&object_header(&[(0x0011, stab)]));
        debug_assert_eq!(out.len() as u64, btree_addr);

        // group B-tree, a single leaf pointing at one symbol node
        let mut tree = Vec::new();
        tree.extend_from_slice(b"TREE");
        tree.extend_from_slice(&[0, 0]);
        tree.extend_from_slice(&(if members.is_empty() { 0u16 } else { 1 }).to_le_bytes());
        tree.extend_from_slice(&UNDEFINED.to_le_bytes());
        tree.extend_from_slice(&UNDEFINED.to_le_bytes());
        if !members.is_empty() {
            tree.extend_from_slice(&0u64.to_le_bytes());
            tree.extend_from_slice(&snod_addr.to_le_bytes());
            tree.extend_from_slice(&name_offsets.last().unwrap().to_le_bytes());
        }
        tree.resize(btree_len as usize, 0);
        out.extend_from_slice(&tree);

        let mut snod = Vec::new();
        snod.extend_from_slice(b"SNOD");
        snod.extend_from_slice(&[1, 0]);
        snod.extend_from_slice(&(members.len() as u16).to_le_bytes());
        for (off, (addr, ..)) in name_offsets.iter().zip(&headers) {
            snod.extend_from_slice(&symbol_entry(*off, *addr, None));
        }
        snod.resize(snod_len as usize, 0);
        out.extend_from_slice(&snod);

        out.extend_from_slice(b"HEAP");
        out.extend_from_slice(&[0, 0, 0, 0]);
        out.extend_from_slice(&(heap.len() as u64).to_le_bytes());
        out.extend_from_slice(&free_at.to_le_bytes());
        out.extend_from_slice(&heap_data_addr.to_le_bytes());
        out.extend_from_slice(&heap);

        for (addr, header, raw) in headers {
            debug_assert_eq!(out.len() as u64, addr);
            out.extend_from_slice(&header);
            out.extend_from_slice(&raw);
        }
        out
    }
}

fn symbol_entry(name_offset: u64, header: u64, scratch: Option<(u64, u64)>) -> [u8; 40] {
    let mut e = [0u8; 40];
    e[..8].copy_from_slice(&name_offset.to_le_bytes());
    e[8..16].copy_from_slice(&header.to_le_bytes());
    if let Some((btree, heap)) = scratch {
        e[16..20].copy_from_slice(&1u32.to_le_bytes());
        e[24..32].copy_from_slice(&btree.to_le_bytes());
        e[32..40].copy_from_slice(&heap.to_le_bytes());
    }
    e
}

/// Version 1 object header holding `messages`, each padded to 8 bytes.
fn object_header(messages: &[(u16, Vec<u8>)]) -> Vec<u8> {
    let body: usize = messages
        .iter()
        .map(|(_, m)| 8 + m.len().div_ceil(8) * 8)
        .sum();
    let mut h = Vec::with_capacity(16 + body);
    h.extend_from_slice(&[1, 0]);
    h.extend_from_slice(&(messages.len() as u16).to_le_bytes());
    h.extend_from_slice(&1u32.to_le_bytes());
    h.extend_from_slice(&(body as u32).to_le_bytes());
    h.extend_from_slice(&[0; 4]);
    for (kind, m) in messages {
        let padded = m.len().div_ceil(8) * 8;
        h.extend_from_slice(&kind.to_le_bytes());
        h.extend_from_slice(&(padded as u16).to_le_bytes());
        h.extend_from_slice(&[0; 4]);
        h.extend_from_slice(m);
        h.resize(h.len() + padded - m.len(), 0);
    }
    h
}

fn dataset_header(shape: &[u64], data: &WriteData, data_addr: u64) -> Vec<u8> {
    let mut space = vec![1, shape.len() as u8, 0, 0, 0, 0, 0, 0];
    for d in shape {
        space.extend_from_slice(&d.to_le_bytes());
    }
    // fill value v2: late allocation, write if set, no value defined
    let fill = vec![2, 2, 2, 0];
    let mut layout = vec![3, 1];
    layout.extend_from_slice(&data_addr.to_le_bytes());
    layout.extend_from_slice(&((data.len() * data_type_size(data)) as u64).to_le_bytes());
    object_header(&[
        (0x0001, space),
        (0x0003, data.datatype_message()),
        (0x0005, fill),
        (0x0008, layout),
    ])
}

fn data_type_size(data: &WriteData) -> usize {
    match data {
        WriteData::F32(_) | WriteData::I32(_) => 4,
        WriteData::F64(_) | WriteData::I64(_) => 8,
        WriteData::U8(_) => 1,
    }
}
