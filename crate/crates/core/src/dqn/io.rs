//! Binary model format: magic, version, layer count and sizes (u32 LE), then
//! every parameter as f64 LE in the network's flat layer order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DqnError, QNetwork};

pub const MODEL_MAGIC: [u8; 4] = *b"GSQN";
pub const MODEL_VERSION: u32 = 1;

pub fn write_network<W: Write>(net: &QNetwork, mut w: W) -> Result<(), DqnError> {
    w.write_all(&MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&(net.sizes().len() as u32).to_le_bytes())?;
    for &s in net.sizes() {
        w.write_all(&(s as u32).to_le_bytes())?;
    }
    for &p in net.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, DqnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_network<R: Read>(mut r: R) -> Result<QNetwork, DqnError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MODEL_MAGIC {
        return Err(DqnError::Model("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != MODEL_VERSION {
        return Err(DqnError::Model(format!("unsupported version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    if !(2..=64).contains(&n) {
        return Err(DqnError::Model(format!("implausible layer count {n}")));
    }
    let sizes = (0..n)
        .map(|_| read_u32(&mut r).map(|s| s as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let count = QNetwork::zeros(&sizes)?.param_count();
    let mut params = Vec::with_capacity(count);
    let mut b = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut b)?;
        params.push(f64::from_le_bytes(b));
    }
    if r.read(&mut b)? != 0 {
        return Err(DqnError::Model("trailing bytes".into()));
    }
    QNetwork::from_params(&sizes, params)
}

pub fn save_network(net: &QNetwork, path: &Path) -> Result<(), DqnError> {
    write_network(net, BufWriter::new(File::create(path)?))
}

pub fn load_network(path: &Path) -> Result<QNetwork, DqnError> {
    read_network(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_bitwise() {
        let net = QNetwork::new(&[4, 5, 3], &mut SimRng::seed_from_u64(2)).unwrap();
        let mut buf = Vec::new();
        write_network(&net, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 3 * 4 + 8 * net.param_count());
        assert_eq!(&buf[..4], b"GSQN");
        assert_eq!(&buf[12..16], &4u32.to_le_bytes());
        let back = read_network(buf.as_slice()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let net = QNetwork::zeros(&[2, 2]).unwrap();
        let mut buf = Vec::new();
        write_network(&net, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_network(bad.as_slice()).is_err());
        assert!(read_network(&buf[..buf.len() - 1]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_network(long.as_slice()).is_err());
    }
}
