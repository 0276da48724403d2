//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "PNBCKPT\0"
//! version    u32      1
//! activation u8       0 = tanh, 1 = swish
//! bias       u8       0 / 1
//! n_sizes    u32
//! sizes      n_sizes × u32
//! n_params   u64
//! values     n_params × f64 bit patterns, flat parameter order
//! ```
//!
//! Values are widened to `f64`, so both `f32` and `f64` parameters round-trip
//! bit-exactly.

use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, Architecture, Params};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"PNBCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_params<T: Scalar, W: Write>(params: &Params<T>, mut out: W) -> Result<()> {
    let arch = params.architecture();
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&[
        match arch.activation {
            Activation::Tanh => 0,
            Activation::Swish => 1,
        },
        arch.bias as u8,
    ])?;
    out.write_all(&(arch.sizes.len() as u32).to_le_bytes())?;
    for &s in &arch.sizes {
        out.write_all(&(s as u32).to_le_bytes())?;
    }
    out.write_all(&(params.len() as u64).to_le_bytes())?;
    for v in params.as_slice() {
        out.write_all(&v.wide().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params<T: Scalar, R: Read>(mut input: R) -> Result<Params<T>> {
    let mut magic = [0u8; 8];
    read_exact(&mut input, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut input, "version")?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let [act, bias] = read_array::<2, _>(&mut input, "header flags")?;
    let activation = match act {
        0 => Activation::Tanh,
        1 => Activation::Swish,
        other => return Err(Error::Format(format!("unknown activation tag {other}"))),
    };
    let bias = match bias {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("invalid bias flag {other}"))),
    };
    let n_sizes = u32::from_le_bytes(read_array(&mut input, "size count")?) as usize;
    if n_sizes > 1 << 16 {
        return Err(Error::Format(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes)
        .map(|_| Ok(u32::from_le_bytes(read_array(&mut input, "layer size")?) as usize))
        .collect::<Result<Vec<_>>>()?;
    let arch = Architecture {
        sizes,
        activation,
        bias,
    };
    arch.validate()
        .map_err(|e| Error::Format(format!("invalid architecture: {e}")))?;
    let n_params = u64::from_le_bytes(read_array(&mut input, "parameter count")?) as usize;
    if n_params != arch.num_params() {
        return Err(Error::Format(format!(
            "parameter count {n_params} does not match architecture ({})",
            arch.num_params()
        )));
    }
    let mut data = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let v = f64::from_le_bytes(read_array(&mut input, "parameter values")?);
        data.push(T::lit(v));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after parameters".into()));
    }
    Params::from_flat(arch, data)
}

pub fn save<T: Scalar>(params: &Params<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_params(params, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<Params<T>> {
    let file = std::fs::File::open(path)?;
    read_params(std::io::BufReader::new(file))
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn read_array<const N: usize, R: Read>(input: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(input, &mut buf, what)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::InitScheme;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), hidden in 1usize..12, swish in any::<bool>(), bias in any::<bool>()) {
            let act = if swish { Activation::Swish } else { Activation::Tanh };
            let mut arch = Architecture::new(vec![1, hidden, 3, 1], act).unwrap();
            arch.bias = bias;
            let mut p = Params::<f64>::init(seed, arch, InitScheme::GlorotNormal).unwrap();
            // exercise awkward bit patterns too
            if p.len() > 2 {
                p.as_mut_slice()[0] = -0.0;
                p.as_mut_slice()[1] = f64::MIN_POSITIVE / 3.0;
            }
            let mut buf = Vec::new();
            write_params(&p, &mut buf).unwrap();
            let q: Params<f64> = read_params(buf.as_slice()).unwrap();
            prop_assert_eq!(p.architecture(), q.architecture());
            let bits = |p: &Params<f64>| p.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&p), bits(&q));
        }
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let p = Params::<f64>::init(1, Architecture::default(), InitScheme::GlorotNormal).unwrap();
        let mut buf = Vec::new();
        write_params(&p, &mut buf).unwrap();

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(read_params::<f64, _>(truncated), Err(Error::Format(_))));

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            read_params::<f64, _>(bad_magic.as_slice()),
            Err(Error::Format(_))
        ));

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(matches!(
            read_params::<f64, _>(trailing.as_slice()),
            Err(Error::Format(_))
        ));

        assert!(matches!(read_params::<f64, _>(&b""[..]), Err(Error::Format(_))));
    }

    #[test]
    fn f32_round_trip() {
        let p = Params::<f32>::init(4, Architecture::default(), InitScheme::GlorotNormal).unwrap();
        let mut buf = Vec::new();
        write_params(&p, &mut buf).unwrap();
        let q: Params<f32> = read_params(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }
}
