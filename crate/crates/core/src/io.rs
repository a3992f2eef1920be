//! CSV and binary serialization of paths and state sets.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sde::{PathSample, StopRule};

const CACHE_MAGIC: &[u8; 8] = b"GOLPATHS";
pub const CACHE_VERSION: u32 = 1;

fn state_header(dim: usize, first: &str) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((1..=dim).map(|k| format!("x_{k}")))
        .collect()
}

/// One row per time index: `t, x_1..x_m`.
pub fn write_path_csv<W: Write>(path: &PathSample, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(state_header(path.dim, "t"))?;
    for k in 0..path.len() {
        let mut row = vec![format!("{}", k as f64 * path.dt)];
        row.extend(path.state(k).iter().map(|x| format!("{x}")));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `t, x_1..x_m` rows back into `(times, states)`.
pub fn read_path_csv<R: Read>(r: R) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut times = Vec::new();
    let mut states = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let vals = parse_row(&rec)?;
        times.push(vals[0]);
        states.push(vals[1..].to_vec());
    }
    Ok((times, states))
}

/// One row per state: `index, x_1..x_m`.
pub fn write_states_csv<W: Write>(states: &[Vec<f64>], w: W) -> Result<()> {
    let dim = states.first().map_or(0, Vec::len);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(state_header(dim, "index"))?;
    for (i, x) in states.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(x.iter().map(|v| format!("{v}")));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_states_csv<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(r);
    let n_x = rdr
        .headers()?
        .iter()
        .filter(|h| h.starts_with("x_"))
        .count();
    rdr.records()
        .map(|rec| {
            let vals = parse_row(&rec?)?;
            Ok(vals[1..=n_x].to_vec())
        })
        .collect()
}

fn parse_row(rec: &csv::StringRecord) -> Result<Vec<f64>> {
    rec.iter()
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::config(format!("bad number {s:?}: {e}")))
        })
        .collect()
}

/// Writes a batch of paths as `magic, version, count, paths...` (little endian).
pub fn write_path_cache<W: Write>(paths: &[PathSample], w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(paths.len() as u64).to_le_bytes())?;
    for p in paths {
        let rule = serde_json::to_vec(&p.rule)?;
        w.write_all(&(p.dim as u64).to_le_bytes())?;
        w.write_all(&p.dt.to_le_bytes())?;
        w.write_all(&(p.stop_index as u64).to_le_bytes())?;
        w.write_all(&[p.capped as u8])?;
        match p.fingerprint {
            Some(fp) => {
                w.write_all(&[1])?;
                w.write_all(&fp.to_le_bytes())?;
            }
            None => w.write_all(&[0])?,
        }
        w.write_all(&(rule.len() as u64).to_le_bytes())?;
        w.write_all(&rule)?;
        write_f64s(&mut w, &p.states)?;
        match &p.noise {
            Some(n) => {
                w.write_all(&[1])?;
                write_f64s(&mut w, n)?;
            }
            None => w.write_all(&[0])?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_path_cache<R: Read>(r: R) -> Result<Vec<PathSample>> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::config("not a path cache file"));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != CACHE_VERSION {
        return Err(Error::config(format!(
            "path cache version {version}, this build reads {CACHE_VERSION}"
        )));
    }
    let n = read_u64(&mut r)? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let dim = read_u64(&mut r)? as usize;
        let dt = f64::from_le_bytes(read_array(&mut r)?);
        let stop_index = read_u64(&mut r)? as usize;
        let capped = read_u8(&mut r)? != 0;
        let fingerprint = match read_u8(&mut r)? {
            0 => None,
            _ => Some(read_u64(&mut r)?),
        };
        let rule_len = read_u64(&mut r)? as usize;
        let mut rule = vec![0u8; rule_len];
        r.read_exact(&mut rule)?;
        let rule: StopRule = serde_json::from_slice(&rule)?;
        let states = read_f64s(&mut r)?;
        let noise = match read_u8(&mut r)? {
            0 => None,
            _ => Some(read_f64s(&mut r)?),
        };
        out.push(PathSample {
            dim,
            dt,
            states,
            noise,
            stop_index,
            capped,
            rule,
            fingerprint,
        });
    }
    Ok(out)
}

pub fn save_path_cache(paths: &[PathSample], file: &Path) -> Result<()> {
    write_path_cache(paths, File::create(file)?)
}

pub fn load_path_cache(file: &Path) -> Result<Vec<PathSample>> {
    read_path_cache(File::open(file)?)
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    w.write_all(&(xs.len() as u64).to_le_bytes())?;
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    Ok(read_array::<_, 1>(r)?[0])
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_f64s<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = read_u64(r)? as usize;
    (0..n)
        .map(|_| Ok(f64::from_le_bytes(read_array(r)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sde::{simulate_batch, FnDrift, Region, SdeSystem};

    fn paths() -> Vec<PathSample> {
        let s = SdeSystem::new(
            Arc::new(FnDrift::new(1, |x: &[f64], o: &mut [f64]| o[0] = -x[0])),
            1.0,
            vec![0.2],
        )
        .unwrap();
        let rule = StopRule::Exit(Region::Interval {
            lo: Some(-0.5),
            hi: None,
        });
        simulate_batch(&s, &rule, 0.5, 0.01, 3, 4).unwrap()
    }

    #[test]
    fn cache_round_trip() {
        let mut ps = paths();
        ps[1].noise = None;
        ps[2].fingerprint = Some(42);
        let mut buf = Vec::new();
        write_path_cache(&ps, &mut buf).unwrap();
        assert_eq!(&buf[..8], CACHE_MAGIC);
        assert_eq!(read_path_cache(&buf[..]).unwrap(), ps);
    }

    #[test]
    fn cache_rejects_other_versions() {
        let mut buf = Vec::new();
        write_path_cache(&paths(), &mut buf).unwrap();
        buf[8] = 99;
        assert!(read_path_cache(&buf[..]).is_err());
        assert!(read_path_cache(&b"nonsense"[..]).is_err());
    }

    #[test]
    fn path_csv_round_trip() {
        let p = &paths()[0];
        let mut buf = Vec::new();
        write_path_csv(p, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x_1\n"));
        let (t, xs) = read_path_csv(&buf[..]).unwrap();
        assert_eq!(t.len(), p.len());
        assert_eq!(xs[3], p.state(3));
        assert!((t[3] - 0.03).abs() < 1e-15);
    }

    #[test]
    fn states_csv_round_trip() {
        let xs = vec![vec![0.1, -2.5], vec![1e-300, 3.0]];
        let mut buf = Vec::new();
        write_states_csv(&xs, &mut buf).unwrap();
        assert_eq!(read_states_csv(&buf[..]).unwrap(), xs);
    }
}
