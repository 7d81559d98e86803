use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{SignalError, TimeTraceSet, TraceMeta};
use crate::dynamics::ModeKind;

pub const TRACE_FORMAT_VERSION: u32 = 1;

const HEADER_KEYS: [&str; 8] = ["version", "dt", "n_samples", "f_alpha", "f_beta", "mode_excited", "seed", "label"];

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> SignalError + '_ {
    move |source| SignalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `trace` atomically: the data goes to a sibling temporary file
/// which is then renamed over `path`.
pub fn write_trace(path: &Path, trace: &TimeTraceSet) -> Result<(), SignalError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| SignalError::InvalidTrace(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        let m = trace.meta();
        writeln!(w, "version = {TRACE_FORMAT_VERSION}")?;
        writeln!(w, "dt = {:.16e}", trace.dt())?;
        writeln!(w, "n_samples = {}", trace.n_samples())?;
        writeln!(w, "f_alpha = {:.16e}", m.f_alpha)?;
        writeln!(w, "f_beta = {:.16e}", m.f_beta)?;
        writeln!(w, "mode_excited = {}", m.mode_excited)?;
        writeln!(w, "seed = {}", m.seed)?;
        writeln!(w, "label = {}", m.label.replace(['\n', '\r'], " "))?;
        writeln!(w)?;
        for (k, (a, b)) in trace.v1().iter().zip(trace.v2()).enumerate() {
            writeln!(w, "{:.16e}, {:.16e}, {:.16e}", k as f64 * trace.dt(), a, b)?;
        }
        w.into_inner().map_err(|e| e.into_error())?.sync_all()
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path)(e));
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_trace(path: &Path) -> Result<TimeTraceSet, SignalError> {
    let display = path.display().to_string();
    let parse_err = |line: usize, message: String| SignalError::Parse {
        path: display.clone(),
        line,
        message,
    };
    let reader = BufReader::new(fs::File::open(path).map_err(io_err(path))?);
    let mut lines = reader.lines().enumerate();

    let mut header: Vec<(String, String, usize)> = Vec::new();
    let mut terminated = false;
    for (i, line) in lines.by_ref() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            terminated = true;
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(i + 1, format!("expected `key = value`, got {line:?}")))?;
        let key = k.trim().to_string();
        if !HEADER_KEYS.contains(&key.as_str()) {
            return Err(parse_err(i + 1, format!("unknown header key {key:?}")));
        }
        if header.iter().any(|(k, _, _)| *k == key) {
            return Err(parse_err(i + 1, format!("duplicate header key {key:?}")));
        }
        header.push((key, v.trim().to_string(), i + 1));
    }
    if !terminated {
        return Err(parse_err(header.len() + 1, "header not terminated by a blank line".into()));
    }
    let get = |key: &str| -> Result<(&str, usize), SignalError> {
        header
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
            .ok_or_else(|| parse_err(header.len() + 1, format!("missing header field `{key}`")))
    };
    fn num<T: std::str::FromStr>(
        (v, l): (&str, usize),
        key: &str,
        err: &dyn Fn(usize, String) -> SignalError,
    ) -> Result<T, SignalError> {
        v.parse().map_err(|_| err(l, format!("field `{key}`: cannot parse {v:?}")))
    }

    let version: u32 = num(get("version")?, "version", &parse_err)?;
    if version != TRACE_FORMAT_VERSION {
        return Err(parse_err(get("version")?.1, format!("unsupported version {version}")));
    }
    let dt: f64 = num(get("dt")?, "dt", &parse_err)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(parse_err(get("dt")?.1, format!("field `dt` must be positive, got {dt}")));
    }
    let n: usize = num(get("n_samples")?, "n_samples", &parse_err)?;
    let f_alpha: f64 = num(get("f_alpha")?, "f_alpha", &parse_err)?;
    let f_beta: f64 = num(get("f_beta")?, "f_beta", &parse_err)?;
    let (mode_s, mode_line) = get("mode_excited")?;
    let mode_excited = ModeKind::parse(mode_s)
        .ok_or_else(|| parse_err(mode_line, format!("field `mode_excited`: unknown mode {mode_s:?}")))?;
    let seed: u64 = num(get("seed")?, "seed", &parse_err)?;
    let label = get("label")?.0.to_string();

    let mut v1 = Vec::with_capacity(n);
    let mut v2 = Vec::with_capacity(n);
    for (i, line) in lines {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let mut next = |name: &str| -> Result<f64, SignalError> {
            let s = fields
                .next()
                .ok_or_else(|| parse_err(i + 1, format!("missing column `{name}`")))?;
            let v: f64 = s
                .parse()
                .map_err(|_| parse_err(i + 1, format!("column `{name}`: cannot parse {s:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(i + 1, format!("column `{name}`: non-finite value")));
            }
            Ok(v)
        };
        next("t")?;
        let a = next("v1")?;
        let b = next("v2")?;
        if fields.next().is_some() {
            return Err(parse_err(i + 1, "expected 3 columns".into()));
        }
        v1.push(a);
        v2.push(b);
    }
    if v1.len() != n {
        return Err(parse_err(
            get("n_samples")?.1,
            format!("header declares {n} samples but the file has {}", v1.len()),
        ));
    }
    let meta = TraceMeta {
        mode_excited,
        f_alpha,
        f_beta,
        seed,
        label,
    };
    TimeTraceSet::new(dt, v1, v2, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> TimeTraceSet {
        let v1: Vec<f64> = (0..n).map(|k| (k as f64 * 0.0251).sin() * 1e-2 + 1e-17 * k as f64).collect();
        let v2: Vec<f64> = (0..n).map(|k| (k as f64 * 0.1).cos() / 3.0).collect();
        let meta = TraceMeta {
            mode_excited: ModeKind::QuasiBeta,
            f_alpha: 100.0,
            f_beta: 464.4,
            seed: u64::MAX,
            label: "rep 7".into(),
        };
        TimeTraceSet::new(4e-5, v1, v2, meta).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.txt");
        let t = sample(100_000);
        write_trace(&path, &t).unwrap();
        let back = read_trace(&path).unwrap();
        assert_eq!(back, t);
        assert!(back.v1().iter().zip(t.v1()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    fn rewrite(path: &Path, f: impl Fn(String) -> String) {
        let s = fs::read_to_string(path).unwrap();
        fs::write(path, f(s)).unwrap();
    }

    #[test]
    fn malformed_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.txt");
        let t = sample(2000);

        write_trace(&path, &t).unwrap();
        rewrite(&path, |s| s.replace("n_samples = 2000", "n_samples = 2001"));
        let e = read_trace(&path).unwrap_err().to_string();
        assert!(e.contains("2001"), "{e}");

        write_trace(&path, &t).unwrap();
        rewrite(&path, |s| s.replacen("dt = 4", "dt = -4", 1));
        let e = read_trace(&path).unwrap_err().to_string();
        assert!(e.contains(":2:") && e.contains("dt"), "{e}");

        write_trace(&path, &t).unwrap();
        rewrite(&path, |s| {
            let mut lines: Vec<String> = s.lines().map(String::from).collect();
            lines[12] = "1.0, NaN, 0.0".into();
            lines.join("\n")
        });
        let e = read_trace(&path).unwrap_err().to_string();
        assert!(e.contains(":13:"), "{e}");

        write_trace(&path, &t).unwrap();
        rewrite(&path, |s| s.replace("label = rep 7\n", ""));
        assert!(read_trace(&path).unwrap_err().to_string().contains("label"));

        assert!(matches!(read_trace(&dir.path().join("missing")), Err(SignalError::Io { .. })));
    }
}
