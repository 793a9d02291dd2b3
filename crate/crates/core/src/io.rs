//! File formats: signals and correlations as `{"n", "real", "imag"}` JSON (or
//! two-column `re,im` CSV), measurements as JSON with optional augmentation
//! metadata. Floats are written with 17 significant digits and every write
//! goes through a temporary file and a rename.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{AugmentationSpec, Side};
use crate::signal::{AutoCorrelation, ComplexSignal, MeasurementSet};

/// `serde_json` formatter printing every float as `{:.16e}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with full-precision floats.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    value.serialize(&mut ser).map_err(|e| Error::Parse {
        context: "serialization".into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// Writes `bytes` to a sibling temporary file, syncs it, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => Path::new(".").to_path_buf(),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: format!("line {} column {}: {e}", e.line(), e.column()),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SequenceFile {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    kind: Option<String>,
    n: usize,
    real: Vec<f64>,
    imag: Vec<f64>,
}

impl SequenceFile {
    fn new(values: &[Complex64], kind: Option<&str>) -> Self {
        Self {
            kind: kind.map(str::to_string),
            n: values.len(),
            real: values.iter().map(|v| v.re).collect(),
            imag: values.iter().map(|v| v.im).collect(),
        }
    }

    fn values(self, path: &Path) -> Result<Vec<Complex64>> {
        if self.real.len() != self.n || self.imag.len() != self.n {
            return Err(Error::Parse {
                context: path.display().to_string(),
                message: format!(
                    "field \"n\" is {} but \"real\" has {} and \"imag\" has {} entries",
                    self.n,
                    self.real.len(),
                    self.imag.len()
                ),
            });
        }
        Ok(self
            .real
            .into_iter()
            .zip(self.imag)
            .map(|(re, im)| Complex64::new(re, im))
            .collect())
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Parses `re,im` rows; blank lines are skipped, a single column means `im = 0`.
pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() > 2 {
            return Err(Error::Parse {
                context: path.display().to_string(),
                message: format!("line {}: expected re,im but found {} fields", i + 1, fields.len()),
            });
        }
        let num = |s: &str, col: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                context: path.display().to_string(),
                message: format!("line {} field {col}: {e} ({s:?})", i + 1),
            })
        };
        let re = num(fields[0], "re")?;
        let im = if fields.len() == 2 { num(fields[1], "im")? } else { 0.0 };
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

fn sequence_csv(values: &[Complex64]) -> String {
    values
        .iter()
        .map(|v| format!("{:.16e},{:.16e}\n", v.re, v.im))
        .collect()
}

fn read_sequence(path: &Path) -> Result<(Vec<Complex64>, Option<String>)> {
    let text = read_text(path)?;
    if is_csv(path) {
        return Ok((parse_csv(&text, path)?, None));
    }
    let f: SequenceFile = parse_json(&text, path)?;
    let kind = f.kind.clone();
    Ok((f.values(path)?, kind))
}

pub fn read_signal(path: &Path) -> Result<ComplexSignal> {
    let (v, kind) = read_sequence(path)?;
    if kind.as_deref().is_some_and(|k| k != "signal") {
        return Err(Error::Parse {
            context: path.display().to_string(),
            message: format!("field \"kind\" is {kind:?}, expected a signal"),
        });
    }
    ComplexSignal::new(v)
}

pub fn write_signal(path: &Path, x: &ComplexSignal) -> Result<()> {
    let body = if is_csv(path) {
        sequence_csv(x.values())
    } else {
        to_json(&SequenceFile::new(x.values(), None))? + "\n"
    };
    write_atomic(path, body.as_bytes())
}

/// Correlation files carry `"kind": "correlation"`; CSV input is accepted as is.
pub fn read_correlation(path: &Path) -> Result<AutoCorrelation> {
    let (v, kind) = read_sequence(path)?;
    if !is_csv(path) && kind.as_deref() != Some("correlation") {
        return Err(Error::Parse {
            context: path.display().to_string(),
            message: "field \"kind\" must be \"correlation\"".into(),
        });
    }
    if v.is_empty() {
        return Err(Error::InvalidCorrelation("no lags".into()));
    }
    AutoCorrelation::new(v)
}

pub fn write_correlation(path: &Path, r: &AutoCorrelation) -> Result<()> {
    let body = if is_csv(path) {
        sequence_csv(r.values())
    } else {
        to_json(&SequenceFile::new(r.values(), Some("correlation")))? + "\n"
    };
    write_atomic(path, body.as_bytes())
}

/// Impulse metadata as stored in a measurement file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub delta_re: f64,
    pub delta_im: f64,
    pub gap: usize,
    pub side: Side,
}

impl From<AugmentationSpec> for AugmentationRecord {
    fn from(s: AugmentationSpec) -> Self {
        Self {
            delta_re: s.delta.re,
            delta_im: s.delta.im,
            gap: s.gap,
            side: s.side,
        }
    }
}

impl From<AugmentationRecord> for AugmentationSpec {
    fn from(r: AugmentationRecord) -> Self {
        Self {
            delta: Complex64::new(r.delta_re, r.delta_im),
            gap: r.gap,
            side: r.side,
        }
    }
}

/// Measurement file contents. `n` is the length the intensities were taken
/// of, i.e. the augmented length when `augmentation` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFile {
    pub m: usize,
    pub n: usize,
    pub b: Vec<f64>,
    pub sigma2: f64,
    pub real_signal: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub augmentation: Option<AugmentationRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl MeasurementFile {
    pub fn new(b: &MeasurementSet, augmentation: Option<AugmentationSpec>) -> Self {
        Self {
            m: b.m(),
            n: b.n,
            b: b.b.clone(),
            sigma2: b.sigma2,
            real_signal: b.real_signal,
            augmentation: augmentation.map(Into::into),
            warnings: Vec::new(),
        }
    }

    pub fn measurement(&self) -> Result<MeasurementSet> {
        if self.b.len() != self.m {
            return Err(Error::Parse {
                context: "measurement".into(),
                message: format!("field \"m\" is {} but \"b\" has {} entries", self.m, self.b.len()),
            });
        }
        let mut set = MeasurementSet::new(self.b.clone(), self.n)?.with_real_signal(self.real_signal);
        set.sigma2 = self.sigma2;
        Ok(set)
    }

    pub fn spec(&self) -> Option<AugmentationSpec> {
        self.augmentation.map(Into::into)
    }
}

pub fn read_measurement(path: &Path) -> Result<MeasurementFile> {
    let text = read_text(path)?;
    let f: MeasurementFile = parse_json(&text, path)?;
    f.measurement().map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            context: path.display().to_string(),
            message,
        },
        other => other,
    })?;
    Ok(f)
}

pub fn write_measurement(path: &Path, f: &MeasurementFile) -> Result<()> {
    write_atomic(path, (to_json(f)? + "\n").as_bytes())
}

/// Serializes `value` as full-precision JSON into `path`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, (to_json(value)? + "\n").as_bytes())
}
