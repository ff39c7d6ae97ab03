use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TELEMETRY_FORMAT_VERSION: u32 = 1;

/// Fixed CSV column order. Bump [`TELEMETRY_FORMAT_VERSION`] on any change.
pub const CSV_COLUMNS: [&str; 31] = [
    "epoch_s",
    "qw",
    "qx",
    "qy",
    "qz",
    "wx",
    "wy",
    "wz",
    "est_qw",
    "est_qx",
    "est_qy",
    "est_qz",
    "est_bx",
    "est_by",
    "est_bz",
    "hx",
    "hy",
    "hz",
    "tau_x",
    "tau_y",
    "tau_z",
    "a_m",
    "e",
    "i_deg",
    "raan_deg",
    "argp_deg",
    "true_anomaly_deg",
    "pointing_err_deg",
    "mode",
    "fuel_kg",
    "flags",
];

/// One telemetry row. Quaternions are body-to-inertial, rates and momenta are
/// body-frame SI, `tau` is the net commanded control torque on the body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub epoch_s: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
    pub est_qw: f64,
    pub est_qx: f64,
    pub est_qy: f64,
    pub est_qz: f64,
    pub est_bx: f64,
    pub est_by: f64,
    pub est_bz: f64,
    pub hx: f64,
    pub hy: f64,
    pub hz: f64,
    pub tau_x: f64,
    pub tau_y: f64,
    pub tau_z: f64,
    pub a_m: f64,
    pub e: f64,
    pub i_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    pub true_anomaly_deg: f64,
    pub pointing_err_deg: f64,
    pub mode: String,
    pub fuel_kg: f64,
    /// `|`-separated flag names, empty when nominal.
    pub flags: String,
}

impl TelemetryRecord {
    fn numeric(&self) -> [(&'static str, f64); 28] {
        [
            ("epoch_s", self.epoch_s),
            ("qw", self.qw),
            ("qx", self.qx),
            ("qy", self.qy),
            ("qz", self.qz),
            ("wx", self.wx),
            ("wy", self.wy),
            ("wz", self.wz),
            ("est_qw", self.est_qw),
            ("est_qx", self.est_qx),
            ("est_qy", self.est_qy),
            ("est_qz", self.est_qz),
            ("est_bx", self.est_bx),
            ("est_by", self.est_by),
            ("est_bz", self.est_bz),
            ("hx", self.hx),
            ("hy", self.hy),
            ("hz", self.hz),
            ("tau_x", self.tau_x),
            ("tau_y", self.tau_y),
            ("tau_z", self.tau_z),
            ("a_m", self.a_m),
            ("e", self.e),
            ("i_deg", self.i_deg),
            ("raan_deg", self.raan_deg),
            ("argp_deg", self.argp_deg),
            ("true_anomaly_deg", self.true_anomaly_deg),
            ("pointing_err_deg", self.pointing_err_deg),
        ]
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.split('|').any(|f| f == flag)
    }

    fn csv_row(&self, out: &mut String) {
        for (_, v) in self.numeric() {
            let _ = write!(out, "{v:?},");
        }
        let _ = writeln!(out, "{},{:?},{}", self.mode, self.fuel_kg, self.flags);
    }
}

/// Rejects non-finite values, text that would break a CSV cell, and
/// non-increasing epochs.
pub fn validate_stream(records: &[TelemetryRecord]) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for (row, r) in records.iter().enumerate() {
        for (name, v) in r.numeric().into_iter().chain([("fuel_kg", r.fuel_kg)]) {
            if !v.is_finite() {
                return Err(Error::Numerical(format!("telemetry row {row}: {name} = {v}")));
            }
        }
        if !(r.epoch_s > prev) {
            return Err(Error::Numerical(format!(
                "telemetry row {row}: epoch {} does not follow {prev}",
                r.epoch_s
            )));
        }
        prev = r.epoch_s;
        if [&r.mode, &r.flags].iter().any(|s| s.contains([',', '\n', '"'])) {
            return Err(Error::Numerical(format!(
                "telemetry row {row}: text field contains a separator"
            )));
        }
    }
    Ok(())
}

pub fn to_csv(records: &[TelemetryRecord]) -> Result<String> {
    validate_stream(records)?;
    let mut out = String::with_capacity(64 + records.len() * 400);
    let _ = writeln!(out, "# telemetry-format: {TELEMETRY_FORMAT_VERSION}");
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for r in records {
        r.csv_row(&mut out);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct JsonTelemetry<'a> {
    format: u32,
    records: std::borrow::Cow<'a, [TelemetryRecord]>,
}

pub fn to_json(records: &[TelemetryRecord]) -> Result<String> {
    validate_stream(records)?;
    let doc = JsonTelemetry {
        format: TELEMETRY_FORMAT_VERSION,
        records: records.into(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Numerical(e.to_string()))
}

pub fn from_json(text: &str) -> Result<Vec<TelemetryRecord>> {
    let doc: JsonTelemetry = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.format != TELEMETRY_FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported telemetry format {}", doc.format)));
    }
    Ok(doc.records.into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample(epoch: f64) -> TelemetryRecord {
        TelemetryRecord {
            epoch_s: epoch,
            qw: 1.0,
            qx: 0.0,
            qy: 0.0,
            qz: 0.0,
            wx: 1e-4,
            wy: -2e-4,
            wz: 0.1 + 0.2,
            est_qw: 1.0,
            est_qx: 0.0,
            est_qy: 0.0,
            est_qz: 0.0,
            est_bx: 3e-6,
            est_by: 0.0,
            est_bz: 0.0,
            hx: 0.5,
            hy: 0.0,
            hz: 0.0,
            tau_x: 0.0,
            tau_y: 0.0,
            tau_z: 0.0,
            a_m: 26_560e3,
            e: 1e-4,
            i_deg: 55.0,
            raan_deg: 0.0,
            argp_deg: 0.0,
            true_anomaly_deg: 12.5,
            pointing_err_deg: 0.01,
            mode: "NOMINAL_POINTING".into(),
            fuel_kg: 50.0,
            flags: "WHEEL_SAT|MEAS_REJECTED".into(),
        }
    }

    #[test]
    fn csv_header_and_column_count() {
        let csv = to_csv(&[sample(0.0), sample(10.0)]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# telemetry-format: 1"));
        let header = lines.next().unwrap();
        assert!(header.starts_with("epoch_s,qw,qx,qy,qz,wx,wy,wz,est_qw,"));
        assert!(header.ends_with("pointing_err_deg,mode,fuel_kg,flags"));
        for row in lines {
            assert_eq!(row.split(',').count(), CSV_COLUMNS.len());
        }
    }

    #[test]
    fn csv_values_round_trip_exactly() {
        let r = sample(0.0);
        let csv = to_csv(std::slice::from_ref(&r)).unwrap();
        let row = csv.lines().nth(2).unwrap();
        let wz: f64 = row.split(',').nth(7).unwrap().parse().unwrap();
        assert_eq!(wz.to_bits(), r.wz.to_bits());
    }

    #[test]
    fn json_uses_identical_field_names() {
        let json = to_json(&[sample(1.0)]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let keys: Vec<&str> = v["records"][0]
            .as_object()
            .unwrap()
            .keys()
            .map(|k| k.as_str())
            .collect();
        let mut expected = CSV_COLUMNS.to_vec();
        expected.sort_unstable();
        let mut keys = keys;
        keys.sort_unstable();
        assert_eq!(keys, expected);
        assert_eq!(from_json(&json).unwrap(), vec![sample(1.0)]);
    }

    #[test]
    fn non_finite_rows_rejected() {
        let mut r = sample(0.0);
        r.hy = f64::NAN;
        assert!(matches!(to_csv(&[r]), Err(Error::Numerical(m)) if m.contains("hy")));
    }

    #[test]
    fn epochs_must_increase() {
        assert!(to_csv(&[sample(1.0), sample(1.0)]).is_err());
        assert!(to_csv(&[sample(2.0), sample(1.0)]).is_err());
    }

    #[test]
    fn flag_lookup() {
        let r = sample(0.0);
        assert!(r.has_flag("WHEEL_SAT"));
        assert!(!r.has_flag("WHEEL"));
    }
}
