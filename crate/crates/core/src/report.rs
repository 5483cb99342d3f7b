//! Byte-stable result serialization.
//!
//! CSV: 17 significant digits ({:.16e}), '.' decimal separator, LF line
//! endings. JSON: serde_json with struct field order, so identical inputs
//! produce identical bytes.

use std::io::Write;

use crate::error::Result;

/// Write a CSV table: a time column followed by named data columns, all
/// formatted with 17 significant digits.
pub fn write_csv<W: Write>(
    mut out: W,
    time_label: &str,
    times: &[f64],
    columns: &[(&str, &[f64])],
) -> Result<()> {
    let mut header = String::from(time_label);
    for (name, col) in columns {
        assert_eq!(
            col.len(),
            times.len(),
            "column {name} length {} != {}",
            col.len(),
            times.len()
        );
        header.push(',');
        header.push_str(name);
    }
    out.write_all(header.as_bytes())?;
    out.write_all(b"\n")?;
    for (k, t) in times.iter().enumerate() {
        let mut line = format!("{t:.16e}");
        for (_, col) in columns {
            line.push_str(&format!(",{:.16e}", col[k]));
        }
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: serde::Serialize>(mut out: W, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            "t_us",
            &[0.0, 0.5],
            &[("mean", &[1.0, 0.25][..]), ("stderr", &[0.0, 0.125][..])],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t_us,mean,stderr");
        assert_eq!(
            lines[1],
            "0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0"
        );
        assert_eq!(
            lines[2],
            "5.0000000000000000e-1,2.5000000000000000e-1,1.2500000000000000e-1"
        );
        assert!(text.ends_with('\n'));
        assert!(!text.contains('\r'));
    }
}
