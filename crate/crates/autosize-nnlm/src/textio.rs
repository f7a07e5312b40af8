//! Shared helpers for the crate's text file formats.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, enough for `f64` to survive a
/// print/parse round trip bit for bit.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Writes `contents` to `path` atomically: the bytes go to a sibling
/// temporary file which is then renamed over the destination.
pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp_name = OsString::from(path.as_os_str());
    tmp_name.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp_name);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_f64_round_trips() {
        for &x in &[
            0.0,
            1.0,
            -1.0,
            std::f64::consts::PI,
            1.0 / 3.0,
            -2.2250738585072014e-308,
            1.7976931348623157e308,
            6.02e23,
        ] {
            let printed = fmt_f64(x);
            let back: f64 = printed.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{printed}");
        }
    }

    #[test]
    fn fmt_f64_reprint_is_stable() {
        let x = 0.1 + 0.2;
        let once = fmt_f64(x);
        let twice = fmt_f64(once.parse::<f64>().unwrap());
        assert_eq!(once, twice);
    }
}
