//! Small output helpers shared by the experiment writers.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// Seed and parameter echo stamped onto every numeric output file.
#[derive(Debug, Clone, Serialize)]
pub struct Echo {
    pub seed: u64,
    pub params: Value,
}

/// Writes the `# seed=... params=...` comment line that precedes CSV headers.
pub fn write_echo<W: Write>(w: &mut W, echo: &Echo) -> Result<()> {
    writeln!(w, "# seed={} params={}", echo.seed, serde_json::to_string(&echo.params)?)?;
    Ok(())
}

/// Pretty JSON with a trailing newline. Map keys come out sorted, so equal
/// values always serialise to equal bytes.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(&serde_json::to_value(value)?)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn echo_line_format() {
        let mut buf = Vec::new();
        let echo = Echo { seed: 7, params: json!({"depth": 3, "a": 1.5}) };
        write_echo(&mut buf, &echo).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# seed=7 params={\"a\":1.5,\"depth\":3}\n");
    }

    #[test]
    fn json_keys_are_sorted() {
        let a = to_json_bytes(&json!({"b": 1, "a": 2})).unwrap();
        let text = String::from_utf8(a).unwrap();
        assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
        assert!(text.ends_with('\n'));
    }
}
