//! JSON reports with fixed-precision floats, so equal inputs give equal bytes.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

pub const SCHEMA_VERSION: u32 = 1;

/// Significant digits after the leading one.
pub const FLOAT_DIGITS: usize = 12;

struct FixedFloats;

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.FLOAT_DIGITS$e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }
}

/// Compact JSON, one trailing newline. Non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, FixedFloats);
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}
