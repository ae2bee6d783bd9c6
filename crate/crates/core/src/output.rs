//! Serialization helpers. Every floating-point number written by the crate
//! goes through [`fmt17`], so outputs carry 17 significant digits and parse
//! back to the same `f64`.

use num_complex::Complex64;
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

/// `x` with 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn raw<S: Serializer>(x: f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        let r = RawValue::from_string(fmt17(x)).map_err(serde::ser::Error::custom)?;
        r.serialize(s)
    } else {
        s.serialize_none()
    }
}

pub fn f64_17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    raw(*x, s)
}

pub fn opt_f64_17<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => raw(*v, s),
        None => s.serialize_none(),
    }
}

/// A complex number as `[re, im]`.
pub fn complex_17<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    struct R(f64);
    impl Serialize for R {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            raw(self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&R(z.re))?;
    seq.serialize_element(&R(z.im))?;
    seq.end()
}

/// Pretty JSON followed by a newline.
pub fn to_json<T: Serialize>(value: &T) -> crate::error::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Probe {
        #[serde(serialize_with = "f64_17")]
        x: f64,
        #[serde(serialize_with = "complex_17")]
        z: Complex64,
        #[serde(serialize_with = "opt_f64_17")]
        r: Option<f64>,
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
    }

    #[test]
    fn json_fields() {
        let p = Probe {
            x: 0.5,
            z: Complex64::new(1.0, -2.0),
            r: None,
        };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"{"x":5.0000000000000000e-1,"z":[1.0000000000000000e0,-2.0000000000000000e0],"r":null}"#
        );
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["z"][1].as_f64(), Some(-2.0));
    }

    #[test]
    fn non_finite_becomes_null() {
        let p = Probe {
            x: f64::INFINITY,
            z: Complex64::new(0.0, 0.0),
            r: Some(f64::NAN),
        };
        let v: serde_json::Value = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert!(v["x"].is_null() && v["r"].is_null());
    }
}
