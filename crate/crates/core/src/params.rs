//! Per-unit parameter set and base-quantity conversions.
//!
//! All model equations work in per unit on the bases `S_r` (rated
//! three-phase power), `E_r` (rated line-to-line RMS voltage) and `ω_b`
//! (nominal angular frequency). [`ParameterSet::table1`] holds the reference
//! 1.5 kVA / 208 V / 60 Hz design.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Controller, filter and limiter constants plus base quantities.
///
/// Serialized as a flat JSON object; unknown keys are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSet {
    /// dVOC rotation angle, rad.
    pub psi: f64,
    /// Smooth saturation-function parameter.
    pub eps_sat: f64,
    #[serde(rename = "E_b")]
    pub e_b: f64,
    #[serde(rename = "I_max")]
    pub i_max: f64,
    #[serde(rename = "L_i")]
    pub l_i: f64,
    #[serde(rename = "L_g")]
    pub l_g: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "R_i")]
    pub r_i: f64,
    #[serde(rename = "R_g")]
    pub r_g: f64,
    /// Voltage-loop integrator anti-windup gain.
    #[serde(rename = "K_b")]
    pub k_b: f64,
    #[serde(rename = "K_Pi")]
    pub k_pi: f64,
    #[serde(rename = "K_Ii")]
    pub k_ii: f64,
    /// dVOC synchronization gain.
    #[serde(rename = "kappa_1")]
    pub kappa1: f64,
    #[serde(rename = "K_Pv")]
    pub k_pv: f64,
    #[serde(rename = "K_Iv")]
    pub k_iv: f64,
    /// dVOC voltage-amplitude gain.
    #[serde(rename = "kappa_2")]
    pub kappa2: f64,
    pub omega_bw_i: f64,
    pub omega_bw_v: f64,
    /// Nominal angular frequency, rad/s.
    pub omega_b: f64,
    /// Rated power, VA.
    #[serde(rename = "S_r")]
    pub s_r: f64,
    /// Rated line-to-line RMS voltage, V.
    #[serde(rename = "E_r")]
    pub e_r: f64,
}

/// Which grid-side row of the reference table to use for `L_g`/`R_g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineType {
    /// `L_g` includes the line inductance; `R_g` is the filter resistance.
    Inductive,
    /// `R_g` includes the line resistance; `L_g` is the filter inductance.
    Resistive,
}

impl fmt::Display for LineType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineType::Inductive => f.write_str("inductive"),
            LineType::Resistive => f.write_str("resistive"),
        }
    }
}

const L_G_FILTER: f64 = 0.0196;
const L_G_LINE: f64 = 0.037;
const R_G_FILTER: f64 = 0.0139;
const R_G_LINE: f64 = 0.0313;

/// Names accepted by [`ParameterSet::named`].
pub const NAMED_SETS: [&str; 4] = ["table1", "table1-inductive", "table1-resistive", "table1-line"];

impl Default for ParameterSet {
    fn default() -> Self {
        Self::table1()
    }
}

impl ParameterSet {
    /// Reference design with filter-only grid-side `L_g`, `R_g`.
    pub fn table1() -> Self {
        Self {
            psi: FRAC_PI_4,
            eps_sat: 0.1,
            e_b: 1.0,
            i_max: 1.2,
            l_i: 0.0196,
            l_g: L_G_FILTER,
            c: 0.1086,
            r_i: 0.0139,
            r_g: R_G_FILTER,
            k_b: 0.0347,
            k_pi: 0.9817,
            k_ii: 0.6944,
            kappa1: 0.0033,
            k_pv: 1.4476,
            k_iv: 10.2944,
            kappa2: 0.0796,
            omega_bw_i: 50.0,
            omega_bw_v: 13.3333,
            omega_b: TAU * 60.0,
            s_r: 1500.0,
            e_r: 208.0,
        }
    }

    /// Reference design with line-inclusive values for both `L_g` and `R_g`.
    pub fn with_line(mut self) -> Self {
        self.l_g = L_G_LINE;
        self.r_g = R_G_LINE;
        self
    }

    /// Reference design for a dominantly inductive or resistive connection.
    pub fn table1_for(line: LineType) -> Self {
        let mut p = Self::table1();
        match line {
            LineType::Inductive => p.l_g = L_G_LINE,
            LineType::Resistive => p.r_g = R_G_LINE,
        }
        p
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "table1" => Ok(Self::table1()),
            "table1-inductive" => Ok(Self::table1_for(LineType::Inductive)),
            "table1-resistive" => Ok(Self::table1_for(LineType::Resistive)),
            "table1-line" => Ok(Self::table1().with_line()),
            other => Err(Error::UnknownParameterSet(other.to_string())),
        }
    }

    /// Parse a parameter document: either a JSON string naming a built-in
    /// set (`"table1-inductive"`) or a flat object with every field.
    pub fn from_json_str(doc: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(doc).map_err(|e| Error::parse("parameter document", &e))?;
        let params = match value {
            serde_json::Value::String(name) => Self::named(&name)?,
            v => serde_json::from_value::<Self>(v).map_err(|e| Error::InvalidParameter {
                field: missing_field(&e).unwrap_or_else(|| "<document>".into()),
                reason: e.to_string(),
            })?,
        };
        params.validate()?;
        for w in params.consistency_warnings() {
            log::warn!("{w}");
        }
        Ok(params)
    }

    fn positive_fields(&self) -> [(&'static str, f64); 19] {
        [
            ("E_b", self.e_b),
            ("I_max", self.i_max),
            ("L_i", self.l_i),
            ("L_g", self.l_g),
            ("C", self.c),
            ("R_i", self.r_i),
            ("R_g", self.r_g),
            ("K_b", self.k_b),
            ("K_Pi", self.k_pi),
            ("K_Ii", self.k_ii),
            ("kappa_1", self.kappa1),
            ("K_Pv", self.k_pv),
            ("K_Iv", self.k_iv),
            ("kappa_2", self.kappa2),
            ("omega_bw_i", self.omega_bw_i),
            ("omega_bw_v", self.omega_bw_v),
            ("omega_b", self.omega_b),
            ("S_r", self.s_r),
            ("E_r", self.e_r),
        ]
    }

    /// Hard invariants. Violations are rejected with the offending field.
    pub fn validate(&self) -> Result<()> {
        for (field, v) in self.positive_fields() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    field: field.into(),
                    reason: format!("must be finite and strictly positive, got {v}"),
                });
            }
        }
        if !(self.eps_sat > 0.0 && self.eps_sat < 1.0) {
            return Err(Error::InvalidParameter {
                field: "eps_sat".into(),
                reason: format!("must lie in (0, 1), got {}", self.eps_sat),
            });
        }
        if !(self.psi >= 0.0 && self.psi < 2.0 * PI) {
            return Err(Error::InvalidParameter {
                field: "psi".into(),
                reason: format!("must lie in [0, 2π), got {}", self.psi),
            });
        }
        Ok(())
    }

    /// Gain-design rules that retuned parameter sets may legitimately break.
    pub fn consistency_warnings(&self) -> Vec<String> {
        let checks = [
            ("K_Pi", self.k_pi, self.omega_bw_i * self.l_i, "omega_bw_i * L_i"),
            ("K_Ii", self.k_ii, self.omega_bw_i * self.r_i, "omega_bw_i * R_i"),
            ("K_Pv", self.k_pv, self.omega_bw_v * self.c, "omega_bw_v * C"),
        ];
        checks
            .iter()
            .filter(|(_, actual, design, _)| ((actual - design) / design).abs() > 0.01)
            .map(|(name, actual, design, rule)| {
                format!("{name} = {actual} differs from {rule} = {design} by more than 1%")
            })
            .collect()
    }

    /// Convert a per-unit value to SI using the base for `quantity`.
    pub fn to_si(&self, quantity: BaseQuantity, pu: f64) -> f64 {
        pu * quantity.base(self)
    }
}

fn missing_field(e: &serde_json::Error) -> Option<String> {
    let msg = e.to_string();
    let start = msg.find('`')? + 1;
    let end = start + msg[start..].find('`')?;
    Some(msg[start..end].to_string())
}

/// Base-value rows of the parameter table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseQuantity {
    /// Peak phase voltage `E_r √2/√3`, V.
    Voltage,
    /// Peak phase current `S_r √2/(E_r √3)`, A.
    Current,
    /// `E_r²/(S_r ω_b)`, H.
    Inductance,
    /// `S_r/(E_r² ω_b)`, F.
    Capacitance,
    /// `E_r²/S_r`, Ω. Also the base of `K_b` and `K_Pi`.
    Impedance,
    /// `E_r² ω_b/S_r`, 1/F. Base of `K_Ii` and `κ₁`.
    InverseCapacitance,
    /// `S_r/E_r²`, 1/Ω. Base of `K_Pv`.
    Admittance,
    /// `S_r ω_b/E_r²`, 1/H. Base of `K_Iv`.
    InverseInductance,
    /// `ω_b`, rad/s.
    AngularFrequency,
    /// `3 ω_b/(2 E_r²)`, rad/(s·V²). Base of `κ₂`.
    AmplitudeGain,
}

impl BaseQuantity {
    pub fn base(self, p: &ParameterSet) -> f64 {
        let (s, e, w) = (p.s_r, p.e_r, p.omega_b);
        let r2 = 2f64.sqrt();
        let r3 = 3f64.sqrt();
        match self {
            BaseQuantity::Voltage => e * r2 / r3,
            BaseQuantity::Current => s * r2 / (e * r3),
            BaseQuantity::Inductance => e * e / (s * w),
            BaseQuantity::Capacitance => s / (e * e * w),
            BaseQuantity::Impedance => e * e / s,
            BaseQuantity::InverseCapacitance => e * e * w / s,
            BaseQuantity::Admittance => s / (e * e),
            BaseQuantity::InverseInductance => s * w / (e * e),
            BaseQuantity::AngularFrequency => w,
            BaseQuantity::AmplitudeGain => 3.0 * w / (2.0 * e * e),
        }
    }

    /// Base row for a named parameter field, if it has one.
    pub fn for_field(field: &str) -> Option<Self> {
        Some(match field {
            "E_b" => BaseQuantity::Voltage,
            "I_max" => BaseQuantity::Current,
            "L_i" | "L_g" => BaseQuantity::Inductance,
            "C" => BaseQuantity::Capacitance,
            "R_i" | "R_g" | "K_b" | "K_Pi" => BaseQuantity::Impedance,
            "K_Ii" | "kappa_1" => BaseQuantity::InverseCapacitance,
            "K_Pv" => BaseQuantity::Admittance,
            "K_Iv" => BaseQuantity::InverseInductance,
            "omega_bw_i" | "omega_bw_v" => BaseQuantity::AngularFrequency,
            "kappa_2" => BaseQuantity::AmplitudeGain,
            _ => return None,
        })
    }
}

impl FromStr for BaseQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "voltage" => BaseQuantity::Voltage,
            "current" => BaseQuantity::Current,
            "inductance" => BaseQuantity::Inductance,
            "capacitance" => BaseQuantity::Capacitance,
            "impedance" | "resistance" => BaseQuantity::Impedance,
            "inverse-capacitance" => BaseQuantity::InverseCapacitance,
            "admittance" => BaseQuantity::Admittance,
            "inverse-inductance" => BaseQuantity::InverseInductance,
            "angular-frequency" => BaseQuantity::AngularFrequency,
            "amplitude-gain" => BaseQuantity::AmplitudeGain,
            other => {
                return BaseQuantity::for_field(other)
                    .ok_or_else(|| Error::UnknownQuantity(other.to_string()))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table1_values() {
        let p = ParameterSet::table1();
        assert_eq!(p.k_pi, 0.9817);
        assert_eq!(p.k_iv, 10.2944);
        assert_eq!(p.i_max, 1.2);
        assert_eq!(p.eps_sat, 0.1);
        assert_eq!(p.psi, FRAC_PI_4);
        p.validate().unwrap();
        assert!(p.consistency_warnings().is_empty(), "{:?}", p.consistency_warnings());
    }

    #[test]
    fn line_rows() {
        let p = ParameterSet::table1().with_line();
        assert_eq!((p.l_g, p.r_g), (0.037, 0.0313));
        let ind = ParameterSet::named("table1-inductive").unwrap();
        assert_eq!((ind.l_g, ind.r_g), (0.037, 0.0139));
        let res = ParameterSet::named("table1-resistive").unwrap();
        assert_eq!((res.l_g, res.r_g), (0.0196, 0.0313));
        assert!(matches!(
            ParameterSet::named("table2"),
            Err(Error::UnknownParameterSet(_))
        ));
    }

    #[test]
    fn document_round_trip_and_named() {
        let p = ParameterSet::table1_for(LineType::Resistive);
        let doc = serde_json::to_string(&p).unwrap();
        assert!(doc.contains("\"K_Pi\"") && doc.contains("\"kappa_2\""));
        assert_eq!(ParameterSet::from_json_str(&doc).unwrap(), p);
        assert_eq!(
            ParameterSet::from_json_str("\"table1-resistive\"").unwrap(),
            p
        );
    }

    #[test]
    fn rejects_bad_documents() {
        let mut v = serde_json::to_value(ParameterSet::table1()).unwrap();
        v["C"] = serde_json::json!(0.0);
        match ParameterSet::from_json_str(&v.to_string()) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "C"),
            other => panic!("expected rejection, got {other:?}"),
        }

        let mut v = serde_json::to_value(ParameterSet::table1()).unwrap();
        v.as_object_mut().unwrap().remove("K_Iv");
        match ParameterSet::from_json_str(&v.to_string()) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "K_Iv"),
            other => panic!("expected rejection, got {other:?}"),
        }

        let mut v = serde_json::to_value(ParameterSet::table1()).unwrap();
        v["K_pi"] = serde_json::json!(1.0);
        assert!(ParameterSet::from_json_str(&v.to_string()).is_err());

        let mut p = ParameterSet::table1();
        p.eps_sat = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn retuned_gain_warns() {
        let mut p = ParameterSet::table1();
        p.k_pi *= 1.5;
        let w = p.consistency_warnings();
        assert_eq!(w.len(), 1);
        assert!(w[0].starts_with("K_Pi"));
    }

    #[test]
    fn si_conversion() {
        let p = ParameterSet::table1();
        let wb = TAU * 60.0;
        assert_relative_eq!(
            p.to_si(BaseQuantity::Inductance, 0.0196),
            0.0196 * 208.0 * 208.0 / (1500.0 * wb),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            p.to_si(BaseQuantity::Voltage, 1.0),
            208.0 * 2f64.sqrt() / 3f64.sqrt(),
            max_relative = 1e-15
        );
        assert_eq!(p.to_si(BaseQuantity::Capacitance, 0.0), 0.0);
        assert_eq!("L_g".parse::<BaseQuantity>().unwrap(), BaseQuantity::Inductance);
        assert!(matches!(
            "flux".parse::<BaseQuantity>(),
            Err(Error::UnknownQuantity(_))
        ));
    }
}
