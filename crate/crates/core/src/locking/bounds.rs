use serde::{Deserialize, Serialize};

use super::scheme::LockingScheme;
use crate::entropy::DeltaOrder;
use crate::error::{Error, Result};

/// `2 Δ_{E,∞} / √(K·E)`.
pub fn expectation_bound(scheme: &LockingScheme) -> f64 {
    let (_, k, e) = scheme.dims();
    2.0 * scheme.delta_e(DeltaOrder::Inf) / ((k * e) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzSide {
    Unitary,
    Measurement,
}

/// Unitary side: `4η √(Δ_{M,∞} Δ_{E,∞} / (M·E))` against `‖U − V‖₂`.
/// Measurement side: `(2√(C·E′)/s) √(Δ_{M,2} Δ_{E,2})` against the
/// quasi-measurement metric.
pub fn lipschitz_constant(
    scheme: &LockingScheme,
    side: LipschitzSide,
    s: usize,
    eta: f64,
) -> Result<f64> {
    let (c, _, e) = scheme.dims();
    match side {
        LipschitzSide::Unitary => {
            if !(eta >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "eta must be at least 1, got {eta}"
                )));
            }
            let m = scheme.n_messages() as f64;
            let dd = scheme.delta_m(DeltaOrder::Inf) * scheme.delta_e(DeltaOrder::Inf);
            Ok(4.0 * eta * (dd / (m * e as f64)).sqrt())
        }
        LipschitzSide::Measurement => {
            if s == 0 {
                return Err(Error::InvalidParameter("s must be positive".into()));
            }
            let ce = (c * scheme.e_prime()) as f64;
            let dd = scheme.delta_m(DeltaOrder::Two) * scheme.delta_e(DeltaOrder::Two);
            Ok(2.0 * ce.sqrt() / s as f64 * dd.sqrt())
        }
    }
}

/// Qubit counts (`C = 2^c` and so on) and entropy inputs in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdInput {
    pub n: f64,
    pub c: f64,
    pub k: f64,
    pub e: f64,
    pub eps: f64,
    pub p_fail: f64,
    pub hmin_m: f64,
    pub h2_m: f64,
    pub hmax_m: f64,
    pub hmin_e: f64,
    pub h2_e: f64,
}

impl ThresholdInput {
    /// Uniform `n`-bit message with maximal entanglement on `e` qubits.
    pub fn uniform(c: f64, k: f64, e: f64, eps: f64, p_fail: f64) -> Self {
        let n = c + k;
        Self {
            n,
            c,
            k,
            e,
            eps,
            p_fail,
            hmin_m: n,
            h2_m: n,
            hmax_m: n,
            hmin_e: e,
            h2_e: e,
        }
    }

    pub fn log2_delta_m_inf(&self) -> f64 {
        self.n - self.hmin_m
    }

    pub fn log2_delta_m_two(&self) -> f64 {
        self.n - self.h2_m
    }

    pub fn log2_delta_e_inf(&self) -> f64 {
        self.e - self.hmin_e
    }

    pub fn log2_delta_e_two(&self) -> f64 {
        self.e - self.h2_e
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            self.n,
            self.c,
            self.k,
            self.e,
            self.eps,
            self.p_fail,
            self.hmin_m,
            self.h2_m,
            self.hmax_m,
            self.hmin_e,
            self.h2_e,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "threshold inputs must be finite".into(),
            ));
        }
        if !(self.eps > 0.0 && self.eps <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, 2], got {}",
                self.eps
            )));
        }
        Ok(())
    }

    fn check_key_split(&self) -> Result<()> {
        if (self.n - (self.c + self.k)).abs() > 1e-9 {
            return Err(Error::SideCondition(format!(
                "n = c + k required, got n = {}, c + k = {}",
                self.n,
                self.c + self.k
            )));
        }
        Ok(())
    }

    fn log2_c_plus_e(&self) -> Result<f64> {
        let ce = self.c + self.e;
        if !(ce > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c + e must be positive, got {ce}"
            )));
        }
        Ok(ce.log2())
    }

    /// `log₂(ε √(KE) / Δ_{E,∞})`; the side condition `ε > a·Δ_{E,∞}/√(KE)`
    /// is `this > log₂ a`.
    fn log2_eps_margin(&self, with_delta: bool) -> f64 {
        let delta = if with_delta {
            self.log2_delta_e_inf()
        } else {
            0.0
        };
        self.eps.log2() + 0.5 * (self.k + self.e) - delta
    }

    fn check_eps(&self, factor: f64, with_delta: bool, name: &str) -> Result<()> {
        if self.log2_eps_margin(with_delta) <= factor.log2() {
            let what = if with_delta { "Δ_{E,∞}" } else { "1" };
            return Err(Error::SideCondition(format!(
                "{name}: eps > {factor}·{what}/√(KE) violated (eps = {})",
                self.eps
            )));
        }
        Ok(())
    }

    /// `p > 2^{−a (CE)²}` checked as `log₂ p > −a·2^{2(c+e)}`.
    fn check_p(&self, a: f64, name: &str) -> Result<()> {
        if !(self.p_fail > 0.0 && self.p_fail <= 1.0) {
            return Err(Error::SideCondition(format!(
                "{name}: failure probability must lie in (0, 1], got {}",
                self.p_fail
            )));
        }
        let floor = -a * (2.0 * (self.c + self.e)).exp2();
        if self.p_fail.log2() <= floor {
            return Err(Error::SideCondition(format!(
                "{name}: p > 2^(-{a}(CE)^2) violated (p = {:e})",
                self.p_fail
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    ThmLocking,
    CorUnihigh,
    CorModmod,
    CorUnihighPovm,
    CorModmodPovm,
    ThmDecode,
}

impl ThresholdKind {
    pub const ALL: [ThresholdKind; 6] = [
        ThresholdKind::ThmLocking,
        ThresholdKind::CorUnihigh,
        ThresholdKind::CorModmod,
        ThresholdKind::CorUnihighPovm,
        ThresholdKind::CorModmodPovm,
        ThresholdKind::ThmDecode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ThmLocking => "thm_locking",
            Self::CorUnihigh => "cor_unihigh",
            Self::CorModmod => "cor_modmod",
            Self::CorUnihighPovm => "cor_unihigh_povm",
            Self::CorModmodPovm => "cor_modmod_povm",
            Self::ThmDecode => "thm_decode",
        }
    }

    /// Locking variants give a minimum key size; the decoding variant a
    /// maximum.
    pub fn is_upper_limit(self) -> bool {
        matches!(self, Self::ThmDecode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdValue {
    pub kind: ThresholdKind,
    /// Right side of the key-size inequality, in bits.
    pub value: f64,
    /// Qubit count: `⌈value⌉` for lower limits, `⌊value⌋` for the upper one.
    pub qubits: f64,
    pub warnings: Vec<String>,
}

fn uniform_deficits_warning(t: &ThresholdInput, warnings: &mut Vec<String>) {
    if t.log2_delta_m_inf().abs() > 1e-12 || t.log2_delta_e_inf().abs() > 1e-12 {
        warnings.push(
            "entropy inputs are not uniform/maximal; the deficit-augmented variant applies".into(),
        );
    }
}

pub fn key_threshold(t: &ThresholdInput, which: ThresholdKind) -> Result<ThresholdValue> {
    t.validate()?;
    t.check_key_split()?;
    let name = which.name();
    let log_inv_eps = -t.eps.log2();
    let deficits = 0.5 * t.log2_delta_m_inf() + 0.5 * t.log2_delta_e_inf();
    let mut warnings = Vec::new();
    let value = match which {
        ThresholdKind::ThmLocking => {
            t.check_eps(16.0, true, name)?;
            deficits + t.log2_c_plus_e()? + 2.0 * log_inv_eps + 11.0
        }
        ThresholdKind::CorUnihigh => {
            t.check_eps(8.0, false, name)?;
            t.check_p(2.0, name)?;
            uniform_deficits_warning(t, &mut warnings);
            9.0 + 2.0 * log_inv_eps + 0.5 * t.log2_c_plus_e()?
        }
        ThresholdKind::CorModmod => {
            t.check_eps(8.0, true, name)?;
            t.check_p(2.0, name)?;
            if t.k >= t.c {
                warnings.push(format!("k < c is assumed but k = {} ≥ c = {}", t.k, t.c));
            }
            9.0 + 2.0 * log_inv_eps + 0.5 * t.log2_c_plus_e()? + deficits
        }
        ThresholdKind::CorUnihighPovm => {
            t.check_eps(16.0, false, name)?;
            t.check_p(9.0, name)?;
            uniform_deficits_warning(t, &mut warnings);
            11.0 + 2.0 * log_inv_eps + t.log2_c_plus_e()?
        }
        ThresholdKind::CorModmodPovm => {
            t.check_eps(16.0, true, name)?;
            t.check_p(9.0, name)?;
            11.0 + 2.0 * log_inv_eps + t.log2_c_plus_e()? + deficits
        }
        ThresholdKind::ThmDecode => decode_threshold(t)?,
    };
    let qubits = if which.is_upper_limit() {
        value.floor()
    } else {
        value.ceil()
    };
    Ok(ThresholdValue {
        kind: which,
        value,
        qubits,
        warnings,
    })
}

/// Largest key size for which decoding succeeds:
/// `½(n − H_max(M)) − ½(e − H₂(E)) − 2 log(1/ε) − 4`.
pub fn decode_threshold(t: &ThresholdInput) -> Result<f64> {
    t.validate()?;
    Ok(0.5 * (t.n - t.hmax_m) - 0.5 * (t.e - t.h2_e) + 2.0 * t.eps.log2() - 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Locking threshold minus decoding threshold.
    pub exact: f64,
    /// `½[H_max − H_min] + [e − H_min(E)] + log(c+e) + 4 log(1/ε) + 15`.
    pub stated: f64,
}

pub fn locking_decode_gap(t: &ThresholdInput) -> Result<GapReport> {
    let lock = key_threshold(t, ThresholdKind::ThmLocking)?.value;
    let dec = decode_threshold(t)?;
    let stated = 0.5 * (t.hmax_m - t.hmin_m) + (t.e - t.hmin_e) + t.log2_c_plus_e()?
        - 4.0 * t.eps.log2()
        + 15.0;
    Ok(GapReport {
        exact: lock - dec,
        stated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ConcentrationVariant {
    /// Fixed `(s, η)`-quasi-measurements.
    Quasi { s: f64, eta: f64 },
    /// All POVMs, with `s` and `η` fixed by the reduction.
    Povm,
}

/// Natural-log exponent of the concentration bound; the probability is
/// `min(1, exp(·))`.
pub fn concentration_exponent(t: &ThresholdInput, variant: ConcentrationVariant) -> Result<f64> {
    t.validate()?;
    let ln2 = std::f64::consts::LN_2;
    let ln_ce = (t.c + t.e) * ln2;
    let ln_dd2 = (t.log2_delta_m_two() + t.log2_delta_e_two()) * ln2;
    let ln_dd_inf = (t.log2_delta_m_inf() + t.log2_delta_e_inf()) * ln2;
    let ln_cke = (t.c + t.k + t.e) * ln2;
    let net_log = (40.0f64).ln() + 0.5 * ln_ce - t.eps.ln() + 0.5 * ln_dd2;
    let (offset_factor, entropy_term, ln_denominator) = match variant {
        ConcentrationVariant::Quasi { s, eta } => {
            if !(s > 0.0) || !(eta >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "need s > 0 and eta ≥ 1, got s = {s}, eta = {eta}"
                )));
            }
            let ln_sce = s.ln() + ln_ce;
            (
                4.0,
                2.0 * ln_sce.exp() * net_log,
                8.0 * ln2 + 2.0 * eta.ln() + ln_dd_inf,
            )
        }
        ConcentrationVariant::Povm => (
            8.0,
            9.0 * (2.0 * ln_ce).exp() * ln_ce * net_log,
            10.0 * ln2 + ln_dd_inf,
        ),
    };
    let offset = offset_factor * (t.log2_delta_e_inf() - 0.5 * (t.k + t.e)).exp2();
    if t.eps <= offset {
        return Err(Error::SideCondition(format!(
            "eps = {} does not exceed the offset {offset}; the bound is vacuous",
            t.eps
        )));
    }
    let ln_penalty = 2.0 * ln_cke - ln_denominator + 2.0 * (t.eps - offset).ln();
    Ok(entropy_term - ln_penalty.exp())
}

pub fn concentration_bound(t: &ThresholdInput, variant: ConcentrationVariant) -> Result<f64> {
    Ok(concentration_exponent(t, variant)?.exp().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::super::scheme::{maximally_entangled, uniform, LockingScheme};
    use super::*;
    use crate::haar::RngSpec;

    #[test]
    fn expectation_bound_examples() {
        let s = LockingScheme::uniform_haar(4, 16, &RngSpec::new(41, 0)).unwrap();
        assert!((expectation_bound(&s) - 0.5).abs() < 1e-12);
        let s =
            LockingScheme::haar((2, 4, 4), uniform(8), &uniform(4), &RngSpec::new(41, 1)).unwrap();
        assert!((expectation_bound(&s) - 2.0 / 4.0).abs() < 1e-12);
        assert!(maximally_entangled(4).is_ok());
    }

    #[test]
    fn lipschitz_closed_forms() {
        let s =
            LockingScheme::haar((2, 4, 4), uniform(8), &uniform(4), &RngSpec::new(42, 0)).unwrap();
        let u = lipschitz_constant(&s, LipschitzSide::Unitary, 0, 1.0).unwrap();
        assert!((u - 4.0 / (8.0f64 * 4.0).sqrt()).abs() < 1e-12);
        let m = lipschitz_constant(&s, LipschitzSide::Measurement, 8, 1.0).unwrap();
        assert!((m - 2.0 * 8f64.sqrt() / 8.0).abs() < 1e-12);
        assert!(lipschitz_constant(&s, LipschitzSide::Measurement, 0, 1.0).is_err());
    }

    fn hand(value: f64, t: &ThresholdInput, kind: ThresholdKind) {
        let got = key_threshold(t, kind).unwrap();
        assert_eq!(got.value, value, "{kind:?} at {t:?}");
    }

    #[test]
    fn closed_form_hand_values() {
        // c = e, k = 20 keeps the side conditions satisfied
        for (ce, base_uni, base_povm) in [(8.0, 10.5, 14.0), (16.0, 11.0, 15.0)] {
            for (eps, extra) in [(1.0, 0.0), (0.5, 2.0), (0.25, 4.0)] {
                let t = ThresholdInput::uniform(ce / 2.0, 20.0, ce / 2.0, eps, 0.01);
                hand(base_uni + extra, &t, ThresholdKind::CorUnihigh);
                hand(base_uni + extra, &t, ThresholdKind::CorModmod);
                hand(base_povm + extra, &t, ThresholdKind::CorUnihighPovm);
                hand(base_povm + extra, &t, ThresholdKind::CorModmodPovm);
                hand(base_povm + extra, &t, ThresholdKind::ThmLocking);
            }
        }
        let t = ThresholdInput::uniform(8.0, 20.0, 8.0, 0.25, 0.01);
        let v = key_threshold(&t, ThresholdKind::CorUnihighPovm).unwrap();
        assert_eq!((v.value, v.qubits), (19.0, 19.0));
        assert_eq!(
            key_threshold(&t, ThresholdKind::CorUnihigh).unwrap().value,
            15.0
        );
    }

    #[test]
    fn deficit_terms() {
        let mut t = ThresholdInput::uniform(4.0, 20.0, 4.0, 0.5, 0.01);
        t.hmin_m = t.n - 2.0;
        t.hmin_e = t.e - 1.0;
        let base = key_threshold(
            &ThresholdInput::uniform(4.0, 20.0, 4.0, 0.5, 0.01),
            ThresholdKind::CorModmodPovm,
        )
        .unwrap()
        .value;
        assert_eq!(
            key_threshold(&t, ThresholdKind::CorModmodPovm)
                .unwrap()
                .value,
            base + 1.5
        );
        let w = key_threshold(&t, ThresholdKind::CorModmod).unwrap();
        assert!(w.warnings.iter().any(|s| s.contains("k < c")));
        assert!(!key_threshold(&t, ThresholdKind::CorUnihighPovm)
            .unwrap()
            .warnings
            .is_empty());
    }

    #[test]
    fn side_conditions() {
        let t = ThresholdInput::uniform(2.0, 2.0, 0.0, 0.25, 0.01);
        assert!(matches!(
            key_threshold(&t, ThresholdKind::ThmLocking),
            Err(Error::SideCondition(_))
        ));
        let mut t = ThresholdInput::uniform(2.0, 20.0, 2.0, 0.25, 0.01);
        t.n += 1.0;
        assert!(matches!(
            key_threshold(&t, ThresholdKind::CorUnihigh),
            Err(Error::SideCondition(_))
        ));
        let t = ThresholdInput::uniform(0.5, 20.0, 0.0, 0.25, 1e-30);
        // (CE)² = 2, so p must exceed 2^-4 for the projective variants
        assert!(key_threshold(&t, ThresholdKind::CorUnihigh).is_err());
        let t = ThresholdInput::uniform(4.0, 20.0, 4.0, 0.0, 0.01);
        assert!(key_threshold(&t, ThresholdKind::CorUnihigh).is_err());
    }

    #[test]
    fn decode_threshold_examples() {
        let t = ThresholdInput::uniform(4.0, 0.0, 2.0, 0.25, 0.01);
        assert_eq!(decode_threshold(&t).unwrap(), -8.0);
        let t = ThresholdInput::uniform(4.0, 0.0, 2.0, 1.0, 0.01);
        assert_eq!(decode_threshold(&t).unwrap(), -4.0);
        let v = key_threshold(&t, ThresholdKind::ThmDecode).unwrap();
        assert_eq!(v.qubits, -4.0);
    }

    #[test]
    fn gap_matches_stated_expression() {
        let t = ThresholdInput::uniform(8.0, 20.0, 8.0, 0.25, 0.01);
        let g = locking_decode_gap(&t).unwrap();
        assert_eq!(g.exact, g.stated);
        assert_eq!(g.stated, 27.0);
        let mut t = t;
        t.hmax_m = t.n - 1.0;
        t.hmin_m = t.n - 3.0;
        t.hmin_e = t.e - 2.0;
        t.h2_e = t.e - 1.0;
        let g = locking_decode_gap(&t).unwrap();
        assert!(g.exact <= g.stated + 1e-12);
        t.h2_e = t.hmin_e;
        let g = locking_decode_gap(&t).unwrap();
        assert!((g.exact - g.stated).abs() < 1e-12);
    }

    #[test]
    fn concentration_examples() {
        let t = ThresholdInput::uniform(2.0, 2.0, 0.0, 0.5, 0.01);
        // offset 4/√K = 2 ≥ eps
        assert!(concentration_bound(&t, ConcentrationVariant::Quasi { s: 4.0, eta: 1.0 }).is_err());

        let (c, k, e, eps, s, eta) = (2.0f64, 10.0f64, 1.0f64, 0.5f64, 8.0f64, 1.0f64);
        let t = ThresholdInput::uniform(c, k, e, eps, 0.01);
        let (cc, kk, ee) = (c.exp2(), k.exp2(), e.exp2());
        let expected = 2.0 * s * cc * ee * (40.0 * (cc * ee).sqrt() / eps).ln()
            - (cc * kk * ee).powi(2) * (eps - 4.0 / (kk * ee).sqrt()).powi(2) / (256.0 * eta * eta);
        let got = concentration_exponent(&t, ConcentrationVariant::Quasi { s, eta }).unwrap();
        assert!((got - expected).abs() < 1e-9 * expected.abs());

        let mut prev = f64::INFINITY;
        for k in 8..16 {
            let t = ThresholdInput::uniform(2.0, k as f64, 1.0, 0.5, 0.01);
            let v = concentration_exponent(&t, ConcentrationVariant::Povm).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }
}
