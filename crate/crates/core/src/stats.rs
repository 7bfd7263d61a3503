//! Significance tests: one-way ANOVA and two-sample t-tests on top of a
//! regularized incomplete beta function.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Condition, Intent, IntentCatalog, Transcript};
use crate::metrics::intent_runs;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("need at least {need} groups, got {got}")]
    TooFewGroups { need: usize, got: usize },
    #[error("group {group} has {n} observations; need at least 2")]
    TooFewObservations { group: usize, n: usize },
    #[error("continued fraction did not converge for a={a}, b={b}, x={x}")]
    NoConvergence { a: f64, b: f64, x: f64 },
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for I_x(a, b), modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64, StatsError> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(StatsError::NoConvergence { a, b, x })
}

/// Regularized incomplete beta I_x(a, b).
pub fn reg_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64, StatsError> {
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(StatsError::Domain(format!("a={a}, b={b} must be positive and finite")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(StatsError::Domain(format!("x={x} must lie in [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((front * beta_cf(a, b, x)? / a).clamp(0.0, 1.0))
    } else {
        Ok((1.0 - front * beta_cf(b, a, 1.0 - x)? / b).clamp(0.0, 1.0))
    }
}

/// P(F > f) for F ~ F(d1, d2).
pub fn f_sf(f: f64, d1: f64, d2: f64) -> Result<f64, StatsError> {
    if f.is_nan() || f < 0.0 {
        return Err(StatsError::Domain(format!("F={f}")));
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    reg_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Two-sided P(|T| > |t|) for T ~ t(df).
pub fn t_two_sided(t: f64, df: f64) -> Result<f64, StatsError> {
    if t.is_nan() {
        return Err(StatsError::Domain("t is NaN".into()));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    reg_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    OneWayAnova,
    StudentT,
    WelchT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TVariant {
    Pooled,
    #[default]
    Welch,
}

/// Test statistic, degrees of freedom and p-value. `p_value` is `None`
/// when the test is undefined (no variance at all).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub test: TestKind,
    #[serde(with = "extended_f64")]
    pub statistic: f64,
    pub df: Vec<f64>,
    pub p_value: Option<f64>,
}

/// Non-finite statistics as strings so that JSON stays lossless.
mod extended_f64 {
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        match v {
            v if v.is_finite() => Repr::Num(*v),
            v if v.is_nan() => Repr::Text("nan".into()),
            v if *v > 0.0 => Repr::Text("inf".into()),
            _ => Repr::Text("-inf".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(D::Error::custom(format!("bad statistic {other:?}"))),
            },
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sum of squared deviations from the mean.
fn ss(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum()
}

fn check_groups<S: AsRef<[f64]>>(groups: &[S]) -> Result<(), StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups { need: 2, got: groups.len() });
    }
    for (k, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(StatsError::TooFewObservations { group: k, n: g.len() });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::Domain(format!("group {k} has a non-finite value")));
        }
    }
    Ok(())
}

pub fn one_way_anova<S: AsRef<[f64]>>(groups: &[S]) -> Result<StatResult, StatsError> {
    check_groups(groups)?;
    let all: Vec<f64> = groups.iter().flat_map(|g| g.as_ref().iter().copied()).collect();
    let grand = mean(&all);
    let k = groups.len() as f64;
    let n = all.len() as f64;
    let ssb: f64 = groups
        .iter()
        .map(|g| {
            let g = g.as_ref();
            g.len() as f64 * (mean(g) - grand).powi(2)
        })
        .sum();
    let ssw: f64 = groups.iter().map(|g| ss(g.as_ref())).sum();
    let (d1, d2) = (k - 1.0, n - k);
    // Round-off floor relative to the data scale.
    let scale = all.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    let zero = |v: f64| v <= scale * 1e-24;
    let (statistic, p_value) = match (zero(ssb), zero(ssw)) {
        (true, true) => (f64::NAN, None),
        (true, false) => (0.0, Some(1.0)),
        (false, true) => (f64::INFINITY, Some(0.0)),
        (false, false) => {
            let f = (ssb / d1) / (ssw / d2);
            (f, Some(f_sf(f, d1, d2)?))
        }
    };
    Ok(StatResult { test: TestKind::OneWayAnova, statistic, df: vec![d1, d2], p_value })
}

pub fn two_sample_t(a: &[f64], b: &[f64], variant: TVariant) -> Result<StatResult, StatsError> {
    check_groups(&[a, b])?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (ss(a) / (na - 1.0), ss(b) / (nb - 1.0));
    let diff = mean(a) - mean(b);
    let (se2, df, test) = match variant {
        TVariant::Pooled => {
            let sp = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
            (sp * (1.0 / na + 1.0 / nb), na + nb - 2.0, TestKind::StudentT)
        }
        TVariant::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            (se2, df, TestKind::WelchT)
        }
    };
    if se2 <= 0.0 {
        let statistic = if diff == 0.0 { f64::NAN } else { diff.signum() * f64::INFINITY };
        let df = if df.is_finite() { df } else { na + nb - 2.0 };
        return Ok(StatResult { test, statistic, df: vec![df], p_value: None });
    }
    let t = diff / se2.sqrt();
    Ok(StatResult { test, statistic: t, df: vec![df], p_value: Some(t_two_sided(t, df)?) })
}

/// t-test for two groups, ANOVA for three or more.
pub fn compare_groups<S: AsRef<[f64]>>(groups: &[S], variant: TVariant) -> Result<StatResult, StatsError> {
    match groups {
        [a, b] => two_sample_t(a.as_ref(), b.as_ref(), variant),
        _ => one_way_anova(groups),
    }
}

/// Per-persona success rate, grouped by condition; personas ordered by id.
pub fn persona_success_rates(transcripts: &[Transcript]) -> BTreeMap<Condition, Vec<f64>> {
    let mut tallies: BTreeMap<Condition, BTreeMap<&str, (u32, u32)>> = BTreeMap::new();
    for t in transcripts {
        let e = tallies.entry(t.condition).or_default().entry(&t.persona_id).or_default();
        e.0 += t.success as u32;
        e.1 += 1;
    }
    tallies
        .into_iter()
        .map(|(c, personas)| (c, personas.values().map(|(s, n)| *s as f64 / *n as f64).collect()))
        .collect()
}

/// Per-persona turns-to-success averages (personas with no success are skipped).
pub fn persona_avg_turns(transcripts: &[Transcript]) -> BTreeMap<Condition, Vec<f64>> {
    let mut tallies: BTreeMap<Condition, BTreeMap<&str, (usize, u32)>> = BTreeMap::new();
    for t in transcripts.iter().filter(|t| t.success) {
        let e = tallies.entry(t.condition).or_default().entry(&t.persona_id).or_default();
        e.0 += t.turn_count();
        e.1 += 1;
    }
    tallies
        .into_iter()
        .map(|(c, personas)| (c, personas.values().map(|(s, n)| *s as f64 / *n as f64).collect()))
        .collect()
}

/// Per-persona normalized intent frequencies for one catalog intent:
/// runs of that intent over all of the persona's intent runs (0 when none).
pub fn persona_intent_frequencies(
    transcripts: &[Transcript],
    catalog: &IntentCatalog,
    chit_chat_breaks_runs: bool,
) -> BTreeMap<Condition, Vec<BTreeMap<Intent, f64>>> {
    // per persona: (runs of each intent, all runs)
    type Tally = (BTreeMap<Intent, u64>, u64);
    let mut counts: BTreeMap<Condition, BTreeMap<&str, Tally>> = BTreeMap::new();
    for t in transcripts {
        let e = counts.entry(t.condition).or_default().entry(&t.persona_id).or_default();
        for intent in intent_runs(t.thoughts(), chit_chat_breaks_runs) {
            e.1 += 1;
            if catalog.contains(intent) {
                *e.0.entry(intent.clone()).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(c, personas)| {
            let rows = personas
                .into_values()
                .map(|(per, total)| {
                    catalog
                        .intents()
                        .iter()
                        .map(|i| {
                            let n = per.get(i).copied().unwrap_or(0);
                            let f = if total == 0 { 0.0 } else { n as f64 / total as f64 };
                            (i.clone(), f)
                        })
                        .collect()
                })
                .collect();
            (c, rows)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentTest {
    pub intent: Intent,
    pub result: StatResult,
    /// Number of intents tested; informational only.
    pub bonferroni_factor: usize,
}

/// One ANOVA per catalog intent across conditions, observation unit the
/// per-persona normalized intent frequency.
pub fn occupation_intent_anova(
    transcripts: &[Transcript],
    catalog: &IntentCatalog,
    chit_chat_breaks_runs: bool,
) -> Result<Vec<IntentTest>, StatsError> {
    let freqs = persona_intent_frequencies(transcripts, catalog, chit_chat_breaks_runs);
    if freqs.len() < 2 {
        return Err(StatsError::TooFewGroups { need: 2, got: freqs.len() });
    }
    let k = catalog.intents().len();
    catalog
        .intents()
        .iter()
        .map(|intent| {
            let groups: Vec<Vec<f64>> = freqs
                .values()
                .map(|rows| rows.iter().map(|r| r[intent]).collect())
                .collect();
            Ok(IntentTest { intent: intent.clone(), result: one_way_anova(&groups)?, bonferroni_factor: k })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        assert!(close(reg_incomplete_beta(1.0, 1.0, 0.5).unwrap(), 0.5, 1e-15));
        assert!(close(reg_incomplete_beta(1.0, 3.0, 0.2).unwrap(), 0.488, 1e-12));
        assert!(close(reg_incomplete_beta(2.0, 2.0, 0.5).unwrap(), 0.5, 1e-12));
        assert_eq!(reg_incomplete_beta(3.0, 4.0, 0.0).unwrap(), 0.0);
        assert_eq!(reg_incomplete_beta(3.0, 4.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn incomplete_beta_reference_values() {
        // scipy.special.betainc
        let cases = [
            (2.5, 4.0, 0.3, 0.3521975859067672),
            (0.5, 0.5, 0.9, 0.7951672353008665),
            (10.0, 3.0, 0.05, 5.872802734375002e-12),
            (50.0, 40.0, 0.6, 0.8011534179744886),
            (2.0, 200.0, 0.999, 1.0),
        ];
        for (a, b, x, want) in cases {
            let got = reg_incomplete_beta(a, b, x).unwrap();
            assert!(close(got, want, 1e-12), "I_{x}({a},{b}) = {got}, want {want}");
        }
    }

    #[test]
    fn incomplete_beta_domain() {
        assert!(reg_incomplete_beta(0.0, 1.0, 0.5).is_err());
        assert!(reg_incomplete_beta(1.0, -1.0, 0.5).is_err());
        assert!(reg_incomplete_beta(1.0, 1.0, 1.5).is_err());
        assert!(reg_incomplete_beta(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..30 {
            assert!(close(ln_gamma(n as f64), fact.ln(), 1e-12 * fact.ln().abs().max(1.0)), "n={n}");
            fact *= n as f64;
        }
        assert!(close(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), 1e-14));
    }

    #[test]
    fn tails() {
        assert!(close(f_sf(3.0, 2.0, 6.0).unwrap(), 0.125, 1e-12));
        assert!(close(t_two_sided(2.0, 7.0).unwrap(), 0.08561932856297597, 1e-12));
        assert_eq!(f_sf(f64::INFINITY, 2.0, 6.0).unwrap(), 0.0);
        assert_eq!(t_two_sided(0.0, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn anova_small_example() {
        let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0]]).unwrap();
        assert!(close(r.statistic, 3.0, 1e-9));
        assert_eq!(r.df, [2.0, 6.0]);
        assert!(close(r.p_value.unwrap(), 0.125, 1e-12));
    }

    #[test]
    fn anova_textbook_dataset() {
        // scipy.stats.f_oneway
        let r = one_way_anova(&[
            vec![6.0, 8.0, 4.0, 5.0, 3.0, 4.0],
            vec![8.0, 12.0, 9.0, 11.0, 6.0, 8.0],
            vec![13.0, 9.0, 11.0, 8.0, 7.0, 12.0],
        ])
        .unwrap();
        assert!(close(r.statistic, 9.264705882352942, 1e-9));
        assert_eq!(r.df, [2.0, 15.0]);
        assert!(close(r.p_value.unwrap(), 0.0023987773293929083, 1e-6));
    }

    #[test]
    fn anova_degenerate_cases() {
        let r = one_way_anova(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, Some(1.0));
        let r = one_way_anova(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(r.statistic.is_nan());
        assert_eq!(r.p_value, None);
        let r = one_way_anova(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(r.p_value, Some(0.0));
        assert!(matches!(one_way_anova(&[vec![1.0, 2.0]]), Err(StatsError::TooFewGroups { .. })));
        assert!(matches!(
            one_way_anova(&[vec![1.0, 2.0], vec![3.0]]),
            Err(StatsError::TooFewObservations { group: 1, n: 1 })
        ));
    }

    const A: [f64; 6] = [19.1, 20.3, 18.7, 21.2, 19.9, 20.5];
    const B: [f64; 5] = [21.4, 22.0, 20.9, 23.1, 21.7];

    #[test]
    fn t_tests_against_reference() {
        // scipy.stats.ttest_ind(equal_var=True / False)
        let r = two_sample_t(&A, &B, TVariant::Pooled).unwrap();
        assert!(close(r.statistic, -3.5059532847387054, 1e-9));
        assert_eq!(r.df, [9.0]);
        assert!(close(r.p_value.unwrap(), 0.0066608618744947974, 1e-6));
        let r = two_sample_t(&A, &B, TVariant::Welch).unwrap();
        assert!(close(r.statistic, -3.5472952155871496, 1e-9));
        assert!(close(r.df[0], 8.933779009640764, 1e-9));
        assert!(close(r.p_value.unwrap(), 0.006315854767526628, 1e-6));
    }

    #[test]
    fn t_test_null_and_antisymmetry() {
        let x = [1.0, 2.0, 3.0, 4.0];
        for v in [TVariant::Pooled, TVariant::Welch] {
            let r = two_sample_t(&x, &x, v).unwrap();
            assert_eq!(r.statistic, 0.0);
            assert!(close(r.p_value.unwrap(), 1.0, 1e-12));
            let ab = two_sample_t(&A, &B, v).unwrap();
            let ba = two_sample_t(&B, &A, v).unwrap();
            assert_eq!(ab.statistic, -ba.statistic);
            assert_eq!(ab.p_value, ba.p_value);
        }
        let r = two_sample_t(&[1.0, 1.0], &[2.0, 2.0], TVariant::Welch).unwrap();
        assert_eq!(r.p_value, None);
    }

    #[test]
    fn stat_result_json_keeps_infinities() {
        let r = StatResult { test: TestKind::OneWayAnova, statistic: f64::INFINITY, df: vec![1.0, 2.0], p_value: Some(0.0) };
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<StatResult>(&json).unwrap(), r);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn reflection_identity(a in 0.05f64..60.0, b in 0.05f64..60.0, x in 0.0f64..=1.0) {
            let s = reg_incomplete_beta(a, b, x).unwrap() + reg_incomplete_beta(b, a, 1.0 - x).unwrap();
            prop_assert!((s - 1.0).abs() <= 1e-12, "sum {}", s);
        }

        #[test]
        fn agrees_with_statrs(a in 0.1f64..100.0, b in 0.1f64..100.0, x in 0.0f64..=1.0) {
            let ours = reg_incomplete_beta(a, b, x).unwrap();
            let theirs = statrs::function::beta::beta_reg(a, b, x);
            prop_assert!((ours - theirs).abs() <= 1e-10, "{} vs {}", ours, theirs);
        }

        #[test]
        fn anova_shift_and_scale_invariant(
            groups in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 2..8), 2..5),
            shift in -1e3f64..1e3,
            scale in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
        ) {
            let base = one_way_anova(&groups).unwrap();
            prop_assume!(base.statistic.is_finite() && base.statistic > 1e-6);
            let moved: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|x| x * scale + shift).collect()).collect();
            let r = one_way_anova(&moved).unwrap();
            prop_assert!((r.statistic - base.statistic).abs() <= 1e-6 * base.statistic.max(1.0));
        }

        #[test]
        fn p_monotone_in_statistic(f1 in 0.0f64..50.0, f2 in 0.0f64..50.0, d1 in 1u32..10, d2 in 1u32..60, t in 0.0f64..20.0, dt in 0.0f64..20.0) {
            let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
            prop_assert!(f_sf(hi, d1 as f64, d2 as f64).unwrap() <= f_sf(lo, d1 as f64, d2 as f64).unwrap() + 1e-15);
            let df = d2 as f64;
            prop_assert!(t_two_sided(t + dt, df).unwrap() <= t_two_sided(t, df).unwrap() + 1e-15);
            prop_assert_eq!(t_two_sided(-t, df).unwrap(), t_two_sided(t, df).unwrap());
        }

        #[test]
        fn p_values_are_probabilities(a in prop::collection::vec(-10.0f64..10.0, 2..10), b in prop::collection::vec(-10.0f64..10.0, 2..10)) {
            for v in [TVariant::Pooled, TVariant::Welch] {
                if let Some(p) = two_sample_t(&a, &b, v).unwrap().p_value {
                    prop_assert!((0.0..=1.0).contains(&p));
                }
            }
            if let Some(p) = one_way_anova(&[&a[..], &b[..]]).unwrap().p_value {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
