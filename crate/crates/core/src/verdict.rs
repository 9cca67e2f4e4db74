//! Per-degree cone evidence combined into a controllability verdict.
//!
//! For each degree `k` the orthant search either certifies an invariant cone
//! or it does not. Without an orthant, the orbit cones of the semigroup at
//! `k` and of the inverse semigroup at `d − k` are sampled; a verified
//! non-pointed orbit cone at either degree is evidence that no invariant cone
//! exists at `k`. The absence of every invariant cone for all `k` is what
//! controllability amounts to, so an all-clear report is evidence, not proof.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{inverse_system, nonpointedness_search, Budget, NonPointedCertificate, NonPointedEvidence, SeedSource, SystemSpec};
use crate::error::{Error, Result};
use crate::larc::{bracket_closure_dim, larc_algorithm1};
use crate::orthant::{family_invariant_orthants, OrthantCertificate, ORTHANT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KStatus {
    /// An invariant orthant exists: `k` belongs to the flag type.
    ConeCertified,
    /// A verified non-pointed orbit cone rules out invariant cones at `k`.
    NoConeEvidence,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KReport {
    pub k: usize,
    pub larc_interior: bool,
    pub orthant_certs: Vec<OrthantCertificate>,
    pub nonpointed_cert: Option<NonPointedCertificate>,
    /// Certificate at degree `d − k` for the inverse system.
    pub dual_nonpointed_cert: Option<NonPointedCertificate>,
    pub status: KStatus,
    /// Why the status is not stronger, when something went wrong or nothing was found.
    pub reason: Option<String>,
    /// Effort behind the searches, so that an empty result can be audited.
    pub budget: Budget,
}

fn derive_status(
    orthants: &[OrthantCertificate],
    direct: &Option<NonPointedCertificate>,
    dual: &Option<NonPointedCertificate>,
) -> KStatus {
    if !orthants.is_empty() {
        KStatus::ConeCertified
    } else if direct.is_some() || dual.is_some() {
        KStatus::NoConeEvidence
    } else {
        KStatus::Inconclusive
    }
}

fn check_degree(spec: &SystemSpec, k: usize) -> Result<()> {
    if k == 0 || k >= spec.d {
        return Err(Error::arg(format!("degree must lie in 1..{}, got {k}", spec.d)));
    }
    Ok(())
}

fn larc_interior(spec: &SystemSpec) -> Result<bool> {
    Ok(bracket_closure_dim(&spec.a, &spec.b)? == spec.lie_dim())
}

/// Evidence about invariant cones at degree `k`.
pub fn analyze_k(spec: &SystemSpec, k: usize, budget: &Budget) -> Result<KReport> {
    spec.validate()?;
    budget.validate()?;
    check_degree(spec, k)?;
    analyze_k_with(spec, k, budget, larc_interior(spec)?)
}

fn search(spec: &SystemSpec, k: usize, budget: &Budget, label: &str, notes: &mut Vec<String>) -> Option<NonPointedCertificate> {
    match nonpointedness_search(spec, k, budget) {
        Ok(cert) => cert,
        Err(e) => {
            notes.push(format!("{label} search failed: {e}"));
            None
        }
    }
}

fn analyze_k_with(spec: &SystemSpec, k: usize, budget: &Budget, interior: bool) -> Result<KReport> {
    let mut report = KReport {
        k,
        larc_interior: interior,
        orthant_certs: Vec::new(),
        nonpointed_cert: None,
        dual_nonpointed_cert: None,
        status: KStatus::Inconclusive,
        reason: None,
        budget: budget.clone(),
    };
    if !interior {
        report.reason = Some("bracket closure is smaller than sl(d): the semigroup has empty interior".into());
        return Ok(report);
    }
    let mut notes = Vec::new();
    match family_invariant_orthants(spec, k, ORTHANT_TOL) {
        Ok(certs) => report.orthant_certs = certs,
        Err(Error::Capacity(msg)) => notes.push(format!("orthant search: {msg}")),
        Err(e) => return Err(e),
    }
    if report.orthant_certs.is_empty() {
        let inverse = inverse_system(spec);
        let (direct, dual) = rayon::join(
            || {
                let mut n = Vec::new();
                (search(spec, k, budget, "direct", &mut n), n)
            },
            || {
                let mut n = Vec::new();
                (search(&inverse, spec.d - k, budget, "dual", &mut n), n)
            },
        );
        report.nonpointed_cert = direct.0;
        report.dual_nonpointed_cert = dual.0;
        notes.extend(direct.1);
        notes.extend(dual.1);
    }
    report.status = derive_status(&report.orthant_certs, &report.nonpointed_cert, &report.dual_nonpointed_cert);
    if report.status == KStatus::Inconclusive && notes.is_empty() {
        notes.push("no orthant and no non-pointed orbit cone within the budget".into());
    }
    if !notes.is_empty() {
        report.reason = Some(notes.join("; "));
    }
    Ok(report)
}

/// Raise a consistency error if an orthant certificate and a verified
/// non-pointedness certificate (direct, or dual through the inverse system)
/// coexist at degree `k`. Runs every search regardless of the orthant outcome.
pub fn consistency_check(spec: &SystemSpec, k: usize, budget: &Budget) -> Result<()> {
    spec.validate()?;
    check_degree(spec, k)?;
    let orthants = family_invariant_orthants(spec, k, ORTHANT_TOL)?;
    if orthants.is_empty() {
        return Ok(());
    }
    let direct = nonpointedness_search(spec, k, budget)?;
    let dual = nonpointedness_search(&inverse_system(spec), spec.d - k, budget)?;
    if direct.is_some() || dual.is_some() {
        return Err(Error::Consistency(format!(
            "degree {k}: orthant {} is invariant, yet a non-pointed orbit cone was certified ({})",
            orthants[0].pattern,
            if direct.is_some() { "direct" } else { "dual" }
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Some degree carries an invariant orthant; certified.
    NotControllable,
    /// Every degree shows a non-pointed orbit cone; heuristic.
    ControllableEvidence,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LarcSummary {
    pub algorithm1: bool,
    pub closure_dim: usize,
    pub target: usize,
}

impl LarcSummary {
    pub fn compute(spec: &SystemSpec) -> Result<Self> {
        let target = spec.lie_dim();
        Ok(LarcSummary {
            algorithm1: larc_algorithm1(&spec.a, &spec.b, target)?,
            closure_dim: bracket_closure_dim(&spec.a, &spec.b)?,
            target,
        })
    }

    pub fn interior(&self) -> bool {
        self.closure_dim == self.target
    }

    pub fn disagreement(&self) -> bool {
        self.algorithm1 != self.interior()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagTypeEstimate {
    /// Degrees with a certified invariant cone.
    pub certified: BTreeSet<usize>,
    /// Degrees where neither a cone nor its absence could be shown.
    pub candidates: BTreeSet<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub spec: SystemSpec,
    pub budget: Budget,
    pub larc: LarcSummary,
    pub larc_disagreement: bool,
    pub k_reports: Vec<KReport>,
    pub flag_type_estimate: FlagTypeEstimate,
    pub verdict: Verdict,
}

fn assemble(spec: &SystemSpec, k_reports: &[KReport], interior: bool) -> (FlagTypeEstimate, Verdict) {
    let mut flag = FlagTypeEstimate::default();
    for r in k_reports {
        match r.status {
            KStatus::ConeCertified => {
                flag.certified.insert(r.k);
            }
            KStatus::Inconclusive => {
                flag.candidates.insert(r.k);
            }
            KStatus::NoConeEvidence => {}
        }
    }
    let complete = k_reports.iter().map(|r| r.k).collect::<BTreeSet<_>>() == (1..spec.d).collect();
    let verdict = if !flag.certified.is_empty() {
        Verdict::NotControllable
    } else if interior && complete && k_reports.iter().all(|r| r.status == KStatus::NoConeEvidence) {
        Verdict::ControllableEvidence
    } else {
        Verdict::Inconclusive
    };
    (flag, verdict)
}

/// Full pipeline over every degree `1..d`.
pub fn analyze(spec: &SystemSpec, budget: &Budget) -> Result<AnalysisReport> {
    let ks: Vec<usize> = (1..spec.d).collect();
    analyze_degrees(spec, budget, &ks)
}

/// Pipeline restricted to the given degrees. A report that leaves out some
/// degree can certify non-controllability but never the opposite.
pub fn analyze_degrees(spec: &SystemSpec, budget: &Budget, ks: &[usize]) -> Result<AnalysisReport> {
    spec.validate()?;
    budget.validate()?;
    let ks: BTreeSet<usize> = ks.iter().copied().collect();
    for &k in &ks {
        check_degree(spec, k)?;
    }
    let larc = LarcSummary::compute(spec)?;
    let interior = larc.interior();
    let k_reports = ks
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| analyze_k_with(spec, k, budget, interior))
        .collect::<Result<Vec<_>>>()?;
    let (flag_type_estimate, verdict) = assemble(spec, &k_reports, interior);
    Ok(AnalysisReport {
        spec: spec.clone(),
        budget: budget.clone(),
        larc_disagreement: larc.disagreement(),
        larc,
        k_reports,
        flag_type_estimate,
        verdict,
    })
}

fn set_text(s: &BTreeSet<usize>) -> String {
    let items: Vec<String> = s.iter().map(|k| k.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

fn describe(cert: &NonPointedCertificate) -> String {
    let seed = match &cert.seed.source {
        SeedSource::Attractor { .. } => "attractor seed".to_string(),
        SeedSource::Basis { index } => format!("seed e_{index}"),
        SeedSource::Given => "given seed".to_string(),
    };
    match &cert.evidence {
        NonPointedEvidence::LinePair { alignment, .. } => {
            format!("line pair with alignment {alignment:.9} from {seed}")
        }
        NonPointedEvidence::Hull { support, residual } => {
            format!("hull of {} directions with residual {residual:.1e} from {seed}", support.len())
        }
    }
}

impl AnalysisReport {
    pub fn report(&self, k: usize) -> Option<&KReport> {
        self.k_reports.iter().find(|r| r.k == k)
    }

    /// Human-readable summary; the last line carries the verdict.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "system: d = {}, control: {:?}, seed: {}", self.spec.d, self.spec.control, self.spec.rng_seed);
        let _ = writeln!(
            s,
            "larc: algorithm1 {}; closure dim {}/{}{}",
            self.larc.algorithm1,
            self.larc.closure_dim,
            self.larc.target,
            if self.larc_disagreement { " (DISAGREEMENT)" } else { "" }
        );
        for r in &self.k_reports {
            let line = match r.status {
                KStatus::ConeCertified => {
                    let c = &r.orthant_certs[0];
                    let more = if r.orthant_certs.len() > 1 {
                        format!(" and {} more", r.orthant_certs.len() - 1)
                    } else {
                        String::new()
                    };
                    format!("cone certified: invariant orthant {} (slack {:.3e}){more}", c.pattern, c.slack)
                }
                KStatus::NoConeEvidence => {
                    let mut parts = Vec::new();
                    if let Some(c) = &r.nonpointed_cert {
                        parts.push(format!("direct: {}", describe(c)));
                    }
                    if let Some(c) = &r.dual_nonpointed_cert {
                        parts.push(format!("inverse system at degree {}: {}", c.k, describe(c)));
                    }
                    format!("no cone (non-pointed orbit cone; {})", parts.join("; "))
                }
                KStatus::Inconclusive => {
                    format!("inconclusive ({})", r.reason.as_deref().unwrap_or("no evidence"))
                }
            };
            let _ = writeln!(s, "k = {}: {line}", r.k);
        }
        let ks = |status: KStatus| -> Vec<String> {
            self.k_reports.iter().filter(|r| r.status == status).map(|r| r.k.to_string()).collect()
        };
        match self.verdict {
            Verdict::NotControllable => {
                if !self.flag_type_estimate.candidates.is_empty() {
                    let _ = writeln!(s, "undecided degrees: {}", set_text(&self.flag_type_estimate.candidates));
                }
                let _ = write!(
                    s,
                    "verdict: NOT CONTROLLABLE (certified); flag type estimate: {}",
                    set_text(&self.flag_type_estimate.certified)
                );
            }
            Verdict::ControllableEvidence => {
                let _ = writeln!(
                    s,
                    "note: controllability is inferred from sampled orbit cones, not proved"
                );
                let _ = write!(
                    s,
                    "verdict: CONTROLLABLE (evidence: non-pointed at k = {})",
                    ks(KStatus::NoConeEvidence).join(",")
                );
            }
            Verdict::Inconclusive => {
                let why = if !self.larc.interior() {
                    "bracket closure does not span sl(d)".to_string()
                } else if ks(KStatus::Inconclusive).is_empty() {
                    "not every degree was analysed".to_string()
                } else {
                    format!("no evidence at k = {}", ks(KStatus::Inconclusive).join(","))
                };
                let _ = write!(s, "verdict: INCONCLUSIVE ({why})");
            }
        }
        s.push('\n');
        s
    }

    /// Re-check everything the report claims from the system alone.
    pub fn verify(&self) -> Result<VerifySummary> {
        let spec = &self.spec;
        spec.validate().map_err(|e| Error::Certificate(format!("system: {e}")))?;
        let larc = LarcSummary::compute(spec)?;
        if larc != self.larc || larc.disagreement() != self.larc_disagreement {
            return Err(Error::Certificate("LARC summary does not match its recomputation".into()));
        }
        let inverse = inverse_system(spec);
        let mut summary = VerifySummary::default();
        for r in &self.k_reports {
            check_degree(spec, r.k).map_err(|e| Error::Certificate(e.to_string()))?;
            if r.larc_interior != larc.interior() {
                return Err(Error::Certificate(format!("k = {}: interior flag is wrong", r.k)));
            }
            for c in &r.orthant_certs {
                if c.k != r.k {
                    return Err(Error::Certificate(format!("k = {}: orthant certificate for degree {}", r.k, c.k)));
                }
                c.verify(spec, ORTHANT_TOL)?;
                summary.orthant += 1;
            }
            if let Some(c) = &r.nonpointed_cert {
                if c.k != r.k {
                    return Err(Error::Certificate(format!("k = {}: certificate for degree {}", r.k, c.k)));
                }
                c.verify(spec)?;
                summary.nonpointed += 1;
            }
            if let Some(c) = &r.dual_nonpointed_cert {
                if c.k != spec.d - r.k {
                    return Err(Error::Certificate(format!("k = {}: dual certificate for degree {}", r.k, c.k)));
                }
                c.verify(&inverse)?;
                summary.nonpointed += 1;
            }
            if !r.orthant_certs.is_empty() && (r.nonpointed_cert.is_some() || r.dual_nonpointed_cert.is_some()) {
                return Err(Error::Consistency(format!(
                    "k = {}: orthant and non-pointedness certificates together",
                    r.k
                )));
            }
            let status = derive_status(&r.orthant_certs, &r.nonpointed_cert, &r.dual_nonpointed_cert);
            if status != r.status {
                return Err(Error::Certificate(format!("k = {}: status {:?} not supported", r.k, r.status)));
            }
        }
        let (flag, verdict) = assemble(spec, &self.k_reports, larc.interior());
        if flag != self.flag_type_estimate || verdict != self.verdict {
            return Err(Error::Certificate("verdict does not follow from the per-degree reports".into()));
        }
        Ok(summary)
    }
}

/// Counts of certificates a successful [`AnalysisReport::verify`] rechecked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifySummary {
    pub orthant: usize,
    pub nonpointed: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ControlModel;
    use crate::linalg::{from_rows, Matrix};
    use nalgebra::DVector;

    #[test]
    fn metzler_plane_system_is_not_controllable() {
        let a = from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let b = Matrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1.0]));
        let spec = SystemSpec::new(a, b, ControlModel::Unbounded, 42).unwrap();
        let report = analyze(&spec, &Budget::default()).unwrap();
        assert_eq!(report.verdict, Verdict::NotControllable);
        assert_eq!(report.flag_type_estimate.certified, BTreeSet::from([1]));
        assert!(report.render_text().trim_end().ends_with("flag type estimate: {1}"));
        report.verify().unwrap();
    }

    #[test]
    fn commuting_generators_are_inconclusive() {
        let a = Matrix::from_diagonal(&DVector::from_column_slice(&[1.0, 2.0, -3.0]));
        let b = Matrix::from_diagonal(&DVector::from_column_slice(&[0.5, -1.0, 0.5]));
        let spec = SystemSpec::new(a, b, ControlModel::Unbounded, 42).unwrap();
        let report = analyze(&spec, &Budget::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Inconclusive);
        assert!(report.k_reports.iter().all(|r| !r.larc_interior && r.status == KStatus::Inconclusive));
        assert_eq!(report.flag_type_estimate.candidates, BTreeSet::from([1, 2]));
        report.verify().unwrap();
    }

    #[test]
    fn tampered_reports_fail_verification() {
        let a = from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let b = Matrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1.0]));
        let spec = SystemSpec::new(a, b, ControlModel::Unbounded, 42).unwrap();
        let mut report = analyze(&spec, &Budget::default()).unwrap();
        report.verdict = Verdict::ControllableEvidence;
        assert!(report.verify().is_err());
    }
}
