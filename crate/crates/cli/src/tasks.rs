use std::fmt::Debug;

use num_complex::Complex64;
use serde_json::{json, Value};

use nhband::gbz::{
    agbz_implicit_with_cap, agbz_sample_adaptive_with, agbz_sample_theta_with, default_theta_grid, gbz_extract,
    AgbzPoint, GbzError,
};
use nhband::intersect::{
    find_intersections, verify_correspondence, verify_nfold_condition, BzContact, IntersectError, SelfIntersection,
};
use nhband::model::{nfold_phases, Model, ModelError};
use nhband::polyalg::PolyError;
use nhband::spectra::{obc_finite, obc_thermodynamic, pbc_spectrum, ObcSource, SpectraError};
use nhband::topology::{winding_raster, BBox, TopologyError};

use crate::config::{ModelSpec, Params, RunConfig, Task};
use crate::output::{float, json, Table};
use crate::CliError;

/// Files and bookkeeping produced by one task.
#[derive(Default)]
pub struct TaskOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
    pub warnings: Vec<Value>,
    /// Set when the task ran but its check did not pass.
    pub failure: Option<String>,
}

/// Leading identifier of an error's `Debug` form, e.g. `TooFewSamples`.
fn kind(e: &impl Debug) -> String {
    let text = format!("{e:?}");
    text.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect()
}

fn degradation(e: &(impl Debug + std::fmt::Display)) -> Value {
    json!({ kind(e): e.to_string() })
}

trait Classify: Debug + std::fmt::Display {
    fn is_validation(&self) -> bool;

    fn into_cli(self, context: &str) -> CliError
    where
        Self: Sized,
    {
        let message = format!("{context}: {self}");
        if self.is_validation() {
            CliError::Config(message)
        } else {
            CliError::Numerical(message)
        }
    }
}

impl Classify for ModelError {
    fn is_validation(&self) -> bool {
        true
    }
}

impl Classify for PolyError {
    fn is_validation(&self) -> bool {
        false
    }
}

impl Classify for SpectraError {
    fn is_validation(&self) -> bool {
        matches!(self, SpectraError::TooFewSamples(_) | SpectraError::LengthAboveCap { .. } | SpectraError::Model(_))
    }
}

impl Classify for GbzError {
    fn is_validation(&self) -> bool {
        matches!(self, GbzError::InvalidTheta(_))
    }
}

impl Classify for TopologyError {
    fn is_validation(&self) -> bool {
        match self {
            TopologyError::ResolutionTooSmall { .. } | TopologyError::Model(_) => true,
            TopologyError::Spectra(e) => e.is_validation(),
            _ => false,
        }
    }
}

impl Classify for IntersectError {
    fn is_validation(&self) -> bool {
        match self {
            IntersectError::TooFewSamples(_) | IntersectError::Model(_) => true,
            IntersectError::Spectra(e) => e.is_validation(),
            IntersectError::Gbz(e) => e.is_validation(),
            IntersectError::Topology(e) => e.is_validation(),
            _ => false,
        }
    }
}

pub fn run_task(config: &RunConfig, model: &Model) -> Result<TaskOutput, CliError> {
    let p = &config.params;
    match config.task {
        Task::Spectrum => spectrum(model, p),
        Task::Obc => obc(model, p),
        Task::Agbz => agbz(model, p),
        Task::Gbz => gbz(model, p),
        Task::WindingRaster => raster(model, p),
        Task::Intersections => intersections(model, p),
        Task::Verify => verify(model, p),
        Task::NfoldGenerate => nfold_generate(model, &config.model, p),
    }
}

fn c(z: Complex64) -> [String; 2] {
    [float(z.re), float(z.im)]
}

fn spectrum(model: &Model, p: &Params) -> Result<TaskOutput, CliError> {
    let spec = pbc_spectrum(model, p.num_k).map_err(|e| e.into_cli("spectrum"))?;
    let mut table = Table::new(&["band", "k", "reE", "imE"]);
    for curve in &spec.curves {
        for &(k, e) in &curve.samples {
            let [re, im] = c(e);
            table.row([curve.band.to_string(), float(k), re, im]);
        }
    }
    Ok(TaskOutput {
        files: vec![("pbc.csv".into(), table.into_bytes())],
        summary: json!({ "bands": spec.curves.len(), "numK": spec.num_k() }),
        warnings: spec.warnings.iter().map(|w| json!(w)).collect(),
        failure: None,
    })
}

fn sample_agbz(model: &Model, p: &Params) -> Result<Vec<AgbzPoint>, CliError> {
    let points = if p.adaptive {
        agbz_sample_adaptive_with(model, p.theta_points, p.adaptive_factor, p.tie_tol)
    } else {
        agbz_sample_theta_with(model, &default_theta_grid(p.theta_points), p.tie_tol)
    };
    points.map_err(|e| e.into_cli("aGBZ sampling"))
}

fn obc(model: &Model, p: &Params) -> Result<TaskOutput, CliError> {
    let mut lengths = p.lengths.clone();
    lengths.sort_unstable();
    lengths.dedup();
    let mut spectra = Vec::new();
    for &l in &lengths {
        spectra.push(obc_finite(model, l).map_err(|e| e.into_cli(&format!("open chain L = {l}")))?);
    }
    if p.thermodynamic {
        let gbz = gbz_extract(&sample_agbz(model, p)?, &model.char_poly());
        spectra.push(obc_thermodynamic(model, &gbz).map_err(|e| e.into_cli("thermodynamic spectrum"))?);
    }
    let mut table = Table::new(&["source", "reE", "imE"]);
    let mut counts = serde_json::Map::new();
    for s in &spectra {
        let source = match s.source {
            ObcSource::Finite(l) => format!("L={l}"),
            ObcSource::Thermodynamic => "thermodynamic".to_owned(),
        };
        for &e in &s.values {
            let [re, im] = c(e);
            table.row([source.clone(), re, im]);
        }
        counts.insert(source, json!(s.values.len()));
    }
    Ok(TaskOutput {
        files: vec![("obc.csv".into(), table.into_bytes())],
        summary: json!({ "eigenvalues": counts }),
        ..TaskOutput::default()
    })
}

fn agbz_table(points: &[AgbzPoint]) -> Vec<u8> {
    let mut table = Table::new(&["reBeta", "imBeta", "labelLow", "labelHigh", "theta", "reE", "imE"]);
    for pt in points {
        let [rb, ib] = c(pt.beta);
        let [re, ie] = c(pt.energy);
        table.row([rb, ib, pt.label.0.to_string(), pt.label.1.to_string(), float(pt.theta), re, ie]);
    }
    table.into_bytes()
}

fn label_summary(points: &[AgbzPoint]) -> Value {
    let mut labels: Vec<(usize, usize)> = points.iter().map(|p| p.label).collect();
    labels.sort_unstable();
    labels.dedup();
    json!({ "points": points.len(), "labels": labels })
}

fn agbz(model: &Model, p: &Params) -> Result<TaskOutput, CliError> {
    let points = sample_agbz(model, p)?;
    let mut out = TaskOutput {
        files: vec![("agbz.csv".into(), agbz_table(&points))],
        summary: label_summary(&points),
        ..TaskOutput::default()
    };
    if p.implicit {
        match agbz_implicit_with_cap(model, p.degree_cap) {
            Ok(curve) => {
                let coeffs: Vec<(u32, u32, f64, f64)> =
                    curve.coefficients().into_iter().map(|(i, j, z)| (i, j, z.re, z.im)).collect();
                out.files.push(("implicit.json".into(), json(&coeffs)));
            }
            Err(e @ GbzError::DegreeBudgetExceeded { .. }) => out.warnings.push(degradation(&e)),
            Err(e) => return Err(e.into_cli("implicit curve")),
        }
    }
    Ok(out)
}

fn gbz(model: &Model, p: &Params) -> Result<TaskOutput, CliError> {
    let points = gbz_extract(&sample_agbz(model, p)?, &model.char_poly());
    Ok(TaskOutput {
        files: vec![("gbz.csv".into(), agbz_table(&points))],
        summary: label_summary(&points),
        ..TaskOutput::default()
    })
}

fn raster(model: &Model, p: &Params) -> Result<TaskOutput, CliError> {
    let bbox = match p.bbox {
        Some([re_min, re_max, im_min, im_max]) => BBox { re_min, re_max, im_min, im_max },
        None => {
            let spec = pbc_spectrum(model, p.num_k).map_err(|e| e.into_cli("bounding box"))?;
            BBox::around(spec.energies(), p.margin)
        }
    };
    let [nx, ny] = p.resolution;
    let r = winding_raster(model, bbox, nx, ny).map_err(|e| e.into_cli("winding raster"))?;
    let mut table = Table::new(&["reE", "imE", "winding"]);
    for iy in 0..ny {
        for ix in 0..nx {
            let [re, im] = c(r.center(ix, iy));
            let w = r.get(ix, iy).map_or_else(|| "NA".to_owned(), |w| w.to_string());
            table.row([re, im, w]);
        }
    }
    Ok(TaskOutput {
        files: vec![("raster.csv".into(), table.into_bytes())],
        summary: json!({
            "bbox": [r.bbox.re_min, r.bbox.re_max, r.bbox.im_min, r.bbox.im_max],
            "resolution": [nx, ny],
            "definedValues": r.defined_values(),
            "undefinedCells": r.undefined_count(),
        }),
        ..TaskOutput::default()
    })
}

fn intersection_json(si: &SelfIntersection, phases: &[f64]) -> Value {
    json!({
        "reE0": si.energy.re,
        "imE0": si.energy.im,
        "n": si.multiplicity,
        "kSolutions": si.k_solutions(),
        "bands": si.branches.iter().map(|b| b.band).collect::<Vec<_>>(),
        "wMin": si.local.w_min,
        "wMax": si.local.w_max,
        "inwardCount": si.local.inward_count,
        "orderingIndices": si.ordering_indices,
        "matchedAgbzPhases": phases,
    })
}

fn contact_json(ct: &BzContact) -> Value {
    json!({
        "phi": ct.phi,
        "reE": ct.energy.re,
        "imE": ct.energy.im,
        "labelLow": ct.label.0,
        "labelHigh": ct.label.1,
    })
}

fn matched_phases(si_count: usize, contacts: &[BzContact], matched: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut phases = vec![Vec::new(); si_count];
    for &(s, ct) in matched {
        phases[s].push(contacts[ct].phi);
    }
    for list in &mut phases {
        list.sort_by(f64::total_cmp);
    }
    phases
}

fn intersections(model: &Model, p: &Params) -> Result<TaskOutput, CliError> {
    let (list, phases, warnings) = match verify_correspondence(model, p.num_k, p.tol_e) {
        Ok(r) => {
            let phases = matched_phases(r.intersections.len(), &r.contacts, &r.matched);
            (r.intersections, phases, r.warnings)
        }
        Err(e) if e.is_validation() => return Err(e.into_cli("intersections")),
        // Intersections stand on their own; only the aGBZ match is lost.
        Err(e) => {
            let r = find_intersections(model, p.num_k, p.tol_e).map_err(|e| e.into_cli("intersections"))?;
            let mut warnings: Vec<Value> = r.warnings.iter().map(|w| json!(w)).collect();
            warnings.push(degradation(&e));
            let phases = vec![Vec::new(); r.intersections.len()];
            return Ok(intersections_output(&r.intersections, &phases, warnings));
        }
    };
    let warnings = warnings.iter().map(|w| json!(w)).collect();
    Ok(intersections_output(&list, &phases, warnings))
}

fn intersections_output(list: &[SelfIntersection], phases: &[Vec<f64>], warnings: Vec<Value>) -> TaskOutput {
    let items: Vec<Value> = list.iter().zip(phases).map(|(si, ph)| intersection_json(si, ph)).collect();
    let mut multiplicities: Vec<usize> = list.iter().map(|si| si.multiplicity).collect();
    multiplicities.sort_unstable();
    TaskOutput {
        files: vec![("intersections.json".into(), json(&items))],
        summary: json!({ "intersections": list.len(), "multiplicities": multiplicities }),
        warnings,
        failure: None,
    }
}

fn verify(model: &Model, p: &Params) -> Result<TaskOutput, CliError> {
    let r = verify_correspondence(model, p.num_k, p.tol_e).map_err(|e| e.into_cli("correspondence"))?;
    let phases = matched_phases(r.intersections.len(), &r.contacts, &r.matched);
    let verdict = if r.pass { "PASS" } else { "FAIL" };
    let body = json!({
        "correspondence": verdict,
        "matchedPairs": r.matched.len(),
        "intersections": r.intersections.iter().zip(&phases).map(|(si, ph)| intersection_json(si, ph)).collect::<Vec<_>>(),
        "contacts": r.contacts.iter().map(contact_json).collect::<Vec<_>>(),
        "matched": r.matched,
        "violations": r.violations,
    });
    Ok(TaskOutput {
        files: vec![("correspondence.json".into(), json(&body))],
        summary: json!({
            "correspondence": verdict,
            "matchedPairs": r.matched.len(),
            "intersections": r.intersections.len(),
            "contacts": r.contacts.len(),
        }),
        warnings: r.warnings.iter().map(|w| json!(w)).collect(),
        failure: (!r.pass).then(|| format!("correspondence FAIL: {}", r.violations.join("; "))),
    })
}

fn nfold_generate(model: &Model, spec: &ModelSpec, p: &Params) -> Result<TaskOutput, CliError> {
    let ModelSpec::Nfold { n, phi, .. } = *spec else {
        return Err(CliError::Config("nfold-generate needs a model of type nfold".into()));
    };
    let hops: Vec<(i32, f64, f64)> = model
        .as_one_band()
        .expect("n-fold constructions are one-band")
        .hops()
        .terms()
        .iter()
        .map(|(&k, z)| (k, z.re, z.im))
        .collect();
    let generated = ModelSpec::OneBand { hops };
    let expected = nfold_phases(n, phi);
    let report = find_intersections(model, p.num_k, p.tol_e).map_err(|e| e.into_cli("intersections"))?;
    let found = report
        .intersections
        .iter()
        .filter(|si| si.energy.norm() <= p.tol_e.max(1e-9))
        .min_by(|a, b| a.energy.norm().total_cmp(&b.energy.norm()));
    let (point, check) = match found {
        Some(si) => {
            let check = verify_nfold_condition(model, si).map_err(|e| e.into_cli("n-fold check"))?;
            (intersection_json(si, &[]), Some(check))
        }
        None => (Value::Null, None),
    };
    let failure = match &check {
        None => Some("no self-intersection found at E = 0".to_owned()),
        Some(c) if !c.pass => Some(format!("n-fold check failed: expected {:?}, observed {:?}", c.expected, c.observed)),
        Some(c) if found.is_some_and(|si| si.multiplicity != n) => {
            Some(format!("multiplicity {} at E = 0, expected {n}; observed indices {:?}", found.unwrap().multiplicity, c.observed))
        }
        _ => None,
    };
    let body = json!({
        "n": n,
        "phi": phi,
        "expectedPhases": expected,
        "intersection": point,
        "check": check.as_ref().map(|c| json!({
            "pass": c.pass,
            "expected": c.expected,
            "observed": c.observed,
            "accountingHolds": c.accounting_holds,
        })),
    });
    Ok(TaskOutput {
        files: vec![("model.json".into(), json(&generated)), ("nfold.json".into(), json(&body))],
        summary: json!({ "n": n, "check": if failure.is_none() { "PASS" } else { "FAIL" } }),
        warnings: report.warnings.iter().map(|w| json!(w)).collect(),
        failure,
    })
}
