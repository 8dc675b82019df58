//! Structural checks of the SVG study plot.

use levylab::coefficients::{make_builtin_coefficient, BuiltinCoefficient};
use levylab::harness::{emit_plot, run_study, EpsRatio, StudySettings};
use levylab::kernels::families;

/// Minimal well-formedness check: tags balance and nest properly.
fn assert_well_formed_xml(text: &str) {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        rest = &rest[open + 1..];
        let close = rest.find('>').expect("unclosed tag");
        let tag = &rest[..close];
        rest = &rest[close + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            let top = stack.pop().unwrap_or_else(|| panic!("stray closing </{name}>"));
            assert_eq!(top, name, "mismatched closing tag");
        } else if !tag.ends_with('/') {
            let name: String = tag
                .chars()
                .take_while(|c| !c.is_whitespace() && *c != '>')
                .collect();
            stack.push(name);
        }
    }
    assert!(stack.is_empty(), "unclosed tags: {stack:?}");
}

fn small_report(n_eps: usize) -> levylab::harness::ConvergenceReport {
    let kernel = families::pareto::<f64, 1>(1.0, 0.5).unwrap();
    let coeff =
        make_builtin_coefficient::<f64, 1>(&BuiltinCoefficient::Constant { value: 1.0 }).unwrap();
    let mut settings = StudySettings::baseline(8.0);
    settings.rho = 4;
    settings.eps_schedule = (1..=n_eps)
        .map(|j| EpsRatio::new(1, 1 << j).unwrap())
        .collect();
    settings.skip_kernel_validation = true;
    settings.diagnostics.weak_probe = false;
    run_study(&kernel, &coeff, &settings, serde_json::json!({})).unwrap()
}

#[test]
fn svg_is_well_formed_with_one_marker_per_record() {
    let report = small_report(4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.svg");
    emit_plot(&report, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_well_formed_xml(&text);
    let markers = text.matches("class=\"pt\"").count();
    assert_eq!(markers, 4);
    // The fitted line shows up once a fit exists.
    assert!(text.contains("slope"));
}

#[test]
fn single_record_plots_without_a_fitted_line() {
    let report = small_report(1);
    assert!(report.fit.is_none());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("single.svg");
    emit_plot(&report, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_well_formed_xml(&text);
    assert_eq!(text.matches("class=\"pt\"").count(), 1);
    assert!(!text.contains("stroke-dasharray"));
}

#[test]
fn empty_report_is_rejected() {
    let mut report = small_report(1);
    report.records.clear();
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_plot(&report, &dir.path().join("x.svg")).is_err());
}
