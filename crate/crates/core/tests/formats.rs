use gsm_core::derivpoly::TableJson;
use gsm_core::gsfunc::{seminorm, Grid, SeminormKind, SeminormParams, TestFunction, Truncation};
use gsm_core::probe::{probe_series, write_probe_csv, KRange, ProbeConfig};
use gsm_core::rug::Rational;
use gsm_core::wedge::{emit_region_grid, FigureFormat, Mode, RegionGrid, Space};
use gsm_core::{build_coeff_table, certify, CoeffTable, RationalTheta};
use proptest::prelude::*;

fn csv_rows(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect();
    (header, rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn table_json_round_trips(m in 2u32..8, k_max in 1u32..40) {
        let table = build_coeff_table(m, k_max).unwrap();
        let mut buf = Vec::new();
        table.write_json(&mut buf).unwrap();
        let doc: TableJson = serde_json::from_slice(&buf).unwrap();
        prop_assert_eq!(CoeffTable::from_json(&doc).unwrap(), table);
    }
}

#[test]
fn tampered_json_loads_but_fails_certification() {
    let table = build_coeff_table(3, 6).unwrap();
    let mut doc: serde_json::Value = serde_json::to_value(table.to_json()).unwrap();
    doc["rows"][2][1] = serde_json::json!("7");
    let loaded = CoeffTable::from_json(&serde_json::from_value(doc.clone()).unwrap()).unwrap();
    let report = certify(&loaded);
    assert_eq!(report.discrepancies.len(), 1);
    assert_eq!((report.discrepancies[0].k, report.discrepancies[0].n), (3, 1));

    // A row of the wrong length is a shape error.
    doc["rows"][2] = serde_json::json!(["1"]);
    assert!(CoeffTable::from_json(&serde_json::from_value::<TableJson>(doc).unwrap()).is_err());
}

#[test]
fn probe_csv_layout() {
    let th = RationalTheta::integer(1).unwrap();
    let recs = probe_series(&ProbeConfig::new(3, th, th, KRange::Consecutive { lo: 1, hi: 9 })).unwrap();
    let mut buf = Vec::new();
    write_probe_csv(&recs, &mut buf).unwrap();
    let (header, rows) = csv_rows(&buf);
    assert_eq!(header, ["k", "x", "log_dkg_f", "rate"]);
    assert_eq!(rows.len(), 9);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], (i + 1).to_string());
        for cell in &row[1..] {
            cell.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn region_csv_layout() {
    let mut buf = Vec::new();
    emit_region_grid(2, Space::Roumieu, Mode::GeneralPolynomial, &RegionGrid::standard(), FigureFormat::Csv, &mut buf).unwrap();
    let (header, rows) = csv_rows(&buf);
    assert_eq!(header, ["theta", "s", "verdict", "citation"]);
    assert_eq!(rows.len(), 40 * 80);
    let verdicts = ["Continuous", "NotContinuous", "TrivialSpace", "Unknown"];
    assert!(rows.iter().all(|r| verdicts.contains(&r[2].as_str())));
    assert!(rows.iter().all(|r| r[0].parse::<Rational>().is_ok() || r[0].parse::<f64>().is_ok()));
}

#[test]
fn region_svg_is_well_formed() {
    let mut buf = Vec::new();
    emit_region_grid(3, Space::Beurling, Mode::PureMonomial, &RegionGrid::standard(), FigureFormat::Svg, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
    assert!(text.trim_end().ends_with("</svg>"));
    assert!(text.matches("<rect").count() >= 40 * 80);
}

#[test]
fn seminorm_rows_cover_the_truncation() {
    let theta = RationalTheta::integer(1).unwrap();
    let params = SeminormParams {
        kind: SeminormKind::AFamily,
        theta: Rational::from(1),
        s: Rational::from(1),
        weight: Rational::from((1, 2)),
    };
    let trunc = Truncation { beta_max: 4, alpha_max: 0, grid: "uniform:0:2:5".parse::<Grid>().unwrap() };
    let est = seminorm(&TestFunction::GsFunction(theta), &params, &trunc, 128).unwrap();
    assert!(est.is_lower_bound);
    assert_eq!(est.rows.len(), 5 * 5);
    assert!(est.rows.iter().all(|r| r.k <= 4));
}
