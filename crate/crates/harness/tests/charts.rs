use trafficlab::charts::{bar_chart, embedded_data, render_charts, speed_bin_chart};
use trafficlab::compare::{compare_dirs, report_rows, write_report, MetricRow, HEADLINE};
use trafficlab::experiment::{run_experiment, ExperimentConfig, Mode};

fn row(metric: &str, b: f64, m: f64) -> MetricRow {
    MetricRow {
        metric: metric.into(),
        unit: "s".into(),
        baseline_mean: b,
        model_mean: m,
        percent_change: 0.0,
        improvement: 0.0,
        p_value: 0.5,
        baseline_n: 2,
        model_n: 2,
    }
}

#[test]
fn full_report_renders_eight_bars_and_two_composites() {
    let (a, b, out) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, mode) in [(&a, Mode::Baseline), (&b, Mode::FixedAction { action: vec![0.0, 0.0, 0.0, 0.0, -1.0] })] {
        run_experiment(&ExperimentConfig {
            scenario: "desk".into(),
            mode,
            seeds: vec![1, 2],
            output: dir.path().to_path_buf(),
            duration: Some(120.0),
            sequential: false,
            hash_every: None,
        })
        .unwrap();
    }
    let report = compare_dirs(a.path(), b.path()).unwrap();
    write_report(&report, out.path()).unwrap();
    let files = render_charts(&report, a.path(), b.path(), out.path()).unwrap();
    assert_eq!(HEADLINE.len(), 8);
    assert_eq!(files.len(), 10);

    // every charted value is a cell of report.csv, character for character
    let csv_text = std::fs::read_to_string(out.path().join("report.csv")).unwrap();
    let cells: Vec<&str> = csv_text.lines().flat_map(|l| l.split(',')).collect();
    for (m, r) in HEADLINE.iter().zip(report_rows(&report)) {
        let svg = std::fs::read_to_string(out.path().join(format!("{}.svg", m.name))).unwrap();
        let data = embedded_data(&svg).unwrap();
        assert!(data.contains(&format!("baseline,{}", r[2])));
        assert!(data.contains(&format!("model,{}", r[3])));
        assert!(cells.contains(&r[2].as_str()) && cells.contains(&r[3].as_str()));
    }
    let timeline = std::fs::read_to_string(out.path().join("stopped_timeline.svg")).unwrap();
    assert_eq!(embedded_data(&timeline).unwrap().lines().count(), 1 + 2 * 2);
}

#[test]
fn empty_speed_bin_is_a_zero_height_bar() {
    let rows = [row("time_0_5", 0.0, 0.0), row("time_5_10", 3.0, 4.0)];
    let svg = speed_bin_chart(&rows.iter().collect::<Vec<_>>());
    assert_eq!(svg.matches("<rect x=").count() - 2, 4, "two legend swatches plus four bars");
    assert!(svg.contains(r#"height="0.00""#));
}

#[test]
fn bar_chart_embeds_exact_values() {
    let svg = bar_chart(&row("avg_distance", 338.62, 1509.23));
    let data = embedded_data(&svg).unwrap();
    assert!(data.contains("baseline,338.62\nmodel,1509.23\n"));
}
