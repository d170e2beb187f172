use flexsim_core::experiment::{
    fmt_g9, nearest_rank, parse_csv, reproduce_figure_with, run_study, write_csv, write_figure_dat, FigureConfig,
    PolicyConfig, RateSpec, Scenario,
};
use flexsim_core::{GraphFamily, Horizon, JobSizeDist, TopologySpec};

fn small_figure() -> FigureConfig {
    FigureConfig {
        slots: 1500,
        burn_in: 300,
        ..FigureConfig::new(vec![27, 64], 3, 11)
    }
}

#[test]
fn csv_rows_round_trip_and_aggregate_is_recomputable() {
    let studies = reproduce_figure_with(&small_figure()).unwrap();
    assert_eq!(studies.len(), 4);
    let mut buf = Vec::new();
    write_csv(&studies, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 4 * (3 + 1));

    for st in &studies {
        let mine: Vec<_> = rows.iter().filter(|r| r.scenario == st.scenario).collect();
        let (agg, reps) = mine.split_last().unwrap();
        assert!(agg.replicate.is_none());
        assert_eq!(
            reps.iter().map(|r| r.replicate.unwrap()).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        let mut waits: Vec<f64> = reps.iter().map(|r| r.mean_wait).collect();
        waits.sort_by(f64::total_cmp);
        assert_eq!(fmt_g9(nearest_rank(&waits, 25.0)), fmt_g9(agg.p25.unwrap()));
        assert_eq!(fmt_g9(nearest_rank(&waits, 50.0)), fmt_g9(agg.median.unwrap()));
        assert_eq!(fmt_g9(nearest_rank(&waits, 75.0)), fmt_g9(agg.p75.unwrap()));
        assert!(agg.p25 <= agg.median && agg.median <= agg.p75);
        assert_eq!(agg.jobs, reps.iter().map(|r| r.jobs).sum::<u64>());
        for (r, rep) in reps.iter().zip(&st.replicates) {
            assert_eq!(fmt_g9(r.mean_wait), fmt_g9(rep.result.mean_wait));
            let rel = (r.mean_wait - rep.result.mean_wait).abs() / rep.result.mean_wait.abs().max(1e-300);
            assert!(rel <= 5e-9);
            assert!(r.frac_long_service.is_some() && r.kingman_bound.is_some());
        }
    }

    // Re-emitting parsed numbers reproduces every numeric cell.
    for (line, row) in text.lines().skip(1).zip(&rows) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[8], fmt_g9(row.mean_wait));
        assert_eq!(cells[14], row.kingman_bound.map(fmt_g9).unwrap_or_default());
    }

    let mut dat = Vec::new();
    write_figure_dat(&studies, &mut dat).unwrap();
    let dat = String::from_utf8(dat).unwrap();
    let lines: Vec<&str> = dat.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("27 9 ") && lines[2].starts_with("64 16 "));
    assert_eq!(lines[1].split_whitespace().count(), 8);
}

#[test]
fn figure_study_is_deterministic() {
    let cfg = FigureConfig {
        n_list: vec![27],
        lognormal: None,
        ..small_figure()
    };
    let a = reproduce_figure_with(&cfg).unwrap();
    let b = reproduce_figure_with(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].size_dist, "exp");
}

#[test]
fn modular_scenario_with_lognormal_sizes() {
    let topology = TopologySpec {
        family: GraphFamily::Modular,
        n: 8,
        d: 4,
        avg_degree: None,
        cluster_degree: None,
        seed: 0,
    };
    let mut scn = Scenario::new(
        "mod",
        topology,
        RateSpec::Uniform(0.5),
        PolicyConfig::Modular,
        Horizon::jobs(20_000),
    );
    scn.sizes = JobSizeDist::LogNormal {
        mean: 1.0,
        variance: 10.0,
    };
    scn.replications = 2;
    let st = run_study(&scn).unwrap();
    assert_eq!(st.size_dist, "lognormal(1;10)");
    assert!(st
        .replicates
        .iter()
        .all(|r| r.result.jobs > 10_000 && r.result.batch.is_none()));
    assert!(st.bound_comparisons().is_empty());
}

#[test]
fn expanded_modular_scenario_runs() {
    let topology = TopologySpec {
        family: GraphFamily::ExpandedModular,
        n: 16,
        d: 4,
        avg_degree: None,
        cluster_degree: Some(2),
        seed: 3,
    };
    let scn = Scenario::new(
        "exp-mod",
        topology,
        RateSpec::Sampled { u: 1.5, rho: 0.5 },
        PolicyConfig::ExpandedModular { rho: 0.5 },
        Horizon::time(2000.0),
    );
    let st = run_study(&scn).unwrap();
    let r = &st.replicates[0].result;
    assert!(!r.unstable && r.jobs > 0 && r.mean_wait.is_finite());
}
