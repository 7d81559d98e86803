use gyrolev::dynamics::{LibrationParams, ModeKind};
use gyrolev::hz_to_angular;
use gyrolev::pipeline::{analyze_dataset, simulate_dataset, Acquisition, AnalysisOptions, SimulationSpec};
use gyrolev::signal::{read_trace, write_trace, MixingMatrix};

fn spec() -> SimulationSpec {
    let params = LibrationParams::new(hz_to_angular(100.0), hz_to_angular(572.4), hz_to_angular(0.62))
        .unwrap()
        .with_damping_time(20.0)
        .unwrap()
        .with_thermal(4.18, 9.11e-20)
        .unwrap();
    SimulationSpec {
        params,
        mixing: MixingMatrix::new(1.0, 0.03, -0.02, 0.95).unwrap(),
        acquisition: Acquisition {
            repetitions_alpha: 6,
            repetitions_beta: 4,
            ..Acquisition::default()
        },
        label: "files".into(),
    }
}

#[test]
fn analysis_is_identical_after_a_file_round_trip() {
    let s = spec();
    let data = simulate_dataset(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let reload = |set: &[gyrolev::signal::TimeTraceSet], stem: &str| -> Vec<_> {
        set.iter()
            .enumerate()
            .map(|(i, t)| {
                let p = dir.path().join(format!("{stem}_{i}.trace"));
                write_trace(&p, t).unwrap();
                read_trace(&p).unwrap()
            })
            .collect()
    };
    let (alpha, beta) = (reload(&data.alpha, "alpha"), reload(&data.beta, "beta"));
    assert_eq!(alpha, data.alpha);
    assert!(beta.iter().all(|t| t.meta().mode_excited == ModeKind::QuasiBeta));

    let opts = AnalysisOptions::default();
    let (wa, wb) = (s.params.omega_alpha, s.params.omega_beta);
    let direct = analyze_dataset(&data.alpha, &data.beta, wa, wb, None, opts).unwrap();
    let from_files = analyze_dataset(&alpha, &beta, wa, wb, None, opts).unwrap();
    assert_eq!(direct, from_files);
}

#[test]
fn thread_count_does_not_change_results() {
    let s = spec();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| simulate_dataset(&s).unwrap());
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| simulate_dataset(&s).unwrap());
    assert_eq!(one, many);
}
