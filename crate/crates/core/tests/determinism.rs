use steklov_lab::experiments::{
    run_bound_audit, run_degeneration, AuditConfig, DegenerationSchedule, Direction, ExperimentRun, Family, Shape,
    WORKERS_ENV,
};

fn contents(run: &ExperimentRun) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = run.artifacts.iter().map(|a| (a.path.clone(), a.contents.clone())).collect();
    files.push(("report.csv".into(), run.report_csv()));
    files
}

// One test only: it changes the process-wide worker count.
#[test]
fn results_do_not_depend_on_worker_count() {
    let mut schedule = DegenerationSchedule::new(Family::CylinderModulus, vec![2.0, 1.0, 0.5, 0.25], Direction::ToZero, vec![1]);
    schedule.refinement = 1;
    schedule.optimizer.max_iters = 15;
    schedule.optimizer.random_starts = 1;
    let mut audit = AuditConfig::new(vec![Shape::Disc, Shape::Annulus { inner: 0.5 }], 6, 3, 42);
    audit.refinement = 1;
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        std::env::set_var(WORKERS_ENV, workers);
        let run = run_degeneration(&schedule).unwrap();
        outputs.push((contents(&run), run_bound_audit(&audit).unwrap()));
    }
    std::env::remove_var(WORKERS_ENV);
    assert_eq!(outputs[0].0, outputs[1].0);
    assert_eq!(outputs[0].1, outputs[1].1);
    assert!(!outputs[0].0.is_empty());
}
