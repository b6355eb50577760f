use std::f64::consts::PI;

use homog::config::parse_config;
use homog::extension::TwoScaleCoefficient;
use homog::field::MicroCoefficient;
use homog::lab::{build_extension, build_field, run_pipeline, u_eps_study, EpsSequence};
use homog::solve::sine_source;
use homog::upscale::{assemble_a_discrete, averaged_field, window_tensor_any, CellOptions};
use homog::{DomainBox, Exec, Point};

fn two_regime(c: f64) -> MicroCoefficient {
    let omega = DomainBox::unit(1);
    MicroCoefficient::from_scalar_fn(omega, omega.expand(0.1), 1.0, 3.0, "two-regime", move |z| {
        if z[0] < 0.5 {
            2.0 + (2.0 * PI * z[0] / 0.1).sin()
        } else {
            c
        }
    })
    .unwrap()
}

#[test]
fn discrete_tensors_follow_each_regime() {
    let ext = TwoScaleCoefficient::discrete(two_regime(1.5), 0.1, None).unwrap();
    let a = assemble_a_discrete(&ext, &CellOptions::default()).unwrap();
    assert_eq!(a.samples().len(), 10);
    for s in a.samples() {
        let want = if s.x[0] < 0.5 { 3f64.sqrt() } else { 1.5 };
        assert!((s.a.get(0, 0) - want).abs() < 1e-6, "{:?}: {}", s.x, s.a.get(0, 0));
    }
}

#[test]
fn discrete_u_eps_errors_decrease() {
    let ext = TwoScaleCoefficient::discrete(two_regime(1.5), 0.1, None).unwrap();
    let a = assemble_a_discrete(&ext, &CellOptions::default()).unwrap();
    let seq = EpsSequence::new(0.1, 0.5, 6).unwrap();
    let rep = u_eps_study(&ext, &a, sine_source(-3.0, 10.0), &seq, 8, Exec::default()).unwrap();
    let e: Vec<f64> = rep.rows.iter().map(|r| r.value).collect();
    assert!(e[2..].windows(2).all(|w| w[1] < w[0]), "{e:?}");
}

#[test]
fn constant_coefficient_needs_no_averaging() {
    let omega = DomainBox::unit(1);
    let f = MicroCoefficient::from_scalar_fn(omega, omega.expand(0.1), 2.0, 2.0, "constant", |_| 2.0).unwrap();
    let ext = TwoScaleCoefficient::continuous(f, 0.1).unwrap();
    let a = averaged_field(&ext, None, &CellOptions::default()).unwrap();
    let seq = EpsSequence::new(0.1, 0.5, 4).unwrap();
    let rep = u_eps_study(&ext, &a, sine_source(-3.0, 10.0), &seq, 8, Exec::default()).unwrap();
    for r in &rep.rows {
        assert!(r.deviation <= 1e-10, "{r:?}");
    }
}

#[test]
fn trivial_pipeline_reproduces_the_fine_problem() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "field.kind = random\nextension.kind = trivial\nmesh.n = 1024\noutput.dir = {}\n",
        dir.path().display()
    );
    let config = parse_config(&text, &[]).unwrap();
    let out = run_pipeline(&config, Exec::default()).unwrap();
    let field = build_field(&config).unwrap();
    for x in [0.0, 0.377, 0.5, 0.9131, 1.0] {
        let x = Point::x(x);
        assert_eq!(out.averaged.eval(&x).unwrap(), field.eval(&x).unwrap());
    }
    assert!(out.u0.max_abs_diff(&out.u) <= 1e-12);
    assert!(out.report.row("u0_l2").unwrap().deviation <= 1e-10);
}

#[test]
fn single_partition_gives_the_window_tensor() {
    let config = parse_config("field.kind = random\nextension.kind = discrete\npartition.kind = single\nomega.upper = 0.1\n", &[]).unwrap();
    let ext = build_extension(&config, build_field(&config).unwrap()).unwrap();
    let opts = CellOptions::default();
    let a = assemble_a_discrete(&ext, &opts).unwrap();
    assert_eq!(a.samples().len(), 1);
    let window = DomainBox::cube(&Point::x(0.05), 0.1);
    let w = window_tensor_any(ext.field(), &window, &opts).unwrap();
    assert!((a.eval(&Point::x(0.02)).unwrap().get(0, 0) - w.a.get(0, 0)).abs() <= 1e-12);

    let wide = parse_config("extension.kind = discrete\npartition.kind = single\n", &[]).unwrap();
    assert!(build_extension(&wide, build_field(&wide).unwrap()).is_err());
}
