use dvoc_reduce::full_order::Inputs;
use dvoc_reduce::modal::{classify_states, full_model_report, ModalReport, DEFAULT_CUTOFF};
use dvoc_reduce::scenario::{self, ModalPoint, Scenario};
use dvoc_reduce::{LineType, ParameterSet};

/// Largest `|pf(d, mode) − pf(q, mode)|` over the dq pairs `I_g … Γ`.
fn dq_pf_gap(r: &ModalReport) -> f64 {
    let mut gap = 0.0f64;
    for j in 0..r.eigenvalues.len() {
        for d in (2..12).step_by(2) {
            gap = gap.max((r.pf[(d, j)] - r.pf[(d + 1, j)]).abs());
        }
    }
    gap
}

fn heavy_load() -> Inputs {
    Inputs::new(2.0, 2.0, 1.0, 0.0)
}

#[test]
fn dq_pairs_share_participation_without_power_feedback() {
    let p = ParameterSet { kappa1: 1e-9, i_max: 1e6, ..ParameterSet::table1_for(LineType::Inductive) };
    let (_, r) = full_model_report(&heavy_load(), &p, DEFAULT_CUTOFF).unwrap();
    let gap = dq_pf_gap(&r);
    assert!(gap < 1e-6, "gap {gap:e}");
}

#[test]
fn dq_pairs_nearly_share_participation_at_reference_gains() {
    for line in [LineType::Inductive, LineType::Resistive] {
        let (_, r) = full_model_report(&heavy_load(), &ParameterSet::table1_for(line), DEFAULT_CUTOFF).unwrap();
        let gap = dq_pf_gap(&r);
        assert!(gap < 0.1, "{line}: gap {gap}");
    }
}

#[test]
fn raw_participation_columns_sum_to_one() {
    let (_, r) = full_model_report(&heavy_load(), &ParameterSet::table1(), DEFAULT_CUTOFF).unwrap();
    for j in 0..r.eigenvalues.len() {
        let sum: f64 = r.pf.column(j).sum();
        assert!((sum - 1.0).abs() < 1e-9, "mode {j}: {sum}");
    }
}

#[test]
fn partition_at_reference_point() {
    let expect: [(LineType, &[usize]); 2] = [(LineType::Inductive, &[0, 1, 2, 3]), (LineType::Resistive, &[0, 1])];
    for (line, slow) in expect {
        let (_, r) = full_model_report(&heavy_load(), &ParameterSet::table1_for(line), DEFAULT_CUTOFF).unwrap();
        let part = classify_states(&r, DEFAULT_CUTOFF);
        assert_eq!(part.slow, slow, "{line}");
        assert!(part.ambiguous.is_empty());
        assert_eq!(part.slow.len() + part.fast.len(), 12);
    }
}

#[test]
fn infinite_cutoff_leaves_everything_slow() {
    let (_, r) = full_model_report(&heavy_load(), &ParameterSet::table1(), DEFAULT_CUTOFF).unwrap();
    let part = classify_states(&r, f64::INFINITY);
    assert_eq!(part.slow, (0..12).collect::<Vec<_>>());
    assert!(part.fast.is_empty() && part.ambiguous.is_empty());
}

#[test]
fn scenario_entry_point_uses_inputs_in_force() {
    let s = Scenario::bundled("default-inductive").unwrap();
    let (x0, _) = scenario::modal(&s, ModalPoint::T0, DEFAULT_CUTOFF).unwrap();
    let (x3, _) = scenario::modal(&s, ModalPoint::Time(3.0), DEFAULT_CUTOFF).unwrap();
    let (x2, _) = scenario::modal(&s, "2".parse().unwrap(), DEFAULT_CUTOFF).unwrap();
    assert_ne!(x0, x3);
    assert_eq!(x2, x3);
    assert!("later".parse::<ModalPoint>().is_err());
}

#[test]
fn sweep_is_reproducible_from_its_seed() {
    let s = Scenario::bundled("default-inductive").unwrap();
    let a = scenario::modal_sweep(&s, 4, 7, DEFAULT_CUTOFF).unwrap();
    let b = scenario::modal_sweep(&s, 4, 7, DEFAULT_CUTOFF).unwrap();
    let c = scenario::modal_sweep(&s, 4, 8, DEFAULT_CUTOFF).unwrap();
    let key = |v: &[scenario::SweepPoint]| v.iter().map(|p| (p.s_star, p.v_dq, p.slow.clone())).collect::<Vec<_>>();
    assert_eq!(key(&a), key(&b));
    assert_ne!(key(&a), key(&c));
}
