use std::f64::consts::PI;

use drams_core::channel::{
    align_double_phases, optimal_single_snr, optimal_single_user_phases, sample_fading, sample_fading_matrix,
    DoubleCascade, FadingVector, LinkBudgetParams, PhaseShiftMatrix, SingleCascade,
};
use drams_core::rng::stream;
use drams_core::router::RouterConfig;
use rand::Rng;

const LEVELS: usize = 64;
const D_IN: f64 = 20.0;
const D_OUT: f64 = 30.0;

fn params() -> LinkBudgetParams {
    RouterConfig::reference().link
}

fn snr(p: &LinkBudgetParams, h_in: &FadingVector, h_out: &FadingVector, phases: Vec<f64>) -> f64 {
    let phase = PhaseShiftMatrix::new(phases);
    let c = SingleCascade {
        h_in,
        phase: &phase,
        h_out,
        d_in: D_IN,
        d_out: D_OUT,
    };
    c.received_power(p).unwrap() / p.noise_power
}

fn level(k: usize) -> f64 {
    2.0 * PI * k as f64 / LEVELS as f64
}

/// Best SNR over every assignment of the 64 levels to the elements.
///
/// At the grid optimum each element already maximizes its projection onto
/// the resultant, so the optimum is among the assignments that are
/// element-wise best against some direction. Those assignments change only
/// where some element's best level switches, so one direction per arc
/// between switch points covers all of them.
fn grid_max(p: &LinkBudgetParams, h_in: &FadingVector, h_out: &FadingVector) -> f64 {
    let n = h_in.len();
    let term = |e: usize, k: usize| {
        h_out.gain(e) * PhaseShiftMatrix::new(vec![level(k)]).coefficient(0) * h_in.gain(e)
    };
    let terms: Vec<Vec<_>> = (0..n).map(|e| (0..LEVELS).map(|k| term(e, k)).collect()).collect();
    let mut cuts: Vec<f64> = Vec::new();
    for row in &terms {
        let mut angles: Vec<f64> = row.iter().map(|t| t.arg().rem_euclid(2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        for k in 0..LEVELS {
            let next = if k + 1 < LEVELS { angles[k + 1] } else { angles[0] + 2.0 * PI };
            cuts.push((0.5 * (angles[k] + next)).rem_euclid(2.0 * PI));
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut best = 0.0f64;
    for i in 0..cuts.len() {
        let next = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + 2.0 * PI };
        let psi = 0.5 * (cuts[i] + next);
        let phases: Vec<f64> = terms
            .iter()
            .map(|row| {
                let k = (0..LEVELS)
                    .max_by(|&a, &b| {
                        let pa = (row[a].arg() - psi).cos() * row[a].norm();
                        let pb = (row[b].arg() - psi).cos() * row[b].norm();
                        pa.total_cmp(&pb)
                    })
                    .unwrap();
                level(k)
            })
            .collect();
        best = best.max(snr(p, h_in, h_out, phases));
    }
    best
}

fn brute_force(p: &LinkBudgetParams, h_in: &FadingVector, h_out: &FadingVector) -> f64 {
    let n = h_in.len();
    let mut best = 0.0f64;
    let mut idx = vec![0usize; n];
    loop {
        best = best.max(snr(p, h_in, h_out, idx.iter().map(|&k| level(k)).collect()));
        let mut e = 0;
        while e < n {
            idx[e] += 1;
            if idx[e] < LEVELS {
                break;
            }
            idx[e] = 0;
            e += 1;
        }
        if e == n {
            return best;
        }
    }
}

#[test]
fn grid_reduction_matches_brute_force() {
    let p = params();
    for n in [2, 3] {
        for r in 0..3u64 {
            let mut rng = stream(77, &[n as u64, r]);
            let h_in = sample_fading(n, 10.0, &mut rng);
            let h_out = sample_fading(n, 10.0, &mut rng);
            let a = grid_max(&p, &h_in, &h_out);
            let b = brute_force(&p, &h_in, &h_out);
            assert!((a - b).abs() <= 1e-9 * b, "N={n}: {a} vs {b}");
        }
    }
}

#[test]
fn closed_form_beats_grid_and_random_phases() {
    let p = params();
    let gap = (PI / LEVELS as f64).cos().powi(2);
    for n in [2usize, 4, 8] {
        for r in 0..100u64 {
            let mut rng = stream(2024, &[n as u64, r]);
            let h_in = sample_fading(n, 10.0, &mut rng);
            let h_out = sample_fading(n, 10.0, &mut rng);
            let closed = optimal_single_snr(&p, &h_in, &h_out, D_IN, D_OUT).unwrap();
            let phases = optimal_single_user_phases(&h_in, &h_out).unwrap();
            let achieved = snr(&p, &h_in, &h_out, phases.phases.clone());
            assert!((achieved - closed).abs() <= 1e-9 * closed);
            let grid = grid_max(&p, &h_in, &h_out);
            assert!(closed >= grid * (1.0 - 1e-12), "N={n} r={r}: grid {grid} above {closed}");
            assert!(grid >= gap * closed * (1.0 - 1e-12));
            for _ in 0..10_000 {
                let draw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
                assert!(closed >= snr(&p, &h_in, &h_out, draw) * (1.0 - 1e-12));
            }
        }
    }
}

#[test]
fn double_alignment_beats_random_phases() {
    let p = params();
    let n = 4;
    for r in 0..50u64 {
        let mut rng = stream(99, &[r]);
        let h_in = sample_fading(n, 10.0, &mut rng);
        let h_mid = sample_fading_matrix(n, n, 10.0, &mut rng);
        let h_out = sample_fading(n, 10.0, &mut rng);
        let power = |pi: &PhaseShiftMatrix, pj: &PhaseShiftMatrix| {
            DoubleCascade {
                h_in: &h_in,
                phase_i: pi,
                h_mid: &h_mid,
                phase_j: pj,
                h_out: &h_out,
                d_in: 10.0,
                d_mid: 10.0,
                d_out: 10.0,
            }
            .received_power(&p)
            .unwrap()
        };
        let (pi, pj) = align_double_phases(&h_in, &h_mid, &h_out, 20).unwrap();
        let aligned = power(&pi, &pj);
        let (pi1, pj1) = align_double_phases(&h_in, &h_mid, &h_out, 1).unwrap();
        assert!(aligned >= power(&pi1, &pj1) * (1.0 - 1e-12));
        for _ in 0..1000 {
            let a = PhaseShiftMatrix::new((0..n).map(|_| rng.random::<f64>() * 2.0 * PI).collect());
            let b = PhaseShiftMatrix::new((0..n).map(|_| rng.random::<f64>() * 2.0 * PI).collect());
            assert!(aligned >= power(&a, &b) * (1.0 - 1e-12));
        }
    }
}
