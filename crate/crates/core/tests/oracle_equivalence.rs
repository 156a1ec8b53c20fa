//! The truncated Fock oracle against the closed forms, with both channel
//! constructions (creation-operator substitution and the exponentiated
//! generator of the dilated unitary) checked against each other.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qdiffract::aperture::{Aperture, ModeGrid, ModeIndex};
use qdiffract::diffraction::{build_restricted_map, diffracted_char, ModeMap};
use qdiffract::entanglement::{correlation_distance, schlienz_mahler_fock, schlienz_mahler_thermal};
use qdiffract::oracle::{
    apply_contraction_by_generator, apply_linear_channel, build_state, char_function_fock, cutoff_for_tail, FockDensity,
};
use qdiffract::states::{InputState, SingleModeState};

struct Instance {
    input: InputState,
    map: ModeMap,
    cutoff: usize,
}

fn distinct(rng: &mut ChaCha8Rng, count: usize, nx: i32, ny: i32) -> Vec<ModeIndex> {
    let mut out: Vec<ModeIndex> = Vec::new();
    while out.len() < count {
        let k = ModeIndex::new(rng.random_range(-nx..=nx), rng.random_range(-ny..=ny));
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

fn random_mode_state(rng: &mut ChaCha8Rng, cutoff: usize) -> SingleModeState {
    match rng.random_range(0..3) {
        0 => SingleModeState::coherent(C64::from_polar(
            rng.random_range(0.05..0.3),
            rng.random_range(0.0..std::f64::consts::TAU),
        )),
        1 => SingleModeState::thermal(rng.random_range(0.01..0.05)),
        _ => SingleModeState::fock(rng.random_range(0..cutoff as u32)),
    }
}

// Halves coherent and thermal amplitudes until the truncation tail is far
// below the comparison tolerance.
fn fit_to_cutoff(mut modes: Vec<(ModeIndex, SingleModeState)>, cutoff: usize) -> InputState {
    loop {
        let input = InputState::Product { modes: modes.clone() };
        if cutoff_for_tail(&input, 1e-18) <= cutoff {
            return input;
        }
        for (_, state) in modes.iter_mut() {
            *state = match state {
                SingleModeState::Coherent { alpha } => SingleModeState::coherent(C64::new(alpha[0], alpha[1]) * 0.5),
                SingleModeState::Thermal { mean } => SingleModeState::thermal(*mean * 0.25),
                SingleModeState::Fock { n } => SingleModeState::fock(*n),
            };
        }
    }
}

fn instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_7ac1e);
    let ap = Aperture::double_slit(0.125, 0.5, 1.0).unwrap();
    let grid = ModeGrid::new(1.0, 16).unwrap();
    // (incident, retained, cutoff), sized so the generator route stays small
    let shapes = [(1, 2, 8), (1, 4, 4), (2, 2, 4), (2, 3, 3), (3, 3, 2), (3, 4, 2), (2, 4, 3)];
    let mut out = Vec::new();
    for (m, r, cutoff) in shapes {
        let incident = distinct(&mut rng, m, 3, 1);
        let retained = distinct(&mut rng, r, 4, 1);
        let map = build_restricted_map(&ap, &grid, &incident, &retained).unwrap();
        let input = if m == 2 && cutoff > 2 && rng.random_bool(0.5) {
            let theta: f64 = rng.random_range(0.0..1.5);
            let n = rng.random_range(1..cutoff as u32);
            InputState::beam_splitter_fock(n, theta.cos(), theta.sin(), [incident[0], incident[1]]).unwrap()
        } else {
            fit_to_cutoff(incident.iter().map(|k| (*k, random_mode_state(&mut rng, cutoff))).collect(), cutoff)
        };
        out.push(Instance { input, map, cutoff });
    }
    out
}

fn max_abs_diff(a: &FockDensity, b: &FockDensity) -> f64 {
    (a.matrix() - b.matrix()).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[test]
fn both_channel_routes_agree() {
    for inst in instances() {
        let rho = build_state(&inst.input, inst.cutoff).unwrap();
        let by_creation = apply_linear_channel(&rho, &inst.map).unwrap();
        let by_generator = apply_contraction_by_generator(&rho, inst.map.entries()).unwrap();
        let diff = max_abs_diff(&by_creation, &by_generator);
        assert!(diff < 1e-10, "routes differ by {diff:e} for {:?}", inst.input);
        assert!((by_creation.trace() - rho.trace()).abs() < 1e-12);
    }
}

#[test]
fn oracle_char_matches_closed_form_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_c4a7);
    for inst in instances() {
        let rho = build_state(&inst.input, inst.cutoff).unwrap();
        let outputs = [
            apply_linear_channel(&rho, &inst.map).unwrap(),
            apply_contraction_by_generator(&rho, inst.map.entries()).unwrap(),
        ];
        let rows = inst.map.rows();
        for _ in 0..50 {
            let xi: Vec<C64> = rows
                .iter()
                .map(|_| C64::from_polar(rng.random_range(0.0..0.8), rng.random_range(0.0..std::f64::consts::TAU)))
                .collect();
            let sparse: Vec<(ModeIndex, C64)> = rows.iter().copied().zip(xi.iter().copied()).collect();
            let exact = diffracted_char(&inst.input, &inst.map, &sparse).unwrap();
            for out in &outputs {
                let mut full = xi.clone();
                full.resize(out.modes(), C64::new(0.0, 0.0));
                let oracle = char_function_fock(out, &full, 1e-8).unwrap();
                assert!((oracle - exact).norm() <= 1e-8, "{oracle} vs {exact} for {:?}", inst.input);
            }
        }
    }
}

#[test]
fn pair_state_char_matches_with_idlers() {
    let ap = Aperture::double_slit(0.125, 0.5, 1.0).unwrap();
    let grid = ModeGrid::new(1.0, 16).unwrap();
    let signals = vec![ModeIndex::new(0, 0), ModeIndex::new(2, 0)];
    let retained = [ModeIndex::new(0, 0), ModeIndex::new(1, 0), ModeIndex::new(2, 0), ModeIndex::new(-2, 0)];
    let map = build_restricted_map(&ap, &grid, &signals, &retained).unwrap();
    let input = InputState::spdc(C64::new(0.2, -0.1), signals).unwrap();
    let out = apply_linear_channel(&build_state(&input, 2).unwrap(), &map).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_5bdc);
    for _ in 0..50 {
        let xi: Vec<C64> = (0..out.modes())
            .map(|_| C64::from_polar(rng.random_range(0.0..0.8), rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let sparse: Vec<(ModeIndex, C64)> = retained.iter().copied().zip(xi.iter().copied()).collect();
        let exact =
            qdiffract::diffraction::diffracted_char_with_idlers(&input, &map, &sparse, &xi[retained.len()..]).unwrap();
        let oracle = char_function_fock(&out, &xi, 1e-8).unwrap();
        assert!((oracle - exact).norm() <= 1e-8, "{oracle} vs {exact}");
    }
}

#[test]
fn schlienz_mahler_fock_approaches_thermal_closed_form() {
    let ap = Aperture::double_slit(0.125, 0.5, 1.0).unwrap();
    let grid = ModeGrid::new(1.0, 16).unwrap();
    let k0 = ModeIndex::ZERO;
    let pair = [ModeIndex::new(0, 0), ModeIndex::new(2, 0)];
    let map = build_restricted_map(&ap, &grid, &[k0], &pair).unwrap();
    for mean in [0.3, 0.8, 1.5] {
        let input = InputState::single(k0, SingleModeState::thermal(mean));
        let cutoff = cutoff_for_tail(&input, 1e-10);
        let out = apply_linear_channel(&build_state(&input, cutoff).unwrap(), &map).unwrap();
        let (f1, f2) = (ap.factor_at_offset(pair[0]), ap.factor_at_offset(pair[1]));
        let closed = schlienz_mahler_thermal(mean, ap.transmissivity(), f1, f2);
        // the closed form takes the dimension factor N/(N−1) as 1
        let limit = correlation_distance(&out, 1).unwrap();
        assert!((limit - closed).abs() <= 1e-4, "mean {mean}: {limit} vs {closed}");
        let n = out.dim() as f64;
        let finite = schlienz_mahler_fock(&out, 1).unwrap();
        assert!((finite - limit * (n / (n - 1.0)).sqrt()).abs() < 1e-15);
    }
}
