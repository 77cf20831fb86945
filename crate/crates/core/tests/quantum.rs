use chaodeco::classical::Propagator;
use chaodeco::quantum::{ehrenfest_break_time, init_gaussian, propagate_wavepacket, Grid2D, BREAK_THRESHOLD_FRACTION};
use chaodeco::{HamiltonianModel, PhasePoint};

/// Break time of a packet against its classical centre, threshold a fraction
/// of the energy-shell diameter.
fn break_time(model: HamiltonianModel, z: PhasePoint, grid: Grid2D, widths: (f64, f64), n_steps: usize) -> Option<f64> {
    let dt = 0.01;
    let every = 5;
    let mut st = init_gaussian(&grid, z, widths).unwrap();
    let q = propagate_wavepacket(&mut st, &model, dt, n_steps, every).unwrap();
    let traj = Propagator::new(model, dt).with_sample_every(every).propagate(z, n_steps).unwrap();
    let energy = model.total_energy(&z).unwrap();
    let threshold = BREAK_THRESHOLD_FRACTION * model.shell_diameter(energy).unwrap();
    ehrenfest_break_time(&q, &traj, threshold).unwrap()
}

#[test]
fn coherent_state_in_an_oscillator_never_breaks() {
    let hbar = 0.05;
    let model = HamiltonianModel::harmonic(1.0, 1.0);
    let grid = Grid2D::new(64, 64, 4.0, 4.0, hbar).unwrap();
    let s = (hbar / 2.0).sqrt();
    assert_eq!(break_time(model, PhasePoint::new(0.5, -0.2, 0.1, 0.4), grid, (s, s), 2000), None);
}

#[test]
fn chaotic_packet_breaks_before_regular_packet_at_matched_energy() {
    let (hbar, widths) = (0.005, (0.05, 0.05));
    let hh = break_time(
        HamiltonianModel::henon_heiles(1.0),
        PhasePoint::new(0.0, -0.15, 0.4186287137786896, 0.0),
        Grid2D::new(512, 512, 8.0, 8.0, hbar).unwrap(),
        widths,
        1200,
    )
    .expect("chaotic packet breaks");
    let p = 0.31496031496047244;
    let sq = break_time(
        HamiltonianModel::separable_quartic(1.0, 1.0),
        PhasePoint::new(0.2, -0.2, p, p),
        Grid2D::new(256, 256, 4.0, 4.0, hbar).unwrap(),
        widths,
        1400,
    )
    .expect("regular packet breaks");
    assert!(hh < sq, "t_hbar(chaotic) = {hh}, t_hbar(regular) = {sq}");
    // Regression baselines at E = 1/10, hbar = 0.005, sigma = 0.05.
    assert!((hh - 10.144).abs() < 0.05, "{hh}");
    assert!((sq - 12.721).abs() < 0.05, "{sq}");
}
