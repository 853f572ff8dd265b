use std::f64::consts::{PI, TAU};

use leoint::clocks::ClockModel;
use leoint::consts::{GPS_L1_HZ, GPS_ORBIT_RADIUS};
use leoint::geodesy::{ecef_to_geodetic, geodetic_to_ecef, viewing_geometry, EcefVector};
use leoint::geolocate::{
    doppler_from_ecef, estimate, horizontal_offset, synthesize_capture, AltitudePrior, EstimatorOptions, PassCapture,
};
use leoint::montecarlo::Scenario;
use leoint::orbits::ReceiverState;
use leoint::{Ecef, Geodetic};
use proptest::prelude::*;

fn unit(az: f64, el: f64) -> Ecef {
    let (sa, ca) = az.sin_cos();
    let (se, ce) = el.sin_cos();
    EcefVector::new(ce * ca, ce * sa, se)
}

fn receiver(position: Ecef, velocity: Ecef, clock_rate: f64) -> ReceiverState {
    ReceiverState { t: 0.0, position, velocity, clock_rate }
}

proptest! {
    #[test]
    fn geodetic_round_trip(lat in -89.99f64..89.99, lon in -179.99f64..180.0, alt in -500.0f64..2.0e6) {
        let p = Geodetic::new(lat, lon, alt).unwrap();
        let back = ecef_to_geodetic(&geodetic_to_ecef(&p)).unwrap();
        prop_assert!((back.latitude - lat).abs() < 1e-9);
        prop_assert!((back.longitude - lon).abs() < 1e-9);
        prop_assert!((back.altitude - alt).abs() < 1e-4);
    }

    #[test]
    fn doppler_unchanged_by_rotation_about_the_pole(
        az in 0.0..TAU, el in -1.2f64..1.2, vaz in 0.0..TAU, vel in -1.5f64..1.5,
        angle in -PI..PI, rate in -1e-8f64..1e-8,
    ) {
        let tx = geodetic_to_ecef(&Geodetic::new(35.4, 35.95, 48.0).unwrap());
        let rx = unit(az, el) * 6_800e3;
        let v = unit(vaz, vel) * 7_600.0;
        let a = doppler_from_ecef(&tx, rate, &receiver(rx, v, 0.0), GPS_L1_HZ).unwrap();
        let rotated = receiver(rx.rotate_z(angle), v.rotate_z(angle), 0.0);
        let b = doppler_from_ecef(&tx.rotate_z(angle), rate, &rotated, GPS_L1_HZ).unwrap();
        prop_assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()));
    }

    #[test]
    fn doppler_depends_only_on_relative_geometry(
        dx in -1e7f64..1e7, dy in -1e7f64..1e7, dz in -1e7f64..1e7, az in 0.0..TAU,
    ) {
        let tx = EcefVector::new(6_371e3, 0.0, 0.0);
        let rx = tx + unit(az, 0.3) * 2_000e3;
        let v = EcefVector::new(0.0, 7_600.0, 500.0);
        let shift = EcefVector::new(dx, dy, dz);
        let a = doppler_from_ecef(&tx, 0.0, &receiver(rx, v, 0.0), GPS_L1_HZ).unwrap();
        let b = doppler_from_ecef(&(tx + shift), 0.0, &receiver(rx + shift, v, 0.0), GPS_L1_HZ).unwrap();
        prop_assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn transmitter_and_receiver_clock_errors_are_interchangeable(rate in -1e-7f64..1e-7) {
        let tx = EcefVector::new(6_371e3, 0.0, 0.0);
        let rx = EcefVector::new(6_500e3, 1_500e3, 300e3);
        let v = EcefVector::new(-1_000.0, 7_400.0, 0.0);
        let from_tx = doppler_from_ecef(&tx, rate, &receiver(rx, v, 0.0), GPS_L1_HZ).unwrap();
        let from_rx = doppler_from_ecef(&tx, 0.0, &receiver(rx, v, -rate), GPS_L1_HZ).unwrap();
        prop_assert!((from_tx - from_rx).abs() < 1e-9);
    }

    #[test]
    fn satellite_off_boresight_angle_is_bounded(
        raz in 0.0..TAU, rel in -1.5f64..1.5, r in 6_400e3f64..7_400e3,
        saz in 0.0..TAU, sel in -1.5f64..1.5, baz in 0.0..TAU, bel in -1.5f64..1.5,
    ) {
        let rx = unit(raz, rel) * r;
        let sat = unit(saz, sel) * GPS_ORBIT_RADIUS;
        let g = viewing_geometry(&rx, &unit(baz, bel), &sat).unwrap();
        let bound = (r / GPS_ORBIT_RADIUS).asin().to_degrees();
        prop_assert!(g.z_s <= bound + 1e-9);
        prop_assert!((0.0..=180.0).contains(&g.z_r));
    }
}

fn horizontal_area(passes: usize, prior_sigma: f64) -> f64 {
    let scenario = Scenario::three_pass();
    let tx = scenario.transmitter_state();
    let captures: Vec<_> = scenario
        .build_passes()
        .unwrap()
        .iter()
        .zip(&scenario.passes)
        .take(passes)
        .enumerate()
        .map(|(i, (pass, geom))| {
            synthesize_capture(&tx, pass, &ClockModel::ideal(), 0.0, i as u64)
                .unwrap()
                .with_sigma(geom.w_sigma)
                .unwrap()
        })
        .collect();
    let prior = AltitudePrior { altitude: 48.0, sigma: prior_sigma };
    let sol = estimate(&captures, Some(prior), Some(scenario.transmitter), GPS_L1_HZ, &EstimatorOptions::default()).unwrap();
    let c = sol.horizontal_covariance();
    c[0][0] * c[1][1] - c[0][1] * c[1][0]
}

#[test]
fn more_captures_never_lose_information() {
    let one = horizontal_area(1, 5.0);
    let two = horizontal_area(2, 5.0);
    let three = horizontal_area(3, 5.0);
    assert!(two <= one * (1.0 + 1e-9), "{one} {two}");
    assert!(three <= two * (1.0 + 1e-9), "{two} {three}");
}

#[test]
fn tighter_altitude_prior_never_loses_information() {
    let loose = horizontal_area(1, 50.0);
    let tight = horizontal_area(1, 1.0);
    assert!(tight <= loose * (1.0 + 1e-9), "{loose} {tight}");
}

#[test]
fn receiver_clock_offset_moves_into_transmitter_rate() {
    let scenario = Scenario::three_pass();
    let tx = scenario.transmitter_state();
    let captures: Vec<_> = scenario
        .build_passes()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, pass)| synthesize_capture(&tx, pass, &ClockModel::ideal(), 2.3, i as u64).unwrap())
        .collect();
    let delta = 2e-9;
    let shifted: Vec<_> = captures
        .iter()
        .map(|c| PassCapture::new(c.pass.clone().with_clock_rate(delta), c.measurements.clone()).unwrap())
        .collect();
    let prior = Some(AltitudePrior { altitude: 48.0, sigma: 5.0 });
    let opts = EstimatorOptions::default();
    let a = estimate(&captures, prior, Some(scenario.transmitter), GPS_L1_HZ, &opts).unwrap();
    let b = estimate(&shifted, prior, Some(scenario.transmitter), GPS_L1_HZ, &opts).unwrap();
    let (east, north) = horizontal_offset(&a.transmitter.position, &b.transmitter.position);
    assert!(east.hypot(north) < 0.05, "{east} {north}");
    for c in &captures {
        let shift = b.transmitter.clock_rate(c.label()) - a.transmitter.clock_rate(c.label());
        assert!((shift - delta).abs() < 1e-3 * delta, "{shift}");
    }
}
