//! Network geometry and channel generation.
//!
//! One `ChannelRealization` bundles everything random about an instance: RRH
//! and UE drops, access-link fading, and the fronthaul steering geometry. All
//! of it is a pure function of `(config, seed, trial)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{thermal_noise_watts, SystemConfig};
use crate::error::{CranError, Result};
use crate::linalg::{vstack, CMat, CVec};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Placement attempts before giving up on the separation floors.
const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Positions, angles, and large-scale gains for one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub cu_xy: (f64, f64),
    pub rrh_xy: Vec<(f64, f64)>,
    pub ue_xy: Vec<(f64, f64)>,
    /// Angle of each RRH as seen from the CU array broadside, radians.
    pub theta: Vec<f64>,
    /// Free-space fronthaul power gain per RRH.
    pub beta_fronthaul: Vec<f64>,
    /// Noise-normalized access gain, UE k to RRH l, K x L.
    pub beta_access: DMatrix<f64>,
}

/// Deterministic per-trial generator: one ChaCha stream per trial index.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Free-space power gain (lambda / 4 pi d)^2 of the fronthaul link.
pub fn fronthaul_pathloss(distance_m: f64, carrier_hz: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(CranError::NonpositiveDistance(distance_m));
    }
    let lambda = SPEED_OF_LIGHT / carrier_hz;
    let ratio = lambda / (4.0 * std::f64::consts::PI * distance_m);
    Ok(ratio * ratio)
}

/// Noise-normalized access-link gain for a ground distance `d2d_m`.
///
/// Urban-microcell NLOS path loss
///   PL_dB = 35.3 log10(d_3D) + 22.4 + 21.3 log10(f_c/1 GHz) - 0.3 (h_UE - 1.5)
/// divided by thermal noise over the configured bandwidth and noise figure,
/// so the implied receiver noise floor on the access side is 1.
pub fn access_pathloss(d2d_m: f64, cfg: &SystemConfig) -> Result<f64> {
    let dh = cfg.h_rrh_m - cfg.h_ue_m;
    let d3d = (d2d_m * d2d_m + dh * dh).sqrt();
    if !(d3d > 0.0) {
        return Err(CranError::NonpositiveDistance(d3d));
    }
    let pl_db = 35.3 * d3d.log10() + 22.4 + 21.3 * (cfg.carrier_hz / 1e9).log10()
        - 0.3 * (cfg.h_ue_m - 1.5);
    let noise_w = thermal_noise_watts(cfg.bandwidth_hz, cfg.noise_figure_db);
    Ok(10f64.powf(-pl_db / 10.0) / noise_w)
}

/// CU array response for a source at angle `theta`: element n carries phase
/// 2 pi n (spacing_ratio) sin(theta). Norm squared is the element count.
pub fn steering_vector(theta: f64, n_c: usize, spacing_ratio: f64) -> CVec {
    let step = 2.0 * std::f64::consts::PI * spacing_ratio * theta.sin();
    CVec::from_iterator(n_c, (0..n_c).map(|n| Complex64::from_polar(1.0, step * n as f64)))
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Drops RRHs and UEs uniformly in the square, resampling the RRH set until
/// the CU and inter-RRH separation floors hold.
pub fn sample_topology<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Topology> {
    let cu = (cfg.area_m / 2.0, cfg.area_m / 2.0);

    let mut rrh = Vec::with_capacity(cfg.L);
    let mut accepted = false;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        rrh.clear();
        for _ in 0..cfg.L {
            let x: f64 = rng.gen::<f64>() * cfg.area_m;
            let y: f64 = rng.gen::<f64>() * cfg.area_m;
            rrh.push((x, y));
        }
        let cu_ok = rrh.iter().all(|&p| dist(p, cu) >= cfg.min_rrh_cu_m);
        let pair_ok = (0..cfg.L).all(|i| (i + 1..cfg.L).all(|j| dist(rrh[i], rrh[j]) >= cfg.min_rrh_rrh_m));
        if cu_ok && pair_ok {
            accepted = true;
            break;
        }
    }
    if !accepted {
        return Err(CranError::PlacementInfeasible { attempts: MAX_PLACEMENT_ATTEMPTS });
    }

    let ue: Vec<(f64, f64)> = (0..cfg.K)
        .map(|_| (rng.gen::<f64>() * cfg.area_m, rng.gen::<f64>() * cfg.area_m))
        .collect();

    let theta: Vec<f64> = (0..cfg.L)
        .map(|_| rng.gen::<f64>() * 2.0 * std::f64::consts::PI)
        .collect();

    let beta_fronthaul = rrh
        .iter()
        .map(|&p| fronthaul_pathloss(dist(p, cu), cfg.carrier_hz))
        .collect::<Result<Vec<_>>>()?;

    let mut beta_access = DMatrix::zeros(cfg.K, cfg.L);
    for k in 0..cfg.K {
        for l in 0..cfg.L {
            beta_access[(k, l)] = access_pathloss(dist(ue[k], rrh[l]), cfg)?;
        }
    }

    Ok(Topology { cu_xy: cu, rrh_xy: rrh, ue_xy: ue, theta, beta_fronthaul, beta_access })
}

/// Rayleigh access channels: H[l][k] is N_H[l] x N_U[k] with i.i.d. unit-
/// variance complex normal entries scaled by sqrt(beta_access[k][l]).
pub fn draw_access_channels<R: Rng + ?Sized>(
    topology: &Topology,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Vec<Vec<CMat>> {
    let root_half = std::f64::consts::FRAC_1_SQRT_2;
    (0..cfg.L)
        .map(|l| {
            (0..cfg.K)
                .map(|k| {
                    let scale = topology.beta_access[(k, l)].sqrt();
                    let mut h = CMat::zeros(cfg.N_H[l], cfg.N_U[k]);
                    for i in 0..cfg.N_H[l] {
                        for j in 0..cfg.N_U[k] {
                            let re: f64 = rng.sample(StandardNormal);
                            let im: f64 = rng.sample(StandardNormal);
                            h[(i, j)] = Complex64::new(re, im) * root_half * scale;
                        }
                    }
                    h
                })
                .collect()
        })
        .collect()
}

/// Everything random about one instance, plus the deterministic fronthaul
/// geometry derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub topology: Topology,
    /// Access channels, indexed [l][k].
    pub h: Vec<Vec<CMat>>,
    /// CU steering matrix, N_C x L; column l is the response to RRH l.
    pub b: CMat,
    /// Fronthaul channel matrix, N_C x L; column l is sqrt(beta_l) b_l.
    pub g: CMat,
}

impl ChannelRealization {
    /// Draws a full realization for `(seed, trial)`.
    pub fn sample(cfg: &SystemConfig, seed: u64, trial: u64) -> Result<Self> {
        let mut rng = trial_rng(seed, trial);
        let topology = sample_topology(cfg, &mut rng)?;
        let h = draw_access_channels(&topology, cfg, &mut rng);
        Ok(Self::from_parts(topology, h, cfg))
    }

    /// Rebuilds the fronthaul geometry for a possibly updated array size
    /// while keeping the drop and fading fixed.
    pub fn from_parts(topology: Topology, h: Vec<Vec<CMat>>, cfg: &SystemConfig) -> Self {
        let mut b = CMat::zeros(cfg.N_C, cfg.L);
        let mut g = CMat::zeros(cfg.N_C, cfg.L);
        for l in 0..cfg.L {
            let col = steering_vector(topology.theta[l], cfg.N_C, cfg.antenna_spacing_ratio);
            let root_beta = topology.beta_fronthaul[l].sqrt();
            for n in 0..cfg.N_C {
                b[(n, l)] = col[n];
                g[(n, l)] = col[n] * root_beta;
            }
        }
        Self { topology, h, b, g }
    }

    pub fn n_rrh(&self) -> usize {
        self.h.len()
    }

    pub fn n_ue(&self) -> usize {
        self.h.first().map_or(0, |row| row.len())
    }

    /// All-RRH channel of UE k: the N_H[l] x N_U[k] blocks stacked over l.
    pub fn stacked_channel(&self, k: usize) -> CMat {
        let parts: Vec<CMat> = self.h.iter().map(|row| row[k].clone()).collect();
        vstack(&parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> SystemConfig {
        SystemConfig::desk_default()
    }

    #[test]
    fn fronthaul_pathloss_reference_values() {
        // Unit gain at d = lambda / 4 pi.
        let lambda = SPEED_OF_LIGHT / 1.9e9;
        let d0 = lambda / (4.0 * std::f64::consts::PI);
        assert_relative_eq!(fronthaul_pathloss(d0, 1.9e9).unwrap(), 1.0, epsilon = 1e-12);

        // Inverse-square law.
        let b1 = fronthaul_pathloss(100.0, 1.9e9).unwrap();
        let b2 = fronthaul_pathloss(200.0, 1.9e9).unwrap();
        assert_relative_eq!(b1 / b2, 4.0, epsilon = 1e-12);

        // 100 m at 1.9 GHz: about -78.0 dB.
        assert_relative_eq!(b1, 1.5765744202613436e-8, max_relative = 1e-12);

        assert!(matches!(
            fronthaul_pathloss(0.0, 1.9e9),
            Err(CranError::NonpositiveDistance(_))
        ));
    }

    #[test]
    fn access_pathloss_reference_value() {
        // 200 m ground distance, heights 22.5/1.5 m, 1.9 GHz, 20 MHz, NF 5 dB.
        let beta = access_pathloss(200.0, &cfg()).unwrap();
        let expect = 43.07092565723857;
        // 0.01 dB agreement.
        assert!((10.0 * (beta / expect).log10()).abs() < 0.01, "beta={beta}");
    }

    #[test]
    fn access_pathloss_slope_is_35_3_db_per_decade() {
        // Equal heights make d_3D = d_2D, so the slope is exact.
        let mut c = cfg();
        c.h_rrh_m = 1.5;
        c.h_ue_m = 1.5;
        let b1 = access_pathloss(50.0, &c).unwrap();
        let b2 = access_pathloss(500.0, &c).unwrap();
        assert_relative_eq!(10.0 * (b1 / b2).log10(), 35.3, epsilon = 1e-9);
    }

    #[test]
    fn access_pathloss_equal_distances_agree() {
        let c = cfg();
        let a = access_pathloss(123.4, &c).unwrap();
        let b = access_pathloss(123.4, &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn steering_vector_reference_cases() {
        let b = steering_vector(0.0, 8, 0.5);
        for n in 0..8 {
            assert_relative_eq!(b[n].re, 1.0, epsilon = 1e-15);
            assert_relative_eq!(b[n].im, 0.0, epsilon = 1e-15);
        }

        let single = steering_vector(1.234, 1, 0.5);
        assert_eq!(single.len(), 1);
        assert_relative_eq!(single[0].re, 1.0, epsilon = 1e-15);

        // Broadside-endfire extreme: phase step pi.
        let two = steering_vector(std::f64::consts::FRAC_PI_2, 2, 0.5);
        assert_relative_eq!(two[0].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(two[1].re, -1.0, epsilon = 1e-12);
        assert!(two[1].im.abs() < 1e-12);
    }

    #[test]
    fn steering_vector_norm_is_element_count() {
        for &(theta, n_c) in &[(0.3, 4usize), (-1.2, 33), (2.9, 100)] {
            let b = steering_vector(theta, n_c, 0.5);
            assert_relative_eq!(b.norm_squared(), n_c as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn topology_respects_floors_and_ranges() {
        let c = cfg();
        let mut rng = trial_rng(7, 0);
        let topo = sample_topology(&c, &mut rng).unwrap();
        assert_eq!(topo.cu_xy, (500.0, 500.0));
        assert_eq!(topo.rrh_xy.len(), c.L);
        assert_eq!(topo.ue_xy.len(), c.K);
        for &p in topo.rrh_xy.iter().chain(topo.ue_xy.iter()) {
            assert!(p.0 >= 0.0 && p.0 <= c.area_m && p.1 >= 0.0 && p.1 <= c.area_m);
        }
        for &p in &topo.rrh_xy {
            assert!(dist(p, topo.cu_xy) >= c.min_rrh_cu_m);
        }
        for i in 0..c.L {
            for j in i + 1..c.L {
                assert!(dist(topo.rrh_xy[i], topo.rrh_xy[j]) >= c.min_rrh_rrh_m);
            }
        }
        for &b in &topo.beta_fronthaul {
            assert!(b > 0.0);
        }
        assert!(topo.beta_access.iter().all(|&b| b > 0.0));
    }

    #[test]
    fn impossible_placement_errors_out() {
        let mut c = cfg();
        c.area_m = 120.0;
        c.min_rrh_rrh_m = 500.0; // cannot fit 4 RRHs 500 m apart in 120 m
        c.min_rrh_cu_m = 10.0;
        let mut rng = trial_rng(7, 0);
        assert!(matches!(
            sample_topology(&c, &mut rng),
            Err(CranError::PlacementInfeasible { .. })
        ));
    }

    #[test]
    fn fading_is_unit_variance_before_pathloss() {
        // One 100 x 1000 block with beta = 1 gives 1e5 entries.
        let mut c = cfg();
        c.K = 1;
        c.L = 1;
        c.N_U = vec![1000];
        c.N_H = vec![100];
        c.weights = vec![1.0];
        let topo = Topology {
            cu_xy: (0.0, 0.0),
            rrh_xy: vec![(1.0, 1.0)],
            ue_xy: vec![(2.0, 2.0)],
            theta: vec![0.0],
            beta_fronthaul: vec![1.0],
            beta_access: DMatrix::from_element(1, 1, 1.0),
        };
        let mut rng = trial_rng(42, 0);
        let h = draw_access_channels(&topo, &c, &mut rng);
        let m = &h[0][0];
        let mean_sq = m.iter().map(|z| z.norm_sqr()).sum::<f64>() / (m.len() as f64);
        assert!((mean_sq - 1.0).abs() < 0.02, "mean |h|^2 = {mean_sq}");
    }

    #[test]
    fn fading_scales_with_access_gain() {
        let mut c = cfg();
        c.K = 1;
        c.L = 1;
        c.N_U = vec![500];
        c.N_H = vec![200];
        c.weights = vec![1.0];
        let beta = 2.5;
        let topo = Topology {
            cu_xy: (0.0, 0.0),
            rrh_xy: vec![(1.0, 1.0)],
            ue_xy: vec![(2.0, 2.0)],
            theta: vec![0.0],
            beta_fronthaul: vec![1.0],
            beta_access: DMatrix::from_element(1, 1, beta),
        };
        let mut rng = trial_rng(3, 5);
        let h = draw_access_channels(&topo, &c, &mut rng);
        let m = &h[0][0];
        let mean_sq = m.iter().map(|z| z.norm_sqr()).sum::<f64>() / (m.len() as f64);
        assert!((mean_sq / beta - 1.0).abs() < 0.03, "mean |h|^2 = {mean_sq}");
    }

    #[test]
    fn zero_gain_hook_gives_zero_channel() {
        let mut c = cfg();
        c.K = 1;
        c.L = 1;
        c.N_U = vec![2];
        c.N_H = vec![2];
        c.weights = vec![1.0];
        let topo = Topology {
            cu_xy: (0.0, 0.0),
            rrh_xy: vec![(1.0, 1.0)],
            ue_xy: vec![(2.0, 2.0)],
            theta: vec![0.0],
            beta_fronthaul: vec![1.0],
            beta_access: DMatrix::from_element(1, 1, 0.0),
        };
        let mut rng = trial_rng(3, 0);
        let h = draw_access_channels(&topo, &c, &mut rng);
        assert!(h[0][0].iter().all(|z| z.norm_sqr() == 0.0));
    }

    #[test]
    fn realization_is_reproducible_and_trial_dependent() {
        let c = cfg();
        let a = ChannelRealization::sample(&c, 11, 3).unwrap();
        let b = ChannelRealization::sample(&c, 11, 3).unwrap();
        assert_eq!(a, b);
        let other = ChannelRealization::sample(&c, 11, 4).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn fronthaul_columns_scale_steering_by_root_beta() {
        let c = cfg();
        let r = ChannelRealization::sample(&c, 5, 0).unwrap();
        for l in 0..c.L {
            let root_beta = r.topology.beta_fronthaul[l].sqrt();
            for n in 0..c.N_C {
                let expect = r.b[(n, l)] * root_beta;
                assert_relative_eq!(r.g[(n, l)].re, expect.re, epsilon = 1e-15);
                assert_relative_eq!(r.g[(n, l)].im, expect.im, epsilon = 1e-15);
            }
        }
        for l in 0..c.L {
            let norm: f64 = (0..c.N_C).map(|n| r.b[(n, l)].norm_sqr()).sum();
            assert_relative_eq!(norm, c.N_C as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn stacked_channel_orders_rrh_blocks() {
        let c = cfg();
        let r = ChannelRealization::sample(&c, 5, 0).unwrap();
        let s = r.stacked_channel(2);
        assert_eq!(s.nrows(), c.total_rx_antennas());
        assert_eq!(s.ncols(), c.N_U[2]);
        let mut off = 0;
        for l in 0..c.L {
            let block = s.view((off, 0), (c.N_H[l], c.N_U[2])).clone_owned();
            assert_eq!(block, r.h[l][2]);
            off += c.N_H[l];
        }
    }
}
