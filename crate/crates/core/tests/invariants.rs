use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snn_delay::config::delay_bound;
use snn_delay::dynamics::{effective_delay, forward_sample_with, ForwardMode, Reads};
use snn_delay::learn::{
    apply_updates, sample_gradients, trace_step, weight_eligibility_step, LearnerOptions, Optimizer, OptimizerKind,
    TraceGroup,
};
use snn_delay::oracle::bptt_grad;
use snn_delay::params::{DelayParams, Mask};
use snn_delay::{
    forward_sample, DelayMode, DenseSample, Gradients, Group, Learnable, Matrix, NetworkConfig, NetworkParams,
    NetworkState, SpikeMode,
};

fn delay_mode() -> impl Strategy<Value = DelayMode> {
    prop_oneof![Just(DelayMode::None), Just(DelayMode::Axonal), Just(DelayMode::Synaptic)]
}

fn random_sample(n_in: usize, t_len: usize, rate: f64, label: usize, seed: u64) -> DenseSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..t_len * n_in).map(|_| rng.gen_bool(rate) as u8).collect();
    DenseSample::new(n_in, frames, label)
}

#[allow(clippy::too_many_arguments)]
fn random_net(
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    recurrent: bool,
    delay_in: DelayMode,
    delay_rec: DelayMode,
    sparsity: f64,
    seed: u64,
) -> (NetworkConfig, NetworkParams) {
    let cfg = NetworkConfig {
        n_in,
        n_hidden,
        n_out,
        recurrent,
        delay_in,
        delay_rec: if recurrent { delay_rec } else { DelayMode::None },
        d_max: 9,
        sigma: 1.5,
        sparsity,
        seed,
        ..Default::default()
    };
    let mut params = NetworkParams::init(&cfg).unwrap();
    params.w_in.as_mut_slice().iter_mut().for_each(|w| *w *= 3.0);
    (cfg, params)
}

fn raster(sample: &DenseSample, params: &NetworkParams, cfg: &NetworkConfig) -> Matrix {
    forward_sample(sample, params, cfg).unwrap().raster
}

/// Steps the network and returns `(v, s)` for every step.
fn trajectory(sample: &DenseSample, params: &NetworkParams, cfg: &NetworkConfig) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut state = NetworkState::new(cfg);
    let mut reads = Reads::new(cfg);
    (0..sample.n_frames())
        .map(|t| {
            state.step(sample.frame(t), params, cfg, &ForwardMode::BINARY, &mut reads).unwrap();
            (state.v.clone(), state.s.clone())
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shifting_the_input_shifts_the_raster(
        seed in 0u64..10_000,
        k in 0usize..12,
        recurrent in any::<bool>(),
        delay_in in delay_mode(),
        delay_rec in delay_mode(),
    ) {
        let (cfg, params) = random_net(4, 5, 3, recurrent, delay_in, delay_rec, 0.0, seed);
        let x = random_sample(4, 30, 0.3, 0, seed);
        let base = forward_sample(&x, &params, &cfg).unwrap();
        let moved = forward_sample(&x.shifted(k), &params, &cfg).unwrap();
        for t in 0..k {
            prop_assert!(moved.raster.row(t).iter().all(|&s| s == 0.0));
            prop_assert!(moved.readout.row(t).iter().all(|&y| y == 0.0));
        }
        for t in 0..x.n_frames() {
            prop_assert_eq!(moved.raster.row(t + k), base.raster.row(t));
            prop_assert_eq!(moved.readout.row(t + k), base.readout.row(t));
        }
    }

    #[test]
    fn uniform_delay_equals_shifted_input(seed in 0u64..10_000, d in -4.0f64..=4.0) {
        let (cfg, mut params) = random_net(3, 4, 2, false, DelayMode::Synaptic, DelayMode::None, 0.0, seed);
        params.d_in.values_mut().fill(d);
        let lag = effective_delay(d, cfg.d_max).unwrap();

        let plain_cfg = NetworkConfig { delay_in: DelayMode::None, ..cfg.clone() };
        let plain = NetworkParams { d_in: DelayParams::None, ..params.clone() };

        let x = random_sample(3, 40, 0.3, 0, seed);
        let delayed = raster(&x, &params, &cfg);
        let shifted = raster(&x.shifted(lag), &plain, &plain_cfg);
        for t in 0..x.n_frames() {
            prop_assert_eq!(delayed.row(t), shifted.row(t));
        }
    }

    #[test]
    fn reset_subtracts_threshold_after_each_spike(
        seed in 0u64..10_000,
        recurrent in any::<bool>(),
        delay_in in delay_mode(),
    ) {
        let (cfg, params) = random_net(4, 5, 2, recurrent, delay_in, DelayMode::Synaptic, 0.0, seed);
        let x = random_sample(4, 40, 0.4, 0, seed);
        let mut state = NetworkState::new(&cfg);
        let mut reads = Reads::new(&cfg);
        let alpha = cfg.alpha();
        for t in 0..x.n_frames() {
            let (v_prev, s_prev) = (state.v.clone(), state.s.clone());
            state.gather_reads(x.frame(t), &params, &cfg, &ForwardMode::BINARY.read, &mut reads).unwrap();
            state.integrate(&params, &cfg, SpikeMode::Binary, &reads);
            for j in 0..cfg.n_hidden {
                let mut drive: f64 = (0..cfg.n_in).map(|i| params.w_in.get(j, i) * reads.input.get(j, i)).sum();
                if let (Some(w), Some(r)) = (&params.w_rec, &reads.rec) {
                    drive += (0..cfg.n_hidden).map(|k| w.get(j, k) * r.get(j, k)).sum::<f64>();
                }
                let expected = alpha * v_prev[j] + drive - cfg.v_th * s_prev[j];
                prop_assert!((state.v[j] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
                prop_assert_eq!(state.s[j], if state.v[j] > cfg.v_th { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn membrane_stays_within_drive_bound(
        seed in 0u64..10_000,
        recurrent in any::<bool>(),
        delay_in in delay_mode(),
        scale in 0.5f64..20.0,
    ) {
        let (cfg, mut params) = random_net(5, 4, 2, recurrent, delay_in, DelayMode::Axonal, 0.0, seed);
        params.w_in.as_mut_slice().iter_mut().for_each(|w| *w *= scale);
        let mut w_max = params.w_in.as_slice().iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let mut fan_in = cfg.n_in;
        if let Some(w) = &params.w_rec {
            w_max = w.as_slice().iter().fold(w_max, |m, w| m.max(w.abs()));
            fan_in += cfg.n_hidden;
        }
        let bound = (fan_in as f64 * w_max + cfg.v_th) / (1.0 - cfg.alpha());
        let x = random_sample(5, 60, 0.6, 0, seed);
        for (v, _) in trajectory(&x, &params, &cfg) {
            prop_assert!(v.iter().all(|v| v.abs() <= bound), "{v:?} exceeds {bound}");
        }
    }

    #[test]
    fn masked_connections_are_inert(seed in 0u64..10_000, junk in -5.0f64..5.0, recurrent in any::<bool>()) {
        let (cfg, params) = random_net(5, 4, 3, recurrent, DelayMode::Synaptic, DelayMode::Synaptic, 0.5, seed);
        let mut poked = params.clone();
        for j in 0..cfg.n_hidden {
            for i in 0..cfg.n_in {
                if !params.mask_in.get(j, i) {
                    poked.w_in.set(j, i, junk);
                    if let DelayParams::Synaptic(d) = &mut poked.d_in {
                        d.set(j, i, junk.clamp(-4.0, 4.0));
                    }
                }
            }
        }
        let x = random_sample(5, 30, 0.4, 1, seed);
        prop_assert_eq!(
            forward_sample(&x, &params, &cfg).unwrap(),
            forward_sample(&x, &poked, &cfg).unwrap()
        );
        let (g, _) = sample_gradients(&x, &poked, &cfg, LearnerOptions::default()).unwrap();
        let d_in = g.get(Group::DIn);
        for (idx, (w, d)) in g.get(Group::WIn).iter().zip(d_in).enumerate() {
            if !params.mask_in.bits()[idx] {
                prop_assert_eq!(*w, 0.0);
                prop_assert_eq!(*d, 0.0);
            }
        }
    }

    #[test]
    fn delays_are_clamped_after_any_update(
        seed in 0u64..10_000,
        push in prop_oneof![Just(-1e9), Just(1e9), -1e3f64..1e3],
        adam in any::<bool>(),
        delay_in in prop_oneof![Just(DelayMode::Axonal), Just(DelayMode::Synaptic)],
    ) {
        let (cfg, mut params) = random_net(3, 3, 2, true, delay_in, DelayMode::Synaptic, 0.0, seed);
        let cfg = NetworkConfig { lr_d: 1.0, ..cfg };
        let mut grads = Gradients::zeros_like(&params);
        grads.get_mut(Group::DIn).fill(push);
        grads.get_mut(Group::DRec).fill(-push);
        let mut opt = Optimizer::new(if adam { OptimizerKind::Adam } else { OptimizerKind::Sgd });
        apply_updates(&mut params, &mut grads, &cfg, &Learnable::ALL, &mut opt).unwrap();
        let b = cfg.delay_bound();
        for &d in params.d_in.values().iter().chain(params.d_rec.values()) {
            prop_assert!((-b..=b).contains(&d));
            let eff = effective_delay(d, cfg.d_max).unwrap();
            prop_assert!(eff < cfg.d_max);
        }
    }

    #[test]
    fn trace_recursion_matches_unrolled_sums(
        steps in proptest::collection::vec((-1.0f64..1.0, 0.0f64..0.3), 1..100),
        alpha in 0.0f64..0.999,
        kappa in 0.0f64..=1.0,
    ) {
        let mut g = TraceGroup::zeros(1, 1);
        for (t, &(x, psi)) in steps.iter().enumerate() {
            weight_eligibility_step(&mut g, &Matrix::filled(1, 1, x), &[psi], alpha, kappa);
            let eps = |u: usize| -> f64 { (0..=u).map(|r| alpha.powi((u - r) as i32) * steps[r].0).sum() };
            let filt: f64 = (0..=t).map(|u| kappa.powi((t - u) as i32) * steps[u].1 * eps(u)).sum();
            prop_assert!((g.eps.get(0, 0) - eps(t)).abs() <= 1e-10 * (1.0 + eps(t).abs()));
            prop_assert!((g.filt.get(0, 0) - filt).abs() <= 1e-10 * (1.0 + filt.abs()));
        }
    }

    #[test]
    fn gradient_of_a_neuron_ignores_other_feedback_rows(
        seed in 0u64..10_000,
        j in 0usize..4,
        noise in -3.0f64..3.0,
    ) {
        let (cfg, params) = random_net(3, 4, 3, false, DelayMode::Synaptic, DelayMode::None, 0.0, seed);
        let x = random_sample(3, 30, 0.4, 2, seed);
        let mut other = params.clone();
        for k in (0..cfg.n_hidden).filter(|&k| k != j) {
            other.b_fb.row_mut(k).iter_mut().for_each(|b| *b += noise);
        }
        let (a, _) = sample_gradients(&x, &params, &cfg, LearnerOptions::default()).unwrap();
        let (b, _) = sample_gradients(&x, &other, &cfg, LearnerOptions::default()).unwrap();
        let row = j * cfg.n_in..(j + 1) * cfg.n_in;
        prop_assert_eq!(&a.get(Group::WIn)[row.clone()], &b.get(Group::WIn)[row.clone()]);
        prop_assert_eq!(&a.get(Group::DIn)[row.clone()], &b.get(Group::DIn)[row]);
        prop_assert_eq!(a.get(Group::WOut), b.get(Group::WOut));
    }

    #[test]
    fn axonal_gradient_is_the_sum_of_tied_synaptic_gradients(seed in 0u64..10_000, d in -3.5f64..3.5) {
        let (syn_cfg, mut syn) = random_net(1, 3, 2, false, DelayMode::Synaptic, DelayMode::None, 0.0, seed);
        syn.d_in.values_mut().fill(d);
        let ax_cfg = NetworkConfig { delay_in: DelayMode::Axonal, ..syn_cfg.clone() };
        let ax = NetworkParams { d_in: DelayParams::Axonal(vec![d]), ..syn.clone() };
        let x = random_sample(1, 40, 0.3, 1, seed);
        let (gs, os) = sample_gradients(&x, &syn, &syn_cfg, LearnerOptions::default()).unwrap();
        let (ga, oa) = sample_gradients(&x, &ax, &ax_cfg, LearnerOptions::default()).unwrap();
        prop_assert_eq!(os, oa);
        prop_assert_eq!(gs.get(Group::WIn), ga.get(Group::WIn));
        let summed: f64 = gs.get(Group::DIn).iter().sum();
        let axonal = ga.get(Group::DIn)[0];
        prop_assert!((summed - axonal).abs() <= 1e-12 * (1.0 + summed.abs()), "{summed} vs {axonal}");
    }
}

/// One hidden neuron whose readout favours the target class, fed by two
/// subthreshold inputs at `t1 < t2`.
fn two_input_neuron() -> (NetworkConfig, NetworkParams, DenseSample) {
    let cfg = NetworkConfig {
        n_in: 2,
        n_hidden: 1,
        n_out: 2,
        delay_in: DelayMode::Synaptic,
        d_max: 11,
        sigma: 2.0,
        ..Default::default()
    };
    let b = cfg.delay_bound();
    let params = NetworkParams {
        w_in: Matrix::from_vec(1, 2, vec![0.6, 0.6]),
        w_rec: None,
        w_out: Matrix::from_vec(2, 1, vec![-1.0, 1.0]),
        b_fb: Matrix::from_vec(1, 2, vec![-1.0, 1.0]),
        d_in: DelayParams::Synaptic(Matrix::filled(1, 2, -b)),
        d_rec: DelayParams::None,
        mask_in: Mask::full(1, 2),
        mask_rec: None,
    };
    let mut x = DenseSample::zeros(2, 20, 1);
    x.set(5, 0, true);
    x.set(8, 1, true);
    (cfg, params, x)
}

#[test]
fn delaying_the_early_input_is_rewarded() {
    let (cfg, params, x) = two_input_neuron();
    assert_eq!(raster(&x, &params, &cfg).as_slice().iter().sum::<f64>(), 0.0, "inputs must be subthreshold alone");
    let (online, _) = sample_gradients(&x, &params, &cfg, LearnerOptions::default()).unwrap();
    let oracle = bptt_grad(&x, &params, &cfg, SpikeMode::Binary);
    for g in [&online, &oracle] {
        assert!(g.get(Group::DIn)[0] < 0.0, "early-input delay gradient {:?}", g.get(Group::DIn));
    }

    // one descent step moves the early input closer to the late one and raises the peak potential
    let mut stepped = params.clone();
    stepped.d_in.values_mut()[0] += 2.0;
    let peak = |p: &NetworkParams| trajectory(&x, p, &cfg).iter().map(|(v, _)| v[0]).fold(f64::NEG_INFINITY, f64::max);
    assert!(peak(&stepped) > peak(&params));
}

#[test]
fn kernel_reads_keep_unit_mass_on_the_grid() {
    for sigma in [0.5, 1.0, 2.0, 3.0] {
        let cfg = NetworkConfig { sigma, d_max: 25, ..Default::default() };
        let k = snn_delay::kernel::SpikeKernel::new(sigma);
        let b = cfg.delay_bound();
        // shifts far enough from lag 0 that the causal cut does not bite
        for d in [-2.0, -0.3, 0.0, 0.5, 3.7] {
            let s = d + b;
            let mass: f64 = k.lags(s, cfg.history_len()).map(|lag| k.value(lag, s)).sum();
            assert!((mass - 1.0).abs() < 0.02, "sigma {sigma} shift {s}: mass {mass}");
        }
    }
}

#[test]
fn narrow_kernel_reproduces_binary_raster_on_isolated_spikes() {
    // at sigma = 1/sqrt(2 pi) the kernel peak is exactly 1 and each
    // neighbour receives under 5%, so well-separated spikes drive the
    // membrane almost exactly as binary frames do
    let sigma = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let k = snn_delay::kernel::SpikeKernel::new(sigma);
    assert!((k.value(3, 3.0) - 1.0).abs() < 1e-15);
    assert!(k.value(4, 3.0) < 0.05);

    let cfg = NetworkConfig {
        n_in: 2,
        n_hidden: 2,
        n_out: 2,
        delay_in: DelayMode::Synaptic,
        d_max: 7,
        sigma,
        ..Default::default()
    };
    let params = NetworkParams {
        w_in: Matrix::from_vec(2, 2, vec![1.5, 0.2, 0.3, 1.4]),
        w_rec: None,
        w_out: Matrix::filled(2, 2, 1.0),
        b_fb: Matrix::filled(2, 2, 1.0),
        d_in: DelayParams::Synaptic(Matrix::from_vec(2, 2, vec![-3.0, 0.0, 1.0, 2.0])),
        d_rec: DelayParams::None,
        mask_in: Mask::full(2, 2),
        mask_rec: None,
    };
    let mut x = DenseSample::zeros(2, 40, 0);
    for (t, ch) in [(2, 0), (9, 1), (17, 0), (24, 1), (31, 0)] {
        x.set(t, ch, true);
    }
    let binary = forward_sample(&x, &params, &cfg).unwrap().raster;
    let smooth = forward_sample_with(&x, &params, &cfg, &ForwardMode::smoothed(sigma, SpikeMode::Binary)).unwrap();
    assert!(binary.as_slice().iter().sum::<f64>() >= 5.0);
    assert_eq!(binary, smooth.raster);
}

#[test]
fn effective_delay_covers_the_clamp_range() {
    for d_max in [1usize, 3, 11, 25] {
        let b = delay_bound(d_max);
        assert_eq!(effective_delay(-b, d_max).unwrap(), 0);
        assert_eq!(effective_delay(b, d_max).unwrap(), d_max - 1);
    }
}

#[test]
fn trace_step_with_zero_decay_forgets_history() {
    let mut g = TraceGroup::zeros(1, 2);
    trace_step(&mut g, &Matrix::from_vec(1, 2, vec![1.0, 2.0]), &[1.0], 0.0, 0.0);
    trace_step(&mut g, &Matrix::from_vec(1, 2, vec![0.5, 0.0]), &[0.2], 0.0, 0.0);
    assert_eq!(g.eps.as_slice(), &[0.5, 0.0]);
    assert_eq!(g.filt.as_slice(), &[0.1, 0.0]);
}
