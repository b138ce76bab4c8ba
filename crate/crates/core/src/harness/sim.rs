//! The vehicular FL environment: one step runs one quantized FL round.
//!
//! Round pipeline: channel draw for every vehicle → selection → local
//! gradients → per-vehicle level decision → quantization → delays and reward
//! → aggregation → global loss and convergence check → mobility.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{SimConfig, TaskKind};
use crate::ddqn::{
    reward, ActionSpace, AgentState, DecisionContext, Environment, Experience, StateNormalizer, Transition,
};
use crate::error::{Error, Result};
use crate::fl::task::{accuracy, reference_optimum, sample_minibatch, subset_gradient, SyntheticTeacher};
use crate::fl::{
    aggregate, check_convergence, fed_round_time, global_loss, local_gradient, local_loss, min_convergence_rounds,
    total_time_estimate, BestTracker, ConvergenceModel, Dataset, LearningTask, LogisticRegression, ModelVector,
    RoundMetrics, TwoLayerNet,
};
use crate::mobility_channel::{
    advance, compute_time, distance_to_bs, residence_time, sample_channel_gain, snr, transmission_rate, upload_time,
    FadingModel, VehicleState,
};
use crate::quantizer::{payload_bits, qe_bound, quantize};
use crate::rng::{Phase, Purpose, SeedTree, SimRng};
use crate::scalar;
use crate::selection::{model_similarity, select, select_top, time_margin, update_round_time_avg, SelectionDecision};

/// Stream ids reserved for shared, vehicle-independent draws.
const TEACHER_STREAM: usize = 0xffff;
const TEST_SET_STREAM: usize = 0xfffe;
const MAX_VEHICLES: usize = 0xff00;

const BS: (f64, f64) = (0.0, 0.0);

/// Outcome of one finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub phase: Phase,
    pub episode: u64,
    pub rounds: u64,
    /// First round count at which the gap test held; the round budget if never.
    pub rounds_to_converge: u64,
    pub converged: bool,
    /// Held-out accuracy of the lowest-loss global model of the episode.
    pub test_acc: f64,
    pub mean_k: f64,
}

/// One participating vehicle's decision and delays within a round.
#[derive(Debug, Clone, Copy)]
struct Upload {
    vehicle: usize,
    state: AgentState<f64>,
    action: usize,
    q: u32,
    t_comp: f64,
    t_upload: f64,
    t_fed: f64,
    r_lambda: u64,
    qe: f64,
    reward: f64,
}

#[derive(Debug)]
struct EpisodeState {
    phase: Phase,
    episode: u64,
    t: u64,
    global: ModelVector<f64>,
    vehicles: Vec<VehicleState<f64>>,
    gamma_prev: Vec<f64>,
    q_prev: Vec<u32>,
    channel: Vec<SimRng>,
    quant: Vec<SimRng>,
    batch: Vec<SimRng>,
    durations: Vec<f64>,
    losses: Vec<f64>,
    best: BestTracker<f64>,
    first_converged: Option<u64>,
    k_sum: usize,
}

pub struct VecEnvironment {
    cfg: SimConfig,
    seeds: SeedTree,
    task: Box<dyn LearningTask<f64>>,
    datasets: Vec<Dataset<f64>>,
    test_set: Dataset<f64>,
    w0: ModelVector<f64>,
    optimum: ModelVector<f64>,
    optimum_loss: f64,
    conv: ConvergenceModel<f64>,
    actions: ActionSpace,
    fading: FadingModel,
    p: f64,
    t_g0: f64,
    speeds: Vec<f64>,
    current: Option<EpisodeState>,
    rows: Vec<RoundMetrics>,
    stats: Vec<EpisodeStats>,
}

impl std::fmt::Debug for VecEnvironment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VecEnvironment")
            .field("vehicles", &self.cfg.n)
            .field("param_dim", &self.w0.dim())
            .field("optimum_loss", &self.optimum_loss)
            .finish_non_exhaustive()
    }
}

fn initial_model(cfg: &SimConfig, task: &dyn LearningTask<f64>, rng: &mut SimRng) -> ModelVector<f64> {
    match cfg.task {
        TaskKind::Logistic => ModelVector::zeros(task.param_dim()),
        TaskKind::Mlp => {
            let (m, h) = (cfg.d_model, cfg.mlp_hidden);
            let in_w = Normal::new(0.0, 1.0 / (m as f64).sqrt()).expect("valid std");
            let out_w = Normal::new(0.0, 1.0 / (h as f64).sqrt()).expect("valid std");
            let mut w = Vec::with_capacity(task.param_dim());
            w.extend((0..h * m).map(|_| in_w.sample(rng)));
            w.extend(std::iter::repeat_n(0.0, h));
            w.extend((0..h).map(|_| out_w.sample(rng)));
            w.push(0.0);
            ModelVector::new(w).expect("finite initialization")
        }
    }
}

impl VecEnvironment {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.n > MAX_VEHICLES {
            return Err(Error::config("N", format!("at most {MAX_VEHICLES} vehicles are supported")));
        }
        let seeds = SeedTree::new(cfg.seed);
        let fading = cfg.fading();
        fading.validate()?;

        let teacher = SyntheticTeacher::draw(
            cfg.d_model,
            cfg.label_noise,
            &mut seeds.stream(Purpose::Data, Phase::Setup, TEACHER_STREAM, 0),
        );
        let datasets: Vec<Dataset<f64>> = (0..cfg.n)
            .map(|v| teacher.dataset(cfg.samples_per_vehicle, &mut seeds.stream(Purpose::Data, Phase::Setup, v, 0)))
            .collect();
        let test_set =
            teacher.dataset(cfg.test_samples, &mut seeds.stream(Purpose::Data, Phase::Setup, TEST_SET_STREAM, 0));

        let task: Box<dyn LearningTask<f64>> = match cfg.task {
            TaskKind::Logistic => Box::new(LogisticRegression { dim: cfg.d_model, reg: cfg.l2_reg }),
            TaskKind::Mlp => Box::new(TwoLayerNet { inputs: cfg.d_model, hidden: cfg.mlp_hidden, reg: cfg.l2_reg }),
        };
        let w0 = initial_model(cfg, task.as_ref(), &mut seeds.stream(Purpose::Init, Phase::Setup, TEACHER_STREAM, 0));

        let pooled = Dataset::concat(&datasets)?;
        let mu = cfg.mu.unwrap_or(cfg.l2_reg);
        let smoothness = cfg.smoothness.unwrap_or_else(|| task.smoothness_estimate(&pooled)).max(mu);
        let (w_star, optimum_loss) =
            reference_optimum(task.as_ref(), &pooled, w0.as_slice(), smoothness, cfg.reference_iters);
        let optimum = ModelVector::new(w_star)?;
        let init_gap_sq = if cfg.track_init_gap { w0.distance_sq(&optimum) } else { cfg.init_gap_sq };
        let conv = ConvergenceModel {
            smoothness,
            strong_convexity: mu,
            heterogeneity: cfg.heterogeneity,
            lambda: cfg.lambda,
            init_gap_sq,
        };
        conv.validate()?;

        let speeds = (0..cfg.n)
            .map(|v| {
                let u: f64 = seeds.stream(Purpose::Mobility, Phase::Setup, v, 0).random();
                cfg.v_mean * (1.0 + cfg.v_spread * (2.0 * u - 1.0))
            })
            .collect();

        let p = cfg.p_watts();
        let t_g0 = match cfg.t_g0 {
            Some(t) => t,
            None => {
                let mid = ((cfg.r_b / 2.0).powi(2) + cfg.h * cfg.h).sqrt();
                let gamma = snr(p, fading.expected_gain(), mid, cfg.alpha, cfg.sigma2)?;
                let rate = transmission_rate(cfg.bandwidth, cfg.subcarriers, gamma);
                compute_time(cfg.c, cfg.f) + upload_time(payload_bits(6, cfg.d), rate)?
            }
        };
        log::info!(
            "environment: L = {smoothness:.4}, mu = {mu:.4}, F* = {optimum_loss:.6}, T_g0 = {t_g0:.3} s, {} vehicles",
            cfg.n
        );

        Ok(Self {
            cfg: cfg.clone(),
            seeds,
            task,
            datasets,
            test_set,
            w0,
            optimum,
            optimum_loss,
            conv,
            actions: cfg.actions(),
            fading,
            p,
            t_g0,
            speeds,
            current: None,
            rows: vec![],
            stats: vec![],
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn convergence_model(&self) -> &ConvergenceModel<f64> {
        &self.conv
    }

    /// Loss of the reference optimum over all vehicles' data.
    pub fn optimum_loss(&self) -> f64 {
        self.optimum_loss
    }

    pub fn optimum(&self) -> &ModelVector<f64> {
        &self.optimum
    }

    pub fn initial_model(&self) -> &ModelVector<f64> {
        &self.w0
    }

    pub fn bootstrap_round_time(&self) -> f64 {
        self.t_g0
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    /// Largest log10 SNR: vehicle abeam of the base station with a 3σ fading peak.
    pub fn snr_log10_max(&self) -> f64 {
        self.cfg.snr_log10_max.unwrap_or_else(|| {
            let h = (self.fading.mean.abs() + 3.0 * self.fading.std).powi(2).max(self.fading.floor);
            let peak = self.p * h * self.cfg.h.powf(-self.cfg.alpha) / self.cfg.sigma2;
            (1.0 + peak).log10().max(f64::MIN_POSITIVE)
        })
    }

    pub fn normalizer(&self) -> StateNormalizer<f64> {
        StateNormalizer::new(self.snr_log10_max(), self.cfg.r_b, self.cfg.h, &self.actions)
    }

    /// Reward of a typical decision: level 6, half the fleet participating,
    /// the bootstrap round time and the full-data gradient at the initial model.
    pub fn reference_reward(&self) -> f64 {
        let pooled = Dataset::concat(&self.datasets).expect("datasets share a dimension");
        let all: Vec<usize> = (0..pooled.len()).collect();
        let g = subset_gradient(self.task.as_ref(), self.w0.as_slice(), &pooled, &all);
        let k = self.cfg.n.div_ceil(2);
        let r = min_convergence_rounds(&self.conv, 6, k, self.cfg.d);
        let qe = qe_bound(scalar::norm_sq(&g), 6, self.cfg.d);
        reward(self.cfg.w1, self.cfg.w2(), r, self.t_g0, qe)
    }

    /// Rows of every testing round so far.
    pub fn rows(&self) -> &[RoundMetrics] {
        &self.rows
    }

    pub fn take_rows(&mut self) -> Vec<RoundMetrics> {
        std::mem::take(&mut self.rows)
    }

    /// Closes the running episode, if any, and returns all episode statistics.
    pub fn take_stats(&mut self) -> Vec<EpisodeStats> {
        self.close_episode();
        std::mem::take(&mut self.stats)
    }

    fn close_episode(&mut self) {
        let Some(st) = self.current.take() else { return };
        let test_acc =
            st.best.best().map_or(f64::NAN, |b| accuracy(self.task.as_ref(), b.model.as_slice(), &self.test_set));
        self.stats.push(EpisodeStats {
            phase: st.phase,
            episode: st.episode,
            rounds: st.t,
            rounds_to_converge: st.first_converged.unwrap_or(st.t),
            converged: st.first_converged.is_some(),
            test_acc,
            mean_k: if st.t == 0 { 0.0 } else { st.k_sum as f64 / st.t as f64 },
        });
    }

    fn vehicle_gamma(&self, s: &VehicleState<f64>, h: f64) -> Result<(f64, f64)> {
        let d = distance_to_bs(s, BS)?;
        Ok((d, snr(s.p, h, d, self.cfg.alpha, self.cfg.sigma2)?))
    }
}

impl Environment<f64> for VecEnvironment {
    fn vehicles(&self) -> usize {
        self.cfg.n
    }

    fn reset(&mut self, phase: Phase, episode: u64) -> Result<()> {
        self.close_episode();
        let n = self.cfg.n;
        let stream =
            |purpose| -> Vec<SimRng> { (0..n).map(|v| self.seeds.stream(purpose, phase, v, episode)).collect() };
        let mut channel = stream(Purpose::Channel);
        let mut init = stream(Purpose::Init);
        let vehicles: Vec<VehicleState<f64>> = (0..n)
            .map(|v| VehicleState {
                id: v,
                x: -self.cfg.r_b,
                y: self.cfg.h,
                v: self.speeds[v],
                f: self.cfg.f,
                p: self.p,
                local_model: self.w0.as_slice().to_vec(),
                dataset: v,
                reentered: false,
            })
            .collect();
        let mut gamma_prev = Vec::with_capacity(n);
        for (v, s) in vehicles.iter().enumerate() {
            let h = sample_channel_gain(&self.fading, &mut channel[v]);
            gamma_prev.push(self.vehicle_gamma(s, h).map_err(|e| e.in_round(0, v))?.1);
        }
        let q_prev = init.iter_mut().map(|r| self.actions.level(r.random_range(0..self.actions.len()))).collect();
        self.current = Some(EpisodeState {
            phase,
            episode,
            t: 0,
            global: self.w0.clone(),
            vehicles,
            gamma_prev,
            q_prev,
            channel,
            quant: stream(Purpose::Quantizer),
            batch: stream(Purpose::Minibatch),
            durations: vec![],
            losses: vec![],
            best: BestTracker::new(),
            first_converged: None,
            k_sum: 0,
        });
        Ok(())
    }

    fn step(&mut self, decide: &mut dyn FnMut(&DecisionContext<'_, f64>) -> usize) -> Result<Vec<Transition<f64>>> {
        let mut st = self.current.take().ok_or_else(|| Error::Validation("step called before reset".into()))?;
        let result = self.run_round(&mut st, decide);
        self.current = Some(st);
        result
    }
}

impl VecEnvironment {
    fn run_round(
        &mut self,
        st: &mut EpisodeState,
        decide: &mut dyn FnMut(&DecisionContext<'_, f64>) -> usize,
    ) -> Result<Vec<Transition<f64>>> {
        let cfg = &self.cfg;
        let round = st.episode * cfg.steps + st.t;
        let n = cfg.n;

        let mut dist = Vec::with_capacity(n);
        let mut gamma_now = Vec::with_capacity(n);
        for v in 0..n {
            let h = sample_channel_gain(&self.fading, &mut st.channel[v]);
            let (d, g) = self.vehicle_gamma(&st.vehicles[v], h).map_err(|e| e.in_round(round, v))?;
            dist.push(d);
            gamma_now.push(g);
        }

        let t_g = update_round_time_avg(&st.durations, self.t_g0);
        let mut candidates = Vec::with_capacity(n);
        for (v, s) in st.vehicles.iter().enumerate() {
            let alpha = model_similarity(&s.local_model, st.global.as_slice());
            let t_res = residence_time(s.x, s.v, cfg.r_b).map_err(|e| e.in_round(round, v))?;
            candidates.push(SelectionDecision::new(v, alpha, time_margin(t_res, t_g)));
        }
        let selected = match cfg.participants {
            Some(k) => select_top(&mut candidates, k),
            None => select(&mut candidates, cfg.phi_star),
        };
        let k = selected.len();
        let r_lambda_k = |q: u32| min_convergence_rounds(&self.conv, q, k, cfg.d);

        let mut quantized = Vec::with_capacity(k);
        let mut losses = Vec::with_capacity(k);
        let mut pending = Vec::with_capacity(k);
        for &v in &selected {
            let ctx_err = |e: Error| e.in_round(round, v);
            let data = &self.datasets[st.vehicles[v].dataset];
            let batch = sample_minibatch(data.len(), cfg.batch_size, &mut st.batch[v]);
            let g = local_gradient(self.task.as_ref(), &st.global, data, &batch).map_err(ctx_err)?;
            let loss = local_loss(self.task.as_ref(), &st.global, data).map_err(ctx_err)?;
            st.vehicles[v].local_model =
                st.global.as_slice().iter().zip(g.values()).map(|(&w, &gj)| w - cfg.eta * gj).collect();

            let state = AgentState { gamma_prev: st.gamma_prev[v], d_now: dist[v], q_now: st.q_prev[v] };
            let action = decide(&DecisionContext { vehicle: v, state, loss_history: &st.losses });
            if action >= self.actions.len() {
                return Err(ctx_err(Error::Validation(format!("action index {action} out of range"))));
            }
            let q = self.actions.level(action);
            let encoded = quantize(&g, q, &mut st.quant[v]).map_err(ctx_err)?;

            let t_comp = compute_time(cfg.c, st.vehicles[v].f);
            let bits = payload_bits(q, cfg.d);
            let rate = transmission_rate(cfg.bandwidth, cfg.subcarriers, gamma_now[v]);
            let t_upload = match upload_time(bits, rate) {
                Ok(t) => t,
                Err(Error::InfiniteDelay) => {
                    log::warn!("round {round}: vehicle {v} has zero rate and is dropped");
                    continue;
                }
                Err(e) => return Err(ctx_err(e)),
            };
            let t_fed = fed_round_time(t_comp, t_upload);
            let r_lambda = r_lambda_k(q);
            let qe = qe_bound(g.norm_sq(), q, cfg.d);
            quantized.push(encoded);
            losses.push(loss);
            pending.push(Upload {
                vehicle: v,
                state,
                action,
                q,
                t_comp,
                t_upload,
                t_fed,
                r_lambda,
                qe,
                reward: reward(cfg.w1, cfg.w2(), r_lambda, t_fed, qe),
            });
        }

        if !quantized.is_empty() {
            let next = aggregate(&st.global, &quantized, cfg.eta).map_err(|e| e.in_round(round, selected[0]))?;
            let f_global = global_loss(&losses)?;
            st.best.observe(st.t as usize, &st.global, f_global);
            let converged = check_convergence(f_global, self.optimum_loss, cfg.lambda);
            if converged && st.first_converged.is_none() {
                st.first_converged = Some(st.t + 1);
            }
            st.losses.push(f_global);
            st.global = next;
            if st.phase == Phase::Test {
                for u in &pending {
                    self.rows.push(RoundMetrics {
                        round,
                        vehicle: u.vehicle,
                        k,
                        q: u.q,
                        t_comp: u.t_comp,
                        t_upload: u.t_upload,
                        t_fed: u.t_fed,
                        r_lambda: u.r_lambda,
                        t_total: total_time_estimate(u.r_lambda, u.t_fed),
                        qe: u.qe,
                        f_global,
                        f_best: self.optimum_loss,
                        converged,
                    });
                }
            }
        }

        let duration = pending.iter().map(|u| u.t_fed).fold(0.0, f64::max);
        let duration = if pending.is_empty() { cfg.step_duration } else { duration };
        st.durations.push(duration);
        let dt = duration.min(cfg.step_duration);
        for s in st.vehicles.iter_mut() {
            *s = advance(s, dt, cfg.r_b);
        }

        let mut transitions = Vec::with_capacity(pending.len());
        for u in &pending {
            let v = u.vehicle;
            let d_next = distance_to_bs(&st.vehicles[v], BS).map_err(|e| e.in_round(round, v))?;
            let next_state = AgentState { gamma_prev: gamma_now[v], d_now: d_next, q_now: u.q };
            let experience = Experience { state: u.state, action: u.action, reward: u.reward, next_state };
            transitions.push(Transition { vehicle: v, experience });
            st.q_prev[v] = u.q;
        }
        st.gamma_prev = gamma_now;
        st.k_sum += k;
        st.t += 1;
        Ok(transitions)
    }
}
