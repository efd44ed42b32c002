//! One scheme at one velocity: channel trajectories, estimation,
//! prediction, and the rate/NMSE accumulators.

use std::collections::BTreeMap;

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{init_taps, Band, ChannelStats, OfdmOperator, SubcarrierPlan, TapState};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::frames::{
    build_schedule, validate_schedule, Duplex, FrameParams, FrameSchedule, Predictor, Scheme, UlActivity,
};
use crate::harness::report::{Class, Metric, RateReport, Record};
use crate::math::{cn, qam16, CMat, C64};
use crate::phylink::{
    dl_rate_closed, frame_average, ul_rate_closed, zf_gains_rows, DlMoments, SymbolRates, UlMoments, MIN_MC_TRIALS,
};
use crate::pilot::PilotBook;
use crate::prediction::{ddwp_weights, wp_weights, DdWpWeights, DlVarianceMap, LsRecovery, SiProfile, WpWeights};

/// How much of the pipeline a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Depth {
    /// Closed-form rates only. Decision-directed schemes still draw data
    /// symbols per trial because their weights depend on them.
    ClosedForm,
    /// Also simulate channels and predictors for NMSE.
    Predictors,
    /// Also the Monte Carlo lower-bound rates.
    Full,
}

/// Trials per deterministic work unit.
const CHUNK: usize = 10;
/// Work units evaluated in parallel before merging.
const BATCH: usize = 8;

#[derive(Debug, Clone, Copy)]
struct SymbolEnv {
    p_dl: f64,
    p_ul: f64,
    /// Residual SI at the BS while receiving on this symbol.
    bs_si: f64,
    /// Residual SI at a terminal while receiving on this symbol.
    mt_si: f64,
}

/// Residual SI ratios `(ξ_BS, ξ_MT)` for a scheme; IBFD loses the configured penalty.
pub fn effective_sic(cfg: &SystemConfig, scheme: Scheme) -> (f64, f64) {
    let penalty = if scheme.duplex() == Duplex::Ibfd {
        cfg.ibfd_sic_penalty_db
    } else {
        0.0
    };
    (
        crate::math::db_to_linear(penalty - cfg.sic_bs_db),
        crate::math::db_to_linear(penalty - cfg.sic_mt_db),
    )
}

/// Everything about a (scheme, velocity) run that does not depend on the trial.
pub struct Simulation {
    cfg: SystemConfig,
    velocity_kmh: f64,
    schedule: FrameSchedule,
    stats: ChannelStats,
    op: OfdmOperator,
    plan: SubcarrierPlan,
    alpha: f64,
    env: Vec<SymbolEnv>,
    books: BTreeMap<Band, PilotBook>,
    recoveries: BTreeMap<Band, LsRecovery>,
    dl_maps: BTreeMap<(Band, Band), DlVarianceMap>,
    /// Per symbol, per user: the weights behind WP and hold directives.
    wp: Vec<Vec<WpWeights>>,
    /// Per symbol, per user: MMSE gain of the held estimate.
    hold_gain: Vec<Vec<f64>>,
}

fn incompatible(scheme: Scheme, reason: impl Into<String>) -> Error {
    Error::Incompatible {
        scheme: scheme.to_string(),
        reason: reason.into(),
    }
}

impl Simulation {
    pub fn new(cfg: &SystemConfig, scheme: Scheme, velocity_kmh: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let schedule = build_schedule(scheme, cfg.frame_length, &FrameParams::from(cfg))?;
        let violations = validate_schedule(&schedule);
        if !violations.is_empty() {
            let msg = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
            return Err(incompatible(scheme, msg));
        }
        let stats = cfg.stats(seed)?;
        let op = cfg.ofdm()?;
        let plan = cfg.plan()?;
        let alpha = cfg.fading(velocity_kmh)?.alpha();
        let (xi_bs, xi_mt) = effective_sic(cfg, scheme);
        let (p_dl_total, p_ul_total, noise) = (cfg.dl_power_w(), cfg.ul_power_w(), cfg.noise_w());

        let env: Vec<SymbolEnv> = schedule
            .symbols
            .iter()
            .map(|s| {
                let both = s.dl.is_some() && s.ul.is_active();
                SymbolEnv {
                    p_dl: s.dl.map_or(0.0, |b| p_dl_total / plan.band(b).len() as f64),
                    p_ul: s.ul.band().map_or(0.0, |b| p_ul_total / plan.band(b).len() as f64),
                    bs_si: if both { xi_bs * p_dl_total } else { 0.0 },
                    mt_si: if both { xi_mt * p_ul_total } else { 0.0 },
                }
            })
            .collect();

        let mut books = BTreeMap::new();
        for s in &schedule.symbols {
            if let UlActivity::Pilot(b) = s.ul {
                if let std::collections::btree_map::Entry::Vacant(e) = books.entry(b) {
                    e.insert(PilotBook::on_subcarriers(cfg.users, plan.band(b), &op)?);
                }
            }
        }

        let users = cfg.users;
        let t_len = schedule.frame_length;
        let mut wp = vec![Vec::new(); t_len];
        let mut hold_gain = vec![Vec::new(); t_len];
        let mut recoveries = BTreeMap::new();
        let mut dl_maps = BTreeMap::new();
        for s in &schedule.symbols {
            let i = s.index;
            match &s.predictor {
                Predictor::None => {}
                Predictor::Wp { observations } | Predictor::DdWp { observations } if observations.is_empty() => {
                    return Err(incompatible(scheme, format!("symbol {i} has no observations")));
                }
                Predictor::Wp { .. } | Predictor::Hold { .. } => {
                    let obs = s.predictor.observations();
                    let band = common_band(&schedule, &obs).ok_or_else(|| {
                        incompatible(
                            scheme,
                            format!("pilots observed at symbol {i} use different subcarriers"),
                        )
                    })?;
                    let book = &books[&band];
                    let model = book.observation_model(env[obs[0] - 1].p_ul, noise);
                    let ages: Vec<usize> = obs.iter().map(|&t| i - t).collect();
                    let si = SiProfile(obs.iter().map(|&t| env[t - 1].bs_si).collect());
                    let weights = (0..users)
                        .map(|d| wp_weights(&stats, d, alpha, &ages, &si, &model))
                        .collect::<Result<Vec<_>>>()?;
                    if let Predictor::Hold { pilot } = s.predictor {
                        hold_gain[i - 1] = (0..users)
                            .map(|d| model.mmse_gain(stats.tap_variance(d), env[pilot - 1].bs_si))
                            .collect();
                    }
                    wp[i - 1] = weights;
                }
                Predictor::DdWp { observations } => {
                    let band = common_band(&schedule, observations).ok_or_else(|| {
                        incompatible(
                            scheme,
                            format!("uplink symbols observed at {i} use different subcarriers"),
                        )
                    })?;
                    if observations
                        .iter()
                        .any(|&t| env[t - 1].p_ul != env[observations[0] - 1].p_ul)
                    {
                        return Err(incompatible(
                            scheme,
                            format!("uplink power varies across observations of {i}"),
                        ));
                    }
                    if !recoveries.contains_key(&band) {
                        recoveries.insert(band, LsRecovery::new(&op, plan.band(band))?);
                    }
                    if let Some(dl) = s.dl {
                        if !dl_maps.contains_key(&(dl, band)) {
                            let map = DlVarianceMap::new(&recoveries[&band], &op, plan.band(dl));
                            dl_maps.insert((dl, band), map);
                        }
                    }
                    if let UlActivity::Data(b) = s.ul {
                        if b != band {
                            return Err(incompatible(scheme, format!("symbol {i} predicts {b} from {band}")));
                        }
                    }
                }
            }
        }
        debug!("{scheme} at {velocity_kmh} km/h: alpha = {alpha}");
        Ok(Self {
            cfg: cfg.clone(),
            velocity_kmh,
            schedule,
            stats,
            op,
            plan,
            alpha,
            env,
            books,
            recoveries,
            dl_maps,
            wp,
            hold_gain,
        })
    }

    pub fn schedule(&self) -> &FrameSchedule {
        &self.schedule
    }

    pub fn stats(&self) -> &ChannelStats {
        &self.stats
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn users(&self) -> usize {
        self.cfg.users
    }

    fn m_sum(&self) -> usize {
        self.cfg.subcarriers
    }

    fn other_rh(&self, d: usize) -> f64 {
        (0..self.users()).filter(|&k| k != d).map(|k| self.stats.rh(k)).sum()
    }

    /// Closed-form downlink rate of user `d` at symbol `i` (1-based) for a
    /// pilot-driven predictor, summed over the band and divided by `M_sum`.
    fn wp_dl_closed(&self, i: usize, d: usize) -> f64 {
        let s = self.schedule.symbol(i);
        let env = self.env[i - 1];
        let w = &self.wp[i - 1][d];
        let band = self.plan.band(s.dl.expect("downlink symbol"));
        let rh = self.stats.rh(d);
        let total: f64 = band
            .iter()
            .map(|&m| {
                let sh = w.predicted_variance(&self.op, m);
                dl_rate_closed(
                    sh,
                    rh,
                    self.cfg.antennas,
                    self.users(),
                    env.p_dl,
                    env.mt_si,
                    self.cfg.noise_w(),
                )
            })
            .sum();
        total / self.m_sum() as f64
    }

    /// Run all trials and assemble the report.
    pub fn run(&self, trials: usize, seed: u64, depth: Depth) -> Result<RateReport> {
        if trials == 0 {
            return Err(crate::error::invalid("trials", "must be at least 1"));
        }
        let needs_trials = depth > Depth::ClosedForm || self.schedule.scheme.has_uplink_data();
        let mut acc = Acc::new(self.schedule.frame_length, self.users(), self.m_sum());
        if needs_trials {
            let chunks: Vec<(usize, usize)> = (0..trials)
                .step_by(CHUNK)
                .map(|s| (s, (s + CHUNK).min(trials)))
                .collect();
            for batch in chunks.chunks(BATCH) {
                let parts: Vec<Result<Acc>> = batch
                    .par_iter()
                    .map(|&(a, b)| {
                        let mut local = Acc::new(self.schedule.frame_length, self.users(), self.m_sum());
                        for t in a..b {
                            self.trial(t as u64, seed, depth, &mut local)?;
                        }
                        Ok(local)
                    })
                    .collect();
                for p in parts {
                    acc.merge(&p?);
                }
            }
        }
        self.report(&acc, trials, seed, depth)
    }

    fn trial(&self, trial: u64, seed: u64, depth: Depth, acc: &mut Acc) -> Result<()> {
        let mut ch_rng = ChaCha8Rng::seed_from_u64(seed);
        ch_rng.set_stream(2 * trial);
        let mut sym_rng = ChaCha8Rng::seed_from_u64(seed);
        sym_rng.set_stream(2 * trial + 1);

        let t_len = self.schedule.frame_length;
        let (n_ant, users, l) = (self.cfg.antennas, self.users(), self.cfg.taps);
        let noise = self.cfg.noise_w();

        // Uplink data symbols, user-major per symbol: x[d * K + k].
        let data: Vec<Vec<C64>> = self
            .schedule
            .symbols
            .iter()
            .map(|s| match s.ul {
                UlActivity::Data(b) => (0..users * self.plan.band(b).len())
                    .map(|_| qam16(&mut sym_rng))
                    .collect(),
                _ => Vec::new(),
            })
            .collect();

        let simulate = depth >= Depth::Predictors;
        let mut taps: Vec<TapState> = Vec::new();
        let mut freq: Vec<Option<CMat>> = vec![None; t_len];
        let mut received: Vec<Vec<C64>> = vec![Vec::new(); t_len];
        let mut projected: Vec<Vec<C64>> = vec![Vec::new(); t_len];
        if simulate {
            let mut state = init_taps(&self.stats, n_ant, &mut ch_rng)?;
            for t in 1..=t_len {
                if t > 1 {
                    state.evolve_in_place(self.alpha, &self.stats, &mut ch_rng);
                }
                taps.push(state.clone());
            }
            for (k, s) in self.schedule.symbols.iter().enumerate() {
                let needs_freq = s.ul.is_active() || (depth == Depth::Full && s.dl.is_some());
                if needs_freq {
                    freq[k] = Some(self.op.frequency_response(&taps[k]));
                }
            }
            // Received uplink samples, antenna-major: r[n * K + k].
            for (idx, s) in self.schedule.symbols.iter().enumerate() {
                let Some(band) = s.ul.band() else { continue };
                let sc = self.plan.band(band);
                let kk = sc.len();
                let h = freq[idx].as_ref().expect("uplink response");
                let amp = self.env[idx].p_ul.sqrt();
                let var = noise + self.env[idx].bs_si;
                let mut r = vec![C64::new(0.0, 0.0); n_ant * kk];
                for n in 0..n_ant {
                    for (k, &m) in sc.iter().enumerate() {
                        let mut acc_s = C64::new(0.0, 0.0);
                        for d in 0..users {
                            let x = match s.ul {
                                UlActivity::Pilot(_) => self.books[&band].sequence(d)[k],
                                _ => data[idx][d * kk + k],
                            };
                            acc_s += x * h[(m, n * users + d)];
                        }
                        r[n * kk + k] = acc_s * amp + cn(&mut ch_rng, var);
                    }
                }
                if let UlActivity::Pilot(_) = s.ul {
                    let book = &self.books[&band];
                    let mut y = vec![C64::new(0.0, 0.0); n_ant * users * l];
                    for n in 0..n_ant {
                        let rn = &r[n * kk..(n + 1) * kk];
                        for d in 0..users {
                            let p = book.projection(d);
                            for t in 0..l {
                                let mut a = C64::new(0.0, 0.0);
                                for k in 0..kk {
                                    a += p[(k, t)].conj() * rn[k];
                                }
                                y[(n * users + d) * l + t] = a;
                            }
                        }
                    }
                    projected[idx] = y;
                }
                received[idx] = r;
            }
        }

        for s in &self.schedule.symbols {
            let i = s.index;
            let idx = i - 1;
            let env = self.env[idx];
            // Predicted taps, (n * D + d) * L + t.
            let mut g_hat: Vec<C64> = Vec::new();
            let mut ul_hat: Vec<C64> = Vec::new();
            match &s.predictor {
                Predictor::None => continue,
                Predictor::Wp { observations } => {
                    if simulate {
                        g_hat = vec![C64::new(0.0, 0.0); n_ant * users * l];
                        for n in 0..n_ant {
                            for d in 0..users {
                                let v = &self.wp[idx][d].v;
                                let out = &mut g_hat[(n * users + d) * l..(n * users + d + 1) * l];
                                for (q, &t) in observations.iter().enumerate() {
                                    let y = &projected[t - 1][(n * users + d) * l..(n * users + d + 1) * l];
                                    for (r, o) in out.iter_mut().enumerate() {
                                        for (c, yv) in y.iter().enumerate() {
                                            *o += v[(r, q * l + c)] * yv;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                Predictor::Hold { pilot } => {
                    if simulate {
                        let y = &projected[pilot - 1];
                        g_hat = (0..n_ant * users * l)
                            .map(|j| y[j] * self.hold_gain[idx][(j / l) % users])
                            .collect();
                    }
                }
                Predictor::DdWp { observations } => {
                    let band = self
                        .schedule
                        .symbol(observations[0])
                        .ul
                        .band()
                        .expect("uplink observation");
                    let sc = self.plan.band(band);
                    let kk = sc.len();
                    let ages: Vec<usize> = observations.iter().map(|&t| i - t).collect();
                    let si = SiProfile(observations.iter().map(|&t| self.env[t - 1].bs_si).collect());
                    let p_obs = self.env[observations[0] - 1].p_ul;
                    let mut theta = vec![0.0; users * kk];
                    if simulate {
                        ul_hat = vec![C64::new(0.0, 0.0); n_ant * users * kk];
                    }
                    for k in 0..kk {
                        let sym = CMat::from_fn(observations.len(), users, |q, d| {
                            let t = observations[q];
                            match self.schedule.symbol(t).ul {
                                UlActivity::Pilot(_) => self.books[&band].sequence(d)[k],
                                _ => data[t - 1][d * kk + k],
                            }
                        });
                        let w: DdWpWeights = ddwp_weights(&self.stats, self.alpha, &ages, &sym, &si, p_obs, noise)?;
                        for d in 0..users {
                            theta[d * kk + k] = w.theta[(d, d)].re;
                        }
                        if simulate {
                            for n in 0..n_ant {
                                for d in 0..users {
                                    let mut a = C64::new(0.0, 0.0);
                                    for (q, &t) in observations.iter().enumerate() {
                                        a += w.v[(d, q)] * received[t - 1][n * kk + k];
                                    }
                                    ul_hat[(n * users + d) * kk + k] = a;
                                }
                            }
                        }
                    }
                    // Closed-form rates for this trial's symbol draw.
                    if let Some(dl) = s.dl {
                        let map = &self.dl_maps[&(dl, band)];
                        for d in 0..users {
                            let rh = self.stats.rh(d);
                            let th = &theta[d * kk..(d + 1) * kk];
                            let total: f64 = (0..map.dl_len())
                                .map(|r| {
                                    let sh = map.predicted_variance(r, th, rh);
                                    dl_rate_closed(sh, rh, n_ant, users, env.p_dl, env.mt_si, noise)
                                })
                                .sum();
                            acc.dd_dl[idx * users + d] += total / self.m_sum() as f64;
                        }
                    }
                    if matches!(s.ul, UlActivity::Data(_)) {
                        for d in 0..users {
                            let other = self.other_rh(d);
                            let total: f64 = (0..kk)
                                .map(|k| ul_rate_closed(theta[d * kk + k], other, n_ant, env.p_ul, env.bs_si, noise))
                                .sum();
                            acc.dd_ul[idx * users + d] += total / self.m_sum() as f64;
                        }
                    }
                    acc.dd_count[idx] += 1;
                    if simulate {
                        let rec = &self.recoveries[&band];
                        let j = rec.matrix();
                        g_hat = vec![C64::new(0.0, 0.0); n_ant * users * l];
                        for nd in 0..n_ant * users {
                            let hu = &ul_hat[nd * kk..(nd + 1) * kk];
                            for t in 0..l {
                                let mut a = C64::new(0.0, 0.0);
                                for k in 0..kk {
                                    a += j[(t, k)] * hu[k];
                                }
                                g_hat[nd * l + t] = a;
                            }
                        }
                        if depth == Depth::Full && matches!(s.ul, UlActivity::Data(_)) {
                            for d in 0..users {
                                for (k, &m) in sc.iter().enumerate() {
                                    let norm2: f64 =
                                        (0..n_ant).map(|n| ul_hat[(n * users + d) * kk + k].norm_sqr()).sum();
                                    acc.ul[(idx * users + d) * self.m_sum() + m].push(norm2);
                                }
                            }
                        }
                    }
                }
            }
            if !simulate {
                continue;
            }
            // Prediction error of the taps.
            let truth = &taps[idx];
            for d in 0..users {
                let mut err = 0.0;
                let mut refp = 0.0;
                for n in 0..n_ant {
                    let g = truth.taps(n, d);
                    let gh = &g_hat[(n * users + d) * l..(n * users + d + 1) * l];
                    for t in 0..l {
                        err += (g[t] - gh[t]).norm_sqr();
                        refp += g[t].norm_sqr();
                    }
                }
                acc.nmse_err[idx * users + d] += err;
                acc.nmse_ref[idx * users + d] += refp;
            }
            if depth == Depth::Full {
                if let Some(dl) = s.dl {
                    let g_mat = CMat::from_column_slice(l, n_ant * users, &g_hat);
                    let h_hat_all = self.op.f_psi() * g_mat;
                    let h_all = freq[idx].as_ref().expect("downlink response");
                    let mut h_true = vec![C64::new(0.0, 0.0); users * n_ant];
                    let mut h_hat = vec![C64::new(0.0, 0.0); users * n_ant];
                    let mut omega = vec![C64::new(0.0, 0.0); users * users];
                    for &m in self.plan.band(dl) {
                        for c in 0..n_ant * users {
                            let (n, d) = (c / users, c % users);
                            h_true[d * n_ant + n] = h_all[(m, c)].conj();
                            h_hat[d * n_ant + n] = h_hat_all[(m, c)].conj();
                        }
                        if zf_gains_rows(&h_true, &h_hat, users, n_ant, &mut omega) {
                            for d in 0..users {
                                let row = &omega[d * users..(d + 1) * users];
                                let leak: f64 = row
                                    .iter()
                                    .enumerate()
                                    .filter(|&(k, _)| k != d)
                                    .map(|(_, w)| w.norm_sqr())
                                    .sum();
                                acc.dl[(idx * users + d) * self.m_sum() + m].push(row[d], leak);
                            }
                        } else {
                            acc.discarded += 1;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn report(&self, acc: &Acc, trials: usize, seed: u64, depth: Depth) -> Result<RateReport> {
        let users = self.users();
        let m_sum = self.m_sum();
        let noise = self.cfg.noise_w();
        let mc_enabled = depth == Depth::Full && trials >= MIN_MC_TRIALS;
        if depth == Depth::Full && !mc_enabled {
            warn!(
                "{} trials is below the {MIN_MC_TRIALS} needed for Monte Carlo rates; reporting closed form and NMSE only",
                trials
            );
        }
        let mut records = Vec::new();
        let mut closed_rates = vec![SymbolRates::default(); self.schedule.frame_length];
        let mut mc_rates = vec![SymbolRates::default(); self.schedule.frame_length];
        let mut mc_complete = mc_enabled;
        for s in &self.schedule.symbols {
            let i = s.index;
            let idx = i - 1;
            let env = self.env[idx];
            let dd = matches!(s.predictor, Predictor::DdWp { .. });
            if let Some(dl) = s.dl {
                let mut sum_closed = 0.0;
                let mut sum_mc = Some(0.0);
                for d in 0..users {
                    let closed = if dd {
                        acc.dd_dl[idx * users + d] / acc.dd_count[idx] as f64
                    } else {
                        self.wp_dl_closed(i, d)
                    };
                    sum_closed += closed;
                    records.push(Record::new(Some(d), i, Class::Dl, Metric::RateClosed, closed));
                    if mc_enabled {
                        let mut total = 0.0;
                        let mut ok = true;
                        for &m in self.plan.band(dl) {
                            match acc.dl[(idx * users + d) * m_sum + m].rate(env.p_dl, env.mt_si, noise) {
                                Ok(r) => total += r,
                                Err(_) => ok = false,
                            }
                        }
                        if ok {
                            let v = total / m_sum as f64;
                            records.push(Record::new(Some(d), i, Class::Dl, Metric::RateMc, v));
                            sum_mc = sum_mc.map(|x| x + v);
                        } else {
                            warn!(
                                "symbol {i} user {}: too many discarded ZF instances for a Monte Carlo rate",
                                d + 1
                            );
                            sum_mc = None;
                        }
                    }
                }
                closed_rates[idx].dl = Some(sum_closed * m_sum as f64);
                mc_rates[idx].dl = sum_mc.map(|x| x * m_sum as f64);
                if sum_mc.is_none() {
                    mc_complete = false;
                }
            }
            if let UlActivity::Data(band) = s.ul {
                let mut sum_closed = 0.0;
                let mut sum_mc = 0.0;
                for d in 0..users {
                    let closed = acc.dd_ul[idx * users + d] / acc.dd_count[idx] as f64;
                    sum_closed += closed;
                    records.push(Record::new(Some(d), i, Class::Ul, Metric::RateClosed, closed));
                    if mc_enabled {
                        let other = self.other_rh(d);
                        let mut total = 0.0;
                        for &m in self.plan.band(band) {
                            total += acc.ul[(idx * users + d) * m_sum + m].rate(env.p_ul, other, env.bs_si, noise)?;
                        }
                        let v = total / m_sum as f64;
                        sum_mc += v;
                        records.push(Record::new(Some(d), i, Class::Ul, Metric::RateMc, v));
                    }
                }
                closed_rates[idx].ul = Some(sum_closed * m_sum as f64);
                if mc_enabled {
                    mc_rates[idx].ul = Some(sum_mc * m_sum as f64);
                }
            }
            if depth >= Depth::Predictors && s.predictor != Predictor::None {
                let mut e = 0.0;
                let mut r = 0.0;
                for d in 0..users {
                    let (ed, rd) = (acc.nmse_err[idx * users + d], acc.nmse_ref[idx * users + d]);
                    e += ed;
                    r += rd;
                    records.push(Record::new(Some(d), i, Class::All, Metric::Nmse, ed / rd));
                }
                records.push(Record::new(None, i, Class::All, Metric::Nmse, e / r));
            }
        }
        let frame_average_closed = frame_average(&self.schedule, &closed_rates, m_sum)?;
        let frame_average_mc = if mc_complete {
            Some(frame_average(&self.schedule, &mc_rates, m_sum)?)
        } else {
            None
        };
        if acc.discarded > 0 {
            warn!(
                "{} at {} km/h: discarded {} degenerate ZF instances",
                self.schedule.scheme, self.velocity_kmh, acc.discarded
            );
        }
        Ok(RateReport {
            scheme: self.schedule.scheme.to_string(),
            velocity_kmh: self.velocity_kmh,
            frame_length: self.schedule.frame_length,
            trials,
            seed,
            users,
            records,
            frame_average_closed,
            frame_average_mc,
            discarded_zf: acc.discarded,
        })
    }
}

/// Observations must all use the same uplink subcarriers.
fn common_band(schedule: &FrameSchedule, obs: &[usize]) -> Option<Band> {
    let first = schedule.symbol(*obs.first()?).ul.band()?;
    obs.iter()
        .all(|&t| schedule.symbol(t).ul.band() == Some(first))
        .then_some(first)
}

/// Per-run accumulators, merged in trial order.
struct Acc {
    dl: Vec<DlMoments>,
    ul: Vec<UlMoments>,
    nmse_err: Vec<f64>,
    nmse_ref: Vec<f64>,
    dd_dl: Vec<f64>,
    dd_ul: Vec<f64>,
    dd_count: Vec<u64>,
    discarded: u64,
}

impl Acc {
    fn new(t: usize, users: usize, m_sum: usize) -> Self {
        Self {
            dl: vec![DlMoments::default(); t * users * m_sum],
            ul: vec![UlMoments::default(); t * users * m_sum],
            nmse_err: vec![0.0; t * users],
            nmse_ref: vec![0.0; t * users],
            dd_dl: vec![0.0; t * users],
            dd_ul: vec![0.0; t * users],
            dd_count: vec![0; t],
            discarded: 0,
        }
    }

    fn merge(&mut self, o: &Acc) {
        for (a, b) in self.dl.iter_mut().zip(&o.dl) {
            a.merge(b);
        }
        for (a, b) in self.ul.iter_mut().zip(&o.ul) {
            a.merge(b);
        }
        for (a, b) in self.nmse_err.iter_mut().zip(&o.nmse_err) {
            *a += b;
        }
        for (a, b) in self.nmse_ref.iter_mut().zip(&o.nmse_ref) {
            *a += b;
        }
        for (a, b) in self.dd_dl.iter_mut().zip(&o.dd_dl) {
            *a += b;
        }
        for (a, b) in self.dd_ul.iter_mut().zip(&o.dd_ul) {
            *a += b;
        }
        for (a, b) in self.dd_count.iter_mut().zip(&o.dd_count) {
            *a += b;
        }
        self.discarded += o.discarded;
    }
}

/// Simulate one scheme at one velocity.
pub fn run_scheme(
    cfg: &SystemConfig,
    scheme: Scheme,
    velocity_kmh: f64,
    trials: usize,
    seed: u64,
    depth: Depth,
) -> Result<RateReport> {
    Simulation::new(cfg, scheme, velocity_kmh, seed)?.run(trials, seed, depth)
}
