// SPDX-License-Identifier: Apache-2.0
#include "skybeam/learn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skybeam/baselines.hpp"
#include "skybeam/checkpoint.hpp"

namespace skybeam {

namespace {

ad::Tensor plane_of(const ad::Tensor& state, int idx) {
  int rows = state.dim(1), cols = state.dim(2);
  ad::Tensor out({rows, cols});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.at(i, j) = state.at(idx, i, j);
  return out;
}

struct LayerStats {
  double mean = 0.0;
  double var = 0.0;  // population variance
};

// Final averaging shared by the evaluation loops: turns per-slot sums and
// squared sums over episodes into means plus normal 95% half-widths.
void finish_eval(EvalResult& r, const std::vector<double>& slot_sq, int episodes) {
  size_t slots = r.per_slot_sum_rate.size();
  r.per_slot_ci95.assign(slots, 0.0);
  for (size_t t = 0; t < slots; ++t) {
    double mean = r.per_slot_sum_rate[t] / episodes;
    r.per_slot_sum_rate[t] = mean;
    if (episodes > 1) {
      double var = (slot_sq[t] - episodes * mean * mean) / (episodes - 1);
      if (var < 0) var = 0;
      r.per_slot_ci95[t] = 1.96 * std::sqrt(var / episodes);
    }
  }
  for (double x : r.per_episode_reward) r.mean_reward += x;
  for (double x : r.per_episode_sum_rate) r.mean_sum_rate += x;
  r.mean_reward /= episodes;
  r.mean_sum_rate /= episodes;
}

LayerStats stats_of(const ad::Tensor& v) {
  LayerStats s;
  double n = double(v.numel());
  for (double x : v.v) s.mean += x;
  s.mean /= n;
  for (double x : v.v) s.var += (x - s.mean) * (x - s.mean);
  s.var /= n;
  return s;
}

const ad::Param* find_param(const ActorNetwork& net, const std::string& name) {
  for (const auto& p : net.params)
    if (p.name == name) return &p;
  return nullptr;
}

ad::Param* find_param(ActorNetwork& net, const std::string& name) {
  for (auto& p : net.params)
    if (p.name == name) return &p;
  return nullptr;
}

// Latent-factor head roles collapse onto the plain roles of a source network
// without the factorization (mu_q_re -> mu_re, sd_o_im -> sd_im).
std::string source_role(std::string role) {
  for (const char* tag : {"_q", "_o"}) {
    auto pos = role.find(tag);
    if (pos != std::string::npos) {
      role.erase(pos, 2);
      break;
    }
  }
  return role;
}

// One gradient round for one actor over its share of the batch. Returns
// without touching parameters when the share is empty.
void update_actor(ActorNetwork& net, ad::AdamState& opt,
                  const std::vector<const Transition*>& share, double entropy_weight,
                  double p_max_w, double noise_w, Rng& rng, bool spectral_only) {
  if (share.empty()) return;
  ad::zero_grads(net.params);
  for (const Transition* tr : share) {
    ad::Tape t;
    ad::Node loss = actor_loss(t, net, *tr, entropy_weight, p_max_w, noise_w, rng);
    t.backward(loss);
  }
  ad::scale_grads(net.params, 1.0 / double(share.size()));
  if (spectral_only) {
    for (auto& p : net.params)
      if (p.name != "spectral.re" && p.name != "spectral.im")
        std::fill(p.grad.v.begin(), p.grad.v.end(), 0.0);
  }
  ad::adam_step(net.params, opt);
}

void check_compatible(const ActorNetwork& given, const ActorConfig& want, const char* which) {
  const ActorConfig& c = given.cfg;
  if (c.users != want.users || c.antennas != want.antennas || c.lrd_rank != want.lrd_rank ||
      c.backbone != want.backbone)
    throw std::invalid_argument(std::string("initial ") + which +
                                " actor geometry does not match the configuration");
}

}  // namespace

ad::Node surrogate_mean_rate(ad::Tape& t, const ad::Tensor& state, const ad::CNode& w,
                             double p_max_w, double noise_w) {
  int rows = state.dim(1);
  ad::CNode h{t.constant(plane_of(state, 0)), t.constant(plane_of(state, 1))};
  ad::Node sumsq =
      ad::add(t, ad::sum_all(t, ad::mul(t, w.re, w.re)), ad::sum_all(t, ad::mul(t, w.im, w.im)));
  ad::Node scale = ad::vsqrt(t, ad::rdiv_const(t, p_max_w, sumsq));
  ad::CNode wn{ad::scale_by(t, w.re, scale), ad::scale_by(t, w.im, scale)};
  ad::Node p = ad::cabs2(t, ad::cmatmul_nt(t, h, wn));  // stream power matrix
  ad::Node sig = ad::take_diag(t, p);
  ad::Node interf = ad::sub(t, ad::sum_rows(t, p), sig);
  ad::Node sinr = ad::divide(t, sig, ad::add_const(t, interf, noise_w));
  ad::Node rate = ad::mul_const(t, ad::vlog(t, ad::add_const(t, sinr, 1.0)), 1.0 / std::log(2.0));
  return ad::mul_const(t, ad::sum_all(t, rate), 1.0 / double(rows));
}

ad::Node actor_loss(ad::Tape& t, ActorNetwork& net, const Transition& tr, double entropy_weight,
                    double p_max_w, double noise_w, Rng& rng) {
  ActorForward fwd = actor_forward(t, net, tr.state);
  PolicySample ps = sample_action(t, fwd, net.cfg, rng);
  ad::Node sur = surrogate_mean_rate(t, tr.state, ps.w, p_max_w, noise_w);
  // The log-density is normalized per action coordinate so one entropy
  // weight balances actors whose action dimensions differ by an order of
  // magnitude (the platform action is ~7x the cluster action at full scale).
  long n_coords = 0;
  for (const ad::Tensor& e : ps.eps) n_coords += e.numel();
  const double w = entropy_weight / static_cast<double>(n_coords);
  return ad::sub(t, ad::mul_const(t, ps.log_prob, w), sur);
}

SlotRollout policy_rollout(const SystemConfig& cfg, ActorNetwork& cluster_actor,
                           ActorNetwork& platform_actor, const EpisodeSim& sim, Rng& rng) {
  SlotRollout out;
  out.beams.laps.resize(cfg.clusters);
  for (int b = 0; b < cfg.clusters; ++b) {
    const ad::Tensor& state = sim.cluster_states()[b];
    ad::Tape t;
    ActorForward fwd = actor_forward(t, cluster_actor, state);
    PolicySample ps = sample_action(t, fwd, cluster_actor.cfg, rng);
    CMat raw = sampled_matrix(t, ps);
    out.beams.laps[b] = normalize_power(raw, cfg.laps_power_w);
    out.transitions.push_back({state, std::move(raw), 0.0, 0});
  }
  {
    const ad::Tensor& state = sim.platform_state();
    ad::Tape t;
    ActorForward fwd = actor_forward(t, platform_actor, state);
    PolicySample ps = sample_action(t, fwd, platform_actor.cfg, rng);
    CMat raw = sampled_matrix(t, ps);
    out.beams.haps = normalize_power(raw, cfg.haps_power_w);
    out.transitions.push_back({state, std::move(raw), 0.0, 1});
  }
  return out;
}

std::vector<Transition> regenerate_batch(const SystemConfig& cfg, ActorNetwork& cluster_actor,
                                         ActorNetwork& platform_actor, int batch, Rng& rng) {
  if (batch < 1) throw std::invalid_argument("regenerate batch must be positive");
  std::vector<Transition> out;
  out.reserve(batch);
  int agents = cfg.clusters + 1;
  uint64_t base = static_cast<uint64_t>(rng.uniform() * 9007199254740992.0);
  for (int i = 0; i < batch; ++i) {
    Rng env = rng.fork(base + 2ull * i);
    Rng act = rng.fork(base + 2ull * i + 1);
    EpisodeSim sim(cfg, env);
    sim.begin();
    sim.next_slot();
    SlotRollout ro = policy_rollout(cfg, cluster_actor, platform_actor, sim, act);
    RateReport rep =
        evaluate_rates(sim.channels(), ro.beams, cfg.users_per_cluster, cfg.noise_w());
    Transition tr = std::move(ro.transitions[static_cast<size_t>(i % agents)]);
    tr.reward = rep.reward;
    out.push_back(std::move(tr));
  }
  return out;
}

void transfer_layers(const ActorNetwork& source, ActorNetwork& target, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("transfer beta must be positive");

  std::vector<std::pair<const ad::Param*, ad::Param*>> pairs;
  {
    const ad::Param* sw = find_param(source, "hidden.w");
    ad::Param* tw = find_param(target, "hidden.w");
    if (!sw || !tw) throw std::invalid_argument("transfer requires hidden layers on both actors");
    pairs.emplace_back(sw, tw);
  }
  for (const auto& head : target.heads) {
    ad::Param* tw = &target.params[static_cast<size_t>(head.w)];
    const ad::Param* sw = find_param(source, "head." + source_role(head.role) + ".w");
    if (!sw) throw std::invalid_argument("transfer source lacks head " + head.role);
    pairs.emplace_back(sw, tw);
  }

  for (auto& [sw, tw] : pairs) {
    LayerStats prior = stats_of(sw->value);
    LayerStats like = stats_of(tw->value);
    if (prior.var <= 0.0 || like.var <= 0.0)
      throw std::invalid_argument("degenerate prior/likelihood in layer transfer");
    double post_var = 1.0 / (1.0 / (beta * prior.var) + 1.0 / like.var);
    double post_mean = post_var * (beta * prior.mean / prior.var + like.mean / like.var);
    double a = std::sqrt(post_var / like.var);
    for (double& x : tw->value.v) x = (x - like.mean) * a + post_mean;
  }
}

TrainResult train(const SystemConfig& cfg, const TrainOptions& opt) {
  cfg.validate();
  TrainResult res;
  Rng root(cfg.seed);

  if (opt.init_cluster) {
    check_compatible(*opt.init_cluster, cfg.laps_actor_config(), "cluster");
    res.cluster_actor = *opt.init_cluster;
  } else {
    Rng r = root.fork(0xA1);
    res.cluster_actor = build_actor(cfg.laps_actor_config(), r);
  }
  if (opt.init_platform) {
    check_compatible(*opt.init_platform, cfg.haps_actor_config(), "platform");
    res.platform_actor = *opt.init_platform;
  } else {
    Rng r = root.fork(0xA2);
    res.platform_actor = build_actor(cfg.haps_actor_config(), r);
  }
  res.opt_cluster.lr = cfg.lr;
  res.opt_platform.lr = cfg.lr;

  ReplayBuffer buf(cfg.buffer_capacity);
  Rng update_rng = root.fork(0xB0);
  Rng regen_rng = root.fork(0xB1);
  double noise = cfg.noise_w();

  for (int e = 0; e < cfg.episodes; ++e) {
    Rng env_rng = root.fork(0x1000 + static_cast<uint64_t>(e));
    Rng act_rng = root.fork(0x8000 + static_cast<uint64_t>(e));
    EpisodeSim sim(cfg, env_rng);
    sim.begin();
    double acc = 0.0;

    for (int t = 0; t < cfg.slots; ++t) {
      sim.next_slot();
      SlotRollout ro = policy_rollout(cfg, res.cluster_actor, res.platform_actor, sim, act_rng);
      RateReport rep = evaluate_rates(sim.channels(), ro.beams, cfg.users_per_cluster, noise);
      acc += rep.reward;
      for (auto& tr : ro.transitions) {
        tr.reward = rep.reward;  // one shared reward across every agent
        if (!cfg.regenerate) buf.push(std::move(tr));
      }

      if ((t + 1) % cfg.update_period == 0) {
        std::vector<Transition> owned;
        std::vector<const Transition*> batch;
        if (cfg.regenerate) {
          owned = regenerate_batch(cfg, res.cluster_actor, res.platform_actor, cfg.batch,
                                   regen_rng);
          for (const auto& tr : owned) batch.push_back(&tr);
        } else {
          // early updates run on what the buffer holds so the cadence is kept
          int n = std::min<int>(cfg.batch, static_cast<int>(buf.size()));
          batch = buf.sample(n, update_rng);
        }
        std::vector<const Transition*> cluster_share, platform_share;
        for (const Transition* tr : batch)
          (tr->layer == 0 ? cluster_share : platform_share).push_back(tr);
        if (opt.train_cluster)
          update_actor(res.cluster_actor, res.opt_cluster, cluster_share, cfg.entropy_laps,
                       cfg.laps_power_w, noise, update_rng, false);
        if (opt.train_platform)
          update_actor(res.platform_actor, res.opt_platform, platform_share, cfg.entropy_haps,
                       cfg.haps_power_w, noise, update_rng, opt.platform_spectral_only);
        ++res.update_events;
      }
    }

    res.episode_reward.push_back(acc / cfg.slots);
    if ((e + 1) % cfg.checkpoint_period == 0) {
      ++res.checkpoints_written;
      if (!opt.checkpoint_dir.empty()) {
        std::string path =
            opt.checkpoint_dir + "/checkpoint_ep" + std::to_string(e + 1) + ".json";
        save_checkpoint(path, cfg, res.cluster_actor, res.platform_actor, res.opt_cluster,
                        res.opt_platform, e + 1);
      }
    }
  }
  res.buffer_pushes = buf.pushes();
  res.buffer_samples = buf.samples();
  return res;
}

EvalResult evaluate_policy(const SystemConfig& cfg, ActorNetwork& cluster_actor,
                           ActorNetwork& platform_actor, int episodes, uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluation needs at least one episode");
  EvalResult r;
  r.per_slot_sum_rate.assign(static_cast<size_t>(cfg.slots), 0.0);
  std::vector<double> slot_sq(static_cast<size_t>(cfg.slots), 0.0);
  Rng root(seed);
  double noise = cfg.noise_w();
  for (int e = 0; e < episodes; ++e) {
    Rng env_rng = root.fork(0x1000 + static_cast<uint64_t>(e));
    Rng act_rng = root.fork(0x8000 + static_cast<uint64_t>(e));
    EpisodeSim sim(cfg, env_rng);
    sim.begin();
    double er = 0.0, es = 0.0;
    for (int t = 0; t < cfg.slots; ++t) {
      sim.next_slot();
      SlotRollout ro = policy_rollout(cfg, cluster_actor, platform_actor, sim, act_rng);
      RateReport rep = evaluate_rates(sim.channels(), ro.beams, cfg.users_per_cluster, noise);
      r.per_slot_sum_rate[static_cast<size_t>(t)] += rep.sum_rate;
      slot_sq[static_cast<size_t>(t)] += rep.sum_rate * rep.sum_rate;
      er += rep.reward;
      es += rep.sum_rate;
    }
    r.per_episode_reward.push_back(er / cfg.slots);
    r.per_episode_sum_rate.push_back(es / cfg.slots);
  }
  finish_eval(r, slot_sq, episodes);
  return r;
}

EvalResult evaluate_baseline(const SystemConfig& cfg, const std::string& method, int episodes,
                             uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluation needs at least one episode");
  if (method != "mrt" && method != "zf" && method != "wmmse")
    throw std::invalid_argument("unknown baseline method: " + method);
  EvalResult r;
  r.per_slot_sum_rate.assign(static_cast<size_t>(cfg.slots), 0.0);
  std::vector<double> slot_sq(static_cast<size_t>(cfg.slots), 0.0);
  Rng root(seed);
  double noise = cfg.noise_w();
  int K = cfg.users_per_cluster;
  int U = cfg.total_users();

  auto solve = [&](const PrecodeProblem& p) -> CMat {
    if (method == "mrt") return mrt(p);
    if (method == "zf") return zf(p);
    return wmmse(p).w;
  };

  for (int e = 0; e < episodes; ++e) {
    Rng env_rng = root.fork(0x1000 + static_cast<uint64_t>(e));
    EpisodeSim sim(cfg, env_rng);
    sim.begin();
    ChannelSet prev_ch;
    std::vector<CMat> prev_w;
    double er = 0.0, es = 0.0;
    for (int t = 0; t < cfg.slots; ++t) {
      sim.next_slot();
      const ChannelSet& ch = sim.channels();
      BeamformingSet beams;
      beams.laps.resize(cfg.clusters);
      for (int b = 0; b < cfg.clusters; ++b) {
        PrecodeProblem p;
        p.h = CMat(K, cfg.laps_antennas);
        for (int k = 0; k < K; ++k)
          for (int n = 0; n < cfg.laps_antennas; ++n) p.h.at(k, n) = ch.laps[b][b * K + k][n];
        p.noise_w = noise;
        p.p_max_w = cfg.laps_power_w;
        if (!prev_w.empty()) {
          // cross-cluster interference as seen one slot earlier
          p.extra_noise_w.assign(K, 0.0);
          for (int k = 0; k < K; ++k) {
            int u = b * K + k;
            double acc = 0.0;
            for (int b2 = 0; b2 < cfg.clusters; ++b2) {
              if (b2 == b) continue;
              for (int k2 = 0; k2 < K; ++k2) {
                std::complex<double> dot = 0.0;
                for (int n = 0; n < cfg.laps_antennas; ++n)
                  dot += prev_ch.laps[b2][u][n] * prev_w[b2].at(k2, n);
                acc += std::norm(dot);
              }
            }
            p.extra_noise_w[k] = acc;
          }
        }
        beams.laps[b] = solve(p);
      }
      {
        PrecodeProblem p;
        p.h = CMat(U, cfg.haps_antennas);
        for (int u = 0; u < U; ++u)
          for (int n = 0; n < cfg.haps_antennas; ++n) p.h.at(u, n) = ch.haps[u][n];
        p.noise_w = noise;
        p.p_max_w = cfg.haps_power_w;
        beams.haps = solve(p);
      }
      RateReport rep = evaluate_rates(ch, beams, K, noise);
      r.per_slot_sum_rate[static_cast<size_t>(t)] += rep.sum_rate;
      slot_sq[static_cast<size_t>(t)] += rep.sum_rate * rep.sum_rate;
      er += rep.reward;
      es += rep.sum_rate;
      prev_ch = ch;
      prev_w = beams.laps;
    }
    r.per_episode_reward.push_back(er / cfg.slots);
    r.per_episode_sum_rate.push_back(es / cfg.slots);
  }
  finish_eval(r, slot_sq, episodes);
  return r;
}

}  // namespace skybeam
