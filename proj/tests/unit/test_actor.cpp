// SPDX-License-Identifier: Apache-2.0
//
// Policy network structure, sampling semantics, low-rank composition,
// checkpointing, and conjugate layer transfer. Rank assertions go through an
// independent SVD.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include "skybeam/actor.hpp"
#include "skybeam/checkpoint.hpp"
#include "skybeam/learn.hpp"
#include "../common/testutil.hpp"

using namespace skybeam;
using namespace skybeam::test;
using ad::Node;
using ad::Tape;
using ad::Tensor;

namespace {

Eigen::MatrixXcd to_eigen(const CMat& m) {
  Eigen::MatrixXcd e(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) e(i, j) = m.at(i, j);
  return e;
}

int numerical_rank(const CMat& m, double rel_tol = 1e-10) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(to_eigen(m));
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

Tensor random_state(int users, int antennas, Rng& rng) {
  return random_tensor({2, users, antennas}, rng, 0.5);
}

std::vector<Tensor> zero_eps(const ActorForward& fwd) {
  std::vector<Tensor> eps;
  for (const auto& p : fwd.parts) eps.emplace_back(std::vector<int>{p.rows, p.cols});
  return eps;
}

}  // namespace

TEST_CASE("direct heads emit one value per served antenna coefficient") {
  for (auto [users, antennas, want] : {std::tuple{4, 36, 144}, std::tuple{16, 64, 1024}}) {
    ActorConfig cfg;
    cfg.users = users;
    cfg.antennas = antennas;
    cfg.channels = 2;
    cfg.hidden = 8;
    cfg.modes_h = 2;
    cfg.modes_w = 2;
    Rng rng(51);
    ActorNetwork net = build_actor(cfg, rng);
    Tape t;
    ActorForward fwd = actor_forward(t, net, random_state(users, antennas, rng));
    REQUIRE(fwd.parts.size() == 2);  // real and imaginary blocks
    for (const auto& p : fwd.parts) {
      CHECK(p.rows * p.cols == want);
      CHECK(t.val(p.mean).numel() == want);
      CHECK(t.val(p.log_std).numel() == p.rows);
    }
  }
}

TEST_CASE("latent-factor heads shrink to users*j plus j*antennas") {
  ActorConfig cfg;
  cfg.users = 2;
  cfg.antennas = 2;
  cfg.channels = 2;
  cfg.hidden = 8;
  cfg.modes_h = 2;
  cfg.modes_w = 2;
  cfg.lrd_rank = 1;
  Rng rng(52);
  ActorNetwork net = build_actor(cfg, rng);
  Tape t;
  ActorForward fwd = actor_forward(t, net, random_state(2, 2, rng));
  REQUIRE(fwd.parts.size() == 4);  // q_re, q_im, o_re, o_im
  CHECK(fwd.parts[0].rows * fwd.parts[0].cols == 2);  // users x j
  CHECK(fwd.parts[1].rows * fwd.parts[1].cols == 2);
  CHECK(fwd.parts[2].rows * fwd.parts[2].cols == 2);  // j x antennas
  CHECK(fwd.parts[3].rows * fwd.parts[3].cols == 2);
}

TEST_CASE("mean heads live on the shifted simplex inside the unit box") {
  ActorConfig cfg;
  cfg.users = 3;
  cfg.antennas = 4;
  cfg.channels = 2;
  cfg.hidden = 8;
  cfg.modes_h = 2;
  cfg.modes_w = 3;
  Rng rng(53);
  ActorNetwork net = build_actor(cfg, rng);
  Tape t;
  ActorForward fwd = actor_forward(t, net, random_state(3, 4, rng));
  for (const auto& p : fwd.parts) {
    const Tensor& m = t.val(p.mean);
    double sum = 0.0;
    for (double x : m.v) {
      CHECK(x > -1.0);
      CHECK(x < 1.0);
      sum += x;
    }
    // softmax mass 1 mapped through 2s - 1
    CHECK(sum == doctest::Approx(2.0 - static_cast<double>(m.numel())).epsilon(1e-9));
    const Tensor& ls = t.val(p.log_std);
    for (double x : ls.v) {
      CHECK(x >= -5.0);
      CHECK(x <= 2.0);
    }
  }
}

TEST_CASE("zero draw returns the mean action; log density sums over parts") {
  ActorConfig cfg;
  cfg.users = 2;
  cfg.antennas = 4;
  cfg.channels = 2;
  cfg.hidden = 8;
  cfg.modes_h = 2;
  cfg.modes_w = 2;
  Rng rng(54);
  ActorNetwork net = build_actor(cfg, rng);
  Tape t;
  ActorForward fwd = actor_forward(t, net, random_state(2, 4, rng));
  PolicySample s = sample_action_with(t, fwd, cfg, zero_eps(fwd));
  CMat w = sampled_matrix(t, s);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(w.at(i, j).real() == doctest::Approx(t.val(fwd.parts[0].mean).at(i, j)).epsilon(1e-12));
      CHECK(w.at(i, j).imag() == doctest::Approx(t.val(fwd.parts[1].mean).at(i, j)).epsilon(1e-12));
    }

  // independent closed-form log density summed coordinatewise across parts
  Rng draw(55);
  Tape t2;
  ActorForward fwd2 = actor_forward(t2, net, random_state(2, 4, rng));
  PolicySample s2 = sample_action(t2, fwd2, cfg, draw);
  double want = 0.0;
  const double half_log_2pi = 0.91893853320467274178;
  for (size_t pi = 0; pi < fwd2.parts.size(); ++pi) {
    const auto& p = fwd2.parts[pi];
    const Tensor& mu = t2.val(p.mean);
    const Tensor& ls = t2.val(p.log_std);
    const Tensor& e = s2.eps[pi];
    for (int i = 0; i < p.rows; ++i)
      for (int j = 0; j < p.cols; ++j)
        want += -half_log_2pi - ls[static_cast<size_t>(i)] - 0.5 * e.at(i, j) * e.at(i, j);
    (void)mu;
  }
  CHECK(t2.val(s2.log_prob)[0] == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("rank-one composition example and full-rank reproduction") {
  CMat q(2, 1), o(1, 2);
  q.at(0, 0) = 1.0;
  q.at(1, 0) = 2.0;
  o.at(0, 0) = 3.0;
  o.at(0, 1) = 4.0;
  CMat w = lrd_compose(q, o);
  CHECK(w.at(0, 0) == std::complex<double>(3.0));
  CHECK(w.at(0, 1) == std::complex<double>(4.0));
  CHECK(w.at(1, 0) == std::complex<double>(6.0));
  CHECK(w.at(1, 1) == std::complex<double>(8.0));
  CHECK(numerical_rank(w) == 1);

  // identity factor on the left reproduces any target exactly
  Rng rng(56);
  CMat target(3, 3);
  for (auto& z : target.a) z = {rng.normal(), rng.normal()};
  CMat id(3, 3);
  for (int i = 0; i < 3; ++i) id.at(i, i) = 1.0;
  CMat back = lrd_compose(id, target);
  for (size_t i = 0; i < target.a.size(); ++i) CHECK(back.a[i] == target.a[i]);
}

TEST_CASE("random factor products have the latent rank under an svd oracle") {
  Rng rng(57);
  CMat q(5, 2), o(2, 5);
  for (auto& z : q.a) z = {rng.normal(), rng.normal()};
  for (auto& z : o.a) z = {rng.normal(), rng.normal()};
  CMat w = lrd_compose(q, o);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(to_eigen(w));
  const auto& s = svd.singularValues();
  REQUIRE(s.size() == 5);
  CHECK(s(2) < 1e-10 * s(0));
  CHECK(numerical_rank(w) == 2);
}

TEST_CASE("sampled latent-factor beamformers keep their rank bound") {
  ActorConfig cfg;
  cfg.users = 4;
  cfg.antennas = 9;
  cfg.channels = 2;
  cfg.hidden = 8;
  cfg.modes_h = 2;
  cfg.modes_w = 3;
  cfg.lrd_rank = 2;
  Rng rng(58);
  ActorNetwork net = build_actor(cfg, rng);
  for (int trial = 0; trial < 3; ++trial) {
    Tape t;
    ActorForward fwd = actor_forward(t, net, random_state(4, 9, rng));
    PolicySample s = sample_action(t, fwd, cfg, rng);
    CMat w = sampled_matrix(t, s);
    CHECK(w.rows == 4);
    CHECK(w.cols == 9);
    CHECK(numerical_rank(w) <= 2);
  }
}

TEST_CASE("actor construction is seed-deterministic") {
  ActorConfig cfg;
  cfg.users = 2;
  cfg.antennas = 4;
  cfg.channels = 2;
  cfg.hidden = 6;
  cfg.modes_h = 2;
  cfg.modes_w = 2;
  Rng r1(60), r2(60), r3(61);
  ActorNetwork a = build_actor(cfg, r1);
  ActorNetwork b = build_actor(cfg, r2);
  ActorNetwork c = build_actor(cfg, r3);
  REQUIRE(a.params.size() == b.params.size());
  bool all_same = true, any_diff_c = false;
  for (size_t i = 0; i < a.params.size(); ++i) {
    all_same = all_same && a.params[i].value.v == b.params[i].value.v;
    any_diff_c = any_diff_c || a.params[i].value.v != c.params[i].value.v;
  }
  CHECK(all_same);
  CHECK(any_diff_c);
}

TEST_CASE("state shape mismatches are rejected") {
  ActorConfig cfg;
  cfg.users = 2;
  cfg.antennas = 4;
  cfg.channels = 2;
  cfg.hidden = 6;
  cfg.modes_h = 2;
  cfg.modes_w = 2;
  Rng rng(62);
  ActorNetwork net = build_actor(cfg, rng);
  Tape t;
  Tensor bad({2, 3, 4});
  CHECK_THROWS_AS(actor_forward(t, net, bad), std::invalid_argument);
}

TEST_CASE("full policy gradients pass finite differences on both backbones") {
  for (Backbone bb : {Backbone::fno, Backbone::cnn}) {
    ActorConfig cfg;
    cfg.backbone = bb;
    cfg.users = 2;
    cfg.antennas = 4;
    cfg.channels = 2;
    cfg.hidden = 6;
    cfg.modes_h = 2;
    cfg.modes_w = 2;
    cfg.cnn_kernel = 3;
    Rng rng(63);
    ActorNetwork net = build_actor(cfg, rng);
    Tensor state = random_state(2, 4, rng);

    // a fixed draw so every finite-difference evaluation sees one graph
    std::vector<Tensor> eps;
    {
      Tape t;
      ActorForward fwd = actor_forward(t, net, state);
      PolicySample s = sample_action(t, fwd, cfg, rng);
      eps = s.eps;
    }
    std::vector<ad::Param*> ps;
    for (auto& p : net.params) ps.push_back(&p);
    const double err = max_rel_fd_err(
        ps,
        [&](Tape& t) {
          ActorForward fwd = actor_forward(t, net, state);
          PolicySample s = sample_action_with(t, fwd, cfg, eps);
          Node act = ad::sum_all(t, ad::cabs2(t, s.w));
          return ad::add(t, ad::mul_const(t, s.log_prob, 0.3), act);
        },
        1e-5, 8);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("checkpoints survive a bit-exact round trip") {
  SystemConfig cfg;
  cfg.clusters = 2;
  cfg.users_per_cluster = 2;
  cfg.laps_antennas = 4;
  cfg.haps_antennas = 9;
  cfg.fno_channels = 2;
  cfg.hidden = 6;
  Rng rng(64);
  Rng rl = rng.fork(1), rh = rng.fork(2);
  ActorNetwork laps = build_actor(cfg.laps_actor_config(), rl);
  ActorNetwork haps = build_actor(cfg.haps_actor_config(), rh);
  ad::AdamState ol, oh;
  ol.lr = cfg.lr;
  oh.lr = cfg.lr;
  // take one optimizer step so the moment buffers hold nontrivial values
  for (auto& p : laps.params)
    for (auto& g : p.grad.v) g = 0.125;
  ad::adam_step(laps.params, ol);

  const std::string path = "ckpt_roundtrip_test.json";
  save_checkpoint(path, cfg, laps, haps, ol, oh, 17);
  LoadedCheckpoint back = load_checkpoint(path, cfg);
  std::remove(path.c_str());

  CHECK(back.episode == 17);
  CHECK(back.fingerprint == config_fingerprint(cfg));
  REQUIRE(back.laps.params.size() == laps.params.size());
  for (size_t i = 0; i < laps.params.size(); ++i) {
    CHECK(back.laps.params[i].name == laps.params[i].name);
    CHECK(back.laps.params[i].value.v == laps.params[i].value.v);
  }
  for (size_t i = 0; i < haps.params.size(); ++i)
    CHECK(back.haps.params[i].value.v == haps.params[i].value.v);
  CHECK(back.opt_laps.t == ol.t);
  REQUIRE(back.opt_laps.m.size() == ol.m.size());
  for (size_t i = 0; i < ol.m.size(); ++i) {
    CHECK(back.opt_laps.m[i].v == ol.m[i].v);
    CHECK(back.opt_laps.v[i].v == ol.v[i].v);
  }
}

TEST_CASE("checkpoints from another geometry are rejected") {
  SystemConfig cfg;
  cfg.clusters = 2;
  cfg.users_per_cluster = 2;
  cfg.laps_antennas = 4;
  cfg.haps_antennas = 9;
  cfg.fno_channels = 2;
  cfg.hidden = 6;
  Rng rng(65);
  Rng rl = rng.fork(1), rh = rng.fork(2);
  ActorNetwork laps = build_actor(cfg.laps_actor_config(), rl);
  ActorNetwork haps = build_actor(cfg.haps_actor_config(), rh);
  const std::string path = "ckpt_geometry_test.json";
  save_checkpoint(path, cfg, laps, haps, {}, {}, 1);

  SystemConfig other = cfg;
  other.haps_antennas = 16;
  CHECK_THROWS_WITH_AS(load_checkpoint(path, other), doctest::Contains("geometry"),
                       std::invalid_argument);
  // schedule-only changes keep the fingerprint and load fine
  SystemConfig sched = cfg;
  sched.episodes = 5;
  sched.eval_episodes = 7;
  CHECK(config_fingerprint(sched) == config_fingerprint(cfg));
  CHECK_NOTHROW(load_checkpoint(path, sched));
  CHECK(config_fingerprint(other) != config_fingerprint(cfg));
  std::remove(path.c_str());
}

namespace {

// Small pair of actors for transfer checks; the source gets a deliberately
// shifted hidden layer so posterior moments move visibly.
struct TransferFixture {
  ActorConfig cfg;
  ActorNetwork source;
  ActorNetwork target;

  explicit TransferFixture(int lrd = 0) {
    cfg.users = 2;
    cfg.antennas = 4;
    cfg.channels = 2;
    cfg.hidden = 6;
    cfg.modes_h = 2;
    cfg.modes_w = 2;
    Rng rs(70), rt(71);
    ActorConfig tcfg = cfg;
    tcfg.lrd_rank = lrd;
    source = build_actor(cfg, rs);
    target = build_actor(tcfg, rt);
  }
};

double param_mean(const ad::Param& p) {
  double s = 0.0;
  for (double x : p.value.v) s += x;
  return s / static_cast<double>(p.value.numel());
}

double param_var(const ad::Param& p) {
  const double m = param_mean(p);
  double s = 0.0;
  for (double x : p.value.v) s += (x - m) * (x - m);
  return s / static_cast<double>(p.value.numel());
}

const ad::Param& named(const ActorNetwork& n, const std::string& name) {
  for (const auto& p : n.params)
    if (p.name == name) return p;
  throw std::runtime_error("missing param " + name);
}

}  // namespace

TEST_CASE("posterior moments follow the conjugate update") {
  TransferFixture fx;
  // measure prior/likelihood stats independently before the call
  const double mu_l = param_mean(named(fx.source, "hidden.w"));
  const double var_l = param_var(named(fx.source, "hidden.w"));
  const double mu_h = param_mean(named(fx.target, "hidden.w"));
  const double var_h = param_var(named(fx.target, "hidden.w"));
  const double beta = 2.0;
  const double post_var = 1.0 / (1.0 / (beta * var_l) + 1.0 / var_h);
  const double post_mean = post_var * (beta * mu_l / var_l + mu_h / var_h);

  // keep a copy for the z-score invariance check
  std::vector<double> before = named(fx.target, "hidden.w").value.v;
  transfer_layers(fx.source, fx.target, beta);
  const ad::Param& after = named(fx.target, "hidden.w");

  CHECK(std::abs(param_mean(after) - post_mean) < 1e-9);
  CHECK(std::abs(param_var(after) - post_var) < 1e-9);
  // standardized coordinates are preserved by the affine map
  const double sd_h = std::sqrt(var_h), sd_p = std::sqrt(post_var);
  for (size_t i = 0; i < before.size(); i += 7) {
    const double z_old = (before[i] - mu_h) / sd_h;
    const double z_new = (after.value.v[i] - post_mean) / sd_p;
    CHECK(std::abs(z_old - z_new) < 1e-9);
  }
}

TEST_CASE("unit-weight transfer between equal-variance layers averages the means") {
  TransferFixture fx;
  const double mu_l = param_mean(named(fx.source, "hidden.w"));
  const double var_l = param_var(named(fx.source, "hidden.w"));
  const double mu_h = param_mean(named(fx.target, "hidden.w"));
  const double var_h = param_var(named(fx.target, "hidden.w"));
  transfer_layers(fx.source, fx.target, 1.0);
  const ad::Param& after = named(fx.target, "hidden.w");
  const double post_var = 1.0 / (1.0 / var_l + 1.0 / var_h);
  const double post_mean = post_var * (mu_l / var_l + mu_h / var_h);
  CHECK(std::abs(param_mean(after) - post_mean) < 1e-9);
  CHECK(std::abs(param_var(after) - post_var) < 1e-9);
  // equal variances make the posterior mean the midpoint at half the variance
  if (std::abs(var_l - var_h) < 1e-12) {
    CHECK(param_mean(after) == doctest::Approx(0.5 * (mu_l + mu_h)));
    CHECK(param_var(after) == doctest::Approx(0.5 * var_l));
  }
}

TEST_CASE("reference posterior numbers for the two-to-one prior") {
  // beta 2, prior (1, 1), likelihood (0, 1): posterior variance 2/3, mean 4/3
  const double beta = 2.0, mu_l = 1.0, var_l = 1.0, mu_h = 0.0, var_h = 1.0;
  const double post_var = 1.0 / (1.0 / (beta * var_l) + 1.0 / var_h);
  const double post_mean = post_var * (beta * mu_l / var_l + mu_h / var_h);
  CHECK(std::abs(post_var - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(post_mean - 4.0 / 3.0) < 1e-12);

  // and the implementation realizes exactly these moments on a crafted layer
  TransferFixture fx;
  {
    // force source hidden weights to mean 1, population variance 1
    auto& sv = const_cast<ad::Param&>(named(fx.source, "hidden.w")).value.v;
    for (size_t i = 0; i < sv.size(); ++i) sv[i] = (i % 2 == 0) ? 0.0 : 2.0;
    auto& tv = const_cast<ad::Param&>(named(fx.target, "hidden.w")).value.v;
    for (size_t i = 0; i < tv.size(); ++i) tv[i] = (i % 2 == 0) ? -1.0 : 1.0;
  }
  transfer_layers(fx.source, fx.target, beta);
  CHECK(std::abs(param_mean(named(fx.target, "hidden.w")) - 4.0 / 3.0) < 1e-12);
  CHECK(std::abs(param_var(named(fx.target, "hidden.w")) - 2.0 / 3.0) < 1e-12);
}

TEST_CASE("transfer touches the tail but never the spectral backbone") {
  TransferFixture fx;
  std::vector<double> zr = named(fx.target, "spectral.re").value.v;
  std::vector<double> zi = named(fx.target, "spectral.im").value.v;
  std::vector<double> hb = named(fx.target, "hidden.b").value.v;
  std::vector<double> head_b = named(fx.target, "head.mu_re.b").value.v;
  std::vector<double> head_w = named(fx.target, "head.mu_re.w").value.v;
  transfer_layers(fx.source, fx.target, 1.5);
  CHECK(named(fx.target, "spectral.re").value.v == zr);
  CHECK(named(fx.target, "spectral.im").value.v == zi);
  CHECK(named(fx.target, "hidden.b").value.v == hb);       // weights only
  CHECK(named(fx.target, "head.mu_re.b").value.v == head_b);
  CHECK(named(fx.target, "head.mu_re.w").value.v != head_w);
}

TEST_CASE("latent-factor heads pull statistics from the matching plain roles") {
  TransferFixture fx(/*lrd=*/1);
  const ad::Param& src = named(fx.source, "head.mu_re.w");
  const double mu_l = param_mean(src), var_l = param_var(src);
  const ad::Param& before = named(fx.target, "head.mu_q_re.w");
  const double mu_h = param_mean(before), var_h = param_var(before);
  const double beta = 1.0;
  transfer_layers(fx.source, fx.target, beta);
  const double post_var = 1.0 / (1.0 / (beta * var_l) + 1.0 / var_h);
  const double post_mean = post_var * (beta * mu_l / var_l + mu_h / var_h);
  const ad::Param& after = named(fx.target, "head.mu_q_re.w");
  CHECK(std::abs(param_mean(after) - post_mean) < 1e-9);
  CHECK(std::abs(param_var(after) - post_var) < 1e-9);
}

TEST_CASE("degenerate layers and non-positive weights are rejected") {
  TransferFixture fx;
  CHECK_THROWS_WITH_AS(transfer_layers(fx.source, fx.target, 0.0),
                       doctest::Contains("positive"), std::invalid_argument);
  auto& tv = const_cast<ad::Param&>(named(fx.target, "hidden.w")).value.v;
  for (auto& x : tv) x = 0.25;  // zero variance target
  CHECK_THROWS_WITH_AS(transfer_layers(fx.source, fx.target, 1.0),
                       doctest::Contains("degenerate"), std::invalid_argument);
}
