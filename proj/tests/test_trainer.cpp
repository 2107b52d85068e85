#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "shadowae/trainer.hpp"

using namespace shadowae;

namespace {

std::filesystem::path tiny_corpus(const std::string& name, std::size_t n_train = 12) {
  const auto dir = oracle::scratch_dir(name);
  PhantomSpec spec;
  spec.width = spec.height = 32;
  build_corpus(spec, n_train, 2, 3, dir / "corpus");
  return dir;
}

TrainConfig tiny_config(const std::filesystem::path& dir, const std::string& out) {
  TrainConfig c;
  c.corpus = dir / "corpus";
  c.out_dir = dir / out;
  c.epochs = 2;
  c.batch_size = 5;
  c.enc_channels = {4, 8};
  return c;
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<float> flat(const ModelParams& p) {
  std::vector<float> out;
  p.for_each([&](const std::string&, const Tensor<float>& t) {
    out.insert(out.end(), t.storage().begin(), t.storage().end());
  });
  return out;
}

ModelParams small_params(std::uint64_t seed) {
  ArchConfig a;
  a.height = a.width = 32;
  a.enc_channels = {4, 8};
  Rng rng(seed);
  return init_params(a, rng, he_gain(a.slope));
}

struct Batch {
  Tensor<float> x;
  std::vector<ShadowMask> masks;
};

Batch fixed_batch(std::size_t n) {
  PhantomSpec spec;
  spec.width = spec.height = 32;
  Batch b{Tensor<float>(Shape{n, 1, 32, 32}), {}};
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(100 + i);
    const auto p = generate_phantom(spec, rng);
    std::copy(p.image.storage().begin(), p.image.storage().end(), b.x.storage().begin() + static_cast<std::ptrdiff_t>(i * 1024));
  }
  b.masks = sample_step_masks(spec.fan(), SamplingConfig{}, 32, 32, n, 9, 0, 1.0);
  return b;
}

}  // namespace

TEST_CASE("steps per epoch rounds up") {
  CHECK(steps_per_epoch(2000, 16) == 125);
  CHECK(steps_per_epoch(12, 5) == 3);
  CHECK(steps_per_epoch(5, 5) == 1);
}

TEST_CASE("epoch order is a seeded permutation") {
  const auto a = epoch_order(50, 1, 0);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 50);
  CHECK(a == epoch_order(50, 1, 0));
  CHECK(a != epoch_order(50, 1, 1));
  CHECK(a != epoch_order(50, 2, 0));
}

TEST_CASE("step masks are fresh per step and honour the injection probability") {
  const auto fan = FanGeometry::for_image(32, 32);
  std::set<std::vector<float>> seen;
  for (std::uint64_t step = 0; step < 40; ++step)
    for (const auto& m : sample_step_masks(fan, SamplingConfig{}, 32, 32, 4, 7, step, 1.0)) {
      CHECK_FALSE(shadow_region(m).empty_region());
      seen.insert(m.values);
    }
  CHECK(seen.size() == 160);
  for (const auto& m : sample_step_masks(fan, SamplingConfig{}, 32, 32, 4, 7, 3, 0.0)) CHECK(m == ShadowMask(32, 32));
  CHECK(sample_step_masks(fan, SamplingConfig{}, 32, 32, 4, 7, 3, 1.0)[2].values ==
        sample_step_masks(fan, SamplingConfig{}, 32, 32, 4, 7, 3, 1.0)[2].values);
}

TEST_CASE("zero loss weights leave parameters unchanged") {
  auto p = small_params(1);
  const auto before = flat(p);
  const auto b = fixed_batch(3);
  LossWeights w;
  w.lambda_ae = w.lambda_s = w.lambda_sreg = w.lambda_c = 0.0;
  OptimizerState opt;
  for (int i = 0; i < 3; ++i) train_step(p, b.x, b.masks, w, opt, 0.05, 0.9);
  CHECK(flat(p) == before);
  CHECK(opt.step == 3);
}

TEST_CASE("first update scales linearly with the learning rate") {
  const auto b = fixed_batch(2);
  const auto p0 = flat(small_params(2));
  auto delta_norm = [&](double lr) {
    auto p = small_params(2);
    OptimizerState opt;
    train_step(p, b.x, b.masks, LossWeights{}, opt, lr, 0.9);
    const auto p1 = flat(p);
    double s = 0.0;
    for (std::size_t i = 0; i < p1.size(); ++i) s += (double(p1[i]) - p0[i]) * (double(p1[i]) - p0[i]);
    return std::sqrt(s);
  };
  const double small = delta_norm(1e-3), big = delta_norm(1e-2);
  CHECK(small > 0.0);
  CHECK(big / small == Catch::Approx(10.0).epsilon(1e-2));
}

TEST_CASE("non-finite loss aborts without touching parameters") {
  auto p = small_params(3);
  const auto before = flat(p);
  auto b = fixed_batch(2);
  b.x[5] = std::numeric_limits<float>::quiet_NaN();
  OptimizerState opt;
  CHECK_THROWS_AS(train_step(p, b.x, b.masks, LossWeights{}, opt, 0.05, 0.9), NonFiniteLoss);
  CHECK(flat(p) == before);
}

TEST_CASE("repeated steps on one batch reduce the loss") {
  auto p = small_params(4);
  const auto b = fixed_batch(4);
  OptimizerState opt;
  const double first = train_step(p, b.x, b.masks, LossWeights{}, opt, 0.05, 0.9).total;
  double last = first;
  for (int i = 1; i < 200; ++i) last = train_step(p, b.x, b.masks, LossWeights{}, opt, 0.05, 0.9).total;
  CHECK(last < first);
}

TEST_CASE("zero epochs writes the initial checkpoint and an empty log") {
  const auto dir = tiny_corpus("train_zero");
  auto c = tiny_config(dir, "run");
  c.epochs = 0;
  const auto r = fit(c);
  CHECK(r.steps == 0);
  CHECK(lines(r.log) == std::vector<std::string>{"step,epoch,l_ae,l_s,l_sreg,l_c,total"});
  const auto ck = load_checkpoint(r.checkpoint);
  ArchConfig a;
  a.height = a.width = 32;
  a.enc_channels = {4, 8};
  Rng rng(c.seed, "init");
  CHECK(flat(ck.params) == flat(init_params(a, rng, he_gain(a.slope))));
}

TEST_CASE("fit logs one row per step and is deterministic") {
  const auto dir = tiny_corpus("train_det");
  auto c = tiny_config(dir, "a");
  c.checkpoint_every = 2;
  const auto ra = fit(c);
  const auto rows = lines(ra.log);
  CHECK(rows.size() == 1 + steps_per_epoch(12, 5) * 2);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].rfind(std::to_string(i) + ",", 0) == 0);
  CHECK(std::filesystem::exists(c.out_dir / "ckpt_000002.shdw"));
  CHECK(std::filesystem::exists(c.out_dir / "config.json"));
  c.out_dir = dir / "b";
  const auto rb = fit(c);
  CHECK(oracle::read_bytes(ra.log) == oracle::read_bytes(rb.log));
  const auto ca = load_checkpoint(ra.checkpoint), cb = load_checkpoint(rb.checkpoint);
  CHECK(flat(ca.params) == flat(cb.params));
  for (const auto& [name, v] : ca.velocity) CHECK(v.storage() == cb.velocity.at(name).storage());
}

TEST_CASE("resuming from a checkpoint matches uninterrupted training") {
  const auto dir = tiny_corpus("train_resume");
  auto full = tiny_config(dir, "full");
  full.epochs = 3;
  const auto rf = fit(full);

  auto part = tiny_config(dir, "part");
  part.epochs = 1;
  const auto rp = fit(part);
  auto rest = tiny_config(dir, "part");
  rest.epochs = 3;
  rest.resume = rp.checkpoint;
  const auto rr = fit(rest);
  CHECK(rr.steps == rf.steps);
  CHECK(flat(load_checkpoint(rr.checkpoint).params) == flat(load_checkpoint(rf.checkpoint).params));
  CHECK(oracle::read_bytes(rr.log) == oracle::read_bytes(rf.log));
}

TEST_CASE("fit fails before training on a bad corpus or config") {
  const auto dir = oracle::scratch_dir("train_bad");
  TrainConfig c;
  c.corpus = dir / "nothing";
  c.out_dir = dir / "out";
  CHECK_THROWS(fit(c));
  CHECK_FALSE(std::filesystem::exists(c.out_dir / "train_log.csv"));
  c.batch_size = 0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.momentum = 1.0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.init_gain = 0.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("train config round-trips through json") {
  TrainConfig c;
  c.epochs = 3;
  c.loss.lambda_s = 4.0;
  c.init_gain = 1.0;
  c.resume = "x.shdw";
  const nlohmann::json j = c;
  const auto back = j.get<TrainConfig>();
  CHECK(back.epochs == 3);
  CHECK(back.loss.lambda_s == 4.0);
  CHECK(back.init_gain == 1.0);
  CHECK(nlohmann::json(back) == j);
  CHECK_THROWS(nlohmann::json{{"epochz", 1}}.get<TrainConfig>());
  const auto partial = nlohmann::json{{"loss", {{"lambda_c", 0.5}}}}.get<TrainConfig>();
  CHECK(partial.loss.lambda_c == 0.5);
  CHECK(partial.loss.lambda_s == LossWeights{}.lambda_s);
}
