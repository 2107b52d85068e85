#include "shadowae/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "shadowae/imageio.hpp"
#include "shadowae/json_util.hpp"
#include "shadowae/kernels.hpp"

namespace shadowae {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (!(injection_probability >= 0 && injection_probability <= 1)) {
    throw ConfigError("train: injection_probability must lie in [0, 1]");
  }
  if (init_gain && !(*init_gain > 0.0)) throw ConfigError("train: init_gain must be > 0");
  loss.validate();
}

std::size_t steps_per_epoch(std::size_t n_images, std::size_t batch_size) {
  return (n_images + batch_size - 1) / batch_size;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed, "shuffle", epoch);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<ShadowMask> sample_step_masks(const FanGeometry& fan, const SamplingConfig& cfg,
                                          std::size_t width, std::size_t height,
                                          std::size_t count, std::uint64_t seed,
                                          std::uint64_t step, double injection_probability) {
  std::vector<ShadowMask> masks;
  masks.reserve(count);
  for (std::size_t b = 0; b < count; ++b) {
    Rng rng(derive_seed(seed, "injection", step), "sample", b);
    if (rng.uniform() >= injection_probability) {
      masks.emplace_back(width, height);
      continue;
    }
    masks.push_back(rasterize_mask(sample_sectors(fan, rng, cfg), fan, width, height));
  }
  return masks;
}

LossBreakdown train_step(ModelParams& params, const Tensor<float>& batch,
                         const std::vector<ShadowMask>& masks, const LossWeights& w,
                         OptimizerState& opt, double learning_rate, double momentum) {
  const Shape& s = batch.shape();
  if (s.size() != 4 || s[1] != 1) {
    throw std::invalid_argument("train_step: batch must be [N, 1, H, W], got " + shape_str(s));
  }
  const std::size_t n = s[0], plane = s[2] * s[3];
  if (masks.size() != n) {
    throw std::invalid_argument("train_step: need one mask per sample (" + std::to_string(n) +
                                "), got " + std::to_string(masks.size()));
  }
  Tensor<float> x_tilde(s), x_s(s);
  for (std::size_t b = 0; b < n; ++b) {
    if (masks[b].width != s[3] || masks[b].height != s[2]) {
      throw std::invalid_argument("train_step: mask size does not match the batch");
    }
    for (std::size_t i = 0; i < plane; ++i) {
      x_s[b * plane + i] = masks[b].values[i];
      x_tilde[b * plane + i] = batch[b * plane + i] * masks[b].values[i];
    }
  }

  Graph<float> g;
  const Var xt = g.input(std::move(x_tilde));
  const Var xs = g.input(std::move(x_s));
  const ForwardVars fv = forward(g, params, xt);
  const LossVars lv = loss_total(g, xt, xs, fv.shadow, fv.content, fv.recon, w);
  const LossBreakdown out = breakdown(g, lv, w);
  if (!out.finite() || !std::isfinite(g.value(lv.total)[0])) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << opt.step + 1 << ": l_ae=" << out.l_ae << " l_s=" << out.l_s
        << " l_sreg=" << out.l_sreg << " l_c=" << out.l_c << " total=" << out.total;
    throw NonFiniteLoss(msg.str());
  }
  g.backward(lv.total);

  const auto lr = static_cast<float>(learning_rate);
  const auto mu = static_cast<float>(momentum);
  std::size_t idx = 0;
  params.for_each([&](const std::string& name, Tensor<float>& p) {
    const Var leaf = fv.params[idx++];
    auto [it, inserted] = opt.velocity.try_emplace(name, p.shape());
    Tensor<float>& v = it->second;
    if (g.has_grad(leaf)) {
      const Tensor<float> grad = g.grad(leaf);
      kernels::momentum_step(p.size(), lr, mu, grad.storage().data(), v.storage().data(),
                             p.storage().data());
    } else {
      const std::vector<float> zeros(p.size(), 0.0f);
      kernels::momentum_step(p.size(), lr, mu, zeros.data(), v.storage().data(), p.storage().data());
    }
  });
  ++opt.step;
  return out;
}

std::vector<Tensor<float>> load_training_images(const CorpusManifest& corpus) {
  std::vector<Tensor<float>> images;
  for (const CorpusEntry* e : corpus.with_role("train")) images.push_back(imageio::load(corpus.resolve(e->image_path)));
  if (images.empty()) throw std::runtime_error("train: corpus has no training images");
  return images;
}

namespace {

std::string csv_row(std::uint64_t step, std::uint64_t epoch, const LossBreakdown& b) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%llu,%llu,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                static_cast<unsigned long long>(step), static_cast<unsigned long long>(epoch),
                b.l_ae, b.l_s, b.l_sreg, b.l_c, b.total);
  return buf;
}

std::string ckpt_name(std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%06llu.shdw", static_cast<unsigned long long>(step));
  return buf;
}

}  // namespace

FitResult fit(const TrainConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();
  // Corpus problems surface before any training step.
  const CorpusManifest corpus = load_manifest(cfg.corpus);
  const std::vector<Tensor<float>> images = load_training_images(corpus);
  const std::size_t h = corpus.spec.height, w = corpus.spec.width;
  const FanGeometry fan = corpus.spec.fan();
  (void)cfg.shadow.resolve(fan);

  ArchConfig arch;
  arch.height = h;
  arch.width = w;
  arch.enc_channels = cfg.enc_channels;
  arch.validate();

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream echo(cfg.out_dir / "config.json");
    echo << nlohmann::json(cfg).dump(2) << "\n";
  }

  Checkpoint state;
  OptimizerState opt;
  if (cfg.resume) {
    state = load_checkpoint(*cfg.resume);
    if (!(state.params.arch == arch)) {
      throw ConfigError("train: resume checkpoint architecture does not match the config");
    }
    opt.velocity = std::move(state.velocity);
    opt.step = state.step;
  } else {
    Rng init_rng(cfg.seed, "init");
    state.params = init_params(arch, init_rng, cfg.init_gain.value_or(he_gain(arch.slope)));
  }
  state.meta = {{"train_config", cfg}};
  ModelParams& params = state.params;

  const std::size_t spe = steps_per_epoch(images.size(), cfg.batch_size);
  const std::uint64_t total_steps = static_cast<std::uint64_t>(cfg.epochs) * spe;

  FitResult result;
  result.log = cfg.out_dir / "train_log.csv";
  const bool append = cfg.resume && fs::exists(result.log) && opt.step > 0;
  std::ofstream log(result.log, append ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("train: cannot write " + result.log.string());
  if (!append) log << "step,epoch,l_ae,l_s,l_sreg,l_c,total\n";

  const std::size_t plane = h * w;
  std::vector<std::size_t> order;
  std::uint64_t order_epoch = ~std::uint64_t{0};
  while (opt.step < total_steps) {
    const std::uint64_t epoch = opt.step / spe;
    const std::size_t within = static_cast<std::size_t>(opt.step % spe);
    if (epoch != order_epoch) {
      order = epoch_order(images.size(), cfg.seed, epoch);
      order_epoch = epoch;
    }
    const std::size_t begin = within * cfg.batch_size;
    const std::size_t count = std::min(cfg.batch_size, images.size() - begin);
    Tensor<float> batch(Shape{count, 1, h, w});
    for (std::size_t b = 0; b < count; ++b) {
      const auto& img = images[order[begin + b]].storage();
      std::copy(img.begin(), img.end(), batch.storage().begin() + static_cast<std::ptrdiff_t>(b * plane));
    }
    const auto masks = sample_step_masks(fan, cfg.shadow, w, h, count, cfg.seed, opt.step,
                                         cfg.injection_probability);
    const LossBreakdown b = train_step(params, batch, masks, cfg.loss, opt, cfg.learning_rate, cfg.momentum);
    result.history.push_back(b);
    log << csv_row(opt.step, epoch, b);
    if (cfg.checkpoint_every > 0 && opt.step % cfg.checkpoint_every == 0) {
      log.flush();
      state.step = opt.step;
      state.velocity = opt.velocity;
      save_checkpoint(state, cfg.out_dir / ckpt_name(opt.step));
    }
  }
  log.flush();
  state.step = opt.step;
  state.velocity = opt.velocity;
  result.checkpoint = cfg.out_dir / "final.shdw";
  save_checkpoint(state, result.checkpoint);
  result.steps = opt.step;
  return result;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"momentum", c.momentum},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every},
       {"injection_probability", c.injection_probability},
       {"loss", c.loss},
       {"shadow", c.shadow},
       {"enc_channels", c.enc_channels},
       {"init_gain", c.init_gain ? nlohmann::json(*c.init_gain) : nlohmann::json(nullptr)},
       {"corpus", c.corpus.generic_string()},
       {"out_dir", c.out_dir.generic_string()}};
  if (c.resume) j["resume"] = c.resume->generic_string();
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  check_keys(j,
             {"epochs", "batch_size", "learning_rate", "momentum", "seed", "checkpoint_every",
              "injection_probability", "loss", "shadow", "enc_channels", "init_gain", "corpus",
              "out_dir", "resume"},
             "train config");
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "momentum", c.momentum);
  read_opt(j, "seed", c.seed);
  read_opt(j, "checkpoint_every", c.checkpoint_every);
  read_opt(j, "injection_probability", c.injection_probability);
  if (j.contains("loss")) {
    // Partial overrides keep the remaining defaults.
    nlohmann::json merged = c.loss;
    merged.update(j.at("loss"));
    check_keys(j.at("loss"), {"lambda_ae", "lambda_s", "lambda_sreg", "lambda_c", "alpha", "beta", "eps"},
               "loss weights");
    c.loss = merged.get<LossWeights>();
  }
  if (j.contains("shadow")) {
    nlohmann::json merged = c.shadow;
    merged.update(j.at("shadow"));
    c.shadow = merged.get<SamplingConfig>();
  }
  read_opt(j, "enc_channels", c.enc_channels);
  if (j.contains("init_gain")) {
    if (j.at("init_gain").is_null()) c.init_gain.reset();
    else c.init_gain = j.at("init_gain").get<double>();
  }
  if (j.contains("corpus")) c.corpus = j.at("corpus").get<std::string>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("resume")) {
    if (j.at("resume").is_null()) c.resume.reset();
    else c.resume = j.at("resume").get<std::string>();
  }
}

}  // namespace shadowae
