#include "shadowae/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "shadowae/imageio.hpp"
#include "shadowae/json_util.hpp"
#include "shadowae/kernels.hpp"
#include "shadowae/model.hpp"

namespace shadowae::cli {
namespace fs = std::filesystem;

namespace {

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json read_ordered_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid file " + path.string());
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void echo_config(const fs::path& dir, const nlohmann::json& cfg) {
  write_text(dir / "config.json", cfg.dump(2) + "\n");
}

void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string(what) + " is required");
}

struct EvalData {
  std::vector<Tensor<float>> images;
  std::vector<BinaryMask> truths;
  std::vector<std::optional<BinaryMask>> cavities;
};

EvalData load_eval_data(const CorpusManifest& corpus) {
  EvalData d;
  for (const CorpusEntry* e : corpus.with_role("eval")) {
    if (!e->truth_path) throw imageio::ImageError("eval entry " + e->image_path.string() + " has no truth mask");
    d.images.push_back(imageio::load(corpus.resolve(e->image_path)));
    d.truths.push_back(imageio::to_mask(imageio::read_gray(corpus.resolve(*e->truth_path))));
    if (e->cavity_path) {
      d.cavities.push_back(imageio::to_mask(imageio::read_gray(corpus.resolve(*e->cavity_path))));
    } else {
      d.cavities.emplace_back();
    }
  }
  if (d.images.empty()) throw imageio::ImageError("corpus has no eval images");
  return d;
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s_%05zu.png", prefix, i);
  return buf;
}

std::vector<std::string> split_path(const std::string& key) {
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '/');) {
    if (part.empty()) throw ConfigError("sweep grid: malformed key \"" + key + "\"");
    parts.push_back(part);
  }
  if (parts.empty()) throw ConfigError("sweep grid: empty key");
  return parts;
}

}  // namespace

std::vector<double> fine_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 99; ++i) g.push_back(i / 100.0);
  return g;
}

void run_synth(const SynthConfig& cfg) {
  require_path(cfg.out_dir, "synth: --out");
  build_corpus(cfg.spec, cfg.n_train, cfg.n_eval, cfg.seed, cfg.out_dir);
  echo_config(cfg.out_dir, cfg);
}

FitResult run_train(const TrainConfig& cfg) {
  require_path(cfg.corpus, "train: --corpus");
  require_path(cfg.out_dir, "train: --out");
  return fit(cfg);
}

EvalOutcome run_eval(const EvalConfig& cfg) {
  require_path(cfg.checkpoint, "eval: --checkpoint");
  require_path(cfg.corpus, "eval: --corpus");
  if (cfg.tau && !(*cfg.tau > 0.0 && *cfg.tau < 1.0)) throw ConfigError("eval: tau must lie in (0, 1)");
  if (!cfg.tau && cfg.tau_grid.empty()) throw ConfigError("eval: tau_grid must not be empty");
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
  const CorpusManifest corpus = load_manifest(cfg.corpus);
  if (ckpt.params.arch.height != corpus.spec.height || ckpt.params.arch.width != corpus.spec.width) {
    throw ConfigError("eval: checkpoint image size does not match the corpus");
  }
  const EvalData data = load_eval_data(corpus);
  const FanGeometry fan = corpus.spec.fan();

  std::vector<Tensor<float>> preds;
  preds.reserve(data.images.size());
  for (const auto& img : data.images) preds.push_back(infer_shadow(ckpt.params, img));

  EvalOutcome o;
  double tau = 0.0;
  if (cfg.tau) {
    tau = *cfg.tau;
  } else {
    o.tau_selection = select_threshold(preds, data.truths, cfg.tau_grid);
    tau = o.tau_selection->tau;
  }
  std::vector<BinaryMask> masks;
  for (const auto& p : preds) masks.push_back(binarize(p, tau));
  o.proposed = evaluate_masks(masks, data.truths, tau, "proposed");

  std::optional<double> t_base = cfg.baseline_threshold;
  if (!t_base && cfg.baseline_select) {
    const auto grid = cfg.baseline_grid.empty() ? fine_grid() : cfg.baseline_grid;
    o.baseline_selection = select_baseline_threshold(data.images, data.truths, fan, grid);
    t_base = o.baseline_selection->tau;
  }
  if (t_base) {
    std::vector<BinaryMask> base;
    for (const auto& img : data.images) base.push_back(threshold_baseline(img, *t_base, fan));
    o.baseline = evaluate_masks(base, data.truths, *t_base, "threshold");
  }

  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto& cav = data.cavities[i];
    o.cavity_false_positives.push_back(cav ? cavity_false_positives(masks[i], data.truths[i], *cav) : 0);
    o.cavity_pixels.push_back(cav ? cav->count() : 0);
  }

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    echo_config(cfg.out_dir, cfg);
    write_text(cfg.out_dir / "report.json", outcome_json(o).dump(2) + "\n");
    write_text(cfg.out_dir / "report.csv", outcome_csv(o));
    const std::size_t n_overlay = std::min(cfg.overlays, masks.size());
    if (n_overlay > 0) fs::create_directories(cfg.out_dir / "overlays");
    for (std::size_t i = 0; i < n_overlay; ++i) {
      const BinaryMask* cav = data.cavities[i] ? &*data.cavities[i] : nullptr;
      imageio::write_rgb_png(make_overlay(data.images[i], masks[i], &data.truths[i], cav),
                             cfg.out_dir / "overlays" / numbered("overlay", i));
    }
  }
  return o;
}

void run_infer(const InferConfig& cfg) {
  require_path(cfg.checkpoint, "infer: --checkpoint");
  require_path(cfg.image, "infer: --image");
  require_path(cfg.out_dir, "infer: --out");
  if (!(cfg.tau > 0.0 && cfg.tau < 1.0)) throw ConfigError("infer: tau must lie in (0, 1)");
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
  const Tensor<float> x = imageio::load(cfg.image);
  if (x.dim(2) != ckpt.params.arch.height || x.dim(3) != ckpt.params.arch.width) {
    throw ConfigError("infer: image is " + std::to_string(x.dim(3)) + "x" + std::to_string(x.dim(2)) +
                      ", checkpoint expects " + std::to_string(ckpt.params.arch.width) + "x" +
                      std::to_string(ckpt.params.arch.height));
  }
  const Tensor<float> shadow = infer_shadow(ckpt.params, x);
  fs::create_directories(cfg.out_dir);
  echo_config(cfg.out_dir, cfg);
  imageio::save(shadow, cfg.out_dir / "shadow.png");
  imageio::write_rgb_png(make_overlay(x, binarize(shadow, cfg.tau)), cfg.out_dir / "overlay.png");
}

std::vector<SweepRow> run_sweep(const TrainConfig& base, const nlohmann::ordered_json& grid,
                                const EvalConfig& eval_base, const fs::path& out_dir) {
  require_path(out_dir, "sweep: --out");
  if (!grid.is_object() || grid.empty()) throw ConfigError("sweep grid: expected a non-empty JSON object");
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
  for (const auto& [key, values] : grid.items()) {
    if (!values.is_array() || values.empty()) {
      throw ConfigError("sweep grid: \"" + key + "\" must map to a non-empty array");
    }
    split_path(key);
    std::vector<nlohmann::json> vals;
    for (const auto& v : values) vals.push_back(nlohmann::json::parse(v.dump()));
    axes.emplace_back(key, std::move(vals));
  }

  // Cartesian product in row-major order over the grid's key order; every
  // point is validated before any training starts.
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.second.size();
  std::vector<std::pair<TrainConfig, nlohmann::ordered_json>> points;
  for (std::size_t idx = 0; idx < total; ++idx) {
    nlohmann::json cfg = base;
    nlohmann::ordered_json overrides = nlohmann::ordered_json::object();
    std::size_t rem = idx;
    std::vector<std::size_t> digits(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
      digits[a] = rem % axes[a].second.size();
      rem /= axes[a].second.size();
    }
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& [key, vals] = axes[a];
      nlohmann::json* node = &cfg;
      const auto parts = split_path(key);
      for (std::size_t p = 0; p + 1 < parts.size(); ++p) node = &(*node)[parts[p]];
      (*node)[parts.back()] = vals[digits[a]];
      overrides[key] = nlohmann::ordered_json::parse(vals[digits[a]].dump());
    }
    TrainConfig tc = cfg.get<TrainConfig>();
    char name[32];
    std::snprintf(name, sizeof(name), "run_%03zu", idx);
    tc.out_dir = out_dir / name;
    tc.resume.reset();
    tc.validate();
    points.emplace_back(std::move(tc), std::move(overrides));
  }

  fs::create_directories(out_dir);
  std::vector<SweepRow> rows;
  for (std::size_t idx = 0; idx < points.size(); ++idx) {
    const auto& [tc, overrides] = points[idx];
    const FitResult fr = run_train(tc);
    EvalConfig ec = eval_base;
    ec.checkpoint = fr.checkpoint;
    ec.corpus = tc.corpus;
    ec.out_dir = tc.out_dir / "eval";
    const EvalOutcome eo = run_eval(ec);
    rows.push_back({idx, overrides, eo.proposed.threshold, eo.proposed.iou, eo.proposed.dice});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.iou.mean > b.iou.mean; });

  std::ostringstream csv;
  csv << "rank,run";
  for (const auto& a : axes) csv << "," << a.first;
  csv << ",tau,iou_mean,iou_std,dice_mean,dice_std\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    csv << r + 1 << "," << rows[r].run;
    for (const auto& a : axes) csv << "," << rows[r].overrides[a.first].dump();
    char buf[160];
    std::snprintf(buf, sizeof(buf), ",%.3f,%.6f,%.6f,%.6f,%.6f\n", rows[r].tau, rows[r].iou.mean,
                  rows[r].iou.std, rows[r].dice.mean, rows[r].dice.std);
    csv << buf;
  }
  write_text(out_dir / "sweep.csv", csv.str());
  nlohmann::ordered_json echo;
  echo["train"] = nlohmann::ordered_json::parse(nlohmann::json(base).dump());
  echo["eval"] = nlohmann::ordered_json::parse(nlohmann::json(eval_base).dump());
  echo["grid"] = grid;
  write_text(out_dir / "config.json", echo.dump(2) + "\n");
  return rows;
}

nlohmann::json outcome_json(const EvalOutcome& o) {
  nlohmann::json j;
  j["proposed"] = report_json(o.proposed);
  auto curve_json = [](const ThresholdChoice& c) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& [t, m] : c.curve) curve.push_back({{"tau", t}, {"iou_mean", m}});
    return nlohmann::json{{"selected", c.tau}, {"iou_mean", c.mean_iou}, {"curve", curve}};
  };
  if (o.tau_selection) j["tau_selection"] = curve_json(*o.tau_selection);
  if (o.baseline) j["baseline"] = report_json(*o.baseline);
  if (o.baseline_selection) j["baseline_selection"] = curve_json(*o.baseline_selection);

  nlohmann::json flagged = nlohmann::json::array();
  std::size_t total = 0, images = 0;
  for (std::size_t i = 0; i < o.cavity_false_positives.size(); ++i) {
    const std::size_t fp = o.cavity_false_positives[i];
    total += fp;
    if (fp == 0) continue;
    ++images;
    flagged.push_back({{"image", i}, {"cavity_pixels", o.cavity_pixels[i]}, {"predicted_shadow", fp}});
  }
  j["cavity_false_positives"] = {{"images_flagged", images}, {"pixels", total}, {"flagged", flagged}};
  return j;
}

std::string outcome_csv(const EvalOutcome& o) {
  std::vector<EvalReport> rows{o.proposed};
  if (o.baseline) rows.push_back(*o.baseline);
  return report_csv(rows);
}

// Config JSON --------------------------------------------------------------------

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = {{"spec", c.spec}, {"train", c.n_train}, {"eval", c.n_eval}, {"seed", c.seed},
       {"out", c.out_dir.generic_string()}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  check_keys(j, {"spec", "train", "eval", "seed", "out"}, "synth config");
  if (j.contains("spec")) c.spec = j.at("spec").get<PhantomSpec>();
  read_opt(j, "train", c.n_train);
  read_opt(j, "eval", c.n_eval);
  read_opt(j, "seed", c.seed);
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
}

void to_json(nlohmann::json& j, const EvalConfig& c) {
  j = {{"checkpoint", c.checkpoint.generic_string()},
       {"corpus", c.corpus.generic_string()},
       {"out", c.out_dir.generic_string()},
       {"tau", c.tau ? nlohmann::json(*c.tau) : nlohmann::json(nullptr)},
       {"tau_grid", c.tau_grid},
       {"baseline_threshold",
        c.baseline_threshold ? nlohmann::json(*c.baseline_threshold) : nlohmann::json(nullptr)},
       {"baseline_select", c.baseline_select},
       {"baseline_grid", c.baseline_grid},
       {"overlays", c.overlays}};
}

void from_json(const nlohmann::json& j, EvalConfig& c) {
  check_keys(j,
             {"checkpoint", "corpus", "out", "tau", "tau_grid", "baseline_threshold",
              "baseline_select", "baseline_grid", "overlays"},
             "eval config");
  if (j.contains("checkpoint")) c.checkpoint = j.at("checkpoint").get<std::string>();
  if (j.contains("corpus")) c.corpus = j.at("corpus").get<std::string>();
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
  if (j.contains("tau")) {
    if (j.at("tau").is_null()) c.tau.reset();
    else c.tau = j.at("tau").get<double>();
  }
  read_opt(j, "tau_grid", c.tau_grid);
  if (j.contains("baseline_threshold")) {
    if (j.at("baseline_threshold").is_null()) c.baseline_threshold.reset();
    else c.baseline_threshold = j.at("baseline_threshold").get<double>();
  }
  read_opt(j, "baseline_select", c.baseline_select);
  read_opt(j, "baseline_grid", c.baseline_grid);
  read_opt(j, "overlays", c.overlays);
}

void to_json(nlohmann::json& j, const InferConfig& c) {
  j = {{"checkpoint", c.checkpoint.generic_string()},
       {"image", c.image.generic_string()},
       {"out", c.out_dir.generic_string()},
       {"tau", c.tau}};
}

void from_json(const nlohmann::json& j, InferConfig& c) {
  check_keys(j, {"checkpoint", "image", "out", "tau"}, "infer config");
  if (j.contains("checkpoint")) c.checkpoint = j.at("checkpoint").get<std::string>();
  if (j.contains("image")) c.image = j.at("image").get<std::string>();
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
  read_opt(j, "tau", c.tau);
}

std::string version_string() {
  std::ostringstream s;
  s << "shadowae " << SHADOWAE_VERSION << "\n"
    << "checkpoint format " << kCheckpointVersion << "\n"
    << "corpus manifest " << CorpusManifest::kVersion << "\n"
    << "kernels " << kernels::backend_name(kernels::active_backend()) << "\n";
  return s.str();
}

// Argument parsing -------------------------------------------------------------------

namespace {

// Flag values are only applied when the flag was given, so they override the
// JSON config without clobbering it with defaults.
template <typename T>
struct Flag {
  CLI::Option* opt = nullptr;
  T value{};
  template <typename U>
  void apply(U& target) const {
    if (opt && opt->count() > 0) target = value;
  }
};

template <typename T>
Flag<T>& add(CLI::App* app, Flag<T>& f, const std::string& name, const std::string& help) {
  f.opt = app->add_option(name, f.value, help);
  return f;
}

template <typename Cfg>
Cfg load_base(const std::string& config_path) {
  Cfg c;
  if (!config_path.empty()) c = read_json_file(config_path).get<Cfg>();
  return c;
}

TrainConfig load_train_base(const std::string& config_path) {
  TrainConfig c;
  if (!config_path.empty()) from_json(read_json_file(config_path), c);
  return c;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised acoustic shadow detection"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print artifact and file-format versions");

  // synth
  CLI::App* synth = app.add_subcommand("synth", "Generate a phantom corpus");
  std::string synth_config, synth_spec;
  Flag<std::size_t> s_train, s_eval;
  Flag<std::uint64_t> s_seed;
  Flag<std::string> s_out;
  synth->add_option("--config", synth_config, "JSON synth config");
  synth->add_option("--spec", synth_spec, "JSON phantom spec");
  add(synth, s_train, "--train", "Number of training images");
  add(synth, s_eval, "--eval", "Number of evaluation images");
  add(synth, s_seed, "--seed", "Corpus seed");
  add(synth, s_out, "--out", "Output directory");

  // train
  CLI::App* train = app.add_subcommand("train", "Train a model on a corpus");
  std::string train_config;
  Flag<std::size_t> t_epochs, t_batch, t_ckpt_every;
  Flag<double> t_lr, t_mom, t_inject, t_gain, t_lambda_ae, t_lambda_s, t_lambda_sreg, t_lambda_c;
  Flag<std::uint64_t> t_seed;
  Flag<std::string> t_corpus, t_out, t_resume;
  train->add_option("--config", train_config, "JSON train config");
  add(train, t_corpus, "--corpus", "Corpus directory or manifest");
  add(train, t_out, "--out", "Output directory");
  add(train, t_epochs, "--epochs", "Epochs");
  add(train, t_batch, "--batch-size", "Batch size");
  add(train, t_lr, "--lr", "Learning rate");
  add(train, t_mom, "--momentum", "Momentum");
  add(train, t_seed, "--seed", "Seed for init, shuffle and injection streams");
  add(train, t_ckpt_every, "--checkpoint-every", "Checkpoint interval in steps (0 = final only)");
  add(train, t_inject, "--injection-probability", "Probability a sample gets a synthetic shadow");
  add(train, t_gain, "--init-gain", "Init bound multiplier on sqrt(1/fan_in) (default: He gain)");
  add(train, t_lambda_ae, "--lambda-ae", "Weight of the reconstruction loss");
  add(train, t_lambda_s, "--lambda-s", "Weight of the shadow loss");
  add(train, t_lambda_sreg, "--lambda-sreg", "Weight of the shadow regulariser");
  add(train, t_lambda_c, "--lambda-c", "Weight of the content prior");
  add(train, t_resume, "--resume", "Checkpoint to resume from");

  // eval
  CLI::App* evalc = app.add_subcommand("eval", "Score a checkpoint on the corpus eval split");
  std::string eval_config;
  Flag<std::string> e_ckpt, e_corpus, e_out;
  Flag<double> e_tau, e_base;
  Flag<std::size_t> e_overlays;
  bool e_select = false, e_base_select = false;
  evalc->add_option("--config", eval_config, "JSON eval config");
  add(evalc, e_ckpt, "--checkpoint", "Checkpoint file");
  add(evalc, e_corpus, "--corpus", "Corpus directory or manifest");
  add(evalc, e_out, "--out", "Output directory");
  add(evalc, e_tau, "--tau", "Fixed binarisation threshold");
  CLI::Option* select_opt = evalc->add_flag("--select-tau", e_select, "Select tau over the tau grid");
  add(evalc, e_base, "--baseline-threshold", "Add the intensity-threshold baseline at t");
  CLI::Option* base_select_opt =
      evalc->add_flag("--baseline-select", e_base_select, "Add the baseline with grid-selected t");
  add(evalc, e_overlays, "--overlays", "Write overlay PNGs for the first N eval images");
  e_tau.opt->excludes(select_opt);

  // infer
  CLI::App* infer = app.add_subcommand("infer", "Predict the shadow map of one image");
  std::string infer_config;
  Flag<std::string> i_ckpt, i_image, i_out;
  Flag<double> i_tau;
  infer->add_option("--config", infer_config, "JSON infer config");
  add(infer, i_ckpt, "--checkpoint", "Checkpoint file");
  add(infer, i_image, "--image", "Input PNG or PGM");
  add(infer, i_out, "--out", "Output directory");
  add(infer, i_tau, "--tau", "Threshold for the overlay");

  // sweep
  CLI::App* sweep = app.add_subcommand("sweep", "Train and score every point of a parameter grid");
  std::string sweep_config, sweep_grid, sweep_eval_config;
  Flag<std::string> w_out, w_corpus;
  sweep->add_option("--config", sweep_config, "JSON train config used as the base")->required();
  sweep->add_option("--grid", sweep_grid, "JSON object: config path -> list of values")->required();
  sweep->add_option("--eval-config", sweep_eval_config, "JSON eval config used for every point");
  add(sweep, w_corpus, "--corpus", "Corpus directory (overrides the config)");
  add(sweep, w_out, "--out", "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (show_version) {
    out << version_string();
    return kExitOk;
  }

  try {
    if (*synth) {
      SynthConfig c = load_base<SynthConfig>(synth_config);
      if (!synth_spec.empty()) c.spec = read_json_file(synth_spec).get<PhantomSpec>();
      s_train.apply(c.n_train);
      s_eval.apply(c.n_eval);
      s_seed.apply(c.seed);
      s_out.apply(c.out_dir);
      run_synth(c);
      out << "wrote " << c.n_train + c.n_eval << " images to " << c.out_dir.string() << "\n";
    } else if (*train) {
      TrainConfig c = load_train_base(train_config);
      t_corpus.apply(c.corpus);
      t_out.apply(c.out_dir);
      t_epochs.apply(c.epochs);
      t_batch.apply(c.batch_size);
      t_lr.apply(c.learning_rate);
      t_mom.apply(c.momentum);
      t_seed.apply(c.seed);
      t_ckpt_every.apply(c.checkpoint_every);
      t_inject.apply(c.injection_probability);
      if (t_gain.opt->count() > 0) c.init_gain = t_gain.value;
      t_lambda_ae.apply(c.loss.lambda_ae);
      t_lambda_s.apply(c.loss.lambda_s);
      t_lambda_sreg.apply(c.loss.lambda_sreg);
      t_lambda_c.apply(c.loss.lambda_c);
      if (t_resume.opt->count() > 0) c.resume = t_resume.value;
      const FitResult r = run_train(c);
      out << "trained " << r.steps << " steps; checkpoint " << r.checkpoint.string() << "\n";
    } else if (*evalc) {
      EvalConfig c = load_base<EvalConfig>(eval_config);
      e_ckpt.apply(c.checkpoint);
      e_corpus.apply(c.corpus);
      e_out.apply(c.out_dir);
      if (e_tau.opt->count() > 0) c.tau = e_tau.value;
      if (select_opt->count() > 0) c.tau.reset();
      if (e_base.opt->count() > 0) c.baseline_threshold = e_base.value;
      if (base_select_opt->count() > 0) c.baseline_select = true;
      e_overlays.apply(c.overlays);
      require_path(c.out_dir, "eval: --out");
      const EvalOutcome o = run_eval(c);
      out << outcome_csv(o);
    } else if (*infer) {
      InferConfig c = load_base<InferConfig>(infer_config);
      i_ckpt.apply(c.checkpoint);
      i_image.apply(c.image);
      i_out.apply(c.out_dir);
      i_tau.apply(c.tau);
      run_infer(c);
      out << "wrote " << (c.out_dir / "shadow.png").string() << "\n";
    } else if (*sweep) {
      TrainConfig base = load_train_base(sweep_config);
      w_corpus.apply(base.corpus);
      EvalConfig ec = load_base<EvalConfig>(sweep_eval_config);
      const std::string dir = w_out.opt->count() > 0 ? w_out.value : std::string("sweep");
      const auto rows = run_sweep(base, read_ordered_json_file(sweep_grid), ec, dir);
      out << "best run " << rows.front().run << " iou " << rows.front().iou.mean << "\n";
    } else {
      err << app.help();
      return kExitUsage;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: invalid configuration: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace shadowae::cli
