#include "shadowae/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "shadowae/json_util.hpp"

namespace shadowae {

void ArchConfig::validate() const {
  if (enc_channels.empty()) throw ConfigError("arch: enc_channels must be non-empty");
  for (auto c : enc_channels)
    if (c == 0) throw ConfigError("arch: channel counts must be positive");
  if (kernel == 0 || stride == 0) throw ConfigError("arch: kernel and stride must be >= 1");
  if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("arch: slope must lie in [0, 1)");
  const std::size_t factor = std::size_t{1} << enc_channels.size();
  if (height == 0 || width == 0 || height % factor != 0 || width % factor != 0) {
    throw ConfigError("arch: input " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be divisible by 2^" + std::to_string(enc_channels.size()));
  }
  // Each layer must halve and each decoder layer double the extent exactly.
  std::size_t h = height, w = width;
  for (std::size_t i = 0; i < enc_channels.size(); ++i) {
    const ConvGeometry g{stride, padding};
    const std::size_t nh = conv_out_extent(h, kernel, g), nw = conv_out_extent(w, kernel, g);
    if (deconv_out_extent(nh, kernel, g) != h || deconv_out_extent(nw, kernel, g) != w) {
      throw ConfigError("arch: kernel/stride/padding do not mirror between encoder and decoder");
    }
    h = nh;
    w = nw;
  }
}

std::size_t ArchConfig::latent_height() const { return height >> enc_channels.size(); }
std::size_t ArchConfig::latent_width() const { return width >> enc_channels.size(); }

template <typename T>
void BasicModelParams<T>::for_each(const std::function<void(const std::string&, Tensor<T>&)>& fn) {
  auto visit = [&](const char* prefix, std::vector<LayerParams<T>>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string base = std::string(prefix) + "." + std::to_string(i) + ".";
      fn(base + "weight", layers[i].weight);
      fn(base + "bias", layers[i].bias);
    }
  };
  visit("encoder", encoder);
  visit("shadow_decoder", shadow_decoder);
  visit("content_decoder", content_decoder);
}

template <typename T>
void BasicModelParams<T>::for_each(
    const std::function<void(const std::string&, const Tensor<T>&)>& fn) const {
  const_cast<BasicModelParams*>(this)->for_each(
      [&](const std::string& name, Tensor<T>& t) { fn(name, t); });
}

template <typename T>
std::size_t BasicModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Tensor<T>& t) { n += t.size(); });
  return n;
}

template struct BasicModelParams<float>;
template struct BasicModelParams<double>;

double he_gain(double slope) { return std::sqrt(6.0 / (1.0 + slope * slope)); }

ModelParams init_params(const ArchConfig& arch, Rng& rng, double gain) {
  arch.validate();
  if (!(gain > 0.0) || !std::isfinite(gain)) throw std::invalid_argument("init_params: gain must be positive");
  ModelParams p{arch, {}, {}, {}};
  const std::size_t k = arch.kernel;
  auto uniform_tensor = [&](Shape shape, double fan_in) {
    const double b = gain * std::sqrt(1.0 / fan_in);
    Tensor<float> t(std::move(shape));
    for (auto& v : t.storage()) v = static_cast<float>(rng.uniform(-b, b));
    return t;
  };
  std::size_t in_c = 1;
  for (auto out_c : arch.enc_channels) {
    p.encoder.push_back({uniform_tensor({out_c, in_c, k, k}, static_cast<double>(in_c * k * k)),
                         Tensor<float>(Shape{out_c})});
    in_c = out_c;
  }
  // Decoders mirror the encoder: reversed channels, one output channel.
  std::vector<std::size_t> dec_out(arch.enc_channels.rbegin() + 1, arch.enc_channels.rend());
  dec_out.push_back(1);
  // A transposed convolution output pixel receives in_c * k^2 / stride^2 terms.
  const double overlap = static_cast<double>(k * k) / static_cast<double>(arch.stride * arch.stride);
  for (auto* decoder : {&p.shadow_decoder, &p.content_decoder}) {
    std::size_t c = arch.enc_channels.back();
    for (auto out_c : dec_out) {
      decoder->push_back({uniform_tensor({c, out_c, k, k}, static_cast<double>(c) * overlap),
                          Tensor<float>(Shape{out_c})});
      c = out_c;
    }
  }
  return p;
}

template <typename T>
ForwardVars forward(Graph<T>& g, const BasicModelParams<T>& params, Var x_tilde) {
  const ArchConfig& a = params.arch;
  const Shape& xs = g.shape(x_tilde);
  if (xs.size() != 4 || xs[1] != 1 || xs[2] != a.height || xs[3] != a.width) {
    throw std::invalid_argument("model: expected input [N, 1, " + std::to_string(a.height) + ", " +
                                std::to_string(a.width) + "], got " + shape_str(xs));
  }
  ForwardVars out;
  const ConvGeometry geom{a.stride, a.padding};
  const T slope = static_cast<T>(a.slope);
  auto leaf = [&](const Tensor<T>& t) {
    Var v = g.input(t, true);
    out.params.push_back(v);
    return v;
  };

  Var h = x_tilde;
  for (const auto& layer : params.encoder) {
    Var w = leaf(layer.weight);
    Var b = leaf(layer.bias);
    h = leaky_relu(g, conv2d(g, h, w, b, geom), slope);
  }
  out.z = h;

  auto decode = [&](const std::vector<LayerParams<T>>& layers) {
    Var d = out.z;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Var w = leaf(layers[i].weight);
      Var b = leaf(layers[i].bias);
      d = deconv2d(g, d, w, b, geom);
      if (i + 1 < layers.size()) d = leaky_relu(g, d, slope);
    }
    return sigmoid(g, d);
  };
  out.shadow = decode(params.shadow_decoder);
  out.content = decode(params.content_decoder);
  out.recon = hadamard(g, out.shadow, out.content);
  return out;
}

template ForwardVars forward<float>(Graph<float>&, const BasicModelParams<float>&, Var);
template ForwardVars forward<double>(Graph<double>&, const BasicModelParams<double>&, Var);

ForwardOut forward(const ModelParams& params, const Tensor<float>& x_tilde) {
  Graph<float> g;
  const auto v = forward(g, params, g.input(x_tilde));
  return {g.value(v.z), g.value(v.shadow), g.value(v.content), g.value(v.recon)};
}

Tensor<float> infer_shadow(const ModelParams& params, const Tensor<float>& x) {
  return forward(params, x).shadow;
}

// Checkpoints ----------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'H', 'D', 'W'};

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_le(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == EOF) throw std::runtime_error("checkpoint: truncated header");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

void put_floats(std::ostream& out, std::span<const float> data) {
  std::vector<char> buf(data.size() * 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(data[i]);
    for (int b = 0; b < 4; ++b) buf[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void get_floats(const std::vector<char>& blob, std::uint64_t offset, std::span<float> dst) {
  if (offset + dst.size() * 4 > blob.size()) throw std::runtime_error("checkpoint: truncated tensor data");
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data()) + offset;
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[4 * i + b]) << (8 * b);
    dst[i] = std::bit_cast<float>(bits);
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
  ckpt.params.for_each([&](const std::string& name, const Tensor<float>& t) {
    tensors.emplace_back("param." + name, &t);
  });
  for (const auto& [name, t] : ckpt.velocity) tensors.emplace_back("velocity." + name, &t);

  nlohmann::json header;
  header["arch"] = ckpt.params.arch;
  header["step"] = ckpt.step;
  header["meta"] = ckpt.meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
    offset += t->size() * 4;
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : tensors) put_floats(out, t->data());
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: " + path.string() + " is not a checkpoint (bad magic)");
  }
  const auto version = static_cast<std::uint32_t>(get_le(in, 4));
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::uint64_t header_len = get_le(in, 8);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw std::runtime_error("checkpoint: truncated header");
  }
  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Checkpoint ck;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: corrupt header: ") + e.what());
  }
  Rng unused(0);
  ck.params = init_params(header.at("arch").get<ArchConfig>(), unused);
  ck.step = header.at("step").get<std::uint64_t>();
  if (header.contains("meta")) ck.meta = header.at("meta");

  std::map<std::string, std::pair<Shape, std::uint64_t>> directory;
  for (const auto& t : header.at("tensors")) {
    directory[t.at("name").get<std::string>()] = {t.at("shape").get<Shape>(),
                                                  t.at("offset").get<std::uint64_t>()};
  }
  std::size_t used = 0;
  ck.params.for_each([&](const std::string& name, Tensor<float>& t) {
    auto it = directory.find("param." + name);
    if (it == directory.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
    if (it->second.first != t.shape()) {
      throw std::runtime_error("checkpoint: tensor " + name + " has shape " +
                               shape_str(it->second.first) + ", architecture needs " +
                               shape_str(t.shape()));
    }
    get_floats(blob, it->second.second, t.data());
    ++used;
  });
  for (const auto& [name, entry] : directory) {
    if (name.rfind("velocity.", 0) != 0) continue;
    Tensor<float> t(entry.first);
    get_floats(blob, entry.second, t.data());
    ck.velocity.emplace(name.substr(9), std::move(t));
    ++used;
  }
  if (used != directory.size()) throw std::runtime_error("checkpoint: unexpected tensors in directory");
  return ck;
}

void to_json(nlohmann::json& j, const ArchConfig& a) {
  j = {{"height", a.height}, {"width", a.width},     {"enc_channels", a.enc_channels},
       {"kernel", a.kernel}, {"stride", a.stride},   {"padding", a.padding},
       {"slope", a.slope}};
}

void from_json(const nlohmann::json& j, ArchConfig& a) {
  check_keys(j, {"height", "width", "enc_channels", "kernel", "stride", "padding", "slope"}, "arch");
  read_opt(j, "height", a.height);
  read_opt(j, "width", a.width);
  read_opt(j, "enc_channels", a.enc_channels);
  read_opt(j, "kernel", a.kernel);
  read_opt(j, "stride", a.stride);
  read_opt(j, "padding", a.padding);
  read_opt(j, "slope", a.slope);
}

}  // namespace shadowae
