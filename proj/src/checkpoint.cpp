#include <array>
#include <cstring>
#include <fstream>

#include "hycone/trainer.hpp"
#include "json.hpp"

// Checkpoint container, little-endian:
//   "HYCN" | u32 version | u64 json_len + config echo | u64 step
//   | u32 n_params | { str name, u8 rank, u64 dims[rank], f64 data[] } ...
//   | u64 opt_t | u32 n_moments | { str name, tensor m, tensor v } ...
//   | u32 crc32 of everything before it
// Parameter order is fixed (towers layer by layer, then the four scalars),
// so identical states serialize to identical bytes.

namespace hycone::train {

using ordered_json = nlohmann::ordered_json;

namespace {

std::uint32_t crc32(const unsigned char* data, std::size_t len) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xffffffffu;
  for (std::size_t i = 0; i < len; ++i)
    crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

struct Writer {
  std::vector<unsigned char> buf;

  void u8(std::uint8_t v) { buf.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    u64(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
  }
  void tensor(const net::Tensor& t) {
    u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape) u64(d);
    for (double v : t.data) f64(v);
  }
};

struct Reader {
  const std::vector<unsigned char>& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw data_error("checkpoint: truncated");
  }
  std::uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                  buf.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return s;
  }
  net::Tensor tensor() {
    std::uint8_t rank = u8();
    if (rank > 2) throw data_error("checkpoint: tensor rank > 2");
    net::Tensor t;
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      std::uint64_t dim = u64();
      if (dim == 0 || dim > (1u << 24)) throw data_error("checkpoint: bad tensor dim");
      t.shape.push_back(static_cast<std::size_t>(dim));
      numel *= static_cast<std::size_t>(dim);
    }
    t.data.resize(numel);
    for (std::size_t i = 0; i < numel; ++i) t.data[i] = f64();
    return t;
  }
};

constexpr std::uint32_t kVersion = 1;
const char kMagic[4] = {'H', 'Y', 'C', 'N'};

// Fixed serialization order for parameters.
void collect_params(const model::EmbeddingModel& m,
                    std::vector<std::pair<std::string, net::Tensor>>& out) {
  auto tower = [&](const char* name, const net::MlpParams& p) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      out.emplace_back(std::string(name) + ".w" + std::to_string(l), p.weights[l]);
      out.emplace_back(std::string(name) + ".b" + std::to_string(l), p.biases[l]);
    }
  };
  tower("img", m.img);
  tower("txt", m.txt);
  out.emplace_back("scalar.log_tau", net::Tensor::scalar(m.scalars.log_tau));
  out.emplace_back("scalar.log_c_img", net::Tensor::scalar(m.scalars.log_c_img));
  out.emplace_back("scalar.log_c_txt", net::Tensor::scalar(m.scalars.log_c_txt));
  out.emplace_back("scalar.log_kappa", net::Tensor::scalar(m.scalars.log_kappa));
}

TrainConfig config_from_echo(const std::string& text, std::size_t& feature_dim) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw data_error("checkpoint: bad config echo: " + std::string(e.what()));
  }
  TrainConfig cfg;
  try {
    feature_dim = j.at("feature_dim").get<std::size_t>();
    cfg.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    cfg.activation = net::activation_from_name(j.at("activation").get<std::string>());
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.total_steps = j.at("total_steps").get<std::uint64_t>();
    cfg.warmup_steps = j.at("warmup_steps").get<std::uint64_t>();
    cfg.max_lr = j.at("max_lr").get<double>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.eta_inter = j.at("eta_inter").get<double>();
    cfg.eta_intra = j.at("eta_intra").get<double>();
    cfg.boundary_k = j.at("boundary_k").get<double>();
    cfg.exclusive_denominator = j.at("exclusive_denominator").get<bool>();
    for (const auto& [name, on] : j.at("mask").items())
      cfg.mask.set(name, on.get<bool>());
    cfg.tau_init = j.at("tau_init").get<double>();
    cfg.kappa_init = j.at("kappa_init").get<double>();
    cfg.kappa_learnable = j.at("kappa_learnable").get<bool>();
    cfg.adamw.beta1 = j.at("adamw").at("beta1").get<double>();
    cfg.adamw.beta2 = j.at("adamw").at("beta2").get<double>();
    cfg.adamw.eps = j.at("adamw").at("eps").get<double>();
    cfg.adamw.weight_decay = j.at("adamw").at("weight_decay").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.eval_every = j.at("eval_every").get<std::uint64_t>();
    cfg.checkpoint_every = j.at("checkpoint_every").get<std::uint64_t>();
  } catch (const ordered_json::exception& e) {
    throw data_error("checkpoint: config echo missing fields: " + std::string(e.what()));
  }
  return cfg;
}

}  // namespace

void save_checkpoint(const ModelState& state, const TrainConfig& cfg,
                     std::size_t feature_dim, const std::filesystem::path& path) {
  Writer w;
  w.buf.insert(w.buf.end(), kMagic, kMagic + 4);
  w.u32(kVersion);
  w.str(config_echo_json(cfg, feature_dim));
  w.u64(state.step);

  std::vector<std::pair<std::string, net::Tensor>> params;
  collect_params(state.model, params);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    w.str(name);
    w.tensor(tensor);
  }

  w.u64(state.opt.t);
  w.u32(static_cast<std::uint32_t>(state.opt.moments.size()));
  for (const auto& [name, mom] : state.opt.moments) {
    w.str(name);
    w.tensor(mom.m);
    w.tensor(mom.v);
  }

  w.u32(crc32(w.buf.data(), w.buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write checkpoint: " + path.string());
  out.write(reinterpret_cast<const char*>(w.buf.data()),
            static_cast<std::streamsize>(w.buf.size()));
  if (!out) throw io_error("failed writing checkpoint: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12) throw data_error("checkpoint: truncated");

  Reader r{bytes};
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw data_error("checkpoint: bad magic (not a HYCN file)");
  r.pos = 4;
  std::uint32_t version = r.u32();
  if (version != kVersion)
    throw data_error("checkpoint: format version " + std::to_string(version) +
                     " not supported (expected " + std::to_string(kVersion) + ")");
  std::uint32_t stored_crc = 0;
  {
    Reader tail{bytes};
    tail.pos = bytes.size() - 4;
    stored_crc = tail.u32();
  }
  if (crc32(bytes.data(), bytes.size() - 4) != stored_crc)
    throw data_error("checkpoint: checksum mismatch (file corrupt)");

  LoadedCheckpoint out;
  std::string echo = r.str();
  out.cfg = config_from_echo(echo, out.feature_dim);
  out.state.step = r.u64();

  std::uint32_t n_params = r.u32();
  std::map<std::string, net::Tensor> loaded;
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string name = r.str();
    loaded[name] = r.tensor();
  }

  net::EncoderConfig tower;
  tower.input_dim = out.feature_dim;
  tower.hidden_dims = out.cfg.hidden_dims;
  tower.embed_dim = out.cfg.embed_dim;
  tower.activation = out.cfg.activation;
  model::EmbeddingModel& m = out.state.model;
  m.img_cfg = tower;
  m.txt_cfg = tower;
  auto shapes = net::layer_shapes(tower);
  auto take = [&](const std::string& name,
                  const std::vector<std::size_t>& shape) -> net::Tensor {
    auto it = loaded.find(name);
    if (it == loaded.end()) throw data_error("checkpoint: missing parameter " + name);
    if (it->second.shape != shape)
      throw data_error("checkpoint: shape mismatch for " + name);
    return std::move(it->second);
  };
  auto fill_tower = [&](const char* name, net::MlpParams& p) {
    for (std::size_t l = 0; l < shapes.size(); ++l) {
      auto [in_dim, out_dim] = shapes[l];
      p.weights.push_back(
          take(std::string(name) + ".w" + std::to_string(l), {in_dim, out_dim}));
      p.biases.push_back(take(std::string(name) + ".b" + std::to_string(l), {out_dim}));
    }
  };
  fill_tower("img", m.img);
  fill_tower("txt", m.txt);
  m.scalars.log_tau = take("scalar.log_tau", {}).data[0];
  m.scalars.log_c_img = take("scalar.log_c_img", {}).data[0];
  m.scalars.log_c_txt = take("scalar.log_c_txt", {}).data[0];
  m.scalars.log_kappa = take("scalar.log_kappa", {}).data[0];

  out.state.opt.t = r.u64();
  std::uint32_t n_moments = r.u32();
  for (std::uint32_t i = 0; i < n_moments; ++i) {
    std::string name = r.str();
    net::MomentPair mom;
    mom.m = r.tensor();
    mom.v = r.tensor();
    out.state.opt.moments.emplace(std::move(name), std::move(mom));
  }
  if (r.pos != bytes.size() - 4)
    throw data_error("checkpoint: trailing bytes before checksum");
  return out;
}

}  // namespace hycone::train
