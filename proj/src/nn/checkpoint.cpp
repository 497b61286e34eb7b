#include "atvs/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "atvs/errors.hpp"

namespace atvs::nn {

namespace {

constexpr char kMagic[8] = {'A', 'T', 'V', 'S', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open checkpoint " + path.string());
  }

  void read(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw ParseError(path_, 0, std::string("truncated checkpoint while reading ") + what);
  }

  template <typename T>
  T get(const char* what) {
    T v;
    read(&v, sizeof(T), what);
    return v;
  }

  std::string get_string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    if (n > (1u << 26)) throw ParseError(path_, 0, std::string("implausible length for ") + what);
    std::string s(n, '\0');
    read(s.data(), n, what);
    return s;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace

Checkpoint make_checkpoint(const torch::nn::Module& module, const NetworkConfig& config, int stage) {
  Checkpoint ckpt;
  ckpt.stage = stage;
  ckpt.config = config;
  for (const auto& item : module.named_parameters(true))
    ckpt.parameters.emplace_back(item.key(),
                                 item.value().detach().to(torch::kCPU, torch::kFloat32).contiguous().clone());
  return ckpt;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.stage));
  put_string(out, nlohmann::json(checkpoint.config).dump());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.parameters.size()));
  for (const auto& [name, tensor] : checkpoint.parameters) {
    const auto t = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    for (auto s : t.sizes()) put<std::int64_t>(out, s);
    out.write(reinterpret_cast<const char*>(t.data_ptr<float>()),
              static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader in(path);
  char magic[8];
  in.read(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw ParseError(path, 0, "not a checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw ParseError(path, 0, "unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.stage = static_cast<int>(in.get<std::uint32_t>("stage"));
  try {
    ckpt.config = nlohmann::json::parse(in.get_string("config")).get<NetworkConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, std::string("bad network config: ") + e.what());
  }
  const auto count = in.get<std::uint32_t>("parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = in.get_string("parameter name");
    const auto ndim = in.get<std::uint32_t>("rank");
    if (ndim > 8) throw ParseError(path, 0, "implausible rank for " + name);
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) {
      d = in.get<std::int64_t>("shape");
      if (d < 0) throw ParseError(path, 0, "negative dimension for " + name);
    }
    auto t = torch::empty(dims, torch::kFloat32);
    in.read(t.data_ptr<float>(), static_cast<std::size_t>(t.numel()) * sizeof(float), name.c_str());
    ckpt.parameters.emplace_back(std::move(name), std::move(t));
  }
  if (!in.at_end()) throw ParseError(path, 0, "trailing bytes after the last parameter");
  return ckpt;
}

std::vector<std::string> apply_checkpoint(torch::nn::Module& module, const Checkpoint& checkpoint,
                                          const std::string& prefix) {
  auto params = module.named_parameters(true);
  std::unordered_map<std::string, bool> covered;
  torch::NoGradGuard no_grad;
  for (const auto& [name, value] : checkpoint.parameters) {
    auto* p = params.find(prefix + name);
    if (p == nullptr)
      throw std::invalid_argument("checkpoint entry '" + name + "' has no matching parameter");
    if (p->sizes() != value.sizes())
      throw std::invalid_argument("checkpoint entry '" + name + "' has shape " +
                                  c10::str(value.sizes()) + ", parameter has " +
                                  c10::str(p->sizes()));
    p->copy_(value);
    covered[prefix + name] = true;
  }
  std::vector<std::string> missing;
  for (const auto& item : params)
    if (!covered.count(item.key())) missing.push_back(item.key());
  return missing;
}

std::uint64_t parameter_hash(const torch::nn::Module& module, const std::string& prefix) {
  // FNV-1a over names and raw bytes.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& item : module.named_parameters(true)) {
    if (item.key().rfind(prefix, 0) != 0) continue;
    const auto t = item.value().detach().to(torch::kCPU).contiguous();
    mix(item.key().data(), item.key().size());
    mix(t.data_ptr(), static_cast<std::size_t>(t.numel()) * t.element_size());
  }
  return h;
}

}  // namespace atvs::nn
