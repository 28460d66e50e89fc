#include "hevs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "hevs/error.hpp"

namespace hevs {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string origin) : bytes_(bytes), origin_(std::move(origin)) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(std::size_t n) {
    require(pos_ + n <= bytes_.size(), ErrorCode::Truncated, origin_ + ": checkpoint truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::uint8_t dtype_code(const torch::Tensor& t) {
  switch (t.scalar_type()) {
    case torch::kFloat: return 0;
    case torch::kDouble: return 1;
    case torch::kLong: return 2;
    default: fail(ErrorCode::Format, "unsupported checkpoint dtype " + std::string(c10::toString(t.scalar_type())));
  }
}

torch::ScalarType dtype_from(std::uint8_t code, const std::string& origin) {
  switch (code) {
    case 0: return torch::kFloat;
    case 1: return torch::kDouble;
    case 2: return torch::kLong;
    default: fail(ErrorCode::Format, origin + ": unknown dtype code " + std::to_string(code));
  }
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& k : v) s += (s.empty() ? "" : ", ") + k;
  return s;
}

}  // namespace

const torch::Tensor& Checkpoint::at(const std::string& key) const {
  auto it = tensors.find(key);
  require(it != tensors.end(), ErrorCode::KeyMismatch, "checkpoint has no key '" + key + "'");
  return it->second;
}

bool is_reserved_key(const std::string& key) {
  return key.rfind("optim.", 0) == 0 || key.rfind("ema.", 0) == 0 || key.rfind("state.", 0) == 0;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::string out = "HCKP";
  put<std::uint32_t>(out, Checkpoint::kVersion);
  put<std::uint64_t>(out, ckpt.config_snapshot.size());
  out += ckpt.config_snapshot;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [key, value] : ckpt.tensors) {
    const auto t = value.detach().cpu().contiguous();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
    out += key;
    put<std::uint8_t>(out, dtype_code(t));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<std::int64_t>(out, d);
    const std::uint64_t nbytes = static_cast<std::uint64_t>(t.numel()) * t.element_size();
    put<std::uint64_t>(out, nbytes);
    out.append(static_cast<const char*>(t.data_ptr()), nbytes);
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(f), ErrorCode::Io, "cannot write " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    require(static_cast<bool>(f), ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  const std::string origin = path.string();
  Reader in(bytes, origin);
  require(std::string(in.take(4), 4) == "HCKP", ErrorCode::Format, origin + ": not a checkpoint");
  const auto version = in.get<std::uint32_t>();
  require(version >= 1 && version <= Checkpoint::kVersion, ErrorCode::Format,
          origin + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto snap_len = in.get<std::uint64_t>();
  ckpt.config_snapshot.assign(in.take(snap_len), snap_len);
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto klen = in.get<std::uint32_t>();
    std::string key(in.take(klen), klen);
    const auto dtype = dtype_from(in.get<std::uint8_t>(), origin);
    const auto ndim = in.get<std::uint32_t>();
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) d = in.get<std::int64_t>();
    const auto nbytes = in.get<std::uint64_t>();
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    require(nbytes == static_cast<std::uint64_t>(t.numel()) * t.element_size(), ErrorCode::Format,
            origin + ": byte length mismatch for '" + key + "'");
    std::memcpy(t.data_ptr(), in.take(nbytes), nbytes);
    ckpt.tensors.emplace(std::move(key), std::move(t));
  }
  require(in.done(), ErrorCode::Format, origin + ": trailing bytes after last entry");
  return ckpt;
}

void add_module_state(Checkpoint& ckpt, const torch::nn::Module& module, const std::string& prefix) {
  for (const auto& p : module.named_parameters()) ckpt.tensors[prefix + p.key()] = p.value().detach().clone();
  for (const auto& b : module.named_buffers()) ckpt.tensors[prefix + b.key()] = b.value().detach().clone();
}

std::string LoadReport::describe() const {
  std::ostringstream os;
  os << "loaded " << loaded << " tensors";
  if (!missing.empty()) os << "; missing keys: " << join(missing);
  if (!unexpected.empty()) os << "; unexpected keys: " << join(unexpected);
  if (!mismatched.empty()) os << "; shape-mismatched keys: " << join(mismatched);
  return os.str();
}

LoadReport load_module_state(torch::nn::Module& module, const Checkpoint& ckpt, bool strict,
                             const std::string& prefix) {
  LoadReport report;
  std::set<std::string> seen;
  torch::NoGradGuard no_grad;
  auto visit = [&](const std::string& name, torch::Tensor& target) {
    const std::string key = prefix + name;
    seen.insert(key);
    auto it = ckpt.tensors.find(key);
    if (it == ckpt.tensors.end()) {
      report.missing.push_back(key);
      return;
    }
    if (it->second.sizes() != target.sizes()) {
      report.mismatched.push_back(key);
      return;
    }
    if (!strict) {
      target.copy_(it->second);
      ++report.loaded;
    }
  };
  auto params = module.named_parameters();
  auto buffers = module.named_buffers();
  for (auto& p : params) visit(p.key(), p.value());
  for (auto& b : buffers) visit(b.key(), b.value());
  for (const auto& [key, value] : ckpt.tensors) {
    if (is_reserved_key(key) || seen.count(key)) continue;
    if (!prefix.empty() && key.rfind(prefix, 0) != 0) continue;
    report.unexpected.push_back(key);
  }
  if (strict) {
    if (!report.clean()) fail(ErrorCode::KeyMismatch, "checkpoint/model key mismatch: " + report.describe());
    for (auto& p : params) p.value().copy_(ckpt.tensors.at(prefix + p.key()));
    for (auto& b : buffers) b.value().copy_(ckpt.tensors.at(prefix + b.key()));
    report.loaded = params.size() + buffers.size();
  }
  return report;
}

}  // namespace hevs
