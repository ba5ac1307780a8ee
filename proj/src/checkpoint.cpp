#include "gistnet/checkpoint.hpp"

#include <openssl/sha.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

namespace gist {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

ConfigDigest sha256_digest(const std::string& text) {
  ConfigDigest out{};
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), out.data());
  return out;
}

std::string to_hex(const ConfigDigest& digest) {
  static const char* const kHex = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : digest) {
    s += kHex[b >> 4];
    s += kHex[b & 15];
  }
  return s;
}

namespace {

constexpr char kMagic[4] = {'G', 'S', 'T', 'N'};

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(U));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  template <typename U>
  U get(const char* what) {
    U v;
    std::memcpy(&v, take(sizeof(U), what), sizeof(U));
    return v;
  }

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_)
      fail(std::string("truncated ") + what + " (need " + std::to_string(n) + " bytes, " +
           std::to_string(bytes_.size() - pos_) + " left)");
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  [[noreturn]] void fail(const std::string& msg) const { fail_at(pos_, msg); }
  [[noreturn]] void fail_at(std::size_t offset, const std::string& msg) const {
    throw FormatError(source_ + ": offset " + std::to_string(offset) + ": " + msg);
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_tensor(std::vector<std::uint8_t>& out, const BasicTensor<T>& t) {
  put<std::uint8_t>(out, static_cast<std::uint8_t>(BasicTensor<T>::dtype()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape().dims()) put<std::uint64_t>(out, d);
  const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
  out.insert(out.end(), p, p + t.size() * sizeof(T));
}

template <typename T>
BasicTensor<T> get_values(Reader& r, Shape shape) {
  // Checked before allocating so a corrupt header cannot request huge buffers.
  if (shape.numel() > r.remaining() / sizeof(T))
    r.fail("truncated tensor data (need " + std::to_string(shape.numel()) + " values, " +
           std::to_string(r.remaining()) + " bytes left)");
  std::vector<T> values(shape.numel());
  const std::size_t bytes = values.size() * sizeof(T);
  std::memcpy(values.data(), r.take(bytes, "tensor data"), bytes);
  return BasicTensor<T>(std::move(shape), std::move(values));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, Checkpoint::kVersion);
  out.insert(out.end(), checkpoint.digest.begin(), checkpoint.digest.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& t : checkpoint.tensors) {
    if (t.name.size() > 0xFFFF) throw ArgumentError("checkpoint: tensor name longer than 65535 bytes");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    std::visit([&](const auto& tensor) { put_tensor(out, tensor); }, t.value);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  Reader r(bytes, source);
  const std::uint8_t* magic = r.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) r.fail_at(0, "bad magic (expected \"GSTN\")");
  const std::size_t version_at = r.pos();
  const auto version = r.get<std::uint32_t>("version");
  if (version != Checkpoint::kVersion)
    r.fail_at(version_at, "unsupported version " + std::to_string(version));
  Checkpoint c;
  std::memcpy(c.digest.data(), r.take(c.digest.size(), "config digest"), c.digest.size());
  const auto count = r.get<std::uint32_t>("tensor count");
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t entry_at = r.pos();
    const auto len = r.get<std::uint16_t>("name length");
    const std::uint8_t* name = r.take(len, "tensor name");
    NamedTensor t{std::string(reinterpret_cast<const char*>(name), len), Tensor{}};
    if (!seen.insert(t.name).second) r.fail_at(entry_at, "duplicate tensor \"" + t.name + "\"");
    const std::size_t dtype_at = r.pos();
    const auto dtype = r.get<std::uint8_t>("dtype");
    const auto rank = r.get<std::uint8_t>("rank");
    if (rank == 0) r.fail("tensor \"" + t.name + "\" has rank 0");
    std::vector<std::size_t> dims(rank);
    std::uint64_t numel = 1;
    for (auto& d : dims) {
      const auto v = r.get<std::uint64_t>("dims");
      if (v == 0 || v > r.remaining() || numel > r.remaining() / v)
        r.fail("tensor \"" + t.name + "\" has dimension " + std::to_string(v) + " exceeding the file size");
      numel *= v;
      d = static_cast<std::size_t>(v);
    }
    Shape shape(std::move(dims));
    if (dtype == static_cast<std::uint8_t>(DType::kFloat32))
      t.value = get_values<float>(r, std::move(shape));
    else if (dtype == static_cast<std::uint8_t>(DType::kFloat64))
      t.value = get_values<double>(r, std::move(shape));
    else
      r.fail_at(dtype_at, "unknown dtype code " + std::to_string(dtype));
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) r.fail("trailing bytes after the tensor table");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = encode_checkpoint(checkpoint);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

template <typename T>
Checkpoint params_to_checkpoint(const ModelParams<T>& params, const ConfigDigest& digest) {
  Checkpoint c;
  c.digest = digest;
  for (const auto& [name, p] : params.entries()) {
    c.tensors.push_back({name + ".weights", p.weights});
    c.tensors.push_back({name + ".bias", p.bias});
  }
  return c;
}

template Checkpoint params_to_checkpoint<float>(const ModelParams<float>&, const ConfigDigest&);
template Checkpoint params_to_checkpoint<double>(const ModelParams<double>&, const ConfigDigest&);

ModelParams<float> checkpoint_to_params(const Checkpoint& checkpoint, const Model& model) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : checkpoint.tensors) by_name[t.name] = &t;
  auto fetch = [&](const std::string& name, const Shape& shape) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ValidationError("checkpoint is missing tensor \"" + name + "\"");
    const auto* t = std::get_if<Tensor>(&it->second->value);
    if (!t) throw ValidationError("checkpoint tensor \"" + name + "\" is not float32");
    if (!(t->shape() == shape))
      throw ValidationError("checkpoint tensor \"" + name + "\" has shape " + t->shape().to_string() + ", model expects " +
                            shape.to_string());
    by_name.erase(it);
    return *t;
  };
  ModelParams<float> params;
  for (const auto& layer : model.parameterized_layers()) {
    const auto [ws, bs] = param_shapes(layer.spec);
    Tensor w = fetch(layer.name + ".weights", ws);
    Tensor b = fetch(layer.name + ".bias", bs);
    params.insert(layer.name, {std::move(w), std::move(b)});
  }
  if (!by_name.empty()) throw ValidationError("checkpoint has unexpected tensor \"" + by_name.begin()->first + "\"");
  return params;
}

void check_digest(const Checkpoint& checkpoint, const ConfigDigest& expected, bool force,
                  const std::string& source) {
  if (checkpoint.digest == expected || force) return;
  throw ValidationError(source + ": config digest " + to_hex(checkpoint.digest) + " does not match " +
                        to_hex(expected) + " (use --force to load anyway)");
}

}  // namespace gist
