#include "dynshot/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "dynshot/errors.hpp"

namespace dynshot {

namespace {

constexpr char kMagic[4] = {'D', 'Y', 'N', 'P'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string get_string(std::size_t len) {
    need(len, "parameter name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                      std::to_string(pos_));
    }
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParameterRegistry& registry) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(registry.size()));
  for (const auto& p : registry) {
    if (p.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw DataError("parameter name too long for checkpoint: " + p.name);
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p.value.rank()));
    for (std::size_t e : p.value.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    for (double v : p.value.values()) put<double>(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("not a DYNP checkpoint (bad magic)");
  }
  Reader reader(bytes);
  reader.get_string(4);
  const auto version = reader.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = reader.get<std::uint32_t>("parameter count");
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = reader.get<std::uint16_t>("name length");
    std::string name = reader.get_string(name_len);
    const auto rank = reader.get<std::uint8_t>("rank");
    if (rank == 0) throw DataError("checkpoint parameter '" + name + "' has rank 0");
    Shape shape(rank);
    for (auto& e : shape) e = reader.get<std::uint32_t>("extent");
    const std::size_t n = numel(shape);
    reader.need(n * sizeof(double), "parameter data");
    std::vector<double> data(n);
    for (auto& v : data) v = reader.get<double>("parameter data");
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (!reader.done()) {
    throw DataError("checkpoint has " + std::to_string(bytes.size() - reader.pos()) +
                    " trailing bytes after " + std::to_string(count) + " parameters");
  }
  return out;
}

void save_checkpoint(const ParameterRegistry& registry, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(registry);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void apply_checkpoint(ParameterRegistry& registry, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != registry.size()) {
    throw DataError("checkpoint holds " + std::to_string(tensors.size()) + " parameters, model expects " +
                    std::to_string(registry.size()));
  }
  for (const auto& t : tensors) {
    auto idx = registry.find(t.name);
    if (!idx) throw DataError("checkpoint parameter '" + t.name + "' unknown to the model");
    Parameter& p = registry.at(*idx);
    if (p.value.shape() != t.value.shape()) {
      throw DataError("checkpoint parameter '" + t.name + "' has shape " + to_string(t.value.shape()) +
                      ", model expects " + to_string(p.value.shape()));
    }
    p.value = t.value;
  }
}

}  // namespace dynshot
