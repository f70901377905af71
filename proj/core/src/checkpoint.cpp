#include "ccan/checkpoint.hpp"

#include <cstring>
#include <map>
#include <string>

#include "ccan/error.hpp"
#include "ccan/tensor_file.hpp"

namespace ccan {
namespace {

constexpr std::uint16_t kCheckpointVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T take(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string take_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  Tensor take_tensor() {
    std::size_t used = 0;
    Tensor t = decode_tensor(std::span(bytes_).subspan(pos_), pos_, &used);
    pos_ += used;
    return t;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated checkpoint while reading ") + what, pos_);
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const CcanModel& model) {
  std::vector<std::uint8_t> out{'C', 'C', 'A', 'C'};
  put<std::uint16_t>(out, kCheckpointVersion);
  const std::string config = model_config_to_text(model.config());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config.size()));
  out.insert(out.end(), config.begin(), config.end());
  const auto params = model.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    const auto record = encode_tensor(p.tensor);
    out.insert(out.end(), record.begin(), record.end());
  }
  return out;
}

CcanModel decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.take_string(4, "magic") != "CCAC") throw FormatError("bad checkpoint magic (expected \"CCAC\")", 0);
  const auto version = in.take<std::uint16_t>("version");
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  const auto config_len = in.take<std::uint32_t>("config length");
  const std::size_t config_at = in.pos();
  ModelConfig config;
  try {
    config = model_config_from_text(in.take_string(config_len, "config"));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid checkpoint config: ") + e.what(), config_at);
  }
  CcanModel model = CcanModel::create(config, 0);
  std::map<std::string, Tensor> slots;
  for (auto& p : model.parameters()) slots.emplace(p.name, p.tensor);

  const auto count = in.take<std::uint32_t>("parameter count");
  if (count != slots.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " parameters, model expects " +
                          std::to_string(slots.size()),
                      in.pos() - 4);
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.take<std::uint16_t>("name length");
    const std::size_t name_at = in.pos();
    const std::string name = in.take_string(name_len, "name");
    auto it = slots.find(name);
    if (it == slots.end()) throw FormatError("unknown parameter '" + name + "'", name_at);
    const std::size_t tensor_at = in.pos();
    Tensor value = in.take_tensor();
    if (value.shape() != it->second.shape()) {
      throw FormatError("parameter '" + name + "' has shape " + shape_str(value.shape()) + ", expected " +
                            shape_str(it->second.shape()),
                        tensor_at);
    }
    auto dst = it->second.mutable_data();
    auto src = value.data();
    std::copy(src.begin(), src.end(), dst.begin());
    slots.erase(it);
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint", in.pos());
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const CcanModel& model) {
  write_file_bytes(path, encode_checkpoint(model));
}

CcanModel load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace ccan
