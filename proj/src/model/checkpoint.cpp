#include "prim/model/checkpoint.hpp"

#include <cstring>
#include <stdexcept>

namespace prim::model {
namespace {

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, s_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string v = s_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw std::runtime_error("checkpoint truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelConfig& cfg, const ParameterStore<float>& params, const Json& meta) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string header = Json{{"config", to_json(cfg)}, {"meta", meta}}.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape.size()));
    for (auto d : p.shape) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(p.values.data()), p.values.size() * sizeof(float));
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic)))
    throw std::runtime_error("not a checkpoint file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto header = Json::parse(r.bytes(r.get<std::uint32_t>()));
  Checkpoint ck;
  ck.config = model_config_from_json(header.at("config"));
  ck.meta = header.value("meta", Json::object());
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.bytes(r.get<std::uint32_t>());
    ad::Shape shape(r.get<std::uint32_t>());
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    auto& p = ck.params[ck.params.add(name, shape)];
    const std::string raw = r.bytes(p.values.size() * sizeof(float));
    std::memcpy(p.values.data(), raw.data(), raw.size());
  }
  if (!r.done()) throw std::runtime_error("trailing bytes after checkpoint records");
  find_layout(ck.config, ck.params);
  if (!ck.params.all_finite()) throw std::runtime_error("checkpoint holds non-finite parameters");
  return ck;
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParameterStore<float>& params,
                     const Json& meta) {
  write_file_atomic(path, serialize_checkpoint(cfg, params, meta));
}

Checkpoint load_checkpoint(const std::string& path) {
  try {
    return parse_checkpoint(read_text_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace prim::model
