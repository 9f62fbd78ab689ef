#include "signet/nn/checkpoint.hpp"

#include <filesystem>

#include "signet/core/errors.hpp"
#include "signet/util/binary.hpp"
#include "signet/util/image_io.hpp"

namespace signet::nn {

namespace {
constexpr std::string_view kMagic = "SGNM";
}

Sequential& Checkpoint::net(const std::string& name) {
  auto it = nets.find(name);
  if (it == nets.end()) throw FormatError("checkpoint has no network '" + name + "'");
  return *it->second;
}

const Sequential& Checkpoint::net(const std::string& name) const {
  auto it = nets.find(name);
  if (it == nets.end()) throw FormatError("checkpoint has no network '" + name + "'");
  return *it->second;
}

std::vector<std::uint8_t> serialize_checkpoint(Checkpoint& ckpt) {
  nlohmann::json desc{{"meta", ckpt.meta}, {"nets", nlohmann::json::object()}};
  std::vector<std::pair<std::string, Param*>> tensors;
  for (auto& [name, net] : ckpt.nets) {
    desc["nets"][name] = net->describe();
    for (Param* p : net->params()) tensors.emplace_back(name + "/" + p->name, p);
  }
  const std::string text = desc.dump();

  binary::Writer w;
  w.raw(kMagic);
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, p] : tensors) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    const Tensor& t = p->value;
    for (int d : {t.n(), t.c(), t.h(), t.w()}) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.values()) w.f32(v);
  }
  return std::move(w.bytes());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  binary::Reader r(bytes);
  if (r.str(4) != kMagic) throw FormatError("not a model checkpoint (bad magic)");
  const auto version = r.u16();
  if (!r.ok() || version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::string text = r.str(r.u32());
  if (!r.ok()) throw FormatError("checkpoint truncated in descriptor");

  Checkpoint ckpt;
  try {
    const auto desc = nlohmann::json::parse(text);
    ckpt.meta = desc.at("meta");
    for (const auto& [name, d] : desc.at("nets").items()) ckpt.nets[name] = make_sequential(d);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint descriptor: ") + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("bad checkpoint descriptor: ") + e.what());
  }

  std::map<std::string, Param*> by_name;
  for (auto& [name, net] : ckpt.nets) {
    for (Param* p : net->params()) by_name[name + "/" + p->name] = p;
  }
  const auto count = r.u32();
  if (!r.ok() || count != by_name.size()) throw FormatError("checkpoint tensor count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.u16());
    int dims[4];
    for (int& d : dims) d = static_cast<int>(r.u32());
    if (!r.ok()) throw FormatError("checkpoint truncated in tensor header");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("unexpected tensor '" + name + "'");
    Tensor& t = it->second->value;
    if (t.n() != dims[0] || t.c() != dims[1] || t.h() != dims[2] || t.w() != dims[3]) {
      throw FormatError("shape mismatch for tensor '" + name + "'");
    }
    if (r.remaining() < t.size() * 4) throw FormatError("checkpoint truncated in tensor data");
    for (float& v : t.values()) v = r.f32();
    by_name.erase(it);
  }
  return ckpt;
}

void save_checkpoint(Checkpoint& ckpt, const std::string& path) {
  io::write_bytes(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw StartupError("model file not found: " + path);
  std::vector<std::uint8_t> bytes;
  try {
    bytes = io::read_bytes(path);
  } catch (const Error& e) {
    throw StartupError("cannot read model " + path + ": " + e.what());
  }
  return deserialize_checkpoint(bytes);
}

}  // namespace signet::nn
