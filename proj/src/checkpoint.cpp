#include "spoofsynth/checkpoint.hpp"

#include "spoofsynth/common.hpp"

#include <fstream>

namespace spoofsynth {

namespace {
constexpr const char* kMagic = "SPOOFSYNTH-CHECKPOINT 1";
}

const torch::Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("checkpoint has no tensor '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["kind"] = ckpt.kind;
  header["meta"] = ckpt.meta;
  auto list = nlohmann::ordered_json::array();
  std::vector<torch::Tensor> payloads;
  int64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    auto data = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    list.push_back({{"name", name}, {"shape", data.sizes().vec()}, {"offset", offset}});
    offset += data.numel() * 4;
    payloads.push_back(std::move(data));
  }
  header["tensors"] = list;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << kMagic << '\n' << header.dump() << '\n';
  for (const auto& p : payloads) {
    out.write(reinterpret_cast<const char*>(p.data_ptr<float>()), static_cast<std::streamsize>(p.numel() * 4));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint not found: " + path.string());
  std::string magic, header_text;
  std::getline(in, magic);
  if (magic != kMagic) throw DataError(path.string() + " is not a checkpoint");
  std::getline(in, header_text);
  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(header_text);
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.meta = header.at("meta");
    for (const auto& entry : header.at("tensors")) {
      const auto shape = entry.at("shape").get<std::vector<int64_t>>();
      auto t = torch::empty(shape, torch::kFloat32);
      in.read(reinterpret_cast<char*>(t.data_ptr<float>()), static_cast<std::streamsize>(t.numel() * 4));
      if (!in) throw DataError("checkpoint " + path.string() + " is truncated");
      ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + " has a malformed header: " + e.what());
  }
  return ckpt;
}

NamedTensors module_state(const torch::nn::Module& module, const std::string& prefix) {
  NamedTensors out;
  for (const auto& item : module.named_parameters()) out.emplace_back(prefix + item.key(), item.value());
  for (const auto& item : module.named_buffers()) out.emplace_back(prefix + item.key(), item.value());
  return out;
}

void load_module_state(torch::nn::Module& module, const Checkpoint& ckpt, const std::string& prefix) {
  torch::NoGradGuard guard;
  auto copy = [&](const std::string& name, torch::Tensor& target) {
    const auto& source = ckpt.tensor(prefix + name);
    if (source.sizes() != target.sizes()) {
      throw DataError("checkpoint tensor '" + prefix + name + "' has the wrong shape for this configuration");
    }
    target.copy_(source);
  };
  for (auto& item : module.named_parameters()) copy(item.key(), item.value());
  for (auto& item : module.named_buffers()) copy(item.key(), item.value());
}

}  // namespace spoofsynth
