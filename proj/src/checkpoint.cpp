#include "inrgan/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "inrgan/binary_io.hpp"

namespace inrgan {
namespace {

constexpr char kMagic[8] = {'I', 'N', 'R', 'G', 'A', 'N', 'C', 'K'};
constexpr std::uint32_t kJsonSection = 0;
constexpr std::uint32_t kTensorSection = 1;

std::string encode_tensors(const TensorMap<float>& tensors) {
  std::ostringstream os(std::ios::binary);
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    io::write_string(os, name);
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) io::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(d));
    io::write_floats(os, t.data(), static_cast<std::size_t>(t.size()));
  }
  return os.str();
}

TensorMap<float> decode_tensors(const std::string& payload) {
  std::istringstream is(payload, std::ios::binary);
  TensorMap<float> out;
  const auto count = io::read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = io::read_string(is);
    const auto ndim = io::read_pod<std::uint32_t>(is);
    Shape shape;
    for (std::uint32_t k = 0; k < ndim; ++k) shape.push_back(static_cast<std::int64_t>(io::read_pod<std::uint64_t>(is)));
    NdArray<float> t(shape);
    io::read_floats(is, t.data(), static_cast<std::size_t>(t.size()));
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace

const nlohmann::json& Checkpoint::json(const std::string& name) const {
  auto it = json_sections.find(name);
  if (it == json_sections.end()) throw std::runtime_error("checkpoint: missing section '" + name + "'");
  return it->second;
}

const TensorMap<float>& Checkpoint::tensors(const std::string& name) const {
  auto it = tensor_sections.find(name);
  if (it == tensor_sections.end()) throw std::runtime_error("checkpoint: missing section '" + name + "'");
  return it->second;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  io::write_pod<std::uint32_t>(os, kCheckpointVersion);
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.json_sections.size() + ckpt.tensor_sections.size()));
  auto section = [&](const std::string& name, std::uint32_t kind, const std::string& payload) {
    io::write_string(os, name);
    io::write_pod<std::uint32_t>(os, kind);
    io::write_pod<std::uint64_t>(os, payload.size());
    os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  };
  for (const auto& [name, j] : ckpt.json_sections) section(name, kJsonSection, j.dump());
  for (const auto& [name, t] : ckpt.tensor_sections) section(name, kTensorSection, encode_tensors(t));
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(magic, magic + 8, kMagic)) {
    throw std::runtime_error("checkpoint " + path.string() + ": bad magic");
  }
  const auto version = io::read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto count = io::read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = io::read_string(is);
    const auto kind = io::read_pod<std::uint32_t>(is);
    const auto size = io::read_pod<std::uint64_t>(is);
    std::string payload(size, '\0');
    is.read(payload.data(), static_cast<std::streamsize>(size));
    if (!is) throw std::runtime_error("checkpoint " + path.string() + ": truncated section '" + name + "'");
    if (kind == kJsonSection) {
      ckpt.json_sections.emplace(std::move(name), nlohmann::json::parse(payload));
    } else if (kind == kTensorSection) {
      ckpt.tensor_sections.emplace(std::move(name), decode_tensors(payload));
    } else {
      throw std::runtime_error("checkpoint " + path.string() + ": unknown section kind " + std::to_string(kind));
    }
  }
  return ckpt;
}

}  // namespace inrgan
