#include "radardepth/tinydepth.hpp"

#include "config_json.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace radardepth {

namespace {

constexpr std::array<char, 8> kMagic = {'T', 'D', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64_le(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | p[i];
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TinyDepthNet& model) {
  nlohmann::json index = nlohmann::json::array();
  std::string data;
  for (const auto& [name, t] : model.parameters()) {
    index.push_back({{"name", name}, {"shape", t.shape}, {"offset", data.size()}});
    for (double v : t.values) {
      put_u64_le(data, std::bit_cast<std::uint64_t>(v));
    }
  }
  const nlohmann::json header = {{"format", "tinydepth-checkpoint"},
                                 {"dtype", "float64-le"},
                                 {"config", detail::to_json(model.config())},
                                 {"tensors", index}};
  const std::string header_text = header.dump();

  std::string out(kMagic.begin(), kMagic.end());
  put_u64_le(out, header_text.size());
  out += header_text;
  out += data;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) {
    throw std::runtime_error("failed writing checkpoint: " + path.string());
  }
}

TinyDepthNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw std::runtime_error("not a tinydepth checkpoint: " + path.string());
  }
  const std::uint64_t header_len = get_u64_le(raw + 8);
  if (16 + header_len > bytes.size()) {
    throw std::runtime_error("truncated checkpoint header: " + path.string());
  }
  const auto header = nlohmann::json::parse(bytes.substr(16, header_len));
  const std::size_t data_start = 16 + header_len;
  const std::size_t data_len = bytes.size() - data_start;

  TensorMap params;
  for (const auto& entry : header.at("tensors")) {
    Tensor t = Tensor::zeros(entry.at("shape").get<std::vector<int>>());
    const auto offset = entry.at("offset").get<std::size_t>();
    if (offset + t.numel() * 8 > data_len) {
      throw std::runtime_error("checkpoint tensor '" + entry.at("name").get<std::string>() +
                               "' runs past end of file: " + path.string());
    }
    for (std::size_t i = 0; i < t.numel(); ++i) {
      t.values[i] = std::bit_cast<double>(get_u64_le(raw + data_start + offset + 8 * i));
    }
    params.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return TinyDepthNet(detail::model_config_from_json(header.at("config")), std::move(params));
}

}  // namespace radardepth
