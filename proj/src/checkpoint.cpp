#include "hsal/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "hsal/errors.hpp"

namespace hsal {

namespace {

constexpr std::string_view kMagic = "HSAL-CHECKPOINT 1";

static_assert(std::endian::native == std::endian::little,
              "checkpoint values are stored in host byte order");

nlohmann::json config_json(const ModelConfig& c) {
  return {{"n_users", c.n_users},
          {"n_items", c.n_items},
          {"dim", c.dim},
          {"layers", c.layers},
          {"max_order", c.max_order},
          {"fusion", std::string(to_string(c.fusion))},
          {"positional", std::string(to_string(c.positional))},
          {"propagation", std::string(to_string(c.propagation))},
          {"init_std", c.init_std}};
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig c;
  c.n_users = j.at("n_users").get<std::size_t>();
  c.n_items = j.at("n_items").get<std::size_t>();
  c.dim = j.at("dim").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.max_order = j.at("max_order").get<std::size_t>();
  c.fusion = parse_fusion(j.at("fusion").get<std::string>());
  c.positional = parse_positional(j.at("positional").get<std::string>());
  c.propagation = parse_propagation(j.at("propagation").get<std::string>());
  c.init_std = j.at("init_std").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     std::uint64_t seed) {
  nlohmann::json header;
  header["config"] = config_json(params.config());
  header["seed"] = seed;
  header["tensors"] = nlohmann::json::array();
  for (const auto& e : params.tensors()) {
    header["tensors"].push_back({{"name", e.name}, {"shape", e.tensor.shape()}});
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out << kMagic << '\n' << header.dump() << '\n';
    for (const auto& e : params.tensors()) {
      auto v = e.tensor.values();
      out.write(reinterpret_cast<const char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!out) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string magic, header_line;
  std::getline(in, magic);
  if (magic != kMagic) throw DataError(path.string() + " is not a checkpoint");
  std::getline(in, header_line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint header: " + std::string(e.what()));
  }
  Checkpoint ck{ModelParams::init(config_from(header.at("config")), 0),
                header.at("seed").get<std::uint64_t>()};
  auto& tensors = ck.params.tensors();
  const auto& listed = header.at("tensors");
  if (listed.size() != tensors.size()) {
    throw DataError("checkpoint lists " + std::to_string(listed.size()) + " tensors, model has " +
                    std::to_string(tensors.size()));
  }
  for (std::size_t p = 0; p < tensors.size(); ++p) {
    auto& e = tensors[p];
    if (listed[p].at("name").get<std::string>() != e.name ||
        listed[p].at("shape").get<Shape>() != e.tensor.shape()) {
      throw DataError("checkpoint tensor " + std::to_string(p) + " does not match " + e.name +
                      " " + shape_str(e.tensor.shape()));
    }
    auto v = e.tensor.values();
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint truncated in " + e.name);
  }
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw DataError("trailing bytes after the last checkpoint tensor");
  }
  return ck;
}

}  // namespace hsal
