#include "opposd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace opposd {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

constexpr char kMagic[8] = {'O', 'P', 'S', 'D', '0', '0', '0', '1'};

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("checkpoint: truncated file");
  return v;
}

}  // namespace

void write_named_matrices(const std::string& path, const NamedMatrices& matrices) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  for (const auto& [name, m] : matrices) {
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint64_t>(os, m.rows);
    write_raw<std::uint64_t>(os, m.cols);
    os.write(reinterpret_cast<const char*>(m.data.data()),
             static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  }
  if (!os) throw DataError("checkpoint: write failed: " + path);
}

NamedMatrices read_named_matrices(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint: bad magic in " + path);
  }
  NamedMatrices out;
  while (true) {
    std::uint32_t name_len;
    is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    if (is.eof()) break;
    if (!is || name_len > 4096) throw DataError("checkpoint: corrupt record in " + path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rows = read_raw<std::uint64_t>(is);
    const auto cols = read_raw<std::uint64_t>(is);
    if (rows * cols > (1ull << 32)) throw DataError("checkpoint: implausible matrix size");
    DenseMatrix m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!is) throw DataError("checkpoint: truncated matrix data in " + path);
    out.emplace_back(std::move(name), std::move(m));
  }
  return out;
}

void save_model(const std::string& stem, const MlpParams& params, const AdamState& opt,
                const std::string& extra_json) {
  NamedMatrices mats;
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    mats.emplace_back("w" + std::to_string(l), params.weights[l]);
    mats.emplace_back("b" + std::to_string(l), params.biases[l]);
  }
  for (std::size_t b = 0; b < opt.first_moment.size(); ++b) {
    mats.emplace_back("adam_m" + std::to_string(b), opt.first_moment[b]);
    mats.emplace_back("adam_v" + std::to_string(b), opt.second_moment[b]);
  }
  write_named_matrices(stem + ".bin", mats);

  nlohmann::json side;
  side["layer_sizes"] = params.layer_sizes;
  side["head"] = head_name(params.head);
  side["adam"] = {
      {"step_count", opt.step_count},     {"learning_rate", opt.learning_rate},
      {"beta1", opt.beta1},               {"beta2", opt.beta2},
      {"eps_stability", opt.eps_stability}, {"weight_decay", opt.weight_decay},
  };
  if (!extra_json.empty()) {
    side["extra"] = nlohmann::json::parse(extra_json);
  }
  std::ofstream os(stem + ".json", std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot open for writing: " + stem + ".json");
  os << side.dump(2) << "\n";
}

LoadedModel load_model(const std::string& stem) {
  std::ifstream js(stem + ".json");
  if (!js) throw DataError("checkpoint: missing sidecar: " + stem + ".json");
  nlohmann::json side;
  try {
    js >> side;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: bad sidecar " + stem + ".json: " + e.what());
  }

  LoadedModel out;
  out.params.layer_sizes = side.at("layer_sizes").get<std::vector<std::size_t>>();
  out.params.head = head_from_name(side.at("head").get<std::string>());
  const auto& adam = side.at("adam");
  out.opt.step_count = adam.at("step_count").get<std::size_t>();
  out.opt.learning_rate = adam.at("learning_rate").get<double>();
  out.opt.beta1 = adam.at("beta1").get<double>();
  out.opt.beta2 = adam.at("beta2").get<double>();
  out.opt.eps_stability = adam.at("eps_stability").get<double>();
  out.opt.weight_decay = adam.at("weight_decay").get<double>();
  out.extra_json = side.contains("extra") ? side["extra"].dump() : "{}";

  auto mats = read_named_matrices(stem + ".bin");
  auto take = [&](const std::string& name) -> DenseMatrix {
    for (auto& [n, m] : mats) {
      if (n == name) return std::move(m);
    }
    throw DataError("checkpoint: missing matrix '" + name + "' in " + stem + ".bin");
  };
  const std::size_t L = out.params.layer_sizes.size() - 1;
  for (std::size_t l = 0; l < L; ++l) {
    out.params.weights.push_back(take("w" + std::to_string(l)));
    out.params.biases.push_back(take("b" + std::to_string(l)));
  }
  for (std::size_t b = 0; b < 2 * L; ++b) {
    out.opt.first_moment.push_back(take("adam_m" + std::to_string(b)));
    out.opt.second_moment.push_back(take("adam_v" + std::to_string(b)));
  }
  for (std::size_t l = 0; l < L; ++l) {
    if (out.params.weights[l].rows != out.params.layer_sizes[l] ||
        out.params.weights[l].cols != out.params.layer_sizes[l + 1]) {
      throw DataError("checkpoint: matrix shape disagrees with layer_sizes");
    }
  }
  return out;
}

}  // namespace opposd
