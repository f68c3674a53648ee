#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dg/dataset.hpp"
#include "dg/error.hpp"

namespace dg {

namespace fs = std::filesystem;

void save_bundle(const DatasetBundle& b, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create bundle directory " + dir + ": " + ec.message());

  nlohmann::json manifest = {
      {"generator", b.generator},
      {"seed", b.seed},
      {"class_count", b.class_count},
      {"domain_count", b.domain_count},
      {"domain_names", b.domain_names},
      {"sample_shape", {kImageChannels, b.height, b.width}},
      {"samples", b.size()},
      {"dtype", "float64-le"},
      {"config", nlohmann::json::parse(b.config_json.empty() ? "{}" : b.config_json)},
      {"cell_counts", b.cell_counts()},
  };
  const fs::path root(dir);
  {
    std::ofstream out(root / "manifest.json");
    if (!out) throw IoError("cannot write " + (root / "manifest.json").string());
    out << manifest.dump(2) << '\n';
  }
  {
    std::ofstream out(root / "data.bin", std::ios::binary);
    if (!out) throw IoError("cannot write " + (root / "data.bin").string());
    out.write(reinterpret_cast<const char*>(b.pixels.data()),
              static_cast<std::streamsize>(b.pixels.size() * sizeof(double)));
  }
  {
    std::ofstream out(root / "labels.csv");
    if (!out) throw IoError("cannot write " + (root / "labels.csv").string());
    out << "index,class,domain\n";
    for (std::size_t i = 0; i < b.size(); ++i) out << i << ',' << b.classes[i] << ',' << b.domains[i] << '\n';
  }
}

DatasetBundle load_bundle(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream min(root / "manifest.json");
  if (!min) throw IoError("cannot read " + (root / "manifest.json").string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(min);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed " + (root / "manifest.json").string() + ": " + e.what());
  }
  DatasetBundle b;
  b.generator = m.at("generator").get<std::string>();
  b.seed = m.at("seed").get<std::uint64_t>();
  b.class_count = m.at("class_count").get<std::size_t>();
  b.domain_count = m.at("domain_count").get<std::size_t>();
  b.domain_names = m.at("domain_names").get<std::vector<std::string>>();
  const auto shape = m.at("sample_shape").get<std::vector<std::size_t>>();
  if (shape.size() != 3 || shape[0] != kImageChannels) throw IoError("unsupported sample_shape in manifest");
  b.height = shape[1];
  b.width = shape[2];
  b.config_json = m.at("config").dump();
  const auto samples = m.at("samples").get<std::size_t>();

  b.pixels.resize(samples * b.image_values());
  std::ifstream din(root / "data.bin", std::ios::binary);
  if (!din) throw IoError("cannot read " + (root / "data.bin").string());
  din.read(reinterpret_cast<char*>(b.pixels.data()), static_cast<std::streamsize>(b.pixels.size() * sizeof(double)));
  if (din.gcount() != static_cast<std::streamsize>(b.pixels.size() * sizeof(double))) {
    throw IoError((root / "data.bin").string() + " is shorter than the manifest says");
  }

  std::ifstream lin(root / "labels.csv");
  if (!lin) throw IoError("cannot read " + (root / "labels.csv").string());
  std::string line;
  std::getline(lin, line);
  while (std::getline(lin, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t idx = 0;
    std::uint32_t cls = 0, dom = 0;
    char comma = 0;
    row >> idx >> comma >> cls >> comma >> dom;
    if (!row || idx != b.classes.size()) throw IoError("malformed labels.csv row: " + line);
    b.classes.push_back(cls);
    b.domains.push_back(dom);
  }
  if (b.classes.size() != samples) throw IoError("labels.csv row count does not match manifest");
  return b;
}

}  // namespace dg
