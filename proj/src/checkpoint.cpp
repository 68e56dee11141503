#include "abmc/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace abmc {

void save_checkpoint(const ParamStore& store, const nlohmann::json& meta,
                     const std::string& path) {
  nlohmann::json doc;
  doc["meta"] = meta;
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, t] : store.items()) {
    nlohmann::json p;
    p["name"] = name;
    p["rows"] = t.rows();
    p["cols"] = t.cols();
    p["values"] = t.impl()->value;
    params.push_back(std::move(p));
  }
  doc["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
  out << doc.dump(2) << "\n";
}

nlohmann::json read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_checkpoint: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("read_checkpoint: " + path + ": " + e.what());
  }
  if (!doc.contains("meta") || !doc.contains("params"))
    throw std::runtime_error("read_checkpoint: " + path +
                             ": not a checkpoint document");
  return doc;
}

void load_params(ParamStore& store, const nlohmann::json& doc) {
  const auto& params = doc.at("params");
  if (params.size() != store.count())
    throw std::runtime_error("load_params: checkpoint holds " +
                             std::to_string(params.size()) +
                             " parameters, store expects " +
                             std::to_string(store.count()));
  std::size_t i = 0;
  for (const auto& [name, t] : store.items()) {
    const auto& p = params.at(i++);
    if (p.at("name").get<std::string>() != name)
      throw std::runtime_error("load_params: parameter order mismatch at '" +
                               name + "'");
    if (p.at("rows").get<std::size_t>() != t.rows() ||
        p.at("cols").get<std::size_t>() != t.cols())
      throw std::runtime_error("load_params: shape mismatch for '" + name +
                               "'");
    const auto& vals = p.at("values");
    if (vals.size() != t.size())
      throw std::runtime_error("load_params: value count mismatch for '" +
                               name + "'");
    std::vector<double>& dst = t.impl()->value;
    for (std::size_t j = 0; j < dst.size(); ++j)
      dst[j] = vals.at(j).get<double>();
  }
}

}  // namespace abmc
