#include "dpn/json_io.hpp"

#include <stdexcept>

namespace dpn {

nlohmann::json stats_to_json(const NormStats& s) {
  nlohmann::json j;
  j["temp_mean"] = s.temp_mean;
  j["temp_std"] = s.temp_std;
  j["power_mean"] = s.power_mean;
  j["power_std"] = s.power_std;
  j["setpoint_mean"] = s.setpoint_mean;
  j["setpoint_std"] = s.setpoint_std;
  j["dist_mean"] = s.dist_mean;
  j["dist_std"] = s.dist_std;
  return j;
}

NormStats stats_from_json(const nlohmann::json& j) {
  NormStats s;
  s.temp_mean = j.at("temp_mean").get<double>();
  s.temp_std = j.at("temp_std").get<double>();
  s.power_mean = j.at("power_mean").get<double>();
  s.power_std = j.at("power_std").get<double>();
  s.setpoint_mean = j.at("setpoint_mean").get<double>();
  s.setpoint_std = j.at("setpoint_std").get<double>();
  for (int k = 0; k < kDistDim; ++k) {
    s.dist_mean[static_cast<size_t>(k)] = j.at("dist_mean")[static_cast<size_t>(k)].get<double>();
    s.dist_std[static_cast<size_t>(k)] = j.at("dist_std")[static_cast<size_t>(k)].get<double>();
  }
  return s;
}

nlohmann::json params_to_json(const NamedParams& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, m] : params) {
    nlohmann::json entry;
    entry["rows"] = m->rows();
    entry["cols"] = m->cols();
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(m->size()));
    for (long r = 0; r < m->rows(); ++r)
      for (long c = 0; c < m->cols(); ++c) flat.push_back((*m)(r, c));
    entry["data"] = std::move(flat);
    j[name] = std::move(entry);
  }
  return j;
}

void params_from_json(const nlohmann::json& j, const NamedParams& params) {
  for (const auto& [name, m] : params) {
    if (!j.contains(name)) throw std::runtime_error("checkpoint missing tensor " + name);
    const auto& entry = j.at(name);
    long rows = entry.at("rows").get<long>();
    long cols = entry.at("cols").get<long>();
    if (rows != m->rows() || cols != m->cols())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    const auto& data = entry.at("data");
    if (static_cast<long>(data.size()) != rows * cols)
      throw std::runtime_error("checkpoint size mismatch for " + name);
    size_t k = 0;
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) (*m)(r, c) = data[k++].get<double>();
  }
}

}  // namespace dpn
