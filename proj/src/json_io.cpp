#include "ellipq/json_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ellipq/errors.hpp"

namespace ellipq {

namespace {

void require_keys(const Json& node, const std::set<std::string>& allowed,
                  const char* where) {
  for (const auto& item : node.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      throw ConfigError(std::string("unknown key \"") + item.key() + "\" in " +
                        where);
    }
  }
}

std::vector<cplx> complex_list(const Json& node, const char* what) {
  if (!node.is_array()) {
    throw ConfigError(std::string(what) + " must be an array");
  }
  std::vector<cplx> out;
  out.reserve(node.size());
  for (const Json& item : node) out.push_back(complex_from_json(item));
  return out;
}

Json complex_list_to_json(const std::vector<cplx>& values) {
  Json out = Json::array();
  for (const cplx& v : values) out.push_back(complex_to_json(v));
  return out;
}

}  // namespace

cplx complex_from_json(const Json& node) {
  if (node.is_number()) {
    return cplx(node.get<double>(), 0.0);
  }
  if (node.is_array() && node.size() == 2 && node[0].is_number() &&
      node[1].is_number()) {
    return cplx(node[0].get<double>(), node[1].get<double>());
  }
  throw ConfigError("complex values must be [re, im] arrays or bare numbers");
}

Json complex_to_json(cplx value) {
  return Json::array({value.real(), value.imag()});
}

ModelConfig model_from_json(const Json& node) {
  if (!node.is_object()) {
    throw ConfigError("model must be a JSON object");
  }
  require_keys(node,
               {"tau", "eta", "p", "lambdas", "z", "m", "truncation",
                "allow_coincident_z"},
               "model");
  for (const char* key : {"tau", "eta", "lambdas", "z"}) {
    if (!node.contains(key)) {
      throw ConfigError(std::string("model is missing \"") + key + "\"");
    }
  }

  ModelConfig config;
  config.elliptic.tau = complex_from_json(node.at("tau"));
  config.elliptic.eta = complex_from_json(node.at("eta"));
  if (node.contains("p")) config.elliptic.p = complex_from_json(node.at("p"));
  config.Lambda = complex_list(node.at("lambdas"), "lambdas");
  config.z = complex_list(node.at("z"), "z");

  if (node.contains("m")) {
    if (!node.at("m").is_number_integer() || node.at("m").get<int>() < 0) {
      throw ConfigError("m must be a nonnegative integer");
    }
    config.m = node.at("m").get<int>();
  } else {
    cplx sum{0.0, 0.0};
    for (const cplx& w : config.Lambda) sum += w;
    const double half = sum.real() / 2.0;
    const double rounded = std::round(half);
    if (std::abs(sum.imag()) > 1e-9 || std::abs(half - rounded) > 1e-9 ||
        rounded < 0.0) {
      throw ConfigError(
          "m omitted but sum(lambdas)/2 is not a nonnegative integer");
    }
    config.m = static_cast<int>(rounded);
  }

  if (node.contains("truncation")) {
    const Json& caps = node.at("truncation");
    if (!caps.is_array()) throw ConfigError("truncation must be an array");
    for (const Json& cap : caps) {
      if (!cap.is_number_integer()) {
        throw ConfigError("truncation entries must be integers (-1 = none)");
      }
      const int value = cap.get<int>();
      if (value < 0) {
        config.truncation.emplace_back(std::nullopt);
      } else {
        config.truncation.emplace_back(value);
      }
    }
  }
  if (node.contains("allow_coincident_z")) {
    if (!node.at("allow_coincident_z").is_boolean()) {
      throw ConfigError("allow_coincident_z must be a boolean");
    }
    config.allow_coincident_z = node.at("allow_coincident_z").get<bool>();
  }
  config.validate();
  return config;
}

Json model_to_json(const ModelConfig& config) {
  Json out;
  out["tau"] = complex_to_json(config.elliptic.tau);
  out["eta"] = complex_to_json(config.elliptic.eta);
  if (config.elliptic.p.has_value()) {
    out["p"] = complex_to_json(*config.elliptic.p);
  }
  out["lambdas"] = complex_list_to_json(config.Lambda);
  out["z"] = complex_list_to_json(config.z);
  out["m"] = config.m;
  if (!config.truncation.empty()) {
    Json caps = Json::array();
    for (const auto& cap : config.truncation) {
      caps.push_back(cap.has_value() ? *cap : -1);
    }
    out["truncation"] = caps;
  }
  if (config.allow_coincident_z) out["allow_coincident_z"] = true;
  return out;
}

Json block_to_json(const WeightBlockMatrix& block) {
  Json out;
  out["m"] = block.m;
  Json rows = Json::array();
  for (const Composition& c : block.row_index) rows.push_back(c.parts);
  Json cols = Json::array();
  for (const Composition& c : block.col_index) cols.push_back(c.parts);
  out["rows"] = rows;
  out["cols"] = cols;
  Json entries = Json::array();
  for (Eigen::Index r = 0; r < block.entries.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < block.entries.cols(); ++c) {
      row.push_back(complex_to_json(block.entries(r, c)));
    }
    entries.push_back(row);
  }
  out["entries"] = entries;
  out["pairing_condition"] = block.pairing_condition;
  return out;
}

Json solution_to_json(const BetheSolution& solution) {
  Json out;
  out["roots"] = complex_list_to_json(solution.t);
  out["c"] = complex_to_json(solution.c);
  out["eigenvalues"] = complex_list_to_json(solution.eps);
  out["residual"] = solution.residual;
  out["multiplier"] = complex_to_json(solution.multiplier);
  return out;
}

Json completeness_to_json(const CompletenessReport& report) {
  Json out;
  out["found"] = report.found;
  out["det_abs"] = report.det_abs;
  out["det_normalized"] = report.det_normalized;
  out["vandermonde"] = complex_to_json(report.vandermonde);
  Json solutions = Json::array();
  for (const BetheSolution& s : report.solutions) {
    solutions.push_back(solution_to_json(s));
  }
  out["solutions"] = solutions;
  return out;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return Json::parse(buffer.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

}  // namespace ellipq
