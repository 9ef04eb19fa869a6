#include "config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "errors.hpp"

namespace pnsaf {
namespace {

using nlohmann::json;

void check_keys(const json& node, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& item : node.items())
    if (!allowed.count(item.key()))
      fail(Status::parse_error,
           "unknown key \"" + item.key() + "\" in " + where);
}

double number_or(const json& node, const char* key, double fallback,
                 std::vector<std::string>* notices, const char* where) {
  if (!node.contains(key)) {
    if (notices)
      notices->push_back(std::string(where) + "." + key + " defaulted to " +
                         std::to_string(fallback));
    return fallback;
  }
  const json& v = node.at(key);
  if (v.is_string() && v.get<std::string>() == "inf")
    return std::numeric_limits<double>::infinity();
  if (!v.is_number())
    fail(Status::parse_error, std::string(where) + "." + key +
                                  " must be a number");
  return v.get<double>();
}

SignalSource parse_input(const json& node,
                         std::vector<std::string>* notices) {
  SignalSource src;
  check_keys(node, {"type", "pole", "variance", "path"}, "input");
  const std::string type = node.value("type", std::string("ar1"));
  if (type == "ar1") {
    src.kind = SignalSource::Kind::ar1;
    src.pole = number_or(node, "pole", 0.95, notices, "input");
  } else if (type == "white") {
    src.kind = SignalSource::Kind::white_gaussian;
    src.variance = number_or(node, "variance", 1.0, notices, "input");
  } else if (type == "wav") {
    src.kind = SignalSource::Kind::pcm_file;
    if (!node.contains("path"))
      fail(Status::parse_error, "input.path is required for wav input");
    src.path = node.at("path").get<std::string>();
  } else {
    fail(Status::parse_error, "input.type must be ar1, white, or wav");
  }
  return src;
}

PathSpec parse_path(const json& node, std::vector<std::string>* notices) {
  PathSpec path;
  check_keys(node, {"type", "num_active", "decay_rate", "path"}, "path");
  const std::string type = node.value("type", std::string("synthetic"));
  if (type == "synthetic") {
    path.kind = PathSpec::Kind::synthetic;
    path.num_active = static_cast<int>(
        number_or(node, "num_active", 32, notices, "path"));
    path.decay_rate = number_or(node, "decay_rate", 4.0, notices, "path");
  } else if (type == "file") {
    path.kind = PathSpec::Kind::file;
    if (!node.contains("path"))
      fail(Status::parse_error, "path.path is required for file paths");
    path.file = node.at("path").get<std::string>();
  } else {
    fail(Status::parse_error, "path.type must be synthetic or file");
  }
  return path;
}

AlgorithmSpec parse_algorithm(const json& node, double default_delta,
                              size_t index) {
  const std::string where = "algorithms[" + std::to_string(index) + "]";
  check_keys(node, {"name", "gain", "step", "delta"}, where);
  AlgorithmSpec algo;
  if (!node.contains("name"))
    fail(Status::parse_error, where + ".name is required");
  algo.name = node.at("name").get<std::string>();
  algo.delta = number_or(node, "delta", default_delta, nullptr, where.c_str());

  if (node.contains("gain")) {
    const json& g = node.at("gain");
    check_keys(g, {"type", "alpha", "xi"}, where + ".gain");
    const std::string type = g.value("type", std::string("identity"));
    if (type == "identity") {
      algo.gain = GainRule::identity();
    } else if (type == "ipnlms") {
      algo.gain = GainRule::ipnlms(
          number_or(g, "alpha", 0.0, nullptr, "gain"),
          number_or(g, "xi", 1e-3, nullptr, "gain"));
    } else {
      fail(Status::parse_error, where + ".gain.type must be identity or ipnlms");
    }
  }

  if (!node.contains("step"))
    fail(Status::parse_error, where + ".step is required");
  const json& s = node.at("step");
  check_keys(s, {"type", "mu", "gamma", "lambda", "kappa"}, where + ".step");
  const std::string type = s.value("type", std::string("fixed"));
  if (type == "fixed") {
    algo.step_kind = StepController::Kind::fixed;
    algo.mu = number_or(s, "mu", 1.0, nullptr, "step");
  } else if (type == "set_membership") {
    algo.step_kind = StepController::Kind::set_membership;
    algo.gamma = number_or(s, "gamma", 9.0, nullptr, "step");
  } else if (type == "shrinkage_vss") {
    algo.step_kind = StepController::Kind::shrinkage_vss;
    algo.lambda = number_or(s, "lambda", 3.5, nullptr, "step");
    algo.kappa = number_or(s, "kappa", 1.0, nullptr, "step");
  } else {
    fail(Status::parse_error,
         where + ".step.type must be fixed, set_membership, or shrinkage_vss");
  }
  return algo;
}

ParsedConfig parse_config(const json& root) {
  require(root.is_object(), Status::parse_error,
          "config root must be a JSON object");
  check_keys(root,
             {"input", "filter_length", "subbands", "prototype_length",
              "attenuation_db", "snr_db", "path", "path_flip_sample",
              "run_length", "ensemble_size", "base_seed", "metrics", "delta",
              "algorithms"},
             "config");

  ParsedConfig out;
  auto& spec = out.spec;
  auto* notices = &out.notices;

  if (root.contains("input"))
    spec.input = parse_input(root.at("input"), notices);
  else
    notices->push_back("input defaulted to ar1 with pole 0.95");

  spec.filter_length = static_cast<int>(
      number_or(root, "filter_length", 512, notices, "config"));
  spec.num_subbands =
      static_cast<int>(number_or(root, "subbands", 4, notices, "config"));
  spec.prototype_length = static_cast<int>(
      number_or(root, "prototype_length", 0, nullptr, "config"));
  spec.attenuation_db =
      number_or(root, "attenuation_db", 60.0, nullptr, "config");
  spec.snr_db = number_or(root, "snr_db", 30.0, notices, "config");

  if (root.contains("path"))
    spec.path = parse_path(root.at("path"), notices);
  else
    notices->push_back("path defaulted to synthetic (32 active taps)");

  if (root.contains("path_flip_sample")) {
    const json& f = root.at("path_flip_sample");
    if (!f.is_null())
      spec.path_flip_sample = f.get<uint64_t>();
  }

  spec.run_length = static_cast<uint64_t>(
      number_or(root, "run_length", 240000, notices, "config"));
  spec.ensemble_size = static_cast<int>(
      number_or(root, "ensemble_size", 25, notices, "config"));
  spec.base_seed = static_cast<uint64_t>(
      number_or(root, "base_seed", 1, notices, "config"));

  if (root.contains("metrics")) {
    const json& m = root.at("metrics");
    check_keys(m, {"nmsd_stride", "erle", "erle_window"}, "metrics");
    spec.metrics.nmsd_stride = static_cast<int>(
        number_or(m, "nmsd_stride", 1, nullptr, "metrics"));
    spec.metrics.erle = m.value("erle", false);
    spec.metrics.erle_window = static_cast<int>(
        number_or(m, "erle_window", 1024, nullptr, "metrics"));
  }

  const double default_delta =
      number_or(root, "delta", 1e-3, nullptr, "config");
  if (!root.contains("algorithms"))
    fail(Status::parse_error, "config needs an algorithms list");
  const json& algos = root.at("algorithms");
  require(algos.is_array() && !algos.empty(), Status::parse_error,
          "algorithms must be a non-empty list");
  for (size_t i = 0; i < algos.size(); ++i)
    spec.algorithms.push_back(parse_algorithm(algos[i], default_delta, i));

  spec.validate();
  return out;
}

json input_to_json(const SignalSource& src) {
  switch (src.kind) {
    case SignalSource::Kind::ar1:
      return {{"type", "ar1"}, {"pole", src.pole}};
    case SignalSource::Kind::white_gaussian:
      return {{"type", "white"}, {"variance", src.variance}};
    case SignalSource::Kind::pcm_file:
      return {{"type", "wav"}, {"path", src.path}};
  }
  return {};
}

json path_to_json(const PathSpec& path) {
  if (path.kind == PathSpec::Kind::file)
    return {{"type", "file"}, {"path", path.file}};
  return {{"type", "synthetic"},
          {"num_active", path.num_active},
          {"decay_rate", path.decay_rate}};
}

json algorithm_to_json(const AlgorithmSpec& algo) {
  json g;
  if (algo.gain.kind == GainRule::Kind::identity)
    g = {{"type", "identity"}};
  else
    g = {{"type", "ipnlms"}, {"alpha", algo.gain.alpha}, {"xi", algo.gain.xi}};
  json s;
  switch (algo.step_kind) {
    case StepController::Kind::fixed:
      s = {{"type", "fixed"}, {"mu", algo.mu}};
      break;
    case StepController::Kind::set_membership:
      s = {{"type", "set_membership"}, {"gamma", algo.gamma}};
      break;
    case StepController::Kind::shrinkage_vss:
      s = {{"type", "shrinkage_vss"},
           {"lambda", algo.lambda},
           {"kappa", algo.kappa}};
      break;
  }
  return {{"name", algo.name}, {"gain", g}, {"step", s}, {"delta", algo.delta}};
}

json spec_to_json(const ExperimentSpec& spec) {
  json root;
  root["input"] = input_to_json(spec.input);
  root["filter_length"] = spec.filter_length;
  root["subbands"] = spec.num_subbands;
  root["prototype_length"] = spec.prototype_length;
  root["attenuation_db"] = spec.attenuation_db;
  if (std::isinf(spec.snr_db))
    root["snr_db"] = "inf";
  else
    root["snr_db"] = spec.snr_db;
  root["path"] = path_to_json(spec.path);
  if (spec.path_flip_sample)
    root["path_flip_sample"] = *spec.path_flip_sample;
  root["run_length"] = spec.run_length;
  root["ensemble_size"] = spec.ensemble_size;
  root["base_seed"] = spec.base_seed;
  root["metrics"] = {{"nmsd_stride", spec.metrics.nmsd_stride},
                     {"erle", spec.metrics.erle},
                     {"erle_window", spec.metrics.erle_window}};
  json algos = json::array();
  for (const auto& a : spec.algorithms) algos.push_back(algorithm_to_json(a));
  root["algorithms"] = algos;
  return root;
}

}  // namespace

ParsedConfig parse_config_text(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(Status::parse_error, std::string("config: ") + e.what());
  }
  try {
    return parse_config(root);
  } catch (const json::exception& e) {
    fail(Status::parse_error, std::string("config: ") + e.what());
  }
}

ParsedConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Status::io_error, "cannot open config: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string config_to_json(const ExperimentSpec& spec, int indent) {
  return spec_to_json(spec).dump(indent);
}

std::string apply_override(const std::string& json_text,
                           const std::string& assignment) {
  const size_t eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, Status::invalid_argument,
          "override must look like key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(Status::parse_error, std::string("config: ") + e.what());
  }

  // Walk dotted segments, creating objects as needed.
  json* node = &root;
  size_t start = 0;
  for (;;) {
    const size_t dot = key.find('.', start);
    const std::string segment =
        key.substr(start, dot == std::string::npos ? dot : dot - start);
    require(!segment.empty(), Status::invalid_argument,
            "override has an empty key segment");
    if (dot == std::string::npos) {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const json::exception&) {
        parsed = value;  // plain string
      }
      (*node)[segment] = parsed;
      break;
    }
    node = &(*node)[segment];
    start = dot + 1;
  }
  return root.dump();
}

void write_manifest(
    const EnsembleResult& result,
    const std::vector<std::pair<std::string, std::string>>& files,
    const std::filesystem::path& out_dir) {
  json manifest;
  manifest["spec"] = json::parse(config_to_json(result.spec));
  manifest["flip_tick"] = result.flip_tick;
  manifest["ticks"] = result.spec.num_ticks();

  json seeds = json::array();
  for (int t = 0; t < result.spec.ensemble_size; ++t) {
    const TrialSeeds s = trial_seeds(result.spec.base_seed, t);
    seeds.push_back({{"trial", t},
                     {"input_seed", s.input},
                     {"noise_seed", s.noise},
                     {"path_seed", s.path}});
  }
  manifest["trial_seeds"] = seeds;

  json outputs = json::object();
  for (const auto& [name, file] : files) outputs[name] = file;
  manifest["outputs"] = outputs;

  json summary = json::array();
  for (const auto& a : result.algorithms) {
    json entry = {{"name", a.name},
                  {"steady_state_nmsd_db", a.steady_state_nmsd_db},
                  {"diverged_trials", a.diverged_trials}};
    const auto t20 = a.time_to_db(-20.0, result.spec.num_subbands);
    entry["time_to_minus20db_fullband"] =
        t20 ? json(*t20) : json(nullptr);
    summary.push_back(entry);
  }
  manifest["summary"] = summary;

  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  if (!out)
    fail(Status::io_error,
         "cannot write " + (out_dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

}  // namespace pnsaf
