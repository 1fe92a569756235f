#include "dualopt/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace dualopt {

namespace {

std::string trim(const std::string& s) {
  const std::size_t first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) {
    return "";
  }
  const std::size_t last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string last_segment(const std::string& key) {
  const std::size_t dot = key.rfind('.');
  return dot == std::string::npos ? key : key.substr(dot + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config: malformed value '" + value + "' for key '" + key + "'");
}

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE) {
    bad_value(key, value);
  }
  return x;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE) {
    bad_value(key, value);
  }
  return static_cast<std::int64_t>(x);
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE || value.find('-') == 0) {
    bad_value(key, value);
  }
  return static_cast<std::uint64_t>(x);
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Method parse_method(const std::string& key, const std::string& value) {
  if (value == "joint") return Method::Joint;
  if (value == "alternate") return Method::Alternate;
  if (value == "dualoptim") return Method::DualOptim;
  if (value == "dualoptim_plus") return Method::DualOptimPlus;
  if (value == "scaffold") return Method::Scaffold;
  if (value == "fedcm") return Method::FedCM;
  if (value == "local_adam") return Method::LocalAdam;
  bad_value(key, value);
}

const char* format_method(Method m) { return method_name(m); }

TaskKind parse_task(const std::string& key, const std::string& value) {
  if (value == "conflicting_quadratic") return TaskKind::ConflictingQuadratic;
  if (value == "logistic_forget_retain") return TaskKind::LogisticForgetRetain;
  if (value == "three_task") return TaskKind::ThreeTask;
  bad_value(key, value);
}

const char* format_task(TaskKind k) {
  switch (k) {
    case TaskKind::ConflictingQuadratic: return "conflicting_quadratic";
    case TaskKind::LogisticForgetRetain: return "logistic_forget_retain";
    case TaskKind::ThreeTask: return "three_task";
  }
  return "conflicting_quadratic";
}

OptimMode parse_mode(const std::string& key, const std::string& value) {
  if (value == "adamw") return OptimMode::AdamW;
  if (value == "muon") return OptimMode::Muon;
  bad_value(key, value);
}

const char* format_mode(OptimMode m) { return m == OptimMode::AdamW ? "adamw" : "muon"; }

BaseUpdateTiming parse_timing(const std::string& key, const std::string& value) {
  if (value == "before_delta") return BaseUpdateTiming::BeforeDelta;
  if (value == "after_delta") return BaseUpdateTiming::AfterDelta;
  if (value == "after_param") return BaseUpdateTiming::AfterParam;
  bad_value(key, value);
}

const char* format_timing(BaseUpdateTiming t) {
  switch (t) {
    case BaseUpdateTiming::BeforeDelta: return "before_delta";
    case BaseUpdateTiming::AfterDelta: return "after_delta";
    case BaseUpdateTiming::AfterParam: return "after_param";
  }
  return "after_param";
}

BaseUpdateInput parse_input(const std::string& key, const std::string& value) {
  if (value == "grad") return BaseUpdateInput::Grad;
  if (value == "grad_minus_delta") return BaseUpdateInput::GradMinusDelta;
  bad_value(key, value);
}

const char* format_input(BaseUpdateInput i) {
  return i == BaseUpdateInput::Grad ? "grad" : "grad_minus_delta";
}

QuantizedSubset parse_subset(const std::string& key, const std::string& value) {
  if (value == "none") return QuantizedSubset::None;
  if (value == "base") return QuantizedSubset::Base;
  if (value == "delta") return QuantizedSubset::Delta;
  if (value == "both") return QuantizedSubset::Both;
  bad_value(key, value);
}

const char* format_subset(QuantizedSubset s) {
  switch (s) {
    case QuantizedSubset::None: return "none";
    case QuantizedSubset::Base: return "base";
    case QuantizedSubset::Delta: return "delta";
    case QuantizedSubset::Both: return "both";
  }
  return "none";
}

std::optional<double> parse_optional_double(const std::string& key, const std::string& value) {
  if (value == "none") return std::nullopt;
  return parse_double(key, value);
}

std::string format_optional_double(const std::optional<double>& x) {
  return x.has_value() ? format_double(*x) : "none";
}

void apply_entry(RunConfig& c, const std::string& raw_key, const std::string& value) {
  const std::string key = last_segment(raw_key);
  if (key == "method") {
    c.method = parse_method(key, value);
  } else if (key == "task") {
    c.task = parse_task(key, value);
  } else if (key == "dim") {
    c.dim = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "total_steps") {
    c.total_steps = parse_int(key, value);
  } else if (key == "forget_freq") {
    c.forget_freq = parse_int(key, value);
  } else if (key == "retain_freq") {
    c.retain_freq = parse_int(key, value);
  } else if (key == "peak_lr") {
    c.peak_lr = parse_double(key, value);
  } else if (key == "warmup_steps") {
    c.warmup_steps = parse_int(key, value);
  } else if (key == "beta1") {
    c.beta1 = parse_double(key, value);
  } else if (key == "beta2") {
    c.beta2 = parse_double(key, value);
  } else if (key == "eps") {
    c.eps = parse_double(key, value);
  } else if (key == "weight_decay") {
    c.weight_decay = parse_double(key, value);
  } else if (key == "mode") {
    c.mode = parse_mode(key, value);
  } else if (key == "muon_momentum") {
    c.muon_momentum = parse_double(key, value);
  } else if (key == "ns_iterations") {
    c.ns_iterations = parse_int(key, value);
  } else if (key == "base_update_timing") {
    c.base_update_timing = parse_timing(key, value);
  } else if (key == "base_update_input") {
    c.base_update_input = parse_input(key, value);
  } else if (key == "base_beta1") {
    c.base_beta1 = parse_optional_double(key, value);
  } else if (key == "base_beta2") {
    c.base_beta2 = parse_optional_double(key, value);
  } else if (key == "quantize_states") {
    c.quantize_states = parse_subset(key, value);
  } else if (key == "block_size") {
    c.block_size = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "forget_weight") {
    c.forget_weight = parse_double(key, value);
  } else if (key == "clip_radius") {
    c.clip_radius = parse_double(key, value);
  } else if (key == "theta0_offset") {
    c.theta0_offset = parse_double(key, value);
  } else if (key == "seed") {
    c.seed = parse_uint(key, value);
  } else {
    throw std::invalid_argument("config: unknown key '" + raw_key + "'");
  }
}

}  // namespace

ConfigEntries read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("config: cannot open '" + path + "'");
  }
  ConfigEntries entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno += 1;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " of '" + path +
                                  "' is not key=value");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return entries;
}

std::pair<std::string, std::string> parse_config_entry(const std::string& arg) {
  const std::size_t eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("config: override '" + arg + "' is not key=value");
  }
  return {trim(arg.substr(0, eq)), trim(arg.substr(eq + 1))};
}

RunConfig config_from_entries(const ConfigEntries& entries) {
  RunConfig c;
  for (const auto& [key, value] : entries) {
    apply_entry(c, key, value);
  }
  return c;
}

ConfigEntries config_echo(const RunConfig& c) {
  ConfigEntries e;
  e.emplace_back("method", format_method(c.method));
  e.emplace_back("task", format_task(c.task));
  e.emplace_back("dim", std::to_string(c.dim));
  e.emplace_back("total_steps", std::to_string(c.total_steps));
  e.emplace_back("forget_freq", std::to_string(c.forget_freq));
  e.emplace_back("retain_freq", std::to_string(c.retain_freq));
  e.emplace_back("peak_lr", format_double(c.peak_lr));
  e.emplace_back("warmup_steps", std::to_string(c.warmup_steps));
  e.emplace_back("beta1", format_double(c.beta1));
  e.emplace_back("beta2", format_double(c.beta2));
  e.emplace_back("eps", format_double(c.eps));
  e.emplace_back("weight_decay", format_double(c.weight_decay));
  e.emplace_back("mode", format_mode(c.mode));
  e.emplace_back("muon_momentum", format_double(c.muon_momentum));
  e.emplace_back("ns_iterations", std::to_string(c.ns_iterations));
  e.emplace_back("base_update_timing", format_timing(c.base_update_timing));
  e.emplace_back("base_update_input", format_input(c.base_update_input));
  e.emplace_back("base_beta1", format_optional_double(c.base_beta1));
  e.emplace_back("base_beta2", format_optional_double(c.base_beta2));
  e.emplace_back("quantize_states", format_subset(c.quantize_states));
  e.emplace_back("block_size", std::to_string(c.block_size));
  e.emplace_back("forget_weight", format_double(c.forget_weight));
  e.emplace_back("clip_radius", format_double(c.clip_radius));
  e.emplace_back("theta0_offset", format_double(c.theta0_offset));
  e.emplace_back("seed", std::to_string(c.seed));
  return e;
}

std::string entries_to_text(const ConfigEntries& entries) {
  std::string out;
  for (const auto& [key, value] : entries) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

}  // namespace dualopt
