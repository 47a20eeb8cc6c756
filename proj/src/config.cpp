#include "fedtoe/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedtoe::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i)
    if (line[i] == '#' || line[i] == ';') return line.substr(0, i);
  return line;
}

[[noreturn]] void bad(const std::string& what) { throw std::runtime_error("config: " + what); }

double suffix_factor(const std::string& unit, double value, bool& dbm) {
  dbm = false;
  if (unit == "s") return 1.0;
  if (unit == "ms") return 1e-3;
  if (unit == "us") return 1e-6;
  if (unit == "Hz") return 1.0;
  if (unit == "kHz") return 1e3;
  if (unit == "MHz") return 1e6;
  if (unit == "GHz") return 1e9;
  if (unit == "m") return 1.0;
  if (unit == "km") return 1e3;
  if (unit == "W") return 1.0;
  if (unit == "mW") return 1e-3;
  if (unit == "dBm" || unit == "dBm/Hz") {
    dbm = true;
    return std::pow(10.0, (value - 30.0) / 10.0);
  }
  bad("unknown unit suffix '" + unit + "'");
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  bad("expected a boolean, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& v) {
  std::size_t used = 0;
  const unsigned long long x = std::stoull(v, &used);
  if (used != v.size()) bad("trailing characters after integer '" + v + "'");
  return static_cast<std::uint64_t>(x);
}

int parse_int(const std::string& v) {
  std::size_t used = 0;
  const long x = std::stol(v, &used);
  if (used != v.size()) bad("trailing characters after integer '" + v + "'");
  return static_cast<int>(x);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) bad("expected a comma-separated list, got '" + v + "'");
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

}  // namespace

double parse_value(const std::string& text) {
  const std::string v = trim(text);
  if (v.empty()) bad("empty value");
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    bad("expected a number, got '" + v + "'");
  }
  std::string unit = trim(v.substr(used));
  if (unit.empty()) return x;
  bool dbm = false;
  const double f = suffix_factor(unit, x, dbm);
  return dbm ? f : x * f;
}

ExperimentConfig parse(std::istream& in) {
  ExperimentConfig cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') bad("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "scenario" && section != "channel" && section != "allocator" &&
          section != "sim" && section != "output" && section != "seeds")
        bad("unknown section [" + section + "]");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) bad("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (section.empty()) bad("key '" + key + "' outside any section");
    if (key.empty()) bad("line " + std::to_string(lineno) + ": empty key");

    if (section == "scenario") {
      auto& s = cfg.scenario;
      if (key == "n") s.n = parse_int(val);
      else if (key == "radius") s.radius = parse_value(val);
      else if (key == "seed") s.seed = parse_u64(val);
      else if (key == "task") s.task = val;
      else if (key == "dim") s.dim = parse_int(val);
      else if (key == "heterogeneity") s.heterogeneity = parse_value(val);
      else if (key == "noise_std") s.noise_std = parse_value(val);
      else if (key == "classes") s.classes = parse_int(val);
      else if (key == "classes_per_client") s.classes_per_client = parse_int(val);
      else if (key == "samples_per_client") s.samples_per_client = parse_int(val);
      else if (key == "feature_dim") s.feature_dim = parse_int(val);
      else if (key == "blob_spread") s.blob_spread = parse_value(val);
      else bad("unknown key '" + key + "' in [scenario]");
    } else if (section == "channel") {
      auto& c = cfg.channel;
      if (key == "k_db") c.k_db = parse_value(val);
      else if (key == "lambda") c.lambda = parse_value(val);
      else if (key == "sigma_db") c.sigma_db = parse_value(val);
      else if (key == "n0") c.n0 = parse_value(val);
      else bad("unknown key '" + key + "' in [channel]");
    } else if (section == "allocator") {
      auto& a = cfg.allocator;
      if (key == "q_max") a.q_max = parse_value(val);
      else if (key == "tau_max") a.tau_max = parse_value(val);
      else if (key == "w_total") a.w_total = parse_value(val);
      else if (key == "p_max") a.p_max = parse_value(val);
      else if (key == "b_min") a.b_min = parse_int(val);
      else if (key == "b_max") a.b_max = parse_int(val);
      else if (key == "m") a.m = parse_int(val);
      else if (key == "mu") a.mu = parse_value(val);
      else bad("unknown key '" + key + "' in [allocator]");
    } else if (section == "sim") {
      auto& s = cfg.sim;
      if (key == "k") s.k = parse_int(val);
      else if (key == "e") s.e_local = parse_int(val);
      else if (key == "m_rounds") s.m_rounds = parse_int(val);
      else if (key == "gamma") s.gamma = parse_value(val);
      else if (key == "batch") s.batch = parse_int(val);
      else if (key == "schemes") s.schemes = split_list(val);
      else if (key == "channel_mode") s.channel_mode = val;
      else if (key == "retransmit_cap") s.retransmit_cap = parse_int(val);
      else if (key == "requantize_on_retransmit") s.requantize_on_retransmit = parse_bool(val);
      else if (key == "baseline_bits") s.baseline_bits = parse_int(val);
      else bad("unknown key '" + key + "' in [sim]");
    } else if (section == "output") {
      auto& o = cfg.output;
      if (key == "dir") o.dir = val;
      else if (key == "svg") o.svg = parse_bool(val);
      else bad("unknown key '" + key + "' in [output]");
    } else {  // seeds
      auto& s = cfg.seeds;
      if (key == "sampling") s.sampling = parse_u64(val);
      else if (key == "sgd") s.sgd = parse_u64(val);
      else if (key == "quantizer") s.quantizer = parse_u64(val);
      else if (key == "channel") s.channel = parse_u64(val);
      else bad("unknown key '" + key + "' in [seeds]");
    }
  }
  if (cfg.scenario.task != "quadratic" && cfg.scenario.task != "logistic")
    bad("scenario task must be 'quadratic' or 'logistic', got '" + cfg.scenario.task + "'");
  if (cfg.sim.channel_mode != "bernoulli" && cfg.sim.channel_mode != "shadowing")
    bad("channel_mode must be 'bernoulli' or 'shadowing', got '" + cfg.sim.channel_mode + "'");
  return cfg;
}

ExperimentConfig parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open '" + path + "'");
  return parse(in);
}

ExperimentConfig parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

std::string serialize(const ExperimentConfig& cfg) {
  std::ostringstream out;
  const auto& s = cfg.scenario;
  out << "[scenario]\n"
      << "n = " << s.n << "\n"
      << "radius = " << fmt(s.radius) << "\n"
      << "seed = " << s.seed << "\n"
      << "task = " << s.task << "\n"
      << "dim = " << s.dim << "\n"
      << "heterogeneity = " << fmt(s.heterogeneity) << "\n"
      << "noise_std = " << fmt(s.noise_std) << "\n"
      << "classes = " << s.classes << "\n"
      << "classes_per_client = " << s.classes_per_client << "\n"
      << "samples_per_client = " << s.samples_per_client << "\n"
      << "feature_dim = " << s.feature_dim << "\n"
      << "blob_spread = " << fmt(s.blob_spread) << "\n\n";
  const auto& c = cfg.channel;
  out << "[channel]\n"
      << "k_db = " << fmt(c.k_db) << "\n"
      << "lambda = " << fmt(c.lambda) << "\n"
      << "sigma_db = " << fmt(c.sigma_db) << "\n"
      << "n0 = " << fmt(c.n0) << "\n\n";
  const auto& a = cfg.allocator;
  out << "[allocator]\n"
      << "q_max = " << fmt(a.q_max) << "\n"
      << "tau_max = " << fmt(a.tau_max) << "\n"
      << "w_total = " << fmt(a.w_total) << "\n"
      << "p_max = " << fmt(a.p_max) << "\n"
      << "b_min = " << a.b_min << "\n"
      << "b_max = " << a.b_max << "\n"
      << "m = " << a.m << "\n"
      << "mu = " << fmt(a.mu) << "\n\n";
  const auto& m = cfg.sim;
  out << "[sim]\n"
      << "k = " << m.k << "\n"
      << "e = " << m.e_local << "\n"
      << "m_rounds = " << m.m_rounds << "\n"
      << "gamma = " << fmt(m.gamma) << "\n"
      << "batch = " << m.batch << "\n"
      << "schemes = " << join(m.schemes) << "\n"
      << "channel_mode = " << m.channel_mode << "\n"
      << "retransmit_cap = " << m.retransmit_cap << "\n"
      << "requantize_on_retransmit = " << (m.requantize_on_retransmit ? "true" : "false") << "\n"
      << "baseline_bits = " << m.baseline_bits << "\n\n";
  out << "[output]\n"
      << "dir = " << cfg.output.dir << "\n"
      << "svg = " << (cfg.output.svg ? "true" : "false") << "\n\n";
  const auto& sd = cfg.seeds;
  out << "[seeds]\n"
      << "sampling = " << sd.sampling << "\n"
      << "sgd = " << sd.sgd << "\n"
      << "quantizer = " << sd.quantizer << "\n"
      << "channel = " << sd.channel << "\n";
  return out.str();
}

bool operator==(const ScenarioSection& a, const ScenarioSection& b) {
  return a.n == b.n && a.radius == b.radius && a.seed == b.seed && a.task == b.task &&
         a.dim == b.dim && a.heterogeneity == b.heterogeneity && a.noise_std == b.noise_std &&
         a.classes == b.classes && a.classes_per_client == b.classes_per_client &&
         a.samples_per_client == b.samples_per_client && a.feature_dim == b.feature_dim &&
         a.blob_spread == b.blob_spread;
}

bool operator==(const AllocatorSection& a, const AllocatorSection& b) {
  return a.q_max == b.q_max && a.tau_max == b.tau_max && a.w_total == b.w_total &&
         a.p_max == b.p_max && a.b_min == b.b_min && a.b_max == b.b_max && a.m == b.m &&
         a.mu == b.mu;
}

bool operator==(const SimSection& a, const SimSection& b) {
  return a.k == b.k && a.e_local == b.e_local && a.m_rounds == b.m_rounds && a.gamma == b.gamma &&
         a.batch == b.batch && a.schemes == b.schemes && a.channel_mode == b.channel_mode &&
         a.retransmit_cap == b.retransmit_cap &&
         a.requantize_on_retransmit == b.requantize_on_retransmit &&
         a.baseline_bits == b.baseline_bits;
}

bool operator==(const OutputSection& a, const OutputSection& b) {
  return a.dir == b.dir && a.svg == b.svg;
}

bool operator==(const SeedsSection& a, const SeedsSection& b) {
  return a.sampling == b.sampling && a.sgd == b.sgd && a.quantizer == b.quantizer &&
         a.channel == b.channel;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.scenario == b.scenario && a.channel.k_db == b.channel.k_db &&
         a.channel.lambda == b.channel.lambda && a.channel.sigma_db == b.channel.sigma_db &&
         a.channel.n0 == b.channel.n0 && a.allocator == b.allocator && a.sim == b.sim &&
         a.output == b.output && a.seeds == b.seeds;
}

}  // namespace fedtoe::config
