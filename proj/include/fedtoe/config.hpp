#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedtoe/channel.hpp"

namespace fedtoe::config {

// Flat sectioned key=value text. Values accept unit suffixes (ms, s, Hz,
// kHz, MHz, GHz, m, km, W, mW, dBm, dBm/Hz) and are stored in SI units.

struct ScenarioSection {
  int n = 100;
  double radius = 600.0;       // m
  std::uint64_t seed = 1;
  std::string task = "quadratic";  // quadratic | logistic
  int dim = 20;
  double heterogeneity = 1.0;
  double noise_std = 1.0;
  int classes = 10;            // logistic task
  int classes_per_client = 2;
  int samples_per_client = 50;
  int feature_dim = 8;
  double blob_spread = 1.0;
};

struct AllocatorSection {
  double q_max = 0.1;
  double tau_max = 0.05;       // s
  double w_total = 20e6;       // Hz
  double p_max = 0.2;          // W
  int b_min = 64;              // header bits for the per-group minima
  int b_max = 64;              // and maxima
  int m = 0;                   // payload coordinates; 0 = derive from task
  double mu = -1.0;            // header bits; <0 = derive from groups
};

struct SimSection {
  int k = 10;
  int e_local = 5;
  int m_rounds = 500;
  double gamma = 0.05;
  int batch = 128;
  std::vector<std::string> schemes = {"fedtoe-offline", "ideal"};
  std::string channel_mode = "bernoulli";  // bernoulli | shadowing
  int retransmit_cap = 10000;
  bool requantize_on_retransmit = false;
  int baseline_bits = 5;
};

struct OutputSection {
  std::string dir = "out";
  bool svg = true;
};

struct SeedsSection {
  std::uint64_t sampling = 1;
  std::uint64_t sgd = 2;
  std::uint64_t quantizer = 3;
  std::uint64_t channel = 4;
};

struct ExperimentConfig {
  ScenarioSection scenario;
  channel::ChannelParams channel;  // path-loss, shadowing and noise constants
  AllocatorSection allocator;
  SimSection sim;
  OutputSection output;
  SeedsSection seeds;
};

// Parses a single scalar, applying any unit suffix. Throws on garbage.
double parse_value(const std::string& text);

ExperimentConfig parse(std::istream& in);
ExperimentConfig parse_file(const std::string& path);
ExperimentConfig parse_string(const std::string& text);

// Emits every key in a fixed order, floats at 12 significant digits, SI
// units (no suffixes). parse(serialize(c)) == c for any c produced by
// parse (12-digit decimals survive the double round trip).
std::string serialize(const ExperimentConfig& cfg);

bool operator==(const ScenarioSection& a, const ScenarioSection& b);
bool operator==(const AllocatorSection& a, const AllocatorSection& b);
bool operator==(const SimSection& a, const SimSection& b);
bool operator==(const OutputSection& a, const OutputSection& b);
bool operator==(const SeedsSection& a, const SeedsSection& b);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace fedtoe::config
