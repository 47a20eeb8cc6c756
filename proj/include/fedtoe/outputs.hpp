#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fedtoe/allocator.hpp"
#include "fedtoe/analysis.hpp"
#include "fedtoe/fl_engine.hpp"

namespace fedtoe::out {

// Every float in every artifact goes through this (12 significant digits)
// so reruns are byte-identical.
std::string g12(double x);

std::string allocation_csv(const alloc::AllocationSolution& sol);
std::string rounds_jsonl(const std::string& scheme, const engine::RunResult& res);
std::string summary_csv(
    const std::vector<std::pair<std::string, const engine::RunResult*>>& runs);
std::string bound_terms_csv(const stats::BoundBreakdown& terms);

struct Series {
  std::string name;
  std::vector<double> y;  // value per round, round index is implicit
};

// Two fixed panels (objective, squared gradient norm), one polyline per
// scheme, log10 y-axis whenever a panel's data is all-positive.
std::string curves_svg(const std::vector<Series>& loss, const std::vector<Series>& grad);

void write_text(const std::string& path, const std::string& content);

}  // namespace fedtoe::out
