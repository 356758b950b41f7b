#pragma once

#include <string>
#include <vector>

#include "ctxda/analysis.hpp"

namespace ctxda::testing {

struct PairCount {
  const char* gt;
  const char* nc;
  const char* wc;
  std::size_t num;
};

/// Failure pairs (both models wrong) with the counts of the reference study.
inline const std::vector<PairCount>& reference_failures() {
  static const std::vector<PairCount> rows = {
      {"sv", "sd", "sd", 198},
      {"sd", "sv", "sv", 51},
  };
  return rows;
}

/// Rescue pairs (context model right, baseline wrong) from the same study.
inline const std::vector<PairCount>& reference_rescues() {
  static const std::vector<PairCount> rows = {
      {"ny", "b", "ny", 33}, {"aa", "b", "aa", 29}, {"aa", "sd", "aa", 12},
      {"b", "aa", "b", 23},  {"b", "%", "b", 16},
  };
  return rows;
}

constexpr std::size_t kReferenceTotal = 4186;
constexpr std::size_t kReferenceRescueTotal = 330;

inline EvalRecord fixture_record(std::size_t i, const std::string& gt, const std::string& nc,
                                 const std::string& wc) {
  EvalRecord r;
  r.conversation_id = "fx" + std::to_string(i / 200);
  r.index = i % 200;
  r.gold = gt;
  r.nc = nc;
  r.wc = wc;
  r.num_tokens = 1 + i % 7;
  return r;
}

/// 4,186 records holding the reference failure and rescue counts. The other
/// rescues are spread over small made-up pairs so the named ones stay on
/// top; the rest are correct under both models, except 50 that only the
/// baseline gets right.
inline std::vector<EvalRecord> reference_fixture() {
  std::vector<EvalRecord> out;
  std::size_t i = 0;
  auto add = [&](const std::string& gt, const std::string& nc, const std::string& wc,
                 std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) out.push_back(fixture_record(i++, gt, nc, wc));
  };
  for (const auto& p : reference_failures()) add(p.gt, p.nc, p.wc, p.num);
  std::size_t rescued = 0;
  for (const auto& p : reference_rescues()) {
    add(p.gt, p.nc, p.wc, p.num);
    rescued += p.num;
  }
  for (int k = 0; rescued < kReferenceRescueTotal; ++k) {
    const std::size_t n = std::min<std::size_t>(10, kReferenceRescueTotal - rescued);
    const std::string tag = "r" + std::to_string(k);
    add(tag, "sd", tag, n);
    rescued += n;
  }
  add("qy", "qy", "sd", 50);
  add("b", "b", "b", 600);
  add("sd", "sd", "sd", kReferenceTotal - out.size());
  return out;
}

}  // namespace ctxda::testing
