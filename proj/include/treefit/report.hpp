#pragma once

// Run summaries written as report.json by the command-line tool.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "treefit/optimizer.hpp"

namespace treefit {

using Json = nlohmann::ordered_json;

inline constexpr int kReportVersion = 1;

struct RootResult {
  std::size_t root = 0;
  double linf = 0.0;
  double l1_avg = 0.0;
  std::optional<double> baseline_linf;   // plain embedding of the input, same root
  std::optional<double> baseline_l1_avg;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  s.min = s.max = v.front();
  for (double x : v) {
    s.mean += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(v.size()));
  return s;
}

struct RunReport {
  std::string command;
  std::string dataset;
  std::size_t n = 0;
  std::optional<FitConfig> config;
  std::optional<std::size_t> epochs_run;
  std::optional<bool> stopped_early;
  std::optional<std::size_t> best_epoch;
  std::optional<double> best_loss;
  std::optional<double> delta_input;
  std::optional<double> delta_fitted;
  std::optional<double> fit_linf;  // distance of the fitted matrix to the input
  std::optional<double> theorem2_bound;
  std::vector<RootResult> roots;
  double wall_clock_seconds = 0.0;
};

namespace detail {

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline Json summary_json(const Summary& s) {
  return Json{{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}};
}

}  // namespace detail

inline Json config_json(const FitConfig& c) {
  return Json{{"mu", c.mu},
              {"lambda", c.lambda},
              {"K", c.batches},
              {"m", c.batch_size},
              {"lr", c.lr},
              {"epochs", c.max_epochs},
              {"patience", c.patience},
              {"seed", c.seed},
              {"weight_floor", c.weight_floor},
              {"accum_chunks", c.accum_chunks}};
}

inline Json to_json(const RunReport& r) {
  Json j;
  j["version"] = kReportVersion;
  j["command"] = r.command;
  j["dataset"] = r.dataset;
  j["n"] = r.n;
  j["config"] = r.config ? config_json(*r.config) : Json(nullptr);
  j["epochs_run"] = detail::optional_json(r.epochs_run);
  j["stopped_early"] = detail::optional_json(r.stopped_early);
  j["best_epoch"] = detail::optional_json(r.best_epoch);
  j["best_loss"] = detail::optional_json(r.best_loss);
  j["delta_input"] = detail::optional_json(r.delta_input);
  j["delta_fitted"] = detail::optional_json(r.delta_fitted);
  j["fit_linf"] = detail::optional_json(r.fit_linf);
  j["theorem2_bound"] = detail::optional_json(r.theorem2_bound);

  Json roots = Json::array();
  std::vector<double> linf, l1, base_linf, base_l1;
  for (const auto& rr : r.roots) {
    roots.push_back(Json{{"root", rr.root},
                         {"linf", rr.linf},
                         {"l1_avg", rr.l1_avg},
                         {"baseline_linf", detail::optional_json(rr.baseline_linf)},
                         {"baseline_l1_avg", detail::optional_json(rr.baseline_l1_avg)}});
    linf.push_back(rr.linf);
    l1.push_back(rr.l1_avg);
    if (rr.baseline_linf) base_linf.push_back(*rr.baseline_linf);
    if (rr.baseline_l1_avg) base_l1.push_back(*rr.baseline_l1_avg);
  }
  j["roots"] = std::move(roots);
  if (r.roots.empty()) {
    j["aggregate"] = nullptr;
  } else {
    Json agg{{"linf", detail::summary_json(summarize(linf))}, {"l1_avg", detail::summary_json(summarize(l1))}};
    if (base_linf.size() == r.roots.size()) agg["baseline_linf"] = detail::summary_json(summarize(base_linf));
    if (base_l1.size() == r.roots.size()) agg["baseline_l1_avg"] = detail::summary_json(summarize(base_l1));
    j["aggregate"] = std::move(agg);
  }
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  return j;
}

}  // namespace treefit
