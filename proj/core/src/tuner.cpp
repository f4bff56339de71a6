#include "fairpipe/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

namespace fairpipe {

void FairnessTarget::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw Error(ErrorCode::InvalidArgument, "threshold must satisfy 0 < tau < 1");
  if (!(tolerance > 0.0 && tolerance < threshold))
    throw Error(ErrorCode::InvalidArgument, "tolerance must satisfy 0 < eps < tau");
}

bool FairnessTarget::in_band(double value) const {
  // The 1e-12 slack keeps decimal edges such as |0.06 - 0.05| <= 0.01 inside.
  return std::abs(value - threshold) <= tolerance + 1e-12;
}

std::string_view to_string(TuneStatus s) {
  switch (s) {
    case TuneStatus::Converged: return "Converged";
    case TuneStatus::BudgetExhausted: return "BudgetExhausted";
    case TuneStatus::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

TuneStatus tune_status_from_string(std::string_view s) {
  if (s == "Converged") return TuneStatus::Converged;
  if (s == "Infeasible") return TuneStatus::Infeasible;
  return TuneStatus::BudgetExhausted;
}

std::vector<double> grid_points(StrengthGrid grid) {
  if (grid == StrengthGrid::Geometric) return {0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0};
  std::vector<double> out;
  for (int k = 0; k <= 6; ++k) out.push_back(0.5 * k / 6.0);
  return out;
}

Json to_json(const TuningTrace& t) {
  Json evals = Json::array();
  for (const auto& e : t.evaluations)
    evals.push_back({{"strength", round6(e.strength)},
                     {"val_metric", round6(e.val_metric)},
                     {"val_accuracy", round6(e.val_accuracy)}});
  return {{"metric", to_string(t.target.metric)},
          {"threshold", round6(t.target.threshold)},
          {"tolerance", round6(t.target.tolerance)},
          {"evaluations", evals},
          {"selected", t.selected},
          {"budget", t.budget},
          {"budget_used", t.budget_used},
          {"status", to_string(t.status)}};
}

TuningTrace trace_from_json(const Json& j) {
  TuningTrace t;
  t.target.metric = metric_from_string(j.at("metric").get<std::string>());
  t.target.threshold = j.at("threshold").get<double>();
  t.target.tolerance = j.at("tolerance").get<double>();
  for (const auto& e : j.at("evaluations"))
    t.evaluations.push_back(
        {e.at("strength").get<double>(), e.at("val_metric").get<double>(), e.at("val_accuracy").get<double>()});
  t.selected = j.at("selected").get<std::size_t>();
  t.budget = j.at("budget").get<std::size_t>();
  t.budget_used = j.at("budget_used").get<std::size_t>();
  t.status = tune_status_from_string(j.at("status").get<std::string>());
  return t;
}

std::optional<double> signed_gap(const EvalResult& e, Metric m) {
  if (m != Metric::DP) return std::nullopt;
  return e.group_rates[1].positive_rate - e.group_rates[0].positive_rate;
}

namespace {

Probe call_probe(const std::function<Probe(std::size_t, double)>& probe, std::size_t index, double strength) {
  try {
    return probe(index, strength);
  } catch (const std::exception& e) {
    std::ostringstream msg;
    msg << "strength " << strength << ": " << e.what();
    throw Error(ErrorCode::BuilderFailure, msg.str());
  }
}

}  // namespace

TuningTrace search(const std::function<Probe(std::size_t, double)>& probe, const FairnessTarget& target,
                   const TuneOptions& options) {
  target.validate();
  if (options.budget < 5) throw Error(ErrorCode::InvalidArgument, "tuning budget must be at least 5");

  TuningTrace trace;
  trace.target = target;
  trace.budget = options.budget;
  const double tau = target.threshold;

  std::vector<std::optional<double>> signs;  // parallel to trace.evaluations
  auto record = [&](double strength, const Probe& p) {
    signs.push_back(p.signed_gap);
    trace.evaluations.push_back({strength, p.metric, p.accuracy});
    trace.budget_used = trace.evaluations.size();
    if (options.on_evaluation) options.on_evaluation(trace.evaluations.back());
    if (options.on_progress) options.on_progress(trace.budget_used, options.budget);
  };
  auto any_in_band = [&] {
    return std::any_of(trace.evaluations.begin(), trace.evaluations.end(),
                       [&](const TuneEvaluation& e) { return target.in_band(e.val_metric); });
  };

  // Phase 1: grid.
  auto grid = grid_points(options.grid);
  if (grid.size() > options.budget) grid.resize(options.budget);
  const std::size_t width = std::max<std::size_t>(1, options.max_parallel);
  for (std::size_t start = 0; start < grid.size(); start += width) {
    const std::size_t stop = std::min(grid.size(), start + width);
    if (stop - start == 1) {
      record(grid[start], call_probe(probe, start, grid[start]));
      continue;
    }
    std::vector<std::future<Probe>> jobs;
    for (std::size_t i = start; i < stop; ++i)
      jobs.push_back(std::async(std::launch::async, [&, i] { return call_probe(probe, i, grid[i]); }));
    // Trace order is the logical grid order regardless of completion order.
    std::vector<Probe> results;
    std::exception_ptr failure;
    for (auto& j : jobs) {
      try {
        results.push_back(j.get());
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    for (std::size_t i = start; i < stop; ++i) record(grid[i], results[i - start]);
  }

  // Phase 2: bisection on the straddling neighbor pair nearest tau. Without
  // one, probe next to the lowest metric seen until a crossing turns up.
  const bool geometric = options.grid == StrengthGrid::Geometric;
  auto midpoint = [&](double lo, double hi) { return (geometric && lo > 0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi); };
  auto splittable = [&](double lo, double hi) {
    const double mid = midpoint(lo, hi);
    return mid > lo && mid < hi && (hi - lo) > 1e-9 * std::max(1.0, hi);
  };
  bool bracketed = false;
  bool toggle = false;
  std::size_t stale = 0;  // dip probes since the lowest metric last improved
  constexpr std::size_t kMaxStale = 6;
  while (trace.budget_used < options.budget && !any_in_band()) {
    std::vector<std::size_t> order(trace.evaluations.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return trace.evaluations[a].strength < trace.evaluations[b].strength;
    });
    std::vector<TuneEvaluation> sorted;
    for (auto i : order) sorted.push_back(trace.evaluations[i]);
    std::optional<std::pair<double, double>> next;
    double pick_gap = 0.0;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      const double a = sorted[i].val_metric - tau, b = sorted[i + 1].val_metric - tau;
      const auto sa = signs[order[i]], sb = signs[order[i + 1]];
      const bool straddles = (a > 0 && b < 0) || (a < 0 && b > 0);
      const bool flips = sa && sb && ((*sa > 0 && *sb < 0) || (*sa < 0 && *sb > 0));
      if (!straddles && !flips) continue;
      if (!splittable(sorted[i].strength, sorted[i + 1].strength)) continue;
      const double gap = std::min(std::abs(a), std::abs(b));
      if (!next || gap < pick_gap) {
        next = {sorted[i].strength, sorted[i + 1].strength};
        pick_gap = gap;
      }
    }
    if (next) {
      bracketed = true;
    } else {
      const auto low = static_cast<std::size_t>(
          std::min_element(sorted.begin(), sorted.end(),
                           [](const auto& a, const auto& b) { return a.val_metric < b.val_metric; }) -
          sorted.begin());
      if (sorted[low].val_metric < tau || stale >= kMaxStale) break;
      std::vector<std::pair<double, double>> sides;
      if (low > 0 && splittable(sorted[low - 1].strength, sorted[low].strength))
        sides.push_back({sorted[low - 1].strength, sorted[low].strength});
      if (low + 1 < sorted.size() && splittable(sorted[low].strength, sorted[low + 1].strength))
        sides.push_back({sorted[low].strength, sorted[low + 1].strength});
      if (sides.empty()) break;
      next = sides[toggle && sides.size() > 1 ? 1 : 0];
      toggle = !toggle;
      const double mid = midpoint(next->first, next->second);
      const auto p = call_probe(probe, trace.evaluations.size(), mid);
      record(mid, p);
      stale = p.metric < sorted[low].val_metric ? 0 : stale + 1;
      continue;
    }
    const double mid = midpoint(next->first, next->second);
    record(mid, call_probe(probe, trace.evaluations.size(), mid));
  }

  // Selection.
  const auto& ev = trace.evaluations;
  std::optional<std::size_t> best;
  if (any_in_band()) {
    trace.status = TuneStatus::Converged;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      if (!target.in_band(ev[i].val_metric)) continue;
      if (!best || ev[i].val_accuracy > ev[*best].val_accuracy ||
          (ev[i].val_accuracy == ev[*best].val_accuracy && ev[i].strength < ev[*best].strength))
        best = i;
    }
  } else {
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const double gi = std::abs(ev[i].val_metric - tau);
      if (!best) {
        best = i;
        continue;
      }
      const double gb = std::abs(ev[*best].val_metric - tau);
      if (gi < gb || (gi == gb && (ev[i].val_accuracy > ev[*best].val_accuracy ||
                                   (ev[i].val_accuracy == ev[*best].val_accuracy &&
                                    ev[i].strength < ev[*best].strength))))
        best = i;
    }
    const auto strongest = std::max_element(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
      return a.strength < b.strength;
    });
    const bool above_at_max = strongest != ev.end() && strongest->val_metric > tau + target.tolerance;
    trace.status = (above_at_max && !bracketed) ? TuneStatus::Infeasible : TuneStatus::BudgetExhausted;
  }
  trace.selected = best.value_or(0);
  return trace;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "threshold,achieved_metric,accuracy,deviation,status\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& r : rows)
    out << r.threshold << ',' << r.achieved << ',' << r.accuracy << ',' << r.deviation << ','
        << to_string(r.status) << '\n';
  return out.str();
}

std::vector<double> parse_threshold_range(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad threshold range '" + spec + "'");
    }
  }
  if (parts.size() == 1) parts = {parts[0], parts[0], 1.0};
  if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, "threshold range must be start:stop:step");
  const double start = parts[0], stop = parts[1], step = parts[2];
  if (!(step > 0)) throw Error(ErrorCode::InvalidArgument, "threshold step must be positive");
  if (stop < start) throw Error(ErrorCode::InvalidArgument, "threshold range is inverted");
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long k = 0; k <= count; ++k) out.push_back(std::round((start + static_cast<double>(k) * step) * 1e9) / 1e9);
  return out;
}

}  // namespace fairpipe
