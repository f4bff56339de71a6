#include "fairpipe/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fairpipe/error.hpp"

namespace fairpipe {

namespace {

std::string group_key(const Column& sensitive, std::size_t row) {
  return sensitive.missing(row) ? std::string() : sensitive.cell_text(row);
}

std::string mode_of(const std::map<std::string, std::size_t>& counts) {
  std::string best;
  std::size_t best_n = 0;
  for (const auto& [tok, n] : counts)  // map order gives the lexicographic tie-break
    if (n > best_n) {
      best = tok;
      best_n = n;
    }
  return best;
}

double imputed_number(const NumericTransform& t, const Column& c, const Column* sensitive, std::size_t row) {
  if (!c.missing(row)) return c.number(row);
  if (sensitive && !sensitive->missing(row)) {
    auto it = t.group_means.find(sensitive->cell_text(row));
    if (it != t.group_means.end()) return it->second;
  }
  return t.global_mean;
}

std::string imputed_token(const CategoricalTransform& t, const Column& c, const Column* sensitive,
                          std::size_t row) {
  if (!c.missing(row)) return c.token(row);
  if (sensitive && !sensitive->missing(row)) {
    auto it = t.group_modes.find(sensitive->cell_text(row));
    if (it != t.group_modes.end()) return it->second;
  }
  return t.global_mode;
}

NumericTransform fit_numeric(const Column& c, const Column& sensitive) {
  NumericTransform t;
  t.column = c.name();
  std::map<std::string, std::pair<double, std::size_t>> acc;
  double total = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < c.size(); ++r) {
    if (c.missing(r)) continue;
    total += c.number(r);
    ++n;
    if (!sensitive.missing(r)) {
      auto& [s, k] = acc[group_key(sensitive, r)];
      s += c.number(r);
      ++k;
    }
  }
  t.global_mean = n ? total / static_cast<double>(n) : 0.0;
  for (const auto& [g, sk] : acc) t.group_means[g] = sk.first / static_cast<double>(sk.second);

  if (c.size() == 0) return t;
  double sum = 0;
  for (std::size_t r = 0; r < c.size(); ++r) sum += imputed_number(t, c, &sensitive, r);
  t.mean = sum / static_cast<double>(c.size());
  double ss = 0;
  for (std::size_t r = 0; r < c.size(); ++r) {
    const double d = imputed_number(t, c, &sensitive, r) - t.mean;
    ss += d * d;
  }
  t.std = std::sqrt(ss / static_cast<double>(c.size()));
  // Treat round-off-level spread as constant.
  if (t.std <= 1e-12 * std::max(1.0, std::abs(t.mean))) t.std = 0.0;
  return t;
}

CategoricalTransform fit_categorical(const Column& c, const Column& sensitive) {
  CategoricalTransform t;
  t.column = c.name();
  std::map<std::string, std::size_t> global;
  std::map<std::string, std::map<std::string, std::size_t>> per_group;
  for (std::size_t r = 0; r < c.size(); ++r) {
    if (c.missing(r)) continue;
    ++global[c.token(r)];
    if (!sensitive.missing(r)) ++per_group[group_key(sensitive, r)][c.token(r)];
  }
  t.global_mode = mode_of(global);
  for (const auto& [g, counts] : per_group) t.group_modes[g] = mode_of(counts);
  for (const auto& [tok, n] : column_distinct(c)) t.vocabulary.push_back(tok);
  return t;
}

}  // namespace

std::vector<std::string> Recipe::feature_names() const {
  std::vector<std::string> out;
  for (const auto& tr : transforms) {
    if (const auto* n = std::get_if<NumericTransform>(&tr)) {
      out.push_back(n->column);
    } else {
      const auto& c = std::get<CategoricalTransform>(tr);
      for (const auto& v : c.vocabulary) out.push_back(c.column + "=" + v);
    }
  }
  return out;
}

std::string Recipe::fingerprint() const { return fairpipe::fingerprint(to_json(*this).dump()); }

Recipe fit_recipe(const Table& train, const std::string& sensitive, const std::string& target,
                  const RecipeOptions& options) {
  const auto& scol = train.column(sensitive);
  const auto& tcol = train.column(target);
  if (sensitive == target) throw Error(ErrorCode::SameColumn, sensitive);

  Recipe r;
  r.sensitive = sensitive;
  r.target = target;
  r.include_sensitive = options.include_sensitive;

  const auto labels = column_distinct(tcol);
  if (labels.size() != 2)
    throw Error(ErrorCode::NonBinaryTarget,
                target + " has " + std::to_string(labels.size()) + " distinct values in train");
  if (options.positive_label) {
    if (*options.positive_label != labels[0].first && *options.positive_label != labels[1].first)
      throw Error(ErrorCode::InvalidArgument, "positive label '" + *options.positive_label + "' not in " + target);
    r.positive_label = *options.positive_label;
  } else if (tcol.is_numeric() && std::set<std::string>{labels[0].first, labels[1].first} ==
                                      std::set<std::string>{"0", "1"}) {
    r.positive_label = "1";
  } else {
    // Minority class; lexicographically last on a tie (labels are count desc, token asc).
    r.positive_label = labels[1].first;
  }
  r.negative_label = labels[0].first == r.positive_label ? labels[1].first : labels[0].first;

  const auto groups = column_distinct(scol);
  if (groups.size() < 2) throw Error(ErrorCode::SingleGroup, sensitive + " has fewer than two groups in train");
  if (options.privileged_group) {
    if (std::none_of(groups.begin(), groups.end(),
                     [&](const auto& g) { return g.first == *options.privileged_group; }))
      throw Error(ErrorCode::InvalidArgument, "privileged group '" + *options.privileged_group + "' not in " + sensitive);
    r.privileged_group = *options.privileged_group;
  } else {
    r.privileged_group = groups.front().first;
  }

  for (const auto& c : train.columns()) {
    r.schema.emplace_back(c.name(), c.kind());
    if (c.name() == target) continue;
    if (c.name() == sensitive && !options.include_sensitive) continue;
    if (c.is_numeric())
      r.transforms.emplace_back(fit_numeric(c, scol));
    else
      r.transforms.emplace_back(fit_categorical(c, scol));
  }
  return r;
}

DesignMatrix apply_recipe(const Table& t, const Recipe& r) {
  for (const auto& [name, kind] : r.schema) {
    auto idx = t.index_of(name);
    if (!idx) throw Error(ErrorCode::SchemaMismatch, "missing column " + name);
    if (t.column(*idx).kind() != kind)
      throw Error(ErrorCode::SchemaMismatch, "column " + name + " changed kind");
  }
  const auto& scol = t.column(r.sensitive);
  const auto& tcol = t.column(r.target);

  DesignMatrix dm;
  dm.feature_names = r.feature_names();
  for (std::size_t row = 0; row < t.n_rows(); ++row) {
    if (tcol.missing(row)) continue;
    const auto label = tcol.cell_text(row);
    if (label != r.positive_label && label != r.negative_label)
      throw Error(ErrorCode::SchemaMismatch, "target value '" + label + "' outside the fitted label set");
    dm.source_rows.push_back(row);
  }
  const auto n = static_cast<Eigen::Index>(dm.source_rows.size());
  dm.features = RowMatrix::Zero(n, static_cast<Eigen::Index>(dm.feature_names.size()));
  dm.labels.resize(n);
  dm.groups.resize(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = dm.source_rows[static_cast<std::size_t>(i)];
    dm.labels[i] = tcol.cell_text(row) == r.positive_label ? 1.0 : 0.0;
    dm.groups[i] = (!scol.missing(row) && scol.cell_text(row) == r.privileged_group) ? 1.0 : 0.0;
  }

  Eigen::Index col = 0;
  for (const auto& tr : r.transforms) {
    if (const auto* nt = std::get_if<NumericTransform>(&tr)) {
      const auto& c = t.column(nt->column);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = imputed_number(*nt, c, &scol, dm.source_rows[static_cast<std::size_t>(i)]);
        dm.features(i, col) = nt->std > 0 ? (v - nt->mean) / nt->std : 0.0;
      }
      ++col;
    } else {
      const auto& ct = std::get<CategoricalTransform>(tr);
      const auto& c = t.column(ct.column);
      std::map<std::string, Eigen::Index> slot;
      for (std::size_t k = 0; k < ct.vocabulary.size(); ++k)
        slot[ct.vocabulary[k]] = static_cast<Eigen::Index>(k);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto tok = imputed_token(ct, c, &scol, dm.source_rows[static_cast<std::size_t>(i)]);
        if (auto it = slot.find(tok); it != slot.end()) dm.features(i, col + it->second) = 1.0;
      }
      col += static_cast<Eigen::Index>(ct.vocabulary.size());
    }
  }
  return dm;
}

Json to_json(const Recipe& r) {
  Json schema = Json::array();
  for (const auto& [name, kind] : r.schema) schema.push_back({{"name", name}, {"kind", to_string(kind)}});
  Json transforms = Json::array();
  for (const auto& tr : r.transforms) {
    if (const auto* n = std::get_if<NumericTransform>(&tr)) {
      // Full precision here: the recipe must reproduce matrices exactly.
      transforms.push_back({{"column", n->column},
                            {"type", "numeric"},
                            {"group_means", n->group_means},
                            {"global_mean", n->global_mean},
                            {"mean", n->mean},
                            {"std", n->std}});
    } else {
      const auto& c = std::get<CategoricalTransform>(tr);
      transforms.push_back({{"column", c.column},
                            {"type", "categorical"},
                            {"group_modes", c.group_modes},
                            {"global_mode", c.global_mode},
                            {"vocabulary", c.vocabulary}});
    }
  }
  return {{"sensitive", r.sensitive},
          {"target", r.target},
          {"positive_label", r.positive_label},
          {"negative_label", r.negative_label},
          {"privileged_group", r.privileged_group},
          {"include_sensitive", r.include_sensitive},
          {"schema", schema},
          {"transforms", transforms}};
}

Recipe recipe_from_json(const Json& j) {
  Recipe r;
  r.sensitive = j.at("sensitive").get<std::string>();
  r.target = j.at("target").get<std::string>();
  r.positive_label = j.at("positive_label").get<std::string>();
  r.negative_label = j.at("negative_label").get<std::string>();
  r.privileged_group = j.at("privileged_group").get<std::string>();
  r.include_sensitive = j.at("include_sensitive").get<bool>();
  for (const auto& s : j.at("schema"))
    r.schema.emplace_back(s.at("name").get<std::string>(),
                          s.at("kind").get<std::string>() == "Numeric" ? ColumnKind::Numeric
                                                                        : ColumnKind::Categorical);
  for (const auto& t : j.at("transforms")) {
    if (t.at("type") == "numeric") {
      NumericTransform n;
      n.column = t.at("column").get<std::string>();
      n.group_means = t.at("group_means").get<std::map<std::string, double>>();
      n.global_mean = t.at("global_mean").get<double>();
      n.mean = t.at("mean").get<double>();
      n.std = t.at("std").get<double>();
      r.transforms.emplace_back(std::move(n));
    } else {
      CategoricalTransform c;
      c.column = t.at("column").get<std::string>();
      c.group_modes = t.at("group_modes").get<std::map<std::string, std::string>>();
      c.global_mode = t.at("global_mode").get<std::string>();
      c.vocabulary = t.at("vocabulary").get<std::vector<std::string>>();
      r.transforms.emplace_back(std::move(c));
    }
  }
  return r;
}

}  // namespace fairpipe
