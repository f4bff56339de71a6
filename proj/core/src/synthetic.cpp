#include "fairpipe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace fairpipe {

namespace {

// Portable draws: std::*_distribution output differs between standard libraries.
class Draws {
 public:
  explicit Draws(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double normal() {
    const double u1 = std::max(uniform(), 1e-300), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

Table make_biased_fixture(const BiasedFixtureOptions& o) {
  Draws d(o.seed);
  const std::size_t n = o.rows;
  std::vector<double> age(n), hours(n), experience(n), score(n), outcome(n);
  std::vector<bool> age_m(n), hours_m(n), exp_m(n), score_m(n), out_m(n);
  std::vector<std::string> sex(n), education(n), occupation(n);
  std::vector<bool> sex_m(n), edu_m(n), occ_m(n);

  static const char* kEdu[] = {"HS", "College", "Graduate"};
  static const char* kOccMale[] = {"engineering", "engineering", "trades", "sales", "admin"};
  static const char* kOccFemale[] = {"admin", "admin", "care", "sales", "engineering"};

  for (std::size_t i = 0; i < n; ++i) {
    const bool male = d.bernoulli(0.6);
    sex[i] = male ? "Male" : "Female";
    age[i] = std::round(std::clamp(38.0 + 11.0 * d.normal(), 18.0, 75.0));
    const double skill = d.normal();
    const double edu_u = std::clamp(0.5 + 0.25 * skill + 0.25 * d.normal(), 0.0, 0.999);
    const int edu = edu_u < 0.45 ? 0 : (edu_u < 0.85 ? 1 : 2);
    education[i] = kEdu[edu];
    const auto occ_idx = static_cast<std::size_t>(d.uniform() * 5.0) % 5;
    occupation[i] = male ? kOccMale[occ_idx] : kOccFemale[occ_idx];
    hours[i] = std::round(std::clamp(40.0 + (male ? 4.0 : -3.0) + 7.0 * d.normal(), 5.0, 90.0));
    experience[i] = std::round(std::max(0.0, (age[i] - 18.0) * 0.6 + 3.0 * d.normal()) * 10.0) / 10.0;
    score[i] = std::round((60.0 + 12.0 * skill + 4.0 * d.normal()) * 10.0) / 10.0;

    const double occ_effect = occupation[i] == "engineering" ? 0.7 : (occupation[i] == "admin" ? -0.4 : 0.0);
    const double logit = -2.3 + 2.2 * skill + 0.4 * edu + 0.04 * (hours[i] - 40.0) + 0.03 * (experience[i] - 12.0) +
                         occ_effect + (male ? o.label_bias : 0.0);
    outcome[i] = d.bernoulli(1.0 / (1.0 + std::exp(-logit))) ? 1.0 : 0.0;

    // Missingness depends on the group.
    hours_m[i] = d.bernoulli(male ? 0.02 : 0.08);
    occ_m[i] = d.bernoulli(male ? 0.01 : 0.04);
    edu_m[i] = d.bernoulli(0.02);
    age_m[i] = false;
    exp_m[i] = false;
    score_m[i] = d.bernoulli(male ? 0.01 : 0.03);
    sex_m[i] = false;
    out_m[i] = false;
  }

  std::vector<Column> cols;
  cols.push_back(Column::numeric("age", std::move(age), std::move(age_m)));
  cols.push_back(Column::categorical("sex", std::move(sex), std::move(sex_m)));
  cols.push_back(Column::categorical("education", std::move(education), std::move(edu_m)));
  cols.push_back(Column::categorical("occupation", std::move(occupation), std::move(occ_m)));
  cols.push_back(Column::numeric("hours_per_week", std::move(hours), std::move(hours_m)));
  cols.push_back(Column::numeric("experience", std::move(experience), std::move(exp_m)));
  cols.push_back(Column::numeric("test_score", std::move(score), std::move(score_m)));
  cols.push_back(Column::numeric("outcome", std::move(outcome), std::move(out_m)));
  return Table("synthetic_biased", std::move(cols));
}

}  // namespace fairpipe
