#include "hrm/probe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "hrm/dqn/collector.hpp"
#include "hrm/dqn/trainer.hpp"
#include "hrm/error.hpp"

namespace hrm::probe {

double mse(const num::Tensor& a, const num::Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mse: shape mismatch " + num::shape_string(a.shape()) + " vs " +
                         num::shape_string(b.shape()));
  }
  if (a.numel() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.numel());
}

std::string to_string(Level level) { return level == Level::L ? "z_l" : "z_h"; }

std::string Condition::label() const {
  return dqn::to_string(variant) + (env_changed ? "_changed" : "_unchanged");
}

DistanceRecord distances(const ProbeRecord& record) {
  const auto& e = record.trace.entries;
  if (e.empty()) throw UsageError("probe record has an empty trace");
  DistanceRecord d;
  d.condition = {record.variant, record.env_changed};
  d.step = record.step;
  for (Level level : {Level::L, Level::H}) {
    auto pick = [level](const model::TraceEntry& t) -> const num::Tensor& {
      return level == Level::L ? t.z_l : t.z_h;
    };
    const auto li = static_cast<std::size_t>(level);
    const num::Tensor& first = pick(e.front());
    const num::Tensor& last = pick(e.back());
    for (std::size_t i = 0; i + 1 < e.size(); ++i) d.convergence[li].push_back(mse(pick(e[i]), last));
    for (std::size_t i = 0; i < e.size(); ++i) d.divergence[li].push_back(mse(pick(e[i]), first));
  }
  return d;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

namespace {

ConditionSeries aggregate(std::span<const DistanceRecord> records, Level level, Condition condition,
                          bool convergence_kind) {
  ConditionSeries s;
  s.condition = condition;
  s.level = level;
  const auto li = static_cast<std::size_t>(level);
  std::vector<const std::vector<double>*> rows;
  for (const auto& r : records) {
    if (r.condition == condition) rows.push_back(convergence_kind ? &r.convergence[li] : &r.divergence[li]);
  }
  s.n_samples = rows.size();
  if (rows.empty()) return s;
  const std::size_t len = rows.front()->size();
  for (const auto* row : rows) {
    if (row->size() != len) throw DimensionError("probe records have differing trace lengths");
  }
  std::vector<double> column(rows.size());
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t k = 0; k < rows.size(); ++k) column[k] = (*rows[k])[i];
    s.median.push_back(lower_median(column));
  }
  return s;
}

std::vector<DistanceRecord> to_distances(std::span<const ProbeRecord> records) {
  std::vector<DistanceRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(distances(r));
  return out;
}

}  // namespace

ConditionSeries convergence_series(std::span<const DistanceRecord> records, Level level, Condition condition) {
  return aggregate(records, level, condition, true);
}

ConditionSeries divergence_series(std::span<const DistanceRecord> records, Level level, Condition condition) {
  return aggregate(records, level, condition, false);
}

ConditionSeries convergence_series(std::span<const ProbeRecord> records, Level level, Condition condition) {
  const auto d = to_distances(records);
  return aggregate(d, level, condition, true);
}

ConditionSeries divergence_series(std::span<const ProbeRecord> records, Level level, Condition condition) {
  const auto d = to_distances(records);
  return aggregate(d, level, condition, false);
}

const ConditionSeries* ProbeResult::find(bool convergence_kind, Level level, Condition condition) const {
  for (const auto& s : convergence_kind ? convergence : divergence) {
    if (s.level == level && s.condition == condition) return &s;
  }
  return nullptr;
}

ProbeResult run_probe(std::span<const ProbeSubject> subjects, const grid::EnvConfig& env, int episodes,
                      std::uint64_t seed) {
  if (episodes < 1) throw UsageError("probe needs at least one episode");
  ProbeResult result;
  std::vector<DistanceRecord> kept;
  for (const auto& subject : subjects) {
    if (!subject.model) throw UsageError("probe subject without a model");
    auto sink = [&](ProbeRecord&& r) {
      ++result.records;
      if (r.variant == model::LatentMode::CarryZ && r.previous_final) {
        ++result.carry_checks;
        if (mse(r.z_init.z_l, r.previous_final->z_l) != 0.0 || mse(r.z_init.z_h, r.previous_final->z_h) != 0.0 ||
            !num::bitwise_equal(r.z_init.z_l, r.previous_final->z_l) ||
            !num::bitwise_equal(r.z_init.z_h, r.previous_final->z_h)) {
          ++result.carry_violations;
        }
      }
      if (r.step > 0) kept.push_back(distances(r));
    };
    dqn::validate(*subject.model, env, subject.variant, episodes, seed, sink);
  }
  for (Level level : {Level::L, Level::H}) {
    for (const Condition& c : kConditions) {
      if (auto s = convergence_series(kept, level, c); !s.empty()) result.convergence.push_back(std::move(s));
      if (auto s = divergence_series(kept, level, c); !s.empty()) result.divergence.push_back(std::move(s));
    }
  }
  return result;
}

void write_probe_csv(std::ostream& out, std::span<const ConditionSeries> series) {
  out << "condition,level,recurrent_step,median_mse,n_samples\n";
  char buf[64];
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.median.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", s.median[i]);
      out << s.condition.label() << ',' << to_string(s.level) << ',' << i + 1 << ',' << buf << ',' << s.n_samples
          << '\n';
    }
  }
}

std::string render_svg(std::span<const ConditionSeries> series, Level level, const std::string& title) {
  const double width = 640, height = 420, left = 70, right = 190, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  std::vector<const ConditionSeries*> shown;
  std::size_t max_len = 1;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series) {
    if (s.level != level || s.empty()) continue;
    shown.push_back(&s);
    max_len = std::max(max_len, s.median.size());
    for (double v : s.median) {
      if (v > 0 && std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!std::isfinite(lo)) lo = 1e-6, hi = 1.0;
  const double ylo = std::floor(std::log10(lo)), yhi = std::max(ylo + 1, std::ceil(std::log10(hi)));
  auto sx = [&](std::size_t step) {
    return left + (max_len == 1 ? 0.0 : pw * static_cast<double>(step - 1) / static_cast<double>(max_len - 1));
  };
  auto sy = [&](double v) {
    const double lv = std::log10(std::max(v, std::pow(10.0, ylo)));
    return top + ph * (1.0 - (lv - ylo) / (yhi - ylo));
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  for (double e = ylo; e <= yhi + 1e-9; e += 1) {
    const double y = sy(std::pow(10.0, e));
    os << "<line x1=\"" << left - 4 << "\" y1=\"" << y << "\" x2=\"" << left + pw << "\" y2=\"" << y
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << static_cast<int>(e)
       << "</text>\n";
  }
  const std::size_t tick = std::max<std::size_t>(1, max_len / 8);
  for (std::size_t step = 1; step <= max_len; step += tick) {
    os << "<text x=\"" << sx(step) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << step
       << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">recurrent step</text>\n";
  os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 16 " << top + ph / 2
     << ")\" text-anchor=\"middle\">median MSE</text>\n";

  std::size_t row = 0;
  for (const auto* s : shown) {
    const bool carry = s->condition.variant == model::LatentMode::CarryZ;
    const char* color = s->condition.env_changed ? "#d62728" : "#1f77b4";
    const char* dash = carry ? "" : " stroke-dasharray=\"6,4\"";
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"" << dash << " points=\"";
    for (std::size_t i = 0; i < s->median.size(); ++i) os << sx(i + 1) << ',' << sy(s->median[i]) << ' ';
    os << "\"/>\n";
    const double ly = top + 14 + 20 * static_cast<double>(row++);
    os << "<line x1=\"" << left + pw + 14 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 44 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << dash << "/>\n";
    os << "<text x=\"" << left + pw + 50 << "\" y=\"" << ly + 4 << "\">" << s->condition.label() << " (n="
       << s->n_samples << ")</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_probe_outputs(const ProbeResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(base / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (base / name).string());
    out << text;
  };
  for (auto [name, series] : {std::pair{"convergence", &result.convergence}, std::pair{"divergence", &result.divergence}}) {
    std::ostringstream csv;
    write_probe_csv(csv, *series);
    write(std::string(name) + ".csv", csv.str());
    for (Level level : {Level::L, Level::H}) {
      const std::string title = std::string(name) + " of " + to_string(level);
      write(std::string(name) + "_" + to_string(level) + ".svg", render_svg(*series, level, title));
    }
  }
}

}  // namespace hrm::probe
