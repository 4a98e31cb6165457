#include "fedfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "fedfm/errors.hpp"
#include "fedfm/io.hpp"

namespace fedfm::metrics {

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  std::vector<double> sq(sorted.size());
  std::transform(sorted.begin(), sorted.end(), sq.begin(),
                 [mean](double v) { return (v - mean) * (v - mean); });
  std::sort(sq.begin(), sq.end());
  const double var = std::accumulate(sq.begin(), sq.end(), 0.0) / n;
  return {mean, std::sqrt(var)};
}

namespace {

std::optional<double> as_number(const std::string& s) {
  try {
    return io::parse_real(s);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

SweepResult summarize(std::string axis_name, std::span<const Group> groups) {
  SweepResult out{std::move(axis_name), {}};
  for (const auto& g : groups) {
    if (g.observations.empty()) throw ConfigError("summarize: group '" + g.axis + "' is empty");
    std::vector<double> cs, as;
    for (const auto& o : g.observations) {
      cs.push_back(o.C);
      as.push_back(o.A);
    }
    const auto [mc, sc] = mean_std(cs);
    const auto [ma, sa] = mean_std(as);
    out.points.push_back({g.axis, mc, sc, ma, sa, g.observations.size()});
  }

  const bool numeric = std::all_of(out.points.begin(), out.points.end(),
                                   [](const SweepPoint& p) { return as_number(p.axis).has_value(); });
  std::stable_sort(out.points.begin(), out.points.end(), [numeric](const SweepPoint& a, const SweepPoint& b) {
    if (numeric) return *as_number(a.axis) < *as_number(b.axis);
    return a.axis < b.axis;
  });
  return out;
}

std::string csv_header() { return "axis,mean_C_s,std_C_s,mean_A,std_A,n_seeds"; }

void emit_csv(const SweepResult& sweep, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << csv_header() << '\n';
  for (const auto& p : sweep.points) {
    out << p.axis << ',' << io::format_real(p.mean_C) << ',' << io::format_real(p.std_C) << ','
        << io::format_real(p.mean_A) << ',' << io::format_real(p.std_A) << ',' << p.n_seeds << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

SweepResult read_csv(const std::filesystem::path& path, std::string axis_name) {
  const auto lines = io::split(io::read_file(path), '\n');
  if (lines.empty() || lines[0] != csv_header()) throw FormatError(path.string() + ": missing summary header");
  SweepResult out{std::move(axis_name), {}};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = io::split(lines[i], ',');
    if (f.size() != 6) throw FormatError(path.string() + ": bad row " + std::to_string(i + 1));
    out.points.push_back({f[0], io::parse_real(f[1]), io::parse_real(f[2]), io::parse_real(f[3]),
                          io::parse_real(f[4]), static_cast<std::size_t>(io::parse_int(f[5]))});
  }
  return out;
}

void write_series(const std::filesystem::path& path, const std::string& comment,
                  std::span<const std::pair<double, double>> series) {
  auto out = io::open_output(path);
  out << "# " << comment << '\n';
  for (const auto& [x, y] : series) out << io::format_real(x) << ' ' << io::format_real(y) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace fedfm::metrics
