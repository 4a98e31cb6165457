#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedfm::metrics {

// One experiment's headline numbers.
struct Observation {
  double C = 0.0;  // seconds
  double A = 0.0;
};

struct SweepPoint {
  std::string axis;
  double mean_C = 0.0;
  double std_C = 0.0;  // population std
  double mean_A = 0.0;
  double std_A = 0.0;
  std::size_t n_seeds = 0;

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct SweepResult {
  std::string axis_name;
  std::vector<SweepPoint> points;

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

struct Group {
  std::string axis;
  std::vector<Observation> observations;
};

// Population mean and std; the input order does not affect the result.
std::pair<double, double> mean_std(std::span<const double> values);

// Points come out ordered by axis value: numerically when every label parses
// as a number, lexicographically otherwise. Throws ConfigError on an empty group.
SweepResult summarize(std::string axis_name, std::span<const Group> groups);

// axis,mean_C_s,std_C_s,mean_A,std_A,n_seeds
std::string csv_header();
void emit_csv(const SweepResult& sweep, const std::filesystem::path& path);
SweepResult read_csv(const std::filesystem::path& path, std::string axis_name = {});

// Two whitespace-separated columns, one row per point, with a '#' comment line.
void write_series(const std::filesystem::path& path, const std::string& comment,
                  std::span<const std::pair<double, double>> series);

}  // namespace fedfm::metrics
