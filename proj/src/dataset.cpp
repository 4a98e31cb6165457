#include "fedfm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "fedfm/errors.hpp"
#include "fedfm/io.hpp"
#include "fedfm/rng.hpp"

namespace fedfm::data {

Dataset::Dataset(int n_classes, int dim) : n_classes_(n_classes), dim_(dim) {
  if (n_classes <= 0) throw ConfigError("dataset: n_classes must be positive");
  if (dim <= 0) throw ConfigError("dataset: dim must be positive");
}

void Dataset::add(std::span<const double> features, int label) {
  if (features.size() != static_cast<std::size_t>(dim_)) {
    throw ShapeError("dataset: sample has " + std::to_string(features.size()) +
                     " features, expected " + std::to_string(dim_));
  }
  if (label < 0 || label >= n_classes_) {
    throw ConsistencyError("dataset: label " + std::to_string(label) + " outside [0, " +
                           std::to_string(n_classes_) + ")");
  }
  features_.insert(features_.end(), features.begin(), features.end());
  labels_.push_back(label);
}

void Dataset::reserve(std::size_t n) {
  features_.reserve(n * static_cast<std::size_t>(dim_));
  labels_.reserve(n);
}

PartitionKind parse_partition_kind(std::string_view name) {
  if (name == "uniform-iid") return PartitionKind::uniform_iid;
  if (name == "normal-volume-iid") return PartitionKind::normal_volume_iid;
  if (name == "exclusive-class") return PartitionKind::exclusive_class;
  throw ConfigError("unknown partition kind '" + std::string(name) + "'");
}

std::string_view to_string(PartitionKind kind) {
  switch (kind) {
    case PartitionKind::uniform_iid: return "uniform-iid";
    case PartitionKind::normal_volume_iid: return "normal-volume-iid";
    case PartitionKind::exclusive_class: return "exclusive-class";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::uint32_t read_be_u32(const std::string& bytes, std::size_t offset) {
  return (std::uint32_t(static_cast<unsigned char>(bytes[offset])) << 24) |
         (std::uint32_t(static_cast<unsigned char>(bytes[offset + 1])) << 16) |
         (std::uint32_t(static_cast<unsigned char>(bytes[offset + 2])) << 8) |
         std::uint32_t(static_cast<unsigned char>(bytes[offset + 3]));
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const std::string images = io::read_file(images_path);
  const std::string labels = io::read_file(labels_path);

  if (images.size() < 16 || read_be_u32(images, 0) != kImagesMagic) {
    throw FormatError(images_path.string() + ": not an IDX image file (expected magic 0x00000803)");
  }
  if (labels.size() < 8 || read_be_u32(labels, 0) != kLabelsMagic) {
    throw FormatError(labels_path.string() + ": not an IDX label file (expected magic 0x00000801)");
  }

  const std::size_t n_images = read_be_u32(images, 4);
  const std::size_t rows = read_be_u32(images, 8);
  const std::size_t cols = read_be_u32(images, 12);
  const std::size_t n_labels = read_be_u32(labels, 4);
  const std::size_t pixels = rows * cols;

  if (rows == 0 || cols == 0) throw FormatError(images_path.string() + ": zero image dimension");
  if (images.size() < 16 + n_images * pixels) {
    throw FormatError(images_path.string() + ": truncated pixel data");
  }
  if (labels.size() < 8 + n_labels) throw FormatError(labels_path.string() + ": truncated label data");
  if (n_images != n_labels) {
    throw ConsistencyError(images_path.string() + " holds " + std::to_string(n_images) +
                           " images but " + labels_path.string() + " holds " +
                           std::to_string(n_labels) + " labels");
  }

  int max_label = 0;
  for (std::size_t i = 0; i < n_labels; ++i) {
    max_label = std::max(max_label, int(static_cast<unsigned char>(labels[8 + i])));
  }

  Dataset out(max_label + 1, static_cast<int>(pixels));
  out.reserve(n_images);
  std::vector<double> row(pixels);
  for (std::size_t i = 0; i < n_images; ++i) {
    const std::size_t base = 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) {
      row[p] = static_cast<unsigned char>(images[base + p]) / 255.0;
    }
    out.add(row, static_cast<unsigned char>(labels[8 + i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic blobs

Dataset synth_blobs(int n_classes, int n_per_class, int dim, double spread, std::uint64_t seed) {
  if (n_classes <= 0 || n_per_class <= 0 || dim <= 0) {
    throw ConfigError("synth_blobs: counts must be positive");
  }
  if (!(spread > 0.0)) throw ConfigError("synth_blobs: spread must be positive");

  Rng center_rng(derive_seed(seed, "blob-centers"));
  constexpr int kCandidates = 32;
  constexpr double kLo = 0.15;
  constexpr double kHi = 0.85;

  // Best-candidate sampling keeps the centers spread out.
  std::vector<std::vector<double>> centers;
  auto min_dist2 = [&](const std::vector<double>& p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centers) {
      double d = 0.0;
      for (int i = 0; i < dim; ++i) d += (p[i] - c[i]) * (p[i] - c[i]);
      best = std::min(best, d);
    }
    return best;
  };
  for (int c = 0; c < n_classes; ++c) {
    std::vector<double> best_point;
    double best_score = -1.0;
    const int tries = centers.empty() ? 1 : kCandidates;
    for (int t = 0; t < tries; ++t) {
      std::vector<double> p(static_cast<std::size_t>(dim));
      for (auto& v : p) v = center_rng.uniform(kLo, kHi);
      const double score = min_dist2(p);
      if (score > best_score) {
        best_score = score;
        best_point = std::move(p);
      }
    }
    centers.push_back(std::move(best_point));
  }

  Rng noise(derive_seed(seed, "blob-noise"));
  Dataset out(n_classes, dim);
  out.reserve(static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(n_per_class));
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (int j = 0; j < n_per_class; ++j) {
    for (int c = 0; c < n_classes; ++c) {
      for (int i = 0; i < dim; ++i) {
        x[i] = std::clamp(centers[c][i] + spread * noise.normal(), 0.0, 1.0);
      }
      out.add(x, c);
    }
  }
  return out;
}

TrainTestSplit train_test_split(const Dataset& dataset, double test_fraction) {
  if (test_fraction < 0.0 || test_fraction >= 1.0) {
    throw ConfigError("test_fraction must be in [0, 1)");
  }
  std::vector<std::size_t> per_class(static_cast<std::size_t>(dataset.n_classes()), 0);
  for (int label : dataset.labels()) ++per_class[label];
  std::vector<std::size_t> train_quota(per_class.size());
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    train_quota[c] = per_class[c] - floor_fraction(test_fraction, per_class[c]);
  }

  TrainTestSplit split{Dataset(dataset.n_classes(), dataset.dim()),
                       Dataset(dataset.n_classes(), dataset.dim())};
  std::vector<std::size_t> seen(per_class.size(), 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto s = dataset[i];
    if (seen[s.label]++ < train_quota[s.label]) {
      split.train.add(s.features, s.label);
    } else {
      split.test.add(s.features, s.label);
    }
  }
  return split;
}

Dataset take_prefix(const Dataset& dataset, std::size_t limit) {
  if (limit == 0 || limit >= dataset.size()) return dataset;
  Dataset out(dataset.n_classes(), dataset.dim());
  out.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) {
    const auto s = dataset[i];
    out.add(s.features, s.label);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Partitioning

std::vector<std::size_t> target_volumes(std::size_t total, std::size_t K, const PartitionSpec& spec) {
  if (K == 0) throw ConfigError("partition: K must be positive");
  if (K > total) {
    throw ConfigError("partition: K = " + std::to_string(K) + " exceeds " + std::to_string(total) +
                      " samples");
  }

  if (spec.kind != PartitionKind::normal_volume_iid) {
    std::vector<std::size_t> out(K, total / K);
    for (std::size_t k = 0; k < total % K; ++k) ++out[k];
    return out;
  }

  if (!(spec.mu_frac > 0.0)) throw ConfigError("partition: mu_frac must be positive");
  if (spec.sigma_frac < 0.0) throw ConfigError("partition: sigma_frac must be non-negative");

  // Draw, clip at one sample, then hand out the remaining (total - K)
  // samples in proportion to the excess over one by largest remainder.
  Rng rng(derive_seed(spec.seed, "volume"));
  std::vector<double> excess(K);
  double excess_sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double raw = std::max(rng.normal(spec.mu_frac, spec.sigma_frac) * double(total), 1.0);
    excess[k] = raw - 1.0;
    excess_sum += excess[k];
  }
  const std::size_t spare = total - K;
  std::vector<std::size_t> out(K, 1);
  if (spare == 0) return out;
  if (excess_sum <= 0.0) {
    std::fill(excess.begin(), excess.end(), 1.0);
    excess_sum = double(K);
  }

  std::vector<double> remainder(K);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double quota = excess[k] / excess_sum * double(spare);
    const auto whole = static_cast<std::size_t>(std::floor(quota));
    out[k] += whole;
    assigned += whole;
    remainder[k] = quota - double(whole);
  }
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  // Rounding of the quotas can leave the floor sum off by more than K in
  // pathological cases; cycle until the dataset is exhausted.
  for (std::size_t i = 0; assigned < spare; ++i, ++assigned) ++out[order[i % K]];
  return out;
}

std::vector<DataShard> partition(const std::shared_ptr<const Dataset>& dataset, std::size_t K,
                                 const PartitionSpec& spec) {
  if (!dataset) throw ConfigError("partition: null dataset");
  const std::size_t n = dataset->size();
  const int n_classes = dataset->n_classes();

  if (!spec.exclusive_map.empty() && spec.kind != PartitionKind::exclusive_class) {
    throw ConfigError("partition: exclusive_map requires kind exclusive-class");
  }
  for (const auto& [cls, owners] : spec.exclusive_map) {
    if (cls < 0 || cls >= n_classes) {
      throw ConfigError("partition: exclusive_map class " + std::to_string(cls) + " outside [0, " +
                        std::to_string(n_classes) + ")");
    }
    if (owners.empty()) {
      throw ConfigError("partition: exclusive_map class " + std::to_string(cls) + " has no nodes");
    }
    for (int id : owners) {
      if (id < 0 || static_cast<std::size_t>(id) >= K) {
        throw ConfigError("partition: exclusive_map references node " + std::to_string(id) +
                          " but K = " + std::to_string(K));
      }
    }
  }

  const auto targets = target_volumes(n, K, spec);

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < n; ++i) by_class[dataset->label(i)].push_back(i);
  for (int c = 0; c < n_classes; ++c) {
    Rng rng(derive_seed(spec.seed, "class-shuffle", static_cast<std::uint64_t>(c)));
    rng.shuffle(std::span<std::size_t>(by_class[c]));
  }

  std::vector<DataShard> shards(K);
  for (std::size_t k = 0; k < K; ++k) {
    shards[k].owner = static_cast<int>(k);
    shards[k].source = dataset;
    shards[k].indices.reserve(targets[k]);
  }
  auto deficit = [&](std::size_t k) {
    return static_cast<long long>(targets[k]) - static_cast<long long>(shards[k].indices.size());
  };

  // Mapped classes go to the owner with the largest remaining deficit.
  for (const auto& [cls, owners_raw] : spec.exclusive_map) {
    const std::set<int> owners(owners_raw.begin(), owners_raw.end());
    for (std::size_t idx : by_class[cls]) {
      int best = *owners.begin();
      for (int id : owners) {
        if (deficit(id) > deficit(best)) best = id;
      }
      shards[best].indices.push_back(idx);
    }
  }

  // Remaining classes are interleaved so every contiguous run has the
  // dataset's class mixture, then dealt out in node order.
  struct Keyed {
    double key;
    int cls;
    std::size_t index;
  };
  std::vector<Keyed> sequence;
  sequence.reserve(n);
  for (int c = 0; c < n_classes; ++c) {
    if (spec.exclusive_map.contains(c)) continue;
    const auto& members = by_class[c];
    for (std::size_t j = 0; j < members.size(); ++j) {
      sequence.push_back({(double(j) + 0.5) / double(members.size()), c, members[j]});
    }
  }
  std::sort(sequence.begin(), sequence.end(), [](const Keyed& a, const Keyed& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.cls < b.cls;
  });

  std::size_t pos = 0;
  for (std::size_t k = 0; k < K && pos < sequence.size(); ++k) {
    for (long long d = deficit(k); d > 0 && pos < sequence.size(); --d) {
      shards[k].indices.push_back(sequence[pos++].index);
    }
  }

  for (auto& shard : shards) std::sort(shard.indices.begin(), shard.indices.end());
  return shards;
}

void write_shards_csv(std::span<const DataShard> shards, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << "node_id,sample_index,label\n";
  for (const auto& shard : shards) {
    for (std::size_t idx : shard.indices) {
      out << shard.owner << ',' << idx << ',' << shard.source->label(idx) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace fedfm::data
