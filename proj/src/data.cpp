/*
 * Copyright 2026 The fedcl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "fedcl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "fedcl/errors.hpp"

namespace fedcl {

std::string to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

std::string to_string(BaseDistribution base) {
  return base == BaseDistribution::rings ? "rings" : "gaussian-blobs";
}

BaseDistribution parse_base_distribution(const std::string& name) {
  if (name == "gaussian-blobs") return BaseDistribution::gaussian_blobs;
  if (name == "rings") return BaseDistribution::rings;
  throw ConfigError("unknown base distribution '" + name + "'");
}

Index SiteDataset::dim() const {
  for (const auto* part : {&train, &val, &test}) {
    if (!part->empty()) return part->front().features.size();
  }
  return 0;
}

const std::vector<Sample>& SiteDataset::split(Split s) const {
  switch (s) {
    case Split::train:
      return train;
    case Split::val:
      return val;
    case Split::test:
      return test;
  }
  return train;
}

std::vector<DomainSpec> default_benchmark(double size_factor, Index feature_dim) {
  const Index sizes[] = {1460, 410, 852};
  const double balance[] = {0.50, 0.30, 0.50};
  const double shift[] = {0.0, 2.0, -2.0};
  std::vector<DomainSpec> specs;
  for (int s = 0; s < 3; ++s) {
    DomainSpec spec;
    spec.site_id = s;
    spec.n_samples = std::max<Index>(
        10, static_cast<Index>(std::llround(sizes[s] * size_factor)));
    spec.class_balance = balance[s];
    spec.intensity_shift = shift[s];
    spec.feature_dim = feature_dim;
    specs.push_back(spec);
  }
  return specs;
}

namespace {

void validate(const DomainSpec& spec) {
  if (!(spec.intensity_scale > 0)) {
    throw ConfigError("site " + std::to_string(spec.site_id) +
                      ": intensity_scale must be > 0");
  }
  if (!(spec.class_balance > 0 && spec.class_balance < 1)) {
    throw ConfigError("site " + std::to_string(spec.site_id) +
                      ": class_balance must lie in (0, 1)");
  }
  if (spec.n_samples < 10) {
    throw ConfigError("site " + std::to_string(spec.site_id) +
                      ": n_samples must be >= 10");
  }
  if (spec.feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
  if (spec.blobs_per_class < 1) throw ConfigError("blobs_per_class must be >= 1");
}

// Blob centres depend only on the task geometry, never on the site.
MatrixXr blob_centres(const DomainSpec& spec) {
  RngStream geometry(spec.task_seed);
  const Index rows = 2 * spec.blobs_per_class;
  MatrixXr centres(rows, spec.feature_dim);
  const double scale =
      spec.class_separation / std::sqrt(static_cast<double>(spec.feature_dim));
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < spec.feature_dim; ++c) {
      centres(r, c) = scale * geometry.normal();
    }
  }
  return centres;
}

}  // namespace

SiteDataset split_samples(int site_id, std::vector<Sample> samples,
                          RngStream& rng) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto n = static_cast<double>(samples.size());
  const auto n_train = static_cast<std::size_t>(std::llround(0.7 * n));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * n));
  SiteDataset out;
  out.site_id = site_id;
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& dest = k < n_train ? out.train
                 : k < n_train + n_val ? out.val
                                       : out.test;
    dest.push_back(std::move(samples[order[k]]));
  }
  return out;
}

SiteDataset generate_site(const DomainSpec& spec, RngStream& rng) {
  validate(spec);
  const MatrixXr centres = blob_centres(spec);
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(spec.n_samples));
  for (Index k = 0; k < spec.n_samples; ++k) {
    Sample s;
    s.site_id = spec.site_id;
    s.sample_id = k;
    s.label = rng.bernoulli(spec.class_balance) ? 1 : 0;
    s.features.resize(spec.feature_dim);
    if (spec.base_distribution == BaseDistribution::gaussian_blobs) {
      const auto blob = static_cast<Index>(
          rng.below(static_cast<std::uint64_t>(spec.blobs_per_class)));
      const Index row = s.label * spec.blobs_per_class + blob;
      for (Index c = 0; c < spec.feature_dim; ++c) {
        s.features[c] = centres(row, c) + rng.normal();
      }
    } else {
      // Concentric rings in the first two coordinates, noise elsewhere.
      const double radius = 1.0 + 0.5 * spec.class_separation * s.label +
                            0.25 * rng.normal();
      const double angle = 2.0 * M_PI * rng.uniform();
      s.features[0] = radius * std::cos(angle);
      s.features[1] = radius * std::sin(angle);
      for (Index c = 2; c < spec.feature_dim; ++c) s.features[c] = rng.normal();
    }
    s.features = (spec.intensity_scale * s.features.array() + spec.intensity_shift)
                     .matrix();
    samples.push_back(std::move(s));
  }
  return split_samples(spec.site_id, std::move(samples), rng);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_number(std::string_view field, long line) {
  field = trim(field);
  double value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError("malformed number '" + std::string(field) + "'", line);
  }
  if (!std::isfinite(value)) throw ParseError("non-finite value", line);
  return value;
}

}  // namespace

SiteDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                     std::uint64_t split_seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open csv file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  const auto header = split_fields(trim(line));
  const Index dim = static_cast<Index>(header.size()) - 1;
  if (dim < 1 || trim(header.back()) != "label") {
    throw ParseError("header must end with a 'label' column", 1);
  }
  if (schema.feature_dim != 0 && schema.feature_dim != dim) {
    throw ParseError("header has " + std::to_string(dim) +
                         " feature columns, schema expects " +
                         std::to_string(schema.feature_dim),
                     1);
  }
  for (Index c = 0; c < dim; ++c) {
    if (trim(header[static_cast<std::size_t>(c)]) != "f" + std::to_string(c)) {
      throw ParseError("header column " + std::to_string(c) + " must be f" +
                           std::to_string(c),
                       1);
    }
  }
  std::vector<Sample> samples;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(trim(line));
    if (static_cast<Index>(fields.size()) != dim + 1) {
      throw ParseError("expected " + std::to_string(dim + 1) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    Sample s;
    s.site_id = schema.site_id;
    s.sample_id = static_cast<std::int64_t>(samples.size());
    s.features.resize(dim);
    for (Index c = 0; c < dim; ++c) {
      s.features[c] = parse_number(fields[static_cast<std::size_t>(c)], line_no);
    }
    const double label = parse_number(fields.back(), line_no);
    if (label != 0.0 && label != 1.0) {
      throw ValidationError("non-binary label at line " + std::to_string(line_no));
    }
    s.label = static_cast<int>(label);
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw ValidationError("csv file has no rows: " + path.string());
  RngStream rng = RngStream::derive(split_seed, static_cast<std::uint64_t>(schema.site_id),
                                    StreamPurpose::data);
  return split_samples(schema.site_id, std::move(samples), rng);
}

void write_csv(const std::filesystem::path& path, std::span<const Sample> rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write csv file " + path.string());
  const Index dim = rows.empty() ? 0 : rows.front().features.size();
  for (Index c = 0; c < dim; ++c) out << 'f' << c << ',';
  out << "label\n";
  out << std::setprecision(17);
  for (const auto& s : rows) {
    for (Index c = 0; c < dim; ++c) out << s.features[c] << ',';
    out << s.label << '\n';
  }
}

SiteDataset standardize(const SiteDataset& dataset) {
  if (dataset.train.empty()) {
    throw ValidationError("standardize needs a non-empty train split");
  }
  const MatrixXr x = feature_matrix(dataset.train);
  const VectorXr mean = x.colwise().mean().transpose();
  const VectorXr stddev =
      ((x.rowwise() - mean.transpose()).array().square().colwise().mean().sqrt())
          .transpose()
          .cwiseMax(1e-8);
  SiteDataset out = dataset;
  for (auto* part : {&out.train, &out.val, &out.test}) {
    for (auto& s : *part) {
      s.features = ((s.features - mean).array() / stddev.array()).matrix();
    }
  }
  return out;
}

MatrixXr feature_matrix(std::span<const Sample> samples) {
  const Index dim = samples.empty() ? 0 : samples.front().features.size();
  MatrixXr x(static_cast<Index>(samples.size()), dim);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    x.row(static_cast<Index>(r)) = samples[r].features.transpose();
  }
  return x;
}

Eigen::VectorXi label_vector(std::span<const Sample> samples) {
  Eigen::VectorXi y(static_cast<Index>(samples.size()));
  for (std::size_t r = 0; r < samples.size(); ++r) {
    y[static_cast<Index>(r)] = samples[r].label;
  }
  return y;
}

}  // namespace fedcl
