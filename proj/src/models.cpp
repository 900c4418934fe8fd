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
#include "fedcl/models.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "fedcl/errors.hpp"

namespace fedcl {

namespace {

std::vector<LayerSpec> feature_layers(const ArchConfig& arch) {
  std::vector<LayerSpec> specs;
  for (Index width : arch.feature_hidden) {
    specs.push_back(LayerSpec::linear(width));
    specs.push_back(LayerSpec::relu());
  }
  specs.push_back(LayerSpec::linear(arch.embedding_dim));
  return specs;
}

std::vector<LayerSpec> classifier_layers(const ArchConfig& arch) {
  std::vector<LayerSpec> specs{LayerSpec::linear(arch.classifier_hidden)};
  if (arch.classifier_batchnorm) specs.push_back(LayerSpec::batchnorm());
  specs.push_back(LayerSpec::relu());
  specs.push_back(LayerSpec::dropout(arch.dropout_rate));
  specs.push_back(LayerSpec::linear(2));
  return specs;
}

std::vector<LayerSpec> discriminator_layers(const ArchConfig& arch) {
  return {LayerSpec::linear(arch.discriminator_hidden), LayerSpec::relu(),
          LayerSpec::linear(2)};
}

nlohmann::json dump_params(const ParamVector<double>& params) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < params.entries().size(); ++i) {
    const auto& e = params.entries()[i];
    std::vector<double> values(params.values().data() + e.offset,
                               params.values().data() + e.offset + e.size());
    out.push_back({{"name", e.name},
                   {"rows", e.rows},
                   {"cols", e.cols},
                   {"values", values}});
  }
  return out;
}

void restore_params(const nlohmann::json& entries, ParamVector<double>& params) {
  if (entries.size() != params.entries().size()) {
    throw ConfigError("snapshot has " + std::to_string(entries.size()) +
                      " entries, model expects " +
                      std::to_string(params.entries().size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = params.entries()[i];
    const auto& j = entries[i];
    const auto values = j.at("values").get<std::vector<double>>();
    if (j.at("name").get<std::string>() != e.name ||
        j.at("rows").get<Index>() != e.rows ||
        j.at("cols").get<Index>() != e.cols ||
        static_cast<Index>(values.size()) != e.size()) {
      throw ConfigError("snapshot parameter mismatch at '" + e.name + "'");
    }
    params.values().segment(e.offset, e.size()) =
        Eigen::Map<const VectorXr>(values.data(), e.size());
  }
}

}  // namespace

std::string ArchConfig::hash() const {
  std::ostringstream layout;
  layout << "in=" << input_dim << ";F=";
  for (Index w : feature_hidden) layout << w << ',';
  layout << ";e=" << embedding_dim << ";cls=" << classifier_hidden
         << (classifier_batchnorm ? "bn" : "") << ";drop=" << dropout_rate
         << ";D=" << discriminator_hidden;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : layout.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

LocalModel::LocalModel(const ArchConfig& a)
    : arch(a),
      feature("F", a.input_dim, feature_layers(a)),
      classifier("Cls", a.embedding_dim, classifier_layers(a)),
      discriminator("D", a.embedding_dim, discriminator_layers(a)) {}

Prediction predict(const LocalModel& model, const MatrixXr& x, int site_id) {
  Prediction out;
  out.embedding.vectors = model.feature.evaluate(x);
  out.embedding.site_id = site_id;
  out.probabilities = softmax_rows(model.classifier.evaluate(out.embedding.vectors));
  return out;
}

VectorXr positive_probability(const LocalModel& model, const MatrixXr& x) {
  return predict(model, x).probabilities.col(1);
}

SharedParams export_params(const LocalModel& model) {
  SharedParams out{model.feature.params(), model.classifier.params()};
  out.feature.zero_grad();
  out.classifier.zero_grad();
  return out;
}

namespace {

void import_into(Network<double>& net, const ParamVector<double>& src,
                 const std::string& version) {
  const auto& dst = net.params().entries();
  if (src.entries().size() != dst.size()) {
    throw ConfigError(net.name() + ": expected " + std::to_string(dst.size()) +
                      " parameters, got " + std::to_string(src.entries().size()) +
                      " (arch " + version + ")");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const auto& a = dst[i];
    const auto& b = src.entries()[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) {
      throw ConfigError("parameter '" + b.name + "' has shape " +
                        std::to_string(b.rows) + "x" + std::to_string(b.cols) +
                        ", model expects '" + a.name + "' " +
                        std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                        " (arch " + version + ")");
    }
  }
  net.params().values() = src.values();
  project_running_stats(net);
}

}  // namespace

void import_params(LocalModel& model, const ParamVector<double>& feature,
                   const ParamVector<double>& classifier) {
  const std::string version = model.arch.hash();
  import_into(model.feature, feature, version);
  import_into(model.classifier, classifier, version);
}

void project_running_stats(Network<double>& net) {
  for (const auto& layer : net.layers()) {
    if (layer.kind != LayerKind::batchnorm) continue;
    auto running_var = net.params().view(layer.params[3]);
    running_var = running_var.cwiseMax(0.0);
  }
}

void save_snapshot(const std::filesystem::path& path, const LocalModel& model) {
  nlohmann::json doc;
  doc["format"] = "fedcl-params";
  doc["version"] = kSnapshotVersion;
  doc["arch_hash"] = model.arch.hash();
  doc["feature"] = dump_params(model.feature.params());
  doc["classifier"] = dump_params(model.classifier.params());
  doc["discriminator"] = dump_params(model.discriminator.params());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write snapshot " + path.string());
  out << doc.dump(1) << '\n';
}

void load_snapshot(const std::filesystem::path& path, LocalModel& model) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open snapshot " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("snapshot " + path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "fedcl-params") {
    throw ConfigError("not a parameter snapshot: " + path.string());
  }
  if (doc.value("version", 0) != kSnapshotVersion) {
    throw ConfigError("unsupported snapshot version in " + path.string());
  }
  if (doc.value("arch_hash", "") != model.arch.hash()) {
    throw ConfigError("snapshot arch " + doc.value("arch_hash", "") +
                      " does not match model arch " + model.arch.hash());
  }
  restore_params(doc.at("feature"), model.feature.params());
  restore_params(doc.at("classifier"), model.classifier.params());
  restore_params(doc.at("discriminator"), model.discriminator.params());
}

}  // namespace fedcl
