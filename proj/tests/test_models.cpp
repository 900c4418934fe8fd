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
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fedcl/errors.hpp"
#include "fedcl/models.hpp"
#include "support.hpp"

namespace fedcl {
namespace {

LocalModel initialized(std::uint64_t seed = 1, ArchConfig arch = {}) {
  LocalModel model(arch);
  RngStream rng(seed);
  model.feature.init(rng);
  model.classifier.init(rng);
  model.discriminator.init(rng);
  return model;
}

TEST(Model, DefaultArchitectureShapes) {
  const LocalModel m;
  EXPECT_EQ(m.feature.input_dim(), 16);
  EXPECT_EQ(m.feature.output_dim(), 16);
  EXPECT_EQ(m.classifier.input_dim(), m.feature.output_dim());
  EXPECT_EQ(m.discriminator.input_dim(), m.feature.output_dim());
  EXPECT_EQ(m.classifier.output_dim(), 2);
  EXPECT_EQ(m.discriminator.output_dim(), 2);
  // 16*64+64 + 64*32+32 + 32*16+16
  EXPECT_EQ(m.feature.params().size(), 3696);
  // 16*8+8 + 4*8 + 8*2+2
  EXPECT_EQ(m.classifier.params().size(), 186);
  EXPECT_EQ(m.discriminator.params().size(), 16 * 4 + 4 + 4 * 2 + 2);
}

TEST(Predict, SymmetricHeadGivesHalf) {
  LocalModel m = initialized();
  const std::size_t last = m.classifier.params().entries().size();
  m.classifier.params().view(last - 2).setZero();
  m.classifier.params().view(last - 1).setZero();
  RngStream rng(2);
  const auto p = predict(m, testing::random_matrix(7, 16, rng)).probabilities;
  EXPECT_TRUE((p.array() == 0.5).all());
}

TEST(Predict, RowsSumToOne) {
  const LocalModel m = initialized(3);
  RngStream rng(4);
  const auto p = predict(m, testing::random_matrix(33, 16, rng, 5.0)).probabilities;
  EXPECT_LT((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
}

TEST(Predict, BatchInvariantInEvalMode) {
  const LocalModel m = initialized(5);
  RngStream rng(6);
  const MatrixXr x = testing::random_matrix(9, 16, rng);
  const auto full = predict(m, x);
  for (Index r = 0; r < x.rows(); ++r) {
    const auto one = predict(m, x.row(r));
    EXPECT_LT((one.probabilities.row(0) - full.probabilities.row(r)).cwiseAbs().maxCoeff(),
              1e-12);
    EXPECT_LT((one.embedding.vectors.row(0) - full.embedding.vectors.row(r)).cwiseAbs().maxCoeff(),
              1e-12);
  }
  EXPECT_FALSE(full.embedding.noised);
}

TEST(Predict, WrongWidthIsShapeError) {
  const LocalModel m = initialized();
  EXPECT_THROW(predict(m, MatrixXr::Zero(2, 15)), ShapeError);
}

TEST(Params, ExportImportRoundTrip) {
  const LocalModel a = initialized(7);
  LocalModel b = initialized(8);
  const auto shared = export_params(a);
  import_params(b, shared.feature, shared.classifier);
  RngStream rng(9);
  const MatrixXr x = testing::random_matrix(5, 16, rng);
  EXPECT_EQ(predict(a, x).probabilities, predict(b, x).probabilities);
  // D is local: untouched by import.
  EXPECT_NE(a.discriminator.params().checksum(), b.discriminator.params().checksum());
}

TEST(Params, ExportExcludesDiscriminatorAndNamesAreStable) {
  const auto p1 = export_params(initialized(1));
  const auto p2 = export_params(initialized(2));
  EXPECT_EQ(p1.feature.names(), p2.feature.names());
  EXPECT_EQ(p1.classifier.names(), p2.classifier.names());
  for (const auto& n : p1.feature.names()) EXPECT_EQ(n.rfind("F.", 0), 0u) << n;
  for (const auto& n : p1.classifier.names()) EXPECT_EQ(n.rfind("Cls.", 0), 0u) << n;
}

TEST(Params, WrongWidthNamesParameter) {
  ArchConfig narrow;
  narrow.embedding_dim = 12;
  LocalModel m = initialized();
  const auto other = export_params(initialized(1, narrow));
  try {
    import_params(m, other.feature, other.classifier);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("F.fc2.weight"), std::string::npos) << e.what();
  }
}

TEST(Params, NegativeRunningVarianceIsProjected) {
  LocalModel m = initialized();
  auto shared = export_params(m);
  const auto* var = shared.classifier.find("Cls.bn0.running_var");
  ASSERT_NE(var, nullptr);
  shared.classifier.values()[var->offset] = -0.25;
  import_params(m, shared.feature, shared.classifier);
  EXPECT_EQ(m.classifier.params().values()[var->offset], 0.0);
}

TEST(Params, NetworksAreDisjoint) {
  LocalModel m = initialized();
  const auto f = m.feature.params().checksum();
  const auto d = m.discriminator.params().checksum();
  m.classifier.params().values().array() += 1.0;
  EXPECT_EQ(m.feature.params().checksum(), f);
  EXPECT_EQ(m.discriminator.params().checksum(), d);
}

TEST(Snapshot, RoundTripIsExact) {
  const auto dir = std::filesystem::temp_directory_path() / "fedcl_test_models";
  std::filesystem::create_directories(dir);
  const LocalModel a = initialized(11);
  save_snapshot(dir / "m.json", a);
  LocalModel b;
  load_snapshot(dir / "m.json", b);
  EXPECT_EQ(a.feature.params().values(), b.feature.params().values());
  EXPECT_EQ(a.classifier.params().values(), b.classifier.params().values());
  EXPECT_EQ(a.discriminator.params().values(), b.discriminator.params().values());
}

TEST(Snapshot, ArchitectureMismatchIsRejected) {
  const auto dir = std::filesystem::temp_directory_path() / "fedcl_test_models";
  std::filesystem::create_directories(dir);
  save_snapshot(dir / "m16.json", initialized());
  ArchConfig wide;
  wide.input_dim = 20;
  LocalModel other(wide);
  EXPECT_THROW(load_snapshot(dir / "m16.json", other), ConfigError);
  std::ofstream(dir / "junk.json") << "{\"format\": \"other\"}";
  LocalModel m;
  EXPECT_THROW(load_snapshot(dir / "junk.json", m), ConfigError);
}

}  // namespace
}  // namespace fedcl
