//
// Copyright 2026 The pmwpub Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "pmwpub/ingest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "pmwpub/status.hpp"

namespace pmwpub {
namespace {

const std::string kSourceDir = PMWPUB_SOURCE_DIR;

SchemaPtr SmallSchema() {
  return std::make_shared<const Schema>(Schema(
      {Attribute{"color", 3, {}, {"red", "green", "?"}},
       Attribute{"size", 3, {0.0, 10.0, 20.0, 30.0}, {}},
       Attribute{"flag", 2, {}, {}}}));
}

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidArgument;
}

std::string MessageOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

Dataset Parse(const std::string& text, const SchemaPtr& schema) {
  std::istringstream in(text);
  return ReadCsv(in, schema);
}

TEST(ReadCsvTest, ParsesAndBins) {
  const Dataset d = Parse(
      "size,flag,color\n"
      "0,1,red\n"
      "10,0,green\n"
      "29.5,1,?\n"
      "30,0,red\n",
      SmallSchema());
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(Record(d.row(0).begin(), d.row(0).end()), (Record{0, 0, 1}));
  // A value on a cut point goes to the right-hand bin.
  EXPECT_EQ(d.row(1)[1], 1);
  EXPECT_EQ(d.row(2)[0], 2);
  // The last bin is closed on the right.
  EXPECT_EQ(d.row(3)[1], 2);
}

TEST(ReadCsvTest, SingleRow) {
  EXPECT_EQ(Parse("color,size,flag\nred,5,1\n", SmallSchema()).size(), 1u);
}

TEST(ReadCsvTest, QuotedFieldsAndExtraColumns) {
  const Dataset d = Parse(
      "note,color,size,flag\r\n"
      "\"a, \"\"quoted\"\" note\",green,1,0\r\n"
      "\n"
      "plain,  red ,2,1\r\n",
      SmallSchema());
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.row(0)[0], 1);
  EXPECT_EQ(d.row(1)[0], 0);
}

TEST(ReadCsvTest, UnknownCategoryNamesRowAndColumn) {
  const auto f = [] { Parse("color,size,flag\nred,1,0\nblue,1,0\n", SmallSchema()); };
  EXPECT_EQ(CodeOf(f), ErrorCode::kUnknownCategory);
  EXPECT_NE(MessageOf(f).find("row 2"), std::string::npos);
  EXPECT_NE(MessageOf(f).find("color"), std::string::npos);
}

TEST(ReadCsvTest, ValueOutsideBins) {
  const auto f = [] { Parse("color,size,flag\nred,31,0\n", SmallSchema()); };
  EXPECT_EQ(CodeOf(f), ErrorCode::kValueOutOfBins);
  EXPECT_NE(MessageOf(f).find("size"), std::string::npos);
  EXPECT_EQ(CodeOf([] { Parse("color,size,flag\nred,-1,0\n", SmallSchema()); }),
            ErrorCode::kValueOutOfBins);
  EXPECT_EQ(CodeOf([] { Parse("color,size,flag\nred,abc,0\n", SmallSchema()); }),
            ErrorCode::kValueOutOfBins);
}

TEST(ReadCsvTest, MissingColumn) {
  EXPECT_EQ(CodeOf([] { Parse("color,flag\nred,0\n", SmallSchema()); }),
            ErrorCode::kMissingColumn);
  EXPECT_EQ(CodeOf([] { Parse("color,size,flag\nred,1\n", SmallSchema()); }),
            ErrorCode::kMissingColumn);
}

TEST(ReadCsvTest, UnterminatedQuoteIsMalformed) {
  EXPECT_EQ(CodeOf([] { Parse("color,size,flag\n\"red,1,0\n", SmallSchema()); }),
            ErrorCode::kMalformedCsv);
}

TEST(ReadCsvTest, MissingFileIsAnIoError) {
  EXPECT_EQ(CodeOf([] { LoadCsv("/nonexistent/file.csv", SmallSchema()); }),
            ErrorCode::kIo);
}

TEST(ReadCsvTest, FuzzedRowsAreValidOrRejected) {
  std::mt19937_64 rng(1);
  const std::vector<std::string> colors = {"red", "green", "?", "blue", ""};
  const SchemaPtr schema = SmallSchema();
  for (int trial = 0; trial < 300; ++trial) {
    std::string text = "flag,color,size\n";
    const int rows = 1 + rng() % 20;
    for (int r = 0; r < rows; ++r) {
      text += std::to_string(rng() % 3) + "," + colors[rng() % colors.size()] +
              "," + std::to_string(static_cast<int>(rng() % 40) - 5) + "\n";
    }
    try {
      const Dataset d = Parse(text, schema);
      EXPECT_EQ(d.size(), static_cast<std::size_t>(rows));
      for (std::size_t i = 0; i < d.size(); ++i) EXPECT_TRUE(schema->IsValid(d.row(i)));
    } catch (const Error& e) {
      EXPECT_TRUE(e.code() == ErrorCode::kUnknownCategory ||
                  e.code() == ErrorCode::kValueOutOfBins);
    }
  }
}

TEST(SchemaJsonTest, RoundTrips) {
  const SchemaPtr schema = SmallSchema();
  EXPECT_EQ(SchemaFromJson(SchemaToJson(*schema)), *schema);
}

TEST(SchemaJsonTest, RejectsInconsistentBins) {
  const nlohmann::json j = {
      {"attributes",
       {{{"name", "x"}, {"cardinality", 3}, {"bins", {0, 1, 2}}}}}};
  EXPECT_THROW(SchemaFromJson(j), Error);
  const nlohmann::json unsorted = {
      {"attributes", {{{"name", "x"}, {"bins", {0, 2, 1}}}}}};
  EXPECT_THROW(SchemaFromJson(unsorted), Error);
}

TEST(IndexCsvTest, RoundTrips) {
  const SchemaPtr schema = SmallSchema();
  const Dataset d = Parse("color,size,flag\nred,5,1\n?,25,0\ngreen,10,1\n", schema);
  const auto path = std::filesystem::temp_directory_path() / "pmwpub_index.csv";
  SaveIndexCsv(path.string(), d);
  EXPECT_EQ(LoadIndexCsv(path.string(), schema), d);
  std::filesystem::remove(path);
}

class AdultTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    schema_ = new SchemaPtr(LoadSchema(kSourceDir + "/configs/adult_schema.json"));
    data_ = new Dataset(LoadCsv(kSourceDir + "/data/adult/adult.csv", *schema_));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete schema_;
  }
  static SchemaPtr* schema_;
  static Dataset* data_;
};

SchemaPtr* AdultTest::schema_ = nullptr;
Dataset* AdultTest::data_ = nullptr;

TEST_F(AdultTest, LoadsWithPublishedBinCounts) {
  const Schema& s = **schema_;
  EXPECT_EQ(data_->size(), 32561u);
  EXPECT_EQ(s.size(), 13u);
  EXPECT_EQ(s.cardinality(*s.IndexOf("age")), 10u);
  EXPECT_EQ(s.cardinality(*s.IndexOf("hours-per-week")), 10u);
  EXPECT_EQ(s.cardinality(*s.IndexOf("capital-gain")), 16u);
  EXPECT_EQ(s.cardinality(*s.IndexOf("capital-loss")), 6u);
  std::size_t dims = 0;
  for (std::size_t i = 0; i < s.size(); ++i) dims += s.cardinality(i);
  EXPECT_EQ(dims, 146u);
  EXPECT_NEAR(s.Log10DomainSize(), std::log10(7.3157e11), 1e-4);
  const std::size_t age = *s.IndexOf("age");
  for (std::size_t r = 0; r < data_->size(); ++r) {
    ASSERT_LT(data_->row(r)[age], 10);
  }
}

TEST_F(AdultTest, IndexFormRoundTrips) {
  std::ostringstream out;
  WriteIndexCsv(out, *data_);
  std::istringstream in(out.str());
  const Dataset back = ReadCsv(in, IndexSchema(**schema_));
  EXPECT_EQ(Dataset(*schema_, back.cells()), *data_);
}

SplitSpec AdultSplit(double delta, std::uint64_t seed) {
  SplitSpec spec;
  spec.bias_attribute = "sex";
  spec.bias_value = "Female";
  spec.bias_delta = delta;
  spec.seed = seed;
  return spec;
}

double FemaleShare(const Dataset& d) {
  const std::size_t sex = *d.schema()->IndexOf("sex");
  const CategoryIndex female = 0;  // categories are sorted: Female, Male
  std::size_t count = 0;
  for (std::size_t r = 0; r < d.size(); ++r) count += d.row(r)[sex] == female;
  return static_cast<double>(count) / static_cast<double>(d.size());
}

TEST_F(AdultTest, SplitSizesAndBaseRate) {
  const SplitResult split = BiasedSplit(*data_, AdultSplit(0.0, 1));
  EXPECT_EQ(split.private_data.size(), 29305u);
  EXPECT_EQ(split.public_data.size(), 3256u);
  EXPECT_NEAR(split.base_rate, 0.3308, 1e-4);
  const double sd = std::sqrt(0.33 * 0.67 / 3256);
  EXPECT_NEAR(FemaleShare(split.public_data), split.base_rate, 4 * sd);
}

TEST_F(AdultTest, BiasRaisesFemaleShare) {
  const SplitResult split = BiasedSplit(*data_, AdultSplit(0.45, 2));
  const double target = split.base_rate + 0.45;
  EXPECT_NEAR(target, 0.78, 0.01);
  EXPECT_NEAR(FemaleShare(split.public_data), target,
              4 * std::sqrt(target * (1 - target) / 3256));
}

TEST_F(AdultTest, FullBiasGivesAllFemalePublic) {
  const double r = BiasedSplit(*data_, AdultSplit(0.0, 3)).base_rate;
  EXPECT_EQ(FemaleShare(BiasedSplit(*data_, AdultSplit(1.0 - r, 3)).public_data),
            1.0);
  EXPECT_EQ(CodeOf([&] { BiasedSplit(*data_, AdultSplit(0.7, 3)); }),
            ErrorCode::kConfig);
}

TEST_F(AdultTest, SplitIsSeededAndPrivatePartIgnoresDelta) {
  const SplitResult a = BiasedSplit(*data_, AdultSplit(0.0, 4));
  const SplitResult b = BiasedSplit(*data_, AdultSplit(0.0, 4));
  const SplitResult c = BiasedSplit(*data_, AdultSplit(0.45, 4));
  EXPECT_EQ(a.private_data, b.private_data);
  EXPECT_EQ(a.public_data, b.public_data);
  EXPECT_EQ(a.private_data, c.private_data);
  EXPECT_FALSE(a.public_data == c.public_data);
  EXPECT_FALSE(a.private_data == BiasedSplit(*data_, AdultSplit(0.0, 5)).private_data);
}

TEST(BiasedSplitTest, EmptyStratumIsAnError) {
  const SchemaPtr schema = SmallSchema();
  const Dataset d = Parse("color,size,flag\nred,1,0\nred,2,1\n", schema);
  SplitSpec spec;
  spec.bias_attribute = "color";
  spec.bias_value = "green";
  spec.bias_delta = 0.2;
  EXPECT_EQ(CodeOf([&] { BiasedSplit(d, spec); }), ErrorCode::kEmptyStratum);
  spec.bias_value = "purple";
  EXPECT_EQ(CodeOf([&] { BiasedSplit(d, spec); }), ErrorCode::kConfig);
}

TEST(SubsampleTest, RoundingIdentityAndSubset) {
  const SchemaPtr schema = SmallSchema();
  Dataset d(schema);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 10'000; ++i) {
    d.Append(Record{static_cast<CategoryIndex>(rng() % 3),
                    static_cast<CategoryIndex>(rng() % 3),
                    static_cast<CategoryIndex>(rng() % 2)});
  }
  EXPECT_EQ(SubsamplePublic(d, 1.0, rng), d);
  const Dataset small = SubsamplePublic(d, 0.01, rng);
  EXPECT_EQ(small.size(), 100u);
  EXPECT_EQ(SubsamplePublic(d, 1e-6, rng).size(), 1u);
  const Support full = Support::FromDataset(d);
  const Support part = Support::FromDataset(small);
  for (std::size_t i = 0; i < part.size(); ++i) {
    bool found = false;
    for (std::size_t j = 0; j < full.size() && !found; ++j) {
      found = std::equal(part.point(i).begin(), part.point(i).end(),
                         full.point(j).begin());
    }
    EXPECT_TRUE(found);
  }
  EXPECT_THROW(SubsamplePublic(d, 0.0, rng), Error);
}

}  // namespace
}  // namespace pmwpub
