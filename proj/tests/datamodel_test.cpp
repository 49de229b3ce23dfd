#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "posiv/dataset_io.hpp"
#include "posiv/error.hpp"
#include "posiv/hashing.hpp"
#include "posiv/simulator.hpp"
#include "support.hpp"

namespace posiv {
namespace {

using testing::data_path;
using testing::row;
using testing::scratch_dir;
using testing::write_text;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no posiv::Error thrown";
  return ErrorCode::EmptyInput;
}

TEST(LoadDataset, ExampleObservationsTable) {
  auto ds = load_dataset(data_path("table1.csv"));
  ASSERT_EQ(ds.size(), 6u);
  std::vector<std::int32_t> positions;
  for (const auto& r : ds.rows()) {
    if (r.request_id == 1) positions.push_back(r.position);
  }
  EXPECT_EQ(positions, (std::vector<std::int32_t>{1, 2, 3}));
  EXPECT_EQ(ds[4].item_id, 3u);
  EXPECT_EQ(ds[4].outcome, 1);
  EXPECT_EQ(ds.dropped_rows(), 0u);
  EXPECT_FALSE(ds.schema().has_reason);
}

TEST(LoadDataset, InvalidOutcomeRowIsDroppedAndCounted) {
  auto ds = load_dataset(data_path("table1_bad_outcome.csv"));
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.dropped_rows(), 1u);
  EXPECT_NE(ds.provenance().find("dropped=1"), std::string::npos);
}

TEST(LoadDataset, EmptyFileIsEmptyDataset) {
  auto dir = scratch_dir("empty");
  write_text(dir / "header_only.csv", "request_id,user_id,item_id,position,outcome,arm\n");
  EXPECT_EQ(code_of([&] { load_dataset(dir / "header_only.csv"); }), ErrorCode::EmptyDataset);
  write_text(dir / "nothing.csv", "");
  EXPECT_EQ(code_of([&] { load_dataset(dir / "nothing.csv"); }), ErrorCode::EmptyDataset);
}

TEST(LoadDataset, MissingRequiredColumn) {
  auto dir = scratch_dir("missing");
  write_text(dir / "d.csv", "request_id,user_id,item_id,position,arm\n1,1,1,1,a\n");
  EXPECT_EQ(code_of([&] { load_dataset(dir / "d.csv"); }), ErrorCode::MissingColumn);
}

TEST(LoadDataset, MixedArmsWithinUser) {
  auto dir = scratch_dir("mixed");
  write_text(dir / "d.csv",
             "request_id,user_id,item_id,position,outcome,arm\n"
             "1,7,1,1,0,control\n"
             "2,7,1,1,0,treatment\n");
  EXPECT_EQ(code_of([&] { load_dataset(dir / "d.csv"); }), ErrorCode::MixedArmsWithinUser);
}

TEST(LoadDataset, MissingFileIsIoFailure) {
  EXPECT_EQ(code_of([] { load_dataset("/nonexistent/posiv/d.csv"); }), ErrorCode::IoFailure);
}

TEST(LoadDataset, SchemaMapAndJsonLines) {
  SchemaMap map{{"request_id", "req"}, {"user_id", "viewer"},  {"item_id", "campaign"},
                {"position", "rank"},  {"outcome", "click"},   {"arm", "variant"},
                {"relevance_score", "pctr"}};
  auto ds = load_dataset(data_path("renamed.jsonl"), map);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_TRUE(ds.schema().has_relevance_score);
  EXPECT_EQ(ds[0].user_id, fnv1a64("alice"));
  EXPECT_EQ(ds[1].relevance_score, 0.5);
  EXPECT_FALSE(ds[2].relevance_score.has_value());
}

TEST(LoadDataset, UnknownSchemaMapKey) {
  SchemaMap map{{"ranking", "rank"}};
  EXPECT_EQ(code_of([&] { load_dataset(data_path("table1.csv"), map); }),
            ErrorCode::InvalidConfig);
}

TEST(LoadDataset, ValidationIsOrderIndependent) {
  auto dir = scratch_dir("order");
  std::vector<std::string> lines{"1,1,1,1,1,a", "1,1,2,0,0,a", "2,2,1,1,0,b",
                                 "2,2,2,2,3,b", "3,3,5,4,1,a", "3,3,6,x,1,a"};
  auto load_order = [&](const std::vector<std::string>& order) {
    std::string text = "request_id,user_id,item_id,position,outcome,arm\n";
    for (const auto& l : order) text += l + "\n";
    write_text(dir / "d.csv", text);
    return load_dataset(dir / "d.csv");
  };
  auto a = load_order(lines);
  std::mt19937 gen(3);
  std::shuffle(lines.begin(), lines.end(), gen);
  auto b = load_order(lines);
  EXPECT_EQ(a.dropped_rows(), 3u);
  EXPECT_EQ(b.dropped_rows(), 3u);
  auto key = [](const EdgeObservation& r) { return std::tuple(r.request_id, r.item_id); };
  std::vector<EdgeObservation> ra(a.rows().begin(), a.rows().end());
  std::vector<EdgeObservation> rb(b.rows().begin(), b.rows().end());
  std::ranges::sort(ra, {}, key);
  std::ranges::sort(rb, {}, key);
  EXPECT_EQ(ra, rb);
}

TEST(WriteDataset, RoundTripSimulated) {
  SimConfig config;
  config.n_users = 100;
  config.n_items = 30;
  config.seed = 11;
  auto [ds, truth] = simulate(config);
  ASSERT_GE(ds.size(), 1000u);
  auto dir = scratch_dir("roundtrip");
  write_dataset(ds, dir / "d.csv");
  auto back = load_dataset(dir / "d.csv");
  EXPECT_TRUE(same_rows(ds, back));
  EXPECT_EQ(back.schema(), ds.schema());
}

TEST(WriteDataset, AbsentOptionalColumnsStayAbsent) {
  std::vector<EdgeObservation> rows{row(1, 1, 1, 1, 0, "control"), row(2, 2, 1, 2, 1, "treatment")};
  Dataset ds(rows, Schema{}, "fixture");
  auto dir = scratch_dir("absent");
  write_dataset(ds, dir / "d.csv");
  const auto text = testing::read_text(dir / "d.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "request_id,user_id,item_id,position,outcome,arm");
  auto back = load_dataset(dir / "d.csv");
  EXPECT_EQ(back.schema(), Schema{});
  EXPECT_TRUE(same_rows(ds, back));
}

TEST(WriteDataset, MissingValuesRoundTrip) {
  Schema schema{true, true, true};
  std::vector<EdgeObservation> rows{row(1, 1, 1, 1, 0, "c", "x, y", 0.1, 3),
                                    row(1, 1, 2, 2, 1, "c", std::nullopt, std::nullopt, 3)};
  Dataset ds(rows, schema, "fixture");
  auto dir = scratch_dir("missing_values");
  write_dataset(ds, dir / "d.csv");
  EXPECT_TRUE(same_rows(ds, load_dataset(dir / "d.csv")));
}

TEST(WriteDataset, EmptyPathIsIoFailure) {
  Dataset ds({row(1, 1, 1, 1, 0, "c")}, Schema{}, "fixture");
  EXPECT_EQ(code_of([&] { write_dataset(ds, ""); }), ErrorCode::IoFailure);
}

TEST(DatasetType, DuplicatesAreCounted) {
  Dataset ds({row(1, 1, 1, 1, 0, "c"), row(1, 1, 1, 1, 0, "c"), row(1, 1, 2, 2, 0, "c")},
             Schema{}, "fixture");
  EXPECT_EQ(ds.duplicate_rows(), 1u);
}

TEST(DatasetType, RowInvariants) {
  EXPECT_TRUE(is_valid_row(row(1, 1, 1, 3, 1, "c", std::nullopt, 1.0, 3)));
  EXPECT_FALSE(is_valid_row(row(1, 1, 1, 0, 1, "c")));
  EXPECT_FALSE(is_valid_row(row(1, 1, 1, 1, 2, "c")));
  EXPECT_FALSE(is_valid_row(row(1, 1, 1, 1, 1, "")));
  EXPECT_FALSE(is_valid_row(row(1, 1, 1, 4, 1, "c", std::nullopt, std::nullopt, 3)));
  EXPECT_FALSE(is_valid_row(row(1, 1, 1, 1, 1, "c", std::nullopt, 1.5)));
  EXPECT_THROW(Dataset({row(1, 1, 1, 0, 0, "c")}, Schema{}, "bad"), std::invalid_argument);
}

TEST(ParseId, NumericAndHashed) {
  EXPECT_EQ(parse_id("18446744073709551615"), 18446744073709551615ull);
  EXPECT_EQ(parse_id("42"), 42u);
  // FNV-1a 64 reference values
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(parse_id("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_FALSE(parse_id("").has_value());
}

TEST(Csv, QuotedFields) {
  auto records = parse_csv("a,b\n\"x,1\",\"say \"\"hi\"\"\"\n");
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[1][0], "x,1");
  EXPECT_EQ(records[1][1], "say \"hi\"");
  EXPECT_EQ(csv_field("x,1"), "\"x,1\"");
  EXPECT_EQ(csv_field("plain"), "plain");
}

}  // namespace
}  // namespace posiv
