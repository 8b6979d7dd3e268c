#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "fewshot/dataset.hpp"
#include "fewshot/error.hpp"
#include "fewshot/task.hpp"

using namespace fewshot;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("fewshot_test_" + name);
}

}  // namespace

TEST_SUITE("episodic_data") {

TEST_CASE("minimal csv") {
  const auto ds = parse_csv_dataset("classA,0.1,0.2\nclassA,0.3,0.4\n");
  CHECK(ds.dim() == 2);
  CHECK(ds.num_classes() == 1);
  CHECK(ds.at(0).rows.cols() == 2);
  CHECK(ds.at(0).rows(1, 1) == 0.4);
}

TEST_CASE("csv errors") {
  CHECK(code_of([] { parse_csv_dataset("a,1,2\na,1\n"); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([] { parse_csv_dataset("a,1,2\na,1,x\n"); }) == ErrorCode::ParseError);
  CHECK_THROWS_WITH(parse_csv_dataset("a,1,2\n\nb,1,zz\n"), doctest::Contains("line 3"));
  CHECK(code_of([] { parse_csv_dataset(""); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_csv_dataset("a\n"); }) == ErrorCode::ParseError);
}

TEST_CASE("csv class counts match a line-count oracle") {
  // Uneven class sizes cut from a synthetic pool.
  auto pool = generate_synthetic(SyntheticSpec{3, 4, 1.0, 1.0, 0.0, 9, 3});
  std::vector<EmbeddingClass> classes;
  const int sizes[] = {2, 9, 5};
  for (int c = 0; c < 3; ++c) classes.push_back({pool.at(c).name, pool.at(c).rows.leftCols(sizes[c])});
  const std::string text = to_csv(EmbeddingDataset(classes, 4));

  std::map<std::string, int> counted;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) ++counted[line.substr(0, line.find(','))];

  const auto ds = parse_csv_dataset(text);
  CHECK(ds.dim() == 4);
  REQUIRE(ds.num_classes() == counted.size());
  for (const auto& c : ds.classes()) CHECK(c.rows.cols() == counted[c.name]);
}

TEST_CASE("interleaved csv rows group by class in first-seen order") {
  const auto ds = parse_csv_dataset("b,1\na,2\nb,3\n");
  CHECK(ds.at(0).name == "b");
  CHECK(ds.at(0).rows.cols() == 2);
  CHECK(ds.at(1).name == "a");
}

TEST_CASE("packed binary errors") {
  CHECK(code_of([] { parse_packed_dataset("EMB2"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_packed_dataset("EMB1\x02"); }) == ErrorCode::ParseError);

  std::string zero_rows("EMB1", 4);
  const unsigned char header[] = {2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 'x', 0, 0, 0, 0};
  zero_rows.append(reinterpret_cast<const char*>(header), sizeof header);
  CHECK(code_of([&] { parse_packed_dataset(zero_rows); }) == ErrorCode::EmptyClass);
}

TEST_CASE("packed layout is little-endian as documented") {
  Mat rows(1, 1);
  rows(0, 0) = 1.0;
  const std::string bytes = to_packed(EmbeddingDataset({{"ab", rows}}, 1));
  REQUIRE(bytes.size() == 4 + 4 + 4 + 4 + 2 + 4 + 8);
  CHECK(bytes.substr(0, 4) == "EMB1");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 1);
  CHECK(bytes[12] == 2);
  CHECK(bytes.substr(16, 2) == "ab");
  CHECK(bytes[18] == 1);
  CHECK(static_cast<unsigned char>(bytes[29]) == 0x3f);  // 1.0 = 0x3ff0000000000000
  CHECK(static_cast<unsigned char>(bytes[28]) == 0xf0);
}

TEST_CASE("dataset round trips through both formats") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto ds = generate_synthetic(SyntheticSpec{4, 3, 5.0, 1.0, 0.5, 7, seed});
    const auto bin = temp_path("rt.bin"), csv = temp_path("rt.csv");
    write_dataset(ds, bin, DatasetFormat::Packed);
    write_dataset(ds, csv, DatasetFormat::Csv);
    const auto from_bin = load_dataset(bin, DatasetFormat::Packed);
    const auto from_csv = load_dataset(csv, DatasetFormat::Csv);
    REQUIRE(from_bin.num_classes() == ds.num_classes());
    REQUIRE(from_csv.num_classes() == ds.num_classes());
    for (std::size_t c = 0; c < ds.num_classes(); ++c) {
      CHECK(from_bin.at(c).name == ds.at(c).name);
      CHECK((from_bin.at(c).rows.array() == ds.at(c).rows.array()).all());
      CHECK((from_csv.at(c).rows - ds.at(c).rows).cwiseAbs().maxCoeff() <= 1e-12);
    }
    std::filesystem::remove(bin);
    std::filesystem::remove(csv);
  }
  CHECK(code_of([] { load_dataset("/nonexistent/x.bin", DatasetFormat::Packed); }) ==
        ErrorCode::IoError);
}

TEST_CASE("synthetic with zero covariance collapses onto the means") {
  const auto syn = generate_synthetic_with_moments(SyntheticSpec{3, 4, 2.0, 0.0, 0.0, 6, 9});
  for (std::size_t c = 0; c < 3; ++c) {
    for (Eigen::Index i = 0; i < 6; ++i) {
      CHECK((syn.data.at(c).rows.col(i).array() == syn.means[c].array()).all());
    }
  }
}

TEST_CASE("synthetic generation is deterministic per seed") {
  const SyntheticSpec spec{5, 6, 1.0, 1.0, 0.3, 20, 1234};
  const auto a = to_packed(generate_synthetic(spec));
  const auto b = to_packed(generate_synthetic(spec));
  CHECK(a == b);
  SyntheticSpec other = spec;
  other.seed = 1235;
  CHECK(a != to_packed(generate_synthetic(other)));
}

TEST_CASE("synthetic sample means agree with requested means") {
  const SyntheticSpec spec{5, 4, 3.0, 1.0, 0.5, 1000, 77};
  const auto syn = generate_synthetic_with_moments(spec);
  for (std::size_t c = 0; c < 5; ++c) {
    const Vec sample_mean = syn.data.at(c).rows.rowwise().mean();
    for (int i = 0; i < spec.dim; ++i) {
      // Standard error of the mean; 5 sigma over 20 coordinates.
      const double se = std::sqrt(syn.covariances[c](i, i) / spec.per_class);
      CHECK(std::abs(sample_mean(i) - syn.means[c](i)) < 5.0 * se);
    }
  }
}

TEST_CASE("synthetic spec validation") {
  CHECK(code_of([] { generate_synthetic(SyntheticSpec{0, 2, 1, 1, 0, 1, 0}); }) ==
        ErrorCode::InvalidSpec);
  CHECK(code_of([] { generate_synthetic(SyntheticSpec{1, 2, -1, 1, 0, 1, 0}); }) ==
        ErrorCode::InvalidSpec);
}

TEST_CASE("task construction enforces its invariants") {
  Mat s(2, 3);
  s.setRandom();
  CHECK_NOTHROW(Task(s, {0, 1, 1}, Mat(2, 0), 2));
  CHECK(code_of([&] { Task(s, {0, 0, 0}, Mat(2, 1), 2); }) == ErrorCode::InvalidTask);
  CHECK(code_of([&] { Task(s, {0, 1, 2}, Mat(2, 1), 2); }) == ErrorCode::InvalidTask);
  CHECK(code_of([&] { Task(s, {0, 1}, Mat(2, 1), 2); }) == ErrorCode::InvalidTask);
  CHECK(code_of([&] { Task(s, {0, 1, 1}, Mat::Zero(3, 1), 2); }) == ErrorCode::DimensionMismatch);
  Mat bad = s;
  bad(0, 0) = NAN;
  CHECK(code_of([&] { Task(bad, {0, 1, 1}, Mat(2, 0), 2); }) == ErrorCode::NonFiniteInput);

  const Task t = Task::from_points({{Vec::Zero(2), 1}, {Vec::Ones(2), 0}, {Vec::Ones(2), 1}},
                                   {Vec::Ones(2)}, 2);
  CHECK(t.class_counts() == std::vector<int>{1, 2});
  CHECK(t.query_size() == 1);
}

}
