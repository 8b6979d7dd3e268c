#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fewshot/numerics.hpp"

namespace fewshot {

enum class DatasetFormat { Csv, Packed };

/// Parses "csv" / "bin" / "packed". Throws InvalidConfig otherwise.
DatasetFormat parse_dataset_format(const std::string& name);
/// Guess from the extension: ".csv" -> Csv, anything else -> Packed.
DatasetFormat format_from_extension(const std::filesystem::path& path);

struct EmbeddingClass {
  std::string name;
  Mat rows;  // d x count, one embedding per column
};

/// Labelled embeddings grouped by global class name. Classes keep the order in
/// which they were first seen. Immutable once constructed.
class EmbeddingDataset {
 public:
  EmbeddingDataset(std::vector<EmbeddingClass> classes, int dim);

  int dim() const { return dim_; }
  std::size_t num_classes() const { return classes_.size(); }
  const std::vector<EmbeddingClass>& classes() const { return classes_; }
  const EmbeddingClass& at(std::size_t i) const { return classes_.at(i); }
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t total_embeddings() const;

 private:
  std::vector<EmbeddingClass> classes_;
  int dim_;
};

// CSV: `class_name,f_1,...,f_d` per line, reals written with 17 significant digits.
// Packed: "EMB1", u32 d, u32 class count, then per class u32 name length, UTF-8
// name, u32 row count, row-major float64 rows. All integers/reals little-endian.
EmbeddingDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
void write_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path,
                   DatasetFormat format);

EmbeddingDataset parse_csv_dataset(const std::string& text);
std::string to_csv(const EmbeddingDataset& ds);
EmbeddingDataset parse_packed_dataset(const std::string& bytes);
std::string to_packed(const EmbeddingDataset& ds);

struct SyntheticSpec {
  int n_classes = 20;
  int dim = 16;
  double mean_scale = 1.0;
  double shared_scale = 1.0;
  double perturbation = 0.0;
  int per_class = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Generated dataset together with the moments it was drawn from.
struct SyntheticDataset {
  EmbeddingDataset data;
  std::vector<Vec> means;
  std::vector<Mat> covariances;
};

/// Class c ~ N(mu_c, Sigma_c), mu_c = mean_scale * N(0, I),
/// Sigma_c = shared_scale * Sigma0 + perturbation * D_c with Sigma0 a random SPD
/// matrix (expected value I) shared by all classes and D_c diagonal, U[0,1].
SyntheticDataset generate_synthetic_with_moments(const SyntheticSpec& spec);
EmbeddingDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace fewshot
