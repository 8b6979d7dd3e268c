#include "fewshot/dataset.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "fewshot/error.hpp"

namespace fewshot {

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string format_real(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::string& out, T v) {
  v = byteswap_if_big(v);
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return byteswap_if_big(v);
  }

  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::ParseError, std::string("truncated ") + what + " at offset " +
                                             std::to_string(pos_));
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "csv") return DatasetFormat::Csv;
  if (name == "bin" || name == "packed" || name == "packed-binary") return DatasetFormat::Packed;
  throw Error(ErrorCode::InvalidConfig, "unknown dataset format '" + name + "'");
}

DatasetFormat format_from_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::Packed;
}

EmbeddingDataset::EmbeddingDataset(std::vector<EmbeddingClass> classes, int dim)
    : classes_(std::move(classes)), dim_(dim) {
  if (dim_ < 1) throw Error(ErrorCode::DimensionMismatch, "dataset dimension must be >= 1");
  std::map<std::string, int> seen;
  for (const auto& c : classes_) {
    if (c.rows.cols() == 0) throw Error(ErrorCode::EmptyClass, "class '" + c.name + "' is empty");
    if (c.rows.rows() != dim_) {
      throw Error(ErrorCode::DimensionMismatch, "class '" + c.name + "' has dimension " +
                                                    std::to_string(c.rows.rows()));
    }
    if (!c.rows.allFinite()) {
      throw Error(ErrorCode::NonFiniteInput, "class '" + c.name + "' has non-finite entries");
    }
    if (seen[c.name]++ > 0) throw Error(ErrorCode::ParseError, "duplicate class '" + c.name + "'");
  }
}

std::optional<std::size_t> EmbeddingDataset::find(const std::string& name) const {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t EmbeddingDataset::total_embeddings() const {
  std::size_t n = 0;
  for (const auto& c : classes_) n += static_cast<std::size_t>(c.rows.cols());
  return n;
}

EmbeddingDataset parse_csv_dataset(const std::string& text) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<double>>> rows;
  int dim = -1;
  std::size_t line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      auto comma = view.find(',', start);
      fields.push_back(trim(view.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 2) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": no features");
    }
    if (fields[0].empty()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty class name");
    }
    const int row_dim = static_cast<int>(fields.size()) - 1;
    if (dim < 0) dim = row_dim;
    if (row_dim != dim) {
      throw Error(ErrorCode::DimensionMismatch, "line " + std::to_string(line_no) + ": " +
                                                    std::to_string(row_dim) + " features, expected " +
                                                    std::to_string(dim));
    }
    std::vector<double> values(static_cast<std::size_t>(dim));
    for (int f = 0; f < dim; ++f) {
      auto field = fields[static_cast<std::size_t>(f) + 1];
      auto res = std::from_chars(field.data(), field.data() + field.size(), values[f]);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size() ||
          !std::isfinite(values[f])) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ", column " +
                                               std::to_string(f + 2) + ": bad number '" +
                                               std::string(field) + "'");
      }
    }
    std::string name(fields[0]);
    auto& bucket = rows[name];
    if (bucket.empty()) order.push_back(name);
    bucket.push_back(std::move(values));
  }
  if (dim < 0) throw Error(ErrorCode::ParseError, "no data rows");

  std::vector<EmbeddingClass> classes;
  classes.reserve(order.size());
  for (const auto& name : order) {
    const auto& bucket = rows[name];
    Mat m(dim, static_cast<Eigen::Index>(bucket.size()));
    for (std::size_t i = 0; i < bucket.size(); ++i) {
      for (int f = 0; f < dim; ++f) m(f, static_cast<Eigen::Index>(i)) = bucket[i][f];
    }
    classes.push_back({name, std::move(m)});
  }
  return EmbeddingDataset(std::move(classes), dim);
}

std::string to_csv(const EmbeddingDataset& ds) {
  std::string out;
  for (const auto& c : ds.classes()) {
    for (Eigen::Index i = 0; i < c.rows.cols(); ++i) {
      out += c.name;
      for (Eigen::Index f = 0; f < c.rows.rows(); ++f) {
        out += ',';
        out += format_real(c.rows(f, i));
      }
      out += '\n';
    }
  }
  return out;
}

EmbeddingDataset parse_packed_dataset(const std::string& bytes) {
  ByteReader r(bytes);
  if (r.get_string(4, "magic") != "EMB1") {
    throw Error(ErrorCode::ParseError, "bad magic at offset 0 (expected EMB1)");
  }
  const auto dim = r.get<std::uint32_t>("dimension");
  const auto count = r.get<std::uint32_t>("class count");
  if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "dimension 0 in header");

  std::vector<EmbeddingClass> classes;
  for (std::uint32_t c = 0; c < count; ++c) {
    const auto name_len = r.get<std::uint32_t>("name length");
    std::string name = r.get_string(name_len, "class name");
    const auto row_offset = r.offset();
    const auto n_rows = r.get<std::uint32_t>("row count");
    if (n_rows == 0) {
      throw Error(ErrorCode::EmptyClass, "class '" + name + "' has zero rows (offset " +
                                             std::to_string(row_offset) + ")");
    }
    Mat m(dim, n_rows);
    for (std::uint32_t i = 0; i < n_rows; ++i) {
      for (std::uint32_t f = 0; f < dim; ++f) m(f, i) = r.get<double>("row data");
    }
    classes.push_back({std::move(name), std::move(m)});
  }
  if (!r.done()) {
    throw Error(ErrorCode::ParseError, "trailing bytes at offset " + std::to_string(r.offset()));
  }
  return EmbeddingDataset(std::move(classes), static_cast<int>(dim));
}

std::string to_packed(const EmbeddingDataset& ds) {
  std::string out = "EMB1";
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_classes()));
  for (const auto& c : ds.classes()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.name.size()));
    out += c.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.rows.cols()));
    for (Eigen::Index i = 0; i < c.rows.cols(); ++i) {
      for (Eigen::Index f = 0; f < c.rows.rows(); ++f) put<double>(out, c.rows(f, i));
    }
  }
  return out;
}

EmbeddingDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  const std::string bytes = read_file(path);
  return format == DatasetFormat::Csv ? parse_csv_dataset(bytes) : parse_packed_dataset(bytes);
}

void write_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path,
                   DatasetFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const std::string bytes = format == DatasetFormat::Csv ? to_csv(ds) : to_packed(ds);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace fewshot
