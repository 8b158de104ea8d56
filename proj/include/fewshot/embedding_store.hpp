#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fewshot {

/// Base class for every dataset load/validation failure.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedHeaderError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

class DimensionMismatchError : public DatasetError {
 public:
  DimensionMismatchError(std::size_t row, std::size_t expected, std::size_t actual);
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class NonFiniteValueError : public DatasetError {
 public:
  NonFiniteValueError(std::size_t row, std::size_t column);
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class DuplicateRecordIdError : public DatasetError {
 public:
  explicit DuplicateRecordIdError(std::uint64_t record_id);
};

class GroupClassConflictError : public DatasetError {
 public:
  GroupClassConflictError(std::uint64_t group_id, std::uint32_t first_class,
                          std::uint32_t second_class);
};

class IoError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

class InvalidSpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EmbeddingRecord {
  std::uint64_t record_id = 0;
  /// All augmented copies of one source image share a group_id.
  std::uint64_t group_id = 0;
  std::uint32_t class_label = 0;
  std::vector<double> vector;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// class_label -> sorted group ids.
using ClassIndex = std::map<std::uint32_t, std::vector<std::uint64_t>>;

/// Immutable, validated collection of embedding records with a fixed
/// dimensionality. Construction enforces every record invariant and builds
/// the class and group indices.
class EmbeddingDataset {
 public:
  EmbeddingDataset(std::size_t dim, std::vector<EmbeddingRecord> records);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return records_.size(); }
  std::span<const EmbeddingRecord> records() const noexcept { return records_; }
  const EmbeddingRecord& record(std::size_t position) const { return records_.at(position); }
  const ClassIndex& class_index() const noexcept { return class_index_; }

  /// Positions (into records()) of a group's members, ordered by record_id.
  std::span<const std::size_t> group_members(std::uint64_t group_id) const;

  /// Class of a group; throws std::out_of_range for unknown groups.
  std::uint32_t group_class(std::uint64_t group_id) const;

  friend bool operator==(const EmbeddingDataset& a, const EmbeddingDataset& b) {
    return a.dim_ == b.dim_ && a.records_ == b.records_;
  }

 private:
  struct GroupInfo {
    std::uint32_t class_label;
    std::vector<std::size_t> members;
  };

  std::size_t dim_;
  std::vector<EmbeddingRecord> records_;
  ClassIndex class_index_;
  std::map<std::uint64_t, GroupInfo> groups_;
};

/// Recomputes the class -> groups partition directly from records.
ClassIndex build_class_index(std::span<const EmbeddingRecord> records);

enum class DatasetFormat { kCsv, kBinary };

DatasetFormat parse_dataset_format(const std::string& name);
std::string to_string(DatasetFormat format);

EmbeddingDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format);

/// Stream variants used by the file functions; exposed for in-memory tests.
EmbeddingDataset read_binary(std::istream& in);
void write_binary(const EmbeddingDataset& dataset, std::ostream& out);
EmbeddingDataset read_csv(std::istream& in);
void write_csv(const EmbeddingDataset& dataset, std::ostream& out);

/// Parameters of the Gaussian-cluster fixture generator.
///
/// Each group draws one source vector  center_c + noise_sigma * g
/// (+ nuisance_sigma * a shared low-rank nuisance component). When
/// augment_copies > 0 every group also gets that many perturbed duplicates of
/// its source vector; the perturbation lies in the nuisance subspace when
/// nuisance_rank > 0 and is isotropic otherwise.
struct SyntheticSpec {
  std::uint32_t n_classes = 5;
  std::size_t dim = 16;
  std::size_t groups_per_class = 40;
  double class_center_norm = 10.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;

  std::size_t augment_copies = 0;
  double augment_sigma = 0.0;
  std::size_t nuisance_rank = 0;
  double nuisance_sigma = 0.0;

  void validate() const;
};

EmbeddingDataset generate_synthetic(const SyntheticSpec& spec);

/// Class centers used by generate_synthetic, row c = center of class c.
std::vector<std::vector<double>> synthetic_class_centers(const SyntheticSpec& spec);

}  // namespace fewshot
