#include "fewshot/embedding_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string_view>

#include "fewshot/rng.hpp"

namespace fewshot {

DimensionMismatchError::DimensionMismatchError(std::size_t row, std::size_t expected,
                                               std::size_t actual)
    : DatasetError("dimension mismatch at row " + std::to_string(row) + ": expected " +
                   std::to_string(expected) + " values, got " + std::to_string(actual)),
      row_(row) {}

NonFiniteValueError::NonFiniteValueError(std::size_t row, std::size_t column)
    : DatasetError("non-finite value at row " + std::to_string(row) + ", component " +
                   std::to_string(column)),
      row_(row) {}

DuplicateRecordIdError::DuplicateRecordIdError(std::uint64_t record_id)
    : DatasetError("duplicate record_id " + std::to_string(record_id)) {}

GroupClassConflictError::GroupClassConflictError(std::uint64_t group_id,
                                                 std::uint32_t first_class,
                                                 std::uint32_t second_class)
    : DatasetError("group_id " + std::to_string(group_id) + " spans classes " +
                   std::to_string(first_class) + " and " + std::to_string(second_class)) {}

EmbeddingDataset::EmbeddingDataset(std::size_t dim, std::vector<EmbeddingRecord> records)
    : dim_(dim), records_(std::move(records)) {
  if (dim_ == 0) throw MalformedHeaderError("dataset dimensionality must be >= 1");

  std::set<std::uint64_t> seen_ids;
  for (std::size_t row = 0; row < records_.size(); ++row) {
    const auto& rec = records_[row];
    if (rec.vector.size() != dim_) throw DimensionMismatchError(row, dim_, rec.vector.size());
    for (std::size_t k = 0; k < dim_; ++k) {
      if (!std::isfinite(rec.vector[k])) throw NonFiniteValueError(row, k);
    }
    if (!seen_ids.insert(rec.record_id).second) throw DuplicateRecordIdError(rec.record_id);

    auto [it, inserted] = groups_.try_emplace(rec.group_id, GroupInfo{rec.class_label, {}});
    if (!inserted && it->second.class_label != rec.class_label) {
      throw GroupClassConflictError(rec.group_id, it->second.class_label, rec.class_label);
    }
    it->second.members.push_back(row);
  }

  for (auto& [group_id, info] : groups_) {
    std::sort(info.members.begin(), info.members.end(), [&](std::size_t a, std::size_t b) {
      return records_[a].record_id < records_[b].record_id;
    });
    class_index_[info.class_label].push_back(group_id);
  }
}

std::span<const std::size_t> EmbeddingDataset::group_members(std::uint64_t group_id) const {
  const auto it = groups_.find(group_id);
  if (it == groups_.end()) throw std::out_of_range("unknown group_id " + std::to_string(group_id));
  return it->second.members;
}

std::uint32_t EmbeddingDataset::group_class(std::uint64_t group_id) const {
  const auto it = groups_.find(group_id);
  if (it == groups_.end()) throw std::out_of_range("unknown group_id " + std::to_string(group_id));
  return it->second.class_label;
}

ClassIndex build_class_index(std::span<const EmbeddingRecord> records) {
  std::map<std::uint32_t, std::set<std::uint64_t>> sets;
  for (const auto& rec : records) sets[rec.class_label].insert(rec.group_id);
  ClassIndex index;
  for (const auto& [label, groups] : sets) index[label].assign(groups.begin(), groups.end());
  return index;
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "csv") return DatasetFormat::kCsv;
  if (name == "binary" || name == "bin") return DatasetFormat::kBinary;
  throw std::invalid_argument("unknown dataset format '" + name + "' (expected csv|binary)");
}

std::string to_string(DatasetFormat format) {
  return format == DatasetFormat::kCsv ? "csv" : "binary";
}

// ---------------------------------------------------------------------------
// Binary format. Little-endian regardless of host:
//   "FSEB" | u16 version | u32 dim | u64 count | { u64 id, u64 group, u32 class, f64 x dim }*

namespace {

constexpr std::array<char, 4> kMagic = {'F', 'S', 'E', 'B'};
constexpr std::uint16_t kBinaryVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw MalformedHeaderError(std::string("truncated binary file while reading ") + what);
  }
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= std::uint64_t{bytes[i]} << (8 * i);
  return static_cast<T>(value);
}

}  // namespace

void write_binary(const EmbeddingDataset& dataset, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(out, kBinaryVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.dim()));
  put_le<std::uint64_t>(out, dataset.size());
  for (const auto& rec : dataset.records()) {
    put_le<std::uint64_t>(out, rec.record_id);
    put_le<std::uint64_t>(out, rec.group_id);
    put_le<std::uint32_t>(out, rec.class_label);
    for (double v : rec.vector) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw IoError("failed writing binary dataset");
}

EmbeddingDataset read_binary(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kMagic) throw MalformedHeaderError("missing FSEB magic bytes");
  const auto version = get_le<std::uint16_t>(in, "version");
  if (version != kBinaryVersion) {
    throw MalformedHeaderError("unsupported binary format version " + std::to_string(version));
  }
  const auto dim = get_le<std::uint32_t>(in, "dim");
  const auto count = get_le<std::uint64_t>(in, "record count");
  if (dim == 0) throw MalformedHeaderError("binary header declares dim 0");

  std::vector<EmbeddingRecord> records;
  records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t row = 0; row < count; ++row) {
    EmbeddingRecord rec;
    rec.record_id = get_le<std::uint64_t>(in, "record_id");
    rec.group_id = get_le<std::uint64_t>(in, "group_id");
    rec.class_label = get_le<std::uint32_t>(in, "class_label");
    rec.vector.resize(dim);
    for (auto& v : rec.vector) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "vector"));
    records.push_back(std::move(rec));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw MalformedHeaderError("trailing bytes after declared record count");
  }
  return EmbeddingDataset(dim, std::move(records));
}

// ---------------------------------------------------------------------------
// CSV format: header record_id,group_id,class_label,v0..v{dim-1}; 17 significant digits.

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

template <typename T>
T parse_integer(std::string_view field, std::size_t row, const char* what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw DatasetError("row " + std::to_string(row) + ": cannot parse " + what + " '" +
                       std::string(field) + "'");
  }
  return value;
}

double parse_real(std::string_view field, std::size_t row, std::size_t column) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec == std::errc::result_out_of_range) throw NonFiniteValueError(row, column);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw DatasetError("row " + std::to_string(row) + ": cannot parse value '" +
                       std::string(field) + "'");
  }
  if (!std::isfinite(value)) throw NonFiniteValueError(row, column);
  return value;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

void write_csv(const EmbeddingDataset& dataset, std::ostream& out) {
  out << "record_id,group_id,class_label";
  for (std::size_t k = 0; k < dataset.dim(); ++k) out << ",v" << k;
  out << '\n';
  std::array<char, 64> buf{};
  for (const auto& rec : dataset.records()) {
    out << rec.record_id << ',' << rec.group_id << ',' << rec.class_label;
    for (double v : rec.vector) {
      const auto res =
          std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
      out << ',' << std::string_view(buf.data(), static_cast<std::size_t>(res.ptr - buf.data()));
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing csv dataset");
}

EmbeddingDataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw MalformedHeaderError("csv file is empty");
  strip_cr(line);
  const auto header = split_commas(line);
  if (header.size() < 4 || header[0] != "record_id" || header[1] != "group_id" ||
      header[2] != "class_label") {
    throw MalformedHeaderError("csv header must be record_id,group_id,class_label,v0,...");
  }
  const std::size_t dim = header.size() - 3;
  for (std::size_t k = 0; k < dim; ++k) {
    if (header[3 + k] != "v" + std::to_string(k)) {
      throw MalformedHeaderError("csv header column " + std::to_string(3 + k) + " should be v" +
                                 std::to_string(k));
    }
  }

  std::vector<EmbeddingRecord> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() < 3) throw DimensionMismatchError(row, dim, 0);
    if (fields.size() - 3 != dim) throw DimensionMismatchError(row, dim, fields.size() - 3);
    EmbeddingRecord rec;
    rec.record_id = parse_integer<std::uint64_t>(fields[0], row, "record_id");
    rec.group_id = parse_integer<std::uint64_t>(fields[1], row, "group_id");
    rec.class_label = parse_integer<std::uint32_t>(fields[2], row, "class_label");
    rec.vector.reserve(dim);
    for (std::size_t k = 0; k < dim; ++k) rec.vector.push_back(parse_real(fields[3 + k], row, k));
    records.push_back(std::move(rec));
    ++row;
  }
  return EmbeddingDataset(dim, std::move(records));
}

EmbeddingDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  const auto mode = format == DatasetFormat::kBinary ? std::ios::in | std::ios::binary : std::ios::in;
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  return format == DatasetFormat::kBinary ? read_binary(in) : read_csv(in);
}

void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format) {
  const auto mode = format == DatasetFormat::kBinary
                        ? std::ios::out | std::ios::binary | std::ios::trunc
                        : std::ios::out | std::ios::trunc;
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if (format == DatasetFormat::kBinary) {
    write_binary(dataset, out);
  } else {
    write_csv(dataset, out);
  }
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Synthetic fixtures.

void SyntheticSpec::validate() const {
  if (n_classes < 2) throw InvalidSpecError("synthetic spec needs n_classes >= 2");
  if (dim < 1) throw InvalidSpecError("synthetic spec needs dim >= 1");
  if (groups_per_class < 1) throw InvalidSpecError("synthetic spec needs groups_per_class >= 1");
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
    throw InvalidSpecError("synthetic spec needs noise_sigma > 0");
  }
  if (!std::isfinite(class_center_norm) || class_center_norm < 0.0) {
    throw InvalidSpecError("synthetic spec needs a finite class_center_norm >= 0");
  }
  if (augment_sigma < 0.0 || nuisance_sigma < 0.0) {
    throw InvalidSpecError("synthetic spec perturbation scales must be >= 0");
  }
  if (nuisance_rank > dim) throw InvalidSpecError("nuisance_rank cannot exceed dim");
}

namespace {

enum Stream : std::uint64_t { kCenters = 0, kNuisance = 1, kSamples = 2 };

std::vector<double> random_unit(CounterRng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 < 1e-24);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

// Orthonormal basis of a random rank-r subspace (Gram-Schmidt).
std::vector<std::vector<double>> nuisance_basis(const SyntheticSpec& spec) {
  CounterRng rng(spec.seed, kNuisance);
  std::vector<std::vector<double>> basis;
  while (basis.size() < spec.nuisance_rank) {
    auto v = random_unit(rng, spec.dim);
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t k = 0; k < spec.dim; ++k) dot += v[k] * b[k];
      for (std::size_t k = 0; k < spec.dim; ++k) v[k] -= dot * b[k];
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 < 1e-12) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : v) x *= inv;
    basis.push_back(std::move(v));
  }
  return basis;
}

void add_subspace_noise(std::vector<double>& x, const std::vector<std::vector<double>>& basis,
                        double sigma, CounterRng& rng) {
  for (const auto& b : basis) {
    const double a = sigma * rng.normal();
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += a * b[k];
  }
}

}  // namespace

std::vector<std::vector<double>> synthetic_class_centers(const SyntheticSpec& spec) {
  spec.validate();
  CounterRng rng(spec.seed, kCenters);
  std::vector<std::vector<double>> centers;
  centers.reserve(spec.n_classes);
  for (std::uint32_t c = 0; c < spec.n_classes; ++c) {
    auto u = random_unit(rng, spec.dim);
    for (auto& x : u) x *= spec.class_center_norm;
    centers.push_back(std::move(u));
  }
  return centers;
}

EmbeddingDataset generate_synthetic(const SyntheticSpec& spec) {
  const auto centers = synthetic_class_centers(spec);
  const auto basis = nuisance_basis(spec);
  CounterRng rng(spec.seed, kSamples);

  std::vector<EmbeddingRecord> records;
  records.reserve(spec.n_classes * spec.groups_per_class * (1 + spec.augment_copies));
  std::uint64_t next_record = 0;
  std::uint64_t next_group = 0;
  for (std::uint32_t c = 0; c < spec.n_classes; ++c) {
    for (std::size_t g = 0; g < spec.groups_per_class; ++g) {
      const std::uint64_t group_id = next_group++;
      std::vector<double> source(centers[c]);
      for (auto& x : source) x += spec.noise_sigma * rng.normal();
      add_subspace_noise(source, basis, spec.nuisance_sigma, rng);

      for (std::size_t copy = 0; copy < spec.augment_copies; ++copy) {
        std::vector<double> aug(source);
        if (basis.empty()) {
          for (auto& x : aug) x += spec.augment_sigma * rng.normal();
        } else {
          add_subspace_noise(aug, basis, spec.augment_sigma, rng);
        }
        records.push_back({0, group_id, c, std::move(aug)});
      }
      // The source record gets the lowest record_id of its group.
      records.push_back({0, group_id, c, std::move(source)});
      std::rotate(records.end() - static_cast<std::ptrdiff_t>(spec.augment_copies + 1),
                  records.end() - 1, records.end());
      for (std::size_t i = records.size() - spec.augment_copies - 1; i < records.size(); ++i) {
        records[i].record_id = next_record++;
      }
    }
  }
  return EmbeddingDataset(spec.dim, std::move(records));
}

}  // namespace fewshot
