#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gradorth/matrix.hpp"

namespace gradorth {

enum class Role { train, id_test, ood_test };

std::string to_string(Role role);
Role parse_role(const std::string& text);

struct GeneratorInfo {
  std::string name;
  std::uint64_t seed = 0;
  // Parameter values in canonical textual form.
  std::map<std::string, std::string> parameters;
};

// One sample per row of `inputs`. ood_test labels are placeholders and are
// never consumed by scoring.
struct DatasetSplit {
  Matrix inputs;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  Role role = Role::train;
  GeneratorInfo generator;

  std::size_t size() const noexcept { return inputs.rows(); }
  std::size_t features() const noexcept { return inputs.cols(); }
  std::span<const double> sample(std::size_t i) const { return inputs.row(i); }

  // Throws if shapes disagree, labels are out of range, or inputs are non-finite.
  void validate() const;
};

struct SplitSet {
  DatasetSplit train;
  DatasetSplit id_test;
  DatasetSplit ood_test;
};

// Writes <stem>.gomx (inputs) and <stem>.labels.csv ("index,label").
void export_split(const DatasetSplit& split, const std::filesystem::path& dir, const std::string& stem);
DatasetSplit import_split(const std::filesystem::path& dir, const std::string& stem, Role role,
                          std::size_t num_classes);

}  // namespace gradorth
