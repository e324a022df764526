#include "gradorth/dataset.hpp"

#include <fstream>
#include <sstream>

#include "gradorth/error.hpp"
#include "gradorth/matrix_io.hpp"

namespace gradorth {

std::string to_string(Role role) {
  switch (role) {
    case Role::train:
      return "train";
    case Role::id_test:
      return "id_test";
    case Role::ood_test:
      return "ood_test";
  }
  return "train";
}

Role parse_role(const std::string& text) {
  if (text == "train") return Role::train;
  if (text == "id_test") return Role::id_test;
  if (text == "ood_test") return Role::ood_test;
  throw ConfigError("unknown split role '" + text + "' (expected train, id_test, ood_test)");
}

void DatasetSplit::validate() const {
  if (labels.size() != inputs.rows()) {
    throw DimensionError("DatasetSplit: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(inputs.rows()) + " samples");
  }
  if (!inputs.all_finite()) throw NumericError("DatasetSplit: non-finite input");
  if (role != Role::ood_test) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= num_classes) {
        throw DimensionError("DatasetSplit: label " + std::to_string(labels[i]) + " at sample " +
                             std::to_string(i) + " exceeds class count " +
                             std::to_string(num_classes));
      }
    }
  }
}

void export_split(const DatasetSplit& split, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  save_gomx(dir / (stem + ".gomx"), split.inputs);
  std::ofstream out(dir / (stem + ".labels.csv"));
  if (!out) throw FormatError("cannot write labels for " + stem);
  out << "index,label\n";
  for (std::size_t i = 0; i < split.labels.size(); ++i) out << i << ',' << split.labels[i] << '\n';
}

DatasetSplit import_split(const std::filesystem::path& dir, const std::string& stem, Role role,
                          std::size_t num_classes) {
  DatasetSplit split;
  split.inputs = load_gomx(dir / (stem + ".gomx"));
  split.role = role;
  split.num_classes = num_classes;
  split.generator.name = "import:" + stem;
  const Matrix labels = load_csv_matrix(dir / (stem + ".labels.csv"), CsvOptions{.has_header = true});
  if (labels.cols() != 2) throw FormatError("labels file for " + stem + " must have 2 columns");
  split.labels.resize(labels.rows());
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    split.labels[i] = static_cast<std::size_t>(labels(i, 1));
  }
  split.validate();
  return split;
}

}  // namespace gradorth
