#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pullback/models.hpp"
#include "pullback/treedp.hpp"
#include "pullback/types.hpp"

namespace pullback::data {

/// Mixture of linear models:
///   z ~ Categorical(1/K),  x ~ Normal(m_z, noise^2 I),
///   y = sign(w_z^T x + b_z + label_noise * noise * xi),  xi ~ Normal(0, 1).
/// Centres lie uniformly on a sphere of radius center_radius; w_z is a random
/// unit direction and b_z = -w_z^T m_z, so each cluster is split in half.
/// As noise -> 0 the labels become a deterministic function of (x, z).
struct MixtureSpec {
  int clusters = 3;
  int dims = 10;
  int n_train = 5000;
  int n_valid = 1000;
  int n_test = 1000;
  double noise = 1.0;
  double center_radius = 4.0;
  double label_noise = 0.25;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LabeledExample {
  Vector x;
  int y = 1;
  int z_true = 0;
};

using Split = std::vector<LabeledExample>;

struct MixtureDataset {
  MixtureSpec spec;
  Matrix centers;  // D x K
  Matrix weights;  // D x K, column z is w_z
  Vector biases;   // K
  Split train, valid, test;
};

MixtureDataset gen_mixture(const MixtureSpec& spec);

/// Structured analogue: token features ~ Normal(0, I_d); a hidden toy model
/// scores arcs, z* = map_tree(hidden scores), and y is the sign of the hidden
/// decoder at z* after centring its bias on the median logit.
struct StructuredSpec {
  int min_length = 3;
  int max_length = 6;
  int token_dims = 4;
  int hidden = 8;
  int n_train = 1000;
  int n_valid = 200;
  int n_test = 200;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TreeExample {
  Matrix tokens;  // d x L
  int y = 1;
  treedp::Heads heads;  // gold tree, heads[0] unused
};

using TreeSplit = std::vector<TreeExample>;

struct StructuredDataset {
  StructuredSpec spec;
  models::StructuredToyModel hidden;
  TreeSplit train, valid, test;
};

StructuredDataset gen_structured_toy(const StructuredSpec& spec);

// -- files ---------------------------------------------------------------------
//
// Mixture CSV: header x0,...,x{D-1},y,z_true.
// Tree CSV:    header L,y,h1..h{Lmax},t{i}_{j} (token i in 1..Lmax, feature j),
//              with cells beyond a sentence's length left empty.
// Numbers are written in shortest round-trip form, so parse(serialize(d)) == d.

std::string format_double(double v);
double parse_double(const std::string& text);

void write_split_csv(const Split& split, const std::filesystem::path& path);
Split read_split_csv(const std::filesystem::path& path);

void write_tree_csv(const TreeSplit& split, int max_length, const std::filesystem::path& path);
TreeSplit read_tree_csv(const std::filesystem::path& path);

nlohmann::json spec_to_json(const MixtureSpec& spec);
MixtureSpec mixture_spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const StructuredSpec& spec);
StructuredSpec structured_spec_from_json(const nlohmann::json& j);

/// Writes train.csv, valid.csv, test.csv and dataset.json (generator settings plus the
/// realised centres, weights and biases).
void save_dataset(const MixtureDataset& ds, const std::filesystem::path& dir);
MixtureDataset load_dataset(const std::filesystem::path& dir);

void save_dataset(const StructuredDataset& ds, const std::filesystem::path& dir);
StructuredDataset load_structured_dataset(const std::filesystem::path& dir);

/// "mixture" or "trees", from dataset.json.
std::string dataset_kind(const std::filesystem::path& dir);

// -- checkpoints -----------------------------------------------------------------
//
// Text format, one tensor per block:
//   pullback-checkpoint 1 <model-kind>
//   tensor <name> <rows> <cols>
//   <rows lines of cols values, row major>
// Values use the shortest round-trip decimal form; text is byte-order free.

void save_checkpoint(const models::UnstructuredModel& model, const std::filesystem::path& path);
models::UnstructuredModel load_unstructured_checkpoint(const std::filesystem::path& path);
void save_checkpoint(const models::StructuredToyModel& model, const std::filesystem::path& path);
models::StructuredToyModel load_structured_checkpoint(const std::filesystem::path& path);

}  // namespace pullback::data
