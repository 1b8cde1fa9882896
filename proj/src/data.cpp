#include "pullback/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "pullback/rng.hpp"

namespace pullback::data {

namespace fs = std::filesystem;
using nlohmann::json;

void MixtureSpec::validate() const {
  if (clusters < 2) throw InvalidInput("mixture: clusters must be >= 2");
  if (dims < 1) throw InvalidInput("mixture: dims must be >= 1");
  if (n_train < 1 || n_valid < 0 || n_test < 0) throw InvalidInput("mixture: bad split sizes");
  if (!(noise > 0.0)) throw InvalidInput("mixture: noise must be > 0");
  if (!(center_radius >= 0.0) || !(label_noise >= 0.0)) throw InvalidInput("mixture: radius and label noise must be >= 0");
}

void StructuredSpec::validate() const {
  if (min_length < 1 || max_length < min_length) throw InvalidInput("trees: bad length range");
  if (max_length > treedp::kMaxExactLength)
    throw InvalidInput("trees: max_length must be <= " + std::to_string(treedp::kMaxExactLength));
  if (token_dims < 1 || hidden < 1) throw InvalidInput("trees: dims must be >= 1");
  if (n_train < 1 || n_valid < 0 || n_test < 0) throw InvalidInput("trees: bad split sizes");
}

namespace {

Vector unit_direction(Eigen::Index dims, Rng& rng) {
  Vector v = rng.normal_vector(dims);
  while (v.norm() == 0.0) v = rng.normal_vector(dims);
  return v / v.norm();
}

Split sample_split(const MixtureDataset& ds, int n, Rng& rng) {
  const auto& spec = ds.spec;
  Split out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    LabeledExample ex;
    ex.z_true = static_cast<int>(rng.below(static_cast<std::size_t>(spec.clusters)));
    ex.x = ds.centers.col(ex.z_true) + spec.noise * rng.normal_vector(spec.dims);
    const double logit = ds.weights.col(ex.z_true).dot(ex.x) + ds.biases[ex.z_true] +
                         spec.label_noise * spec.noise * rng.normal();
    ex.y = logit >= 0.0 ? 1 : -1;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

int parse_int(const std::string& text) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw InvalidInput("bad integer '" + text + "'");
  return v;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path.string());
  return in;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
  return m;
}

void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << format_double(m(i, j));
    out << '\n';
  }
}

Matrix read_tensor(std::istream& in, const std::string& expected) {
  std::string tag, name;
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> tag >> name >> rows >> cols) || tag != "tensor" || name != expected)
    throw InvalidInput("checkpoint: expected tensor '" + expected + "'");
  Matrix m(rows, cols);
  std::string token;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(in >> token)) throw InvalidInput("checkpoint: truncated tensor '" + expected + "'");
      m(i, j) = parse_double(token);
    }
  return m;
}

void read_header(std::istream& in, const std::string& kind) {
  std::string magic, found;
  int version = 0;
  if (!(in >> magic >> version >> found) || magic != "pullback-checkpoint" || version != 1 || found != kind)
    throw InvalidInput("checkpoint: expected a version 1 '" + kind + "' checkpoint");
}

Matrix as_matrix(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

MixtureDataset gen_mixture(const MixtureSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  MixtureDataset ds;
  ds.spec = spec;
  ds.centers.resize(spec.dims, spec.clusters);
  ds.weights.resize(spec.dims, spec.clusters);
  ds.biases.resize(spec.clusters);
  for (int z = 0; z < spec.clusters; ++z) {
    ds.centers.col(z) = spec.center_radius * unit_direction(spec.dims, rng);
    ds.weights.col(z) = unit_direction(spec.dims, rng);
    ds.biases[z] = -ds.weights.col(z).dot(ds.centers.col(z));
  }
  ds.train = sample_split(ds, spec.n_train, rng);
  ds.valid = sample_split(ds, spec.n_valid, rng);
  ds.test = sample_split(ds, spec.n_test, rng);
  return ds;
}

StructuredDataset gen_structured_toy(const StructuredSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  StructuredDataset ds;
  ds.spec = spec;
  ds.hidden = models::StructuredToyModel::random(spec.token_dims, spec.hidden, rng, 1.0);
  ds.hidden.dec_bias = 0.0;

  const int total = spec.n_train + spec.n_valid + spec.n_test;
  TreeSplit all;
  all.reserve(static_cast<std::size_t>(total));
  std::vector<double> logits;
  for (int i = 0; i < total; ++i) {
    TreeExample ex;
    const int length =
        spec.min_length + static_cast<int>(rng.below(static_cast<std::size_t>(spec.max_length - spec.min_length + 1)));
    ex.tokens.resize(spec.token_dims, length);
    for (int j = 0; j < length; ++j) ex.tokens.col(j) = rng.normal_vector(spec.token_dims);
    ex.heads = treedp::map_heads(models::encode(ds.hidden, ex.tokens));
    logits.push_back(models::decode(ds.hidden, ex.tokens, treedp::tree_from_heads(ex.heads)));
    all.push_back(std::move(ex));
  }
  // centre the hidden decoder on the median logit so labels are balanced
  std::vector<double> sorted = logits;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  ds.hidden.dec_bias = -sorted[sorted.size() / 2];
  for (std::size_t i = 0; i < all.size(); ++i) all[i].y = logits[i] + ds.hidden.dec_bias >= 0.0 ? 1 : -1;

  auto begin = all.begin();
  ds.train.assign(std::make_move_iterator(begin), std::make_move_iterator(begin + spec.n_train));
  begin += spec.n_train;
  ds.valid.assign(std::make_move_iterator(begin), std::make_move_iterator(begin + spec.n_valid));
  begin += spec.n_valid;
  ds.test.assign(std::make_move_iterator(begin), std::make_move_iterator(begin + spec.n_test));
  return ds;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw InvalidInput("cannot format number");
  return {buf, ptr};
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw InvalidInput("bad number '" + text + "'");
  return v;
}

void write_split_csv(const Split& split, const fs::path& path) {
  auto out = open_out(path);
  const Eigen::Index dims = split.empty() ? 0 : split.front().x.size();
  for (Eigen::Index j = 0; j < dims; ++j) out << 'x' << j << ',';
  out << "y,z_true\n";
  for (const auto& ex : split) {
    for (Eigen::Index j = 0; j < dims; ++j) out << format_double(ex.x[j]) << ',';
    out << ex.y << ',' << ex.z_true << '\n';
  }
}

Split read_split_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path.string() + ": missing header");
  const auto header = split_line(line);
  if (header.size() < 2 || header[header.size() - 2] != "y" || header.back() != "z_true")
    throw InvalidInput(path.string() + ": header must end with y,z_true");
  const auto dims = static_cast<Eigen::Index>(header.size() - 2);
  Split split;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) throw InvalidInput(path.string() + ": ragged row");
    LabeledExample ex;
    ex.x.resize(dims);
    for (Eigen::Index j = 0; j < dims; ++j) ex.x[j] = parse_double(cells[static_cast<std::size_t>(j)]);
    ex.y = parse_int(cells[static_cast<std::size_t>(dims)]);
    ex.z_true = parse_int(cells.back());
    if (ex.y != 1 && ex.y != -1) throw InvalidInput(path.string() + ": label must be -1 or +1");
    if (ex.z_true < 0) throw InvalidInput(path.string() + ": negative cluster id");
    split.push_back(std::move(ex));
  }
  return split;
}

void write_tree_csv(const TreeSplit& split, int max_length, const fs::path& path) {
  auto out = open_out(path);
  const Eigen::Index dims = split.empty() ? 0 : split.front().tokens.rows();
  out << "L,y";
  for (int m = 1; m <= max_length; ++m) out << ",h" << m;
  for (int i = 1; i <= max_length; ++i)
    for (Eigen::Index j = 0; j < dims; ++j) out << ",t" << i << '_' << j;
  out << '\n';
  for (const auto& ex : split) {
    const int length = static_cast<int>(ex.tokens.cols());
    if (length > max_length) throw InvalidInput("write_tree_csv: sentence longer than max_length");
    out << length << ',' << ex.y;
    for (int m = 1; m <= max_length; ++m) {
      out << ',';
      if (m <= length) out << ex.heads[static_cast<std::size_t>(m)];
    }
    for (int i = 1; i <= max_length; ++i)
      for (Eigen::Index j = 0; j < dims; ++j) {
        out << ',';
        if (i <= length) out << format_double(ex.tokens(j, i - 1));
      }
    out << '\n';
  }
}

TreeSplit read_tree_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path.string() + ": missing header");
  const auto header = split_line(line);
  int max_length = 0;
  while (static_cast<std::size_t>(2 + max_length) < header.size() &&
         header[static_cast<std::size_t>(2 + max_length)] == "h" + std::to_string(max_length + 1))
    ++max_length;
  if (header.size() < 2 || header[0] != "L" || header[1] != "y" || max_length == 0)
    throw InvalidInput(path.string() + ": not a tree CSV");
  const auto feature_cells = header.size() - 2 - static_cast<std::size_t>(max_length);
  if (feature_cells % static_cast<std::size_t>(max_length) != 0) throw InvalidInput(path.string() + ": bad token columns");
  const auto dims = static_cast<Eigen::Index>(feature_cells / static_cast<std::size_t>(max_length));

  TreeSplit split;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) throw InvalidInput(path.string() + ": ragged row");
    TreeExample ex;
    const int length = parse_int(cells[0]);
    if (length < 1 || length > max_length) throw InvalidInput(path.string() + ": bad sentence length");
    ex.y = parse_int(cells[1]);
    ex.heads.assign(static_cast<std::size_t>(length + 1), -1);
    for (int m = 1; m <= length; ++m) ex.heads[static_cast<std::size_t>(m)] = parse_int(cells[static_cast<std::size_t>(1 + m)]);
    if (!treedp::is_valid_heads(ex.heads)) throw InvalidInput(path.string() + ": invalid gold tree");
    ex.tokens.resize(dims, length);
    const std::size_t base = 2 + static_cast<std::size_t>(max_length);
    for (int i = 1; i <= length; ++i)
      for (Eigen::Index j = 0; j < dims; ++j)
        ex.tokens(j, i - 1) = parse_double(cells[base + static_cast<std::size_t>((i - 1) * dims + j)]);
    split.push_back(std::move(ex));
  }
  return split;
}

json spec_to_json(const MixtureSpec& s) {
  return {{"clusters", s.clusters},   {"dims", s.dims},       {"n_train", s.n_train},
          {"n_valid", s.n_valid},     {"n_test", s.n_test},   {"noise", s.noise},
          {"center_radius", s.center_radius}, {"label_noise", s.label_noise}, {"seed", s.seed}};
}

MixtureSpec mixture_spec_from_json(const json& j) {
  MixtureSpec s;
  s.clusters = j.value("clusters", s.clusters);
  s.dims = j.value("dims", s.dims);
  s.n_train = j.value("n_train", s.n_train);
  s.n_valid = j.value("n_valid", s.n_valid);
  s.n_test = j.value("n_test", s.n_test);
  s.noise = j.value("noise", s.noise);
  s.center_radius = j.value("center_radius", s.center_radius);
  s.label_noise = j.value("label_noise", s.label_noise);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

json spec_to_json(const StructuredSpec& s) {
  return {{"min_length", s.min_length}, {"max_length", s.max_length}, {"token_dims", s.token_dims},
          {"hidden", s.hidden},         {"n_train", s.n_train},       {"n_valid", s.n_valid},
          {"n_test", s.n_test},         {"seed", s.seed}};
}

StructuredSpec structured_spec_from_json(const json& j) {
  StructuredSpec s;
  s.min_length = j.value("min_length", s.min_length);
  s.max_length = j.value("max_length", s.max_length);
  s.token_dims = j.value("token_dims", s.token_dims);
  s.hidden = j.value("hidden", s.hidden);
  s.n_train = j.value("n_train", s.n_train);
  s.n_valid = j.value("n_valid", s.n_valid);
  s.n_test = j.value("n_test", s.n_test);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

void save_dataset(const MixtureDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  write_split_csv(ds.train, dir / "train.csv");
  write_split_csv(ds.valid, dir / "valid.csv");
  write_split_csv(ds.test, dir / "test.csv");
  json side = {{"kind", "mixture"},
               {"spec", spec_to_json(ds.spec)},
               {"centers", matrix_to_json(ds.centers.transpose())},
               {"weights", matrix_to_json(ds.weights.transpose())},
               {"biases", matrix_to_json(ds.biases.transpose())}};
  open_out(dir / "dataset.json") << side.dump(2) << '\n';
}

MixtureDataset load_dataset(const fs::path& dir) {
  const json side = json::parse(open_in(dir / "dataset.json"));
  if (side.value("kind", "") != "mixture") throw InvalidInput(dir.string() + " is not a mixture dataset");
  MixtureDataset ds;
  ds.spec = mixture_spec_from_json(side.at("spec"));
  ds.centers = matrix_from_json(side.at("centers")).transpose();
  ds.weights = matrix_from_json(side.at("weights")).transpose();
  ds.biases = matrix_from_json(side.at("biases")).transpose();
  ds.train = read_split_csv(dir / "train.csv");
  ds.valid = read_split_csv(dir / "valid.csv");
  ds.test = read_split_csv(dir / "test.csv");
  for (const auto* split : {&ds.train, &ds.valid, &ds.test})
    for (const auto& ex : *split)
      if (ex.z_true >= ds.spec.clusters || ex.x.size() != ds.spec.dims)
        throw InvalidInput(dir.string() + ": example inconsistent with dataset.json");
  return ds;
}

void save_dataset(const StructuredDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  write_tree_csv(ds.train, ds.spec.max_length, dir / "train.csv");
  write_tree_csv(ds.valid, ds.spec.max_length, dir / "valid.csv");
  write_tree_csv(ds.test, ds.spec.max_length, dir / "test.csv");
  save_checkpoint(ds.hidden, dir / "hidden_model.txt");
  json side = {{"kind", "trees"}, {"spec", spec_to_json(ds.spec)}, {"hidden_model", "hidden_model.txt"}};
  open_out(dir / "dataset.json") << side.dump(2) << '\n';
}

StructuredDataset load_structured_dataset(const fs::path& dir) {
  const json side = json::parse(open_in(dir / "dataset.json"));
  if (side.value("kind", "") != "trees") throw InvalidInput(dir.string() + " is not a tree dataset");
  StructuredDataset ds;
  ds.spec = structured_spec_from_json(side.at("spec"));
  ds.hidden = load_structured_checkpoint(dir / side.value("hidden_model", "hidden_model.txt"));
  ds.train = read_tree_csv(dir / "train.csv");
  ds.valid = read_tree_csv(dir / "valid.csv");
  ds.test = read_tree_csv(dir / "test.csv");
  return ds;
}

std::string dataset_kind(const fs::path& dir) {
  const json side = json::parse(open_in(dir / "dataset.json"));
  return side.value("kind", "");
}

void save_checkpoint(const models::UnstructuredModel& model, const fs::path& path) {
  auto out = open_out(path);
  out << "pullback-checkpoint 1 unstructured\n";
  write_tensor(out, "enc_weight", model.enc_weight);
  write_tensor(out, "enc_bias", model.enc_bias);
  write_tensor(out, "dec_weight", model.dec_weight);
  write_tensor(out, "dec_bias", as_matrix(model.dec_bias));
}

models::UnstructuredModel load_unstructured_checkpoint(const fs::path& path) {
  auto in = open_in(path);
  read_header(in, "unstructured");
  models::UnstructuredModel m;
  m.enc_weight = read_tensor(in, "enc_weight");
  m.enc_bias = read_tensor(in, "enc_bias");
  m.dec_weight = read_tensor(in, "dec_weight");
  m.dec_bias = read_tensor(in, "dec_bias")(0, 0);
  if (m.enc_bias.size() != m.clusters() || m.dec_weight.rows() != m.clusters() || m.dec_weight.cols() != m.dims())
    throw InvalidInput("checkpoint: inconsistent shapes");
  return m;
}

void save_checkpoint(const models::StructuredToyModel& model, const fs::path& path) {
  auto out = open_out(path);
  out << "pullback-checkpoint 1 structured\n";
  write_tensor(out, "scorer_weight", model.scorer_weight);
  write_tensor(out, "scorer_bias", model.scorer_bias);
  write_tensor(out, "scorer_out", model.scorer_out);
  write_tensor(out, "dec_weight", model.dec_weight);
  write_tensor(out, "dec_bias", as_matrix(model.dec_bias));
  write_tensor(out, "root", model.root);
}

models::StructuredToyModel load_structured_checkpoint(const fs::path& path) {
  auto in = open_in(path);
  read_header(in, "structured");
  models::StructuredToyModel m;
  m.scorer_weight = read_tensor(in, "scorer_weight");
  m.scorer_bias = read_tensor(in, "scorer_bias");
  m.scorer_out = read_tensor(in, "scorer_out");
  m.dec_weight = read_tensor(in, "dec_weight");
  m.dec_bias = read_tensor(in, "dec_bias")(0, 0);
  m.root = read_tensor(in, "root");
  if (m.scorer_weight.cols() != 2 * m.token_dims() || m.scorer_weight.rows() != m.hidden() ||
      m.scorer_out.size() != m.hidden() || m.root.size() != m.token_dims())
    throw InvalidInput("checkpoint: inconsistent shapes");
  return m;
}

}  // namespace pullback::data
