#include "ngpflow/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ngpflow/mnist.hpp"
#include "ngpflow/synthetic.hpp"

namespace ngp {

namespace {
constexpr const char* kModule = "cli-io";
using json = nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(kModule, where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(kModule, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(kModule, where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_opt(const json& obj, const std::string& key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get<T>(obj, key, where);
}

std::vector<double> scalar_or_list(const json& obj, const std::string& key, const std::string& where) {
  const auto& v = obj.at(key);
  if (v.is_number()) return {v.get<double>()};
  return get<std::vector<double>>(obj, key, where);
}

Matrix matrix_from(const json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty()) throw ConfigError(kModule, what + " must be a non-empty array of rows");
  const std::size_t cols = rows.at(0).is_array() ? rows.at(0).size() : 0;
  if (cols == 0) throw ConfigError(kModule, what + " rows must be non-empty arrays");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].is_array() || rows[r].size() != cols) throw ConfigError(kModule, what + " rows differ in length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!rows[r][c].is_number()) throw ConfigError(kModule, what + " entries must be numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
    }
  }
  return m;
}

Activation activation_from(const json& v) {
  std::string name;
  if (v.is_string()) {
    name = v.get<std::string>();
  } else {
    check_keys(v, "network.activation", {"name", "power", "coefficients"});
    name = get<std::string>(v, "name", "network.activation");
    if (name == "monomial") return Activation::monomial(get<int>(v, "power", "network.activation"));
    if (name == "polynomial") {
      return Activation::polynomial(get<std::vector<double>>(v, "coefficients", "network.activation"));
    }
  }
  if (name == "linear") return Activation::linear();
  if (name == "relu") return Activation::relu();
  if (name == "quadratic") return Activation::quadratic();
  if (name == "tanh" || name == "erf" || name == "gelu" || name == "swish") return Activation::numeric(name);
  throw ConfigError(kModule, "unknown activation '" + name + "'");
}

NetworkSpec parse_network(const json& n) {
  check_keys(n, "network", {"widths", "bias_var", "weight_var", "activation"});
  NetworkSpec out;
  if (n.contains("widths")) out.widths = get<std::vector<std::size_t>>(n, "widths", "network");
  if (n.contains("bias_var")) out.bias_vars = scalar_or_list(n, "bias_var", "network");
  if (n.contains("weight_var")) out.weight_vars = scalar_or_list(n, "weight_var", "network");
  if (n.contains("activation")) out.activation = activation_from(n.at("activation"));
  return out;
}

DatasetSpec parse_dataset(const json& d, const std::filesystem::path& base) {
  check_keys(d, "dataset", {"source", "inputs", "targets", "labels", "images", "label_file", "count", "train_count",
                            "pool", "seed", "image_index", "classes"});
  DatasetSpec out;
  const auto source = d.contains("source") ? get<std::string>(d, "source", "dataset") : std::string("inline");
  if (source == "inline") {
    out.source = DataSource::inline_data;
    if (!d.contains("inputs")) throw ConfigError(kModule, "dataset.inputs is required for inline data");
    if (d.at("inputs").is_array() && d.at("inputs").empty()) throw ConfigError(kModule, "empty dataset");
    out.inputs = matrix_from(d.at("inputs"), "dataset.inputs");
    if (d.contains("targets")) out.targets = matrix_from(d.at("targets"), "dataset.targets");
  } else if (source == "mnist") {
    out.source = DataSource::mnist;
    out.images = base / get<std::string>(d, "images", "dataset");
    out.label_file = base / get<std::string>(d, "label_file", "dataset");
  } else if (source == "synthetic") {
    out.source = DataSource::synthetic;
  } else {
    throw ConfigError(kModule, "dataset.source must be inline, mnist or synthetic");
  }
  read_opt(d, "labels", "dataset", out.labels);
  read_opt(d, "count", "dataset", out.count);
  read_opt(d, "train_count", "dataset", out.train_count);
  read_opt(d, "pool", "dataset", out.pool);
  read_opt(d, "seed", "dataset", out.seed);
  read_opt(d, "image_index", "dataset", out.image_index);
  read_opt(d, "classes", "dataset", out.classes);
  if (out.source != DataSource::inline_data && d.contains("count") && out.count == 0) {
    throw ConfigError(kModule, "empty dataset");
  }
  if (out.pool == 0) throw ConfigError(kModule, "dataset.pool must be positive");
  return out;
}

RunSpec parse_run(const json& r) {
  check_keys(r, "run", {"backend", "quadrature_order", "jitter", "mc_samples", "sampler", "threads", "bins",
                        "histogram_half_width_sd", "grid", "mode", "epsilon_sweep", "width_sweep", "shape",
                        "train_counts", "test_count", "subsample_seeds", "seed"});
  RunSpec out;
  if (r.contains("backend")) out.backend = parse_backend(get<std::string>(r, "backend", "run"));
  if (r.contains("sampler")) out.sampler = parse_sampler(get<std::string>(r, "sampler", "run"));
  read_opt(r, "quadrature_order", "run", out.quadrature_order);
  read_opt(r, "jitter", "run", out.jitter);
  read_opt(r, "mc_samples", "run", out.mc_samples);
  read_opt(r, "threads", "run", out.threads);
  read_opt(r, "bins", "run", out.bins);
  read_opt(r, "histogram_half_width_sd", "run", out.histogram_half_width_sd);
  read_opt(r, "grid", "run", out.grid);
  read_opt(r, "mode", "run", out.mode);
  read_opt(r, "epsilon_sweep", "run", out.epsilon_sweep);
  read_opt(r, "shape", "run", out.shape);
  read_opt(r, "train_counts", "run", out.train_counts);
  read_opt(r, "test_count", "run", out.test_count);
  read_opt(r, "subsample_seeds", "run", out.subsample_seeds);
  read_opt(r, "seed", "run", out.seed);
  if (r.contains("width_sweep")) {
    const auto& ws = r.at("width_sweep");
    if (!ws.is_array()) throw ConfigError(kModule, "run.width_sweep must be an array");
    out.width_sweep.clear();
    for (const auto& w : ws) {
      if (w.is_null()) {
        out.width_sweep.emplace_back(std::nullopt);
      } else if (w.is_number_unsigned() && w.get<std::size_t>() > 0) {
        out.width_sweep.emplace_back(w.get<std::size_t>());
      } else {
        throw ConfigError(kModule, "run.width_sweep entries must be positive integers or null");
      }
    }
  }
  if (out.mode != "exp" && out.mode != "lin" && out.mode != "both" && out.mode != "auto") {
    throw ConfigError(kModule, "run.mode must be exp, lin, both or auto");
  }
  if (out.shape != "deep" && out.shape != "shallow") throw ConfigError(kModule, "run.shape must be deep or shallow");
  if (out.mc_samples < 2) throw ConfigError(kModule, "run.mc_samples must be at least 2");
  if (out.bins < 10) throw ConfigError(kModule, "run.bins must be at least 10");
  if (out.grid < 3) throw ConfigError(kModule, "run.grid must be at least 3");
  for (double e : out.epsilon_sweep) {
    if (!(e >= 0.0)) throw ConfigError(kModule, "run.epsilon_sweep entries must be >= 0");
  }
  return out;
}
}  // namespace

NetworkConfig NetworkSpec::build(const std::vector<std::size_t>& w) const {
  if (w.size() < 2) throw ConfigError(kModule, "network.widths needs at least an input and an output width");
  const std::size_t layers = w.size() - 1;
  auto expand = [&](const std::vector<double>& v, const char* name) {
    if (v.size() == 1) return std::vector<double>(layers, v.front());
    if (v.size() != layers) {
      throw ConfigError(kModule, std::string("network.") + name + " needs 1 or " + std::to_string(layers) +
                                     " entries");
    }
    return v;
  };
  return NetworkConfig(w, expand(bias_vars, "bias_var"), expand(weight_vars, "weight_var"), activation);
}

NetworkConfig NetworkSpec::build() const {
  if (!widths) throw ConfigError(kModule, "network.widths is required for this command");
  return build(*widths);
}

ExperimentConfig parse_experiment(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(kModule, std::string("invalid JSON: ") + e.what());
  }
  check_keys(doc, "config", {"network", "dataset", "run", "output"});
  ExperimentConfig cfg;
  if (!doc.contains("network")) throw ConfigError(kModule, "missing network section");
  if (!doc.contains("dataset")) throw ConfigError(kModule, "missing dataset section");
  cfg.network = parse_network(doc.at("network"));
  cfg.dataset = parse_dataset(doc.at("dataset"), base_dir);
  if (doc.contains("run")) cfg.run = parse_run(doc.at("run"));
  if (doc.contains("output")) {
    const auto& o = doc.at("output");
    check_keys(o, "output", {"directory"});
    if (o.contains("directory")) cfg.output_dir = base_dir / get<std::string>(o, "directory", "output");
  }
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(kModule, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment(buf.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

Activation parse_activation(const std::string& json_text) {
  try {
    return activation_from(json::parse(json_text));
  } catch (const json::parse_error&) {
    return activation_from(json(json_text));
  }
}

ImagePool load_pool(const DatasetSpec& spec) {
  if (spec.source == DataSource::mnist) {
    const auto images = read_idx_images(spec.images);
    auto labels = read_idx_labels(spec.label_file);
    if (labels.size() != images.count) throw ConfigError(kModule, "image and label counts differ");
    std::vector<std::size_t> all(images.count);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return {image_matrix(images, all), std::move(labels)};
  }
  if (spec.source == DataSource::synthetic) {
    auto data = synthetic_digits(spec.pool, spec.seed);
    std::vector<std::size_t> all(data.images.count);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return {image_matrix(data.images, all), std::move(data.labels)};
  }
  throw ConfigError(kModule, "inline datasets have no image pool");
}

Dataset draw_from_pool(const ImagePool& pool, std::size_t count, std::uint64_t seed) {
  const auto idx = subsample_indices(static_cast<std::size_t>(pool.inputs.rows()), count, seed);
  Matrix x(static_cast<Eigen::Index>(idx.size()), pool.inputs.cols());
  std::vector<int> labels;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = pool.inputs.row(static_cast<Eigen::Index>(idx[r]));
    labels.push_back(pool.labels[idx[r]]);
  }
  return Dataset(std::move(x), count, std::nullopt, std::move(labels));
}

Dataset load_dataset(const DatasetSpec& spec) {
  if (spec.source == DataSource::inline_data) {
    if (spec.inputs.rows() == 0) throw ConfigError(kModule, "empty dataset");
    const std::size_t d = static_cast<std::size_t>(spec.inputs.rows());
    const std::size_t train = spec.train_count == 0 ? d : spec.train_count;
    if (!spec.labels.empty() && spec.labels.size() != d) throw ConfigError(kModule, "need one label per input row");
    return Dataset(spec.inputs, train, spec.targets, spec.labels);
  }
  if (spec.count == 0) throw ConfigError(kModule, "dataset.count must be positive for mnist and synthetic sources");
  const Dataset base = spec.source == DataSource::mnist
                           ? load_mnist(spec.images, spec.label_file, spec.count, spec.seed)
                           : draw_from_pool(load_pool(spec), spec.count, spec.seed);
  const std::size_t train = spec.train_count == 0 ? spec.count : spec.train_count;
  if (train > spec.count) throw ConfigError(kModule, "dataset.train_count exceeds dataset.count");
  return Dataset(base.inputs(), train, std::nullopt, base.labels());
}

}  // namespace ngp
