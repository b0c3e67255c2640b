#include "ngpflow/commands.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <ostream>
#include <random>

#include "ngpflow/rng.hpp"
#include "ngpflow/second_layer.hpp"
#include "ngpflow/serialize.hpp"
#include "ngpflow/synthetic.hpp"

namespace ngp {

namespace {
constexpr const char* kModule = "cli-io";
using json = nlohmann::json;

std::string width_tag(std::optional<std::size_t> n) { return n ? std::to_string(*n) : std::string("inf"); }

Matrix single_input(const DatasetSpec& spec) {
  if (spec.source == DataSource::inline_data) {
    if (spec.inputs.rows() == 0) throw ConfigError(kModule, "empty dataset");
    if (spec.image_index >= static_cast<std::size_t>(spec.inputs.rows())) {
      throw ConfigError(kModule, "dataset.image_index out of range");
    }
    return spec.inputs.row(static_cast<Eigen::Index>(spec.image_index));
  }
  const auto pool = load_pool(spec);
  if (spec.image_index >= static_cast<std::size_t>(pool.inputs.rows())) {
    throw ConfigError(kModule, "dataset.image_index out of range");
  }
  return pool.inputs.row(static_cast<Eigen::Index>(spec.image_index));
}

Matrix gaussian_samples(double variance, std::size_t n, std::uint64_t seed) {
  Matrix out(static_cast<Eigen::Index>(n), 1);
  const double sd = std::sqrt(variance);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = Xoshiro256::stream(seed, i);
    std::normal_distribution<double> normal;
    out(static_cast<Eigen::Index>(i), 0) = sd * normal(rng);
  }
  return out;
}

std::optional<DensityCurve> try_curve(const OutputPotential& pot, DensityMode mode, std::size_t points) {
  try {
    return marginal_density(pot, default_grid(pot, mode, points), mode);
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

std::vector<std::vector<double>> curve_rows(const DensityCurve& c) {
  std::vector<std::vector<double>> rows;
  rows.reserve(c.y.size());
  for (std::size_t i = 0; i < c.y.size(); ++i) rows.push_back({c.y[i], c.p[i]});
  return rows;
}

std::vector<std::vector<double>> histogram_rows(const std::vector<HistogramBin>& hist) {
  std::vector<std::vector<double>> rows;
  rows.reserve(hist.size());
  for (const auto& b : hist) rows.push_back({b.center, b.density, b.std_error});
  return rows;
}

json curve_summary(const DensityCurve& c) {
  const auto m = curve_moments(c);
  return {{"mass", m.mass},
          {"mean", m.mean},
          {"moment2", m.moment2},
          {"variance", m.variance},
          {"cumulant4", m.cumulant4},
          {"truncation", std::isfinite(c.truncation) ? json(c.truncation) : json(nullptr)}};
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_error_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

/// Vertex contractor and last-layer kernel for a network on a dataset.
struct LastLayer {
  Matrix kernel;
  std::unique_ptr<VertexContractor> vertex;
  std::unique_ptr<FlowTrace> trace;
};

LastLayer last_layer(const Dataset& dataset, const NetworkConfig& config, const FlowOptions& options) {
  LastLayer out;
  if (config.depth() == 2 && config.activation().is_polynomial()) {
    auto v = std::make_unique<SecondLayerVertex>(SecondLayerVertex::from(dataset, config));
    out.kernel = v->kernel();
    out.vertex = std::move(v);
  } else {
    out.trace = std::make_unique<FlowTrace>(run_flow(dataset, config, options));
    out.kernel = out.trace->last().kernel();
    out.vertex = std::make_unique<DenseVertex>(out.trace->last());
  }
  return out;
}

Matrix training_targets(const DatasetSpec& spec, const Dataset& dataset) {
  const auto nr = static_cast<Eigen::Index>(dataset.train_count());
  if (spec.targets) {
    if (spec.targets->rows() == nr) return *spec.targets;
    if (spec.targets->rows() == static_cast<Eigen::Index>(dataset.size())) return spec.targets->topRows(nr);
    throw ConfigError(kModule, "dataset.targets needs one row per training sample");
  }
  if (dataset.labels().size() != dataset.size()) throw ConfigError(kModule, "inference needs targets or labels");
  const std::vector<int> train(dataset.labels().begin(), dataset.labels().begin() + nr);
  return one_hot(train, spec.classes);
}
}  // namespace

void apply_overrides(ExperimentConfig& config, const CommandOverrides& overrides) {
  if (overrides.out) config.output_dir = *overrides.out;
  if (overrides.seed) config.run.seed = *overrides.seed;
  if (overrides.backend) config.run.backend = *overrides.backend;
  if (overrides.mode) {
    const auto& m = *overrides.mode;
    if (m != "exp" && m != "lin" && m != "both" && m != "auto") {
      throw ConfigError(kModule, "--mode must be exp, lin, both or auto");
    }
    config.run.mode = m;
  }
}

FlowOptions flow_options(const RunSpec& run, const Activation& activation) {
  FlowOptions opts;
  opts.backend = activation.is_polynomial() ? run.backend : Backend::quadrature;
  opts.quadrature_order = run.quadrature_order;
  opts.raise.jitter = run.jitter;
  return opts;
}

// ---------------------------------------------------------------------------

const DensityCurve& WidthPanel::selected_curve() const {
  const auto& c = selected == DensityMode::exponentiated ? exponentiated : linearized;
  if (!c) throw NumericError(kModule, "selected density mode is unavailable");
  return *c;
}

double bin_average(const DensityCurve& curve, double lo, double hi) {
  const auto& y = curve.y;
  const auto& p = curve.p;
  const double a = std::max(lo, y.front()), b = std::min(hi, y.back());
  if (!(b > a) || !(hi > lo)) return 0.0;
  auto interp = [&](double x) {
    auto it = std::upper_bound(y.begin(), y.end(), x);
    if (it == y.begin()) return p.front();
    if (it == y.end()) return p.back();
    const auto i = static_cast<std::size_t>(it - y.begin());
    const double t = (x - y[i - 1]) / (y[i] - y[i - 1]);
    return p[i - 1] + t * (p[i] - p[i - 1]);
  };
  std::vector<double> xs{a}, fs{interp(a)};
  for (auto it = std::upper_bound(y.begin(), y.end(), a); it != y.end() && *it < b; ++it) {
    xs.push_back(*it);
    fs.push_back(p[static_cast<std::size_t>(it - y.begin())]);
  }
  xs.push_back(b);
  fs.push_back(interp(b));
  return integrate(xs, fs) / (hi - lo);
}

std::pair<double, std::size_t> histogram_agreement(const DensityCurve& curve, const std::vector<HistogramBin>& hist,
                                                   double bin_width, double kernel) {
  const double scale = std::sqrt(kernel);
  std::size_t compared = 0, agree = 0;
  for (const auto& bin : hist) {
    const double t = bin_average(curve, bin.center - 0.5 * bin_width, bin.center + 0.5 * bin_width);
    if (t * scale <= 1e-3) continue;
    ++compared;
    if (std::abs(bin.density - t) <= 3.0 * bin.std_error) ++agree;
  }
  return {compared ? static_cast<double>(agree) / static_cast<double>(compared) : 0.0, compared};
}

std::vector<std::size_t> sweep_widths(std::size_t input_dim, std::size_t n, const std::string& shape) {
  if (shape == "deep") return {input_dim, n, 2 * n, 1};
  if (shape == "shallow") return {input_dim, n, 1};
  throw ConfigError(kModule, "unknown width shape '" + shape + "'");
}

WidthPanel run_width_panel(const Matrix& input, const NetworkSpec& network, std::optional<std::size_t> n,
                           const RunSpec& run) {
  if (input.rows() != 1) throw ConfigError(kModule, "width sweep takes a single input");
  WidthPanel panel;
  panel.n = n;
  panel.widths = sweep_widths(static_cast<std::size_t>(input.cols()), n.value_or(1), run.shape);
  const NetworkConfig config = network.build(panel.widths);
  const Dataset dataset(input, 1);
  const FlowTrace trace = run_flow(dataset, config, flow_options(run, config.activation()));
  const FlowState& last = trace.last();
  panel.kernel = last.kernel()(0, 0);

  OutputPotential pot;
  if (n) {
    panel.self_energy = last.self_energy()(0, 0);
    panel.vertex = last.vertex()(0, 0);
    panel.epsilon = config.epsilon();
    pot = build_potential(trace, RaiseOptions{run.jitter});
  } else {
    pot.kernel = last.kernel();
    pot.inverse_kernel = last.kernel().inverse();
    pot.raised_self_energy = Matrix::Zero(1, 1);
    pot.raised_vertex = Matrix::Zero(1, 1);
    pot.j_tilde = Matrix::Zero(1, 1);
    pot.epsilon = 0.0;
    pot.n_out = 1;
  }
  panel.exponentiated = try_curve(pot, DensityMode::exponentiated, run.grid);
  panel.linearized = try_curve(pot, DensityMode::linearized, run.grid);
  if (!panel.exponentiated && !panel.linearized) {
    throw NumericError(kModule, "no density mode is well defined at n = " + width_tag(n));
  }

  const Matrix samples = n ? sample_outputs(dataset, config, run.mc_samples, run.seed, {run.sampler, run.threads})
                           : gaussian_samples(panel.kernel, run.mc_samples, run.seed);
  panel.mc_samples = run.mc_samples;
  panel.histogram = histogram(samples, 0, run.bins, run.histogram_half_width_sd);
  panel.bin_width = panel.histogram[1].center - panel.histogram[0].center;
  panel.mc_cumulant4 = estimate_cumulant4(samples, 0);

  if (panel.exponentiated) {
    const auto [f, c] = histogram_agreement(*panel.exponentiated, panel.histogram, panel.bin_width, panel.kernel);
    panel.agreement_exp = f;
    panel.compared_bins = c;
  }
  if (panel.linearized) {
    const auto [f, c] = histogram_agreement(*panel.linearized, panel.histogram, panel.bin_width, panel.kernel);
    panel.agreement_lin = f;
    panel.compared_bins = std::max(panel.compared_bins, c);
  }
  if (run.mode == "exp" && panel.exponentiated) {
    panel.selected = DensityMode::exponentiated;
  } else if (run.mode == "lin" && panel.linearized) {
    panel.selected = DensityMode::linearized;
  } else if (!panel.exponentiated) {
    panel.selected = DensityMode::linearized;
  } else if (!panel.linearized) {
    panel.selected = DensityMode::exponentiated;
  } else {
    panel.selected =
        *panel.agreement_lin > *panel.agreement_exp ? DensityMode::linearized : DensityMode::exponentiated;
  }
  return panel;
}

// ---------------------------------------------------------------------------

PosteriorResult infer(const Dataset& dataset, const Matrix& targets, const NetworkConfig& config,
                      const FlowOptions& options, double epsilon) {
  if (static_cast<std::size_t>(targets.cols()) != config.output_dim()) {
    throw ConfigError(kModule, "targets need one column per output channel");
  }
  const LastLayer last = last_layer(dataset, config, options);
  const KernelBlocks blocks(last.kernel, dataset.train_count(), options.raise.jitter);
  const Matrix a = correction_matrix_A(*last.vertex, blocks, targets, config.output_dim());
  return corrected_posterior_mean(blocks, targets, a, epsilon);
}

EpsilonCurve run_epsilon_curve(const ImagePool& pool, const NetworkSpec& network, std::size_t train_count,
                               std::size_t test_count, std::size_t seeds, const std::vector<double>& epsilons,
                               std::uint64_t base_seed, std::size_t classes) {
  if (seeds == 0) throw ConfigError(kModule, "need at least one subsample seed");
  if (epsilons.empty()) throw ConfigError(kModule, "empty epsilon sweep");
  if (test_count == 0) throw ConfigError(kModule, "need at least one test point");
  const auto n0 = static_cast<std::size_t>(pool.inputs.cols());
  std::vector<std::size_t> widths = network.widths.value_or(std::vector<std::size_t>{n0, 100, classes});
  if (widths.size() < 3) throw ConfigError(kModule, "the epsilon sweep needs at least two layers");
  widths.front() = n0;
  widths.back() = classes;
  const NetworkConfig config = network.build(widths);
  RunSpec run;
  const FlowOptions options = flow_options(run, config.activation());

  EpsilonCurve out;
  out.train_count = train_count;
  out.test_count = test_count;
  out.epsilons = epsilons;
  for (std::size_t s = 0; s < seeds; ++s) {
    const Dataset drawn = draw_from_pool(pool, train_count + test_count, base_seed + s);
    const Dataset dataset(drawn.inputs(), train_count, std::nullopt, drawn.labels());
    const std::vector<int> train_labels(dataset.labels().begin(),
                                        dataset.labels().begin() + static_cast<std::ptrdiff_t>(train_count));
    const std::vector<int> test_labels(dataset.labels().begin() + static_cast<std::ptrdiff_t>(train_count),
                                       dataset.labels().end());
    const Matrix targets = one_hot(train_labels, classes);
    const LastLayer last = last_layer(dataset, config, options);
    const KernelBlocks blocks(last.kernel, train_count);
    const Matrix a = correction_matrix_A(*last.vertex, blocks, targets, classes);
    const PosteriorResult base = corrected_posterior_mean(blocks, targets, a, 0.0);
    const double scale = std::max(base.correction.cwiseAbs().maxCoeff(), 1e-300);

    std::vector<double> acc;
    for (double eps : epsilons) {
      const PosteriorResult r = with_epsilon(base, eps);
      acc.push_back(classify(r, test_labels));
      if (eps > 0.0) {
        const Matrix slope = (r.corrected_mean - base.gp_mean) / eps;
        out.linearity_residual =
            std::max(out.linearity_residual, (slope - base.correction).cwiseAbs().maxCoeff() / scale);
      }
    }
    out.accuracy.push_back(std::move(acc));
  }

  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    std::vector<double> col;
    for (const auto& row : out.accuracy) col.push_back(row[k]);
    out.mean.push_back(mean_of(col));
    out.std_error.push_back(std_error_of(col));
  }
  const auto hi = static_cast<std::size_t>(std::max_element(epsilons.begin(), epsilons.end()) - epsilons.begin());
  const auto lo = static_cast<std::size_t>(std::min_element(epsilons.begin(), epsilons.end()) - epsilons.begin());
  std::vector<double> diffs;
  for (const auto& row : out.accuracy) diffs.push_back(row[hi] - row[lo]);
  out.shift_mean = mean_of(diffs);
  out.shift_std_error = std_error_of(diffs);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::filesystem::path> cmd_flow(const ExperimentConfig& cfg) {
  const Dataset dataset = load_dataset(cfg.dataset);
  const NetworkConfig config = cfg.network.build();
  const FlowOptions opts = flow_options(cfg.run, config.activation());
  const FlowTrace trace = run_flow(dataset, config, opts);
  const auto path = cfg.output_dir / "flow.json";
  write_json(path, trace_json(trace, opts.backend));
  return {path};
}

std::vector<std::filesystem::path> cmd_density(const ExperimentConfig& cfg) {
  const Dataset dataset(single_input(cfg.dataset), 1);
  const NetworkConfig config = cfg.network.build();
  const FlowTrace trace = run_flow(dataset, config, flow_options(cfg.run, config.activation()));
  const OutputPotential pot = build_potential(trace, RaiseOptions{cfg.run.jitter});
  std::vector<DensityMode> modes;
  if (cfg.run.mode != "lin") modes.push_back(DensityMode::exponentiated);
  if (cfg.run.mode != "exp") modes.push_back(DensityMode::linearized);

  std::vector<std::filesystem::path> written;
  json summary = {{"kernel", pot.kernel(0, 0)},
                  {"self_energy", trace.last().self_energy()(0, 0)},
                  {"vertex", trace.last().vertex()(0, 0)},
                  {"epsilon", pot.epsilon},
                  {"j_tilde", pot.j_tilde(0, 0)},
                  {"dataset_digest", trace.dataset_digest}};
  for (auto mode : modes) {
    const DensityCurve curve = marginal_density(pot, default_grid(pot, mode, cfg.run.grid), mode);
    const auto path = cfg.output_dir / ("density_" + density_mode_name(mode) + ".csv");
    write_csv(path, {"y", "p"}, curve_rows(curve));
    summary[density_mode_name(mode)] = curve_summary(curve);
    written.push_back(path);
  }
  const auto spath = cfg.output_dir / "density_summary.json";
  write_json(spath, summary);
  written.push_back(spath);
  return written;
}

std::vector<std::filesystem::path> cmd_mc(const ExperimentConfig& cfg) {
  const Dataset dataset = load_dataset(cfg.dataset);
  const NetworkConfig config = cfg.network.build();
  const Matrix samples =
      sample_outputs(dataset, config, cfg.run.mc_samples, cfg.run.seed, {cfg.run.sampler, cfg.run.threads});
  const auto hpath = cfg.output_dir / "histogram.csv";
  write_csv(hpath, {"bin_center", "density", "stderr"},
            histogram_rows(histogram(samples, 0, cfg.run.bins, cfg.run.histogram_half_width_sd)));
  std::vector<std::vector<double>> rows;
  for (std::size_t alpha = 0; alpha < dataset.size(); ++alpha) {
    const auto m2 = estimate_moment2(samples, alpha, alpha);
    const auto c4 = estimate_cumulant4(samples, alpha);
    rows.push_back({static_cast<double>(alpha), m2.value, m2.std_error, c4.value, c4.std_error});
  }
  const auto cpath = cfg.output_dir / "cumulants.csv";
  write_csv(cpath, {"sample", "moment2", "moment2_stderr", "cumulant4", "cumulant4_stderr"}, rows);
  return {hpath, cpath};
}

std::vector<std::filesystem::path> cmd_infer(const ExperimentConfig& cfg) {
  const Dataset dataset = load_dataset(cfg.dataset);
  if (dataset.test_count() == 0) throw ConfigError(kModule, "inference needs test points (train_count < count)");
  const NetworkConfig config = cfg.network.build();
  const Matrix targets = training_targets(cfg.dataset, dataset);
  const PosteriorResult result =
      infer(dataset, targets, config, flow_options(cfg.run, config.activation()), config.epsilon());
  std::optional<double> accuracy;
  if (dataset.labels().size() == dataset.size()) {
    const std::vector<int> test(dataset.labels().begin() + static_cast<std::ptrdiff_t>(dataset.train_count()),
                                dataset.labels().end());
    accuracy = classify(result, test);
  }
  const auto path = cfg.output_dir / "posterior.json";
  write_json(path, posterior_json(result, accuracy));
  return {path};
}

std::vector<std::filesystem::path> cmd_fig1(const ExperimentConfig& cfg) {
  const Matrix input = single_input(cfg.dataset);
  std::vector<std::filesystem::path> written;
  json panels = json::array();
  for (const auto& n : cfg.run.width_sweep) {
    const WidthPanel panel = run_width_panel(input, cfg.network, n, cfg.run);
    const std::string tag = "fig1_n" + width_tag(n);
    json entry = {{"n", n ? json(*n) : json(nullptr)},
                  {"widths", panel.widths},
                  {"kernel", panel.kernel},
                  {"self_energy", panel.self_energy},
                  {"vertex", panel.vertex},
                  {"epsilon", panel.epsilon},
                  {"selected_mode", density_mode_name(panel.selected)},
                  {"compared_bins", panel.compared_bins},
                  {"mc_samples", panel.mc_samples},
                  {"mc_cumulant4", panel.mc_cumulant4.value},
                  {"mc_cumulant4_stderr", panel.mc_cumulant4.std_error},
                  {"theory_cumulant4", 3.0 * panel.epsilon * panel.vertex}};
    for (const auto* c : {&panel.exponentiated, &panel.linearized}) {
      if (!*c) continue;
      const std::string mode = density_mode_name((*c)->mode);
      const auto path = cfg.output_dir / (tag + "_density_" + mode + ".csv");
      write_csv(path, {"y", "p"}, curve_rows(**c));
      written.push_back(path);
      entry[mode] = curve_summary(**c);
      const auto& agreement = (*c)->mode == DensityMode::exponentiated ? panel.agreement_exp : panel.agreement_lin;
      entry[mode]["agreement"] = *agreement;
    }
    const auto hpath = cfg.output_dir / (tag + "_histogram.csv");
    write_csv(hpath, {"bin_center", "density", "stderr"}, histogram_rows(panel.histogram));
    written.push_back(hpath);
    panels.push_back(std::move(entry));
  }
  const auto spath = cfg.output_dir / "fig1_summary.json";
  write_json(spath, {{"image_index", cfg.dataset.image_index},
                     {"dataset_seed", cfg.dataset.seed},
                     {"mc_seed", cfg.run.seed},
                     {"shape", cfg.run.shape},
                     {"panels", std::move(panels)}});
  written.push_back(spath);
  return written;
}

std::vector<std::filesystem::path> cmd_fig2(const ExperimentConfig& cfg) {
  const ImagePool pool = load_pool(cfg.dataset);
  std::vector<std::filesystem::path> written;
  json curves = json::array();
  for (std::size_t nr : cfg.run.train_counts) {
    const EpsilonCurve curve = run_epsilon_curve(pool, cfg.network, nr, cfg.run.test_count, cfg.run.subsample_seeds,
                                                 cfg.run.epsilon_sweep, cfg.run.seed, cfg.dataset.classes);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < curve.epsilons.size(); ++k) {
      rows.push_back({curve.epsilons[k], curve.mean[k], curve.std_error[k]});
    }
    const auto path = cfg.output_dir / ("fig2_nr" + std::to_string(nr) + ".csv");
    write_csv(path, {"epsilon", "accuracy", "stderr"}, rows);
    written.push_back(path);
    curves.push_back({{"train_count", nr},
                      {"test_count", curve.test_count},
                      {"epsilons", curve.epsilons},
                      {"accuracy_per_seed", curve.accuracy},
                      {"linearity_residual", curve.linearity_residual},
                      {"shift_mean", curve.shift_mean},
                      {"shift_stderr", curve.shift_std_error}});
  }
  const auto spath = cfg.output_dir / "fig2_summary.json";
  write_json(spath, {{"base_seed", cfg.run.seed}, {"curves", std::move(curves)}});
  written.push_back(spath);
  return written;
}

std::vector<std::filesystem::path> cmd_synth(const ExperimentConfig& cfg) {
  const auto [images, labels] = write_synthetic_idx(cfg.output_dir, cfg.dataset.pool, cfg.dataset.seed);
  return {images, labels};
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"flow", "density", "mc", "infer", "fig1", "fig2", "synth"};
  return names;
}

int run_command(const std::string& command, const std::filesystem::path& config_path,
                const CommandOverrides& overrides, std::ostream& out, std::ostream& err) {
  using Fn = std::vector<std::filesystem::path> (*)(const ExperimentConfig&);
  static const std::map<std::string, Fn> table{{"flow", cmd_flow}, {"density", cmd_density}, {"mc", cmd_mc},
                                               {"infer", cmd_infer}, {"fig1", cmd_fig1},   {"fig2", cmd_fig2},
                                               {"synth", cmd_synth}};
  try {
    const auto it = table.find(command);
    if (it == table.end()) throw ConfigError(kModule, "unknown command '" + command + "'");
    ExperimentConfig cfg = load_experiment(config_path);
    apply_overrides(cfg, overrides);
    for (const auto& path : it->second(cfg)) out << path.string() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error [io]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace ngp
