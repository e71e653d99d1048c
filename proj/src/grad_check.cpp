#include "inrgan/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace inrgan {

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

std::int64_t GradCheckReport::kinks_skipped() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.kinks_skipped;
  return n;
}

std::int64_t GradCheckReport::checked() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.checked;
  return n;
}

bool GradCheckReport::passed() const {
  // Kink exclusions are tolerated only while they stay rare.
  return max_rel_error() <= threshold && kinks_skipped() * 20 <= checked();
}

std::string GradCheckReport::to_string() const {
  std::ostringstream os;
  for (const auto& e : entries) {
    os << (e.is_input ? "input  " : "param  ") << std::left << std::setw(28) << e.name << std::right
       << " checked=" << std::setw(4) << e.checked << " kinks=" << std::setw(2) << e.kinks_skipped
       << " max_rel_err=" << std::scientific << std::setprecision(3) << e.max_rel_error
       << " max|grad|=" << e.max_abs_analytic << std::defaultfloat << '\n';
  }
  os << "max relative error " << std::scientific << max_rel_error() << " (threshold " << threshold << ") -> "
     << (passed() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

namespace {

double objective(const Graph& graph, const TensorMap<double>& params, const TensorMap<double>& inputs,
                 const std::string& output) {
  const auto fw = eval_graph(graph, params, inputs);
  const auto& out = fw.output(output);
  double s = 0.0;
  for (double v : out.values()) s += v;
  return s;
}

std::vector<std::int64_t> probe_indices(std::int64_t size, std::int64_t max_elements, std::mt19937_64& rng) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(size));
  std::iota(idx.begin(), idx.end(), 0);
  if (size > max_elements) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(max_elements));
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

}  // namespace

GradCheckReport grad_check(const Graph& graph, const TensorMap<double>& params, const TensorMap<double>& inputs,
                           const std::string& output, const GradCheckOptions& options) {
  const auto out_id = graph.find_output(output);
  if (!out_id) throw std::invalid_argument("grad_check: no graph output named '" + output + "'");
  const auto fw = eval_graph(graph, params, inputs);
  TensorMap<double> seeds;
  seeds.emplace(output, NdArray<double>(graph.shape(*out_id), 1.0));
  const auto grads = backward(graph, fw, seeds);

  GradCheckReport report;
  report.threshold = options.threshold;
  std::mt19937_64 rng(options.seed);
  TensorMap<double> p = params;
  TensorMap<double> x = inputs;
  const double f0 = objective(graph, p, x, output);

  auto check = [&](TensorMap<double>& table, const std::string& name, const NdArray<double>& analytic,
                   bool is_input) {
    GradCheckEntry entry;
    entry.name = name;
    entry.is_input = is_input;
    NdArray<double>& target = table.at(name);
    for (std::int64_t i : probe_indices(target.size(), options.max_elements, rng)) {
      const double orig = target[i];
      target[i] = orig + options.eps;
      const double fp = objective(graph, p, x, output);
      target[i] = orig - options.eps;
      const double fm = objective(graph, p, x, output);
      target[i] = orig;
      const double numeric = (fp - fm) / (2.0 * options.eps);
      const double forward_diff = (fp - f0) / options.eps;
      const double backward_diff = (f0 - fm) / options.eps;
      const double a = analytic[i];
      const double scale = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::abs(a));
      entry.checked += 1;
      if (std::abs(forward_diff - backward_diff) > options.kink_tolerance * scale) {
        entry.kinks_skipped += 1;
        continue;
      }
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(a - numeric) / scale);
    }
    report.entries.push_back(entry);
  };

  for (const auto& [name, g] : grads.params) check(p, name, g, false);
  for (const auto& name : options.inputs) {
    auto it = grads.inputs.find(name);
    if (it == grads.inputs.end()) throw std::invalid_argument("grad_check: no graph input named '" + name + "'");
    check(x, name, it->second, true);
  }
  return report;
}

}  // namespace inrgan
