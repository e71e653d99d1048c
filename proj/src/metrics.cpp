#include "inrgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace inrgan {

namespace {

void check_pair(const Image& a, const Image& b, const char* what) {
  if (a.channels != b.channels || !a.same_extent(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + std::to_string(a.channels) + "x" +
                                std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                                std::to_string(b.channels) + "x" + std::to_string(b.height) + "x" +
                                std::to_string(b.width));
  }
}

inline double unit(float v) { return (static_cast<double>(v) + 1.0) * 0.5; }

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double center = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    g[static_cast<std::size_t>(i)] = std::exp(-(i - center) * (i - center) / (2.0 * sigma * sigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Valid-mode separable filtering of one plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += g[static_cast<std::size_t>(i)] * plane[static_cast<std::size_t>(r * w + c + i)];
      tmp[static_cast<std::size_t>(r * ow + c)] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += g[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>((r + i) * ow + c)];
      out[static_cast<std::size_t>(r * ow + c)] = s;
    }
  }
  return out;
}

}  // namespace

double mse(const Image& a, const Image& b) {
  check_pair(a, b, "mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = unit(a.data[i]) - unit(b.data[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

double masked_mse(const Image& a, const Image& b, std::span<const std::uint8_t> mask) {
  check_pair(a, b, "masked_mse");
  if (static_cast<std::int64_t>(mask.size()) != a.plane()) throw std::invalid_argument("masked_mse: mask size mismatch");
  double sum = 0.0;
  std::int64_t count = 0;
  for (int ch = 0; ch < a.channels; ++ch) {
    for (std::int64_t p = 0; p < a.plane(); ++p) {
      if (!mask[static_cast<std::size_t>(p)]) continue;
      const std::size_t i = static_cast<std::size_t>(ch * a.plane() + p);
      const double d = unit(a.data[i]) - unit(b.data[i]);
      sum += d * d;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("masked_mse: empty mask");
  return sum / static_cast<double>(count);
}

double psnr_from_mse(double mse_value) {
  if (mse_value < 0.0) throw std::invalid_argument("psnr: negative mse");
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse_value);
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const Image& a, const Image& b, const SsimOptions& opts) {
  check_pair(a, b, "ssim");
  if (a.height < opts.window || a.width < opts.window) {
    throw std::invalid_argument("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                                " smaller than the " + std::to_string(opts.window) + "x" +
                                std::to_string(opts.window) + " window");
  }
  const double c1 = (opts.k1 * opts.range) * (opts.k1 * opts.range);
  const double c2 = (opts.k2 * opts.range) * (opts.k2 * opts.range);
  const auto g = gaussian_window(opts.window, opts.sigma);
  const std::size_t n = static_cast<std::size_t>(a.plane());
  double total = 0.0;
  for (int ch = 0; ch < a.channels; ++ch) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = unit(a.data[ch * n + i]);
      y[i] = unit(b.data[ch * n + i]);
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, a.height, a.width, g);
    const auto my = filter_valid(y, a.height, a.width, g);
    const auto exx = filter_valid(xx, a.height, a.width, g);
    const auto eyy = filter_valid(yy, a.height, a.width, g);
    const auto exy = filter_valid(xy, a.height, a.width, g);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = exx[i] - mx[i] * mx[i];
      const double vy = eyy[i] - my[i] * my[i];
      const double cxy = exy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
      sum += num / den;
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / a.channels;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate agg;
  if (values.empty()) return agg;
  double sum = 0.0;
  for (double v : values) sum += v;
  agg.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
    agg.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return agg;
}

std::vector<double> MetricsReport::column(const std::string& metric) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (metric == "mse") {
      out.push_back(r.mse);
    } else if (metric == "ssim") {
      out.push_back(r.ssim);
    } else if (metric == "psnr") {
      out.push_back(r.psnr);
    } else {
      throw std::invalid_argument("unknown metric '" + metric + "'");
    }
  }
  return out;
}

Aggregate MetricsReport::summary(const std::string& metric) const {
  auto values = column(metric);
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  return aggregate(values);
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "id,mse,ssim,psnr\n";
  for (const auto& r : rows) os << r.id << ',' << r.mse << ',' << r.ssim << ',' << r.psnr << '\n';
  return os.str();
}

nlohmann::json MetricsReport::aggregate_json() const {
  const auto m = summary("mse");
  const auto s = summary("ssim");
  const auto p = summary("psnr");
  std::size_t infinite = 0;
  for (const auto& r : rows) infinite += std::isinf(r.psnr) ? 1 : 0;
  return {{"count", rows.size()},
          {"mse_e3", {{"mean", m.mean * 1e3}, {"std", m.std * 1e3}}},
          {"ssim_x100", {{"mean", s.mean * 100.0}, {"std", s.std * 100.0}}},
          {"psnr_db", {{"mean", p.mean}, {"std", p.std}, {"infinite_rows", infinite}}},
          {"ssim_convention",
           {{"window", ssim_options.window},
            {"sigma", ssim_options.sigma},
            {"k1", ssim_options.k1},
            {"k2", ssim_options.k2},
            {"range", ssim_options.range},
            {"intensity_map", "(v + 1) / 2"}}}};
}

MetricsReport evaluate_predictions(std::span<const Image> predictions, std::span<const Image> targets,
                                   std::span<const std::string> ids, const SsimOptions& opts) {
  if (predictions.size() != targets.size() || predictions.size() != ids.size()) {
    throw std::invalid_argument("evaluate: predictions, targets and ids differ in length");
  }
  if (predictions.empty()) throw std::invalid_argument("evaluate: empty dataset");
  MetricsReport report;
  report.ssim_options = opts;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    MetricsRow row;
    row.id = ids[i];
    try {
      row.mse = mse(predictions[i], targets[i]);
      row.ssim = ssim(predictions[i], targets[i], opts);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("sample '" + ids[i] + "': " + e.what());
    }
    row.psnr = psnr_from_mse(row.mse);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<MetricComparison> compare_reports(const MetricsReport& a, const MetricsReport& b) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < b.rows.size(); ++i) index[b.rows[i].id] = i;
  std::vector<std::size_t> ia, ib;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    auto it = index.find(a.rows[i].id);
    if (it == index.end()) continue;
    ia.push_back(i);
    ib.push_back(it->second);
  }
  std::vector<MetricComparison> out;
  for (const char* metric : {"mse", "ssim", "psnr"}) {
    const auto ca = a.column(metric);
    const auto cb = b.column(metric);
    std::vector<double> x, y;
    for (std::size_t k = 0; k < ia.size(); ++k) {
      const double va = ca[ia[k]], vb = cb[ib[k]];
      if (!std::isfinite(va) || !std::isfinite(vb)) continue;
      x.push_back(va);
      y.push_back(vb);
    }
    MetricComparison cmp;
    cmp.metric = metric;
    try {
      cmp.test = wilcoxon_signed_rank(x, y);
    } catch (const std::invalid_argument& e) {
      cmp.note = e.what();
    }
    out.push_back(std::move(cmp));
  }
  return out;
}

nlohmann::json to_json(const std::vector<MetricComparison>& comparisons) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& c : comparisons) {
    if (c.test) {
      j[c.metric] = {{"statistic", c.test->statistic},
                     {"n", c.test->n},
                     {"p_value", c.test->p_value},
                     {"method", c.test->method_name()}};
    } else {
      j[c.metric] = {{"error", c.note}};
    }
  }
  return j;
}

}  // namespace inrgan
