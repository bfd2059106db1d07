#include "pmri/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace pmri {

double snr_db(const ComplexImage& rec, const ComplexImage& org) {
  if (rec.height != org.height || rec.width != org.width)
    throw numeric_error("snr_db: shape mismatch");
  double ref = 0.0, err = 0.0;
  for (size_t i = 0; i < org.data.size(); ++i) {
    double o = org.data[i].real();
    double d = o - rec.data[i].real();
    ref += o * o;
    err += d * d;
  }
  if (ref <= 0.0) throw numeric_error("snr_db: zero reference image");
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(std::sqrt(ref) / std::sqrt(err));
}

namespace {

std::vector<double> gaussian_window(int n, double sigma) {
  std::vector<double> w(size_t(n) * n);
  double c = (n - 1) / 2.0;
  double sum = 0.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double v = std::exp(-((y - c) * (y - c) + (x - c) * (x - c)) /
                          (2.0 * sigma * sigma));
      w[size_t(y) * n + x] = v;
      sum += v;
    }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

double ssim(const ComplexImage& rec, const ComplexImage& org) {
  if (rec.height != org.height || rec.width != org.width)
    throw numeric_error("ssim: shape mismatch");
  const int h = org.height, w = org.width;
  double range = 0.0;
  for (const cplx& v : org.data) range = std::max(range, v.real());
  if (range <= 0.0) range = 1.0;
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  int win = std::min(11, std::min(h, w));
  std::vector<double> g = gaussian_window(win, 1.5);

  double total = 0.0;
  long count = 0;
  for (int y0 = 0; y0 + win <= h; ++y0) {
    for (int x0 = 0; x0 + win <= w; ++x0) {
      double mx = 0.0, my = 0.0;
      for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
          double wt = g[size_t(y) * win + x];
          mx += wt * rec.at(y0 + y, x0 + x).real();
          my += wt * org.at(y0 + y, x0 + x).real();
        }
      double vx = 0.0, vy = 0.0, cov = 0.0;
      for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
          double wt = g[size_t(y) * win + x];
          double dx = rec.at(y0 + y, x0 + x).real() - mx;
          double dy = org.at(y0 + y, x0 + x).real() - my;
          vx += wt * dx * dx;
          vy += wt * dy * dy;
          cov += wt * dx * dy;
        }
      double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
      double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      total += num / den;
      ++count;
    }
  }
  return total / double(count);
}

double dice(const LabelMap& pred, const LabelMap& ref, int cls) {
  if (pred.height != ref.height || pred.width != ref.width)
    throw numeric_error("dice: shape mismatch");
  long a = 0, b = 0, both = 0;
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    bool pa = pred.labels[i] == cls;
    bool pb = ref.labels[i] == cls;
    a += pa;
    b += pb;
    both += pa && pb;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * double(both) / double(a + b);
}

namespace {

std::string fmt_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double parse_metric(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::string out = "dataset_id,method,snr_db,ssim,dice_csf,dice_gm,dice_wm\n";
  for (const EvalRow& r : rows) {
    out += r.dataset_id + "," + r.method + "," + fmt_metric(r.snr) + "," +
           fmt_metric(r.ssim_v) + ",";
    if (r.has_dice)
      out += fmt_metric(r.dice_csf) + "," + fmt_metric(r.dice_gm) + "," +
             fmt_metric(r.dice_wm);
    else
      out += ",,";
    out += "\n";
  }
  return out;
}

EvalReport EvalReport::from_csv(const std::string& text) {
  EvalReport rep;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      continue;  // header
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    cells.resize(7);
    EvalRow r;
    r.dataset_id = cells[0];
    r.method = cells[1];
    r.snr = parse_metric(cells[2]);
    r.ssim_v = parse_metric(cells[3]);
    if (!cells[4].empty()) {
      r.has_dice = true;
      r.dice_csf = parse_metric(cells[4]);
      r.dice_gm = parse_metric(cells[5]);
      r.dice_wm = parse_metric(cells[6]);
    }
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

std::vector<EvalReport::MethodMean> EvalReport::method_means() const {
  std::vector<MethodMean> means;
  for (const EvalRow& r : rows) {
    MethodMean* m = nullptr;
    for (MethodMean& c : means)
      if (c.method == r.method) m = &c;
    if (m == nullptr) {
      means.push_back({});
      m = &means.back();
      m->method = r.method;
    }
    m->snr += r.snr;
    m->ssim_v += r.ssim_v;
    if (r.has_dice) {
      m->dice_mean += (r.dice_csf + r.dice_gm + r.dice_wm) / 3.0;
      m->has_dice = true;
    }
    m->count += 1;
  }
  for (MethodMean& m : means) {
    m.snr /= m.count;
    m.ssim_v /= m.count;
    if (m.has_dice) m.dice_mean /= m.count;
  }
  std::stable_sort(means.begin(), means.end(),
                   [](const MethodMean& a, const MethodMean& b) {
                     return a.snr > b.snr;
                   });
  return means;
}

}  // namespace pmri
