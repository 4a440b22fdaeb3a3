#include "genatk/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "genatk/errors.hpp"
#include "genatk/io.hpp"

namespace genatk {

namespace {

constexpr const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
constexpr const char* kCleanColor = "#444444";
constexpr const char* kFlipColor = "#800080";

std::string attack_name(AttackKind k) { return to_string(k); }

std::string fx(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

// One rectangular plotting panel mapping data coordinates to pixels.
struct Panel {
  double left, top, width, height;
  double x0, x1, y0, y1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

class Svg {
 public:
  Svg(double w, double h, const std::string& title) : w_(w), h_(h) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fx(w) << "\" height=\"" << fx(h)
         << "\" viewBox=\"0 0 " << fx(w) << ' ' << fx(h) << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    text(w / 2, 20, title, "middle", 14);
  }

  void text(double x, double y, const std::string& s, const char* anchor = "start", int size = 12,
            const std::string& extra = {}) {
    out_ << "<text x=\"" << fx(x) << "\" y=\"" << fx(y) << "\" text-anchor=\"" << anchor << "\" font-size=\""
         << size << "\"" << extra << '>' << escape(s) << "</text>\n";
  }

  void line(double x1, double y1, double x2, double y2, const char* stroke, const std::string& extra = {}) {
    out_ << "<line x1=\"" << fx(x1) << "\" y1=\"" << fx(y1) << "\" x2=\"" << fx(x2) << "\" y2=\"" << fx(y2)
         << "\" stroke=\"" << stroke << "\"" << extra << "/>\n";
  }

  void rect(double x, double y, double w, double h, const char* fill, const std::string& extra = {}) {
    out_ << "<rect x=\"" << fx(x) << "\" y=\"" << fx(y) << "\" width=\"" << fx(std::max(w, 0.0))
         << "\" height=\"" << fx(std::max(h, 0.0)) << "\" fill=\"" << fill << "\"" << extra << "/>\n";
  }

  void circle(double x, double y, double r, const char* fill, const std::string& extra = {}) {
    out_ << "<circle cx=\"" << fx(x) << "\" cy=\"" << fx(y) << "\" r=\"" << fx(r) << "\" fill=\"" << fill << "\""
         << extra << "/>\n";
  }

  void polyline(const Panel& p, const std::vector<CurvePoint>& pts, const char* stroke, const std::string& extra) {
    out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\"" << extra << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      out_ << (i ? " " : "") << fx(p.px(pts[i].first)) << ',' << fx(p.py(pts[i].second));
    out_ << "\"/>\n";
  }

  void polygon(const Panel& p, const std::vector<CurvePoint>& pts, const char* fill, const std::string& extra) {
    out_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"0.2\" stroke=\"none\"" << extra << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      out_ << (i ? " " : "") << fx(p.px(pts[i].first)) << ',' << fx(p.py(pts[i].second));
    out_ << "\"/>\n";
  }

  void axes(const Panel& p, const std::string& xlabel, const std::string& ylabel, int ticks = 5) {
    rect(p.left, p.top, p.width, p.height, "none", " stroke=\"black\"");
    for (int i = 0; i <= ticks; ++i) {
      const double xv = p.x0 + (p.x1 - p.x0) * i / ticks;
      const double yv = p.y0 + (p.y1 - p.y0) * i / ticks;
      line(p.px(xv), p.top + p.height, p.px(xv), p.top + p.height + 4, "black");
      text(p.px(xv), p.top + p.height + 16, tick(xv), "middle", 10);
      line(p.left - 4, p.py(yv), p.left, p.py(yv), "black");
      text(p.left - 6, p.py(yv) + 3, tick(yv), "end", 10);
    }
    text(p.left + p.width / 2, p.top + p.height + 32, xlabel, "middle");
    text(p.left - 40, p.top + p.height / 2, ylabel, "middle", 12,
         " transform=\"rotate(-90 " + fx(p.left - 40) + ' ' + fx(p.top + p.height / 2) + ")\"");
  }

  void legend(double x, double y, const std::vector<std::pair<std::string, const char*>>& items) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      rect(x, y + 16.0 * static_cast<double>(i) - 9, 12, 10, items[i].second);
      text(x + 16, y + 16.0 * static_cast<double>(i), items[i].first);
    }
  }

  void raw(const std::string& s) { out_ << s; }

  std::string str() const { return out_.str() + "</svg>\n"; }

 private:
  static std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
  }

  double w_, h_;
  std::ostringstream out_;
};

Panel standard_panel(double x0, double x1, double y0, double y1) { return {70, 40, 480, 360, x0, x1, y0, y1}; }

ScoredSet clean_set(const EvalReport& r) {
  ScoredSet s;
  for (const auto& row : r.rows) {
    s.scores.push_back(row.clean_lambda);
    s.labels.push_back(row.label);
  }
  return s;
}

ScoredSet attacked_set(const EvalReport& r) {
  ScoredSet s;
  for (const auto& row : r.rows) {
    s.scores.push_back(row.attacked_lambda);
    s.labels.push_back(row.label);
  }
  return s;
}

std::vector<std::string> series_names(const std::vector<EvalReport>& reports) {
  std::vector<std::string> names;
  std::map<std::string, int> seen;
  for (const auto& r : reports) {
    std::string n = attack_name(r.attack);
    if (int k = ++seen[n]; k > 1) n += "-" + std::to_string(k);
    names.push_back(n);
  }
  return names;
}

std::string curve_plot(const std::vector<EvalReport>& reports, CurveKind kind) {
  const bool roc = kind == CurveKind::kRoc;
  const std::string prefix = roc ? "roc" : "pr";
  Svg svg(640, 470, roc ? "ROC (clean vs attacked)" : "Precision-recall (clean vs attacked)");
  const Panel p = standard_panel(0, 1, 0, 1);
  svg.axes(p, roc ? "false positive rate" : "recall", roc ? "true positive rate" : "precision");
  if (roc) svg.line(p.px(0), p.py(0), p.px(1), p.py(1), "#bbbbbb", " stroke-dasharray=\"4 4\"");

  const auto names = series_names(reports);
  std::vector<std::pair<std::string, const char*>> legend;
  const ScoredSet clean = clean_set(reports.front());
  const double clean_metric = roc ? roc_auc(clean) : aupr(clean);
  svg.polyline(p, curve_points(clean, kind), kCleanColor,
               " id=\"" + prefix + "-clean\" data-area=\"" + format_double(clean_metric) + "\"");
  legend.emplace_back("clean (" + fx(clean_metric) + ")", kCleanColor);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const ScoredSet s = attacked_set(reports[i]);
    const double m = roc ? roc_auc(s) : aupr(s);
    const char* color = kPalette[i % std::size(kPalette)];
    svg.polyline(p, curve_points(s, kind), color,
                 " id=\"" + prefix + "-" + names[i] + "\" data-area=\"" + format_double(m) + "\"");
    legend.emplace_back(names[i] + " (" + fx(m) + ")", color);
  }
  svg.legend(560, 60, legend);
  return svg.str();
}

std::string lambda_hist(const EvalReport& r) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& row : r.rows) {
    lo = std::min({lo, row.clean_lambda, row.attacked_lambda});
    hi = std::max({hi, row.clean_lambda, row.attacked_lambda});
  }
  if (hi - lo < 1e-9) hi = lo + 1.0;
  constexpr int kBins = 20;
  const double width = (hi - lo) / kBins;
  auto bin = [&](double v) { return std::min(kBins - 1, static_cast<int>((v - lo) / width)); };

  Svg svg(640, 620, "PLLR by label, clean vs " + attack_name(r.attack));
  for (int label = 0; label <= 1; ++label) {
    std::vector<double> clean(kBins, 0.0), attacked(kBins, 0.0);
    for (const auto& row : r.rows) {
      if (row.label != label) continue;
      clean[bin(row.clean_lambda)] += 1;
      attacked[bin(row.attacked_lambda)] += 1;
    }
    const double top = std::max(1.0, std::max(*std::max_element(clean.begin(), clean.end()),
                                              *std::max_element(attacked.begin(), attacked.end())));
    const Panel p{70, 40.0 + label * 290.0, 480, 230, lo, hi, 0, top};
    svg.axes(p, "lambda", label == 0 ? "benign count" : "pathogenic count", 4);
    for (int b = 0; b < kBins; ++b) {
      const double x = lo + b * width;
      svg.rect(p.px(x), p.py(clean[b]), p.px(x + width) - p.px(x), p.py(0) - p.py(clean[b]), kCleanColor,
               " fill-opacity=\"0.5\" class=\"clean\" data-count=\"" + std::to_string(int(clean[b])) + "\"");
      svg.rect(p.px(x), p.py(attacked[b]), p.px(x + width) - p.px(x), p.py(0) - p.py(attacked[b]), kPalette[0],
               " fill-opacity=\"0.5\" class=\"attacked\" data-count=\"" + std::to_string(int(attacked[b])) + "\"");
    }
    svg.line(p.px(std::clamp(r.aggregates.threshold, lo, hi)), p.top, p.px(std::clamp(r.aggregates.threshold, lo, hi)),
             p.top + p.height, kFlipColor, " stroke-dasharray=\"4 4\"");
  }
  svg.legend(560, 60, {{"clean", kCleanColor}, {attack_name(r.attack), kPalette[0]}});
  return svg.str();
}

std::string delta_plot(const EvalReport& r) {
  std::map<int, std::vector<double>> by_label;
  for (const auto& row : r.rows) by_label[row.label].push_back(row.delta_lambda);
  double lo = 0.0, hi = 0.0;
  for (const auto& [l, v] : by_label) {
    lo = std::min(lo, *std::min_element(v.begin(), v.end()));
    hi = std::max(hi, *std::max_element(v.begin(), v.end()));
  }
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  Svg svg(640, 470, "Delta PLLR (" + attack_name(r.attack) + " - clean) by label");
  const Panel p = standard_panel(0, 2, lo, hi);
  svg.axes(p, "label (0 benign, 1 pathogenic)", "delta lambda", 4);
  svg.line(p.left, p.py(0), p.left + p.width, p.py(0), "#bbbbbb");
  for (const auto& [label, v] : by_label) {
    const GroupSummary g = summarize(v);
    const double cx = p.px(label + 0.5);
    const char* color = kPalette[label == 0 ? 1 : 0];
    svg.line(cx, p.py(g.min), cx, p.py(g.max), "black");
    svg.rect(cx - 40, p.py(g.quartiles.q3), 80, p.py(g.quartiles.q1) - p.py(g.quartiles.q3), color,
             " fill-opacity=\"0.5\" stroke=\"black\" data-label=\"" + std::to_string(label) + "\" data-mean=\"" +
                 format_double(g.mean) + "\" data-std=\"" + format_double(g.std) + "\" data-median=\"" +
                 format_double(g.quartiles.median) + "\"");
    svg.line(cx - 40, p.py(g.quartiles.median), cx + 40, p.py(g.quartiles.median), "black",
             " stroke-width=\"2\"");
    svg.circle(cx, p.py(g.mean), 4, "white", " stroke=\"black\"");
    for (std::size_t i = 0; i < v.size(); ++i) {
      // deterministic jitter from the index
      const double jitter = (static_cast<double>((i * 2654435761u) % 1000) / 1000.0 - 0.5) * 60.0;
      svg.circle(cx + jitter, p.py(v[i]), 1.5, color, " fill-opacity=\"0.6\"");
    }
  }
  return svg.str();
}

std::string flip_scatter(const EvalReport& r) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& row : r.rows) {
    lo = std::min({lo, row.clean_lambda, row.attacked_lambda});
    hi = std::max({hi, row.clean_lambda, row.attacked_lambda});
  }
  lo = std::min(lo, r.aggregates.threshold);
  hi = std::max(hi, r.aggregates.threshold);
  if (hi - lo < 1e-9) hi = lo + 1.0;
  Svg svg(640, 470, "Threshold crossings under " + attack_name(r.attack));
  const Panel p = standard_panel(lo, hi, lo, hi);
  svg.axes(p, "clean lambda", "attacked lambda", 4);
  const double t = r.aggregates.threshold;
  svg.line(p.px(t), p.top, p.px(t), p.top + p.height, kFlipColor, " stroke-dasharray=\"4 4\" class=\"threshold\"");
  svg.line(p.left, p.py(t), p.left + p.width, p.py(t), kFlipColor, " stroke-dasharray=\"4 4\" class=\"threshold\"");
  svg.line(p.px(lo), p.py(lo), p.px(hi), p.py(hi), "#bbbbbb");
  for (const auto& row : r.rows) {
    const char* color = row.flipped ? kFlipColor : (row.label == 0 ? kPalette[1] : kPalette[0]);
    svg.circle(p.px(row.clean_lambda), p.py(row.attacked_lambda), row.flipped ? 3.5 : 2.5, color,
               std::string(" class=\"") + (row.flipped ? "flipped" : "kept") + "\" data-id=\"" +
                   std::to_string(row.id) + "\"");
  }
  svg.legend(560, 60, {{"benign", kPalette[1]}, {"pathogenic", kPalette[0]}, {"flipped", kFlipColor}});
  svg.text(560, 120, "flip rate " + fx(r.aggregates.flip_rate));
  return svg.str();
}

std::string benign_waterfall(const EvalReport& r) {
  std::vector<double> d;
  for (const auto& row : r.rows)
    if (row.label == 0) d.push_back(row.delta_lambda);
  std::sort(d.begin(), d.end(), std::greater<>());
  double lo = 0.0, hi = 0.0;
  for (double v : d) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  Svg svg(640, 470, "Benign delta PLLR, sorted (" + attack_name(r.attack) + ")");
  const Panel p = standard_panel(0, static_cast<double>(std::max<std::size_t>(d.size(), 1)), lo, hi);
  svg.axes(p, "benign samples (sorted)", "delta lambda", 4);
  svg.raw("<g id=\"waterfall\" data-count=\"" + std::to_string(d.size()) + "\">\n");
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = static_cast<double>(i);
    const double y_top = p.py(std::max(d[i], 0.0));
    const double y_bot = p.py(std::min(d[i], 0.0));
    svg.rect(p.px(x), y_top, p.px(x + 1) - p.px(x), y_bot - y_top, d[i] >= 0 ? kPalette[0] : kPalette[1],
             " class=\"bar\" data-delta=\"" + format_double(d[i]) + "\"");
  }
  svg.raw("</g>\n");
  return svg.str();
}

std::string comparison_plot(const std::vector<EvalReport>& reports) {
  const auto names = series_names(reports);
  Svg svg(640, 470, "Performance under different attacks");
  const Panel p = standard_panel(0, 2, 0, 1);
  svg.axes(p, "", "score", 5);
  const std::size_t bars = reports.size() + 1;
  const double group = p.width / 2.0;
  const double bw = group * 0.8 / static_cast<double>(bars);
  std::vector<std::pair<std::string, const char*>> legend{{"clean", kCleanColor}};
  for (int m = 0; m < 2; ++m) {
    const double gx = p.left + group * m + group * 0.1;
    svg.text(p.left + group * m + group / 2, p.top + p.height + 16, m == 0 ? "AUC" : "AUPR", "middle");
    const double clean = m == 0 ? reports.front().aggregates.clean_auc : reports.front().aggregates.clean_aupr;
    svg.rect(gx, p.py(clean), bw, p.py(0) - p.py(clean), kCleanColor,
             " data-attack=\"clean\" data-metric=\"" + std::string(m == 0 ? "auc" : "aupr") + "\" data-value=\"" +
                 format_double(clean) + "\"");
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const double v = m == 0 ? reports[i].aggregates.attacked_auc : reports[i].aggregates.attacked_aupr;
      const char* color = kPalette[i % std::size(kPalette)];
      svg.rect(gx + bw * static_cast<double>(i + 1), p.py(v), bw, p.py(0) - p.py(v), color,
               " data-attack=\"" + names[i] + "\" data-metric=\"" + std::string(m == 0 ? "auc" : "aupr") +
                   "\" data-value=\"" + format_double(v) + "\"");
    }
  }
  for (std::size_t i = 0; i < reports.size(); ++i) legend.emplace_back(names[i], kPalette[i % std::size(kPalette)]);
  svg.legend(560, 60, legend);
  return svg.str();
}

}  // namespace

std::vector<PlotFile> report_plots(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw UsageError("no reports to plot");
  std::vector<PlotFile> files{{"roc.svg", curve_plot(reports, CurveKind::kRoc)},
                              {"pr.svg", curve_plot(reports, CurveKind::kPr)}};
  const auto names = series_names(reports);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const std::string suffix = reports.size() == 1 ? "" : "_" + names[i];
    files.push_back({"lambda_hist" + suffix + ".svg", lambda_hist(reports[i])});
    files.push_back({"delta_lambda" + suffix + ".svg", delta_plot(reports[i])});
    files.push_back({"flip_scatter" + suffix + ".svg", flip_scatter(reports[i])});
    files.push_back({"benign_waterfall" + suffix + ".svg", benign_waterfall(reports[i])});
  }
  if (reports.size() >= 2) files.push_back({"attack_comparison.svg", comparison_plot(reports)});
  return files;
}

std::string attack_comparison_csv(const std::vector<EvalReport>& reports) {
  const auto names = series_names(reports);
  std::ostringstream out;
  out << "attack,clean_auc,attacked_auc,auc_drop,clean_aupr,attacked_aupr,aupr_drop\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& a = reports[i].aggregates;
    out << names[i] << ',' << format_double(a.clean_auc) << ',' << format_double(a.attacked_auc) << ','
        << format_double(a.clean_auc - a.attacked_auc) << ',' << format_double(a.clean_aupr) << ','
        << format_double(a.attacked_aupr) << ',' << format_double(a.clean_aupr - a.attacked_aupr) << '\n';
  }
  return out.str();
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "fraction,n_train,n_seeds,clean_auc_mean,clean_auc_std,clean_aupr_mean,clean_aupr_std,"
         "fgsm_auc_mean,fgsm_auc_std,fgsm_aupr_mean,fgsm_aupr_std\n";
  for (const auto& r : result.rows) {
    out << format_double(r.fraction) << ',' << r.n_train << ',' << r.n_seeds << ','
        << format_double(r.clean_auc_mean) << ',' << format_double(r.clean_auc_std) << ','
        << format_double(r.clean_aupr_mean) << ',' << format_double(r.clean_aupr_std) << ','
        << format_double(r.fgsm_auc_mean) << ',' << format_double(r.fgsm_auc_std) << ','
        << format_double(r.fgsm_aupr_mean) << ',' << format_double(r.fgsm_aupr_std) << '\n';
  }
  return out.str();
}

std::string sweep_cells_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "fraction,seed,n_train,clean_auc,clean_aupr,fgsm_auc,fgsm_aupr\n";
  for (const auto& c : result.cells) {
    out << format_double(c.fraction) << ',' << c.seed << ',' << c.n_train << ',' << format_double(c.clean_auc)
        << ',' << format_double(c.clean_aupr) << ',' << format_double(c.fgsm_auc) << ','
        << format_double(c.fgsm_aupr) << '\n';
  }
  return out.str();
}

std::string sweep_svg(const SweepResult& result) {
  Svg svg(640, 800, "Performance vs training-set fraction");
  struct Series {
    const char* name;
    double SweepRow::*mean;
    double SweepRow::*std;
    const char* color;
  };
  const Series auc[] = {{"clean_auc", &SweepRow::clean_auc_mean, &SweepRow::clean_auc_std, kCleanColor},
                        {"fgsm_auc", &SweepRow::fgsm_auc_mean, &SweepRow::fgsm_auc_std, kPalette[0]}};
  const Series pr[] = {{"clean_aupr", &SweepRow::clean_aupr_mean, &SweepRow::clean_aupr_std, kCleanColor},
                       {"fgsm_aupr", &SweepRow::fgsm_aupr_mean, &SweepRow::fgsm_aupr_std, kPalette[0]}};
  for (int panel = 0; panel < 2; ++panel) {
    const Panel p{70, 50.0 + panel * 380.0, 480, 300, 0, 1, 0, 1};
    svg.axes(p, "training fraction", panel == 0 ? "AUC" : "AUPR", 4);
    for (const Series& s : panel == 0 ? auc : pr) {
      std::vector<CurvePoint> mean, band;
      for (const auto& r : result.rows) mean.emplace_back(r.fraction, r.*s.mean);
      for (const auto& r : result.rows) band.emplace_back(r.fraction, std::min(1.0, r.*s.mean + r.*s.std));
      for (auto it = result.rows.rbegin(); it != result.rows.rend(); ++it)
        band.emplace_back(it->fraction, std::max(0.0, (*it).*s.mean - (*it).*s.std));
      if (!band.empty()) svg.polygon(p, band, s.color, std::string(" class=\"band\" data-series=\"") + s.name + "\"");
      svg.polyline(p, mean, s.color, std::string(" data-series=\"") + s.name + "\"");
      for (const auto& r : result.rows) {
        svg.circle(p.px(r.fraction), p.py(r.*s.mean), 3.5, s.color,
                   std::string(" data-series=\"") + s.name + "\" data-fraction=\"" + format_double(r.fraction) +
                       "\" data-mean=\"" + format_double(r.*s.mean) + "\" data-std=\"" + format_double(r.*s.std) +
                       "\"");
      }
    }
    svg.legend(560, p.top + 20, {{"clean", kCleanColor}, {"fgsm", kPalette[0]}});
  }
  return svg.str();
}

}  // namespace genatk
