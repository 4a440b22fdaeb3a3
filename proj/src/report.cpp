#include "genatk/report.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "genatk/errors.hpp"
#include "genatk/io.hpp"

namespace genatk {

namespace {

constexpr std::string_view kCsvHeader =
    "id,label,clean_lambda,clean_sigma_hat,attacked_lambda,attacked_sigma_hat,delta_lambda,flipped,"
    "attack_loss,contributes";

template <typename T>
T parse_field(std::string_view s, std::size_t line) {
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw FormatError("samples CSV line " + std::to_string(line) + ": cannot parse '" + std::string(s) + "'");
  return v;
}

nlohmann::json ttest_json(const std::optional<TTestResult>& t) {
  if (!t) return nullptr;
  // ±inf t is stored as a string; JSON has no infinities.
  nlohmann::json tj = std::isfinite(t->t) ? nlohmann::json(t->t) : nlohmann::json(t->t > 0 ? "inf" : "-inf");
  return {{"t", tj}, {"p", t->p}, {"df", t->df}, {"mean_diff", t->mean_diff}, {"degenerate", t->degenerate}};
}

std::optional<TTestResult> ttest_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  TTestResult t;
  const auto& tj = j.at("t");
  if (tj.is_string()) t.t = (tj.get<std::string>() == "inf" ? 1.0 : -1.0) * INFINITY;
  else t.t = tj.get<double>();
  t.p = j.at("p").get<double>();
  t.df = j.at("df").get<std::size_t>();
  t.mean_diff = j.at("mean_diff").get<double>();
  t.degenerate = j.at("degenerate").get<bool>();
  return t;
}

nlohmann::json aggregates_json(const ReportAggregates& a) {
  return {{"n", a.n},
          {"n_benign", a.n_benign},
          {"n_pathogenic", a.n_pathogenic},
          {"clean_auc", a.clean_auc},
          {"attacked_auc", a.attacked_auc},
          {"clean_aupr", a.clean_aupr},
          {"attacked_aupr", a.attacked_aupr},
          {"threshold", a.threshold},
          {"flip_rate", a.flip_rate},
          {"mean_delta_benign", a.mean_delta_benign},
          {"mean_delta_pathogenic", a.mean_delta_pathogenic},
          {"benign_ttest", ttest_json(a.benign_ttest)}};
}

ReportAggregates aggregates_from_json(const nlohmann::json& j) {
  ReportAggregates a;
  a.n = j.at("n").get<std::size_t>();
  a.n_benign = j.at("n_benign").get<std::size_t>();
  a.n_pathogenic = j.at("n_pathogenic").get<std::size_t>();
  a.clean_auc = j.at("clean_auc").get<double>();
  a.attacked_auc = j.at("attacked_auc").get<double>();
  a.clean_aupr = j.at("clean_aupr").get<double>();
  a.attacked_aupr = j.at("attacked_aupr").get<double>();
  a.threshold = j.at("threshold").get<double>();
  a.flip_rate = j.at("flip_rate").get<double>();
  a.mean_delta_benign = j.at("mean_delta_benign").get<double>();
  a.mean_delta_pathogenic = j.at("mean_delta_pathogenic").get<double>();
  a.benign_ttest = ttest_from_json(j.at("benign_ttest"));
  return a;
}

nlohmann::json row_json(const ReportRow& r) {
  return {{"id", r.id},
          {"label", r.label},
          {"clean_lambda", r.clean_lambda},
          {"clean_sigma_hat", r.clean_sigma_hat},
          {"attacked_lambda", r.attacked_lambda},
          {"attacked_sigma_hat", r.attacked_sigma_hat},
          {"delta_lambda", r.delta_lambda},
          {"flipped", r.flipped},
          {"attack_loss", r.attack_loss},
          {"contributes", r.contributes}};
}

ReportRow row_from_json(const nlohmann::json& j) {
  ReportRow r;
  r.id = j.at("id").get<std::size_t>();
  r.label = j.at("label").get<int>();
  r.clean_lambda = j.at("clean_lambda").get<double>();
  r.clean_sigma_hat = j.at("clean_sigma_hat").get<double>();
  r.attacked_lambda = j.at("attacked_lambda").get<double>();
  r.attacked_sigma_hat = j.at("attacked_sigma_hat").get<double>();
  r.delta_lambda = j.at("delta_lambda").get<double>();
  r.flipped = j.at("flipped").get<bool>();
  r.attack_loss = j.at("attack_loss").get<double>();
  r.contributes = j.at("contributes").get<bool>();
  return r;
}

bool close(double a, double b) { return a == b || std::abs(a - b) <= 1e-12; }

}  // namespace

EvalReport make_report(AttackKind attack, const std::vector<PllrRecord>& clean,
                       const std::vector<PllrRecord>& attacked, double threshold) {
  const DeltaPllr delta = delta_pllr(clean, attacked);
  const FlipSummary fl = flips(clean, attacked, threshold);
  EvalReport report;
  report.attack = attack;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ReportRow r;
    r.id = clean[i].id;
    r.label = clean[i].label;
    r.clean_lambda = clean[i].lambda;
    r.clean_sigma_hat = clean[i].sigma_hat;
    r.attacked_lambda = attacked[i].lambda;
    r.attacked_sigma_hat = attacked[i].sigma_hat;
    r.delta_lambda = delta.delta[i];
    r.flipped = fl.records[i].flipped;
    r.contributes = !(attack == AttackKind::kSpTargeted && r.label == 1);
    r.attack_loss = attack_loss(attack, attacked[i]);
    report.rows.push_back(r);
  }
  report.aggregates = compute_aggregates(report.rows, threshold);
  return report;
}

ReportAggregates compute_aggregates(const std::vector<ReportRow>& rows, double threshold) {
  ReportAggregates a;
  a.n = rows.size();
  a.threshold = threshold;
  ScoredSet clean, attacked;
  std::vector<double> benign_before, benign_after;
  double sum_b = 0.0, sum_p = 0.0;
  std::size_t flipped = 0;
  for (const auto& r : rows) {
    clean.scores.push_back(r.clean_lambda);
    clean.labels.push_back(r.label);
    attacked.scores.push_back(r.attacked_lambda);
    attacked.labels.push_back(r.label);
    flipped += (r.clean_lambda >= threshold) != (r.attacked_lambda >= threshold);
    if (r.label == 0) {
      ++a.n_benign;
      sum_b += r.attacked_lambda - r.clean_lambda;
      benign_before.push_back(r.clean_lambda);
      benign_after.push_back(r.attacked_lambda);
    } else {
      ++a.n_pathogenic;
      sum_p += r.attacked_lambda - r.clean_lambda;
    }
  }
  a.clean_auc = roc_auc(clean);
  a.attacked_auc = roc_auc(attacked);
  a.clean_aupr = aupr(clean);
  a.attacked_aupr = aupr(attacked);
  a.flip_rate = static_cast<double>(flipped) / static_cast<double>(rows.size());
  a.mean_delta_benign = sum_b / static_cast<double>(a.n_benign);
  a.mean_delta_pathogenic = sum_p / static_cast<double>(a.n_pathogenic);
  if (benign_before.size() >= 2) a.benign_ttest = paired_t_test(benign_before, benign_after);
  return a;
}

std::string samples_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.id << ',' << r.label << ',' << format_double(r.clean_lambda) << ','
        << format_double(r.clean_sigma_hat) << ',' << format_double(r.attacked_lambda) << ','
        << format_double(r.attacked_sigma_hat) << ',' << format_double(r.delta_lambda) << ','
        << (r.flipped ? 1 : 0) << ',' << format_double(r.attack_loss) << ',' << (r.contributes ? 1 : 0)
        << '\n';
  }
  return out.str();
}

std::vector<ReportRow> parse_samples_csv(std::string_view text) {
  std::vector<ReportRow> rows;
  std::size_t line_no = 0;
  bool header = true;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (header) {
      if (line != kCsvHeader) throw FormatError("samples CSV has an unexpected header");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (f.size() != 10) throw FormatError("samples CSV line " + std::to_string(line_no) + ": expected 10 fields");
    ReportRow r;
    r.id = parse_field<std::size_t>(f[0], line_no);
    r.label = parse_field<int>(f[1], line_no);
    r.clean_lambda = parse_field<double>(f[2], line_no);
    r.clean_sigma_hat = parse_field<double>(f[3], line_no);
    r.attacked_lambda = parse_field<double>(f[4], line_no);
    r.attacked_sigma_hat = parse_field<double>(f[5], line_no);
    r.delta_lambda = parse_field<double>(f[6], line_no);
    r.flipped = parse_field<int>(f[7], line_no) != 0;
    r.attack_loss = parse_field<double>(f[8], line_no);
    r.contributes = parse_field<int>(f[9], line_no) != 0;
    rows.push_back(r);
  }
  if (header) throw FormatError("samples CSV is empty");
  return rows;
}

nlohmann::json report_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) rows.push_back(row_json(r));
  return {{"attack", to_string(report.attack)},
          {"model_digest", report.model_digest},
          {"eval_digest", report.eval_digest},
          {"manifest", report.manifest},
          {"samples_csv", samples_file_name(report.attack)},
          {"attack_config", report.attack_config},
          {"aggregates", aggregates_json(report.aggregates)},
          {"rows", rows}};
}

void check_consistency(const EvalReport& report) {
  const ReportAggregates& s = report.aggregates;
  const ReportAggregates r = compute_aggregates(report.rows, s.threshold);
  auto fail = [](const std::string& field) {
    throw FormatError("report aggregate '" + field + "' does not match its per-sample rows");
  };
  if (s.n != r.n || s.n_benign != r.n_benign || s.n_pathogenic != r.n_pathogenic) fail("n");
  if (!close(s.clean_auc, r.clean_auc)) fail("clean_auc");
  if (!close(s.attacked_auc, r.attacked_auc)) fail("attacked_auc");
  if (!close(s.clean_aupr, r.clean_aupr)) fail("clean_aupr");
  if (!close(s.attacked_aupr, r.attacked_aupr)) fail("attacked_aupr");
  if (!close(s.flip_rate, r.flip_rate)) fail("flip_rate");
  if (!close(s.mean_delta_benign, r.mean_delta_benign)) fail("mean_delta_benign");
  if (!close(s.mean_delta_pathogenic, r.mean_delta_pathogenic)) fail("mean_delta_pathogenic");
  if (s.benign_ttest.has_value() != r.benign_ttest.has_value()) fail("benign_ttest");
  if (s.benign_ttest && !(s.benign_ttest->t == r.benign_ttest->t || close(s.benign_ttest->t, r.benign_ttest->t)))
    fail("benign_ttest.t");
  if (s.benign_ttest && !close(s.benign_ttest->p, r.benign_ttest->p)) fail("benign_ttest.p");
  for (const auto& row : report.rows) {
    if (row.delta_lambda != row.attacked_lambda - row.clean_lambda) fail("delta_lambda of row " + std::to_string(row.id));
    if (row.flipped != ((row.clean_lambda >= s.threshold) != (row.attacked_lambda >= s.threshold)))
      fail("flipped of row " + std::to_string(row.id));
  }
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport report;
  try {
    report.attack = attack_kind_from_string(j.at("attack").get<std::string>());
    report.model_digest = j.at("model_digest").get<std::string>();
    report.eval_digest = j.at("eval_digest").get<std::string>();
    report.manifest = j.at("manifest").get<std::string>();
    report.attack_config = j.at("attack_config");
    report.aggregates = aggregates_from_json(j.at("aggregates"));
    for (const auto& r : j.at("rows")) report.rows.push_back(row_from_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad report document: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad report document: ") + e.what());
  }
  check_consistency(report);
  return report;
}

std::string report_file_name(AttackKind attack) { return std::string("report_") + to_string(attack) + ".json"; }
std::string samples_file_name(AttackKind attack) { return std::string("samples_") + to_string(attack) + ".csv"; }

std::filesystem::path write_report(const std::filesystem::path& dir, const EvalReport& report) {
  write_file_atomic(dir / samples_file_name(report.attack), samples_csv(report.rows));
  const auto path = dir / report_file_name(report.attack);
  write_file_atomic(path, report_json(report).dump(2) + "\n");
  return path;
}

EvalReport load_report(const std::filesystem::path& json_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(json_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
  EvalReport report = report_from_json(j);
  const auto csv_path = json_path.parent_path() / j.value("samples_csv", samples_file_name(report.attack));
  if (std::filesystem::exists(csv_path)) {
    const auto rows = parse_samples_csv(read_file(csv_path));
    nlohmann::json a = nlohmann::json::array(), b = nlohmann::json::array();
    for (const auto& r : rows) a.push_back(row_json(r));
    for (const auto& r : report.rows) b.push_back(row_json(r));
    if (a != b) throw FormatError(csv_path.string() + " disagrees with " + json_path.string());
  }
  return report;
}

}  // namespace genatk
