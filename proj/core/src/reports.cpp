#include "faircal/reports.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "faircal/csv.hpp"
#include "faircal/errors.hpp"

namespace faircal {
namespace fs = std::filesystem;
namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw DataError("cannot create directory '" + path.parent_path().string() + "': " +
                            ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<std::string> split_header(const char* header) {
  std::vector<std::string> out;
  std::stringstream ss(header);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

void expect_header(const CsvTable& table, const char* header, const fs::path& path) {
  if (table.header != split_header(header)) {
    throw DataError("'" + path.string() + "': expected header " + header);
  }
}

std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

int parse_int(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError("'" + path.string() + "': bad integer '" + s + "'");
}

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                 "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_run_log_csv(const RunLog& log, const fs::path& path) {
  std::ofstream out = open_out(path);
  out << kRunLogHeader << '\n';
  for (const EpochRow& r : log.rows) {
    out << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.acc) << ','
        << format_double(r.ece) << ',' << format_double(r.pe_stoch) << ','
        << format_double(r.pe_det) << ',' << format_double(r.ece_ts) << ','
        << format_double(r.pe_stoch_ts) << ',' << format_double(r.t0) << ','
        << format_double(r.t1) << '\n';
  }
  finish(out, path);
}

std::vector<EpochRow> read_run_log_csv(const fs::path& path) {
  const CsvTable table = read_csv(path);
  expect_header(table, kRunLogHeader, path);
  std::vector<EpochRow> rows;
  for (const auto& f : table.rows) {
    EpochRow r;
    r.epoch = parse_int(f[0], path);
    r.loss = parse_double(f[1]);
    r.acc = parse_double(f[2]);
    r.ece = parse_double(f[3]);
    r.pe_stoch = parse_double(f[4]);
    r.pe_det = parse_double(f[5]);
    r.ece_ts = parse_double(f[6]);
    r.pe_stoch_ts = parse_double(f[7]);
    r.t0 = parse_double(f[8]);
    r.t1 = parse_double(f[9]);
    rows.push_back(r);
  }
  return rows;
}

void write_pareto_csv(std::span<const ParetoPoint> front, const fs::path& path) {
  std::ofstream out = open_out(path);
  out << kParetoHeader << '\n';
  for (const ParetoPoint& p : front) {
    out << format_double(p.pe) << ',' << format_double(p.ece) << ',' << format_double(p.acc)
        << ',' << csv_escape(p.run_id) << ',' << p.epoch << '\n';
  }
  finish(out, path);
}

std::vector<ParetoPoint> read_pareto_csv(const fs::path& path) {
  const CsvTable table = read_csv(path);
  expect_header(table, kParetoHeader, path);
  std::vector<ParetoPoint> points;
  for (const auto& f : table.rows) {
    points.push_back({parse_double(f[0]), parse_double(f[1]), parse_double(f[2]), f[3],
                      parse_int(f[4], path)});
  }
  return points;
}

void write_summary_csv(std::span<const SummaryRow> rows, const fs::path& path) {
  std::ofstream out = open_out(path);
  out << "technique,seeds,objective,acc,ece,pe_stoch,pe_det,pct_fair,pct_calib,pct_acc\n";
  for (const SummaryRow& r : rows) {
    out << csv_escape(r.technique) << ',' << r.seeds << ',' << format_double(r.objective) << ','
        << format_double(r.acc) << ',' << format_double(r.ece) << ','
        << format_double(r.pe_stoch) << ',' << format_double(r.pe_det) << ','
        << opt_field(r.pct_fair) << ',' << opt_field(r.pct_calib) << ','
        << opt_field(r.pct_acc) << '\n';
  }
  finish(out, path);
}

std::vector<ParetoSeries> pareto_fronts(std::span<const RunLog> logs, double accuracy_slack) {
  const double best = best_accuracy(logs);
  std::vector<std::string> techniques;
  for (const RunLog& log : logs) {
    const std::string t = log.id.technique();
    if (std::find(techniques.begin(), techniques.end(), t) == techniques.end()) {
      techniques.push_back(t);
    }
  }
  std::vector<ParetoSeries> out;
  for (const std::string& t : techniques) {
    std::vector<RunLog> mine;
    for (const RunLog& log : logs) {
      if (log.id.technique() == t) mine.push_back(log);
    }
    for (bool hybrid : {false, true}) {
      const auto points = collect_points(mine, hybrid);
      out.push_back({t + (hybrid ? "_ts" : ""), pareto_front(points, accuracy_slack, best)});
    }
  }
  return out;
}

void write_pareto_svg(std::span<const ParetoSeries> series, const std::string& title,
                      const fs::path& path) {
  constexpr double W = 640, H = 480, L = 60, R = 160, T = 40, B = 50;
  double max_pe = 0.0, max_ece = 0.0;
  for (const auto& s : series) {
    for (const auto& p : s.front) {
      max_pe = std::max(max_pe, p.pe);
      max_ece = std::max(max_ece, p.ece);
    }
  }
  if (max_pe <= 0.0) max_pe = 1.0;
  if (max_ece <= 0.0) max_ece = 1.0;
  const double pw = W - L - R, ph = H - T - B;
  auto x = [&](double pe) { return L + pw * pe / max_pe; };
  auto y = [&](double e) { return T + ph * (1.0 - e / max_ece); };

  std::ofstream out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(L) << "\" y=\"24\" font-size=\"14\">" << xml_escape(title)
      << "</text>\n";
  out << "<line x1=\"" << fmt(L) << "\" y1=\"" << fmt(T + ph) << "\" x2=\"" << fmt(L + pw)
      << "\" y2=\"" << fmt(T + ph) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt(L) << "\" y1=\"" << fmt(T) << "\" x2=\"" << fmt(L)
      << "\" y2=\"" << fmt(T + ph) << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << fmt(L + pw / 2) << "\" y=\"" << fmt(H - 12)
      << "\" text-anchor=\"middle\">stochastic PE (max " << format_double(max_pe)
      << ")</text>\n";
  out << "<text x=\"16\" y=\"" << fmt(T + ph / 2) << "\" transform=\"rotate(-90 16 "
      << fmt(T + ph / 2) << ")\" text-anchor=\"middle\">ECE (max " << format_double(max_ece)
      << ")</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPalette.size()];
    const bool dashed = series[s].name.ends_with("_ts");
    if (!series[s].front.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\""
          << (dashed ? " stroke-dasharray=\"4 3\"" : "") << " points=\"";
      for (std::size_t i = 0; i < series[s].front.size(); ++i) {
        const auto& p = series[s].front[i];
        out << (i ? " " : "") << fmt(x(p.pe)) << ',' << fmt(y(p.ece));
      }
      out << "\"/>\n";
      for (const auto& p : series[s].front) {
        out << "<circle cx=\"" << fmt(x(p.pe)) << "\" cy=\"" << fmt(y(p.ece))
            << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
    const double ly = T + 14.0 * static_cast<double>(s + 1);
    out << "<text x=\"" << fmt(L + pw + 12) << "\" y=\"" << fmt(ly) << "\" fill=\"" << color
        << "\">" << xml_escape(series[s].name) << "</text>\n";
  }
  out << "</svg>\n";
  finish(out, path);
}

void emit_reports(const SweepResult& result, const fs::path& out_dir,
                  const ReportOptions& options) {
  {
    const fs::path manifest = out_dir / "runs.csv";
    std::ofstream out = open_out(manifest);
    out << "run_id,technique,loss,groupwise,rho,lambda,seed,epochs\n";
    for (const RunLog& log : result.logs) {
      const RunId& id = log.id;
      out << id.str() << ',' << id.technique() << ',' << to_string(id.kind) << ','
          << (id.groupwise ? 1 : 0) << ',' << opt_field(id.rho) << ',' << opt_field(id.lambda)
          << ',' << id.seed << ',' << log.rows.size() << '\n';
      write_run_log_csv(log, out_dir / "runs" / (id.str() + ".csv"));
    }
    finish(out, manifest);
  }
  {
    const fs::path failures = out_dir / "failures.csv";
    std::ofstream out = open_out(failures);
    out << "run_id,message\n";
    for (const FailureRecord& f : result.failures) {
      out << csv_escape(f.id.str()) << ',' << csv_escape(f.message) << '\n';
    }
    finish(out, failures);
  }
  if (result.logs.empty()) return;
  for (Objective objective :
       {Objective::fairness, Objective::fairness_deterministic, Objective::calibration}) {
    SummaryOptions so;
    so.objective = objective;
    so.include_hybrid = objective != Objective::fairness_deterministic;
    write_summary_csv(best_metric_summary(result.logs, so),
                      out_dir / ("summary_" + std::string(to_string(objective)) + ".csv"));
  }
  const auto fronts = pareto_fronts(result.logs, options.accuracy_slack);
  for (const auto& s : fronts) write_pareto_csv(s.front, out_dir / "pareto" / (s.name + ".csv"));
  if (options.svg) write_pareto_svg(fronts, options.title, out_dir / "pareto.svg");
}

std::vector<RunLog> load_run_logs(const fs::path& out_dir) {
  const fs::path manifest = out_dir / "runs.csv";
  const CsvTable table = read_csv(manifest);
  const std::vector<std::string> expected = {"run_id", "technique", "loss", "groupwise",
                                             "rho",    "lambda",    "seed", "epochs"};
  if (table.header != expected) throw DataError("'" + manifest.string() + "': unexpected header");
  std::vector<RunLog> logs;
  for (const auto& f : table.rows) {
    RunLog log;
    log.id.kind = parse_loss_kind(f[2]);
    log.id.groupwise = f[3] == "1";
    log.id.rho = parse_opt(f[4]);
    log.id.lambda = parse_opt(f[5]);
    log.id.seed = std::stoull(f[6]);
    if (log.id.str() != f[0]) {
      throw DataError("'" + manifest.string() + "': run id mismatch for " + f[0]);
    }
    log.rows = read_run_log_csv(out_dir / "runs" / (f[0] + ".csv"));
    logs.push_back(std::move(log));
  }
  return logs;
}

}  // namespace faircal
