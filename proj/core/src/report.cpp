#include "cxr/report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>

#include "cxr/error.hpp"

namespace cxr::report {
namespace {

void check_renderable(const metrics::ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ValidationError("cannot render an empty confusion matrix");
}

void check_sink(const std::ostream& sink) {
  if (!sink) throw IoError("write to report sink failed");
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

bool is_hex_digest(const std::string& s) {
  return !s.empty() &&
         s.find_first_not_of("0123456789abcdef") == std::string::npos;
}

}  // namespace

void render_confusion_csv(const metrics::ConfusionMatrix& cm, std::ostream& sink) {
  check_renderable(cm);
  sink << ",pred_0,pred_1\n"
       << "true_0," << cm.tn << ',' << cm.fp << '\n'
       << "true_1," << cm.fn << ',' << cm.tp << '\n';
  check_sink(sink);
}

void render_confusion_text(const metrics::ConfusionMatrix& cm, std::ostream& sink) {
  check_renderable(cm);
  const std::string cells[3][3] = {
      {"", "pred_0", "pred_1"},
      {"true_0", std::to_string(cm.tn), std::to_string(cm.fp)},
      {"true_1", std::to_string(cm.fn), std::to_string(cm.tp)},
  };
  std::size_t width[3] = {0, 0, 0};
  for (const auto& row : cells) {
    for (int c = 0; c < 3; ++c) width[c] = std::max(width[c], row[c].size());
  }
  for (const auto& row : cells) {
    sink << std::left << std::setw(static_cast<int>(width[0])) << row[0];
    for (int c = 1; c < 3; ++c) {
      sink << "  " << std::right << std::setw(static_cast<int>(width[c])) << row[c];
    }
    sink << '\n';
  }
  check_sink(sink);
}

std::string roc_caption(double auc, const metrics::ConfidenceInterval& ci) {
  char level[16];
  std::snprintf(level, sizeof level, "%g", ci.level * 100.0);
  return "AUC=" + fixed(auc, 3) + " (" + level + "% CI " + fixed(ci.low, 3) + ", " +
         fixed(ci.high, 3) + ")";
}

void render_roc(const metrics::RocCurve& curve, double auc, const metrics::ConfidenceInterval& ci,
                std::ostream& sink) {
  if (curve.points.size() < 2) throw ValidationError("ROC curve needs at least two points");
  // Plot area: unit square mapped to [x0, x0 + side] x [y0, y0 + side], y up.
  constexpr double x0 = 70.0;
  constexpr double y0 = 30.0;
  constexpr double side = 400.0;
  auto px = [&](double fpr) { return fixed(x0 + fpr * side, 2); };
  auto py = [&](double tpr) { return fixed(y0 + (1.0 - tpr) * side, 2); };

  sink << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"520\" "
          "viewBox=\"0 0 500 520\">\n";
  sink << "<rect x=\"0\" y=\"0\" width=\"500\" height=\"520\" fill=\"white\"/>\n";
  sink << "<rect x=\"" << fixed(x0, 2) << "\" y=\"" << fixed(y0, 2) << "\" width=\""
       << fixed(side, 2) << "\" height=\"" << fixed(side, 2)
       << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
  for (const double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    sink << "<line x1=\"" << px(t) << "\" y1=\"" << py(0.0) << "\" x2=\"" << px(t) << "\" y2=\""
         << fixed(y0 + side + 5.0, 2) << "\" stroke=\"black\"/>\n";
    sink << "<text x=\"" << px(t) << "\" y=\"" << fixed(y0 + side + 20.0, 2)
         << "\" font-size=\"12\" text-anchor=\"middle\">" << fixed(t, 2) << "</text>\n";
    sink << "<line x1=\"" << fixed(x0 - 5.0, 2) << "\" y1=\"" << py(t) << "\" x2=\"" << px(0.0)
         << "\" y2=\"" << py(t) << "\" stroke=\"black\"/>\n";
    sink << "<text x=\"" << fixed(x0 - 8.0, 2) << "\" y=\"" << fixed(y0 + (1.0 - t) * side + 4.0, 2)
         << "\" font-size=\"12\" text-anchor=\"end\">" << fixed(t, 2) << "</text>\n";
  }
  sink << "<line x1=\"" << px(0.0) << "\" y1=\"" << py(0.0) << "\" x2=\"" << px(1.0) << "\" y2=\""
       << py(1.0) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  sink << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (i != 0) sink << ' ';
    sink << px(curve.points[i].fpr) << ',' << py(curve.points[i].tpr);
  }
  sink << "\"/>\n";
  sink << "<text x=\"" << fixed(x0 + side / 2.0, 2) << "\" y=\"" << fixed(y0 + side + 40.0, 2)
       << "\" font-size=\"13\" text-anchor=\"middle\">False positive rate</text>\n";
  sink << "<text x=\"20.00\" y=\"" << fixed(y0 + side / 2.0, 2)
       << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 20.00 "
       << fixed(y0 + side / 2.0, 2) << ")\">True positive rate</text>\n";
  sink << "<text x=\"" << fixed(x0 + side / 2.0, 2) << "\" y=\"" << fixed(y0 + side + 70.0, 2)
       << "\" font-size=\"14\" text-anchor=\"middle\">" << roc_caption(auc, ci) << "</text>\n";
  sink << "</svg>\n";
  check_sink(sink);
}

void validate(const RunManifest& m) {
  for (const char* key : {"metadata_csv", "embeddings"}) {
    const auto it = m.input_digests.find(key);
    if (it == m.input_digests.end()) {
      throw ValidationError(std::string("manifest is missing the '") + key + "' digest");
    }
    if (!is_hex_digest(it->second)) {
      throw ValidationError(std::string("manifest digest '") + key + "' is not lower-case hex");
    }
  }
  if (m.tool_version.empty()) throw ValidationError("manifest is missing the tool version");
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j;
  j["task"] = m.task ? nlohmann::json(*m.task) : nlohmann::json(nullptr);
  j["split"] = m.split;
  j["k"] = m.k;
  j["extractor_mode"] = m.extractor_mode;
  j["input_digests"] = m.input_digests;
  j["metrics"] = m.metrics;
  j["tool_version"] = m.tool_version;
  j["bootstrap_method"] = m.bootstrap_method;
  if (m.created_utc) j[kWallClockKey] = *m.created_utc;
  return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    if (!j.at("task").is_null()) m.task = j.at("task").get<std::string>();
    m.split = j.at("split");
    m.k = j.at("k").get<std::size_t>();
    m.extractor_mode = j.at("extractor_mode").get<std::string>();
    m.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
    m.metrics = j.at("metrics");
    m.tool_version = j.at("tool_version").get<std::string>();
    m.bootstrap_method = j.at("bootstrap_method").get<std::string>();
    if (j.contains(kWallClockKey)) m.created_utc = j.at(kWallClockKey).get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed run manifest: ") + e.what());
  }
  validate(m);
  return m;
}

void write_json(const nlohmann::json& doc, std::ostream& sink) {
  sink << doc.dump(2) << '\n';
  check_sink(sink);
}

void write_manifest(const RunManifest& manifest, std::ostream& sink) {
  validate(manifest);
  write_json(to_json(manifest), sink);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_report_directory(const std::filesystem::path& dir, const ReportBundle& b) {
  validate(b.manifest);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory " + dir.string() + ": " + ec.message());

  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("confusion_matrix.csv");
    render_confusion_csv(b.cm, out);
  }
  {
    auto out = open("confusion_matrix.txt");
    render_confusion_text(b.cm, out);
  }
  {
    auto out = open("roc.csv");
    metrics::write_roc_csv(out, b.roc);
    check_sink(out);
  }
  {
    auto out = open("roc.svg");
    render_roc(b.roc, b.auc, b.ci, out);
  }
  {
    auto out = open("metrics.json");
    write_json(b.metrics, out);
  }
  {
    auto out = open("manifest.json");
    write_manifest(b.manifest, out);
  }
}

}  // namespace cxr::report
