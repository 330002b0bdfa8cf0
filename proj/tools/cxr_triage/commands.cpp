#include "cxr_triage/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "cxr/dataset.hpp"
#include "cxr/digest.hpp"
#include "cxr/embedding.hpp"
#include "cxr/error.hpp"
#include "cxr/imaging.hpp"
#include "cxr/knn.hpp"
#include "cxr/metrics.hpp"
#include "cxr/png_io.hpp"
#include "cxr/report.hpp"
#include "cxr/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cxr::cli {
namespace {

constexpr std::uint64_t kDefaultSeed = 42;
constexpr const char* kSeedEnv = "CXR_TRIAGE_SEED";
constexpr std::size_t kMaxListedMissing = 20;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ClassAbsentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json read_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": invalid JSON: " + e.what());
  }
}

std::optional<json> read_sidecar(const fs::path& file) {
  const fs::path side = sidecar_path(file.string());
  if (!fs::exists(side)) return std::nullopt;
  return read_json_file(side);
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string json_string_or_empty(const std::optional<json>& doc, const char* key) {
  if (!doc || !doc->contains(key) || !(*doc)[key].is_string()) return {};
  return (*doc)[key].get<std::string>();
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOptions {
  std::string metadata;
  std::string images_dir;
  std::string task;
  std::string out;
};

int cmd_ingest(const IngestOptions& opt, std::ostream& out, std::ostream& err) {
  const auto task = dataset::parse_task(opt.task);
  if (!task) throw UsageError("--task must be covid or intubation");

  std::string text;
  try {
    text = read_file(opt.metadata);
  } catch (const IoError& e) {
    throw ParseError(std::string("cannot read metadata: ") + e.what());
  }
  const auto records = dataset::parse_metadata(text);
  const auto kept = dataset::filter_views(records);
  const auto examples = dataset::derive_labels(kept, *task);

  std::vector<std::string> missing;
  for (const auto& ex : examples) {
    if (!fs::is_regular_file(fs::path(opt.images_dir) / ex.record.image_filename)) {
      missing.push_back(ex.record.image_filename);
    }
  }
  if (!missing.empty()) {
    err << "error: " << missing.size() << " image file(s) not found under " << opt.images_dir
        << ":\n";
    for (std::size_t i = 0; i < std::min(missing.size(), kMaxListedMissing); ++i) {
      err << "  " << missing[i] << '\n';
    }
    if (missing.size() > kMaxListedMissing) {
      err << "  ... and " << missing.size() - kMaxListedMissing << " more\n";
    }
    return kImage;
  }

  write_text_file(opt.out, dump(dataset::to_manifest(examples)));
  json side;
  side["metadata_sha256"] = sha256_hex(text);
  side["images_dir"] = fs::absolute(opt.images_dir).lexically_normal().string();
  side["task"] = std::string(dataset::to_string(*task));
  write_text_file(sidecar_path(opt.out), dump(side));

  const auto positives = static_cast<std::size_t>(std::count_if(
      examples.begin(), examples.end(),
      [](const dataset::LabeledExample& e) { return e.label == Label::kPositive; }));
  out << "records=" << records.size() << " ap_pa=" << kept.size()
      << " labeled=" << examples.size() << '\n';
  out << "positives=" << positives << " negatives=" << examples.size() - positives << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// embed

struct EmbedOptions {
  std::string dataset;
  std::string graph;
  bool stub = false;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
  std::string images_dir;
  std::string resize = "crop";
  std::string dump_preprocessed;
  unsigned threads = 1;
};

int cmd_embed(const EmbedOptions& opt, std::ostream& out, std::ostream&) {
  const std::string manifest_text = read_file(opt.dataset);
  json doc;
  try {
    doc = json::parse(manifest_text);
  } catch (const json::parse_error& e) {
    throw ParseError(opt.dataset + ": invalid JSON: " + e.what());
  }
  const auto entries = dataset::from_manifest(doc);
  const auto side = read_sidecar(opt.dataset);

  fs::path images_dir = opt.images_dir;
  if (images_dir.empty()) images_dir = json_string_or_empty(side, "images_dir");
  if (images_dir.empty()) images_dir = fs::path(opt.dataset).parent_path();

  std::vector<std::string> ids;
  std::vector<Label> labels;
  for (const auto& e : entries) {
    if (!e.label) {
      throw ParseError("dataset manifest entry '" + e.record.image_filename +
                       "' has no label; produce the manifest with `ingest --task`");
    }
    ids.push_back(e.record.image_filename);
    labels.push_back(*e.label);
  }

  embedding::ExtractorConfig config;
  if (opt.stub) {
    config.mode = embedding::ExtractorMode::kStub;
    config.stub_seed = opt.seed;
  } else {
    config.mode = embedding::ExtractorMode::kGraph;
    config.graph_path = opt.graph;
  }
  const auto mode = opt.resize == "stretch" ? imaging::ResizeMode::kStretch
                                            : imaging::ResizeMode::kCenterCrop;
  if (!opt.dump_preprocessed.empty()) fs::create_directories(opt.dump_preprocessed);

  const embedding::ImageSource source = [&](std::size_t i) {
    const fs::path path = images_dir / ids[i];
    try {
      auto img = imaging::preprocess(imaging::load_png_file(path), mode);
      if (!opt.dump_preprocessed.empty()) {
        std::ofstream dbg(fs::path(opt.dump_preprocessed) / (std::to_string(i) + ".csv"));
        imaging::write_matrix_csv(dbg, img);
      }
      return img;
    } catch (const Error& e) {
      throw ImageError(std::string("cannot use image ") + path.string() + ": " + e.what());
    }
  };
  const auto embeddings = embedding::embed_all(config, ids.size(), source, ids, opt.threads);

  std::ostringstream csv;
  embedding::save_embeddings(embeddings, labels, csv);
  write_text_file(opt.out, csv.str());

  json meta;
  meta["dataset_sha256"] = sha256_hex(manifest_text);
  const auto metadata_digest = json_string_or_empty(side, "metadata_sha256");
  meta["metadata_sha256"] = metadata_digest.empty() ? json(nullptr) : json(metadata_digest);
  const auto task = json_string_or_empty(side, "task");
  meta["task"] = task.empty() ? json(nullptr) : json(task);
  meta["extractor_mode"] = opt.stub ? "stub" : "graph";
  meta["resize"] = opt.resize;
  if (opt.stub) {
    meta["stub_seed"] = opt.seed;
  } else {
    meta["graph_sha256"] = sha256_file_hex(opt.graph);
  }
  write_text_file(sidecar_path(opt.out), dump(meta));

  out << "embedded=" << embeddings.size() << " mode=" << (opt.stub ? "stub" : "graph") << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// eval / sweep-k

struct EvalOptions {
  std::string embeddings;
  std::size_t k = 5;
  double train_frac = 0.75;
  std::uint64_t seed = kDefaultSeed;
  std::size_t bootstrap = 10000;
  std::string report_dir;
  bool stratified = false;
  std::string metadata;
  std::string task;
  unsigned threads = 0;
  std::size_t k_min = 2;
  std::size_t k_max = 14;
};

struct PreparedSplit {
  std::vector<std::vector<double>> train_x;
  std::vector<Label> train_y;
  std::vector<std::vector<double>> test_x;
  std::vector<Label> test_y;
  dataset::SplitSpec spec;
  std::string embeddings_text;
};

void require_both_classes(std::span<const Label> labels, const char* half) {
  const auto positives = std::count(labels.begin(), labels.end(), Label::kPositive);
  if (positives == 0 || static_cast<std::size_t>(positives) == labels.size()) {
    throw ClassAbsentError(std::string("the ") + half + " half has " +
                           (labels.empty()          ? "no examples"
                            : positives == 0 ? "no positive examples"
                                             : "no negative examples") +
                           "; try another --seed or --stratified");
  }
}

PreparedSplit prepare(const EvalOptions& opt) {
  PreparedSplit p;
  p.embeddings_text = read_file(opt.embeddings);
  auto set = embedding::load_embeddings(std::string_view(p.embeddings_text));
  if (set.embeddings.empty()) throw ParseError(opt.embeddings + ": no embedding rows");

  p.spec = {opt.train_frac, opt.seed,
            opt.stratified ? dataset::SplitMode::kStratified : dataset::SplitMode::kRandom};
  const auto idx = opt.stratified ? dataset::stratified_split_indices(set.labels, p.spec)
                                  : dataset::split_indices(set.labels.size(), p.spec);
  for (auto i : idx.train) {
    p.train_x.push_back(std::move(set.embeddings[i].values));
    p.train_y.push_back(set.labels[i]);
  }
  for (auto i : idx.test) {
    p.test_x.push_back(std::move(set.embeddings[i].values));
    p.test_y.push_back(set.labels[i]);
  }
  require_both_classes(p.train_y, "training");
  require_both_classes(p.test_y, "test");
  return p;
}

json split_json(const PreparedSplit& p) {
  json j;
  j["train_fraction"] = p.spec.train_fraction;
  j["seed"] = p.spec.seed;
  j["mode"] = p.spec.mode == dataset::SplitMode::kStratified ? "stratified" : "random";
  j["n_train"] = p.train_y.size();
  j["n_test"] = p.test_y.size();
  return j;
}

knn::KnnModel fit_or_usage(const PreparedSplit& p, std::size_t k) {
  if (k > p.train_y.size()) {
    throw UsageError("k=" + std::to_string(k) + " exceeds the training size " +
                     std::to_string(p.train_y.size()));
  }
  return knn::KnnModel::fit(p.train_x, p.train_y, k);
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream&) {
  const auto p = prepare(opt);
  const auto model = fit_or_usage(p, opt.k);
  const auto result = knn::classify_all(model, p.test_x, opt.threads);

  report::ReportBundle b;
  b.cm = metrics::confusion_matrix(result.predictions, p.test_y);
  const auto summary = metrics::precision_recall_f1_accuracy(b.cm);
  auto roc = metrics::roc_and_auc(result.scores, p.test_y);
  b.roc = std::move(roc.curve);
  b.auc = roc.auc;
  b.ci = metrics::bootstrap_auc_ci(result.scores, p.test_y,
                                   {opt.bootstrap, 0.95, opt.seed, opt.threads});

  const auto side = read_sidecar(opt.embeddings);
  std::optional<std::string> task;
  if (!opt.task.empty()) {
    task = opt.task;
  } else if (auto t = json_string_or_empty(side, "task"); !t.empty()) {
    task = t;
  }

  metrics::EvaluationRecord rec{task, opt.k, p.train_y.size(), p.test_y.size(), b.cm, summary,
                                b.auc, b.ci};
  b.metrics = metrics::to_json(rec);

  auto& m = b.manifest;
  m.task = task;
  m.split = split_json(p);
  m.k = opt.k;
  m.extractor_mode = json_string_or_empty(side, "extractor_mode");
  if (m.extractor_mode.empty()) m.extractor_mode = "unknown";
  m.input_digests["embeddings"] = sha256_hex(p.embeddings_text);
  if (!opt.metadata.empty()) {
    m.input_digests["metadata_csv"] = sha256_file_hex(opt.metadata);
  } else if (auto d = json_string_or_empty(side, "metadata_sha256"); !d.empty()) {
    m.input_digests["metadata_csv"] = d;
  } else {
    throw ParseError("cannot trace the metadata CSV behind " + opt.embeddings +
                     "; pass --metadata");
  }
  if (auto d = json_string_or_empty(side, "dataset_sha256"); !d.empty()) {
    m.input_digests["dataset_manifest"] = d;
  }
  if (auto d = json_string_or_empty(side, "graph_sha256"); !d.empty()) {
    m.input_digests["graph"] = d;
  }
  m.metrics = b.metrics;
  m.tool_version = kVersion;
  m.created_utc = report::utc_timestamp();

  report::write_report_directory(opt.report_dir, b);

  char line[256];
  std::snprintf(line, sizeof line,
                "precision=%.6f recall=%.6f f1=%.6f accuracy=%.6f auc=%.6f ci_low=%.6f "
                "ci_high=%.6f\n",
                summary.precision, summary.recall, summary.f1, summary.accuracy, b.auc, b.ci.low,
                b.ci.high);
  out << line;
  return kOk;
}

int cmd_sweep_k(const EvalOptions& opt, std::ostream& out, std::ostream&) {
  if (opt.k_min > opt.k_max) throw UsageError("--k-min must not exceed --k-max");
  const auto p = prepare(opt);
  if (opt.k_max > p.train_y.size()) {
    throw UsageError("--k-max=" + std::to_string(opt.k_max) + " exceeds the training size " +
                     std::to_string(p.train_y.size()));
  }

  std::ostringstream csv;
  csv << "k,precision,recall,f1,accuracy,auc\n";
  std::size_t best_k = 0;
  double best_f1 = -1.0;
  for (std::size_t k = opt.k_min; k <= opt.k_max; ++k) {
    const auto model = fit_or_usage(p, k);
    const auto result = knn::classify_all(model, p.test_x, opt.threads);
    const auto s =
        metrics::precision_recall_f1_accuracy(metrics::confusion_matrix(result.predictions, p.test_y));
    const double auc = metrics::auc(result.scores, p.test_y);
    csv << k << ',' << metrics::format_number(s.precision) << ','
        << metrics::format_number(s.recall) << ',' << metrics::format_number(s.f1) << ','
        << metrics::format_number(s.accuracy) << ',' << metrics::format_number(auc) << '\n';
    if (s.f1 > best_f1) {
      best_f1 = s.f1;
      best_k = k;
    }
  }
  write_text_file(fs::path(opt.report_dir) / "sweep.csv", csv.str());
  char line[96];
  std::snprintf(line, sizeof line, "best_k=%zu f1=%.6f\n", best_k, best_f1);
  out << line;
  return kOk;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ClassAbsentError& e) {
    err << "error: " << e.what() << '\n';
    return kClassAbsent;
  } catch (const ImageError& e) {
    err << "error: " << e.what() << '\n';
    return kImage;
  } catch (const GraphLoadError& e) {
    err << "error: " << e.what() << '\n';
    return kGraph;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kGraph;
  } catch (const ValidationError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    // Parse errors and unreadable inputs.
    err << "error: " << e.what() << '\n';
    return kParse;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kParse;
  }
}

void add_seed_option(CLI::App* sub, std::uint64_t& seed) {
  sub->add_option("--seed", seed, "Seed for every random choice")
      ->envname(kSeedEnv)
      ->capture_default_str();
}

}  // namespace

std::string sidecar_path(const std::string& file) { return file + ".meta.json"; }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chest X-ray triage: embeddings, KNN classification and evaluation reports",
               "cxr-triage"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  IngestOptions ing;
  auto* ingest = app.add_subcommand("ingest", "Parse metadata and write a labeled dataset manifest");
  ingest->set_version_flag("--version", kVersion);
  ingest->add_option("--metadata", ing.metadata, "Metadata CSV")->required();
  ingest->add_option("--images-dir", ing.images_dir, "Directory the image filenames are relative to")
      ->required();
  ingest->add_option("--task", ing.task, "covid or intubation")
      ->required()
      ->check(CLI::IsMember({"covid", "intubation"}));
  ingest->add_option("--out", ing.out, "Dataset manifest JSON to write")->required();

  EmbedOptions emb;
  auto* embed = app.add_subcommand("embed", "Compute a 1024-d embedding per dataset image");
  embed->set_version_flag("--version", kVersion);
  embed->add_option("--dataset", emb.dataset, "Dataset manifest from `ingest`")->required();
  auto* graph_opt = embed->add_option("--graph", emb.graph, "Exported inference graph (ONNX)");
  auto* stub_opt = embed->add_flag("--stub", emb.stub, "Use the deterministic stub extractor");
  graph_opt->excludes(stub_opt);
  stub_opt->excludes(graph_opt);
  add_seed_option(embed, emb.seed);
  embed->add_option("--out", emb.out, "Embeddings CSV to write")->required();
  embed->add_option("--images-dir", emb.images_dir,
                    "Override the image directory recorded by `ingest`");
  embed->add_option("--resize", emb.resize, "crop (center square) or stretch")
      ->check(CLI::IsMember({"crop", "stretch"}))
      ->capture_default_str();
  embed->add_option("--dump-preprocessed", emb.dump_preprocessed,
                    "Write each preprocessed 224x224 matrix as CSV into this directory");
  embed->add_option("--threads", emb.threads, "Worker threads (0 = all cores)")
      ->capture_default_str();

  EvalOptions ev;
  auto add_eval_options = [](CLI::App* sub, EvalOptions& o) {
    sub->set_version_flag("--version", kVersion);
    sub->add_option("--embeddings", o.embeddings, "Embeddings CSV from `embed`")->required();
    sub->add_option("--train-frac", o.train_frac, "Fraction of examples used for training")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    add_seed_option(sub, o.seed);
    sub->add_option("--report-dir", o.report_dir, "Directory for report files")->required();
    sub->add_flag("--stratified", o.stratified, "Split each class separately");
    sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)")
        ->capture_default_str();
  };
  auto* eval = app.add_subcommand("eval", "Split, fit KNN, evaluate and write reports");
  add_eval_options(eval, ev);
  eval->add_option("--k", ev.k, "Number of neighbors")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval->add_option("--bootstrap", ev.bootstrap, "Bootstrap resamples for the AUC interval")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval->add_option("--metadata", ev.metadata,
                   "Metadata CSV to digest when the embeddings carry no provenance");
  eval->add_option("--task", ev.task, "Task name recorded in the reports");

  EvalOptions sw;
  auto* sweep = app.add_subcommand("sweep-k", "Evaluate a range of k on one split");
  add_eval_options(sweep, sw);
  sweep->add_option("--k-min", sw.k_min, "Smallest k")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sweep->add_option("--k-max", sw.k_max, "Largest k")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  return guarded(err, [&] {
    if (ingest->parsed()) return cmd_ingest(ing, out, err);
    if (embed->parsed()) {
      if (emb.graph.empty() && !emb.stub) throw UsageError("embed needs --graph PATH or --stub");
      return cmd_embed(emb, out, err);
    }
    if (eval->parsed()) {
      if (ev.train_frac <= 0.0) throw UsageError("--train-frac must be in (0, 1]");
      return cmd_eval(ev, out, err);
    }
    if (sw.train_frac <= 0.0) throw UsageError("--train-frac must be in (0, 1]");
    return cmd_sweep_k(sw, out, err);
  });
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"cxr-triage"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace cxr::cli
