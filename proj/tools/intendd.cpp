// intendd: stage-wise command line for keyphrase selection, intent discovery,
// classification with graph post-processing, evaluation and graph export.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "intendd/intendd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace intendd;

namespace {

struct Config {
  std::string dataset, background, embeddings, workdir = "work";
  int num_intents = 0;  // 0: derive from labels
  int n_max = 3;
  std::size_t min_df = 5, top_k = 2000, rfe_iters = 3;
  double kir = 0.0, labeled_fraction = 0.1;
  std::optional<double> alpha;
  double similarity_threshold = kDefaultSimilarityThreshold;
  std::string task = "discover";
  int shots = 0;
  std::string stage = "full";
  std::optional<double> threshold;
  MadConfig mad;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::string predictions;  // metrics subcommand input
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a.
struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  Fnv& bytes(std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return *this;
  }
  Fnv& field(std::string_view key, const std::string& value) { return bytes(key).bytes("=").bytes(value).bytes("\n"); }
  std::string hex() const {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
  }
};

std::string read_file(const std::string& path, const std::string& flag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + flag + " '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string num(double x) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

double pct(double x) { return std::round(x * 10000.0) / 100.0; }

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(flag + " is required");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

Dataset load(const Config& c) {
  require(c.dataset, "--dataset");
  auto ds = load_dataset(c.dataset, c.num_intents > 0 ? std::optional<int>(c.num_intents) : std::nullopt);
  if (ds.size() == 0) throw DataError("dataset '" + c.dataset + "' is empty");
  return ds;
}

bool classify_task(const Config& c) { return c.task == "classify_mc" || c.task == "classify_ml"; }

SeedMask discovery_mask(const Config& c, const Dataset& ds) {
  return c.kir > 0 ? make_seed_mask(ds, c.kir, c.labeled_fraction, c.seed) : SeedMask{};
}

std::vector<Node> graph_nodes(const Config& c, const Dataset& ds) {
  if (classify_task(c)) return singleton_nodes(ds);
  const auto mask = discovery_mask(c, ds);
  for (const auto& id : mask.labeled_ids)
    if (ds.utterances[*ds.index_of(id)].labels.size() > 1) return singleton_nodes(ds);
  return merge_labeled_nodes(ds, mask);
}

// ---------------------------------------------------------------------------
// keyphrases

struct KeyphraseArtifact {
  fs::path dir;
  KeyphraseSet selected;
};

KeyphraseArtifact keyphrase_stage(const Config& c, const Dataset& ds) {
  require(c.background, "--background");
  const auto bg_text = read_file(c.background, "--background");
  Fnv h;
  h.field("dataset", read_file(c.dataset, "--dataset"))
      .field("background", bg_text)
      .field("num_intents", std::to_string(ds.num_intents))
      .field("n_max", std::to_string(c.n_max))
      .field("min_df", std::to_string(c.min_df))
      .field("top_k", std::to_string(c.top_k))
      .field("rfe_iters", std::to_string(c.rfe_iters))
      .field("nodes", classify_task(c) ? "singleton" : "kir=" + num(c.kir) + ",lf=" + num(c.labeled_fraction))
      .field("seed", std::to_string(c.seed));
  KeyphraseArtifact art;
  art.dir = fs::path(c.workdir) / "cache" / ("keyphrases-" + h.hex());
  const auto tsv = art.dir / "keyphrases.tsv";
  const auto done = art.dir / "complete";

  if (fs::exists(done) && fs::exists(tsv)) {
    log::info("using cached keyphrases " + art.dir.string());
    std::ifstream in(tsv);
    art.selected = read_keyphrase_tsv(in);
    index_keyphrases(art.selected, ds);
    return art;
  }

  fs::create_directories(art.dir);
  const auto bg = load_background(c.background);
  const auto candidates = build_keyphrase_set(extract_ngrams(ds, bg, c.n_max), c.min_df, c.top_k);
  if (candidates.empty()) throw DataError("no keyphrase passes min_df = " + std::to_string(c.min_df));
  log::info(std::to_string(candidates.size()) + " candidate keyphrases");

  const auto nodes = graph_nodes(c, ds);
  json summary = {{"candidates", candidates.size()}};
  if (c.rfe_iters > 0 && ds.num_intents > 0) {
    RfeOptions opt;
    opt.max_iters = c.rfe_iters;
    opt.rng_seed = c.seed;
    auto rfe = rfe_select_detailed(nodes, candidates, ds.num_intents, opt);
    art.selected = std::move(rfe.selected);
    summary["removed"] = rfe.removed;
    summary["initial_modularity"] = rfe.initial_modularity;
    summary["final_modularity"] = rfe.final_modularity;
    summary["initial_clusters"] = rfe.initial_clusters;
    summary["final_clusters"] = rfe.final_clusters;
    summary["passes"] = rfe.passes;
  } else {
    if (c.rfe_iters > 0) log::info("K unknown; skipping feature elimination");
    art.selected = candidates;
  }
  summary["selected"] = art.selected.size();

  std::ostringstream cand, sel, manifest;
  write_keyphrase_tsv(cand, candidates);
  write_keyphrase_tsv(sel, art.selected);
  write_node_manifest(manifest, nodes);
  write_text(art.dir / "candidates.tsv", cand.str());
  write_text(tsv, sel.str());
  write_text(art.dir / "nodes.jsonl", manifest.str());
  write_text(art.dir / "rfe.json", summary.dump(2) + "\n");
  write_text(done, "");
  log::info("wrote keyphrases to " + art.dir.string());
  return art;
}

int cmd_keyphrases(const Config& c) {
  const auto ds = load(c);
  keyphrase_stage(c, ds);
  return 0;
}

// ---------------------------------------------------------------------------
// discover

std::vector<std::size_t> eval_rows(const Dataset& ds) {
  std::vector<std::size_t> all, test;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.utterances[i].labels.empty()) continue;
    all.push_back(i);
    if (ds.utterances[i].split == Split::test) test.push_back(i);
  }
  return test.empty() ? all : test;
}

json clustering_json(const ClusteringScore& s) {
  return {{"acc", pct(s.acc)}, {"nmi", pct(s.nmi)}, {"ari", pct(s.ari)}};
}

int cmd_discover(const Config& c) {
  const auto ds = load(c);
  require(c.embeddings, "--embeddings");
  const auto emb = load_embeddings(c.embeddings);
  const auto kp = keyphrase_stage(c, ds);
  const auto mask = discovery_mask(c, ds);

  DiscoveryConfig dc;
  dc.alpha = c.alpha;
  dc.similarity_threshold = c.similarity_threshold;
  dc.rng_seed = c.seed;
  const auto result = discover(ds, emb, kp.selected, mask, dc);
  const auto clusters = result.clusters_for(ds);

  fs::create_directories(c.workdir);
  std::ostringstream lines;
  for (std::size_t i = 0; i < ds.size(); ++i)
    lines << json{{"id", ds.utterances[i].id}, {"cluster", clusters[i]}}.dump() << '\n';
  write_text(fs::path(c.workdir) / "discovery.jsonl", lines.str());

  json summary = {{"alpha", result.alpha_used},
                  {"num_clusters", result.num_clusters},
                  {"K", ds.num_intents},
                  {"seed_utterances", mask.labeled_ids.size()},
                  {"known_intents", mask.known_intents.size()},
                  {"keyphrases", kp.selected.size()}};
  summary["silhouette"] = result.quality ? json(*result.quality) : json(nullptr);
  write_text(fs::path(c.workdir) / "discovery_summary.json", summary.dump(2) + "\n");

  const auto rows = eval_rows(ds);
  if (rows.empty()) {
    log::info("no gold labels; skipping metrics");
    return 0;
  }
  std::vector<std::size_t> pred;
  std::vector<LabelId> gold;
  for (auto i : rows) {
    pred.push_back(clusters[i]);
    gold.push_back(ds.utterances[i].labels.front());
  }
  write_text(fs::path(c.workdir) / "metrics.json", clustering_json(clustering_scores(pred, gold)).dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// classify

json classification_json(const ClassificationScore& s) {
  return {{"accuracy", pct(s.accuracy)},
          {"f1_micro", pct(s.f1_micro)},
          {"f1_macro", pct(s.f1_macro)},
          {"exact_match", pct(s.exact_match)}};
}

int cmd_classify(const Config& c) {
  if (!classify_task(c)) throw UsageError("--task must be classify_mc or classify_ml for classify");
  const TaskMode mode = c.task == "classify_mc" ? TaskMode::multiclass : TaskMode::multilabel;
  const auto ds = load(c);
  require(c.embeddings, "--embeddings");
  const auto emb = load_embeddings(c.embeddings);

  SeedMask shots = make_shot_mask(ds, c.shots, c.seed);
  if (shots.labeled_ids.empty()) throw DataError("empty train split");
  TrainConfig tc = c.train;
  tc.rng_seed = c.seed;
  const auto model = train_mlp(emb, ds, mode, tc, &shots.labeled_ids);

  std::vector<std::string> ids;
  for (const auto& u : ds.utterances) ids.push_back(u.id);
  std::vector<PredictionMatrix> stages{predict(model, emb, ids)};
  std::vector<std::string> names{"base"};

  if (c.stage != "base") {
    const auto kp = keyphrase_stage(c, ds);
    const auto nodes = singleton_nodes(ds);
    const auto w = lexical_view(build_lexical_graph(nodes, kp.selected));
    const auto a = build_similarity_graph(nodes, emb, c.similarity_threshold);
    const double alpha = c.alpha ? *c.alpha : tune_alpha(w, a, default_alpha_grid(), c.seed);
    const auto g = blend(w, a, alpha);
    stages.push_back(propagate_residuals(g, stages.back(), ds, shots.labeled_ids, c.mad));
    names.push_back("residual");
    if (c.stage == "full") {
      stages.push_back(smooth_labels(g, stages.back(), ds, shots.labeled_ids, c.mad));
      names.push_back("full");
    }
  }

  // Rows of the final prediction matrix by utterance id.
  auto rows_for = [&](const PredictionMatrix& p, Split split) {
    std::vector<Eigen::Index> rows;
    const auto index = ds.index();
    for (std::size_t i = 0; i < p.ids.size(); ++i)
      if (ds.utterances[index.at(p.ids[i])].split == split && !ds.utterances[index.at(p.ids[i])].labels.empty())
        rows.push_back(static_cast<Eigen::Index>(i));
    return rows;
  };
  auto take = [](const PredictionMatrix& p, const std::vector<Eigen::Index>& rows) {
    PredictionMatrix out;
    out.mode = p.mode;
    out.scores.resize(static_cast<Eigen::Index>(rows.size()), p.scores.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.ids.push_back(p.ids[static_cast<std::size_t>(rows[i])]);
      out.scores.row(static_cast<Eigen::Index>(i)) = p.scores.row(rows[i]);
    }
    return out;
  };
  auto gold_of = [&](const PredictionMatrix& p) {
    std::vector<LabelSet> g;
    for (const auto& id : p.ids) g.push_back(ds.utterances[*ds.index_of(id)].labels);
    return g;
  };

  double threshold = c.threshold.value_or(kDefaultMultilabelThreshold);
  if (mode == TaskMode::multilabel && !c.threshold) {
    const auto val = take(stages.back(), rows_for(stages.back(), Split::validation));
    if (!val.ids.empty()) {
      std::vector<double> grid;
      for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
      threshold = tune_threshold(val, gold_of(val), grid);
      log::info("multilabel threshold tuned on validation: " + num(threshold));
    }
  }

  fs::create_directories(c.workdir);
  json metrics = json::object();
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto test = take(stages[s], rows_for(stages[s], Split::test));
    if (test.ids.empty()) continue;
    metrics[names[s]] = classification_json(classification_scores(decide(test, mode, threshold), gold_of(test), mode));
  }
  if (metrics.empty()) log::info("no labeled test utterances; skipping metrics");
  else write_text(fs::path(c.workdir) / "metrics.json", metrics.dump(2) + "\n");

  const auto& final_scores = stages.back();
  const auto decided = decide(final_scores, mode, threshold);
  std::ostringstream lines;
  for (std::size_t i = 0; i < final_scores.ids.size(); ++i) {
    json scores = json::array(), labels = json::array();
    for (Eigen::Index j = 0; j < final_scores.scores.cols(); ++j)
      scores.push_back(final_scores.scores(static_cast<Eigen::Index>(i), j));
    for (LabelId l : decided[i]) labels.push_back(ds.label_vocab.at(static_cast<std::size_t>(l)));
    lines << json{{"id", final_scores.ids[i]}, {"scores", scores}, {"decided", labels}}.dump() << '\n';
  }
  write_text(fs::path(c.workdir) / "predictions.jsonl", lines.str());

  std::ostringstream bin;
  save_checkpoint(bin, model);
  write_text(fs::path(c.workdir) / "model.bin", bin.str());
  return 0;
}

// ---------------------------------------------------------------------------
// metrics: scores a discovery.jsonl ("cluster") or predictions.jsonl ("decided")

int cmd_metrics(const Config& c) {
  require(c.predictions, "--predictions");
  const auto ds = load(c);
  std::ifstream in(c.predictions);
  if (!in) throw DataError("cannot read --predictions '" + c.predictions + "'");
  std::vector<std::size_t> clusters;
  std::vector<LabelId> cluster_gold;
  std::vector<LabelSet> decided, gold;
  std::map<std::string, LabelId> vocab;
  for (std::size_t i = 0; i < ds.label_vocab.size(); ++i) vocab.emplace(ds.label_vocab[i], static_cast<LabelId>(i));
  std::string line;
  std::size_t line_no = 0;
  const auto rows = eval_rows(ds);
  std::set<std::string> eval_ids;
  for (auto i : rows) eval_ids.insert(ds.utterances[i].id);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      throw DataError(c.predictions + ": line " + std::to_string(line_no) + ": invalid JSON");
    }
    const auto id = rec.value("id", std::string());
    auto idx = ds.index_of(id);
    if (!idx) throw DataError(c.predictions + ": line " + std::to_string(line_no) + ": unknown id '" + id + "'");
    if (!eval_ids.count(id)) continue;
    const auto& u = ds.utterances[*idx];
    if (rec.contains("cluster")) {
      clusters.push_back(rec["cluster"].get<std::size_t>());
      cluster_gold.push_back(u.labels.front());
    } else if (rec.contains("decided")) {
      LabelSet s;
      for (const auto& l : rec["decided"]) {
        auto it = vocab.find(l.get<std::string>());
        s.push_back(it == vocab.end() ? -1 : it->second);
      }
      std::sort(s.begin(), s.end());
      decided.push_back(s);
      gold.push_back(u.labels);
    } else {
      throw DataError(c.predictions + ": line " + std::to_string(line_no) + ": needs \"cluster\" or \"decided\"");
    }
  }
  json out;
  if (!clusters.empty()) out = clustering_json(clustering_scores(clusters, cluster_gold));
  else if (!decided.empty())
    out = classification_json(classification_scores(
        decided, gold, ds.is_multilabel() ? TaskMode::multilabel : TaskMode::multiclass));
  else throw DataError("no predictions overlap the labeled evaluation utterances");
  std::cout << out.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// export-graph

int cmd_export_graph(const Config& c) {
  const auto ds = load(c);
  require(c.embeddings, "--embeddings");
  const auto emb = load_embeddings(c.embeddings);
  const auto kp = keyphrase_stage(c, ds);
  const auto nodes = graph_nodes(c, ds);
  const auto w = lexical_view(build_lexical_graph(nodes, kp.selected));
  const auto a = build_similarity_graph(nodes, emb, c.similarity_threshold);
  const double alpha = c.alpha ? *c.alpha : tune_alpha(w, a, default_alpha_grid(), c.seed);
  const auto g = blend(w, a, alpha);

  const auto dir = fs::path(c.workdir) / "graph";
  fs::create_directories(dir);
  std::ostringstream manifest, ew, ea, eg;
  write_node_manifest(manifest, nodes);
  write_edges_tsv(ew, w);
  write_edges_tsv(ea, a);
  write_edges_tsv(eg, g);
  write_text(dir / "nodes.jsonl", manifest.str());
  write_text(dir / "lexical.tsv", ew.str());
  write_text(dir / "similarity.tsv", ea.str());
  write_text(dir / "blended.tsv", eg.str());
  write_text(dir / "alpha.txt", num(alpha) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intent detection and discovery over keyphrase and embedding graphs"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value configuration file (flags take precedence)");
  Config c;

  app.add_option("--dataset", c.dataset, "dataset JSONL");
  app.add_option("--background", c.background, "background corpus, one utterance per line");
  app.add_option("--embeddings", c.embeddings, "embedding table (#dim=<D> header, tab-separated rows)");
  app.add_option("--workdir", c.workdir, "artifact directory")->capture_default_str();
  app.add_option("--num-intents", c.num_intents, "K; derived from labels when 0")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", c.seed, "random seed")->capture_default_str();
  app.add_option("--task", c.task, "discover | classify_mc | classify_ml")
      ->check(CLI::IsMember({"discover", "classify_mc", "classify_ml"}))
      ->capture_default_str();

  app.add_option("--n-max", c.n_max, "longest n-gram")->check(CLI::Range(1, 10))->capture_default_str();
  app.add_option("--min-df", c.min_df, "minimum document frequency in the dataset")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--top-k", c.top_k, "keyphrases kept before elimination")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--rfe-iters", c.rfe_iters, "elimination passes; 0 disables")->capture_default_str();

  app.add_option("--kir", c.kir, "known intent ratio")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  app.add_option("--labeled-fraction", c.labeled_fraction, "labeled share of known-intent train utterances")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--alpha", c.alpha, "fixed blend weight; tuned by silhouette when absent")->check(CLI::Range(0.0, 1.0));
  app.add_option("--similarity-threshold", c.similarity_threshold, "minimum cosine for similarity edges")
      ->capture_default_str();

  app.add_option("--shots", c.shots, "train examples per class; 0 uses all")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--stage", c.stage, "base | residual | full")
      ->check(CLI::IsMember({"base", "residual", "full"}))
      ->capture_default_str();
  app.add_option("--threshold", c.threshold, "multilabel decision threshold")->check(CLI::Range(0.0, 1.0));
  app.add_option("--epochs", c.train.epochs)->capture_default_str();
  app.add_option("--lr", c.train.learning_rate)->capture_default_str();
  app.add_option("--label-smoothing", c.train.label_smoothing_eps)->capture_default_str();
  app.add_option("--hidden", c.train.hidden_size)->capture_default_str();
  app.add_option("--batch", c.train.batch_size)->capture_default_str();

  app.add_option("--mad-mu1", c.mad.mu1)->capture_default_str();
  app.add_option("--mad-mu2", c.mad.mu2)->capture_default_str();
  app.add_option("--mad-mu-inj", c.mad.mu_inj)->capture_default_str();
  app.add_option("--mad-beta", c.mad.beta)->capture_default_str();
  app.add_option("--mad-tol", c.mad.tol)->capture_default_str();
  app.add_option("--mad-max-iters", c.mad.max_iters)->capture_default_str();

  auto* keyphrases = app.add_subcommand("keyphrases", "score and select keyphrases");
  auto* disc = app.add_subcommand("discover", "cluster utterances into intents");
  auto* classify = app.add_subcommand("classify", "train the base classifier and post-process over the graph");
  auto* metrics = app.add_subcommand("metrics", "score a discovery or prediction dump against gold labels");
  metrics->add_option("--predictions", c.predictions, "discovery.jsonl or predictions.jsonl");
  auto* export_graph = app.add_subcommand("export-graph", "write the lexical, similarity and blended graphs");
  for (auto* sub : {keyphrases, disc, classify, metrics, export_graph}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*keyphrases) return cmd_keyphrases(c);
    if (*disc) return cmd_discover(c);
    if (*classify) return cmd_classify(c);
    if (*metrics) return cmd_metrics(c);
    if (*export_graph) return cmd_export_graph(c);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
