// Discovers and classifies intents in the bundled banking utterances.
// Embeddings here are hashed bags of words so the demo runs without an encoder;
// real runs load sentence-encoder vectors from an embedding table.

#include <iomanip>
#include <iostream>
#include <sstream>

#include "intendd/intendd.hpp"

using namespace intendd;

namespace {

EmbeddingTable hashed_bow(const Dataset& ds, std::size_t dim) {
  EmbeddingTable t;
  t.dim = dim;
  for (const auto& u : ds.utterances) {
    std::vector<double> v(dim, 0.0);
    for (const auto& tok : tokenize(u.text)) {
      std::uint64_t h = 1469598103934665603ull;
      for (unsigned char c : tok) h = (h ^ c) * 1099511628211ull;
      v[h % dim] += 1.0;
    }
    t.vectors.emplace(u.id, std::move(v));
  }
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string data = argc > 1 ? argv[1] : INTENDD_DEMO_DATA;
  const auto ds = load_dataset(data + "/utterances.jsonl");
  const auto bg = load_background(data + "/background.txt");
  const auto emb = hashed_bow(ds, 64);

  const auto candidates = build_keyphrase_set(extract_ngrams(ds, bg), /*min_df=*/3);
  const auto kp = rfe_select(singleton_nodes(ds), candidates, ds.num_intents);
  std::cout << "keyphrases:";
  for (const auto& k : kp.items) std::cout << ' ' << k.ngram;
  std::cout << "\n\n";

  const auto found = discover(ds, emb, kp, {});
  const auto clusters = found.clusters_for(ds);
  std::vector<LabelId> gold;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    gold.push_back(ds.utterances[i].labels.front());
    std::cout << "  [" << clusters[i] << "] " << ds.utterances[i].text << '\n';
  }
  const auto s = clustering_scores(clusters, gold);
  std::cout << std::fixed << std::setprecision(3) << "\nclusters " << found.num_clusters << "  alpha " << found.alpha_used
            << "  ACC " << s.acc << "  NMI " << s.nmi << "  ARI " << s.ari << "\n\n";

  // Two labeled examples per intent, then graph post-processing.
  const auto shots = make_shot_mask(ds, 2, 0);
  TrainConfig tc;
  tc.hidden_size = 32;
  tc.learning_rate = 1e-2;
  const auto model = train_mlp(emb, ds, TaskMode::multiclass, tc, &shots.labeled_ids);
  std::vector<std::string> ids;
  for (const auto& u : ds.utterances) ids.push_back(u.id);
  const auto g = blend(lexical_view(build_lexical_graph(singleton_nodes(ds), kp)),
                       build_similarity_graph(singleton_nodes(ds), emb), found.alpha_used);
  const auto base = predict(model, emb, ids);
  const auto residual = propagate_residuals(g, base, ds, shots.labeled_ids);
  const auto full = smooth_labels(g, residual, ds, shots.labeled_ids);

  std::vector<LabelSet> truth;
  for (const auto& u : ds.utterances) truth.push_back(u.labels);
  for (const auto& [name, p] : {std::pair{"base", &base}, {"residual", &residual}, {"smoothed", &full}}) {
    const auto sc = classification_scores(decide(*p, TaskMode::multiclass), truth, TaskMode::multiclass);
    std::cout << std::setw(9) << name << "  accuracy " << sc.accuracy << '\n';
  }
}
