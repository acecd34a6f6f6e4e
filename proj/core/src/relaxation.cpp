#include "xmodal/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "xmodal/common.hpp"
#include "xmodal/recordio.hpp"

namespace xmodal {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void check_dims(const std::vector<std::vector<double>>& vectors,
                const char* what) {
  if (vectors.empty()) throw InputError(std::string(what) + ": no vectors");
  const std::size_t d = vectors.front().size();
  if (d == 0) throw InputError(std::string(what) + ": zero-dim vectors");
  for (const auto& v : vectors)
    if (v.size() != d)
      throw InputError(std::string(what) + ": ragged vector dims");
}

}  // namespace

std::vector<std::size_t> NounBank::cluster_members(int cluster_id) const {
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].cluster_id == cluster_id) members.push_back(i);
  return members;
}

void check_bank(const NounBank& bank) {
  for (const auto& e : bank.entries) {
    const double np = e.pretrained.norm();
    const double nc = l2_norm(e.current);
    if (std::abs(np - 1.0) > 1e-6 || std::abs(nc - 1.0) > 1e-6)
      throw InputError("bank entry '" + e.noun + "' not unit-norm");
    if (e.cluster_id < 0 || e.cluster_id >= bank.M)
      throw InputError("bank entry '" + e.noun + "' has cluster id " +
                       std::to_string(e.cluster_id) + " outside 0.." +
                       std::to_string(bank.M - 1));
  }
}

std::vector<std::pair<std::string, EmbeddingVector>> embed_nouns(
    const NounCandidateSet& nouns, const PromptTemplateSet& templates,
    const EncoderBackend& backend) {
  if (nouns.nouns.empty()) throw InputError("embed_nouns: no nouns");
  std::vector<std::pair<std::string, EmbeddingVector>> out;
  out.reserve(nouns.nouns.size());
  for (const auto& noun : nouns.nouns) {
    std::vector<double> acc(static_cast<std::size_t>(backend.text_dim()), 0.0);
    for (const auto& prompt : templates.apply(noun)) {
      EmbeddingVector v;
      try {
        v = backend.encode_text(prompt);
      } catch (const Error& e) {
        throw BackendError("embed_nouns: encoding noun '" + noun +
                           "' prompt '" + prompt + "': " + e.what());
      }
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v.values[i];
    }
    for (auto& x : acc) x /= static_cast<double>(templates.size());
    out.emplace_back(noun, normalize(acc));
  }
  return out;
}

ClusterModel kmeans(const std::vector<std::vector<double>>& vectors, int M,
                    std::uint64_t seed, int max_iter, double tol) {
  check_dims(vectors, "kmeans");
  const std::size_t n = vectors.size();
  if (M < 1) throw InputError("kmeans: M must be >= 1");
  if (n < static_cast<std::size_t>(M))
    throw InputError("kmeans: need at least M vectors, got " +
                     std::to_string(n));

  ClusterModel model;
  Rng rng(seed);

  // D^2-weighted init: each next center is drawn with probability
  // proportional to the squared distance to the nearest chosen center.
  model.centers.push_back(vectors[rng.next_below(n)]);
  std::vector<double> d2(n);
  while (model.centers.size() < static_cast<std::size_t>(M)) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : model.centers)
        best = std::min(best, sq_dist(vectors[j], c));
      d2[j] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.next_double() * total;
      double run = 0.0;
      pick = n - 1;
      for (std::size_t j = 0; j < n; ++j) {
        run += d2[j];
        if (run > r) {
          pick = j;
          break;
        }
      }
    } else {
      pick = rng.next_below(n);  // all points coincide with a center
    }
    model.centers.push_back(vectors[pick]);
  }

  model.assignment.assign(n, 0);
  const std::size_t d = vectors.front().size();
  for (int iter = 0; iter < max_iter; ++iter) {
    for (std::size_t j = 0; j < n; ++j) {
      int best_k = 0;
      double best = sq_dist(vectors[j], model.centers[0]);
      for (int k = 1; k < M; ++k) {
        const double dist = sq_dist(vectors[j], model.centers[k]);
        if (dist < best) {
          best = dist;
          best_k = k;
        }
      }
      model.assignment[j] = best_k;
    }

    std::vector<std::vector<double>> sums(M, std::vector<double>(d, 0.0));
    std::vector<std::size_t> counts(M, 0);
    for (std::size_t j = 0; j < n; ++j) {
      const int k = model.assignment[j];
      ++counts[k];
      for (std::size_t i = 0; i < d; ++i) sums[k][i] += vectors[j][i];
    }

    double moved = 0.0;
    for (int k = 0; k < M; ++k) {
      if (counts[k] == 0) {
        // Rescue: the point farthest from its assigned center restarts
        // this cluster.
        std::size_t far_j = 0;
        double far = -1.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dist =
              sq_dist(vectors[j], model.centers[model.assignment[j]]);
          if (dist > far) {
            far = dist;
            far_j = j;
          }
        }
        moved = std::max(moved, sq_dist(model.centers[k], vectors[far_j]));
        model.centers[k] = vectors[far_j];
        model.assignment[far_j] = k;
        ++model.reseeds;
        continue;
      }
      std::vector<double> mean(d);
      for (std::size_t i = 0; i < d; ++i)
        mean[i] = sums[k][i] / static_cast<double>(counts[k]);
      moved = std::max(moved, sq_dist(model.centers[k], mean));
      model.centers[k] = mean;
    }
    if (moved < tol) break;
  }

  // Final assignment against the settled centers.
  model.inertia = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    int best_k = 0;
    double best = sq_dist(vectors[j], model.centers[0]);
    for (int k = 1; k < M; ++k) {
      const double dist = sq_dist(vectors[j], model.centers[k]);
      if (dist < best) {
        best = dist;
        best_k = k;
      }
    }
    model.assignment[j] = best_k;
    model.inertia += best;
  }
  return model;
}

int nearest_center(const ClusterModel& model, const std::vector<double>& v) {
  if (model.centers.empty()) throw InputError("nearest_center: no centers");
  int best_k = 0;
  double best = sq_dist(v, model.centers[0]);
  for (std::size_t k = 1; k < model.centers.size(); ++k) {
    const double dist = sq_dist(v, model.centers[k]);
    if (dist < best) {
      best = dist;
      best_k = static_cast<int>(k);
    }
  }
  return best_k;
}

std::vector<std::vector<double>> similarity_matrix(
    const ClusterModel& model,
    const std::vector<std::pair<std::string, EmbeddingVector>>& nouns) {
  std::vector<std::vector<double>> S(
      model.centers.size(), std::vector<double>(nouns.size(), 0.0));
  for (std::size_t k = 0; k < model.centers.size(); ++k)
    for (std::size_t i = 0; i < nouns.size(); ++i) {
      const auto& vals = nouns[i].second.values;
      double acc = 0.0;
      for (std::size_t d = 0; d < vals.size(); ++d)
        acc += model.centers[k][d] * static_cast<double>(vals[d]);
      S[k][i] = acc;
    }
  return S;
}

NounBank assign_and_filter(
    const ClusterModel& model,
    const std::vector<std::pair<std::string, EmbeddingVector>>& nouns,
    int top_k, std::vector<std::string>* warnings) {
  if (model.centers.empty()) throw InputError("assign_and_filter: no centers");
  if (nouns.empty()) throw InputError("assign_and_filter: no nouns");
  if (top_k < 1) throw InputError("assign_and_filter: top_k must be >= 1");
  const int M = static_cast<int>(model.centers.size());
  if (nouns.front().second.dim() != model.centers.front().size())
    throw InputError("assign_and_filter: noun dim " +
                     std::to_string(nouns.front().second.dim()) +
                     " != center dim " +
                     std::to_string(model.centers.front().size()));

  const auto S = similarity_matrix(model, nouns);

  std::vector<std::vector<std::size_t>> members(M);
  for (std::size_t i = 0; i < nouns.size(); ++i) {
    int best_k = 0;
    for (int k = 1; k < M; ++k)
      if (S[k][i] > S[best_k][i]) best_k = k;
    members[best_k].push_back(i);
  }

  NounBank bank;
  bank.M = M;
  for (int k = 0; k < M; ++k) {
    auto& ms = members[k];
    if (ms.empty()) {
      if (warnings)
        warnings->push_back("cluster " + std::to_string(k) +
                            " matched no nouns; kept empty");
      continue;
    }
    std::stable_sort(ms.begin(), ms.end(), [&](std::size_t a, std::size_t b) {
      return S[k][a] > S[k][b];
    });
    const std::size_t keep =
        std::min<std::size_t>(ms.size(), static_cast<std::size_t>(top_k));
    for (std::size_t r = 0; r < keep; ++r) {
      const auto& [noun, vec] = nouns[ms[r]];
      BankEntry e;
      e.noun = noun;
      e.cluster_id = k;
      // Snapshot first, then lift the snapshot itself so current starts
      // exactly equal to pretrained (cosreg is exactly 0 on a fresh bank
      // and save/load round-trips bit-identically).
      e.pretrained = normalize(to_f64(vec.values));
      e.current = to_f64(e.pretrained.values);
      bank.entries.push_back(std::move(e));
    }
  }
  check_bank(bank);
  return bank;
}

SelectMode parse_select_mode(const std::string& name) {
  if (name == "nearest-in-cluster") return SelectMode::kNearestInCluster;
  if (name == "random-in-cluster") return SelectMode::kRandomInCluster;
  throw ConfigError("unknown selection mode '" + name + "'");
}

std::string select_mode_name(SelectMode mode) {
  return mode == SelectMode::kNearestInCluster ? "nearest-in-cluster"
                                               : "random-in-cluster";
}

std::size_t select_relaxed_for_sample(const NounBank& bank,
                                      const std::vector<double>& image_vec,
                                      const ClusterModel& model,
                                      SelectMode mode, std::uint64_t seed) {
  if (bank.entries.empty())
    throw InputError("select_relaxed_for_sample: empty bank");
  const int k = nearest_center(model, image_vec);

  std::vector<std::size_t> members = bank.cluster_members(k);
  if (members.empty()) {
    // Memberless cluster: global nearest entry.
    std::size_t best = 0;
    double best_dot = dot(image_vec, bank.entries[0].current);
    for (std::size_t i = 1; i < bank.entries.size(); ++i) {
      const double d = dot(image_vec, bank.entries[i].current);
      if (d > best_dot) {
        best_dot = d;
        best = i;
      }
    }
    return best;
  }

  if (mode == SelectMode::kRandomInCluster) {
    Rng rng(seed);
    return members[rng.next_below(members.size())];
  }

  std::size_t best = members[0];
  double best_dot = dot(image_vec, bank.entries[best].current);
  for (std::size_t m = 1; m < members.size(); ++m) {
    const double d = dot(image_vec, bank.entries[members[m]].current);
    if (d > best_dot) {
      best_dot = d;
      best = members[m];
    }
  }
  return best;
}

RelaxResult build_bank(const ClassCatalog& catalog, const LexiconTable& table,
                       const PromptTemplateSet& templates,
                       const EncoderBackend& backend,
                       const std::vector<std::vector<double>>& image_vectors,
                       int M, int top_k, std::uint64_t seed,
                       int per_class_limit) {
  if (backend.text_dim() != backend.image_dim())
    throw ConfigError(
        "build_bank: center-noun similarity needs matching text and image "
        "dims, got " +
        std::to_string(backend.text_dim()) + " and " +
        std::to_string(backend.image_dim()));
  RelaxResult result;
  HarvestReport report;
  const NounCandidateSet candidates =
      harvest_candidates(catalog, table, per_class_limit, &report);
  result.warnings = report.warnings;
  result.noun_embeddings = embed_nouns(candidates, templates, backend);
  result.clusters = kmeans(image_vectors, M, seed);
  result.bank = assign_and_filter(result.clusters, result.noun_embeddings,
                                  top_k, &result.warnings);
  return result;
}

void save_bank(const NounBank& bank, const ClusterModel& model,
               const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "vectors");

  nlohmann::json manifest;
  manifest["M"] = bank.M;
  manifest["learnable"] = bank.learnable;

  auto store = [&dir](const std::string& record_id,
                      const std::vector<float>& values) {
    write_f32_file(dir / "vectors" / (record_id + ".f32"), values);
    nlohmann::json rec;
    rec["record"] = record_id;
    rec["len"] = values.size();
    rec["checksum"] = f32_checksum(values);
    return rec;
  };

  manifest["entries"] = nlohmann::json::array();
  for (std::size_t i = 0; i < bank.entries.size(); ++i) {
    const auto& e = bank.entries[i];
    nlohmann::json je;
    je["noun"] = e.noun;
    je["cluster"] = e.cluster_id;
    je["pretrained"] = store("e" + std::to_string(i) + "_pre",
                             e.pretrained.values);
    je["current"] = store("e" + std::to_string(i) + "_cur",
                          to_f32(e.current));
    manifest["entries"].push_back(std::move(je));
  }

  manifest["centers"] = nlohmann::json::array();
  for (std::size_t k = 0; k < model.centers.size(); ++k)
    manifest["centers"].push_back(
        store("c" + std::to_string(k), to_f32(model.centers[k])));

  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::pair<NounBank, ClusterModel> load_bank(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw CacheIntegrityError("bank manifest " + (dir / "manifest.json").string() +
                              ": " + e.what());
  }

  auto fetch = [&dir](const nlohmann::json& rec, const std::string& context) {
    const std::string id = rec.at("record").get<std::string>();
    return read_f32_file(dir / "vectors" / (id + ".f32"),
                         rec.at("len").get<std::size_t>(),
                         rec.at("checksum").get<std::string>(), context);
  };

  NounBank bank;
  bank.M = manifest.at("M").get<int>();
  bank.learnable = manifest.at("learnable").get<bool>();
  for (const auto& je : manifest.at("entries")) {
    BankEntry e;
    e.noun = je.at("noun").get<std::string>();
    e.cluster_id = je.at("cluster").get<int>();
    e.pretrained.values = fetch(je.at("pretrained"), "bank entry " + e.noun);
    e.current = to_f64(fetch(je.at("current"), "bank entry " + e.noun));
    bank.entries.push_back(std::move(e));
  }

  ClusterModel model;
  for (std::size_t k = 0; k < manifest.at("centers").size(); ++k)
    model.centers.push_back(to_f64(
        fetch(manifest.at("centers")[k], "center " + std::to_string(k))));
  check_bank(bank);
  return {std::move(bank), std::move(model)};
}

}  // namespace xmodal
