#include "cmi/classifiers/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <cstring>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "cmi/core/errors.hpp"
#include "cmi/nn/models.hpp"
#include "cmi/nn/optim.hpp"

namespace cmi::classifiers {

using membership::FeatureSet;
using membership::LabeledRecord;
using membership::SimilarityMetric;
using nlohmann::json;
namespace fs = std::filesystem;

const char* kind_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::Vector: return "vector";
    case ClassifierKind::Set: return "set";
    case ClassifierKind::Threshold: return "threshold";
  }
  return "?";
}

std::vector<double> InferenceClassifier::member_scores(
    const std::vector<FeatureSet>& sets) const {
  std::vector<double> out;
  out.reserve(sets.size());
  for (const FeatureSet& s : sets) out.push_back(member_score(s));
  return out;
}

namespace {

constexpr char kMagic[8] = {'C', 'M', 'I', 'C', 'L', 'F', '1', '\n'};

void validate_records(const std::vector<LabeledRecord>& records) {
  if (records.empty()) raise(ErrorKind::InsufficientData, "no training records");
  const int n = records[0].features.n_views;
  const SimilarityMetric metric = records[0].features.metric;
  std::size_t members = 0;
  for (const auto& r : records) {
    if (r.features.n_views != n || r.features.metric != metric)
      raise(ErrorKind::InconsistentConfig,
            "records mix view counts or similarity metrics");
    members += static_cast<std::size_t>(r.label != 0);
  }
  if (members == 0 || members == records.size())
    raise(ErrorKind::SingleClassData,
          "training records contain a single class only");
  if (members * 2 != records.size())
    std::cerr << "[cmi] note: unbalanced inference training set ("
              << members << "/" << records.size() << " members); no reweighting\n";
}

double softmax_member_probability(const nn::Tensor& logits, int row) {
  const float* l = logits.image(row);
  const double mx = std::max(l[0], l[1]);
  const double e0 = std::exp(l[0] - mx), e1 = std::exp(l[1] - mx);
  return e1 / (e0 + e1);
}

// Shared Adam training loop over a fixed design matrix builder.
void train_network(nn::Network& net, const std::vector<LabeledRecord>& records,
                   const TrainOptions& options, std::uint64_t seed,
                   const std::function<nn::Tensor(const std::vector<std::size_t>&)>&
                       make_batch,
                   const std::function<nn::Tensor(const nn::Tensor&, bool)>& forward,
                   const std::function<void(const nn::Tensor&)>& backward) {
  nn::Adam opt(net.params(), options.lr);
  Rng rng = Rng(seed).derive("classifier-training");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<int> labels;
      labels.reserve(batch.size());
      for (std::size_t idx : batch) labels.push_back(records[idx].label);

      net.zero_grad();
      const nn::Tensor logits = forward(make_batch(batch), true);
      nn::Tensor grad;
      nn::softmax_cross_entropy(logits, labels, &grad);
      backward(grad);
      opt.step();
    }
  }
}

void write_classifier_file(const fs::path& file, const json& header,
                           nn::Network* net) {
  std::ofstream out(file, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + file.string());
  out.write(kMagic, sizeof(kMagic));
  const std::string head = header.dump();
  const std::uint32_t len = static_cast<std::uint32_t>(head.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  if (net) net->save_state(out);
}

json read_classifier_header(std::ifstream& in, const fs::path& file) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    raise(ErrorKind::CorruptCheckpoint, file.string() + ": bad magic");
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len == 0 || len > (1u << 20))
    raise(ErrorKind::CorruptCheckpoint, file.string() + ": bad header");
  std::string head(len, '\0');
  in.read(head.data(), len);
  if (!in) raise(ErrorKind::CorruptCheckpoint, file.string() + ": truncated");
  try {
    return json::parse(head);
  } catch (const json::exception&) {
    raise(ErrorKind::CorruptCheckpoint, file.string() + ": unparseable header");
  }
}

// ------------------------------------------------------------------ Vector

class VectorClassifier : public InferenceClassifier {
 public:
  VectorClassifier(int n, SimilarityMetric metric, int hidden, std::uint64_t seed)
      : n_(n), metric_(metric), hidden_(hidden) {
    Rng rng = Rng(seed).derive("vector-classifier-init");
    const int in = n * (n - 1) / 2;
    net_ = nn::build_mlp("fv", {in, hidden, hidden, 2}, rng);
  }

  ClassifierKind kind() const override { return ClassifierKind::Vector; }
  int n_views() const override { return n_; }
  SimilarityMetric metric() const override { return metric_; }
  double decision_cutoff() const override { return 0.5; }

  double member_score(const FeatureSet& features) const override {
    nn::Tensor x = row_of(features);
    const nn::Tensor logits = net_.forward(x, false);
    return softmax_member_probability(logits, 0);
  }

  void save(const fs::path& file) const override {
    json header;
    header["kind"] = kind_name(kind());
    header["n"] = n_;
    header["metric"] = metric_name(metric_);
    header["hidden"] = hidden_;
    write_classifier_file(file, header, &net_);
  }

  void train(const std::vector<LabeledRecord>& records, std::uint64_t seed,
             const TrainOptions& options) {
    train_network(
        net_, records, options, seed,
        [&](const std::vector<std::size_t>& batch) {
          nn::Tensor x = nn::Tensor::flat(static_cast<int>(batch.size()),
                                          n_ * (n_ - 1) / 2);
          for (std::size_t i = 0; i < batch.size(); ++i) {
            // Ranking step: descending sort before the network sees anything.
            const auto sorted = records[batch[i]].features.sorted_descending();
            float* row = x.image(static_cast<int>(i));
            for (std::size_t s = 0; s < sorted.size(); ++s)
              row[s] = static_cast<float>(sorted[s]);
          }
          return x;
        },
        [&](const nn::Tensor& x, bool train) { return net_.forward(x, train); },
        [&](const nn::Tensor& grad) { net_.backward(grad); });
  }

  nn::Network& net() { return net_; }

 private:
  nn::Tensor row_of(const FeatureSet& features) const {
    const auto sorted = features.sorted_descending();
    nn::Tensor x = nn::Tensor::flat(1, static_cast<int>(sorted.size()));
    for (std::size_t s = 0; s < sorted.size(); ++s)
      x.v[s] = static_cast<float>(sorted[s]);
    return x;
  }

  int n_;
  SimilarityMetric metric_;
  int hidden_;
  mutable nn::Network net_;
};

// --------------------------------------------------------------------- Set

class SetClassifier : public InferenceClassifier {
 public:
  SetClassifier(int n, SimilarityMetric metric, int width, std::uint64_t seed)
      : n_(n), metric_(metric), width_(width) {
    Rng rng = Rng(seed).derive("set-classifier-init");
    phi_ = nn::build_mlp("phi", {1, width, width}, rng);
    rho_ = nn::build_mlp("rho", {width, width, 2}, rng);
  }

  ClassifierKind kind() const override { return ClassifierKind::Set; }
  int n_views() const override { return n_; }
  SimilarityMetric metric() const override { return metric_; }
  double decision_cutoff() const override { return 0.5; }

  double member_score(const FeatureSet& features) const override {
    const nn::Tensor logits = forward_sets({&features}, false);
    return softmax_member_probability(logits, 0);
  }

  void save(const fs::path& file) const override {
    json header;
    header["kind"] = kind_name(kind());
    header["n"] = n_;
    header["metric"] = metric_name(metric_);
    header["width"] = width_;
    std::ofstream out(file, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot write " + file.string());
    out.write(kMagic, sizeof(kMagic));
    const std::string head = header.dump();
    const std::uint32_t len = static_cast<std::uint32_t>(head.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    phi_.save_state(out);
    rho_.save_state(out);
  }

  void train(const std::vector<LabeledRecord>& records, std::uint64_t seed,
             const TrainOptions& options) {
    nn::Adam opt(all_params(), options.lr);
    Rng rng = Rng(seed).derive("classifier-training");
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
      rng.shuffle(order);
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(options.batch_size)) {
        const std::size_t end = std::min(
            order.size(), start + static_cast<std::size_t>(options.batch_size));
        std::vector<const FeatureSet*> sets;
        std::vector<int> labels;
        for (std::size_t i = start; i < end; ++i) {
          sets.push_back(&records[order[i]].features);
          labels.push_back(records[order[i]].label);
        }
        phi_.zero_grad();
        rho_.zero_grad();
        const nn::Tensor logits = forward_sets(sets, true);
        nn::Tensor grad;
        nn::softmax_cross_entropy(logits, labels, &grad);
        backward_sets(grad, static_cast<int>(sets[0]->scores.size()));
        opt.step();
      }
    }
  }

  nn::Network& phi() { return phi_; }
  nn::Network& rho() { return rho_; }

 private:
  std::vector<nn::ParamTensor*> all_params() {
    auto out = phi_.params();
    for (nn::ParamTensor* p : rho_.params()) out.push_back(p);
    return out;
  }

  // [M sets × F scores] → φ per scalar → sum over scores → ρ → logits.
  nn::Tensor forward_sets(const std::vector<const FeatureSet*>& sets,
                          bool train) const {
    const int m = static_cast<int>(sets.size());
    const int f = static_cast<int>(sets[0]->scores.size());
    nn::Tensor elements = nn::Tensor::flat(m * f, 1);
    for (int i = 0; i < m; ++i)
      for (int s = 0; s < f; ++s)
        elements.v[static_cast<std::size_t>(i) * f + s] =
            static_cast<float>(sets[static_cast<std::size_t>(i)]->scores[static_cast<std::size_t>(s)]);
    const nn::Tensor embedded = phi_.forward(elements, train);  // [m*f, width]
    nn::Tensor pooled = nn::Tensor::flat(m, width_);
    for (int i = 0; i < m; ++i) {
      float* dst = pooled.image(i);
      for (int s = 0; s < f; ++s) {
        const float* src = embedded.image(i * f + s);
        for (int w = 0; w < width_; ++w) dst[w] += src[w];
      }
    }
    return rho_.forward(pooled, train);
  }

  void backward_sets(const nn::Tensor& dlogits, int f) {
    const nn::Tensor dpooled = rho_.backward(dlogits);
    nn::Tensor delements = nn::Tensor::flat(dpooled.n * f, width_);
    for (int i = 0; i < dpooled.n; ++i)
      for (int s = 0; s < f; ++s)
        std::memcpy(delements.image(i * f + s), dpooled.image(i),
                    static_cast<std::size_t>(width_) * sizeof(float));
    phi_.backward(delements);
  }

  int n_;
  SimilarityMetric metric_;
  int width_;
  mutable nn::Network phi_, rho_;
};

// --------------------------------------------------------------- Threshold

class ThresholdClassifier : public InferenceClassifier {
 public:
  ThresholdClassifier(int n, SimilarityMetric metric, double theta,
                      double fit_accuracy)
      : n_(n), metric_(metric), theta_(theta), fit_accuracy_(fit_accuracy) {}

  ClassifierKind kind() const override { return ClassifierKind::Threshold; }
  int n_views() const override { return n_; }
  SimilarityMetric metric() const override { return metric_; }
  double decision_cutoff() const override { return theta_; }
  double member_score(const FeatureSet& features) const override {
    return features.average();
  }

  double theta() const { return theta_; }
  double fit_accuracy() const { return fit_accuracy_; }

  void save(const fs::path& file) const override {
    json header;
    header["kind"] = kind_name(kind());
    header["n"] = n_;
    header["metric"] = metric_name(metric_);
    header["theta"] = theta_;
    header["fit_accuracy"] = fit_accuracy_;
    write_classifier_file(file, header, nullptr);
  }

 private:
  int n_;
  SimilarityMetric metric_;
  double theta_;
  double fit_accuracy_;
};

}  // namespace

std::pair<double, double> best_threshold(const std::vector<double>& values,
                                         const std::vector<int>& labels) {
  if (values.size() != labels.size() || values.empty())
    raise(ErrorKind::Validation, "values and labels must match and be non-empty");
  std::size_t members = 0;
  for (int l : labels) members += static_cast<std::size_t>(l != 0);
  if (members == 0 || members == values.size())
    raise(ErrorKind::SingleClassData, "thresholding needs both classes");

  // Sort values with labels; scan candidates via prefix counts.
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> sorted_values;
  std::vector<int> sorted_labels;
  for (std::size_t idx : order) {
    sorted_values.push_back(values[idx]);
    sorted_labels.push_back(labels[idx]);
  }

  // Candidates: below the minimum, midpoints between distinct neighbors,
  // above the maximum.
  std::vector<double> candidates;
  candidates.push_back(sorted_values.front() - 1.0);
  for (std::size_t i = 0; i + 1 < sorted_values.size(); ++i)
    if (sorted_values[i] < sorted_values[i + 1])
      candidates.push_back(0.5 * (sorted_values[i] + sorted_values[i + 1]));
  candidates.push_back(sorted_values.back() + 1.0);

  // members_below[i] = members among the first i sorted records.
  std::vector<std::size_t> members_below(sorted_values.size() + 1, 0);
  for (std::size_t i = 0; i < sorted_values.size(); ++i)
    members_below[i + 1] = members_below[i] +
                           static_cast<std::size_t>(sorted_labels[i] != 0);

  const std::size_t total = values.size();
  double best_theta = candidates.front();
  std::size_t best_correct = 0;
  bool first = true;
  for (double theta : candidates) {
    // Number of records strictly below theta.
    const std::size_t below = static_cast<std::size_t>(
        std::lower_bound(sorted_values.begin(), sorted_values.end(), theta) -
        sorted_values.begin());
    // Predicted member ⇔ value ≥ theta. Correct = members at/above theta
    // plus non-members below it.
    const std::size_t correct =
        (members - members_below[below]) + (below - members_below[below]);
    if (first || correct > best_correct) {
      best_correct = correct;
      best_theta = theta;
      first = false;
    }
    // Ties keep the earlier (smaller) theta.
  }
  return {best_theta, static_cast<double>(best_correct) / static_cast<double>(total)};
}

std::unique_ptr<InferenceClassifier> train_vector_classifier(
    const std::vector<LabeledRecord>& records, std::uint64_t seed,
    const TrainOptions& options) {
  validate_records(records);
  auto clf = std::make_unique<VectorClassifier>(
      records[0].features.n_views, records[0].features.metric, options.hidden, seed);
  clf->train(records, seed, options);
  return clf;
}

std::unique_ptr<InferenceClassifier> train_set_classifier(
    const std::vector<LabeledRecord>& records, std::uint64_t seed,
    const TrainOptions& options) {
  validate_records(records);
  auto clf = std::make_unique<SetClassifier>(records[0].features.n_views,
                                             records[0].features.metric,
                                             options.deepsets_width, seed);
  clf->train(records, seed, options);
  return clf;
}

std::unique_ptr<InferenceClassifier> fit_threshold(
    const std::vector<LabeledRecord>& records) {
  validate_records(records);
  std::vector<double> averages;
  std::vector<int> labels;
  for (const auto& r : records) {
    averages.push_back(r.features.average());
    labels.push_back(r.label);
  }
  const auto [theta, accuracy] = best_threshold(averages, labels);
  return std::make_unique<ThresholdClassifier>(
      records[0].features.n_views, records[0].features.metric, theta, accuracy);
}

Decision infer_membership(const Image& x, encoder::BlackBoxEncoder& target,
                          const InferenceClassifier& clf,
                          const data::AugmentationPipeline& pipeline, int n,
                          membership::SimilarityMetric metric, Rng& rng) {
  if (clf.n_views() != n || clf.metric() != metric)
    raise(ErrorKind::ConfigMismatch,
          "classifier was trained with different (n, metric)");
  const FeatureSet features =
      membership::extract_membership_features(x, target, pipeline, n, metric, rng);
  return clf.predict(features) ? Decision::Member : Decision::NonMember;
}

std::unique_ptr<InferenceClassifier> load_classifier(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open " + file.string());
  const json header = read_classifier_header(in, file);
  const std::string kind = header.at("kind").get<std::string>();
  const int n = header.at("n").get<int>();
  const SimilarityMetric metric =
      membership::parse_metric(header.at("metric").get<std::string>());

  if (kind == "threshold") {
    return std::make_unique<ThresholdClassifier>(
        n, metric, header.at("theta").get<double>(),
        header.value("fit_accuracy", 0.0));
  }
  if (kind == "vector") {
    auto clf = std::make_unique<VectorClassifier>(
        n, metric, header.at("hidden").get<int>(), 0);
    clf->net().load_state(in);
    return clf;
  }
  if (kind == "set") {
    auto clf = std::make_unique<SetClassifier>(n, metric,
                                               header.at("width").get<int>(), 0);
    clf->phi().load_state(in);
    clf->rho().load_state(in);
    return clf;
  }
  raise(ErrorKind::CorruptCheckpoint, "unknown classifier kind: " + kind);
}

}  // namespace cmi::classifiers
