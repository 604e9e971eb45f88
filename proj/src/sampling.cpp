#include <algorithm>
#include <numeric>

#include "sslkit/data.hpp"
#include "sslkit/errors.hpp"

namespace sslkit {

std::vector<std::size_t> FoldPlan::fold_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

nlohmann::json fold_plan_to_json(const FoldPlan& plan) {
  return {{"k", plan.k}, {"seed", plan.seed}, {"assignments", plan.assignments}};
}

FoldPlan fold_plan_from_json(const nlohmann::json& j) {
  FoldPlan plan;
  try {
    plan.k = j.at("k").get<std::size_t>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.assignments = j.at("assignments").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed fold plan: ") + e.what());
  }
  for (std::size_t f : plan.assignments)
    if (f >= plan.k) throw DataError("fold plan assigns fold " + std::to_string(f) + " with k=" + std::to_string(plan.k));
  return plan;
}

FoldPlan stratified_kfold(const LabeledDataset& dataset, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2, got " + std::to_string(k));
  FoldPlan plan{k, seed, std::vector<std::size_t>(dataset.size(), 0)};
  const auto by_class = dataset.indices_by_class();
  std::size_t dealer = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto members = by_class[c];
    Rng rng = make_rng(seed, Stream::kFolds, {c});
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t idx : members) {
      plan.assignments[idx] = dealer % k;
      ++dealer;
    }
  }
  return plan;
}

std::size_t default_samples_per_class(const LabeledDataset& dataset) {
  std::vector<std::size_t> counts;
  for (std::size_t c : dataset.class_counts())
    if (c > 0) counts.push_back(c);
  if (counts.empty()) return 1;
  std::sort(counts.begin(), counts.end());
  const std::size_t n = counts.size();
  const std::size_t median = n % 2 == 1 ? counts[n / 2] : (counts[n / 2 - 1] + counts[n / 2]) / 2;
  return std::min(std::max<std::size_t>(median, 1), counts.back());
}

std::vector<std::size_t> balanced_epoch(const LabeledDataset& dataset,
                                        std::size_t samples_per_class, std::uint64_t seed) {
  if (samples_per_class < 1) throw std::invalid_argument("balanced_epoch: N_c must be >= 1");
  const auto by_class = dataset.indices_by_class();
  std::vector<std::size_t> order;
  order.reserve(by_class.size() * samples_per_class);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto& members = by_class[c];
    if (members.empty())
      throw DataError("balanced_epoch: class '" + dataset.class_names()[c] + "' has no samples");
    Rng rng = make_rng(seed, Stream::kEpochOrder, {c});
    if (members.size() >= samples_per_class) {
      auto perm = members;
      std::shuffle(perm.begin(), perm.end(), rng);
      order.insert(order.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(samples_per_class));
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      for (std::size_t i = 0; i < samples_per_class; ++i) order.push_back(members[pick(rng)]);
    }
  }
  Rng rng = make_rng(seed, Stream::kEpochOrder, {by_class.size()});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<std::size_t> natural_epoch(const LabeledDataset& dataset, std::uint64_t seed) {
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, Stream::kEpochOrder);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace sslkit
