#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cleegn/alloc.hpp"
#include "cleegn/analysis.hpp"
#include "cleegn/checkpoint.hpp"
#include "cleegn/loss.hpp"
#include "cleegn/model.hpp"
#include "cleegn/optim.hpp"
#include "cleegn/recording.hpp"
#include "cleegn/rng.hpp"
#include "cleegn/streaming.hpp"
#include "cleegn/windows.hpp"

namespace cleegn {

struct SubjectData {
  std::string id;
  Recording noisy;
  Recording reference;
};

using Dataset = std::vector<SubjectData>;

// Loads <id>_noisy.eegr paired with <id>_clean.eegr or <id>_reference.eegr,
// sorted by id.
inline Dataset load_dataset_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw std::runtime_error("load_dataset_dir: '" + dir + "' is not a directory");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const std::string tag = "_noisy.eegr";
    if (name.size() > tag.size() && name.substr(name.size() - tag.size()) == tag)
      ids.push_back(name.substr(0, name.size() - tag.size()));
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty())
    throw std::runtime_error("load_dataset_dir: no *_noisy.eegr files in '" + dir + "'");

  Dataset out;
  for (const auto& id : ids) {
    SubjectData s;
    s.id = id;
    s.noisy = load_recording_file((fs::path(dir) / (id + "_noisy.eegr")).string());
    const fs::path clean = fs::path(dir) / (id + "_clean.eegr");
    const fs::path ref = fs::path(dir) / (id + "_reference.eegr");
    if (fs::exists(clean))
      s.reference = load_recording_file(clean.string());
    else if (fs::exists(ref))
      s.reference = load_recording_file(ref.string());
    else
      throw std::runtime_error("load_dataset_dir: no reference recording for subject '" + id +
                               "'");
    s.noisy.subject_id = id;
    s.reference.subject_id = id;
    out.push_back(std::move(s));
  }
  return out;
}

struct FoldSpec {
  int fold_id = 0;
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
};

// k subject-disjoint folds whose test sets jointly cover all subjects, with
// sizes differing by at most one. Deterministic per seed.
inline std::vector<FoldSpec> make_folds(std::vector<std::string> subjects, int64_t k,
                                        uint64_t seed) {
  const int64_t n = static_cast<int64_t>(subjects.size());
  if (k < 2 || k > n)
    throw std::runtime_error("make_folds: k must be in [2, " + std::to_string(n) + "], got " +
                             std::to_string(k));
  Rng rng(mix_seed(seed, 0xf01d));
  rng.shuffle(subjects);

  std::vector<FoldSpec> folds(static_cast<size_t>(k));
  int64_t at = 0;
  for (int64_t i = 0; i < k; ++i) {
    const int64_t size = n / k + (i < n % k ? 1 : 0);
    auto& f = folds[static_cast<size_t>(i)];
    f.fold_id = static_cast<int>(i);
    f.test_subjects.assign(subjects.begin() + at, subjects.begin() + at + size);
    at += size;
  }
  for (int64_t i = 0; i < k; ++i) {
    auto& f = folds[static_cast<size_t>(i)];
    std::set<std::string> test(f.test_subjects.begin(), f.test_subjects.end());
    for (const auto& s : subjects)
      if (!test.count(s)) f.train_subjects.push_back(s);
    std::sort(f.train_subjects.begin(), f.train_subjects.end());
    std::sort(f.test_subjects.begin(), f.test_subjects.end());
  }
  return folds;
}

struct TrainConfig {
  int64_t batch_size = 64;
  int64_t epochs = 40;
  double lr0 = 1e-3;
  double gamma = 0.8;
  double window_sec = 4.0;
  double stride_fraction = 0.5;
  double val_fraction = 0.2;
  double minutes_per_subject = 0.0;  // 0 = use everything
  int64_t n_filters = 0;             // 0 = channel count
  uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (lr0 < 0.0) throw std::invalid_argument("TrainConfig: lr0 must be >= 0");
    if (!(gamma > 0.0) || gamma > 1.0)
      throw std::invalid_argument("TrainConfig: gamma must be in (0, 1]");
    if (!(val_fraction > 0.0) || !(val_fraction < 1.0))
      throw std::invalid_argument("TrainConfig: val_fraction must be in (0, 1)");
    if (minutes_per_subject < 0.0)
      throw std::invalid_argument("TrainConfig: minutes_per_subject must be >= 0");
  }
};

struct TrainReport {
  std::vector<double> train_loss, val_loss, lr;  // per epoch
  int64_t best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double wall_time_sec = 0.0;
  std::vector<std::pair<std::string, double>> test_mse;
  double test_mean = 0.0, test_stderr = 0.0;
};

namespace detail {

inline Recording truncate_minutes(const Recording& rec, double minutes) {
  if (minutes <= 0.0) return rec;
  const int64_t keep = std::min<int64_t>(
      rec.n_samples, static_cast<int64_t>(minutes * 60.0 * static_cast<double>(rec.fs)));
  if (keep >= rec.n_samples) return rec;
  Recording out(rec.channels(), keep, rec.fs);
  out.channel_names = rec.channel_names;
  out.subject_id = rec.subject_id;
  out.kind = rec.kind;
  for (int64_t c = 0; c < rec.channels(); ++c)
    for (int64_t t = 0; t < keep; ++t) out.at(c, t) = rec.at(c, t);
  return out;
}

// Validation loss with batch statistics and the running estimates left
// untouched, so it is a pure function of the weights and the fixed
// validation windows.
inline double validation_loss(CleegnModelF& model, const std::vector<WindowPair>& windows,
                              const std::vector<size_t>& idx, int64_t batch_size) {
  double total = 0.0;
  int64_t count = 0;
  for (size_t at = 0; at < idx.size(); at += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(idx.size(), at + static_cast<size_t>(batch_size));
    std::vector<const std::vector<float>*> xs, ys;
    for (size_t i = at; i < end; ++i) {
      xs.push_back(&windows[idx[i]].noisy);
      ys.push_back(&windows[idx[i]].reference);
    }
    Tensor4<float> x = pack_batch(xs, windows[idx[at]].channels, windows[idx[at]].length);
    Tensor4<float> y = pack_batch(ys, windows[idx[at]].channels, windows[idx[at]].length);
    Tensor4<float> pred = forward(model, x, BnMode::train, nullptr, nullptr, false);
    const auto r = mse_loss(pred, y);
    total += r.loss * static_cast<double>(end - at);
    count += static_cast<int64_t>(end - at);
  }
  return total / static_cast<double>(count);
}

}  // namespace detail

struct TrainResult {
  CleegnModelF model;
  TrainReport report;
};

namespace detail {

struct SplitWindows {
  std::vector<WindowPair> windows;
  std::vector<size_t> train_idx, val_idx;
};

// Windows from the fold's train subjects plus the seeded validation split;
// fully determined by (cfg.seed, fold, dataset contents).
inline SplitWindows build_training_windows(const Dataset& dataset, const FoldSpec& fold,
                                           const TrainConfig& cfg) {
  SplitWindows out;
  for (const auto& subj : dataset) {
    if (std::find(fold.train_subjects.begin(), fold.train_subjects.end(), subj.id) ==
        fold.train_subjects.end())
      continue;
    const Recording noisy = truncate_minutes(subj.noisy, cfg.minutes_per_subject);
    const Recording ref = truncate_minutes(subj.reference, cfg.minutes_per_subject);
    auto w = segment_windows(noisy, ref, cfg.window_sec, cfg.stride_fraction);
    out.windows.insert(out.windows.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
  }
  if (out.windows.empty())
    throw std::runtime_error("train_fold: no training windows (empty training set?)");

  // subject-disjointness guard
  for (const auto& w : out.windows)
    if (std::find(fold.test_subjects.begin(), fold.test_subjects.end(), w.subject_id) !=
        fold.test_subjects.end())
      throw std::runtime_error("train_fold: window from test subject '" + w.subject_id +
                               "' leaked into training");

  std::vector<size_t> order(out.windows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(mix_seed(cfg.seed, 0x5b111));
  split_rng.shuffle(order);
  size_t n_val = static_cast<size_t>(cfg.val_fraction * static_cast<double>(order.size()));
  n_val = std::max<size_t>(1, std::min(n_val, order.size() - 1));
  out.val_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  return out;
}

}  // namespace detail

// Validation loss of a model against the exact split train_fold would use.
inline double recompute_validation_loss(const CleegnModelF& model, const Dataset& dataset,
                                        const FoldSpec& fold, const TrainConfig& cfg) {
  cfg.validate();
  auto split = detail::build_training_windows(dataset, fold, cfg);
  return detail::validation_loss(const_cast<CleegnModelF&>(model), split.windows,
                                 split.val_idx, cfg.batch_size);
}

// The training loop: windows from the fold's train subjects only, seeded
// validation split, per-epoch reshuffled batches, Adam plus the exponential
// schedule, best-validation checkpoint selection.
inline TrainResult train_fold(const Dataset& dataset, const FoldSpec& fold,
                              const TrainConfig& cfg) {
  cfg.validate();
  detail::tune_malloc_once();
  const auto t_start = std::chrono::steady_clock::now();

  auto split = detail::build_training_windows(dataset, fold, cfg);
  std::vector<WindowPair>& windows = split.windows;
  std::vector<size_t>& val_idx = split.val_idx;
  std::vector<size_t>& train_idx = split.train_idx;

  const int64_t C = windows[0].channels;
  const int64_t T = windows[0].length;
  const float fs = static_cast<float>(static_cast<double>(T) / cfg.window_sec);

  CleegnConfig mcfg = make_config(C, fs, cfg.n_filters, static_cast<float>(cfg.window_sec));
  TrainResult out;
  out.model = build_model<float>(mcfg, mix_seed(cfg.seed, 0x1217));

  std::vector<std::string> param_names;
  std::vector<AdamState<float>> adam;
  detail::for_each_param(out.model, [&](const std::string& name, float*, size_t n) {
    param_names.push_back(name);
    adam.emplace_back(n);
  });

  CleegnModelF best = out.model;
  CheckpointMeta best_meta;
  best_meta.seed = cfg.seed;
  Rng epoch_rng(mix_seed(cfg.seed, 0xe90c4));

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg.lr0, cfg.gamma);
    epoch_rng.shuffle(train_idx);

    int64_t n_batches = static_cast<int64_t>(train_idx.size()) / cfg.batch_size;
    int64_t batch_sz = cfg.batch_size;
    if (n_batches == 0) {  // fewer windows than one batch: train on all of them
      n_batches = 1;
      batch_sz = static_cast<int64_t>(train_idx.size());
    }

    double epoch_loss = 0.0;
    for (int64_t bi = 0; bi < n_batches; ++bi) {
      std::vector<const std::vector<float>*> xs, ys;
      for (int64_t i = bi * batch_sz; i < (bi + 1) * batch_sz; ++i) {
        xs.push_back(&windows[train_idx[static_cast<size_t>(i)]].noisy);
        ys.push_back(&windows[train_idx[static_cast<size_t>(i)]].reference);
      }
      Tensor4<float> x = pack_batch(xs, C, T);
      Tensor4<float> y = pack_batch(ys, C, T);

      ModelCache<float> cache;
      Tensor4<float> pred = forward(out.model, x, BnMode::train, &cache);
      auto loss = mse_loss(pred, y);
      if (!std::isfinite(loss.loss))
        throw std::runtime_error("train_fold: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " + std::to_string(bi));
      epoch_loss += loss.loss;

      ModelGrads<float> grads = backward(out.model, cache, loss.grad);
      size_t slot = 0;
      std::vector<std::pair<float*, size_t>> params;
      detail::for_each_param(out.model, [&](const std::string&, float* p, size_t n) {
        params.emplace_back(p, n);
      });
      grads.for_each([&](const std::string& name, float* g, size_t n) {
        adam_step(params[slot].first, g, n, adam[slot], static_cast<float>(lr), name);
        ++slot;
      });
    }

    out.report.train_loss.push_back(epoch_loss / static_cast<double>(n_batches));
    out.report.lr.push_back(lr);
    const double vloss =
        detail::validation_loss(out.model, windows, val_idx, cfg.batch_size);
    out.report.val_loss.push_back(vloss);
    if (vloss < out.report.best_val_loss) {
      out.report.best_val_loss = vloss;
      out.report.best_epoch = epoch;
      best = out.model;
      best_meta.epoch = static_cast<uint32_t>(epoch);
      best_meta.val_loss = static_cast<float>(vloss);
    }
  }

  if (out.report.best_epoch >= 0) out.model = std::move(best);
  out.report.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

struct EvalResult {
  std::vector<std::pair<std::string, double>> per_subject;
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Reconstructs each held-out recording through the streaming path
// (batch-equivalent latest-hop mode) and scores it against the reference.
inline EvalResult evaluate_fold(const CleegnModelF& model, const Dataset& dataset,
                                const FoldSpec& fold) {
  EvalResult out;
  for (const auto& id : fold.test_subjects) {
    const auto it = std::find_if(dataset.begin(), dataset.end(),
                                 [&](const SubjectData& s) { return s.id == id; });
    if (it == dataset.end())
      throw std::runtime_error("evaluate_fold: test subject '" + id + "' not in dataset");
    if (it->reference.n_samples == 0)
      throw std::runtime_error("evaluate_fold: subject '" + id + "' has no reference");
    const Recording recon = offline_reconstruct(model, it->noisy, MergePolicy::latest_hop);
    out.per_subject.emplace_back(id, mse_fitness(recon, it->reference).overall);
  }
  const size_t n = out.per_subject.size();
  if (n == 0) throw std::runtime_error("evaluate_fold: fold has no test subjects");
  for (const auto& [id, mse] : out.per_subject) out.mean += mse;
  out.mean /= static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (const auto& [id, mse] : out.per_subject) ss += (mse - out.mean) * (mse - out.mean);
    out.stderr_ = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  }
  return out;
}

enum class AblationAxis { minutes_per_subject, n_subjects };

struct AblationRow {
  double value = 0.0;
  double mean_mse = 0.0;
  double stderr_ = 0.0;
};

// Data-size sweeps. The minutes axis retrains one fold with the recordings
// capped to the first N minutes; the subject-count axis trains on seeded
// random subject subsets (>= `draws` of them) and averages.
inline std::vector<AblationRow> ablation_driver(const Dataset& dataset, AblationAxis axis,
                                                const std::vector<double>& values,
                                                const TrainConfig& cfg, const FoldSpec& fold,
                                                int draws = 3) {
  std::vector<AblationRow> rows;
  if (axis == AblationAxis::minutes_per_subject) {
    double max_minutes = 0.0;
    for (const auto& s : dataset)
      max_minutes = std::max(
          max_minutes, static_cast<double>(s.noisy.n_samples) / (60.0 * static_cast<double>(s.noisy.fs)));
    for (double v : values) {
      if (v > max_minutes)
        throw std::runtime_error("ablation_driver: " + std::to_string(v) +
                                 " minutes exceeds the longest recording (" +
                                 std::to_string(max_minutes) + ")");
      TrainConfig c = cfg;
      c.minutes_per_subject = v;
      const TrainResult tr = train_fold(dataset, fold, c);
      const EvalResult ev = evaluate_fold(tr.model, dataset, fold);
      rows.push_back({v, ev.mean, ev.stderr_});
    }
    return rows;
  }

  std::vector<std::string> all;
  for (const auto& s : dataset) all.push_back(s.id);
  for (double v : values) {
    const int64_t n_train = static_cast<int64_t>(v);
    if (n_train < 1 || n_train >= static_cast<int64_t>(all.size()))
      throw std::runtime_error("ablation_driver: subset of " + std::to_string(n_train) +
                               " subjects impossible with " + std::to_string(all.size()) +
                               " available (need at least one held out)");
    std::vector<double> per_draw;
    for (int d = 0; d < draws; ++d) {
      std::vector<std::string> pool = all;
      Rng rng(mix_seed(cfg.seed, 0xab1a0 + static_cast<uint64_t>(d)));
      rng.shuffle(pool);
      FoldSpec sub;
      sub.fold_id = d;
      sub.train_subjects.assign(pool.begin(), pool.begin() + n_train);
      sub.test_subjects.assign(pool.begin() + n_train, pool.end());
      std::sort(sub.train_subjects.begin(), sub.train_subjects.end());
      std::sort(sub.test_subjects.begin(), sub.test_subjects.end());
      const TrainResult tr = train_fold(dataset, sub, cfg);
      per_draw.push_back(evaluate_fold(tr.model, dataset, sub).mean);
    }
    AblationRow row;
    row.value = v;
    for (double m : per_draw) row.mean_mse += m;
    row.mean_mse /= static_cast<double>(per_draw.size());
    if (per_draw.size() > 1) {
      double ss = 0.0;
      for (double m : per_draw) ss += (m - row.mean_mse) * (m - row.mean_mse);
      row.stderr_ = std::sqrt(ss / static_cast<double>(per_draw.size() - 1)) /
                    std::sqrt(static_cast<double>(per_draw.size()));
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& os) {
  os << "value,mean_mse,stderr\n";
  for (const auto& r : rows) os << r.value << "," << r.mean_mse << "," << r.stderr_ << "\n";
}

}  // namespace cleegn
