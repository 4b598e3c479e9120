#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "cleegn/harness.hpp"
#include "cleegn/synth.hpp"
#include "test_helpers.hpp"

using cleegn::Dataset;
using cleegn::FoldSpec;
using cleegn::SynthSpec;
using cleegn::TrainConfig;

namespace {

Dataset synth_dataset(int subjects, double seconds, int64_t channels = 4, float fs = 64.0f,
                      uint64_t seed = 100) {
  Dataset out;
  for (int i = 0; i < subjects; ++i) {
    SynthSpec spec;
    spec.channels = channels;
    spec.fs = fs;
    spec.duration_sec = seconds;
    spec.seed = cleegn::mix_seed(seed, static_cast<uint64_t>(i));
    auto [noisy, clean] = cleegn::synth_subject(spec);
    cleegn::SubjectData s;
    s.id = "s" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1);
    noisy.subject_id = s.id;
    clean.subject_id = s.id;
    s.noisy = std::move(noisy);
    s.reference = std::move(clean);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> ids(const Dataset& data) {
  std::vector<std::string> out;
  for (const auto& s : data) out.push_back(s.id);
  return out;
}

TrainConfig quick_config(uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("make_folds splits 4 subjects into 2 disjoint covering folds") {
  auto folds = cleegn::make_folds({"a", "b", "c", "d"}, 2, 7);
  REQUIRE(folds.size() == 2);
  std::set<std::string> seen;
  for (const auto& f : folds) {
    CHECK(f.test_subjects.size() == 2);
    CHECK(f.train_subjects.size() == 2);
    for (const auto& s : f.test_subjects) CHECK(seen.insert(s).second);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("make_folds with k equal to the subject count is leave-one-out") {
  std::vector<std::string> subjects;
  for (int i = 0; i < 16; ++i) subjects.push_back("s" + std::to_string(i));
  auto folds = cleegn::make_folds(subjects, 16, 3);
  REQUIRE(folds.size() == 16);
  for (const auto& f : folds) {
    CHECK(f.test_subjects.size() == 1);
    CHECK(f.train_subjects.size() == 15);
  }
}

TEST_CASE("make_folds is deterministic per seed and validates k") {
  std::vector<std::string> subjects;
  for (int i = 0; i < 16; ++i) subjects.push_back("s" + std::to_string(i));
  auto a = cleegn::make_folds(subjects, 4, 11);
  auto b = cleegn::make_folds(subjects, 4, 11);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].test_subjects == b[i].test_subjects);
    CHECK(a[i].train_subjects == b[i].train_subjects);
  }
  CHECK_THROWS_AS(cleegn::make_folds(subjects, 1, 0), std::runtime_error);
  CHECK_THROWS_AS(cleegn::make_folds(subjects, 17, 0), std::runtime_error);
}

TEST_CASE("identity task converges below 1 percent of input variance") {
  Dataset data = synth_dataset(2, 120.0);
  for (auto& s : data) s.reference = s.noisy;  // reference = noisy

  FoldSpec fold;
  fold.fold_id = 0;
  fold.train_subjects = ids(data);

  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.epochs = 40;
  cfg.seed = 5;
  auto result = cleegn::train_fold(data, fold, cfg);

  double var = 0.0;
  int64_t n = 0;
  for (const auto& s : data) {
    for (double v : s.noisy.samples) var += v * v;
    n += static_cast<int64_t>(s.noisy.samples.size());
  }
  var /= static_cast<double>(n);
  CAPTURE(result.report.best_val_loss, var);
  CHECK(result.report.best_val_loss < 0.01 * var);
}

TEST_CASE("lr0 = 0 leaves parameters untouched and the val loss constant") {
  Dataset data = synth_dataset(2, 40.0);
  FoldSpec fold;
  fold.train_subjects = ids(data);

  TrainConfig cfg = quick_config(9);
  cfg.lr0 = 0.0;
  cfg.epochs = 4;
  auto result = cleegn::train_fold(data, fold, cfg);

  auto fresh = cleegn::build_model<float>(result.model.config, cleegn::mix_seed(9, 0x1217));
  CHECK(result.model.enc_spatial.weights.data == fresh.enc_spatial.weights.data);
  CHECK(result.model.dec_out.weights.data == fresh.dec_out.weights.data);
  CHECK(result.model.bn2.gamma == fresh.bn2.gamma);
  for (double v : result.report.val_loss) CHECK(v == result.report.val_loss[0]);
}

TEST_CASE("training is deterministic per seed") {
  Dataset data = synth_dataset(2, 40.0);
  FoldSpec fold;
  fold.train_subjects = ids(data);

  auto r1 = cleegn::train_fold(data, fold, quick_config(21));
  auto r2 = cleegn::train_fold(data, fold, quick_config(21));
  CHECK(r1.report.train_loss == r2.report.train_loss);
  CHECK(r1.report.val_loss == r2.report.val_loss);
  CHECK(r1.model.dec_out.weights.data == r2.model.dec_out.weights.data);

  auto r3 = cleegn::train_fold(data, fold, quick_config(22));
  CHECK(r1.report.train_loss != r3.report.train_loss);
}

TEST_CASE("no window from a test subject enters training") {
  Dataset data = synth_dataset(3, 40.0);
  FoldSpec bad;
  bad.train_subjects = {"s01", "s02"};
  bad.test_subjects = {"s02", "s03"};  // overlap on purpose
  CHECK_THROWS_WITH(cleegn::train_fold(data, bad, quick_config()),
                    Catch::Matchers::ContainsSubstring("leaked"));
}

TEST_CASE("epochs = 0 returns the initialized model and empty curves") {
  Dataset data = synth_dataset(2, 40.0);
  FoldSpec fold;
  fold.train_subjects = ids(data);
  TrainConfig cfg = quick_config(31);
  cfg.epochs = 0;
  auto result = cleegn::train_fold(data, fold, cfg);
  CHECK(result.report.train_loss.empty());
  CHECK(result.report.val_loss.empty());
  CHECK(result.report.best_epoch == -1);
  auto fresh = cleegn::build_model<float>(result.model.config, cleegn::mix_seed(31, 0x1217));
  CHECK(result.model.enc_spatial.weights.data == fresh.enc_spatial.weights.data);
}

TEST_CASE("saved checkpoint attains the reported best validation loss") {
  Dataset data = synth_dataset(2, 60.0);
  FoldSpec fold;
  fold.train_subjects = ids(data);
  TrainConfig cfg = quick_config(41);
  cfg.epochs = 5;
  auto result = cleegn::train_fold(data, fold, cfg);
  const double recomputed =
      cleegn::recompute_validation_loss(result.model, data, fold, cfg);
  CHECK_THAT(recomputed, Catch::Matchers::WithinAbs(result.report.best_val_loss, 1e-6));
}

TEST_CASE("evaluate_fold with an identity model scores MSE(noisy, reference) exactly") {
  Dataset data = synth_dataset(3, 30.0);
  FoldSpec fold;
  fold.train_subjects = {"s01", "s02"};
  fold.test_subjects = {"s03"};

  auto identity = helpers::identity_model(cleegn::make_config(4, 64.0f));
  auto eval = cleegn::evaluate_fold(identity, data, fold);
  REQUIRE(eval.per_subject.size() == 1);
  const auto direct = cleegn::mse_fitness(data[2].noisy, data[2].reference);
  CHECK(eval.per_subject[0].second == direct.overall);
}

TEST_CASE("evaluate_fold reports mean and standard error across subjects") {
  Dataset data = synth_dataset(4, 30.0);
  FoldSpec fold;
  fold.train_subjects = {"s01"};
  fold.test_subjects = {"s02", "s03", "s04"};
  auto identity = helpers::identity_model(cleegn::make_config(4, 64.0f));
  auto eval = cleegn::evaluate_fold(identity, data, fold);
  REQUIRE(eval.per_subject.size() == 3);
  double mean = 0.0;
  for (auto& [id, m] : eval.per_subject) mean += m;
  mean /= 3.0;
  CHECK_THAT(eval.mean, Catch::Matchers::WithinRel(mean, 1e-12));
  CHECK(eval.stderr_ > 0.0);
}

TEST_CASE("evaluate_fold rejects a test subject missing from the dataset") {
  Dataset data = synth_dataset(2, 30.0);
  FoldSpec fold;
  fold.test_subjects = {"nope"};
  auto identity = helpers::identity_model(cleegn::make_config(4, 64.0f));
  CHECK_THROWS_WITH(cleegn::evaluate_fold(identity, data, fold),
                    Catch::Matchers::ContainsSubstring("nope"));
}

TEST_CASE("ablation over full minutes equals a plain fold evaluation") {
  Dataset data = synth_dataset(3, 40.0);
  auto folds = cleegn::make_folds(ids(data), 3, 2);
  TrainConfig cfg = quick_config(51);
  auto rows = cleegn::ablation_driver(data, cleegn::AblationAxis::minutes_per_subject, {0.0},
                                      cfg, folds[0]);
  REQUIRE(rows.size() == 1);
  auto direct = cleegn::train_fold(data, folds[0], cfg);
  auto eval = cleegn::evaluate_fold(direct.model, data, folds[0]);
  CHECK(rows[0].mean_mse == eval.mean);
}

TEST_CASE("ablation over subject counts draws at least three subsets") {
  Dataset data = synth_dataset(4, 40.0);
  TrainConfig cfg = quick_config(61);
  cfg.epochs = 1;
  auto folds = cleegn::make_folds(ids(data), 2, 1);
  auto rows =
      cleegn::ablation_driver(data, cleegn::AblationAxis::n_subjects, {2.0}, cfg, folds[0], 3);
  REQUIRE(rows.size() == 1);
  CHECK(std::isfinite(rows[0].mean_mse));
  CHECK(rows[0].stderr_ >= 0.0);
}

TEST_CASE("ablation rejects values beyond the available data") {
  Dataset data = synth_dataset(3, 40.0);
  TrainConfig cfg = quick_config(71);
  auto folds = cleegn::make_folds(ids(data), 3, 1);
  CHECK_THROWS_WITH(cleegn::ablation_driver(data, cleegn::AblationAxis::minutes_per_subject,
                                            {30.0}, cfg, folds[0]),
                    Catch::Matchers::ContainsSubstring("exceeds"));
  CHECK_THROWS_WITH(
      cleegn::ablation_driver(data, cleegn::AblationAxis::n_subjects, {3.0}, cfg, folds[0]),
      Catch::Matchers::ContainsSubstring("held out"));
}

TEST_CASE("epoch-1 training loss does not exceed epoch-0 loss for most seeds") {
  Dataset data = synth_dataset(2, 60.0);
  FoldSpec fold;
  fold.train_subjects = ids(data);
  int ok = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 32;
    cfg.lr0 = 1e-4;
    cfg.seed = seed;
    auto r = cleegn::train_fold(data, fold, cfg);
    if (r.report.train_loss[1] <= r.report.train_loss[0]) ++ok;
  }
  CHECK(ok >= 18);
}

TEST_CASE("load_dataset_dir pairs noisy with clean recordings") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "cleegn_ds_test";
  fs::create_directories(dir);
  Dataset data = synth_dataset(2, 10.0);
  for (const auto& s : data) {
    cleegn::save_recording_file(s.noisy, (dir / (s.id + "_noisy.eegr")).string());
    cleegn::save_recording_file(s.reference, (dir / (s.id + "_clean.eegr")).string());
  }
  Dataset loaded = cleegn::load_dataset_dir(dir.string());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].id == "s01");
  CHECK(loaded[0].noisy.samples == data[0].noisy.samples);
  CHECK(loaded[1].reference.samples == data[1].reference.samples);
  fs::remove_all(dir);
}
