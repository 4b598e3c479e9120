#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <sstream>

#include "cleegn/recording.hpp"
#include "cleegn/rng.hpp"

using cleegn::Recording;

namespace {

Recording sample_recording(uint64_t seed = 1) {
  Recording rec(3, 100, 128.0f);
  rec.channel_names = {"Fp1", "Cz", "O2"};
  rec.subject_id = "s01";
  rec.kind = cleegn::RecordingKind::reference;
  cleegn::Rng rng(seed);
  for (auto& v : rec.samples) v = static_cast<float>(rng.uniform(-80, 80));
  return rec;
}

}  // namespace

TEST_CASE("EEGR binary round-trip is bit-exact") {
  const Recording rec = sample_recording();
  std::ostringstream os(std::ios::binary);
  cleegn::save_recording(rec, os);
  std::istringstream is(os.str(), std::ios::binary);
  const Recording back = cleegn::load_recording(is);
  CHECK(back.channel_names == rec.channel_names);
  CHECK(back.fs == rec.fs);
  CHECK(back.kind == rec.kind);
  CHECK(back.samples == rec.samples);
}

TEST_CASE("EEGR rejects bad magic and truncation with a location") {
  std::istringstream bad("CLGNxxxxxxxx", std::ios::binary);
  CHECK_THROWS_WITH(cleegn::load_recording(bad), Catch::Matchers::ContainsSubstring("magic"));

  std::ostringstream os(std::ios::binary);
  cleegn::save_recording(sample_recording(), os);
  const std::string bytes = os.str();
  std::istringstream cut(bytes.substr(0, bytes.size() / 3), std::ios::binary);
  CHECK_THROWS_WITH(cleegn::load_recording(cut), Catch::Matchers::ContainsSubstring("offset"));
}

TEST_CASE("EEGR rejects non-finite samples naming frame and channel") {
  Recording rec = sample_recording();
  rec.at(1, 7) = std::numeric_limits<float>::quiet_NaN();
  std::ostringstream os(std::ios::binary);
  cleegn::save_recording(rec, os);
  std::istringstream is(os.str(), std::ios::binary);
  CHECK_THROWS_WITH(cleegn::load_recording(is),
                    Catch::Matchers::ContainsSubstring("frame 7") &&
                        Catch::Matchers::ContainsSubstring("Cz"));
}

TEST_CASE("CSV header t,Fp1,Cz with three rows loads as C=2, T=3") {
  std::istringstream is("t,Fp1,Cz\n0,1.5,-2\n0.0078125,2.5,0\n0.015625,3.5,2\n");
  const Recording rec = cleegn::load_recording_csv(is);
  CHECK(rec.channels() == 2);
  CHECK(rec.n_samples == 3);
  CHECK(rec.channel_names == std::vector<std::string>{"Fp1", "Cz"});
  CHECK_THAT(rec.fs, Catch::Matchers::WithinRel(128.0f, 1e-4f));
  CHECK(rec.at(0, 2) == 3.5f);
  CHECK(rec.at(1, 0) == -2.0f);
}

TEST_CASE("CSV round-trip is exact at printed precision") {
  const Recording rec = sample_recording();
  std::ostringstream os;
  cleegn::save_recording_csv(rec, os);
  std::istringstream is(os.str());
  const Recording back = cleegn::load_recording_csv(is);
  REQUIRE(back.n_samples == rec.n_samples);
  CHECK(back.samples == rec.samples);  // %.9g reproduces binary32 exactly
}

TEST_CASE("CSV rejects NaN naming row and column") {
  std::istringstream is("t,a,b\n0,1,2\n0.5,nan,2\n");
  CHECK_THROWS_WITH(cleegn::load_recording_csv(is),
                    Catch::Matchers::ContainsSubstring("row 3") &&
                        Catch::Matchers::ContainsSubstring("column a"));
}

TEST_CASE("CSV rejects ragged rows") {
  std::istringstream is("t,a,b\n0,1,2\n0.5,1\n");
  CHECK_THROWS_WITH(cleegn::load_recording_csv(is),
                    Catch::Matchers::ContainsSubstring("row 3"));
}

TEST_CASE("event CSV loads strictly increasing timestamps") {
  std::istringstream is("sample,label\n10,1\n250,0\n300,1\n");
  const auto ev = cleegn::load_events_csv(is);
  REQUIRE(ev.events.size() == 3);
  CHECK(ev.events[1] == std::make_pair(int64_t(250), 0));

  std::istringstream bad("sample,label\n10,1\n10,0\n");
  CHECK_THROWS_WITH(cleegn::load_events_csv(bad),
                    Catch::Matchers::ContainsSubstring("increasing"));
}
