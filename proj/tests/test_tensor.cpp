#include <catch2/catch_amalgamated.hpp>

#include "cleegn/tensor.hpp"
#include "test_helpers.hpp"

using cleegn::Tensor4;

TEST_CASE("Tensor4 layout and indexing") {
  Tensor4<float> t(2, 3, 4, 5);
  REQUIRE(t.size() == 2 * 3 * 4 * 5);
  REQUIRE(t.all_finite());

  t.at(1, 2, 3, 4) = 7.0f;
  CHECK(t.data[t.data.size() - 1] == 7.0f);
  t.at(0, 0, 0, 1) = 3.0f;
  CHECK(t.data[1] == 3.0f);

  const float* row = t.row(1, 2, 3);
  CHECK(row[4] == 7.0f);
}

TEST_CASE("Tensor4 rejects negative dims") {
  CHECK_THROWS_AS(Tensor4<float>(1, -1, 2, 2), std::invalid_argument);
}

TEST_CASE("permute_hc maps (B,1,T,C) to (B,C,T,1)") {
  Tensor4<float> in(64, 1, 512, 56);
  Tensor4<float> out = cleegn::permute_hc(in);
  CHECK(out.dims == cleegn::Dim4{64, 56, 512, 1});
}

TEST_CASE("permute_hc on a singleton tensor preserves the value") {
  Tensor4<float> in(1, 1, 1, 1);
  in.at(0, 0, 0, 0) = 2.5f;
  Tensor4<float> out = cleegn::permute_hc(in);
  CHECK(out.dims == cleegn::Dim4{1, 1, 1, 1});
  CHECK(out.at(0, 0, 0, 0) == 2.5f);
}

TEST_CASE("permute_hc relabels indices") {
  Tensor4<float> in(1, 1, 4, 5);
  in.at(0, 0, 2, 3) = 7.0f;
  Tensor4<float> out = cleegn::permute_hc(in);
  CHECK(out.at(0, 3, 2, 0) == 7.0f);
}

TEST_CASE("permute_hc requires H == 1") {
  Tensor4<float> in(1, 2, 3, 4);
  CHECK_THROWS_WITH(cleegn::permute_hc(in), Catch::Matchers::ContainsSubstring("height"));
}

TEST_CASE("permute round-trip is the identity") {
  auto in = helpers::random_tensor<float>(3, 1, 17, 9, 42);
  auto back = cleegn::permute_ch(cleegn::permute_hc(in));
  REQUIRE(back.dims == in.dims);
  CHECK(back.data == in.data);

  auto in2 = helpers::random_tensor<float>(2, 11, 6, 1, 43);
  auto back2 = cleegn::permute_hc(cleegn::permute_ch(in2));
  REQUIRE(back2.dims == in2.dims);
  CHECK(back2.data == in2.data);
}
