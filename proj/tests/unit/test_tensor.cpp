// Copyright 2026 The mfwlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <limits>

#include "mfwlab/error.hpp"
#include "mfwlab/tensor.hpp"

using namespace mfw;

TEST_CASE("construction validates shape and data") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 1.5);
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  CHECK_THROWS(Tensor({0, 3}));
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK_THROWS(t.item());
}

TEST_CASE("row views and gather") {
  Tensor m = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  CHECK(m.row(1)[0] == 3);
  const std::vector<std::size_t> idx{2, 0, 2};
  Tensor g = m.gather_rows(idx);
  CHECK(g.shape() == Shape{3, 2});
  CHECK(g == Tensor::matrix(3, 2, {5, 6, 1, 2, 5, 6}));
}

TEST_CASE("finiteness and fill") {
  Tensor m({2, 2});
  CHECK(m.all_finite());
  m[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(m.all_finite());
  m.fill(2.0);
  CHECK(m.all_finite());
  CHECK(m[3] == 2.0);
}

TEST_CASE("require_matrix reports the offending shape") {
  Tensor v({4});
  CHECK_THROWS_AS(require_matrix(v, 4, "x"), ShapeError);
  Tensor m({2, 4});
  CHECK_NOTHROW(require_matrix(m, 4, "x"));
  CHECK_THROWS_AS(require_matrix(m, 3, "x"), ShapeError);
  CHECK(to_string(Shape{2, 4}) == "[2, 4]");
}
