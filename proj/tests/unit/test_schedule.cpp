#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "dualopt/schedule.hpp"

using namespace dualopt;

TEST_CASE("objective pattern for forget 1 retain 5") {
  const AlternationSchedule s{1, 5, 12};
  const Objective expected[12] = {Objective::Forget, Objective::Retain, Objective::Retain,
                                  Objective::Retain, Objective::Retain, Objective::Retain,
                                  Objective::Forget, Objective::Retain, Objective::Retain,
                                  Objective::Retain, Objective::Retain, Objective::Retain};
  for (std::int64_t t = 1; t <= 12; ++t) {
    CHECK(objective_at(s, t) == expected[t - 1]);
  }
}

TEST_CASE("strict alternation at period two") {
  const AlternationSchedule s{1, 1, 10};
  for (std::int64_t t = 1; t <= 10; ++t) {
    CHECK(objective_at(s, t) == (t % 2 == 1 ? Objective::Forget : Objective::Retain));
  }
}

TEST_CASE("retain-free schedule always forgets") {
  const AlternationSchedule s{2, 0, 9};
  for (std::int64_t t = 1; t <= 9; ++t) {
    CHECK(objective_at(s, t) == Objective::Forget);
  }
}

TEST_CASE("every period contains exactly the forget frequency, exhaustively") {
  for (std::int64_t ff = 1; ff <= 64; ++ff) {
    for (std::int64_t fr = 0; ff + fr <= 64; ++fr) {
      const std::int64_t period = ff + fr;
      const AlternationSchedule s{ff, fr, 3 * period};
      for (std::int64_t p = 0; p < 3; ++p) {
        std::int64_t forgets = 0;
        for (std::int64_t k = 1; k <= period; ++k) {
          if (objective_at(s, p * period + k) == Objective::Forget) forgets += 1;
        }
        REQUIRE(forgets == ff);
      }
    }
  }
}

TEST_CASE("objective_at validates its domain") {
  const AlternationSchedule s{1, 5, 12};
  CHECK_THROWS_AS(objective_at(s, 0), std::out_of_range);
  CHECK_THROWS_AS(objective_at(s, 13), std::out_of_range);
  CHECK_THROWS_AS(objective_at(AlternationSchedule{0, 5, 10}, 1), std::invalid_argument);
  CHECK_THROWS_AS(objective_at(AlternationSchedule{1, -1, 10}, 1), std::invalid_argument);
}

TEST_CASE("learning rate ramps to peak then decays to zero") {
  const LrSchedule s{1e-2, 10, 100};
  CHECK(lr_at(s, 1) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(lr_at(s, 10) == doctest::Approx(1e-2).epsilon(1e-12));
  CHECK(lr_at(s, 100) == doctest::Approx(0.0).epsilon(1e-12));
  // Decay is linear between peak and the end.
  CHECK(lr_at(s, 55) == doctest::Approx(1e-2 * 45.0 / 90.0).epsilon(1e-12));
}

TEST_CASE("zero warmup starts at peak") {
  const LrSchedule s{2.0, 0, 5};
  CHECK(lr_at(s, 1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(lr_at(s, 5) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("warmup covering the whole run is a pure ramp") {
  const LrSchedule s{1.0, 8, 8};
  for (std::int64_t t = 1; t <= 8; ++t) {
    CHECK(lr_at(s, t) == doctest::Approx(static_cast<double>(t) / 8.0).epsilon(1e-12));
  }
  CHECK(lr_at(s, 8) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero peak gives zero learning rate everywhere") {
  const LrSchedule s{0.0, 3, 10};
  for (std::int64_t t = 1; t <= 10; ++t) {
    CHECK(lr_at(s, t) == 0.0);
  }
}

TEST_CASE("learning rate is continuous at the warmup boundary") {
  for (std::int64_t warmup : {1, 3, 7, 50}) {
    const LrSchedule s{0.37, warmup, 100};
    const double at_boundary = lr_at(s, warmup);
    const double after = lr_at(s, warmup + 1);
    // One step past the boundary moves by at most one decay increment.
    const double slope = 0.37 / static_cast<double>(100 - std::max<std::int64_t>(warmup, 1));
    CHECK(std::fabs(at_boundary - 0.37) < 1e-12);
    CHECK(std::fabs((at_boundary - after) - slope) < 1e-12);
  }
}

TEST_CASE("lr_at validates its domain") {
  const LrSchedule s{1e-2, 0, 10};
  CHECK_THROWS_AS(lr_at(s, 0), std::out_of_range);
  CHECK_THROWS_AS(lr_at(s, 11), std::out_of_range);
  CHECK_THROWS_AS(lr_at(LrSchedule{-1.0, 0, 10}, 1), std::invalid_argument);
}
