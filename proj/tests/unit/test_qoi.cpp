#include "ddinfer/qoi.hpp"

#include <doctest.h>

using namespace ddinfer;

TEST_SUITE("qoi") {
  const EnergyMetric metric(Vec((Vec(2) << 1.0, 4.0).finished()));
  const Vec y = (Vec(4) << 1.0, 2.0, 3.0, 4.0).finished();
  const Vec z = (Vec(4) << 0.5, -1.0, 2.0, 8.0).finished();

  TEST_CASE("coordinate quantities read z") {
    CHECK(QuantityOfInterest::one()(y, z, metric) == 1.0);
    CHECK(QuantityOfInterest::sigma(1)(y, z, metric) == 8.0);
    CHECK(QuantityOfInterest::eps(0)(y, z, metric) == 0.5);
    CHECK(QuantityOfInterest::gap()(y, z, metric) == doctest::Approx(metric.norm(y - z)));
    CHECK(QuantityOfInterest::z_norm()(y, z, metric) == doctest::Approx(metric.norm(z)));
  }

  TEST_CASE("boundedness flags") {
    CHECK(QuantityOfInterest::one().bounded());
    CHECK_FALSE(QuantityOfInterest::sigma(0).bounded());
    CHECK_FALSE(QuantityOfInterest::gap().bounded());
    CHECK(QuantityOfInterest::clipped(QuantityOfInterest::gap(), 0.0, 1.0).bounded());
  }

  TEST_CASE("parsing") {
    CHECK(parse_qoi("one").kind() == QoiKind::One);
    CHECK(parse_qoi("sigma[2]")(y, z, metric) == 8.0);
    CHECK(parse_qoi("eps[1]")(y, z, metric) == 0.5);
    CHECK(parse_qoi("gap").kind() == QoiKind::Gap);
    CHECK(parse_qoi("znorm").kind() == QoiKind::ZNorm);
    const auto a = parse_qoi("affine:0,0,0,0,1,0,0,2,0.5");
    CHECK(a(y, z, metric) == doctest::Approx(0.5 + 16.0 + 0.5));
    const auto c = parse_qoi("clip[-1,1]:sigma[2]");
    CHECK(c(y, z, metric) == 1.0);
    CHECK(c.bounded());
    CHECK_THROWS_AS(parse_qoi("sigma[0]"), Error);
    CHECK_THROWS_AS(parse_qoi("bogus"), Error);
    CHECK_THROWS_AS(parse_qoi("clip[2,1]:one"), Error);
    CHECK_THROWS_AS(parse_qoi("affine:1,x"), Error);
  }

  TEST_CASE("polynomial representations agree with evaluation") {
    for (const auto& f : {QuantityOfInterest::one(), QuantityOfInterest::sigma(1), QuantityOfInterest::eps(0),
                          parse_qoi("affine:1,2,3,4,5,6,7,8")}) {
      const auto form = f.affine_form(2);
      REQUIRE(form);
      Vec x(8);
      x << y, z;
      CHECK(form->w.dot(x) + form->c == doctest::Approx(f(y, z, metric)));
      const auto q = f.quadratic_form(2);
      REQUIRE(q);
      CHECK(x.dot(q->m * x) + q->w.dot(x) + q->c == doctest::Approx(f(y, z, metric)));
    }
    CHECK_FALSE(QuantityOfInterest::gap().affine_form(2));
    CHECK_FALSE(QuantityOfInterest::gap().quadratic_form(2));
    CHECK_THROWS(parse_qoi("affine:1,2,3")(y, z, metric));
  }
}
