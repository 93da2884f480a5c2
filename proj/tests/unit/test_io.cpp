#include "ddinfer/io.hpp"
#include "ddinfer/network.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>

using namespace ddinfer;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "ddinfer_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("grid datasets round-trip bit-exactly") {
    const auto net = testing::random_network(1, 1, 3);
    const SlidingGaussianDensity d(net.coeffs, net.noise);
    const auto m = discretize(d, (Vec(2) << 0.3, 0.7).finished(), 1.0, classical_solution(net).state);
    const auto path = scratch("grid.csv");
    write_dataset(path, m, "test");
    const auto r = read_dataset(path);
    CHECK(r.points == m.points);
    CHECK(r.weights == m.weights);
    REQUIRE(r.meta);
    CHECK(r.meta->eps_h == m.meta->eps_h);
    CHECK(r.meta->c_star == m.meta->c_star);
    REQUIRE(r.partition);
    CHECK(r.partition->size() == m.partition->size());
    CHECK(r.reference_mass == m.reference_mass);
    for (std::size_t a = 0; a < m.size(); a += 5)
      CHECK(r.partition->locate(Vec(m.points.col(static_cast<Eigen::Index>(a)))) == std::optional<std::size_t>(a));
    const auto e = constraint_subspace(net);
    CHECK(verify_partition_assumptions(r, d, e, 100, 1).ok());
  }

  TEST_CASE("header and row count") {
    const auto net = testing::single_edge();
    const SlidingGaussianDensity d(net.coeffs, net.noise);
    const auto m = discretize(d, Vec::Constant(1, 1.0), 1.5, classical_solution(net).state);
    const auto path = scratch("nine.csv");
    write_dataset(path, m);
    const std::string text = read_text(path);
    CHECK(text.rfind("eps_1,sigma_1,weight\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 10);
    CHECK(std::filesystem::exists(meta_path(path)));
  }

  TEST_CASE("plain datasets without metadata") {
    const auto path = scratch("plain.csv");
    write_text(path, "eps_1,sigma_1,weight\n0.5,1,0.25\n1,1,0.75\n");
    std::filesystem::remove(meta_path(path));
    const auto m = read_dataset(path);
    CHECK(m.size() == 2);
    CHECK(m.total_weight() == 1.0);
    CHECK_FALSE(m.meta);
  }

  TEST_CASE("malformed datasets") {
    const auto path = scratch("bad.csv");
    std::filesystem::remove(meta_path(path));
    write_text(path, "");
    CHECK_THROWS_AS(read_dataset(path), Error);
    write_text(path, "eps_1,sigma_1,weight\n");
    try {
      read_dataset(path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidArgument);
    }
    write_text(path, "eps_1,sigma_1,weight\n1,x,1\n");
    CHECK_THROWS_AS(read_dataset(path), Error);
    write_text(path, "eps_1,sigma_1,weight\n1,1\n");
    CHECK_THROWS_AS(read_dataset(path), Error);
    write_text(path, "a,b\n1,1\n");
    CHECK_THROWS_AS(read_dataset(path), Error);
  }

  TEST_CASE("round-trip formatting") {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 5e-324}) CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
}
