#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "mkv/io.hpp"
#include "mkv/measure.hpp"
#include "mkv/tilt.hpp"

#include "oracles.hpp"

using namespace mkv;

namespace {

const PotentialSpec& ref_spec() {
    static PotentialSpec s = make_quartic(0.25, -0.5, 1.5, 4.0);
    return s;
}

const Grid& ref_grid() {
    static Grid g(400, 4.0);
    return g;
}

GridMeasure random_dense(const Grid& grid, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> w(grid.n);
    for (double& x : w) x = u(rng);
    return normalized(grid, std::move(w));
}

std::filesystem::path temp_file(const char* stem) {
    static int counter = 0;
    return std::filesystem::temp_directory_path() /
           (std::string(stem) + "_" + std::to_string(counter++) + ".bin");
}

}  // namespace

TEST_SUITE("measure") {

TEST_CASE("grid centers negate in pairs and bad grids are rejected") {
    Grid g(400, 4.0);
    for (std::size_t i = 0; i < g.n; ++i) CHECK(g.center(g.n - 1 - i) == -g.center(i));
    CHECK(g.left_edge(0) == doctest::Approx(-4.0).epsilon(1e-15));
    CHECK_THROWS_AS(Grid(15, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(Grid(8, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(Grid(16, -1.0), std::invalid_argument);
}

TEST_CASE("mass validation") {
    Grid g(16, 1.0);
    std::vector<double> ok(16, 1.0 / 16.0);
    CHECK_NOTHROW(from_masses(g, ok));
    std::vector<double> neg = ok;
    neg[3] = -0.01;
    CHECK_THROWS_AS(from_masses(g, neg), std::invalid_argument);
    std::vector<double> off = ok;
    off[0] += 1e-6;
    CHECK_THROWS_AS(from_masses(g, off), std::invalid_argument);
    GridMeasure mu = normalized(g, std::vector<double>(16, 3.7));
    double total = 0.0;
    for (double p : mu.p) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-13);
}

TEST_CASE("moments of simple measures") {
    const Grid& g = ref_grid();
    GridMeasure sym = normalized(g, std::vector<double>(g.n, 1.0));
    CHECK(std::abs(mean(sym)) <= 1e-12);

    std::vector<double> w(g.n, 0.0);
    w[123] = 1.0;
    GridMeasure pt = from_masses(g, w);
    CHECK(mean(pt) == g.center(123));
    CHECK(second_moment(pt) == doctest::Approx(g.center(123) * g.center(123)));
    CHECK(variance(pt) == doctest::Approx(0.0).epsilon(1e-15));

    GridMeasure gauss = gaussian_init(g, 0.3, 0.5);
    CHECK(mean(gauss) == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(second_moment(gauss) == doctest::Approx(0.5 + 0.09).epsilon(1e-4));
    CHECK(variance(gauss) == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("gaussian_init guards its truncation window") {
    const Grid& g = ref_grid();
    CHECK_THROWS_AS(gaussian_init(g, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_init(g, 0.0, -0.3), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_init(g, 0.0, 1.0), std::invalid_argument);   // 4 sigma hits L
    CHECK_THROWS_AS(gaussian_init(g, 3.9, 0.01), std::invalid_argument);

    Grid wide(400, 8.0);
    GridMeasure mu = gaussian_init(wide, 0.0, 1.0);
    CHECK(mean(mu) == 0.0);
    CHECK(second_moment(mu) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("gaussian_init commutes with reflection bitwise") {
    const Grid& g = ref_grid();
    GridMeasure a = gaussian_init(g, 0.7, 0.3);
    GridMeasure b = gaussian_init(g, -0.7, 0.3);
    CHECK(reflect(a).p == b.p);
    GridMeasure even = gaussian_init(g, 0.0, 0.45);
    CHECK(reflect(even).p == even.p);
}

TEST_CASE("reflection is an exact involution") {
    std::mt19937_64 rng(11);
    GridMeasure mu = random_dense(ref_grid(), rng);
    GridMeasure r = reflect(mu);
    CHECK(reflect(r).p == mu.p);
    CHECK(mean(r) == -mean(mu));
    CHECK(free_energy(ref_spec(), r) == free_energy(ref_spec(), mu));
    CHECK(metric_slope_sq(ref_spec(), r) == metric_slope_sq(ref_spec(), mu));
}

TEST_CASE("from_samples bins points and converges to the sampled law") {
    const Grid& g = ref_grid();
    GridMeasure one = from_samples(g, {0.5});
    double total = 0.0;
    std::size_t charged = 0;
    for (std::size_t i = 0; i < g.n; ++i) {
        total += one.p[i];
        if (one.p[i] > 0.0) ++charged;
    }
    CHECK(charged == 1);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(mean(one) - 0.5) <= g.dz);

    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd(0.3, std::sqrt(0.5));
    std::vector<double> pts(1000000);
    for (double& x : pts) x = nd(rng);
    GridMeasure emp = from_samples(g, pts);
    CHECK(wasserstein2(emp, gaussian_init(g, 0.3, 0.5)) <= 0.01);
}

TEST_CASE("wasserstein2 on explicit cases") {
    const Grid& g = ref_grid();
    GridMeasure mu = gaussian_init(g, 0.3, 0.5);
    CHECK(wasserstein2(mu, mu) == 0.0);

    std::vector<double> wa(g.n, 0.0), wb(g.n, 0.0);
    wa[100] = 1.0;
    wb[300] = 1.0;
    double d = std::abs(g.center(300) - g.center(100));
    CHECK(wasserstein2(from_masses(g, wa), from_masses(g, wb)) ==
          doctest::Approx(d).epsilon(1e-14));
}

TEST_CASE("wasserstein2 matches the monotone-coupling oracle on sparse measures") {
    const Grid& g = ref_grid();
    std::mt19937_64 rng(314);
    std::uniform_int_distribution<std::size_t> cell(0, g.n - 1);
    std::uniform_real_distribution<double> wu(0.1, 1.0);
    std::uniform_int_distribution<int> na(1, 8);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> pa(g.n, 0.0), pb(g.n, 0.0);
        std::vector<double> xa, wa, xb, wb;
        for (int k = na(rng); k > 0; --k) {
            std::size_t i = cell(rng);
            double w = wu(rng);
            pa[i] += w;
            xa.push_back(g.center(i));
            wa.push_back(w);
        }
        for (int k = na(rng); k > 0; --k) {
            std::size_t i = cell(rng);
            double w = wu(rng);
            pb[i] += w;
            xb.push_back(g.center(i));
            wb.push_back(w);
        }
        double got = wasserstein2(normalized(g, pa), normalized(g, pb));
        double want = oracle::nw_w2(xa, wa, xb, wb);
        CHECK(std::abs(got - want) <= 1e-10);
        CHECK(std::abs(wasserstein2_atoms(xa, wa, xb, wb) - want) <= 1e-10);
    }
}

TEST_CASE("free energy of the uniform density on the middle half") {
    const Grid& g = ref_grid();
    std::vector<double> w(g.n, 0.0);
    for (std::size_t i = 150; i <= 249; ++i) w[i] = 1.0;
    GridMeasure mu = normalized(g, std::move(w));
    PotentialSpec flat = oracle::flat_spec(4.0);
    CHECK(free_energy(flat, mu) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("free energy agrees with its direct evaluation") {
    std::mt19937_64 rng(8);
    for (int k = 0; k < 5; ++k) {
        GridMeasure mu = random_dense(ref_grid(), rng);
        CHECK(free_energy(ref_spec(), mu) ==
              doctest::Approx(oracle::free_energy_direct(ref_spec(), mu)).epsilon(1e-12));
    }
}

TEST_CASE("free energy dominates the calibrated growth bound") {
    // entropy >= -log(2L) and the growth offset make
    // F >= c (M4 - 1) a crude but strict lower bound for this potential.
    std::mt19937_64 rng(99);
    const PotentialSpec& s = ref_spec();
    for (int k = 0; k < 20; ++k) {
        GridMeasure mu = random_dense(ref_grid(), rng);
        double m4 = 0.0;
        for (std::size_t i = 0; i < mu.grid.n; ++i) {
            double z = mu.grid.center(i);
            m4 += mu.p[i] * z * z * z * z;
        }
        CHECK(free_energy(s, mu) >= s.c_growth * (m4 - 1.0));
    }
}

TEST_CASE("relative entropy basics") {
    std::mt19937_64 rng(17);
    GridMeasure mu = random_dense(ref_grid(), rng);
    CHECK(relative_entropy(mu, mu) == 0.0);
    for (int k = 0; k < 20; ++k) {
        GridMeasure a = random_dense(ref_grid(), rng);
        GridMeasure b = random_dense(ref_grid(), rng);
        CHECK(relative_entropy(a, b) >= 0.0);
    }
    std::vector<double> w(ref_grid().n, 0.0);
    w[10] = 1.0;
    GridMeasure pt = from_masses(ref_grid(), w);
    CHECK(std::isinf(relative_entropy(mu, pt)));
}

TEST_CASE("free energy splits into a mean part plus relative entropy") {
    // With q the exponentially tilted grid measure at sigma and m the mean of
    // mu, F(mu) - KL(mu || q) collapses to sigma m - log(sum exp(sigma z - psi) dz)
    // - (j/2) m^2 identically; at sigma = phi'(m) that is the grid analogue of
    // the effective free energy at m.
    const PotentialSpec& s = ref_spec();
    const Grid& g = ref_grid();
    GridMeasure mu = gaussian_init(g, 0.3, 0.5);
    double m = mean(mu);
    double sigma = legendre(s, m).dphi;
    GridMeasure q = tilted_measure(s, sigma, g);
    double part = 0.0;
    for (std::size_t i = 0; i < g.n; ++i)
        part += std::exp(sigma * g.center(i) - s.psi(g.center(i)));
    double hbar_grid = sigma * m - std::log(part * g.dz) - 0.5 * s.j * m * m;
    double lhs = free_energy(s, mu) - relative_entropy(mu, q);
    CHECK(std::abs(lhs - hbar_grid) <= 1e-9);
}

TEST_CASE("metric slope reference values") {
    const PotentialSpec& s = ref_spec();
    StationaryTriple triple = stationary_triple(s, ref_grid());
    CHECK(metric_slope_sq(s, triple.mu_plus) ==
          doctest::Approx(3.2751272938509712e-07).epsilon(1e-12));
    CHECK(metric_slope_sq(s, triple.mu_minus) == metric_slope_sq(s, triple.mu_plus));

    // For a pure Gaussian under no potential the slope is the Fisher
    // information 1/v.
    PotentialSpec flat = oracle::flat_spec(4.0);
    GridMeasure gauss = gaussian_init(ref_grid(), 0.0, 0.5);
    CHECK(metric_slope_sq(flat, gauss) == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("mkv1 files round-trip exactly") {
    GridMeasure mu = gaussian_init(ref_grid(), -0.4, 0.33);
    auto path = temp_file("mkv_roundtrip");
    write_mkv1(path.string(), mu);
    GridMeasure back = read_mkv1(path.string());
    CHECK(back.grid == mu.grid);
    CHECK(back.p == mu.p);

    std::ofstream os(path, std::ios::binary | std::ios::app);
    os.put('\0');
    os.close();
    CHECK_THROWS_AS(read_mkv1(path.string()), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("measure CSV uses dotted 17-digit values that parse back exactly") {
    GridMeasure mu = gaussian_init(ref_grid(), 0.123456789, 0.37);
    auto path = temp_file("mkv_csv");
    write_measure_csv(path.string(), mu);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "z,p");
    std::size_t i = 0;
    std::string line;
    while (std::getline(is, line)) {
        CHECK(line.find(';') == std::string::npos);
        auto comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        double z = std::stod(line.substr(0, comma));
        double p = std::stod(line.substr(comma + 1));
        CHECK(z == mu.grid.center(i));
        CHECK(p == mu.p[i]);
        ++i;
    }
    CHECK(i == mu.grid.n);
    std::filesystem::remove(path);
}

TEST_CASE("fmt17 round-trips and file hashing is stable") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int k = 0; k < 100; ++k) {
        double x = u(rng);
        CHECK(std::stod(fmt17(x)) == x);
    }
    CHECK(fmt17(0.1).find('.') != std::string::npos);

    auto pa = temp_file("mkv_hash_a");
    auto pb = temp_file("mkv_hash_b");
    std::ofstream(pa) << "alpha";
    std::ofstream(pb) << "alpha";
    CHECK(file_hash_hex(pa.string()) == file_hash_hex(pb.string()));
    std::ofstream(pb, std::ios::trunc) << "beta";
    CHECK(file_hash_hex(pa.string()) != file_hash_hex(pb.string()));
    std::filesystem::remove(pa);
    std::filesystem::remove(pb);
}

}
