#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "msmetr/rng.hpp"
#include "msmetr/tensor.hpp"

using namespace msmetr;
using Eigen::Index;

namespace {

Tensor random_tensor(const std::vector<Index>& shape, Rng& rng) {
    Tensor t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = rng.normal();
    return t;
}

FactorSet random_factors(Index rank, const std::vector<Index>& shape, Rng& rng) {
    std::vector<Tensor> factors;
    for (Index d = 0; d < rank; ++d)
        for (std::size_t m = 0; m < shape.size(); ++m) factors.push_back(random_tensor(shape, rng));
    return FactorSet(rank, static_cast<Index>(shape.size()), std::move(factors));
}

// Brute-force <a, b> by explicit multi-index iteration.
double inner_product_loops(const Tensor& a, const Tensor& b) {
    std::vector<Index> idx(static_cast<std::size_t>(a.order()), 0);
    double acc = 0.0;
    for (Index flat = 0; flat < a.size(); ++flat) {
        Index computed = 0, stride = 1;
        for (Index m = 0; m < a.order(); ++m) {
            computed += idx[static_cast<std::size_t>(m)] * stride;
            stride *= a.dim(m);
        }
        acc += a[computed] * b[computed];
        for (Index m = 0; m < a.order(); ++m) {
            if (++idx[static_cast<std::size_t>(m)] < a.dim(m)) break;
            idx[static_cast<std::size_t>(m)] = 0;
        }
    }
    return acc;
}

Tensor identity2x2() {
    Tensor t({2, 2});
    t.at({0, 0}) = 1.0;
    t.at({1, 1}) = 1.0;
    return t;
}

}  // namespace

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor(std::vector<Index>{}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor(std::vector<Index>{2, 0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2, 3}, Eigen::VectorXd::Zero(5)), std::invalid_argument);
    Tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(t.order() == 3);
}

TEST_CASE("inner product") {
    const Tensor eye = identity2x2();
    CHECK(inner_product(eye, eye) == doctest::Approx(2.0));

    Rng rng(11);
    const Tensor zeros({3, 4});
    const Tensor arbitrary = random_tensor({3, 4}, rng);
    CHECK(inner_product(zeros, arbitrary) == 0.0);

    const Tensor a = random_tensor({2, 3}, rng);
    const Tensor b = random_tensor({2, 3}, rng);
    CHECK(inner_product(a, b) == doctest::Approx(inner_product_loops(a, b)).epsilon(1e-14));

    CHECK_THROWS_AS(inner_product(a, zeros), std::invalid_argument);
}

TEST_CASE("hadamard_compose identity and outer products") {
    // D=1, both factors all ones.
    FactorSet ones(1, 2, {Tensor::ones({2, 2}), Tensor::ones({2, 2})});
    const Tensor composed = hadamard_compose(ones);
    for (Index i = 0; i < 4; ++i) CHECK(composed[i] == doctest::Approx(1.0));

    // D=2 with rank-one factors recovers sum_d gamma_1 (x) gamma_2.
    Rng rng(7);
    const Index p1 = 3, p2 = 4;
    std::vector<Eigen::VectorXd> g1, g2;
    FactorSet f(2, 2, {p1, p2});
    for (Index d = 0; d < 2; ++d) {
        Eigen::VectorXd a(p1), b(p2);
        for (Index i = 0; i < p1; ++i) a[i] = rng.normal();
        for (Index i = 0; i < p2; ++i) b[i] = rng.normal();
        g1.push_back(a);
        g2.push_back(b);
        for (Index i = 0; i < p1; ++i)
            for (Index j = 0; j < p2; ++j) {
                f.factor(d, 0).at({i, j}) = a[i];  // constant along mode 2
                f.factor(d, 1).at({i, j}) = b[j];  // constant along mode 1
            }
    }
    const Tensor sum = hadamard_compose(f);
    for (Index i = 0; i < p1; ++i)
        for (Index j = 0; j < p2; ++j) {
            const double expected = g1[0][i] * g2[0][j] + g1[1][i] * g2[1][j];
            CHECK(sum.at({i, j}) == doctest::Approx(expected).epsilon(1e-13));
        }
}

TEST_CASE("hadamard_compose against nested loops") {
    Rng rng(23);
    const FactorSet f = random_factors(3, {4, 5}, rng);
    const Tensor composed = hadamard_compose(f);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 5; ++j) {
            double expected = 0.0;
            for (Index d = 0; d < 3; ++d)
                expected += f.factor(d, 0).at({i, j}) * f.factor(d, 1).at({i, j});
            CHECK(composed.at({i, j}) == doctest::Approx(expected).epsilon(1e-13));
        }
}

TEST_CASE("hadamard_compose is linear in each factor") {
    Rng rng(5);
    FactorSet f = random_factors(2, {3, 3}, rng);
    const Tensor extra = random_tensor({3, 3}, rng);
    const double c = 1.7;

    const Tensor base = hadamard_compose(f);
    FactorSet bumped = f;
    bumped.factor(1, 0).data() = f.factor(1, 0).data() + c * extra.data();
    const Tensor shifted = hadamard_compose(bumped);

    FactorSet just_delta(1, 2, {Tensor({3, 3}, c * extra.data()), f.factor(1, 1)});
    const Tensor delta = hadamard_compose(just_delta);
    for (Index i = 0; i < 9; ++i)
        CHECK(shifted[i] - base[i] == doctest::Approx(delta[i]).epsilon(1e-12));
}

TEST_CASE("mode_slice_vec basics") {
    const Tensor eye = identity2x2();
    const Eigen::VectorXd row = mode_slice_vec(eye, 0, 0);
    CHECK(row.size() == 2);
    CHECK(row[0] == 1.0);
    CHECK(row[1] == 0.0);

    Rng rng(3);
    const Tensor t = random_tensor({3, 4}, rng);
    const Eigen::VectorXd col = mode_slice_vec(t, 1, 1);
    REQUIRE(col.size() == 3);
    for (Index i = 0; i < 3; ++i) CHECK(col[i] == t.at({i, 1}));

    CHECK_THROWS_AS(mode_slice_vec(t, 2, 0), std::out_of_range);
    CHECK_THROWS_AS(mode_slice_vec(t, 1, 4), std::out_of_range);
}

TEST_CASE("mode_slice_vec matches index-filter enumeration on 3-mode tensors") {
    Rng rng(17);
    const Tensor t = random_tensor({2, 3, 2}, rng);
    for (Index m = 0; m < 3; ++m) {
        for (Index j = 0; j < t.dim(m); ++j) {
            const Eigen::VectorXd slice = mode_slice_vec(t, m, j);
            // Enumerate flat indices in canonical order, keeping those whose
            // mode-m coordinate equals j.
            std::vector<double> expected;
            std::vector<Index> idx(3, 0);
            for (Index flat = 0; flat < t.size(); ++flat) {
                if (idx[static_cast<std::size_t>(m)] == j) expected.push_back(t[flat]);
                for (Index mm = 0; mm < 3; ++mm) {
                    if (++idx[static_cast<std::size_t>(mm)] < t.dim(mm)) break;
                    idx[static_cast<std::size_t>(mm)] = 0;
                }
            }
            REQUIRE(slice.size() == static_cast<Index>(expected.size()));
            for (Index r = 0; r < slice.size(); ++r)
                CHECK(slice[r] == expected[static_cast<std::size_t>(r)]);
        }
    }
}

TEST_CASE("slice round trip") {
    Rng rng(29);
    for (const auto& shape : {std::vector<Index>{4, 3}, std::vector<Index>{2, 3, 4}}) {
        Tensor t = random_tensor(shape, rng);
        const Tensor original = t;
        for (Index m = 0; m < t.order(); ++m)
            for (Index j = 0; j < t.dim(m); ++j) {
                const Eigen::VectorXd v = mode_slice_vec(t, m, j);
                set_mode_slice_vec(t, m, j, v);
            }
        for (Index i = 0; i < t.size(); ++i) CHECK(t[i] == original[i]);

        Eigen::VectorXd v = mode_slice_vec(t, 0, 1);
        v.array() += 2.5;
        set_mode_slice_vec(t, 0, 1, v);
        CHECK(mode_slice_vec(t, 0, 1).isApprox(v));
    }
}

TEST_CASE("backfit_terms edge cases") {
    Rng rng(31);
    const FactorSet single = random_factors(1, {3, 4}, rng);
    const Tensor x = random_tensor({3, 4}, rng);
    const auto terms = backfit_terms(single, x, 0, 0, 1);
    CHECK(terms.r_comp == 0.0);  // no other components

    const Tensor zeros({3, 4});
    const auto null_terms = backfit_terms(single, zeros, 0, 1, 2);
    CHECK(null_terms.psi.norm() == 0.0);
    CHECK(null_terms.r_slice == 0.0);
    CHECK(null_terms.r_comp == 0.0);

    CHECK_THROWS_AS(backfit_terms(single, x, 1, 0, 0), std::out_of_range);
    CHECK_THROWS_AS(backfit_terms(single, x, 0, 0, 5), std::out_of_range);
}

TEST_CASE("back-fitting identity holds for every block and slice") {
    Rng rng(37);
    for (const auto& shape : {std::vector<Index>{4, 4}, std::vector<Index>{3, 4, 2}}) {
        const Index modes = static_cast<Index>(shape.size());
        const FactorSet f = random_factors(3, shape, rng);
        const Tensor x = random_tensor(shape, rng);
        const double total = inner_product(hadamard_compose(f), x);
        for (Index d = 0; d < 3; ++d)
            for (Index m = 0; m < modes; ++m)
                for (Index j = 0; j < shape[static_cast<std::size_t>(m)]; ++j) {
                    const auto terms = backfit_terms(f, x, d, m, j);
                    const Eigen::VectorXd beta = mode_slice_vec(f.factor(d, m), m, j);
                    const double recon = beta.dot(terms.psi) + terms.r_slice + terms.r_comp;
                    CHECK(std::fabs(recon - total) <= 1e-12 * std::max(1.0, std::fabs(total)));
                }
    }
}

TEST_CASE("factor set invariants") {
    CHECK_THROWS_AS(FactorSet(0, 2, std::vector<Index>{2, 2}), std::invalid_argument);
    CHECK_THROWS_AS(FactorSet(1, 1, std::vector<Index>{2, 2}), std::invalid_argument);
    std::vector<Tensor> mixed;
    mixed.push_back(Tensor({2, 2}));
    mixed.push_back(Tensor({2, 3}));
    CHECK_THROWS_AS(FactorSet(1, 2, std::move(mixed)), std::invalid_argument);
}
