#include <stdexcept>
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "kbc/loss.hpp"

using namespace kbc;

TEST_CASE("uniform scores give ln(n)") {
    std::vector<double> scores(10, 0.25);
    std::vector<double> d(10);
    const double loss = loss_full_softmax(scores, 3, d);
    CHECK(loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    for (int i = 0; i < 10; ++i)
        CHECK(d[i] == doctest::Approx(0.1 - (i == 3 ? 1.0 : 0.0)).epsilon(1e-12));
}

TEST_CASE("saturated gold drives the loss to zero") {
    std::vector<double> scores = {100.0, 0.0};
    std::vector<double> d(2);
    const double loss = loss_full_softmax(scores, 0, d);
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-40);
    CHECK(std::abs(d[0]) < 1e-40);
}

TEST_CASE("large magnitudes stay finite thanks to max subtraction") {
    std::vector<double> scores = {5000.0, 4999.0, -5000.0};
    std::vector<double> d(3);
    const double loss = loss_full_softmax(scores, 1, d);
    CHECK(std::isfinite(loss));
    // logsumexp = 5000 + ln(1 + e^-1 + e^-10000); loss = logsumexp - 4999
    const double want = std::log(1.0 + std::exp(-1.0)) + 1.0;
    CHECK(loss == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("gradient matches finite differences of the scalar loss") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> scores(5);
        for (double& s : scores) s = g(rng);
        const int64_t gold = rep % 5;
        std::vector<double> d(5);
        const double base = loss_full_softmax(scores, gold, d);
        CHECK(std::isfinite(base));
        for (int j = 0; j < 5; ++j) {
            const double h = 1e-6;
            std::vector<double> up = scores, dn = scores, scratch(5);
            up[j] += h;
            dn[j] -= h;
            const double fd =
                (loss_full_softmax(up, gold, scratch) - loss_full_softmax(dn, gold, scratch)) /
                (2 * h);
            const double scale = std::max({std::abs(fd), std::abs(d[j]), 1e-6});
            CHECK(std::abs(fd - d[j]) / scale < 1e-4);
        }
    }
}

TEST_CASE("gradient row may alias the score row") {
    std::vector<double> scores = {1.0, -0.5, 2.0};
    std::vector<double> copy = scores;
    std::vector<double> d(3);
    const double want = loss_full_softmax(copy, 2, d);
    const double got = loss_full_softmax(scores, 2, scores);
    CHECK(got == doctest::Approx(want).epsilon(1e-15));
    for (int i = 0; i < 3; ++i) CHECK(scores[i] == doctest::Approx(d[i]).epsilon(1e-15));
}

TEST_CASE("errors") {
    std::vector<double> scores = {0.0, 1.0};
    std::vector<double> d(2);
    CHECK_THROWS_AS(loss_full_softmax(scores, 2, d), std::out_of_range);
    CHECK_THROWS_AS(loss_full_softmax(scores, -1, d), std::out_of_range);
    std::vector<double> short_d(1);
    CHECK_THROWS_AS(loss_full_softmax(scores, 0, short_d), std::invalid_argument);
    std::vector<double> empty;
    CHECK_THROWS_AS(loss_sampled(empty, empty), std::invalid_argument);
}

TEST_CASE("sampled loss with one tied negative is ln 2") {
    std::vector<double> row = {0.7, 0.7};
    std::vector<double> d(2);
    CHECK(loss_sampled(row, d) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(d[0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sampled row enumerating every entity equals the full softmax") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.5);
    std::vector<double> full(8), d_full(8);
    for (double& s : full) s = g(rng);
    const int64_t gold = 5;
    const double want = loss_full_softmax(full, gold, d_full);

    // pos first, then the 7 others in index order
    std::vector<double> row = {full[gold]};
    for (int i = 0; i < 8; ++i)
        if (i != gold) row.push_back(full[i]);
    std::vector<double> d(8);
    CHECK(loss_sampled(row, d) == doctest::Approx(want).epsilon(1e-12));
    CHECK(d[0] == doctest::Approx(d_full[gold]).epsilon(1e-12));
}

TEST_CASE("dominant positive saturates to zero loss") {
    std::vector<double> row = {60.0, 0.0, -3.0, 1.0};
    std::vector<double> d(4);
    const double loss = loss_sampled(row, d);
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-20);
}
