#include <cmath>
#include <random>

#include "doctest.h"
#include "fd_check.hpp"
#include "tsadv/tape.hpp"

using namespace tsadv;
using tsadv::testing::max_rel_error;

namespace {

TensorD col(std::vector<double> v) {
    int t = static_cast<int>(v.size());
    return TensorD({t, 1}, std::move(v));
}

// kernel [k,1,1] from plain weights
TensorD ker1(std::vector<double> w) {
    int k = static_cast<int>(w.size());
    return TensorD({k, 1, 1}, std::move(w));
}

}  // namespace

TEST_CASE("conv1d scaling kernel") {
    GradientTape<double> tape;
    int x = tape.leaf(col({1, 2, 3}));
    int w = tape.leaf(ker1({2}));
    int b = tape.leaf(TensorD({1}, 0.0));
    int y = tape.conv1d(x, w, b);
    CHECK(tape.value(y).vec() == std::vector<double>{2, 4, 6});
}

TEST_CASE("conv1d box kernel with zero padding") {
    GradientTape<double> tape;
    int x = tape.leaf(col({1, 2, 3}));
    int w = tape.leaf(ker1({1, 1, 1}));
    int b = tape.leaf(TensorD({1}, 0.0));
    int y = tape.conv1d(x, w, b);
    CHECK(tape.value(y).vec() == std::vector<double>{3, 6, 5});
}

TEST_CASE("conv1d hand-convolution oracle on random input") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    const int T = 11, Cin = 2, Cout = 3, k = 5;
    TensorD x({T, Cin}), w({k, Cin, Cout}), b({Cout});
    for (size_t i = 0; i < x.size(); ++i) x[i] = u(rng);
    for (size_t i = 0; i < w.size(); ++i) w[i] = u(rng);
    for (size_t i = 0; i < b.size(); ++i) b[i] = u(rng);

    GradientTape<double> tape;
    int y = tape.conv1d(tape.leaf(x), tape.leaf(w), tape.leaf(b));

    const int off = k / 2;
    for (int t = 0; t < T; ++t)
        for (int co = 0; co < Cout; ++co) {
            double acc = b[co];
            for (int j = 0; j < k; ++j)
                for (int ci = 0; ci < Cin; ++ci) {
                    int src = t + j - off;
                    if (src < 0 || src >= T) continue;
                    acc += x[src * Cin + ci] * w[(j * Cin + ci) * Cout + co];
                }
            CHECK(tape.value(y)[t * Cout + co] == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("conv1d on zero input returns bias per channel") {
    GradientTape<double> tape;
    int x = tape.leaf(TensorD({5, 1}, 0.0));
    int w = tape.leaf(TensorD({3, 1, 2}, 0.7));
    int b = tape.leaf(TensorD({2}, {1.5, -2.0}));
    int y = tape.conv1d(x, w, b);
    for (int t = 0; t < 5; ++t) {
        CHECK(tape.value(y)[t * 2 + 0] == 1.5);
        CHECK(tape.value(y)[t * 2 + 1] == -2.0);
    }
}

TEST_CASE("conv1d identity kernel is the identity map") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2);
    TensorD x({17, 1});
    for (size_t i = 0; i < x.size(); ++i) x[i] = u(rng);
    GradientTape<double> tape;
    int y = tape.conv1d(tape.leaf(x), tape.leaf(ker1({1})), tape.leaf(TensorD({1}, 0.0)));
    CHECK(tape.value(y).vec() == x.vec());
}

TEST_CASE("conv1d shape mismatch raises") {
    GradientTape<double> tape;
    int x = tape.leaf(TensorD({4, 2}));
    int w = tape.leaf(TensorD({3, 1, 2}));  // Cin 1 != 2
    int b = tape.leaf(TensorD({2}));
    CHECK_THROWS_AS(tape.conv1d(x, w, b), DimensionError);
}

TEST_CASE("batch_norm train mode on constant input gives zeros") {
    GradientTape<double> tape;
    BatchNormState<double> st;
    int x = tape.leaf(TensorD({6, 1}, 4.2));
    int g = tape.leaf(TensorD({1}, 1.0));
    int be = tape.leaf(TensorD({1}, 0.0));
    int y = tape.batch_norm(x, g, be, &st, BnMode::Train);
    for (size_t i = 0; i < 6; ++i) CHECK(tape.value(y)[i] == doctest::Approx(0.0));
    CHECK(st.initialized);
}

TEST_CASE("batch_norm closed-form normalize oracle") {
    GradientTape<double> tape;
    BatchNormState<double> st;
    int x = tape.leaf(col({-1, 1}));
    int g = tape.leaf(TensorD({1}, 1.0));
    int be = tape.leaf(TensorD({1}, 0.0));
    int y = tape.batch_norm(x, g, be, &st, BnMode::Train);
    // mean 0, population var 1, so out = x / sqrt(1 + bn_eps)
    double expect = 1.0 / std::sqrt(1.0 + 1e-3);
    CHECK(tape.value(y)[0] == doctest::Approx(-expect).epsilon(1e-12));
    CHECK(tape.value(y)[1] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("batch_norm gamma zero outputs beta") {
    GradientTape<double> tape;
    BatchNormState<double> st;
    int x = tape.leaf(col({3, -1, 7}));
    int g = tape.leaf(TensorD({1}, 0.0));
    int be = tape.leaf(TensorD({1}, 2.5));
    int y = tape.batch_norm(x, g, be, &st, BnMode::Train);
    for (size_t i = 0; i < 3; ++i) CHECK(tape.value(y)[i] == 2.5);
}

TEST_CASE("batch_norm infer before any training step raises") {
    GradientTape<double> tape;
    BatchNormState<double> st;  // never initialized
    int x = tape.leaf(col({1, 2}));
    int g = tape.leaf(TensorD({1}, 1.0));
    int be = tape.leaf(TensorD({1}, 0.0));
    CHECK_THROWS_AS(tape.batch_norm(x, g, be, &st, BnMode::Infer), NumericError);
}

TEST_CASE("batch_norm running statistics update only in train mode") {
    BatchNormState<double> st;
    {
        GradientTape<double> tape;
        int y = tape.batch_norm(tape.leaf(col({0, 2})), tape.leaf(TensorD({1}, 1.0)),
                                tape.leaf(TensorD({1}, 0.0)), &st, BnMode::Train);
        (void)y;
    }
    CHECK(st.running_mean[0] == doctest::Approx(1.0));
    auto saved_mean = st.running_mean[0];
    {
        GradientTape<double> tape;
        int y = tape.batch_norm(tape.leaf(col({10, 12})), tape.leaf(TensorD({1}, 1.0)),
                                tape.leaf(TensorD({1}, 0.0)), &st, BnMode::Infer);
        (void)y;
    }
    CHECK(st.running_mean[0] == saved_mean);
}

TEST_CASE("relu examples") {
    GradientTape<double> tape;
    int y = tape.relu(tape.leaf(col({-1, 0, 2})));
    CHECK(tape.value(y).vec() == std::vector<double>{0, 0, 2});

    GradientTape<double> t2;
    int z = t2.relu(t2.leaf(col({-3, -1, -0.5})));
    CHECK(t2.value(z).vec() == std::vector<double>{0, 0, 0});
}

TEST_CASE("relu subgradient convention") {
    GradientTape<double> tape;
    int x = tape.leaf(col({-1, 2}));
    int loss = tape.sum(tape.relu(x));
    tape.backward(loss);
    CHECK(tape.grad(x).vec() == std::vector<double>{0, 1});
}

TEST_CASE("global_avg_pool examples and gradient") {
    GradientTape<double> tape;
    int x = tape.leaf(col({1, 3}));
    int y = tape.global_avg_pool(x);
    CHECK(tape.value(y).vec() == std::vector<double>{2});

    GradientTape<double> t2;
    int c = t2.leaf(TensorD({4, 3}, 7.5));
    int g = t2.global_avg_pool(c);
    CHECK(t2.value(g).vec() == std::vector<double>{7.5, 7.5, 7.5});

    GradientTape<double> t3;
    int x3 = t3.leaf(TensorD({5, 2}, 1.0));
    int loss = t3.sum(t3.global_avg_pool(x3));
    t3.backward(loss);
    for (size_t i = 0; i < 10; ++i) CHECK(t3.grad(x3)[i] == doctest::Approx(0.2));
}

TEST_CASE("dense examples") {
    GradientTape<double> tape;
    int x = tape.leaf(TensorD({2}, {1, 2}));
    int w = tape.leaf(TensorD({2, 2}, {1, 0, 0, 1}));
    int b = tape.leaf(TensorD({2}, {1, 1}));
    int y = tape.dense(x, w, b);
    CHECK(tape.value(y).vec() == std::vector<double>{2, 3});

    GradientTape<double> t2;
    int x2 = t2.leaf(TensorD({3}, 0.0));
    int w2 = t2.leaf(TensorD({3, 2}, 0.9));
    int b2 = t2.leaf(TensorD({2}, {4, -1}));
    CHECK(t2.value(t2.dense(x2, w2, b2)).vec() == std::vector<double>{4, -1});

    GradientTape<double> t3;
    CHECK_THROWS_AS(t3.dense(t3.leaf(TensorD({3})), t3.leaf(TensorD({2, 2})), t3.leaf(TensorD({2}))),
                    DimensionError);
}

TEST_CASE("softmax cross entropy examples") {
    GradientTape<double> tape;
    int z = tape.leaf(TensorD({2}, {0, 0}));
    auto lp = tape.softmax_cross_entropy(z, TensorD({2}, {1, 0}));
    CHECK(tape.value(lp.loss)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(tape.value(lp.probs)[0] == doctest::Approx(0.5));
    CHECK(tape.value(lp.probs)[1] == doctest::Approx(0.5));
}

TEST_CASE("softmax cross entropy is stable for huge logits") {
    GradientTape<double> tape;
    int z = tape.leaf(TensorD({2}, {1000, 0}));
    auto lp = tape.softmax_cross_entropy(z, TensorD({2}, {1, 0}));
    CHECK(std::isfinite(tape.value(lp.loss)[0]));
    CHECK(tape.value(lp.loss)[0] == doctest::Approx(0.0));
}

TEST_CASE("softmax cross entropy against the direct formula") {
    GradientTape<double> tape;
    int z = tape.leaf(TensorD({3}, {1, 2, 3}));
    auto lp = tape.softmax_cross_entropy(z, TensorD({3}, {0, 0, 1}));
    // oracle: loss = log(sum exp(z_k)) - z_true
    double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
    CHECK(tape.value(lp.loss)[0] == doctest::Approx(lse - 3.0).epsilon(1e-12));
    CHECK(tape.value(lp.loss)[0] == doctest::Approx(0.4076).epsilon(1e-3));
}

TEST_CASE("softmax cross entropy rejects non-one-hot targets") {
    GradientTape<double> tape;
    int z = tape.leaf(TensorD({2}, {0.5, 0.5}));
    CHECK_THROWS_AS(tape.softmax_cross_entropy(z, TensorD({2}, {0.3, 0.7})), DataError);
    GradientTape<double> t2;
    int z2 = t2.leaf(TensorD({2}, {0.5, 0.5}));
    CHECK_THROWS_AS(t2.softmax_cross_entropy(z2, TensorD({2}, {1, 1})), DataError);
}

TEST_CASE("input_gradient of sum is ones, of sum of squares is 2x") {
    GradientTape<double> tape;
    int x = tape.leaf(col({5, -3, 0.5}));
    int loss = tape.sum(x);
    tape.backward(loss);
    CHECK(tape.input_gradient(loss, x).vec() == std::vector<double>{1, 1, 1});

    GradientTape<double> t2;
    int x2 = t2.leaf(col({1, -2}));
    int loss2 = t2.sum(t2.mul(x2, x2));
    t2.backward(loss2);
    CHECK(t2.input_gradient(loss2, x2).vec() == std::vector<double>{2, -4});
}

TEST_CASE("input_gradient rejects non-leaves") {
    GradientTape<double> tape;
    int x = tape.leaf(col({1, 2}));
    int r = tape.relu(x);
    int loss = tape.sum(r);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.input_gradient(loss, r), DataError);
    CHECK_THROWS_AS(tape.input_gradient(loss, 99), DataError);
}

TEST_CASE("gradient additivity over loss terms") {
    auto make_x = [] { return col({0.7, -1.3, 2.1}); };
    std::vector<double> g1, g2, gsum;
    {
        GradientTape<double> t;
        int x = t.leaf(make_x());
        int l = t.sum(t.relu(x));
        t.backward(l);
        g1 = t.grad(x).to_std();
    }
    {
        GradientTape<double> t;
        int x = t.leaf(make_x());
        int l = t.sum(t.mul(x, x));
        t.backward(l);
        g2 = t.grad(x).to_std();
    }
    {
        GradientTape<double> t;
        int x = t.leaf(make_x());
        int l = t.add(t.sum(t.relu(x)), t.sum(t.mul(x, x)));
        t.backward(l);
        gsum = t.grad(x).to_std();
    }
    for (size_t i = 0; i < g1.size(); ++i)
        CHECK(gsum[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
}

// --- finite-difference oracles -------------------------------------------

namespace {

// Builds loss = xent(dense(gap(bn(relu(conv(x)))))) over the supplied flat
// parameter vector; layout [x | kernel | bias | gamma | beta | W | fcb].
struct SmallNet {
    int T = 9, Cin = 1, Cout = 3, k = 3, K = 2;
    BnMode mode = BnMode::Train;

    std::vector<size_t> sizes() const {
        return {static_cast<size_t>(T * Cin), static_cast<size_t>(k * Cin * Cout),
                static_cast<size_t>(Cout), static_cast<size_t>(Cout), static_cast<size_t>(Cout),
                static_cast<size_t>(Cout * K), static_cast<size_t>(K)};
    }

    double loss_and_grads(const std::vector<double>& flat, std::vector<double>* grads,
                          BatchNormState<double>* persistent_state = nullptr) const {
        BatchNormState<double> local;
        BatchNormState<double>* st = persistent_state ? persistent_state : &local;
        auto s = sizes();
        size_t off = 0;
        auto take = [&](std::vector<int> shape, size_t n) {
            TensorD t(std::move(shape),
                      std::vector<double>(flat.begin() + static_cast<long>(off),
                                          flat.begin() + static_cast<long>(off + n)));
            off += n;
            return t;
        };
        GradientTape<double> tape;
        int x = tape.leaf(take({T, Cin}, s[0]));
        int w = tape.leaf(take({k, Cin, Cout}, s[1]));
        int b = tape.leaf(take({Cout}, s[2]));
        int g = tape.leaf(take({Cout}, s[3]));
        int be = tape.leaf(take({Cout}, s[4]));
        int fw = tape.leaf(take({Cout, K}, s[5]));
        int fb = tape.leaf(take({K}, s[6]));

        int h = tape.conv1d(x, w, b);
        h = tape.batch_norm(h, g, be, st, mode);
        h = tape.relu(h);
        h = tape.global_avg_pool(h);
        h = tape.dense(h, fw, fb);
        TensorD target({K}, 0.0);
        target[0] = 1.0;
        auto lp = tape.softmax_cross_entropy(h, target);
        if (grads) {
            tape.backward(lp.loss);
            grads->clear();
            for (int leaf : {x, w, b, g, be, fw, fb})
                for (double v : tape.grad(leaf).vec()) grads->push_back(v);
        }
        return tape.value(lp.loss)[0];
    }
};

}  // namespace

TEST_CASE("finite differences validate the full primitive chain (train and infer BN)") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (BnMode mode : {BnMode::Train, BnMode::Infer}) {
        SmallNet net;
        net.mode = mode;
        size_t total = 0;
        for (size_t n : net.sizes()) total += n;
        std::vector<double> flat(total);
        for (auto& v : flat) v = u(rng);
        // gamma strictly positive, away from relu kinks
        BatchNormState<double> warm;
        if (mode == BnMode::Infer) {
            SmallNet trainpass;
            trainpass.mode = BnMode::Train;
            trainpass.loss_and_grads(flat, nullptr, &warm);
        }
        std::vector<double> analytic;
        BatchNormState<double> st = warm;
        net.loss_and_grads(flat, &analytic, mode == BnMode::Infer ? &st : nullptr);
        BatchNormState<double> st2 = warm;
        auto f = [&]() {
            BatchNormState<double> frozen = st2;
            return net.loss_and_grads(flat, nullptr,
                                      mode == BnMode::Infer ? &frozen : nullptr);
        };
        CHECK(max_rel_error(flat, f, analytic) < 1e-4);
    }
}

TEST_CASE("finite differences on a two-conv-block residual composition") {
    // conv -> bn -> relu -> conv -> bn, plus shortcut add, relu, gap, dense
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    const int T = 7, C = 2, k = 3, K = 2;
    const size_t total = T * C + 2 * (k * C * C + C + C + C) + C * K + K;
    std::vector<double> flat(total);
    for (auto& v : flat) v = u(rng);

    auto run = [&](std::vector<double>* grads) {
        BatchNormState<double> st1, st2;
        size_t off = 0;
        auto take = [&](std::vector<int> shape) {
            size_t n = 1;
            for (int d : shape) n *= static_cast<size_t>(d);
            TensorD t(std::move(shape),
                      std::vector<double>(flat.begin() + static_cast<long>(off),
                                          flat.begin() + static_cast<long>(off + n)));
            off += n;
            return t;
        };
        GradientTape<double> tape;
        int x = tape.leaf(take({T, C}));
        std::vector<int> leaves = {x};
        int h = x;
        for (int blk = 0; blk < 2; ++blk) {
            int w = tape.leaf(take({k, C, C}));
            int b = tape.leaf(take({C}));
            int g = tape.leaf(take({C}));
            int be = tape.leaf(take({C}));
            leaves.insert(leaves.end(), {w, b, g, be});
            int c = tape.conv1d(h, w, b);
            c = tape.batch_norm(c, g, be, blk == 0 ? &st1 : &st2, BnMode::Train);
            h = blk == 0 ? tape.relu(c) : tape.relu(tape.add(c, x));
        }
        int fw = tape.leaf(take({C, K}));
        int fb = tape.leaf(take({K}));
        leaves.insert(leaves.end(), {fw, fb});
        int logits = tape.dense(tape.global_avg_pool(h), fw, fb);
        TensorD target({K}, 0.0);
        target[1] = 1.0;
        auto lp = tape.softmax_cross_entropy(logits, target);
        if (grads) {
            tape.backward(lp.loss);
            grads->clear();
            for (int leaf : leaves)
                for (double v : tape.grad(leaf).vec()) grads->push_back(v);
        }
        return tape.value(lp.loss)[0];
    };

    std::vector<double> analytic;
    run(&analytic);
    auto f = [&]() { return run(nullptr); };
    CHECK(max_rel_error(flat, f, analytic) < 1e-4);
}

TEST_CASE("forward determinism and bit-exact replay") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    SmallNet net;
    size_t total = 0;
    for (size_t n : net.sizes()) total += n;
    std::vector<double> flat(total);
    for (auto& v : flat) v = u(rng);

    double l1 = net.loss_and_grads(flat, nullptr);
    double l2 = net.loss_and_grads(flat, nullptr);
    CHECK(l1 == l2);

    // replay on a live tape reproduces every node value bit-exactly
    GradientTape<double> tape;
    int x = tape.leaf(col({0.3, -0.7, 1.1}));
    int w = tape.leaf(ker1({0.5, -0.2, 0.9}));
    int b = tape.leaf(TensorD({1}, 0.1));
    int y = tape.relu(tape.conv1d(x, w, b));
    auto before = tape.value(y).vec();
    tape.replay();
    CHECK(tape.value(y).vec() == before);
}

TEST_CASE("non-finite detection raises") {
    TensorD t({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
    CHECK_FALSE(t.all_finite());
    CHECK_THROWS_AS(t.require_finite("test"), NumericError);
}
