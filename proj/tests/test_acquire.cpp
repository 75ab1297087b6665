#include <doctest.h>

#include <cmath>
#include <set>

#include "dpacq/acquire.hpp"
#include "dpacq/error.hpp"
#include "support.hpp"

using namespace dpacq;

namespace {

PropertyVector synthetic_props(const Eigen::RowVectorXd& z) {
    PropertyVector p;
    p.C11 = 0.4 + 0.2 * std::tanh(z(0)) + 0.05 * z(1) * z(1);
    p.C22 = 0.4 + 0.2 * std::tanh(z(1)) - 0.03 * z(0);
    p.C12 = 0.1 + 0.02 * z(2);
    p.C33 = 0.1;
    p.full << p.C11, p.C12, 0, p.C12, p.C22, 0, 0, 0, p.C33;
    return p;
}

AcquisitionProblem make_synthetic(int n, std::uint64_t seed) {
    AcquisitionProblem prob;
    prob.latents = testing::random_matrix(n, 3, seed);
    prob.vf.resize(n);
    prob.reference_properties.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        prob.vf(i) = 0.4 + 0.2 * std::tanh(prob.latents(i, 2));
        prob.library_ids.push_back(1000 + i);
        prob.reference_properties.row(i) = response_row(synthetic_props(prob.latents.row(i)));
    }
    return prob;
}

Evaluator evaluator_for(const AcquisitionProblem& prob, int* calls = nullptr) {
    const Eigen::MatrixXd z = prob.latents;
    return [z, calls](const std::vector<int>& items) {
        if (calls) ++*calls;
        std::vector<PropertyVector> out;
        for (int i : items) out.push_back(synthetic_props(z.row(i)));
        return out;
    };
}

AcquisitionConfig small_config() {
    AcquisitionConfig c;
    c.k = 5;
    c.dv = 128;
    c.target_size = 60;
    c.master_seed = 17;
    c.gp.restarts = 2;
    c.gp.max_iter = 60;
    c.n_rep = 5;
    return c;
}

void check_distinct(const Acquisition& a) {
    const auto items = a.selected_items();
    CHECK(std::set<int>(items.begin(), items.end()).size() == items.size());
}

}  // namespace

TEST_CASE("acquire: initialization") {
    const auto prob = make_synthetic(80, 1);
    Acquisition a(prob, small_config(), evaluator_for(prob));
    a.initialize();
    CHECK(a.state().shape_feature.rows() == 80);
    CHECK(a.state().stage == Stage::I);
    CHECK(a.state().selected.empty());

    Acquisition b(prob, small_config(), evaluator_for(prob));
    b.initialize();
    a.step();
    b.step();
    CHECK(a.selected_items() == b.selected_items());
}

TEST_CASE("acquire: a library of exactly k items is taken whole") {
    const auto prob = make_synthetic(5, 2);
    auto cfg = small_config();
    Acquisition a(prob, cfg, evaluator_for(prob));
    a.initialize();
    a.step();
    auto items = a.selected_items();
    std::sort(items.begin(), items.end());
    CHECK(items == std::vector<int>({0, 1, 2, 3, 4}));
    CHECK(a.state().finished);

    AcquisitionProblem tiny = make_synthetic(4, 3);
    CHECK_THROWS_AS(Acquisition(tiny, cfg, evaluator_for(tiny)), UsageError);
}

TEST_CASE("acquire: stage I bookkeeping") {
    const auto prob = make_synthetic(120, 4);
    auto cfg = small_config();
    cfg.tau1 = 1e-12;
    cfg.tau2 = 0;
    Acquisition a(prob, cfg, evaluator_for(prob));
    a.initialize();
    a.step();
    // D_z + 2 = 5 points: first fit, no residual yet
    CHECK(a.state().residual_history.empty());
    for (int t = 2; t <= 6; ++t) {
        a.step();
        CHECK(a.state().selected.size() == static_cast<std::size_t>(5 * t));
        CHECK(a.state().residual_history.size() == a.state().omega_history.size() - 1);
    }
    CHECK(a.state().stage == Stage::I);
    check_distinct(a);
    CHECK(a.state().history.size() == 6);
    CHECK(std::isnan(a.state().history[0].residual));
    CHECK_FALSE(std::isnan(a.state().history[1].residual));
}

TEST_CASE("acquire: infinite first threshold forces the transition after i_tol residuals") {
    const auto prob = make_synthetic(120, 5);
    auto cfg = small_config();
    cfg.tau1 = std::numeric_limits<double>::infinity();
    cfg.tau2 = 0;
    cfg.i_tol = 3;
    Acquisition a(prob, cfg, evaluator_for(prob));
    a.initialize();
    // fit at 1, residuals at 2, 3, 4 -> stage II from iteration 5
    for (int t = 1; t <= 4; ++t) {
        CHECK(a.state().stage == Stage::I);
        a.step();
    }
    CHECK(a.state().stage == Stage::II);
    a.step();
    CHECK(a.state().history.back().stage == Stage::II);
    int property_items = 0;
    for (const auto& s : a.state().selected)
        if (s.iteration == 5 && s.tag == BatchTag::property) ++property_items;
    CHECK(property_items == 4);  // floor(0.8 * 5)
}

TEST_CASE("acquire: stage transitions follow the residual counters") {
    const auto prob = make_synthetic(200, 6);
    auto cfg = small_config();
    cfg.tau1 = 0.3;
    cfg.tau2 = 0.1;
    cfg.i_tol = 2;
    cfg.target_size = 120;
    Acquisition a(prob, cfg, evaluator_for(prob));
    a.initialize();
    a.run();
    check_distinct(a);
    // Replay the counters from the history rows.
    Stage stage = Stage::I;
    int below1 = 0, below2 = 0;
    for (const auto& row : a.state().history) {
        CHECK(row.stage == stage);
        if (std::isnan(row.residual)) continue;
        if (stage == Stage::I) {
            below1 = row.residual < cfg.tau1 ? below1 + 1 : 0;
            if (below1 >= cfg.i_tol) stage = Stage::II;
        } else if (stage == Stage::II) {
            below2 = row.residual < cfg.tau2 ? below2 + 1 : 0;
            if (below2 >= cfg.i_tol) stage = Stage::III;
        }
    }
    CHECK(stage == a.state().stage);
    for (std::size_t i = 1; i < a.state().history.size(); ++i)
        CHECK(static_cast<int>(a.state().history[i].stage) >= static_cast<int>(a.state().history[i - 1].stage));
}

TEST_CASE("acquire: epsilon extremes") {
    const auto prob = make_synthetic(150, 7);
    for (double eps : {0.0, 1.0}) {
        auto cfg = small_config();
        cfg.tau1 = std::numeric_limits<double>::infinity();
        cfg.tau2 = 0;
        cfg.i_tol = 1;
        cfg.epsilon = eps;
        cfg.target_size = 40;
        Acquisition a(prob, cfg, evaluator_for(prob));
        a.initialize();
        a.run();
        check_distinct(a);
        CHECK(a.state().selected.size() == 40);
        for (const auto& s : a.state().selected) {
            if (s.iteration <= 2) {
                CHECK(s.tag == BatchTag::shape);
            } else {
                CHECK(s.tag == (eps == 1.0 ? BatchTag::property : BatchTag::shape));
            }
        }
        // the shape feature is conditioned on every selected item either way
        CHECK(a.state().shape_feature.rows() == 150 - 40);
        // epsilon = 0 still refits the GP every stage II iteration
        if (eps == 0.0) CHECK(a.state().omega_history.size() == 8);
    }
}

TEST_CASE("acquire: unit quality leaves the sampler unchanged") {
    const auto prob = make_synthetic(60, 8);
    const auto f = rff_features(prob.latents, 1.0, 64, 3);
    const auto w = apply_quality(f, Eigen::VectorXd::Ones(f.rows()));
    for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(sample_kdpp(f, 6, seed).indices == sample_kdpp(w, 6, seed).indices);
}

TEST_CASE("acquire: target size and stop reasons") {
    const auto prob = make_synthetic(300, 9);
    auto cfg = small_config();
    cfg.k = 10;
    cfg.target_size = 100;
    cfg.track_gains = false;
    Acquisition a(prob, cfg, evaluator_for(prob));
    a.initialize();
    a.run();
    CHECK(a.state().iteration == 10);
    CHECK(a.state().selected.size() == 100);
    CHECK(a.state().stop_reason == "target size reached");

    cfg.target_size = 95;
    Acquisition b(prob, cfg, evaluator_for(prob));
    b.initialize();
    b.run();
    CHECK(b.state().selected.size() == 95);
    CHECK(b.state().iteration == 10);

    cfg.target_size = 1000;
    cfg.i_max = 3;
    Acquisition c(prob, cfg, evaluator_for(prob));
    c.initialize();
    c.run();
    CHECK(c.state().iteration == 3);
    CHECK(c.state().stop_reason == "iteration cap reached");
}

TEST_CASE("acquire: exhausting the library") {
    const auto prob = make_synthetic(23, 10);
    auto cfg = small_config();
    cfg.dv = 256;
    cfg.target_size = 1000;
    Acquisition a(prob, cfg, evaluator_for(prob));
    a.initialize();
    a.run();
    check_distinct(a);
    CHECK(a.state().selected.size() == 23);
    CHECK(a.state().finished);
}

TEST_CASE("acquire: rank below k shrinks the batch with a warning") {
    auto prob = make_synthetic(40, 11);
    auto cfg = small_config();
    cfg.dv = 3;
    cfg.target_size = 20;
    testing::WarningCapture w;
    Acquisition a(prob, cfg, evaluator_for(prob));
    a.initialize();
    a.step();
    CHECK(a.state().selected.size() == 3);
    CHECK(w.contains("RankTooLow"));
    a.run();
    CHECK(a.state().finished);
    check_distinct(a);
}

TEST_CASE("acquire: stage III freezes the model") {
    const auto prob = make_synthetic(200, 12);
    auto cfg = small_config();
    cfg.tau1 = std::numeric_limits<double>::infinity();
    cfg.tau2 = 1e300;
    cfg.i_tol = 1;
    cfg.target_size = 80;
    Acquisition a(prob, cfg, evaluator_for(prob));
    a.initialize();
    a.run();
    // fit 1, residual 2 -> II, residual 3 -> III
    CHECK(a.state().stage == Stage::III);
    CHECK(a.state().omega_history.size() == 3);
    const Eigen::VectorXd omega = a.state().gp->omega;
    for (const auto& row : a.state().history) {
        if (row.iter > 3) {
            CHECK(row.stage == Stage::III);
            CHECK(std::isnan(row.residual));
        }
    }
    CHECK(a.state().gp->omega == omega);
    CHECK(a.state().gp_train_count == 15);
}

TEST_CASE("acquire: gains are reported and deterministic") {
    const auto prob = make_synthetic(150, 13);
    auto cfg = small_config();
    cfg.tau1 = std::numeric_limits<double>::infinity();
    cfg.tau2 = 0;
    cfg.i_tol = 2;
    Acquisition a(prob, cfg, evaluator_for(prob));
    Acquisition b(prob, cfg, evaluator_for(prob));
    a.initialize();
    b.initialize();
    a.run();
    b.run();
    REQUIRE(a.state().history.size() == b.state().history.size());
    for (std::size_t i = 0; i < a.state().history.size(); ++i) {
        const auto& x = a.state().history[i];
        const auto& y = b.state().history[i];
        CHECK(x.gain_shape == y.gain_shape);
        CHECK(x.gain_property == y.gain_property);
        CHECK(std::isfinite(x.gain_shape));
        CHECK(std::isfinite(x.gain_property));
    }
    CHECK(a.selected_items() == b.selected_items());
}

TEST_CASE("acquire: evaluator failures propagate") {
    const auto prob = make_synthetic(50, 14);
    Acquisition a(prob, small_config(), [](const std::vector<int>&) -> std::vector<PropertyVector> {
        throw SolverSingular("boom");
    });
    a.initialize();
    CHECK_THROWS_AS(a.step(), SolverSingular);
    Acquisition b(prob, small_config(), [](const std::vector<int>&) { return std::vector<PropertyVector>(1); });
    b.initialize();
    CHECK_THROWS_AS(b.step(), DimensionMismatch);
}

TEST_CASE("acquire: configuration validation") {
    const auto prob = make_synthetic(50, 15);
    auto cfg = small_config();
    cfg.tau2 = cfg.tau1;
    CHECK_THROWS_AS(Acquisition(prob, cfg, evaluator_for(prob)), ConfigError);
    cfg = small_config();
    cfg.epsilon = 1.5;
    CHECK_THROWS_AS(Acquisition(prob, cfg, evaluator_for(prob)), ConfigError);
    auto bad = prob;
    bad.vf.resize(10);
    CHECK_THROWS_AS(Acquisition(bad, small_config(), evaluator_for(bad)), DimensionMismatch);
}
