#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpacq/log.hpp"

namespace testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
    return m;
}

// Full-rank PSD kernel with unit-ish scale.
inline Eigen::MatrixXd random_psd(Eigen::Index n, std::uint64_t seed, Eigen::Index width = -1) {
    const Eigen::MatrixXd a = random_matrix(n, width < 0 ? n : width, seed);
    return a * a.transpose() / static_cast<double>(a.cols());
}

inline Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd s(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) s(a, b) = m(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    return s;
}

inline double det_of(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
    if (idx.empty()) return 1.0;
    return submatrix(m, idx).determinant();
}

// All k-subsets of 0..n-1 in lexicographic order.
inline std::vector<std::vector<int>> subsets(int n, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    auto rec = [&](auto&& self, int start) -> void {
        if (static_cast<int>(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (int i = start; i < n; ++i) {
            cur.push_back(i);
            self(self, i + 1);
            cur.pop_back();
        }
    };
    rec(rec, 0);
    return out;
}

// Exact k-DPP item marginals by enumeration.
inline Eigen::VectorXd kdpp_marginals(const Eigen::MatrixXd& L, int k) {
    const int n = static_cast<int>(L.rows());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    double z = 0;
    for (const auto& s : subsets(n, k)) {
        const double d = det_of(L, s);
        z += d;
        for (int i : s) m(i) += d;
    }
    return m / z;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("dpacq_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

// Captures warnings for the lifetime of the object.
struct WarningCapture {
    std::vector<std::string> messages;
    dpacq::log::Sink previous;
    WarningCapture() {
        previous = dpacq::log::set_warning_sink([this](const std::string& m) { messages.push_back(m); });
    }
    ~WarningCapture() { dpacq::log::set_warning_sink(previous); }
    bool contains(const std::string& needle) const {
        for (const auto& m : messages)
            if (m.find(needle) != std::string::npos) return true;
        return false;
    }
};

}  // namespace testing
