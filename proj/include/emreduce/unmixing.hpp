#ifndef EMREDUCE_UNMIXING_HPP
#define EMREDUCE_UNMIXING_HPP

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <string>
#include <vector>

#include "core.hpp"
#include "types.hpp"

namespace emreduce {

struct SolverConfig {
    double tolerance = 1e-9;  // KKT / feasibility tolerance
    int max_iterations = 0;   // 0 = 10 * m * n at solve time
    UnmixMode mode = UnmixMode::fully_constrained;

    void validate() const {
        if (!(tolerance > 0.0) || tolerance > 1e-3)
            throw Error("SolverConfig: tolerance must be in (0, 1e-3]");
    }
};

namespace detail {

// Primal active-set solver for
//   min ||E a - x||^2   s.t.  a >= 0,  sum(a) = 1,
// working on the Gram system G = E'E, b = E'x. Starts at the best simplex
// vertex, then alternates equality-constrained subproblem solves on the
// passive set with blocking-constraint steps. All ties break to the lowest
// index, so the result is deterministic.
//
// Workspace is reused across pixels; one instance per thread.
class FclsWorkspace {
public:
    explicit FclsWorkspace(int m)
        : m_(m), chol_(m, m), rhs_u_(m), rhs_v_(m), sub_b_(m), a_(m), a_star_(m),
          grad_(m), passive_(m), in_passive_(m) {}

    // a_out receives the solution; returns iterations used, or -1 on
    // non-convergence.
    int solve(const Eigen::MatrixXd& gram, const Eigen::VectorXd& b, double tolerance,
              int max_iterations, Eigen::Ref<Eigen::VectorXd> a_out) {
        const int m = m_;
        if (m == 1) {
            a_out(0) = 1.0;
            return 0;
        }

        // feasible start: vertex minimizing ||e_k - x||^2 = G_kk - 2 b_k + const
        int start = 0;
        double best = gram(0, 0) - 2.0 * b(0);
        for (int k = 1; k < m; ++k) {
            const double v = gram(k, k) - 2.0 * b(k);
            if (v < best) {
                best = v;
                start = k;
            }
        }
        a_.setZero(m);
        a_(start) = 1.0;
        n_passive_ = 1;
        passive_[0] = start;
        std::fill(in_passive_.begin(), in_passive_.end(), false);
        in_passive_[start] = true;

        const double scale = std::max(1.0, gram.diagonal().maxCoeff());
        const double kkt_tol = tolerance * scale;
        const double ridge = 1e-12 * scale;

        for (int iter = 0; iter < max_iterations; ++iter) {
            solve_subproblem(gram, b, ridge);

            double min_val = 0.0;
            int min_pos = -1;
            for (int i = 0; i < n_passive_; ++i) {
                if (a_star_(i) < min_val) {
                    min_val = a_star_(i);
                    min_pos = i;
                }
            }

            if (min_pos < 0) {
                // subproblem solution feasible; check KKT over active indices
                for (int i = 0; i < n_passive_; ++i) a_(passive_[i]) = a_star_(i);
                for (int j = 0; j < m; ++j)
                    if (!in_passive_[j]) a_(j) = 0.0;

                grad_.head(m).noalias() = gram * a_.head(m);
                grad_.head(m) -= b;
                double lambda = 0.0;
                for (int i = 0; i < n_passive_; ++i) lambda -= grad_(passive_[i]);
                lambda /= static_cast<double>(n_passive_);

                double worst = 0.0;
                int worst_idx = -1;
                for (int j = 0; j < m; ++j) {
                    if (in_passive_[j]) continue;
                    const double mu = grad_(j) + lambda;
                    if (mu < worst) {
                        worst = mu;
                        worst_idx = j;
                    }
                }
                if (worst_idx < 0 || worst >= -kkt_tol) {
                    a_out = a_.head(m);
                    return iter + 1;
                }
                passive_[n_passive_++] = worst_idx;
                in_passive_[worst_idx] = true;
            } else {
                // step toward subproblem solution until a variable hits zero
                double t = 1.0;
                int block = -1;
                for (int i = 0; i < n_passive_; ++i) {
                    const double cur = a_(passive_[i]);
                    const double tgt = a_star_(i);
                    if (tgt < cur) {
                        const double ti = cur / (cur - tgt);
                        if (ti < t) {
                            t = ti;
                            block = i;
                        }
                    }
                }
                for (int i = 0; i < n_passive_; ++i) {
                    const int j = passive_[i];
                    a_(j) += t * (a_star_(i) - a_(j));
                    if (a_(j) < 0.0) a_(j) = 0.0;
                }
                if (block >= 0) {
                    const int j = passive_[block];
                    a_(j) = 0.0;
                    in_passive_[j] = false;
                    passive_[block] = passive_[--n_passive_];
                    // keep passive list index-sorted for deterministic math
                    std::sort(passive_.begin(), passive_.begin() + n_passive_);
                }
                if (n_passive_ == 0) return -1;  // cannot happen with sum-to-one
            }
        }
        return -1;
    }

private:
    // Equality-constrained subproblem on the passive set:
    //   min 1/2 a'Ga - b'a  s.t. 1'a = 1
    // KKT gives a = Gp^-1 (b - lambda 1) with
    // lambda = (1' Gp^-1 b - 1) / (1' Gp^-1 1). Solved via Cholesky with a
    // tiny ridge so duplicate endmembers stay well-defined.
    void solve_subproblem(const Eigen::MatrixXd& gram, const Eigen::VectorXd& b,
                          double ridge) {
        const int k = n_passive_;
        for (int i = 0; i < k; ++i) {
            sub_b_(i) = b(passive_[i]);
            for (int j = 0; j <= i; ++j)
                chol_(i, j) = gram(passive_[i], passive_[j]);
            chol_(i, i) += ridge;
        }
        cholesky(k);
        rhs_u_.head(k) = sub_b_.head(k);
        chol_solve(k, rhs_u_);
        rhs_v_.head(k).setOnes();
        chol_solve(k, rhs_v_);
        const double lambda = (rhs_u_.head(k).sum() - 1.0) / rhs_v_.head(k).sum();
        a_star_.head(k) = rhs_u_.head(k) - lambda * rhs_v_.head(k);
    }

    // in-place lower Cholesky of chol_(0..k,0..k); lower triangle holds input
    void cholesky(int k) {
        for (int j = 0; j < k; ++j) {
            double d = chol_(j, j);
            for (int s = 0; s < j; ++s) d -= chol_(j, s) * chol_(j, s);
            if (d <= 0.0) d = 1e-300;  // ridge keeps this from firing in practice
            d = std::sqrt(d);
            chol_(j, j) = d;
            for (int i = j + 1; i < k; ++i) {
                double v = chol_(i, j);
                for (int s = 0; s < j; ++s) v -= chol_(i, s) * chol_(j, s);
                chol_(i, j) = v / d;
            }
        }
    }

    void chol_solve(int k, Eigen::VectorXd& x) const {
        for (int i = 0; i < k; ++i) {
            double v = x(i);
            for (int s = 0; s < i; ++s) v -= chol_(i, s) * x(s);
            x(i) = v / chol_(i, i);
        }
        for (int i = k - 1; i >= 0; --i) {
            double v = x(i);
            for (int s = i + 1; s < k; ++s) v -= chol_(s, i) * x(s);
            x(i) = v / chol_(i, i);
        }
    }

    int m_;
    Eigen::MatrixXd chol_;
    Eigen::VectorXd rhs_u_, rhs_v_, sub_b_, a_, a_star_, grad_;
    std::vector<int> passive_;
    std::vector<char> in_passive_;
    int n_passive_ = 0;
};

}  // namespace detail

// Per-pixel linear unmixing of `image` against `set`. Fully constrained mode
// enforces a >= 0 and sum(a) = 1; unconstrained mode is plain least squares
// via column-pivoted QR. Pixels are independent and processed in parallel;
// output does not depend on the worker count.
inline AbundanceMap unmix(const EndmemberSet& set, const SpectralImage& image,
                          const SolverConfig& config = {}) {
    config.validate();
    if (set.bands() != image.bands())
        throw DimensionError("unmix: band count mismatch");
    const int m = set.size();
    const int n = set.bands();
    const int p = image.pixels();

    AbundanceMap out;
    out.mode = config.mode;
    out.solver_tolerance = config.tolerance;
    out.values.resize(m, p);

    if (config.mode == UnmixMode::unconstrained) {
        if (m > n) throw DimensionError("unmix: unconstrained mode needs m <= n");
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(set.spectra);
        parallel_for(p, [&](std::int64_t px) {
            out.values.col(px) = qr.solve(image.data.col(px));
        });
        return out;
    }

    const int max_iter = config.max_iterations > 0 ? config.max_iterations : 10 * m * n;
    const Eigen::MatrixXd gram = set.spectra.transpose() * set.spectra;

    std::atomic<std::int64_t> failed_pixel{-1};
    const int workers = worker_count();
    std::vector<detail::FclsWorkspace> spaces;
    spaces.reserve(workers);
    for (int w = 0; w < workers; ++w) spaces.emplace_back(m);

    std::vector<Eigen::VectorXd> rhs(static_cast<std::size_t>(workers), Eigen::VectorXd(m));
    const std::int64_t chunk = (p + workers - 1) / workers;
    parallel_for(p, [&](std::int64_t px) {
        const int w = static_cast<int>(px / chunk);
        // per-pixel GEMV keeps results independent of how pixels are batched
        rhs[w].noalias() = set.spectra.transpose() * image.data.col(px);
        const int it = spaces[w].solve(gram, rhs[w], config.tolerance, max_iter,
                                       out.values.col(px));
        if (it < 0) {
            std::int64_t expected = -1;
            failed_pixel.compare_exchange_strong(expected, px);
        }
    });
    if (failed_pixel.load() >= 0)
        throw NumericalError("unmix: no convergence after " + std::to_string(max_iter) +
                             " iterations, worst pixel " +
                             std::to_string(failed_pixel.load()));
    return out;
}

// E*A, carrying over the source image's shape metadata.
inline SpectralImage reconstruct(const EndmemberSet& set, const AbundanceMap& abundances,
                                 const SpectralImage* shape_source = nullptr) {
    if (abundances.endmembers() != set.size())
        throw DimensionError("reconstruct: abundance rows != endmember count");
    SpectralImage out;
    out.data = set.spectra * abundances.values;
    if (shape_source) {
        out.width = shape_source->width;
        out.height = shape_source->height;
        out.band_centers = shape_source->band_centers;
    }
    return out;
}

}  // namespace emreduce

#endif
