#pragma once

// Solvers for (a I - b Laplacian) x = rhs on a Grid, a > 0, b >= 0.

#include <sfhn/errors.hpp>
#include <sfhn/spatial.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <span>
#include <vector>

namespace sfhn {

/// Constant-coefficient tridiagonal system with sub/super diagonal `off`
/// and diagonal `diag`, factored once (Thomas algorithm).
class ThomasSolver {
  public:
    ThomasSolver() = default;

    ThomasSolver(std::size_t size, double diag, double off) : off_(off), c_prime_(size), inv_denom_(size) {
        if (size == 0) throw InvalidArgument("empty tridiagonal system");
        inv_denom_[0] = 1.0 / diag;
        c_prime_[0] = off * inv_denom_[0];
        for (std::size_t i = 1; i < size; ++i) {
            inv_denom_[i] = 1.0 / (diag - off * c_prime_[i - 1]);
            c_prime_[i] = off * inv_denom_[i];
        }
    }

    std::size_t size() const noexcept { return c_prime_.size(); }

    /// In place: x holds the right-hand side on entry.
    void solve(std::span<double> x) const {
        const std::size_t n = size();
        x[0] *= inv_denom_[0];
        for (std::size_t i = 1; i < n; ++i) x[i] = (x[i] - off_ * x[i - 1]) * inv_denom_[i];
        for (std::size_t i = n - 1; i > 0; --i) x[i - 1] -= c_prime_[i - 1] * x[i];
    }

  private:
    double off_ = 0.0;
    std::vector<double> c_prime_;
    std::vector<double> inv_denom_;
};

/// Periodic (cyclic) variant via Sherman-Morrison on top of ThomasSolver.
class CyclicThomasSolver {
  public:
    CyclicThomasSolver() = default;

    CyclicThomasSolver(std::size_t size, double diag, double off) : off_(off) {
        if (size < 3) throw InvalidArgument("cyclic system needs at least 3 unknowns");
        // A = T + u v^T with u = (gamma, 0, .., off), v = (1, 0, .., off/gamma)
        gamma_ = -diag;
        const double first = diag - gamma_;
        const double last = diag - off * off / gamma_;
        inner_ = ThomasGeneral(size, diag, off, first, last);
        z_.assign(size, 0.0);
        z_[0] = gamma_;
        z_[size - 1] = off;
        inner_.solve(z_);
        denom_ = 1.0 + z_[0] + off * z_[size - 1] / gamma_;
    }

    void solve(std::span<double> x) const {
        const std::size_t n = x.size();
        inner_.solve(x);
        const double fac = (x[0] + off_ * x[n - 1] / gamma_) / denom_;
        for (std::size_t i = 0; i < n; ++i) x[i] -= fac * z_[i];
    }

  private:
    // Tridiagonal with constant off-diagonals and modified first/last diagonal.
    class ThomasGeneral {
      public:
        ThomasGeneral() = default;
        ThomasGeneral(std::size_t n, double diag, double off, double first, double last)
            : off_(off), c_prime_(n), inv_denom_(n) {
            inv_denom_[0] = 1.0 / first;
            c_prime_[0] = off * inv_denom_[0];
            for (std::size_t i = 1; i < n; ++i) {
                const double d = (i + 1 == n) ? last : diag;
                inv_denom_[i] = 1.0 / (d - off * c_prime_[i - 1]);
                c_prime_[i] = off * inv_denom_[i];
            }
        }
        void solve(std::span<double> x) const {
            const std::size_t n = x.size();
            x[0] *= inv_denom_[0];
            for (std::size_t i = 1; i < n; ++i) x[i] = (x[i] - off_ * x[i - 1]) * inv_denom_[i];
            for (std::size_t i = n - 1; i > 0; --i) x[i - 1] -= c_prime_[i - 1] * x[i];
        }

      private:
        double off_ = 0.0;
        std::vector<double> c_prime_;
        std::vector<double> inv_denom_;
    };

    double off_ = 0.0;
    double gamma_ = 0.0;
    double denom_ = 1.0;
    ThomasGeneral inner_;
    std::vector<double> z_;
};

/// Factored (a I - b Laplacian) for a grid and its boundary condition.
/// Dirichlet-pinned nodes come out as zero.
class ImplicitOperator {
  public:
    ImplicitOperator() = default;

    ImplicitOperator(const Grid& grid, double a, double b) : grid_(grid) {
        if (!(a > 0.0) || !(b >= 0.0)) throw InvalidArgument("implicit operator needs a > 0, b >= 0");
        const double h = grid.spacing();
        const double off = -b / (h * h);
        const double diag_1d = a + 2.0 * b / (h * h);
        const int n = grid.points_per_axis();
        if (grid.dim() == 1) {
            if (grid.boundary() == Boundary::periodic)
                cyclic_ = CyclicThomasSolver(static_cast<std::size_t>(n), diag_1d, off);
            else
                thomas_ = ThomasSolver(static_cast<std::size_t>(n - 1), diag_1d, off);
            return;
        }
        build_2d(a, b);
    }

    const Grid& grid() const noexcept { return grid_; }

    /// In place: x holds the right-hand side on entry.
    void solve(std::span<double> x) const {
        if (grid_.dim() == 1) {
            if (grid_.boundary() == Boundary::periodic) {
                cyclic_.solve(x);
            } else {
                x[0] = 0.0;
                thomas_.solve(x.subspan(1));
            }
            return;
        }
        solve_2d(x);
    }

  private:
    void build_2d(double a, double b) {
        const int n = grid_.points_per_axis();
        const double h = grid_.spacing();
        const double off = -b / (h * h);
        const double diag = a + 4.0 * b / (h * h);
        // unknown numbering over non-pinned nodes
        index_.assign(grid_.size(), -1);
        int count = 0;
        for (std::size_t k = 0; k < grid_.size(); ++k)
            if (!grid_.is_pinned(k)) index_[k] = count++;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(count) * 5);
        const bool periodic = grid_.boundary() == Boundary::periodic;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const std::size_t k = static_cast<std::size_t>(i) * n + j;
                if (index_[k] < 0) continue;
                trip.emplace_back(index_[k], index_[k], diag);
                const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
                for (const auto& q : nb) {
                    int a0 = q[0], a1 = q[1];
                    if (periodic) {
                        a0 = (a0 + n) % n;
                        a1 = (a1 + n) % n;
                    } else if (a0 <= 0 || a0 >= n || a1 <= 0 || a1 >= n) {
                        continue;
                    }
                    const std::size_t kk = static_cast<std::size_t>(a0) * n + a1;
                    trip.emplace_back(index_[k], index_[kk], off);
                }
            }
        }
        Eigen::SparseMatrix<double> m(count, count);
        m.setFromTriplets(trip.begin(), trip.end());
        ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(m);
        if (ldlt_->info() != Eigen::Success) throw InvalidArgument("implicit operator factorization failed");
        rhs_.resize(count);
    }

    void solve_2d(std::span<double> x) const {
        for (std::size_t k = 0; k < x.size(); ++k)
            if (index_[k] >= 0) rhs_[index_[k]] = x[k];
        const Eigen::VectorXd sol = ldlt_->solve(rhs_);
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = index_[k] >= 0 ? sol[index_[k]] : 0.0;
    }

    Grid grid_;
    ThomasSolver thomas_;
    CyclicThomasSolver cyclic_;
    std::vector<int> index_;
    std::shared_ptr<const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
    mutable Eigen::VectorXd rhs_;
};

}  // namespace sfhn
