#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "helmfem/estimator.hpp"
#include "helmfem/fields.hpp"
#include "helmfem/system.hpp"
#include "helmfem/triangulation.hpp"

namespace helmfem {

enum class MarkBranch { doerfler, data };

inline const char* to_string(MarkBranch b)
{
    return b == MarkBranch::doerfler ? "doerfler" : "data";
}

struct AfemConfig {
    double theta_A = 0.1;    // bulk parameter of the Doerfler marking
    double kappa = 0.5;      // branch guard mu^2 <= kappa * lambda^2
    double rho_B = 0.75;     // data approximation reduction factor
    int k = 0;
    long max_ndof = 200000;
    int max_levels = 40;
    int quad_degree = 8;
};

struct AfemRecord {
    int level = 0;
    long ndof = 0;
    long card_T = 0;
    double lambda = 0.0;
    double mu = 0.0;
    std::optional<double> error;           // ||p - p_h|| when exact p is known
    std::optional<double> curl_alpha_error;
    MarkBranch branch = MarkBranch::doerfler;
};

/// Minimal-cardinality set M with theta * sum(eta2) <= sum(eta2 over M).
/// Ties are broken by ascending triangle id, so the result is deterministic.
inline std::vector<int> doerfler_mark(const Eigen::VectorXd& eta2, double theta)
{
    detail::require(theta > 0.0 && theta <= 1.0, "doerfler_mark: theta out of (0,1]");
    const double total = eta2.sum();
    std::vector<int> order(eta2.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (eta2[a] != eta2[b]) return eta2[a] > eta2[b];
        return a < b;
    });
    std::vector<int> marked;
    double acc = 0.0;
    for (int t : order) {
        if (eta2[t] <= 0.0) break;
        if (acc >= theta * total) break;
        marked.push_back(t);
        acc += eta2[t];
    }
    return marked;
}

/// Computes an admissible refinement T of `mesh` with
/// mu^2(T) <= rho_B * mu^2(mesh) by repeated bulk marking of the largest
/// data oscillations, with re-evaluation after every bisection round.
inline Triangulation data_mark(const Triangulation& mesh, int k,
                               const VectorField& phi,
                               const std::optional<VectorField>& grad_uD,
                               double rho_B, int quad_degree = 8,
                               MuCache* cache = nullptr)
{
    detail::require(rho_B > 0.0 && rho_B < 1.0, "data_mark: rho_B out of (0,1)");
    XhSpace xh0(mesh, k);
    Eigen::VectorXd mu2 = estimate_mu(xh0, phi, grad_uD, quad_degree, cache);
    const double target = rho_B * mu2.sum();
    detail::require(mu2.sum() > 0.0, "data_mark: zero data oscillation");

    Triangulation cur = mesh;
    double prev = mu2.sum();
    for (int round = 0; round < 200; ++round) {
        if (mu2.sum() <= target) return cur;
        const double excess = mu2.sum() - target;
        const double theta = std::min(1.0, std::max(excess / mu2.sum(), 0.25));
        cur = cur.bisect(doerfler_mark(mu2, theta));
        XhSpace xh(cur, k);
        mu2 = estimate_mu(xh, phi, grad_uD, quad_degree, cache);
        if (!(mu2.sum() < prev))
            throw std::runtime_error(
                "data_mark: data oscillation did not decrease under refinement");
        prev = mu2.sum();
    }
    throw std::runtime_error("data_mark: reduction target not reached");
}

/// Adaptive loop with separate marking: solve, estimate, then either
/// Doerfler marking on lambda (when mu^2 <= kappa * lambda^2) or a data
/// approximation step followed by the overlay with the current mesh.
inline std::vector<AfemRecord> afem_loop(const Triangulation& initial,
                                         const ProblemData& prob,
                                         const AfemConfig& cfg)
{
    std::vector<AfemRecord> history;
    Triangulation cur = initial;
    SolveOptions opts;
    opts.quad_degree = cfg.quad_degree;
    MuCache mu_cache;
    for (int level = 0;; ++level) {
        MixedSolution sol = solve_mixed(cur, cfg.k, prob.phi, prob.grad_uD, opts);
        EstimatorReport est = estimate(sol, prob, cfg.quad_degree, &mu_cache);

        AfemRecord rec;
        rec.level = level;
        rec.ndof = sol.ndof;
        rec.card_T = cur.n_triangles();
        rec.lambda = est.lambda();
        rec.mu = est.mu();
        if (prob.exact_p)
            rec.error = exact_error(sol, *prob.exact_p, cfg.quad_degree);
        if (prob.exact_curl_alpha) {
            const Eigen::VectorXd curl = sol.yh.curl_to_x(sol.alpha, sol.xh);
            rec.curl_alpha_error =
                sol.xh.l2_error(curl, *prob.exact_curl_alpha, cfg.quad_degree);
        }
        rec.branch = (est.mu2_total <= cfg.kappa * est.lambda2_total)
                         ? MarkBranch::doerfler : MarkBranch::data;
        history.push_back(rec);

        if (est.lambda2_total + est.mu2_total <= 0.0) break;
        if (rec.ndof >= cfg.max_ndof || level >= cfg.max_levels) break;

        if (rec.branch == MarkBranch::doerfler) {
            const auto marked = doerfler_mark(est.lambda2, cfg.theta_A);
            if (marked.empty()) break;
            cur = cur.bisect(marked);
        } else {
            Triangulation refined = data_mark(cur, cfg.k, prob.phi, prob.grad_uD,
                                              cfg.rho_B, cfg.quad_degree, &mu_cache);
            cur = overlay(cur, refined);
        }
    }
    return history;
}

} // namespace helmfem
