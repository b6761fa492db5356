#pragma once

// Reference computations that share no code with the library beyond plain data types.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "csddp/lp_solver.hpp"
#include "csddp/model.hpp"

namespace csddp::oracle {

/// Optimum of a bounded LP (all bounds finite) by enumerating basic solutions.
/// Returns nullopt when no vertex is feasible.
std::optional<double> vertex_enumeration(const LinearProgram& lp, double tol = 1e-9);

/// Random bounded LP with n <= 6 variables, p <= 3 equality rows and <= 4 inequality rows.
/// Most instances are feasible by construction around an interior point.
LinearProgram random_bounded_lp(std::mt19937_64& rng);

/// Same family with bounds [0, +inf) on every variable and a box enforced through inequality rows.
LinearProgram random_nonnegative_lp(std::mt19937_64& rng, std::size_t eq_rows, std::size_t ineq_rows);

/// Exact minimum cost of a deterministic storage trading at prices[i] for i < stages,
/// over every on-grid control (all multiples of `step` within the rates).
double storage_grid_dp(const std::vector<double>& prices, std::size_t stages, double capacity, double injection,
                       double withdrawal, double initial, double step);

/// Same with controls restricted to {-withdrawal, 0, injection} clipped to the stock bounds.
double storage_bang_bang_dp(const std::vector<double>& prices, std::size_t stages, double capacity, double injection,
                            double withdrawal, double initial, double step);

/// Deterministic storage as one LP over all stages; variables (u_i, C_i) per stage.
LinearProgram storage_monolithic_lp(const std::vector<double>& prices, std::size_t stages, double capacity,
                                    double injection, double withdrawal, double initial);

/// Chains the stage templates of `model` along one realized path (xi at each date, zero
/// innovations) into a single LP: stage blocks side by side, the outgoing state variables
/// of stage i feeding B of stage i + 1.
LinearProgram chained_lp(const ModelInstance& model, const std::vector<std::vector<double>>& xi_path);

/// Minimum cost over every policy that moves between stock 0 and full (toy check).
double toy_policy_enumeration(const std::vector<double>& prices, double capacity);

}  // namespace csddp::oracle
